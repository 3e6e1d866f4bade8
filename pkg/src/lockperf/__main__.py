import sys

from lockperf.cli import main

sys.exit(main())
