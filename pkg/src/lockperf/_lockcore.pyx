# cython: language_level=3, boundscheck=False, wraparound=False
"""Native CLH and spin locks with nop work loops that run without the GIL.

Atomics are GCC/Clang ``__atomic`` builtins.  Every lock word and CLH node
sits on its own 64-byte line.  Waiters spin with a pause hint and fall back
to ``sched_yield`` so oversubscribed runs (more threads than CPUs) still make
progress.
"""

from libc.stdlib cimport free

cdef extern from *:
    """
    #include <sched.h>
    #include <stdlib.h>
    #include <string.h>

    #define LP_LINE 64
    #define LP_SPIN_LIMIT 128

    typedef struct { volatile int locked; char pad[LP_LINE - sizeof(int)]; } lp_node;
    typedef struct { lp_node *volatile ptr; char pad[LP_LINE - sizeof(void *)]; } lp_head;
    typedef struct { volatile long value; char pad[LP_LINE - sizeof(long)]; } lp_word;

    static inline void *lp_alloc_line(size_t size) {
        void *mem = NULL;
        if (posix_memalign(&mem, LP_LINE, size) != 0) return NULL;
        memset(mem, 0, size);
        return mem;
    }

    static inline void lp_relax(unsigned *spins) {
        if (++*spins >= LP_SPIN_LIMIT) { *spins = 0; sched_yield(); return; }
    #if defined(__x86_64__) || defined(__i386__)
        __builtin_ia32_pause();
    #endif
    }

    /* one work unit: nop + counter increment + conditional jump */
    static inline void lp_work(long k) {
        for (long i = 0; i < k; i++) __asm__ __volatile__("nop" ::: "memory");
    }

    static inline lp_node *lp_clh_swap(lp_head *head, lp_node *mine) {
        return __atomic_exchange_n(&head->ptr, mine, __ATOMIC_ACQ_REL);
    }

    static inline void lp_clh_wait(lp_node *pred) {
        unsigned spins = 0;
        while (__atomic_load_n(&pred->locked, __ATOMIC_ACQUIRE)) lp_relax(&spins);
    }

    /* releases my node and returns the node recycled for the next operation */
    static inline lp_node *lp_clh_unlock(lp_node *mine, lp_node *pred) {
        __atomic_store_n(&mine->locked, 0, __ATOMIC_RELEASE);
        pred->locked = 1;
        return pred;
    }

    static inline void lp_spin_lock(lp_word *word) {
        unsigned spins = 0;
        long expected;
        for (;;) {
            expected = 0;
            if (__atomic_compare_exchange_n(&word->value, &expected, 1, 0,
                                            __ATOMIC_ACQUIRE, __ATOMIC_RELAXED))
                return;
            lp_relax(&spins);
        }
    }

    static inline void lp_spin_unlock(lp_word *word) {
        __atomic_store_n(&word->value, 0, __ATOMIC_RELEASE);
    }

    static inline long lp_load(lp_word *word) {
        return __atomic_load_n(&word->value, __ATOMIC_ACQUIRE);
    }

    static inline void lp_store(lp_word *word, long v) {
        __atomic_store_n(&word->value, v, __ATOMIC_RELEASE);
    }
    """
    ctypedef struct lp_node:
        int locked
    ctypedef struct lp_head:
        lp_node* ptr
    ctypedef struct lp_word:
        long value
    void* lp_alloc_line(size_t size) nogil
    void lp_work(long k) nogil
    lp_node* lp_clh_swap(lp_head* head, lp_node* mine) nogil
    void lp_clh_wait(lp_node* pred) nogil
    lp_node* lp_clh_unlock(lp_node* mine, lp_node* pred) nogil
    void lp_spin_lock(lp_word* word) nogil
    void lp_spin_unlock(lp_word* word) nogil
    long lp_load(lp_word* word) nogil
    void lp_store(lp_word* word, long v) nogil


BACKEND = "compiled"

cdef enum:
    ST_WARMUP = 0
    ST_MEASURE = 1
    ST_STOP = 2

WARMUP = ST_WARMUP
MEASURE = ST_MEASURE
STOP = ST_STOP


cdef lp_word* _new_word() except NULL:
    cdef lp_word* word = <lp_word*> lp_alloc_line(sizeof(lp_word))
    if word == NULL:
        raise MemoryError()
    return word


cdef class ClhHandle:
    """Per-thread node; ``node`` changes hands on every release."""
    cdef ClhLock lock
    cdef lp_node* node
    cdef lp_node* pred


cdef class ClhLock:
    cdef lp_head* head
    cdef list _nodes  # every node ever allocated, as addresses, for freeing

    def __cinit__(self):
        self._nodes = []
        self.head = <lp_head*> lp_alloc_line(sizeof(lp_head))
        if self.head == NULL:
            raise MemoryError()
        self.head.ptr = self._new_node(0)

    def __dealloc__(self):
        for addr in self._nodes:
            free(<void*> <size_t> addr)
        free(self.head)

    cdef lp_node* _new_node(self, int locked) except NULL:
        cdef lp_node* node = <lp_node*> lp_alloc_line(sizeof(lp_node))
        if node == NULL:
            raise MemoryError()
        node.locked = locked
        self._nodes.append(<size_t> node)
        return node

    def register(self):
        cdef ClhHandle handle = ClhHandle.__new__(ClhHandle)
        handle.lock = self
        handle.node = self._new_node(1)
        handle.pred = NULL
        return handle

    def acquire(self, ClhHandle handle not None):
        with nogil:
            handle.pred = lp_clh_swap(self.head, handle.node)
            lp_clh_wait(handle.pred)

    def release(self, ClhHandle handle not None):
        handle.node = lp_clh_unlock(handle.node, handle.pred)
        handle.pred = NULL

    @property
    def node_count(self):
        return len(self._nodes)


cdef class SpinLock:
    cdef lp_word* word

    def __cinit__(self):
        self.word = _new_word()

    def __dealloc__(self):
        free(self.word)

    def register(self):
        return None

    def acquire(self, handle=None):
        with nogil:
            lp_spin_lock(self.word)

    def release(self, handle=None):
        lp_spin_unlock(self.word)


cdef class BenchControl:
    """Shared run state flipped by the coordinating thread."""
    cdef lp_word* word

    def __cinit__(self):
        self.word = _new_word()

    def __dealloc__(self):
        free(self.word)

    @property
    def state(self):
        return lp_load(self.word)

    def set_state(self, long state):
        lp_store(self.word, state)


cdef class SharedCounter:
    """Plain (non-atomic) counter; only correct under mutual exclusion."""
    cdef lp_word* word

    def __cinit__(self):
        self.word = _new_word()

    def __dealloc__(self):
        free(self.word)

    @property
    def value(self):
        return self.word.value


cdef class OrderRecorder:
    """Logs swap order and acquisition order under its own spin word."""
    cdef lp_word* guard
    cdef list swaps
    cdef list acquisitions

    def __cinit__(self):
        self.guard = _new_word()
        self.swaps = []
        self.acquisitions = []

    def __dealloc__(self):
        free(self.guard)

    @property
    def swap_order(self):
        return list(self.swaps)

    @property
    def acquisition_order(self):
        return list(self.acquisitions)


cdef inline int _kind(lock) except -1:
    if lock is None:
        return 0
    if isinstance(lock, ClhLock):
        return 1
    if isinstance(lock, SpinLock):
        return 2
    raise TypeError(f"unsupported lock type {type(lock).__name__}")


cdef inline ClhHandle _handle(lock, handle):
    if handle is None:
        return lock.register()
    return handle


def work(long k):
    with nogil:
        lp_work(k)


def run_operations(lock, long c, long p, long count, handle=None):
    """Run ``count`` lock/critical/unlock/parallel operations back to back."""
    cdef int kind = _kind(lock)
    cdef ClhHandle h = None
    cdef lp_head* head = NULL
    cdef lp_word* word = NULL
    cdef lp_node* pred
    cdef long i
    if kind == 1:
        h = _handle(lock, handle)
        head = (<ClhLock> lock).head
    elif kind == 2:
        word = (<SpinLock> lock).word
    with nogil:
        for i in range(count):
            if kind == 1:
                pred = lp_clh_swap(head, h.node)
                lp_clh_wait(pred)
                lp_work(c)
                h.node = lp_clh_unlock(h.node, pred)
            elif kind == 2:
                lp_spin_lock(word)
                lp_work(c)
                lp_spin_unlock(word)
            else:
                lp_work(c)
            lp_work(p)


def run_operation(lock, long c, long p, handle=None):
    run_operations(lock, c, p, 1, handle)


def run_until(lock, long c, long p, BenchControl control not None, handle=None):
    """Loop operations until STOP; return how many completed while MEASURE."""
    cdef int kind = _kind(lock)
    cdef ClhHandle h = None
    cdef lp_head* head = NULL
    cdef lp_word* word = NULL
    cdef lp_word* state = control.word
    cdef lp_node* pred
    cdef long counted = 0
    cdef long s
    if kind == 1:
        h = _handle(lock, handle)
        head = (<ClhLock> lock).head
    elif kind == 2:
        word = (<SpinLock> lock).word
    with nogil:
        while True:
            if kind == 1:
                pred = lp_clh_swap(head, h.node)
                lp_clh_wait(pred)
                lp_work(c)
                h.node = lp_clh_unlock(h.node, pred)
            elif kind == 2:
                lp_spin_lock(word)
                lp_work(c)
                lp_spin_unlock(word)
            else:
                lp_work(c)
            lp_work(p)
            s = lp_load(state)
            if s == ST_MEASURE:
                counted += 1
            elif s == ST_STOP:
                break
    return counted


def hammer(lock, long ops, long c, SharedCounter counter not None, handle=None):
    """Increment ``counter`` once per operation with a read, C-loop, write sequence."""
    cdef int kind = _kind(lock)
    cdef ClhHandle h = None
    cdef lp_head* head = NULL
    cdef lp_word* word = NULL
    cdef lp_word* target = counter.word
    cdef lp_node* pred
    cdef long i, seen
    if kind == 0:
        raise TypeError("hammer needs a lock")
    if kind == 1:
        h = _handle(lock, handle)
        head = (<ClhLock> lock).head
    else:
        word = (<SpinLock> lock).word
    with nogil:
        for i in range(ops):
            if kind == 1:
                pred = lp_clh_swap(head, h.node)
                lp_clh_wait(pred)
            else:
                lp_spin_lock(word)
            seen = target.value
            lp_work(c)
            target.value = seen + 1
            if kind == 1:
                h.node = lp_clh_unlock(h.node, pred)
            else:
                lp_spin_unlock(word)


def run_recorded(ClhLock lock not None, long ops, long c, long p,
                 OrderRecorder recorder not None, long tag, handle=None):
    """CLH operations that log (swap, acquire) events under the recorder's guard."""
    cdef ClhHandle h = _handle(lock, handle)
    cdef lp_node* pred
    cdef long i
    for i in range(ops):
        with nogil:
            lp_spin_lock(recorder.guard)
            pred = lp_clh_swap(lock.head, h.node)
        recorder.swaps.append(tag)
        with nogil:
            lp_spin_unlock(recorder.guard)
            lp_clh_wait(pred)
            lp_spin_lock(recorder.guard)
        recorder.acquisitions.append(tag)
        with nogil:
            lp_spin_unlock(recorder.guard)
            lp_work(c)
            h.node = lp_clh_unlock(h.node, pred)
            lp_work(p)
