# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scheduling kernels; mirrors detplace._pykernels exactly."""

from libc.stdlib cimport malloc, free

cdef double EPS = 1e-9


cdef long _sgs(int n, const int* order, const long* dur, const double* cpu,
               const double* ram, double cpu_cap, double ram_cap,
               long* starts, long* times, double* cu, double* ru) nogil:
    cdef int nseg = 1
    cdef int i, j, k, m, q
    cdef long s = 0, e = 0, d, makespan = 0
    cdef double c, r
    cdef bint ok
    times[0] = 0
    cu[0] = 0.0
    ru[0] = 0.0
    for i in range(n):
        j = order[i]
        d = dur[j]
        c = cpu[j]
        r = ram[j]
        k = 0
        while True:
            if k >= nseg:
                return -1
            s = times[k]
            e = s + d
            m = k
            ok = True
            while m < nseg and times[m] < e:
                if cu[m] + c > cpu_cap + EPS or ru[m] + r > ram_cap + EPS:
                    ok = False
                    break
                m += 1
            if ok:
                break
            k = m + 1
        starts[j] = s
        if e > makespan:
            makespan = e
        m = k
        while m < nseg and times[m] < e:
            m += 1
        if m == nseg or times[m] != e:
            q = nseg
            while q > m:
                times[q] = times[q - 1]
                cu[q] = cu[q - 1]
                ru[q] = ru[q - 1]
                q -= 1
            times[m] = e
            cu[m] = cu[m - 1]
            ru[m] = ru[m - 1]
            nseg += 1
        for q in range(k, m):
            cu[q] += c
            ru[q] += r
    return makespan


cdef class _Work:
    cdef int n
    cdef int* order
    cdef long* dur
    cdef double* cpu
    cdef double* ram
    cdef long* starts
    cdef long* times
    cdef double* cu
    cdef double* ru

    def __cinit__(self, dur, cpu, ram):
        cdef int i, n = len(dur)
        self.n = n
        self.order = <int*> malloc((n + 1) * sizeof(int))
        self.dur = <long*> malloc((n + 1) * sizeof(long))
        self.cpu = <double*> malloc((n + 1) * sizeof(double))
        self.ram = <double*> malloc((n + 1) * sizeof(double))
        self.starts = <long*> malloc((n + 1) * sizeof(long))
        self.times = <long*> malloc((2 * n + 2) * sizeof(long))
        self.cu = <double*> malloc((2 * n + 2) * sizeof(double))
        self.ru = <double*> malloc((2 * n + 2) * sizeof(double))
        if (self.order == NULL or self.dur == NULL or self.cpu == NULL or self.ram == NULL
                or self.starts == NULL or self.times == NULL or self.cu == NULL or self.ru == NULL):
            raise MemoryError()
        for i in range(n):
            self.dur[i] = dur[i]
            self.cpu[i] = cpu[i]
            self.ram[i] = ram[i]

    def __dealloc__(self):
        free(self.order)
        free(self.dur)
        free(self.cpu)
        free(self.ram)
        free(self.starts)
        free(self.times)
        free(self.cu)
        free(self.ru)

    cdef long run(self, double cpu_cap, double ram_cap) nogil:
        return _sgs(self.n, self.order, self.dur, self.cpu, self.ram, cpu_cap, ram_cap,
                    self.starts, self.times, self.cu, self.ru)

    cdef list starts_list(self):
        return [self.starts[i] for i in range(self.n)]


def serial_sgs(order, dur, cpu, ram, double cpu_cap, double ram_cap):
    """Serial schedule generation; see detplace._pykernels.serial_sgs."""
    cdef _Work w = _Work(dur, cpu, ram)
    cdef int i
    for i in range(w.n):
        w.order[i] = order[i]
    cdef long ms = w.run(cpu_cap, ram_cap)
    if ms < 0:
        raise ValueError("a job exceeds a resource cap on its own")
    return w.starts_list(), ms


def ls_schedule(dur, cpu, ram, double cpu_cap, double ram_cap, int max_iter):
    """Local search over priority lists; see detplace._pykernels.ls_schedule."""
    cdef _Work w = _Work(dur, cpu, ram)
    cdef int n = w.n
    cdef int i, k, it, move, tmp
    cdef long best, ms, move_ms
    cdef long evals = 1
    init = sorted(range(n), key=lambda i: (-dur[i], i))
    for i in range(n):
        w.order[i] = init[i]
    best = w.run(cpu_cap, ram_cap)
    if best < 0:
        raise ValueError("a job exceeds a resource cap on its own")
    with nogil:
        for it in range(max_iter):
            move = -1
            move_ms = best
            for k in range(n - 1):
                tmp = w.order[k]; w.order[k] = w.order[k + 1]; w.order[k + 1] = tmp
                ms = w.run(cpu_cap, ram_cap)
                evals += 1
                tmp = w.order[k]; w.order[k] = w.order[k + 1]; w.order[k + 1] = tmp
                if ms < move_ms:
                    move = k
                    move_ms = ms
            if move < 0:
                break
            tmp = w.order[move]; w.order[move] = w.order[move + 1]; w.order[move + 1] = tmp
            best = move_ms
        best = w.run(cpu_cap, ram_cap)
    return w.starts_list(), best, evals
