"""Pure-Python scheduling kernels.

Reference implementation of the compiled ``_ckernels`` module; both expose
the same two functions with identical results.  Durations are integer slot
counts, resource demands are floats, and the usage profile is kept as a list
of breakpoints so cost does not depend on the length of the time horizon.
"""

EPS = 1e-9


def serial_sgs(order, dur, cpu, ram, cpu_cap, ram_cap):
    """Serial schedule generation: place jobs in ``order`` at their earliest
    start where both caps hold for the whole run.

    Returns ``(starts, makespan)`` in slots; ``starts`` is indexed by job.
    """
    n = len(dur)
    starts = [0] * n
    times = [0]
    cu = [0.0]
    ru = [0.0]
    makespan = 0
    for j in order:
        d, c, r = dur[j], cpu[j], ram[j]
        k = 0
        nseg = len(times)
        while True:
            if k >= nseg:
                raise ValueError(f"job {j} exceeds a resource cap on its own")
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
        # split at e so [s, e) is a union of whole segments
        m = k
        while m < nseg and times[m] < e:
            m += 1
        if m == nseg or times[m] != e:
            times.insert(m, e)
            cu.insert(m, cu[m - 1])
            ru.insert(m, ru[m - 1])
        for q in range(k, m):
            cu[q] += c
            ru[q] += r
    return starts, makespan


def ls_schedule(dur, cpu, ram, cpu_cap, ram_cap, max_iter):
    """Local search over priority lists.

    Starts from jobs ordered by decreasing duration (index breaks ties),
    then repeatedly applies the best improving adjacent transposition until
    none improves or ``max_iter`` moves were made.

    Returns ``(starts, makespan, evaluations)``.
    """
    n = len(dur)
    order = sorted(range(n), key=lambda i: (-dur[i], i))
    starts, best = serial_sgs(order, dur, cpu, ram, cpu_cap, ram_cap)
    evals = 1
    for _ in range(max_iter):
        move = -1
        move_ms = best
        for k in range(n - 1):
            order[k], order[k + 1] = order[k + 1], order[k]
            _, ms = serial_sgs(order, dur, cpu, ram, cpu_cap, ram_cap)
            evals += 1
            order[k], order[k + 1] = order[k + 1], order[k]
            if ms < move_ms:
                move, move_ms = k, ms
        if move < 0:
            break
        order[move], order[move + 1] = order[move + 1], order[move]
        best = move_ms
    starts, best = serial_sgs(order, dur, cpu, ram, cpu_cap, ram_cap)
    return starts, best, evals
