"""Compiled kernel for the line engine.

This mirrors the pure-Python path of ``simulate_1d_fast`` operation for
operation (same event ordering, same grouping-window semantics, same
floating-point evaluation order), so the two produce bit-identical
results; an import failure here simply leaves the pure path in charge.
"""

import numpy as np
from numba import njit

from .core import ToleranceConflict

ERR_OK = 0
ERR_TWO_GROUPS = 1
ERR_NONCONTIG = 2
ERR_CAPACITY = 3


@njit(cache=True)
def _heap_push(ht, hs, hi, hj, size, t, s, i, j):
    k = size
    ht[k] = t
    hs[k] = s
    hi[k] = i
    hj[k] = j
    while k > 0:
        p = (k - 1) >> 1
        if ht[k] < ht[p] or (ht[k] == ht[p] and hs[k] < hs[p]):
            ht[k], ht[p] = ht[p], ht[k]
            hs[k], hs[p] = hs[p], hs[k]
            hi[k], hi[p] = hi[p], hi[k]
            hj[k], hj[p] = hj[p], hj[k]
            k = p
        else:
            break
    return size + 1


@njit(cache=True)
def _heap_pop(ht, hs, hi, hj, size):
    t = ht[0]
    s = hs[0]
    i = hi[0]
    j = hj[0]
    size -= 1
    if size > 0:
        ht[0] = ht[size]
        hs[0] = hs[size]
        hi[0] = hi[size]
        hj[0] = hj[size]
        k = 0
        while True:
            l = 2 * k + 1
            if l >= size:
                break
            c = l
            r = l + 1
            if r < size and (ht[r] < ht[l] or (ht[r] == ht[l] and hs[r] < hs[l])):
                c = r
            if ht[c] < ht[k] or (ht[c] == ht[k] and hs[c] < hs[k]):
                ht[k], ht[c] = ht[c], ht[k]
                hs[k], hs[c] = hs[c], hs[k]
                hi[k], hi[c] = hi[c], hi[k]
                hj[k], hj[c] = hj[c], hj[k]
                k = c
            else:
                break
    return t, s, i, j, size


@njit(cache=True)
def _kernel(x0, v0, m0, horizon, t_group, x_hit):
    n = x0.shape[0]
    cap = 2 * n
    pos = np.empty(cap)
    vel = np.empty(cap)
    born = np.zeros(cap)
    mass = np.empty(cap)
    pos[:n] = x0
    vel[:n] = v0
    mass[:n] = m0
    parent = np.full(cap, -1, dtype=np.int64)
    left = np.empty(cap, dtype=np.int64)
    right = np.empty(cap, dtype=np.int64)
    alive = np.zeros(cap, dtype=np.uint8)
    alive[:n] = 1
    child_off = np.zeros(cap + 1, dtype=np.int64)
    children = np.empty(2 * n + 2, dtype=np.int64)
    pre = np.empty(2 * n + 2)
    nchild = 0
    total = n

    order = np.argsort(x0, kind="mergesort")
    for k in range(n):
        left[order[k]] = order[k - 1] if k > 0 else -1
        right[order[k]] = order[k + 1] if k < n - 1 else -1

    hcap = 3 * n + 8
    ht = np.empty(hcap)
    hs = np.empty(hcap, dtype=np.int64)
    hi = np.empty(hcap, dtype=np.int64)
    hj = np.empty(hcap, dtype=np.int64)
    hsize = 0
    seq = 0
    cutoff = horizon + t_group
    for k in range(n - 1):
        i = order[k]
        j = order[k + 1]
        dv = v0[i] - v0[j]
        if dv > 0.0:
            t = (x0[j] - x0[i]) / dv
            if t <= cutoff:
                hsize = _heap_push(ht, hs, hi, hj, hsize, t, seq, i, j)
                seq += 1

    ev_cap = n + 1
    times = np.empty(ev_cap)
    ev_off = np.zeros(ev_cap + 1, dtype=np.int64)
    n_ev = 0
    g_new = np.empty(ev_cap, dtype=np.int64)
    g_loc = np.empty(ev_cap)
    g_post = np.empty(ev_cap)
    n_g = 0

    wcap = 256
    wt = np.empty(wcap)
    wi = np.empty(wcap, dtype=np.int64)
    wj = np.empty(wcap, dtype=np.int64)
    wloc = np.empty(wcap)
    ws = np.empty(wcap, dtype=np.int64)
    comp_of = np.empty(wcap, dtype=np.int64)
    comp_tau = np.empty(wcap)
    comp_cid0 = np.empty(wcap, dtype=np.int64)
    comp_order = np.empty(wcap, dtype=np.int64)
    cflat = np.empty(2 * wcap, dtype=np.int64)
    coff = np.empty(wcap + 1, dtype=np.int64)
    cbuf = np.empty(2 * wcap, dtype=np.int64)

    claimed_w = np.full(cap, -1, dtype=np.int64)
    owner_comp = np.full(cap, -1, dtype=np.int64)
    own_g = np.full(cap, -1, dtype=np.int64)
    wserial = 0

    runbuf = np.empty(2 * n + 4, dtype=np.int64)
    spanbuf = np.empty(cap, dtype=np.int64)

    err = np.int64(ERR_OK)
    err_cid = np.int64(-1)
    err_t = 0.0

    while hsize > 0 and err == ERR_OK:
        t0, _, a, b, hsize = _heap_pop(ht, hs, hi, hj, hsize)
        if not (alive[a] and alive[b]):
            continue
        if t0 > horizon:
            break
        wserial += 1

        if hsize > 0 and ht[0] <= t0 + t_group:
            w = 0
            wt[w] = t0
            wi[w] = a
            wj[w] = b
            wloc[w] = pos[a] + (t0 - born[a]) * vel[a]
            w += 1
            while hsize > 0 and ht[0] <= t0 + t_group:
                t1, _, c, e, hsize = _heap_pop(ht, hs, hi, hj, hsize)
                if alive[c] and alive[e]:
                    if w >= wcap:
                        wcap2 = 2 * wcap
                        wt2 = np.empty(wcap2)
                        wi2 = np.empty(wcap2, dtype=np.int64)
                        wj2 = np.empty(wcap2, dtype=np.int64)
                        wloc2 = np.empty(wcap2)
                        wt2[:w] = wt[:w]
                        wi2[:w] = wi[:w]
                        wj2[:w] = wj[:w]
                        wloc2[:w] = wloc[:w]
                        wt, wi, wj, wloc = wt2, wi2, wj2, wloc2
                        ws = np.empty(wcap2, dtype=np.int64)
                        comp_of = np.empty(wcap2, dtype=np.int64)
                        comp_tau = np.empty(wcap2)
                        comp_cid0 = np.empty(wcap2, dtype=np.int64)
                        comp_order = np.empty(wcap2, dtype=np.int64)
                        cflat = np.empty(2 * wcap2, dtype=np.int64)
                        coff = np.empty(wcap2 + 1, dtype=np.int64)
                        cbuf = np.empty(2 * wcap2, dtype=np.int64)
                        wcap = wcap2
                    wt[w] = t1
                    wi[w] = c
                    wj[w] = e
                    wloc[w] = pos[c] + (t1 - born[c]) * vel[c]
                    w += 1

            # stable insertion sort of window indices by location
            for k in range(w):
                ws[k] = k
            for k in range(1, w):
                item = ws[k]
                key = wloc[item]
                p = k - 1
                while p >= 0 and wloc[ws[p]] > key:
                    ws[p + 1] = ws[p]
                    p -= 1
                ws[p + 1] = item

            # chain split: same component while consecutive gap <= x_hit
            ncomp = 0
            comp_of[ws[0]] = 0
            for k in range(1, w):
                if wloc[ws[k]] - wloc[ws[k - 1]] > x_hit:
                    ncomp += 1
                comp_of[ws[k]] = ncomp
            ncomp += 1

            # per component: min time and sorted unique cluster ids
            coff[0] = 0
            cn = 0
            for ci in range(ncomp):
                tau = np.inf
                start = cn
                for k in range(w):
                    if comp_of[k] == ci:
                        if wt[k] < tau:
                            tau = wt[k]
                        cbuf[cn] = wi[k]
                        cbuf[cn + 1] = wj[k]
                        cn += 2
                # sort ids, drop duplicates in place
                for k in range(start + 1, cn):
                    item = cbuf[k]
                    p = k - 1
                    while p >= start and cbuf[p] > item:
                        cbuf[p + 1] = cbuf[p]
                        p -= 1
                    cbuf[p + 1] = item
                out = start
                for k in range(start, cn):
                    if k == start or cbuf[k] != cbuf[out - 1]:
                        cbuf[out] = cbuf[k]
                        out += 1
                cn = out
                for k in range(start, cn):
                    c = cbuf[k]
                    if claimed_w[c] == wserial:
                        if owner_comp[c] != ci:
                            err = ERR_TWO_GROUPS
                            err_cid = c
                            err_t = tau
                    else:
                        claimed_w[c] = wserial
                        owner_comp[c] = ci
                    cflat[k] = c
                coff[ci + 1] = cn
                comp_tau[ci] = tau
                comp_cid0[ci] = cflat[start]
            if err != ERR_OK:
                break

            # process components ordered by (time, first id)
            for k in range(ncomp):
                comp_order[k] = k
            for k in range(1, ncomp):
                item = comp_order[k]
                p = k - 1
                while p >= 0 and (
                    comp_tau[comp_order[p]] > comp_tau[item]
                    or (
                        comp_tau[comp_order[p]] == comp_tau[item]
                        and comp_cid0[comp_order[p]] > comp_cid0[item]
                    )
                ):
                    comp_order[p + 1] = comp_order[p]
                    p -= 1
                comp_order[p + 1] = item
            n_groups = ncomp
        else:
            # single collision, no grouping window
            n_groups = 1
            comp_order[0] = 0
            comp_tau[0] = t0
            coff[0] = 0
            coff[1] = 2
            if a < b:
                cflat[0] = a
                cflat[1] = b
            else:
                cflat[0] = b
                cflat[1] = a
            claimed_w[a] = wserial
            claimed_w[b] = wserial

        for gk in range(n_groups):
            ci = comp_order[gk]
            tau = comp_tau[ci]
            c0 = coff[ci]
            c1 = coff[ci + 1]
            csize = c1 - c0
            nid = total
            for k in range(c0, c1):
                own_g[cflat[k]] = nid

            # locate the contiguous run of the group in the spatial order
            rh = n + 1
            rt = n + 1
            if csize == 2 and (
                right[cflat[c0]] == cflat[c0 + 1] or right[cflat[c0 + 1]] == cflat[c0]
            ):
                lm = cflat[c0] if right[cflat[c0]] == cflat[c0 + 1] else cflat[c0 + 1]
                runbuf[rh] = lm
                runbuf[rh + 1] = right[lm]
                rt = rh + 2
            else:
                # ties in position can misorder the sort; try each member as
                # leftmost, accept the first walk that covers the group
                for k in range(csize):
                    spanbuf[k] = cflat[c0 + k]
                for k in range(1, csize):
                    item = spanbuf[k]
                    key = pos[item] + (tau - born[item]) * vel[item]
                    p = k - 1
                    while p >= 0 and (
                        pos[spanbuf[p]] + (tau - born[spanbuf[p]]) * vel[spanbuf[p]] > key
                    ):
                        spanbuf[p + 1] = spanbuf[p]
                        p -= 1
                    spanbuf[p + 1] = item
                last = spanbuf[csize - 1]
                rmax = (
                    pos[last] + (tau - born[last]) * vel[last]
                    + (csize + 2) * x_hit
                )
                found = False
                for sk in range(csize):
                    start = spanbuf[sk]
                    runbuf[rh] = start
                    rt = rh + 1
                    c = start
                    remaining = csize - 1
                    ok = True
                    while remaining > 0:
                        c = right[c]
                        if c < 0 or pos[c] + (tau - born[c]) * vel[c] > rmax:
                            ok = False
                            break
                        runbuf[rt] = c
                        rt += 1
                        if own_g[c] == nid:
                            remaining -= 1
                    if ok:
                        found = True
                        break
                if not found:
                    err = ERR_NONCONTIG
                    err_t = tau
                    break

            # absorb neighbors standing within x_hit of the meet point
            first = runbuf[rh]
            meet = pos[first] + (tau - born[first]) * vel[first]
            while left[runbuf[rh]] >= 0:
                c = left[runbuf[rh]]
                if abs(pos[c] + (tau - born[c]) * vel[c] - meet) <= x_hit:
                    rh -= 1
                    runbuf[rh] = c
                else:
                    break
            while right[runbuf[rt - 1]] >= 0:
                c = right[runbuf[rt - 1]]
                if abs(pos[c] + (tau - born[c]) * vel[c] - meet) <= x_hit:
                    runbuf[rt] = c
                    rt += 1
                else:
                    break
            runlen = rt - rh
            if runlen > csize:
                for k in range(rh, rt):
                    c = runbuf[k]
                    if claimed_w[c] == wserial and own_g[c] != nid:
                        err = ERR_TWO_GROUPS
                        err_cid = c
                        err_t = tau
                        break
                if err != ERR_OK:
                    break
                for k in range(rh, rt):
                    claimed_w[runbuf[k]] = wserial

            if total + 1 > cap or nchild + runlen > children.shape[0]:
                err = ERR_CAPACITY
                err_t = tau
                break

            ids = np.sort(runbuf[rh:rt])
            mtot = 0.0
            px = 0.0
            vx = 0.0
            for k in range(runlen):
                c = ids[k]
                mtot += mass[c]
                px += mass[c] * (pos[c] + (tau - born[c]) * vel[c])
                vx += mass[c] * vel[c]
            p_new = px / mtot
            v_new = vx / mtot

            g_new[n_g] = nid
            g_loc[n_g] = p_new
            g_post[n_g] = v_new
            n_g += 1
            for k in range(runlen):
                c = ids[k]
                children[nchild] = c
                pre[nchild] = vel[c]
                nchild += 1
            child_off[nid + 1] = nchild
            pos[nid] = p_new
            vel[nid] = v_new
            born[nid] = tau
            mass[nid] = mtot
            alive[nid] = 1
            total += 1

            lnb = left[runbuf[rh]]
            rnb = right[runbuf[rt - 1]]
            left[nid] = lnb
            right[nid] = rnb
            if lnb >= 0:
                right[lnb] = nid
            if rnb >= 0:
                left[rnb] = nid
            for k in range(runlen):
                c = ids[k]
                alive[c] = 0
                parent[c] = nid

            if lnb >= 0:
                i = lnb
                j = nid
                r = born[i] if born[i] >= born[j] else born[j]
                gap = (pos[j] + (r - born[j]) * vel[j]) - (pos[i] + (r - born[i]) * vel[i])
                if gap <= 0.0:
                    t = np.nextafter(r, np.inf)
                    if t <= cutoff:
                        hsize = _heap_push(ht, hs, hi, hj, hsize, t, seq, i, j)
                        seq += 1
                else:
                    dv = vel[i] - vel[j]
                    if dv > 0.0:
                        t = r + gap / dv
                        if t <= r:
                            t = np.nextafter(r, np.inf)
                        if t <= cutoff:
                            hsize = _heap_push(ht, hs, hi, hj, hsize, t, seq, i, j)
                            seq += 1
            if rnb >= 0:
                i = nid
                j = rnb
                r = born[i] if born[i] >= born[j] else born[j]
                gap = (pos[j] + (r - born[j]) * vel[j]) - (pos[i] + (r - born[i]) * vel[i])
                if gap <= 0.0:
                    t = np.nextafter(r, np.inf)
                    if t <= cutoff:
                        hsize = _heap_push(ht, hs, hi, hj, hsize, t, seq, i, j)
                        seq += 1
                else:
                    dv = vel[i] - vel[j]
                    if dv > 0.0:
                        t = r + gap / dv
                        if t <= r:
                            t = np.nextafter(r, np.inf)
                        if t <= cutoff:
                            hsize = _heap_push(ht, hs, hi, hj, hsize, t, seq, i, j)
                            seq += 1

        if err != ERR_OK:
            break
        times[n_ev] = t0
        ev_off[n_ev + 1] = n_g
        n_ev += 1

    return (
        err, err_cid, err_t, total, n_ev, n_g, nchild,
        pos, vel, born, mass, parent, child_off, children, pre,
        times, ev_off, g_new, g_loc, g_post,
    )


def run_line(x0, v0, m0, horizon, t_group, x_hit):
    """Run the compiled kernel; returns forest and event arrays."""
    (
        err, err_cid, err_t, total, n_ev, n_g, nchild,
        pos, vel, born, mass, parent, child_off, children, pre,
        times, ev_off, g_new, g_loc, g_post,
    ) = _kernel(
        np.ascontiguousarray(x0, dtype=np.float64),
        np.ascontiguousarray(v0, dtype=np.float64),
        np.ascontiguousarray(m0, dtype=np.float64),
        float(horizon), float(t_group), float(x_hit),
    )
    if err == ERR_TWO_GROUPS:
        raise ToleranceConflict(
            f"cluster {err_cid} is claimed by two merge groups inside one "
            f"grouping window (time near {err_t!r}); tighten t_group or "
            "perturb the input"
        )
    if err == ERR_NONCONTIG:
        raise ToleranceConflict(
            "merge group is not contiguous in the spatial order "
            f"(time near {err_t!r}); tighten t_group or perturb the input"
        )
    if err == ERR_CAPACITY:
        raise RuntimeError("compiled line engine exceeded its capacity bounds")
    n = x0.shape[0]
    return {
        "total": int(total),
        "born": born[:total].copy(),
        "pos0": pos[:total].copy(),
        "vel": vel[:total].copy(),
        "mass": mass[:total].copy(),
        "parent": parent[:total].copy(),
        "child_off": child_off[: total + 1].copy(),
        "children": children[:nchild].copy(),
        "pre": pre[:nchild].copy(),
        "times": times[:n_ev].copy(),
        "ev_off": ev_off[: n_ev + 1].copy(),
        "g_new": g_new[:n_g].copy(),
        "g_loc": g_loc[:n_g].copy(),
        "g_post": g_post[:n_g].copy(),
        "g_child_off": child_off[n : total + 1].copy(),
    }
