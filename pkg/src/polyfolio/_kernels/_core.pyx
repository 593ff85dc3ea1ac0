# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: simplex-cut recurrence, reflective HMC, exact transport.

Semantics mirror ``pure.py``; see that module for the full contracts.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, INFINITY, fabs

cnp.import_array()

IMPLEMENTATION = "cython"


cdef double _race(double[::1] lam, double[::1] nu, double[::1] p) noexcept:
    cdef Py_ssize_t K = lam.shape[0]
    cdef Py_ssize_t J = nu.shape[0]
    cdef Py_ssize_t j, h
    cdef double a, nj
    if J == 0:
        return 1.0
    if K == 0:
        return 0.0
    for h in range(K):
        p[h] = 1.0
    p[K] = 0.0
    for j in range(J):
        nj = nu[j]
        for h in range(K - 1, -1, -1):
            a = lam[h] / (lam[h] + nj)
            p[h] = a * p[h] + (1.0 - a) * p[h + 1]
    return p[0]


def varsi_fraction(double[::1] R, double c):
    """Simplex volume fraction cut off by R.x <= c (see pure.varsi_fraction)."""
    cdef Py_ssize_t n = R.shape[0]
    cdef cnp.ndarray[double, ndim=1] lam = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] nu = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] buf = np.empty(n + 1)
    cdef Py_ssize_t i, K = 0, J = 0
    cdef double y
    for i in range(n):
        y = c - R[i]
        if y >= 0.0:
            lam[K] = y
            K += 1
        else:
            nu[J] = -y
            J += 1
    return _race(lam[:K], nu[:J], buf)


def varsi_many(double[::1] R, double[::1] cs):
    """Batched varsi_fraction over many cut offsets."""
    cdef Py_ssize_t n = R.shape[0]
    cdef Py_ssize_t q = cs.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(q)
    cdef cnp.ndarray[double, ndim=1] lam = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] nu = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] buf = np.empty(n + 1)
    cdef double[::1] lamv = lam, nuv = nu, bufv = buf
    cdef Py_ssize_t i, t, K, J
    cdef double y, c
    for t in range(q):
        c = cs[t]
        K = 0
        J = 0
        for i in range(n):
            y = c - R[i]
            if y >= 0.0:
                lamv[K] = y
                K += 1
            else:
                nuv[J] = -y
                J += 1
        out[t] = _race(lamv[:K], nuv[:J], bufv)
    return out


def rehmc_quadratic(double[:, ::1] A2, double[::1] a1, double[:, ::1] B,
                    double[::1] z, double[::1] y0, double step,
                    int n_leapfrog, Py_ssize_t count, int walk_length,
                    Py_ssize_t burn_in, double[:, ::1] normals,
                    double[::1] uniforms, int max_reflections=100):
    """Reflective HMC with caller-provided randomness (see pure module)."""
    cdef Py_ssize_t d = y0.shape[0]
    cdef Py_ssize_t mf = B.shape[0]
    cdef Py_ssize_t n_traj = burn_in + count * walk_length
    if normals.shape[0] != n_traj or normals.shape[1] != d or uniforms.shape[0] != n_traj:
        raise ValueError("randomness arrays have the wrong shape")
    cdef cnp.ndarray[double, ndim=2] samples = np.empty((count, d))
    cdef cnp.ndarray[double, ndim=1] y_arr = np.ascontiguousarray(y0).copy()
    cdef cnp.ndarray[double, ndim=1] yn_arr = np.empty(d)
    cdef cnp.ndarray[double, ndim=1] p_arr = np.empty(d)
    cdef cnp.ndarray[double, ndim=1] g_arr = np.empty(d)
    cdef cnp.ndarray[double, ndim=1] rn2_arr = np.empty(mf)
    cdef double[:, ::1] smp = samples
    cdef double[::1] y = y_arr, yn = yn_arr, p = p_arr, g = g_arr, rn2 = rn2_arr
    cdef Py_ssize_t t, i, j, leap, hit, filled = 0
    cdef Py_ssize_t n_accept = 0
    cdef double denergy = 0.0
    cdef double h0, h1, dh, t_rem, tau, bpv, byv, tv, s, acc
    cdef int n_refl, capped

    for i in range(mf):
        s = 0.0
        for j in range(d):
            s += B[i, j] * B[i, j]
        rn2[i] = s

    for t in range(n_traj):
        for i in range(d):
            p[i] = normals[t, i]
            yn[i] = y[i]
        h0 = _potential(A2, a1, y) + 0.5 * _dot(p, p)
        _gradient(A2, a1, yn, g)
        for i in range(d):
            p[i] -= 0.5 * step * g[i]
        capped = 0
        for leap in range(n_leapfrog):
            t_rem = step
            n_refl = 0
            while t_rem > 0.0:
                tau = INFINITY
                hit = -1
                for i in range(mf):
                    bpv = 0.0
                    for j in range(d):
                        bpv += B[i, j] * p[j]
                    if bpv > 1e-14:
                        byv = 0.0
                        for j in range(d):
                            byv += B[i, j] * yn[j]
                        tv = (z[i] - byv) / bpv
                        if tv < 0.0:
                            tv = 0.0
                        if tv < tau:
                            tau = tv
                            hit = i
                if tau >= t_rem:
                    for i in range(d):
                        yn[i] += t_rem * p[i]
                    break
                for i in range(d):
                    yn[i] += tau * p[i]
                bpv = 0.0
                for j in range(d):
                    bpv += B[hit, j] * p[j]
                acc = 2.0 * bpv / rn2[hit]
                for j in range(d):
                    p[j] -= acc * B[hit, j]
                t_rem -= tau
                n_refl += 1
                if n_refl > max_reflections:
                    capped = 1
                    break
            if capped:
                break
            _gradient(A2, a1, yn, g)
            s = step if leap < n_leapfrog - 1 else 0.5 * step
            for i in range(d):
                p[i] -= s * g[i]
        if capped:
            return samples[:filled], n_accept, denergy / max(t, 1), 1
        h1 = _potential(A2, a1, yn) + 0.5 * _dot(p, p)
        dh = h1 - h0
        denergy += fabs(dh)
        if log(uniforms[t]) < -dh and _feasible(B, z, yn):
            for i in range(d):
                y[i] = yn[i]
            n_accept += 1
        if t >= burn_in and (t - burn_in + 1) % walk_length == 0:
            for i in range(d):
                smp[filled, i] = y[i]
            filled += 1
    return samples, n_accept, denergy / max(n_traj, 1), 0


cdef double _dot(double[::1] a, double[::1] b) noexcept:
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


cdef double _potential(double[:, ::1] A2, double[::1] a1, double[::1] v) noexcept:
    cdef Py_ssize_t i, j, d = v.shape[0]
    cdef double s = 0.0, row
    for i in range(d):
        row = 0.0
        for j in range(d):
            row += A2[i, j] * v[j]
        s += v[i] * (0.5 * row) + a1[i] * v[i]
    return s


cdef void _gradient(double[:, ::1] A2, double[::1] a1, double[::1] v,
                    double[::1] out) noexcept:
    cdef Py_ssize_t i, j, d = v.shape[0]
    cdef double row
    for i in range(d):
        row = 0.0
        for j in range(d):
            row += A2[i, j] * v[j]
        out[i] = row + a1[i]


cdef int _feasible(double[:, ::1] B, double[::1] z, double[::1] v) noexcept:
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(B.shape[0]):
        s = 0.0
        for j in range(v.shape[0]):
            s += B[i, j] * v[j]
        if s > z[i] + 1e-12:
            return 0
    return 1


def min_cost_transport(double[::1] a_in, double[::1] b_in, double[:, ::1] C_in):
    """Exact optimal transport cost (successive shortest paths)."""
    cdef Py_ssize_t S0 = C_in.shape[0], T0 = C_in.shape[1]
    if a_in.shape[0] != S0 or b_in.shape[0] != T0:
        raise ValueError("supply/demand shapes do not match the cost matrix")
    cdef double tot_a = 0.0, tot_b = 0.0
    cdef Py_ssize_t i, j
    for i in range(S0):
        tot_a += a_in[i]
    for j in range(T0):
        tot_b += b_in[j]
    if fabs(tot_a - tot_b) > 1e-9 * max(1.0, fabs(tot_a)):
        raise ValueError("total supply and demand differ")

    # prune zero-mass cells
    keep_s = np.asarray(a_in) > 0.0
    keep_t = np.asarray(b_in) > 0.0
    cdef cnp.ndarray[double, ndim=1] a = np.asarray(a_in)[keep_s].copy()
    cdef cnp.ndarray[double, ndim=1] b = np.asarray(b_in)[keep_t].copy()
    cdef cnp.ndarray[double, ndim=2] C = np.ascontiguousarray(
        np.asarray(C_in)[np.ix_(keep_s, keep_t)])
    cdef Py_ssize_t S = C.shape[0], T = C.shape[1]
    if S == 0 or T == 0:
        return 0.0

    cdef cnp.ndarray[double, ndim=2] flow = np.zeros((S, T))
    cdef cnp.ndarray[double, ndim=1] pot_s = np.zeros(S)
    cdef cnp.ndarray[double, ndim=1] pot_t = np.zeros(T)
    cdef cnp.ndarray[double, ndim=1] dist_s = np.empty(S)
    cdef cnp.ndarray[double, ndim=1] dist_t = np.empty(T)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] done_s = np.empty(S, np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] done_t = np.empty(T, np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] parent_t = np.empty(T, np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] parent_s = np.empty(S, np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] root = np.empty(S, np.uint8)

    cdef double[::1] av = a, bv = b, psv = pot_s, ptv = pot_t
    cdef double[::1] dsv = dist_s, dtv = dist_t
    cdef double[:, ::1] Cv = C, fv = flow
    cdef cnp.uint8_t[::1] dns = done_s, dnt = done_t, rt = root
    cdef cnp.int64_t[::1] pts = parent_s, ptt = parent_t

    cdef double remaining = 0.0
    for i in range(S):
        remaining += av[i]
    cdef Py_ssize_t guard = 0, it, jt, node_t, src
    cdef double di, dj, nd, bottleneck, cost
    cdef int progress

    while remaining > 1e-15:
        guard += 1
        if guard > 4 * (S + T) + 64:
            raise RuntimeError("transport solver failed to converge")
        for i in range(S):
            dsv[i] = 0.0 if av[i] > 0.0 else INFINITY
            dns[i] = 0
            pts[i] = -1
            rt[i] = 1 if av[i] > 0.0 else 0
        for j in range(T):
            dtv[j] = INFINITY
            dnt[j] = 0
            ptt[j] = -1
        while True:
            di = INFINITY
            it = -1
            for i in range(S):
                if not dns[i] and dsv[i] < di:
                    di = dsv[i]
                    it = i
            dj = INFINITY
            jt = -1
            for j in range(T):
                if not dnt[j] and dtv[j] < dj:
                    dj = dtv[j]
                    jt = j
            if it < 0 and jt < 0:
                break
            if di <= dj:
                if it < 0:
                    break
                dns[it] = 1
                for j in range(T):
                    if dnt[j]:
                        continue
                    nd = di + Cv[it, j] + psv[it] - ptv[j]
                    if nd < dtv[j] - 1e-15:
                        dtv[j] = nd
                        ptt[j] = it
            else:
                if jt < 0:
                    break
                dnt[jt] = 1
                for i in range(S):
                    if dns[i] or fv[i, jt] <= 0.0:
                        continue
                    nd = dj - Cv[i, jt] - psv[i] + ptv[jt]
                    if nd < dsv[i] - 1e-15:
                        dsv[i] = nd
                        pts[i] = jt
                        rt[i] = 0
        dj = INFINITY
        jt = -1
        for j in range(T):
            if bv[j] > 0.0 and dtv[j] < dj:
                dj = dtv[j]
                jt = j
        if jt < 0:
            raise RuntimeError("transport graph disconnected")
        # trace the augmenting path back to a supplied root
        bottleneck = bv[jt]
        node_t = jt
        src = -1
        while True:
            i = ptt[node_t]
            if rt[i]:
                src = i
                break
            if fv[i, pts[i]] < bottleneck:
                bottleneck = fv[i, pts[i]]
            node_t = pts[i]
        if av[src] < bottleneck:
            bottleneck = av[src]
        node_t = jt
        while True:
            i = ptt[node_t]
            fv[i, node_t] += bottleneck
            if rt[i]:
                break
            fv[i, pts[i]] -= bottleneck
            node_t = pts[i]
        av[src] -= bottleneck
        bv[jt] -= bottleneck
        remaining -= bottleneck
        for i in range(S):
            if dsv[i] != INFINITY:
                psv[i] += dsv[i]
        for j in range(T):
            if dtv[j] != INFINITY:
                ptv[j] += dtv[j]
    cost = 0.0
    for i in range(S):
        for j in range(T):
            cost += fv[i, j] * Cv[i, j]
    return cost
