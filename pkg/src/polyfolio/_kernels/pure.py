"""Pure numpy implementations of the hot kernels.

These are the reference semantics for the compiled extension in
``_core.pyx``; the two implementations are interchangeable and are
compared sample-for-sample in the test suite and the benchmark.
"""
import numpy as np

IMPLEMENTATION = "pure"


def varsi_fraction(R, c):
    """Fraction of the canonical simplex lying in the halfspace R.x <= c.

    Runs the stable simplex-cut recurrence on the vertex offsets c - R_i:
    the offsets split into nonnegative and negative groups, and the
    fraction equals the probability that one chain of independent
    exponential stages (scales = |negative offsets|) completes before
    another (scales = nonnegative offsets). All intermediates stay in
    [0, 1]; vertices lying exactly on the hyperplane are handled exactly.
    """
    y = c - np.asarray(R, dtype=float)
    lam = y[y >= 0.0]
    nu = y[y < 0.0]
    return _race(lam.tolist(), (-nu).tolist())


def _race(lam, nu):
    K = len(lam)
    J = len(nu)
    if J == 0:
        return 1.0
    if K == 0:
        return 0.0
    # p[h] = P(negative chain finishes first | neg chain at stage j,
    # nonneg chain at stage h); p[K] is the exhausted-boundary 0.
    p = [1.0] * K + [0.0]
    for j in range(J):
        nj = nu[j]
        for h in range(K - 1, -1, -1):
            a = lam[h] / (lam[h] + nj)
            p[h] = a * p[h] + (1.0 - a) * p[h + 1]
    return p[0]


def varsi_many(R, cs):
    """Vectorised varsi_fraction over a batch of cut offsets."""
    R = np.asarray(R, dtype=float)
    return np.array([varsi_fraction(R, float(c)) for c in np.asarray(cs, float).ravel()])


def rehmc_quadratic(A2, a1, B, z, y0, step, n_leapfrog, count, walk_length,
                    burn_in, normals, uniforms, max_reflections=100):
    """Reflective HMC for densities exp(-U(y)), U(y) = .5 y'A2 y + a1'y,
    truncated to the polytope B y <= z.

    Momentum refreshes and Metropolis uniforms are supplied by the caller
    (``normals``: (n_traj, d), ``uniforms``: (n_traj,)) so that runs are
    reproducible and implementation-independent.

    Returns (samples (count, d), n_accept, mean_abs_denergy, status) with
    status 0 on success, 1 if the reflection cap was hit (samples filled
    so far are valid).
    """
    A2 = np.asarray(A2, float)
    a1 = np.asarray(a1, float)
    B = np.asarray(B, float)
    z = np.asarray(z, float)
    y = np.asarray(y0, float).copy()
    d = y.size
    n_traj = burn_in + count * walk_length
    if normals.shape != (n_traj, d) or uniforms.shape != (n_traj,):
        raise ValueError("randomness arrays have the wrong shape")
    row_norm2 = np.einsum("ij,ij->i", B, B)
    samples = np.empty((count, d))
    n_accept = 0
    denergy = 0.0
    filled = 0

    def potential(v):
        return 0.5 * v @ A2 @ v + a1 @ v

    for t in range(n_traj):
        p = normals[t].copy()
        y_new = y.copy()
        h0 = potential(y) + 0.5 * p @ p
        g = A2 @ y_new + a1
        p -= 0.5 * step * g
        capped = False
        for leap in range(n_leapfrog):
            t_rem = step
            n_refl = 0
            while t_rem > 0.0:
                bp = B @ p
                by = B @ y_new
                tau = np.inf
                hit = -1
                moving = bp > 1e-14
                if np.any(moving):
                    times = np.maximum((z[moving] - by[moving]) / bp[moving], 0.0)
                    k = int(np.argmin(times))
                    tau = float(times[k])
                    hit = int(np.nonzero(moving)[0][k])
                if tau >= t_rem:
                    y_new = y_new + t_rem * p
                    break
                y_new = y_new + tau * p
                p = p - (2.0 * bp[hit] / row_norm2[hit]) * B[hit]
                t_rem -= tau
                n_refl += 1
                if n_refl > max_reflections:
                    capped = True
                    break
            if capped:
                break
            g = A2 @ y_new + a1
            p -= (step if leap < n_leapfrog - 1 else 0.5 * step) * g
        if capped:
            return samples[:filled], n_accept, denergy / max(t, 1), 1
        h1 = potential(y_new) + 0.5 * p @ p
        dh = h1 - h0
        denergy += abs(dh)
        if np.log(uniforms[t]) < -dh and np.all(B @ y_new <= z + 1e-12):
            y = y_new
            n_accept += 1
        if t >= burn_in and (t - burn_in + 1) % walk_length == 0:
            samples[filled] = y
            filled += 1
    return samples, n_accept, denergy / max(n_traj, 1), 0


def min_cost_transport(a, b, C):
    """Exact optimal transport cost between histograms a and b.

    Successive shortest augmenting paths with Johnson potentials on the
    complete bipartite graph with ground costs C (S, T). Supplies and
    demands must sum to the same total; zero-mass cells are pruned.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    C = np.asarray(C, dtype=float)
    if a.shape != (C.shape[0],) or b.shape != (C.shape[1],):
        raise ValueError("supply/demand shapes do not match the cost matrix")
    if abs(a.sum() - b.sum()) > 1e-9 * max(1.0, abs(a.sum())):
        raise ValueError("total supply and demand differ")
    keep_s = a > 0.0
    keep_t = b > 0.0
    a = a[keep_s].copy()
    b = b[keep_t].copy()
    C = np.ascontiguousarray(C[np.ix_(keep_s, keep_t)])
    S, T = C.shape
    if S == 0 or T == 0:
        return 0.0

    flow = np.zeros((S, T))
    pot_s = np.zeros(S)
    pot_t = np.zeros(T)
    remaining = float(a.sum())
    guard = 0
    while remaining > 1e-15:
        guard += 1
        if guard > 4 * (S + T) + 64:
            raise RuntimeError("transport solver failed to converge")
        dist_s = np.where(a > 0.0, 0.0, np.inf)
        dist_t = np.full(T, np.inf)
        done_s = np.zeros(S, bool)
        done_t = np.zeros(T, bool)
        parent_t = np.full(T, -1, dtype=np.int64)  # source that relaxed the sink
        parent_s = np.full(S, -1, dtype=np.int64)  # sink that relaxed the source
        root = dist_s == 0.0                       # supplied roots of the search
        while True:
            cs = np.where(done_s, np.inf, dist_s)
            ct = np.where(done_t, np.inf, dist_t)
            i = int(np.argmin(cs)) if S else -1
            j = int(np.argmin(ct)) if T else -1
            di = cs[i] if i >= 0 else np.inf
            dj = ct[j] if j >= 0 else np.inf
            if not np.isfinite(min(di, dj)):
                break
            if di <= dj:
                done_s[i] = True
                nd = di + C[i] + pot_s[i] - pot_t
                upd = (~done_t) & (nd < dist_t - 1e-15)
                if np.any(upd):
                    dist_t[upd] = nd[upd]
                    parent_t[upd] = i
            else:
                done_t[j] = True
                backw = flow[:, j] > 0.0
                if np.any(backw):
                    nd = dj - C[:, j] - pot_s + pot_t[j]
                    upd = backw & (~done_s) & (nd < dist_s - 1e-15)
                    if np.any(upd):
                        dist_s[upd] = nd[upd]
                        parent_s[upd] = j
                        root[upd] = False
        open_t = (b > 0.0) & np.isfinite(dist_t)
        if not np.any(open_t):
            raise RuntimeError("transport graph disconnected")
        j = int(np.argmin(np.where(open_t, dist_t, np.inf)))
        # walk the augmenting path back to a supplied root
        fwd = []
        bwd = []
        bottleneck = float(b[j])
        node_t = j
        while True:
            i = int(parent_t[node_t])
            fwd.append((i, node_t))
            if root[i]:
                break
            prev = int(parent_s[i])
            bwd.append((i, prev))
            bottleneck = min(bottleneck, float(flow[i, prev]))
            node_t = prev
        bottleneck = min(bottleneck, float(a[fwd[-1][0]]))
        for (i, t_) in fwd:
            flow[i, t_] += bottleneck
        for (i, t_) in bwd:
            flow[i, t_] -= bottleneck
        a[fwd[-1][0]] -= bottleneck
        b[j] -= bottleneck
        remaining -= bottleneck
        fin = np.isfinite(dist_s)
        pot_s[fin] += dist_s[fin]
        fin = np.isfinite(dist_t)
        pot_t[fin] += dist_t[fin]
    return float((flow * C).sum())
