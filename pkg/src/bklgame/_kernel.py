"""Fixed-step Dormand-Prince integration kernel.

Private module. The public contract lives in ``dynamics.integrate_segment``;
this file only holds the hot loop. Game-tree solvers integrate up to millions
of short segments per solve, so the kernel is written as scalar loops that
numba compiles to tight machine code. When numba is unavailable the same
functions run as plain (slow) Python, which is enough for unit tests.

State vector layout: ``y = [beta_0..beta_{N-1}, rho_0..rho_{M-1}, P_B, P_R]``.
"""

import numpy as np

try:
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


# Dormand-Prince 5(4) tableau. Only the six stages entering the 5th-order
# propagation weights are evaluated: the FSAL stage feeds the embedded error
# estimate, which fixed stepping never uses.
_A = (
    (1 / 5, 0.0, 0.0, 0.0, 0.0),
    (3 / 40, 9 / 40, 0.0, 0.0, 0.0),
    (44 / 45, -56 / 15, 32 / 9, 0.0, 0.0),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)


@njit(cache=True)
def _derivative(y, blue, brow, red, rrow, cross, omega, nu,
                zb, zr, zbr, zrb, kbr, krb, phi, psi, circular,
                sb, cb, sr, cr, out):
    """Model right-hand side, written into ``out``.

    ``sb/cb/sr/cr`` are caller-provided scratch buffers for the phase
    sines/cosines; the coupling sums use the identity
    sin(x - y) = sin(x)cos(y) - cos(x)sin(y) so each evaluation needs only
    O(N+M) transcendentals instead of O(N^2).
    """
    n = omega.shape[0]
    m = nu.shape[0]
    for i in range(n):
        sb[i] = np.sin(y[i])
        cb[i] = np.cos(y[i])
    for j in range(m):
        sr[j] = np.sin(y[n + j])
        cr[j] = np.cos(y[n + j])
    sphi = np.sin(phi)
    cphi = np.cos(phi)
    spsi = np.sin(psi)
    cpsi = np.cos(psi)

    for i in range(n):
        bc = 0.0
        bs = 0.0
        ac = 0.0
        asn = 0.0
        for j in range(n):
            bc += blue[i, j] * cb[j]
            bs += blue[i, j] * sb[j]
        for j in range(m):
            ac += cross[i, j] * cr[j]
            asn += cross[i, j] * sr[j]
        internal = (sb[i] * bc - cb[i] * bs) / brow[i]
        # sin(beta_i - rho_j - phi) expanded around u = beta_i - phi
        su = sb[i] * cphi - cb[i] * sphi
        cu = cb[i] * cphi + sb[i] * sphi
        out[i] = omega[i] - zb * internal - zbr * (su * ac - cu * asn)

    for i in range(m):
        rc = 0.0
        rs = 0.0
        atc = 0.0
        ats = 0.0
        for j in range(m):
            rc += red[i, j] * cr[j]
            rs += red[i, j] * sr[j]
        for j in range(n):
            atc += cross[j, i] * cb[j]
            ats += cross[j, i] * sb[j]
        internal = (sr[i] * rc - cr[i] * rs) / rrow[i]
        su = sr[i] * cpsi - cr[i] * spsi
        cu = cr[i] * cpsi + sr[i] * spsi
        out[n + i] = nu[i] - zr * internal - zrb * (su * atc - cu * ats)

    ssb = 0.0
    scb = 0.0
    mb = 0.0
    for i in range(n):
        ssb += sb[i]
        scb += cb[i]
        mb += y[i]
    ssr = 0.0
    scr = 0.0
    mr = 0.0
    for j in range(m):
        ssr += sr[j]
        scr += cr[j]
        mr += y[n + j]
    mag_blue = np.sqrt(ssb * ssb + scb * scb) / n
    mag_red = np.sqrt(ssr * ssr + scr * scr) / m
    if circular:
        mb = np.arctan2(ssb, scb)
        mr = np.arctan2(ssr, scr)
    else:
        mb = mb / n
        mr = mr / m

    pb = y[n + m]
    pr = y[n + m + 1]
    # Attrition terms are non-positive products; a depleted side neither
    # decays further nor inflicts losses (its factor is clamped at zero).
    if pb <= 0.0:
        out[n + m] = 0.0
    else:
        out[n + m] = -krb * mag_red * (np.sin(mr - mb) + 1.0) * 0.5 * max(pr, 0.0)
    if pr <= 0.0:
        out[n + m + 1] = 0.0
    else:
        out[n + m + 1] = -kbr * mag_blue * (np.sin(mb - mr) + 1.0) * 0.5 * max(pb, 0.0)


@njit(cache=True)
def integrate_fixed(y0, blue, brow, red, rrow, cross, omega, nu,
                    zb, zr, zbr, zrb, kbr, krb, phi, psi, circular,
                    n_full, h, h_last, samples, record):
    """March ``n_full`` steps of size ``h`` plus an optional closing step.

    ``h_last > 0`` appends one shortened step so the segment lands exactly
    on its requested duration. After each full step the populations are
    clamped into the model's feasible set: non-negative and no larger than
    before the step (attrition terms are structurally <= 0, so any increase
    is a discretisation artifact at the depletion kink, where the stage
    weights of mixed sign meet the derivative's cutoff at zero strength).
    Stage evaluations within a step are left unclamped.

    When ``record`` is true, ``samples`` must have one row per state
    (initial included) and every post-step state is stored. Otherwise only
    ``samples[0]`` is written, with the final state.

    Returns -1 on success or the index of the first step at which a
    non-finite component appeared.
    """
    dim = y0.shape[0]
    n = omega.shape[0]
    m = nu.shape[0]
    y = y0.copy()
    ks = np.empty((6, dim))
    tmp = np.empty(dim)
    sb = np.empty(n)
    cb = np.empty(n)
    sr = np.empty(m)
    cr = np.empty(m)

    if record:
        for d in range(dim):
            samples[0, d] = y[d]

    n_total = n_full + (1 if h_last > 0.0 else 0)
    for step_idx in range(n_total):
        hs = h if step_idx < n_full else h_last
        pb_prev = y[dim - 2]
        pr_prev = y[dim - 1]
        _derivative(y, blue, brow, red, rrow, cross, omega, nu,
                    zb, zr, zbr, zrb, kbr, krb, phi, psi, circular,
                    sb, cb, sr, cr, ks[0])
        for st in range(1, 6):
            for d in range(dim):
                acc = 0.0
                for p in range(st):
                    acc += _A[st - 1][p] * ks[p][d]
                tmp[d] = y[d] + hs * acc
            _derivative(tmp, blue, brow, red, rrow, cross, omega, nu,
                        zb, zr, zbr, zrb, kbr, krb, phi, psi, circular,
                        sb, cb, sr, cr, ks[st])
        for d in range(dim):
            y[d] = y[d] + hs * (_B[0] * ks[0][d] + _B[2] * ks[2][d]
                                + _B[3] * ks[3][d] + _B[4] * ks[4][d]
                                + _B[5] * ks[5][d])
        if y[dim - 2] < 0.0:
            y[dim - 2] = 0.0
        elif y[dim - 2] > pb_prev:
            y[dim - 2] = pb_prev
        if y[dim - 1] < 0.0:
            y[dim - 1] = 0.0
        elif y[dim - 1] > pr_prev:
            y[dim - 1] = pr_prev
        for d in range(dim):
            if not np.isfinite(y[d]):
                return step_idx
        if record:
            for d in range(dim):
                samples[step_idx + 1, d] = y[d]

    if not record:
        for d in range(dim):
            samples[0, d] = y[d]
    return -1
