# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled closed-loop integrator.

Structure-exploiting C implementation of the same right-hand side assembled
by ``npreg.regulator.closed_loop_rhs``, plus the fixed-step RK4 loop and the
divergence guard.  The Python fallback in ``npreg.engine`` is the reference;
the two are held together by the backend-parity tests.

Dimension limits: generator order n <= 16, plant state <= 3, relative degree
<= 2 (every shipped scenario is far below these).
"""

import numpy as np

from libc.math cimport exp, fabs, isfinite

DEF MAX_N = 16          # generator order
DEF MAX_2N = 32
DEF MAX_DIM = 64        # full closed-loop state


cdef struct Params:
    int kind            # 0 duffing, 1 cstr, 2 bioreactor
    double pp[8]
    int y_index
    double b
    int r
    double lam[2]
    int adaptive
    double k_star
    double rho_c0
    double rho_c1
    double k_a
    double m[MAX_2N]
    int n
    double delta
    int mode            # 0 none, 1 learned, 2 oracle
    double a_true[MAX_N]
    double sigma
    int ref_v1
    double ref_const
    int dim
    int o_plant
    int n_plant
    int o_filt
    int o_eta
    int o_ahat
    int o_khat          # -1 when fixed gain


cdef inline double _psi(double s) noexcept nogil:
    cdef double v
    if s <= 0.0:
        return 0.0
    v = exp(-1.0 / s)
    if v < 1e-300:
        return 0.0
    return v


cdef inline void _smooth_step(double s, double* val, double* dval) noexcept nogil:
    cdef double pa = _psi(s)
    cdef double pb = _psi(1.0 - s)
    cdef double den = pa + pb
    cdef double dpa = 0.0
    cdef double dpb = 0.0
    if s > 0.0:
        dpa = pa / (s * s)
    if 1.0 - s > 0.0:
        dpb = pb / ((1.0 - s) * (1.0 - s))
    val[0] = pa / den
    dval[0] = (dpa * pb + pa * dpb) / (den * den)


cdef void _chi_s_full(double* eta, double* coef, double* m, int n, double delta,
                      double* eta_n2, double* ah_n2,
                      double* val, double* g_eta, double* g_ah) noexcept nogil:
    """chi_s value and gradients.

    ``coef`` is the coefficient vector the mapping is evaluated at;
    ``eta_n2``/``ah_n2`` carry the squared-norm contributions of the state the
    saturation gate sees (the gate always watches (eta, evolving a_hat)).
    """
    cdef double rows[MAX_2N][MAX_N]
    cdef double cols[MAX_2N][MAX_N]
    cdef double w[MAX_N]
    cdef double dchi_da[MAX_N]
    cdef double alphas[MAX_2N]
    cdef int n2 = 2 * n
    cdef int i, j, ell
    cdef double tail, c, chi_raw, s2, gate, dgate

    s2 = 0.0
    for i in range(n2):
        s2 += eta[i] * eta[i]
        g_eta[i] = 0.0
    for j in range(n):
        s2 += ah_n2[j] * ah_n2[j]
        g_ah[j] = 0.0
    _smooth_step(delta + 1.0 - s2, &gate, &dgate)
    if gate == 0.0 and dgate == 0.0:
        val[0] = 0.0
        return

    for j in range(n):
        rows[0][j] = 0.0
        cols[0][j] = eta[j]
    rows[0][0] = 1.0
    for i in range(1, n2):
        tail = rows[i - 1][n - 1]
        rows[i][0] = -tail * coef[0]
        for j in range(1, n):
            rows[i][j] = rows[i - 1][j - 1] - tail * coef[j]
        c = 0.0
        for j in range(n):
            c += coef[j] * cols[i - 1][j]
        for j in range(n - 1):
            cols[i][j] = cols[i - 1][j + 1]
        cols[i][n - 1] = -c

    # w = e_1^T Phi^(2n) + sum_j m_j e_1^T Phi^(j-1)
    tail = rows[n2 - 1][n - 1]
    w[0] = -tail * coef[0]
    for j in range(1, n):
        w[j] = rows[n2 - 1][j - 1] - tail * coef[j]
    for i in range(n2):
        for j in range(n):
            w[j] += m[i] * rows[i][j]

    chi_raw = 0.0
    for j in range(n):
        chi_raw += w[j] * eta[j]

    for i in range(n2):
        alphas[i] = rows[i][n - 1]
    for j in range(n):
        dchi_da[j] = 0.0
    for ell in range(n2):
        c = alphas[n2 - 1 - ell]
        for j in range(ell + 2, n2 + 1):
            c += m[j - 1] * alphas[j - 2 - ell]
        for j in range(n):
            dchi_da[j] -= c * cols[ell][j]

    val[0] = chi_raw * gate
    for i in range(n2):
        g_eta[i] = chi_raw * dgate * (-2.0 * eta_n2[i])
    for j in range(n):
        g_eta[j] += w[j] * gate
    for j in range(n):
        g_ah[j] = dchi_da[j] * gate + chi_raw * dgate * (-2.0 * ah_n2[j])


cdef int _rhs(double* y, double* out, double* u_out, Params* p) noexcept nogil:
    """Full closed-loop field. Returns 0, or 2 on a plant domain violation."""
    cdef double v1 = y[0]
    cdef double v2 = y[1]
    cdef double* x = y + p.o_plant
    cdef double* eta = y + p.o_eta
    cdef double* ah = y + p.o_ahat
    cdef double ed[MAX_2N]
    cdef double adot[MAX_N]
    cdef double resid[MAX_N]
    cdef double g_eta[MAX_2N]
    cdef double g_ah[MAX_N]
    cdef double chs = 0.0
    cdef int n = p.n
    cdef int n2 = 2 * n
    cdef int i, j
    cdef double k, yout, yr, e, rho, rho_p, alpha1, kdot, u, drive
    cdef double xh2, eps2, da1de, term, s, x1, x2, x3, denom, reaction, mu, bigd

    k = p.k_star
    if p.adaptive:
        k = y[p.o_khat]

    yout = x[p.y_index]
    if p.ref_v1:
        yr = v1
    else:
        yr = p.ref_const
    e = yout - yr
    rho = p.rho_c0 + p.rho_c1 * e * e
    rho_p = 2.0 * p.rho_c1 * e

    if p.mode == 0:
        chs = 0.0
        for i in range(n2):
            g_eta[i] = 0.0
        for j in range(n):
            g_ah[j] = 0.0
    elif p.mode == 1:
        _chi_s_full(eta, ah, p.m, n, p.delta, eta, ah, &chs, g_eta, g_ah)
    else:
        _chi_s_full(eta, p.a_true, p.m, n, p.delta, eta, ah, &chs, g_eta, g_ah)
        for j in range(n):
            g_ah[j] = 0.0

    alpha1 = -k * rho * e + chs

    # learner: a_hat' = -k_a Theta^T (Theta a_hat + eta_tail)
    for i in range(n):
        s = eta[n + i]
        for j in range(n):
            s += eta[i + j] * ah[j]
        resid[i] = s
    for j in range(n):
        s = 0.0
        for i in range(n):
            s += eta[i + j] * resid[i]
        adot[j] = -p.k_a * s

    kdot = 0.0
    if p.adaptive:
        kdot = rho * e * e

    if p.r == 1:
        u = alpha1
        drive = u
    else:
        xh2 = y[p.o_filt + 1]
        eps2 = xh2 - alpha1
        for i in range(n2 - 1):
            ed[i] = eta[i + 1]
        s = 0.0
        for i in range(n2):
            s += p.m[i] * eta[i]
        ed[n2 - 1] = -s + xh2
        da1de = -k * (rho + rho_p * e)
        term = 0.0
        for i in range(n2):
            term += g_eta[i] * ed[i]
        u = (-p.b * e - eps2 + p.lam[1] * y[p.o_filt]
             + term
             + p.b * da1de * (eps2 - k * rho * e)
             - 0.5 * eps2 * da1de * da1de)
        term = 0.0
        for j in range(n):
            term += g_ah[j] * adot[j]
        u += term + (-rho * e) * kdot
        drive = xh2
    if p.r == 1:
        for i in range(n2 - 1):
            ed[i] = eta[i + 1]
        s = 0.0
        for i in range(n2):
            s += p.m[i] * eta[i]
        ed[n2 - 1] = -s + drive

    u_out[0] = u

    out[0] = p.sigma * v2
    out[1] = -p.sigma * v1

    if p.kind == 0:
        x1 = x[0]
        x2 = x[1]
        out[p.o_plant] = x2
        out[p.o_plant + 1] = (-p.pp[0] * x1 - p.pp[1] * x1 * x1 * x1
                              - p.pp[2] * x2 + u + v1)
    elif p.kind == 1:
        x1 = x[0]
        x2 = x[1]
        denom = 1.0 + x2 / p.pp[0]
        if denom <= 0.0:
            return 2
        reaction = p.pp[3] * (1.0 - x1) * exp(x2 / denom)
        out[p.o_plant] = -x1 + reaction
        out[p.o_plant + 1] = -x2 + p.pp[2] * reaction + p.pp[1] * (u - x2) + v1
    else:
        x1 = x[0]
        x2 = x[1]
        x3 = x[2]
        denom = p.pp[5] + x2 + x2 * x2 / p.pp[6]
        if denom <= 0.0:
            return 2
        mu = (p.pp[4] + v1) * (1.0 - x3 / p.pp[7]) * x2 / denom
        bigd = p.pp[0]
        out[p.o_plant] = -bigd * x1 + mu * x1
        out[p.o_plant + 1] = bigd * (u - x2) - mu * x2 / p.pp[1]
        out[p.o_plant + 2] = -bigd * x3 + (p.pp[2] * mu + p.pp[3]) * x1

    if p.r >= 2:
        for i in range(p.r - 1):
            out[p.o_filt + i] = y[p.o_filt + i + 1] - p.lam[i] * y[p.o_filt]
        out[p.o_filt + p.r - 1] = u - p.lam[p.r - 1] * y[p.o_filt]

    for i in range(n2):
        out[p.o_eta + i] = ed[i]
    for j in range(n):
        out[p.o_ahat + j] = adot[j]
    if p.adaptive:
        out[p.o_khat] = kdot
    return 0


cdef int _rk4(double* y, double h, Params* p) noexcept nogil:
    cdef double k1[MAX_DIM]
    cdef double k2[MAX_DIM]
    cdef double k3[MAX_DIM]
    cdef double k4[MAX_DIM]
    cdef double tmp[MAX_DIM]
    cdef double u
    cdef int i, st
    cdef int dim = p.dim

    st = _rhs(y, k1, &u, p)
    if st:
        return st
    for i in range(dim):
        tmp[i] = y[i] + 0.5 * h * k1[i]
    st = _rhs(tmp, k2, &u, p)
    if st:
        return st
    for i in range(dim):
        tmp[i] = y[i] + 0.5 * h * k2[i]
    st = _rhs(tmp, k3, &u, p)
    if st:
        return st
    for i in range(dim):
        tmp[i] = y[i] + h * k3[i]
    st = _rhs(tmp, k4, &u, p)
    if st:
        return st
    for i in range(dim):
        y[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return 0


def integrate(double[::1] state0,
              int kind,
              double[::1] plant_params,
              int y_index,
              double b,
              int r,
              double[::1] lam,
              int adaptive,
              double k_star,
              double rho_c0,
              double rho_c1,
              double k_a,
              double[::1] m_coeffs,
              int n,
              double delta,
              int mode,
              double[::1] a_true,
              double sigma,
              int ref_v1,
              double ref_const,
              double h,
              long n_steps,
              long[::1] sample_at,
              double blow_limit):
    """Run the closed loop; returns (status, t_fail, sampled states, sampled u).

    status: 0 ok, 1 divergence guard tripped, 2 plant domain error.  On
    failure the sample arrays are truncated to the samples already taken.
    """
    cdef Params p
    cdef int i
    cdef long kstep, out_idx, n_samp
    cdef double y[MAX_DIM]
    cdef double scratch[MAX_DIM]
    cdef double u, t_fail
    cdef int status = 0
    cdef int bad

    if n < 1 or n > MAX_N:
        raise ValueError(f"generator order n must be in 1..{MAX_N}")
    if r < 1 or r > 2:
        raise ValueError("compiled kernel supports relative degree 1 and 2")
    if kind < 0 or kind > 2:
        raise ValueError("unknown plant kind id")

    p.kind = kind
    for i in range(plant_params.shape[0]):
        p.pp[i] = plant_params[i]
    p.y_index = y_index
    p.b = b
    p.r = r
    p.lam[0] = 0.0
    p.lam[1] = 0.0
    for i in range(lam.shape[0]):
        p.lam[i] = lam[i]
    p.adaptive = adaptive
    p.k_star = k_star
    p.rho_c0 = rho_c0
    p.rho_c1 = rho_c1
    p.k_a = k_a
    for i in range(2 * n):
        p.m[i] = m_coeffs[i]
    p.n = n
    p.delta = delta
    p.mode = mode
    for i in range(n):
        p.a_true[i] = a_true[i]
    p.sigma = sigma
    p.ref_v1 = ref_v1
    p.ref_const = ref_const

    p.n_plant = 2 if kind != 2 else 3
    p.o_plant = 2
    p.o_filt = 2 + p.n_plant
    p.o_eta = p.o_filt + (r if r >= 2 else 0)
    p.o_ahat = p.o_eta + 2 * n
    p.o_khat = p.o_ahat + n if adaptive else -1
    p.dim = p.o_ahat + n + (1 if adaptive else 0)

    if p.dim > MAX_DIM:
        raise ValueError("state dimension exceeds the compiled kernel limit")
    if state0.shape[0] != p.dim:
        raise ValueError(f"state0 must have length {p.dim}")

    n_samp = sample_at.shape[0]
    states = np.empty((n_samp, p.dim), dtype=np.float64)
    us = np.empty(n_samp, dtype=np.float64)
    cdef double[:, ::1] states_mv = states
    cdef double[::1] us_mv = us

    for i in range(p.dim):
        y[i] = state0[i]

    t_fail = 0.0
    out_idx = 0
    with nogil:
        for kstep in range(n_steps + 1):
            if out_idx < n_samp and kstep == sample_at[out_idx]:
                for i in range(p.dim):
                    states_mv[out_idx, i] = y[i]
                status = _rhs(y, scratch, &u, &p)
                if status:
                    t_fail = kstep * h
                    break
                us_mv[out_idx] = u
                out_idx += 1
                if out_idx == n_samp:
                    break
            status = _rk4(y, h, &p)
            if status:
                t_fail = kstep * h
                break
            bad = 0
            for i in range(p.dim):
                if not isfinite(y[i]) or fabs(y[i]) > blow_limit:
                    bad = 1
                    break
            if bad:
                status = 1
                t_fail = kstep * h
                break

    if status:
        states = states[:out_idx]
        us = us[:out_idx]
    return status, t_fail, states, us
