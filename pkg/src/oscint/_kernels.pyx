# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled loops for the stock benchmark systems.

Each function reimplements the per-step arithmetic of the corresponding
python stepper with the system callbacks hard-coded, keeping the order of
operations and the slow-gradient call accounting identical, so both
backends produce the same trajectories (to rounding) and the exact same
cost counts.  Sampling rows are raw state vectors; observables are always
computed by the python layer.
"""

import numpy as np

from libc.math cimport atan2, cos, fabs, floor, hypot, isfinite, sin, sqrt


# ---------------------------------------------------------------------------
# modified spring chain (scalar frequency), system callbacks

cdef inline double fpu_omega(double* q1) noexcept:
    return sqrt(1.0 + q1[0] * q1[0])


cdef inline void fpu_gomega(double* q1, double* out) noexcept:
    out[0] = q1[0] / sqrt(1.0 + q1[0] * q1[0])
    out[1] = 0.0
    out[2] = 0.0


cdef inline void fpu_springs(double* q1, double* q2, double* u) noexcept:
    u[0] = q1[0] - q2[0]
    u[1] = q1[1] - q2[1] - q1[0] - q2[0]
    u[2] = q1[2] - q2[2] - q1[1] - q2[1]
    u[3] = q1[2] + q2[2]


cdef inline double fpu_V(double* q1, double* q2) noexcept:
    cdef double u[4]
    fpu_springs(q1, q2, u)
    return 0.25 * (u[0] ** 4 + u[1] ** 4 + u[2] ** 4 + u[3] ** 4)


cdef inline void fpu_g1(double* q1, double* q2, double* out) noexcept:
    cdef double u[4]
    fpu_springs(q1, q2, u)
    cdef double c0 = u[0] ** 3, c1 = u[1] ** 3, c2 = u[2] ** 3, c3 = u[3] ** 3
    out[0] = c0 - c1
    out[1] = c1 - c2
    out[2] = c2 + c3


cdef inline void fpu_g2(double* q1, double* q2, double* out) noexcept:
    cdef double u[4]
    fpu_springs(q1, q2, u)
    cdef double c0 = u[0] ** 3, c1 = u[1] ** 3, c2 = u[2] ** 3, c3 = u[3] ** 3
    out[0] = -c0 - c1
    out[1] = -c1 - c2
    out[2] = -c2 + c3


# the slow potential seen through frequency-scaled fast variables

cdef inline double fpu_view_val(double* q1, double* q2v) noexcept:
    cdef double w = fpu_omega(q1), sq = sqrt(w)
    cdef double u[3]
    cdef int i
    for i in range(3):
        u[i] = q2v[i] / sq
    return fpu_V(q1, u)


cdef inline void fpu_view_g2(double* q1, double* q2v, double* out,
                             long long* calls) noexcept:
    cdef double w = fpu_omega(q1), sq = sqrt(w)
    cdef double u[3]
    cdef double g[3]
    cdef int i
    for i in range(3):
        u[i] = q2v[i] / sq
    calls[0] += 1
    fpu_g2(q1, u, g)
    for i in range(3):
        out[i] = g[i] / sq


cdef inline void fpu_view_g1(double* q1, double* q2v, double* out,
                             long long* calls) noexcept:
    cdef double w = fpu_omega(q1), sq = sqrt(w)
    cdef double u[3]
    cdef double g2[3]
    cdef double g1[3]
    cdef double go[3]
    cdef double dot
    cdef int i
    for i in range(3):
        u[i] = q2v[i] / sq
    calls[0] += 2
    fpu_g2(q1, u, g2)
    fpu_g1(q1, u, g1)
    fpu_gomega(q1, go)
    dot = u[0] * g2[0] + u[1] * g2[1] + u[2] * g2[2]
    for i in range(3):
        out[i] = g1[i] - go[i] / (2.0 * w) * dot


# per-step work area: input point plus everything hoisted at step start

ctypedef struct FpuWork:
    double q1[3]
    double x[3]
    double sigma
    double a
    double eps
    double h
    double w0
    double go0[3]
    double sin_s
    double cos_s
    double g1_0[3]
    double g1_xp[3]
    double g1_xm[3]
    double g2_xp[3]
    double g2_xm[3]
    double V_0


cdef void fpu_work_init(FpuWork* W, double* red, double eps, double h,
                        long long* calls) noexcept:
    cdef int i
    cdef double buf[3]
    for i in range(3):
        W.q1[i] = red[i]
        W.x[i] = red[3 + i]
    W.sigma = red[6]
    W.a = red[13]
    W.eps = eps
    W.h = h
    W.w0 = fpu_omega(W.q1)
    fpu_gomega(W.q1, W.go0)
    W.sin_s = sin(W.sigma)
    W.cos_s = cos(W.sigma)
    cdef double zero[3]
    zero[0] = zero[1] = zero[2] = 0.0
    fpu_view_g1(W.q1, zero, W.g1_0, calls)
    for i in range(3):
        buf[i] = eps * W.x[i]
    fpu_view_g1(W.q1, buf, W.g1_xp, calls)
    for i in range(3):
        buf[i] = -eps * W.x[i]
    fpu_view_g1(W.q1, buf, W.g1_xm, calls)
    for i in range(3):
        buf[i] = eps * W.x[i]
    fpu_view_g2(W.q1, buf, W.g2_xp, calls)
    for i in range(3):
        buf[i] = -eps * W.x[i]
    fpu_view_g2(W.q1, buf, W.g2_xm, calls)
    W.V_0 = fpu_view_val(W.q1, zero)


cdef void fpu_sweep(FpuWork* W, double* Z, bint coupling, long long* calls,
                    double* dZ) noexcept:
    cdef double eps = W.eps, h = W.h
    cdef double Sigma = Z[6]
    cdef double mid[3]
    cdef double go_mid[3]
    cdef double g1_mid[3]
    cdef double g1_Yp[3]
    cdef double g1_Ym[3]
    cdef double buf[3]
    cdef double zero[3]
    cdef double w_mid, tmp
    cdef int i
    zero[0] = zero[1] = zero[2] = 0.0
    for i in range(3):
        mid[i] = W.q1[i] + 0.5 * h * Z[i]
    w_mid = fpu_omega(mid)
    fpu_gomega(mid, go_mid)
    fpu_view_g1(mid, zero, g1_mid, calls)
    for i in range(3):
        buf[i] = eps * Z[3 + i]
    fpu_view_g1(W.q1, buf, g1_Yp, calls)
    for i in range(3):
        buf[i] = -eps * Z[3 + i]
    fpu_view_g1(W.q1, buf, g1_Ym, calls)
    for i in range(3):
        tmp = W.g1_xp[i] - 2.0 * W.g1_0[i]
        tmp = tmp + W.g1_xm[i]
        tmp = tmp + g1_Yp[i]
        tmp = tmp - 2.0 * W.g1_0[i]
        tmp = tmp + g1_Ym[i]
        dZ[i] = -h * (g1_mid[i] + W.a * go_mid[i]) - h / 4.0 * tmp
        dZ[3 + i] = -h / 4.0 * (W.g2_xp[i] - W.g2_xm[i])
    dZ[6] = h / eps * w_mid
    if not coupling:
        return

    cdef double u_s[3]
    cdef double g2_s[3]
    cdef double g1_s[3]
    cdef double B[3]
    cdef double goB[3]
    cdef double u_S[3]
    cdef double g1_BS[3]
    cdef double g1_B0[3]
    cdef double g2_BS[3]
    cdef double V_s, V_BS, V_B0, wB, sin_S, cos_S, rot_s
    for i in range(3):
        u_s[i] = eps * (W.x[i] * W.sin_s - Z[3 + i] * W.cos_s)
    fpu_view_g2(W.q1, u_s, g2_s, calls)
    fpu_view_g1(W.q1, u_s, g1_s, calls)
    V_s = fpu_view_val(W.q1, u_s)
    for i in range(3):
        B[i] = W.q1[i] + h * Z[i]
    wB = fpu_omega(B)
    fpu_gomega(B, goB)
    sin_S = sin(Sigma)
    cos_S = cos(Sigma)
    for i in range(3):
        u_S[i] = eps * (W.x[i] * sin_S - Z[3 + i] * cos_S)
    fpu_view_g1(B, u_S, g1_BS, calls)
    fpu_view_g1(B, zero, g1_B0, calls)
    V_BS = fpu_view_val(B, u_S)
    V_B0 = fpu_view_val(B, zero)
    fpu_view_g2(B, u_S, g2_BS, calls)
    rot_s = 0.0
    for i in range(3):
        rot_s += g2_s[i] * (W.x[i] * W.cos_s + Z[3 + i] * W.sin_s)
    for i in range(3):
        dZ[i] -= eps * h * go_mid[i] * (rot_s / W.w0)
        tmp = -eps * (g1_BS[i] - g1_B0[i]) / wB
        tmp = tmp + eps * goB[i] * (V_BS - V_B0) / (wB * wB)
        tmp = tmp - eps * (W.g1_0[i] - g1_s[i]) / W.w0
        tmp = tmp + eps * W.go0[i] * (W.V_0 - V_s) / (W.w0 * W.w0)
        dZ[i] += tmp
        dZ[3 + i] += (-eps * g2_BS[i] / wB * sin_S
                      + eps * g2_s[i] / W.w0 * W.sin_s)


cdef void fpu_finish(FpuWork* W, double* Z, long long* calls,
                     double* out) noexcept:
    """Fills out[0:3] = Q1, out[3:6] = X, out[13] = A."""
    cdef double eps = W.eps, h = W.h
    cdef double Sigma = Z[6]
    cdef double mid[3]
    cdef double go_mid[3]
    cdef double g1_mid[3]
    cdef double u_s[3]
    cdef double g2_s[3]
    cdef double B[3]
    cdef double goB[3]
    cdef double u_S[3]
    cdef double g1_BS[3]
    cdef double g1_B0[3]
    cdef double g2_BS[3]
    cdef double g2_Yp[3]
    cdef double g2_Ym[3]
    cdef double buf[3]
    cdef double zero[3]
    cdef double wB, V_BS, V_B0, sin_S, cos_S, rot_s, rot_S
    cdef int i
    zero[0] = zero[1] = zero[2] = 0.0
    for i in range(3):
        mid[i] = W.q1[i] + 0.5 * h * Z[i]
    fpu_gomega(mid, go_mid)
    fpu_view_g1(mid, zero, g1_mid, calls)
    for i in range(3):
        u_s[i] = eps * (W.x[i] * W.sin_s - Z[3 + i] * W.cos_s)
    fpu_view_g2(W.q1, u_s, g2_s, calls)
    for i in range(3):
        B[i] = W.q1[i] + h * Z[i]
    wB = fpu_omega(B)
    fpu_gomega(B, goB)
    sin_S = sin(Sigma)
    cos_S = cos(Sigma)
    for i in range(3):
        u_S[i] = eps * (W.x[i] * sin_S - Z[3 + i] * cos_S)
    fpu_view_g1(B, u_S, g1_BS, calls)
    fpu_view_g1(B, zero, g1_B0, calls)
    V_BS = fpu_view_val(B, u_S)
    V_B0 = fpu_view_val(B, zero)
    fpu_view_g2(B, u_S, g2_BS, calls)
    for i in range(3):
        buf[i] = eps * Z[3 + i]
    fpu_view_g2(W.q1, buf, g2_Yp, calls)
    for i in range(3):
        buf[i] = -eps * Z[3 + i]
    fpu_view_g2(W.q1, buf, g2_Ym, calls)
    rot_s = 0.0
    rot_S = 0.0
    for i in range(3):
        rot_s += g2_s[i] * (W.x[i] * W.cos_s + Z[3 + i] * W.sin_s)
        rot_S += g2_BS[i] * (W.x[i] * cos_S + Z[3 + i] * sin_S)
    for i in range(3):
        out[i] = (W.q1[i] + h * Z[i]
                  + h * h / 2.0 * (g1_mid[i] + W.a * go_mid[i])
                  + eps * h * h / 2.0 * go_mid[i] * (rot_s / W.w0)
                  + h * eps * (g1_BS[i] - g1_B0[i]) / wB
                  - h * eps * (V_BS - V_B0) * goB[i] / (wB * wB))
        out[3 + i] = (W.x[i] - eps * g2_BS[i] / wB * cos_S
                      + eps * g2_s[i] / W.w0 * W.cos_s
                      + h / 4.0 * (g2_Yp[i] - g2_Ym[i]))
    out[13] = W.a + eps * rot_s / W.w0 - eps * rot_S / wB


cdef long long fpu_step(double* red, double eps, double h, double tol,
                        int max_iter, bint noloop, long long* calls,
                        double* out) noexcept:
    """Advances red[14] into out[14]; returns fixed point iterations,
    -1 when the iteration stalls, -2 on a non-finite iterate."""
    cdef FpuWork W
    cdef double z[7]
    cdef double Z[7]
    cdef double Znew[7]
    cdef double dZ[7]
    cdef double mid[3]
    cdef double change, scale, av
    cdef long long iters = -1
    cdef int i, k
    fpu_work_init(&W, red, eps, h, calls)
    for i in range(3):
        z[i] = red[7 + i]
        z[3 + i] = red[10 + i]
    z[6] = red[6]

    if noloop:
        fpu_sweep(&W, z, False, calls, dZ)
        for i in range(7):
            Z[i] = z[i] + dZ[i]
        fpu_sweep(&W, Z, True, calls, dZ)
        for i in range(7):
            Z[i] = z[i] + dZ[i]
        iters = 0
    else:
        for i in range(7):
            Z[i] = z[i]
        for k in range(1, max_iter + 1):
            fpu_sweep(&W, Z, True, calls, dZ)
            change = 0.0
            scale = 1.0
            for i in range(7):
                Znew[i] = z[i] + dZ[i]
                if not isfinite(Znew[i]):
                    return -2
                av = fabs(Znew[i] - Z[i])
                if av > change:
                    change = av
                av = fabs(Znew[i])
                if av > scale:
                    scale = av
                Z[i] = Znew[i]
            if change <= tol * scale:
                iters = k
                break
        if iters < 0:
            return -1
        # pin the phase row to the converged slow momentum
        for i in range(3):
            mid[i] = W.q1[i] + 0.5 * h * Z[i]
        Z[6] = W.sigma + h / eps * fpu_omega(mid)

    fpu_finish(&W, Z, calls, out)
    out[6] = Z[6]
    for i in range(3):
        out[7 + i] = Z[i]
        out[10 + i] = Z[3 + i]
    return iters


def fpu_hj_run(double[::1] red0, double eps, double h, double tol,
               int max_iter, long long n_steps, long long[::1] samples,
               int noloop):
    """Long-step run on the spring chain in reduced variables.

    Returns (sample rows (m, 14), total fixed point iterations, slow
    gradient calls, failing step or -1)."""
    cdef long long m = samples.shape[0]
    out_arr = np.empty((m, 14))
    cdef double[:, ::1] out = out_arr
    cdef double red[14]
    cdef double red_new[14]
    cdef long long calls = 0, total_iters = 0, fail = -1
    cdef long long n, idx = 0
    cdef long long it
    cdef int i
    cdef bint bad
    for i in range(14):
        red[i] = red0[i]
    for n in range(n_steps + 1):
        if idx < m and n == samples[idx]:
            bad = False
            for i in range(14):
                out[idx, i] = red[i]
                if not isfinite(red[i]):
                    bad = True
            if bad:
                fail = n
                break
            idx += 1
        if n < n_steps:
            it = fpu_step(red, eps, h, tol, max_iter, noloop, &calls,
                          red_new)
            if it < 0:
                fail = n
                break
            total_iters += it
            for i in range(14):
                red[i] = red_new[i]
    return out_arr, total_iters, calls, fail


# ---------------------------------------------------------------------------
# quartic oscillator benchmarks (constant diagonal frequencies)

ctypedef struct QWork:
    int f
    int ng
    double w[4]
    double omc[4]
    double gom[3]
    int off[3]
    int mult[3]
    double inv_w[3]
    double inv_w2[3]


cdef int quartic_init(QWork* S, int n_fast) noexcept:
    cdef int i
    if n_fast == 3:
        S.f = 3
        S.ng = 2
        S.w[0] = 1.0; S.w[1] = 1.0; S.w[2] = 2.5
        S.omc[0] = 1.0; S.omc[1] = 1.0; S.omc[2] = sqrt(2.0)
        S.gom[0] = 1.0; S.gom[1] = sqrt(2.0)
        S.off[0] = 0; S.off[1] = 2
        S.mult[0] = 2; S.mult[1] = 1
    elif n_fast == 4:
        S.f = 4
        S.ng = 3
        S.w[0] = 1.0; S.w[1] = 1.0; S.w[2] = 1.0; S.w[3] = 2.5
        S.omc[0] = 1.0; S.omc[1] = 1.0; S.omc[2] = sqrt(2.0); S.omc[3] = 2.0
        S.gom[0] = 1.0; S.gom[1] = sqrt(2.0); S.gom[2] = 2.0
        S.off[0] = 0; S.off[1] = 2; S.off[2] = 3
        S.mult[0] = 2; S.mult[1] = 1; S.mult[2] = 1
    else:
        return -1
    for i in range(S.ng):
        S.inv_w[i] = 1.0 / S.gom[i]
        S.inv_w2[i] = 1.0 / (S.gom[i] * S.gom[i])
    return 0


cdef void quartic_hess_apply(QWork* S, double q1, int i, double* v,
                             double* out) noexcept:
    """out = (fast Hessian block i at q2 = 0) @ v, block-local indexing.
    The pinning correction sits at the global (0, 0) entry only."""
    cdef int a, b, ga, gb
    cdef double acc, hab
    for a in range(S.mult[i]):
        ga = S.off[i] + a
        acc = 0.0
        for b in range(S.mult[i]):
            gb = S.off[i] + b
            hab = 12.0 * (S.w[ga] * S.w[gb])
            if ga == 0 and gb == 0:
                hab += 0.25 * (q1 * q1)
            acc += hab * v[b]
        out[a] = acc


cdef long long quartic_core(QWork* S, double q1, double* x2, double p1,
                            double* y2, double eps, double h, double tol,
                            int max_iter, long long* calls,
                            double* oq1, double* ox2, double* op1,
                            double* oy2) noexcept:
    """Implicit half of the step with signed h, everything but the final
    rotation.  Returns inner iterations, -1 no convergence, -2 non-finite."""
    cdef int f = S.f, ng = S.ng
    cdef double tau_g[3]
    cdef double sin_g[3]
    cdef double cos_g[3]
    cdef double r2[4]
    cdef double g2_q[4]
    cdef double g2_B[4]
    cdef double dY_const[4]
    cdef double hv[2]
    cdef double hr[2]
    cdef double z[5]
    cdef double Z[5]
    cdef double Znew[5]
    cdef double dP_const, dP, B, change, scale, av, g1_q
    cdef long long iters = -1
    cdef int i, c, a, k
    for i in range(ng):
        tau_g[i] = S.gom[i] * h / eps
        sin_g[i] = sin(tau_g[i])
        cos_g[i] = cos(tau_g[i])
    for c in range(f):
        r2[c] = S.omc[c] * x2[c] / eps
    calls[0] += 1
    g1_q = q1
    calls[0] += 1
    for c in range(f):
        g2_q[c] = 4.0 * S.w[c]
    for i in range(ng):
        for a in range(S.mult[i]):
            hv[a] = r2[S.off[i] + a]
        quartic_hess_apply(S, q1, i, hv, hr)
        for a in range(S.mult[i]):
            dY_const[S.off[i] + a] = -0.5 * h * eps * S.inv_w[i] * hr[a]
    dP_const = -h * g1_q
    dP_const = dP_const - 0.25 * h * (eps * eps) * S.inv_w2[0] * (
        0.5 * q1 * (r2[0] * r2[0]))

    z[0] = p1
    for c in range(f):
        z[1 + c] = y2[c]
        Z[1 + c] = y2[c]
    Z[0] = p1
    for k in range(1, max_iter + 1):
        B = q1 + h * Z[0]
        calls[0] += 1
        for c in range(f):
            g2_B[c] = 4.0 * S.w[c]
        dP = dP_const
        dP = dP - 0.25 * h * (eps * eps) * S.inv_w2[0] * (
            0.5 * q1 * (Z[1] * Z[1]))
        Znew[0] = z[0] + dP
        for i in range(ng):
            for a in range(S.mult[i]):
                c = S.off[i] + a
                Znew[1 + c] = z[1 + c] + (dY_const[c]
                                          - eps * sin_g[i] * S.inv_w[i]
                                          * g2_B[c])
        change = 0.0
        scale = 1.0
        for c in range(1 + f):
            if not isfinite(Znew[c]):
                return -2
            av = fabs(Znew[c] - Z[c])
            if av > change:
                change = av
            av = fabs(Znew[c])
            if av > scale:
                scale = av
            Z[c] = Znew[c]
        if change <= tol * scale:
            iters = k
            break
    if iters < 0:
        return -1

    B = q1 + h * Z[0]
    calls[0] += 1
    for c in range(f):
        g2_B[c] = 4.0 * S.w[c]
    oq1[0] = q1 + h * Z[0]
    op1[0] = Z[0]
    for i in range(ng):
        for a in range(S.mult[i]):
            hv[a] = Z[1 + S.off[i] + a]
        quartic_hess_apply(S, q1, i, hv, hr)
        for a in range(S.mult[i]):
            c = S.off[i] + a
            ox2[c] = x2[c] + ((eps * eps) * S.inv_w2[i] * g2_q[c]
                              + 0.5 * h * (eps * eps) * S.inv_w2[i] * hr[a]
                              - (eps * eps) * cos_g[i] * S.inv_w2[i] * g2_B[c])
            oy2[c] = Z[1 + c]
    return iters


cdef void quartic_rotate(QWork* S, double eps, double h, double* x2,
                         double* y2, double* ox2, double* oy2) noexcept:
    cdef int c
    cdef double tau, cs, sn, om
    for c in range(S.f):
        om = S.omc[c]
        tau = om * h / eps
        cs = cos(tau)
        sn = sin(tau)
        ox2[c] = cs * x2[c] + eps / om * sn * y2[c]
        oy2[c] = -om / eps * sn * x2[c] + cs * y2[c]


cdef long long quartic_forward(QWork* S, double* st, double eps, double h,
                               double tol, int max_iter, long long* calls,
                               double* out) noexcept:
    """st and out are flat (q1, q2[f], p1, p2[f]).  Returns iterations
    or a negative failure code."""
    cdef double xw[4]
    cdef double yw[4]
    cdef double q1o, p1o
    cdef long long it
    cdef int f = S.f
    it = quartic_core(S, st[0], &st[1], st[1 + f], &st[2 + f], eps, h,
                      tol, max_iter, calls, &q1o, xw, &p1o, yw)
    if it < 0:
        return it
    out[0] = q1o
    out[1 + f] = p1o
    quartic_rotate(S, eps, h, xw, yw, &out[1], &out[2 + f])
    return it


cdef long long quartic_adjoint(QWork* S, double* st, double eps, double h,
                               double tol, int max_iter, long long* calls,
                               double* out) noexcept:
    """Inverse of the negated-step forward map; st/out flat as above.
    Returns outer plus inner iterations or a negative failure code."""
    cdef int f = S.f, n = 2 + 2 * f
    cdef double target[10]
    cdef double W[10]
    cdef double Wnew[10]
    cdef double N[10]
    cdef double xw[4]
    cdef double yw[4]
    cdef double q1o, p1o, change, scale, av
    cdef long long inner_sum = 0, it
    cdef long long outer = -1
    cdef int c, k
    target[0] = st[0]
    target[1 + f] = st[1 + f]
    quartic_rotate(S, eps, h, &st[1], &st[2 + f], &target[1], &target[2 + f])
    for c in range(n):
        W[c] = target[c]
    for k in range(1, max_iter + 1):
        it = quartic_core(S, W[0], &W[1], W[1 + f], &W[2 + f], eps, -h,
                          tol, max_iter, calls, &q1o, xw, &p1o, yw)
        if it < 0:
            return it
        inner_sum += it
        N[0] = q1o
        N[1 + f] = p1o
        for c in range(f):
            N[1 + c] = xw[c]
            N[2 + f + c] = yw[c]
        change = 0.0
        scale = 1.0
        for c in range(n):
            Wnew[c] = target[c] + (W[c] - N[c])
            if not isfinite(Wnew[c]):
                return -2
            av = fabs(Wnew[c] - W[c])
            if av > change:
                change = av
            av = fabs(Wnew[c])
            if av > scale:
                scale = av
            W[c] = Wnew[c]
        if change <= tol * scale:
            outer = k
            break
    if outer < 0:
        return -1
    for c in range(n):
        out[c] = W[c]
    return outer + inner_sum


def quartic_hj_run(int n_fast, double[::1] st0, double eps, double h,
                   double tol, int max_iter, long long n_steps,
                   long long[::1] samples, int scheme):
    """Long-step run on a quartic benchmark; scheme 0 is the one-sided
    map, 1 the symmetric composition.  Returns (rows (m, 2 + 2 f), total
    iterations, slow gradient calls, failing step or -1)."""
    cdef QWork S
    if quartic_init(&S, n_fast) != 0:
        raise ValueError("n_fast must be 3 or 4")
    cdef int n = 2 + 2 * S.f
    cdef long long m = samples.shape[0]
    out_arr = np.empty((m, n))
    cdef double[:, ::1] out = out_arr
    cdef double st[10]
    cdef double mid[10]
    cdef double stn[10]
    cdef long long calls = 0, total_iters = 0, fail = -1
    cdef long long nn, idx = 0, it1, it2
    cdef int i
    cdef bint bad
    for i in range(n):
        st[i] = st0[i]
    for nn in range(n_steps + 1):
        if idx < m and nn == samples[idx]:
            bad = False
            for i in range(n):
                out[idx, i] = st[i]
                if not isfinite(st[i]):
                    bad = True
            if bad:
                fail = nn
                break
            idx += 1
        if nn < n_steps:
            if scheme == 0:
                it1 = quartic_forward(&S, st, eps, h, tol, max_iter,
                                      &calls, stn)
                if it1 < 0:
                    fail = nn
                    break
                total_iters += it1
            else:
                it1 = quartic_forward(&S, st, eps, 0.5 * h, tol, max_iter,
                                      &calls, mid)
                if it1 < 0:
                    fail = nn
                    break
                it2 = quartic_adjoint(&S, mid, eps, 0.5 * h, tol, max_iter,
                                      &calls, stn)
                if it2 < 0:
                    fail = nn
                    break
                total_iters += it1 + it2
            for i in range(n):
                st[i] = stn[i]
    return out_arr, total_iters, calls, fail


# ---------------------------------------------------------------------------
# stiff spring pendulum

cdef long long pend_forward(double* st, double eps, double h, double tol,
                            int max_iter, long long* calls,
                            double* out) noexcept:
    """st/out = (a, r, p_a, p_r).  Returns iterations or negative code."""
    cdef double tau = h / eps
    cdef double ct = cos(tau), sn = sin(tau)
    cdef double a = st[0], r = st[1], pa = st[2], pr = st[3]
    cdef double b = r / eps
    cdef double pb = pr
    cdef double e2 = eps * eps
    cdef double wp, wpp, Z, Znew, al, Pb, cub, change, scale, B
    cdef long long iters = -1
    cdef int k
    wp = -sin(2.0 * a)
    calls[0] += 1
    wpp = -2.0 * cos(2.0 * a)
    Z = pa
    for k in range(1, max_iter + 1):
        al = Z + h * wp
        Pb = pb + eps * (Z * Z) * sn - 1.5 * h * eps * b * (al * al)
        cub = 1.5 * ((b * b) + (Pb * Pb)) * al - 2.0 * al ** 3
        Znew = pa + (-h * wp + 2.0 * h * e2 * Pb * al * wpp
                     - (h * h) * e2 * cub * wpp)
        if not isfinite(Znew):
            return -2
        change = fabs(Znew - Z)
        scale = fabs(Znew)
        if scale < 1.0:
            scale = 1.0
        Z = Znew
        if change <= tol * scale:
            iters = k
            break
    if iters < 0:
        return -1
    al = Z + h * wp
    Pb = pb + eps * (Z * Z) * sn - 1.5 * h * eps * b * (al * al)
    cub = 1.5 * ((b * b) + (Pb * Pb)) * al - 2.0 * al ** 3
    B = b + eps * (Z * Z) * ct - eps * (al * al) + 1.5 * h * eps * Pb * (al * al)
    out[0] = (a + h * Z + 2.0 * e2 * Z * (Pb * ct - b * sn)
              - 2.0 * e2 * Pb * al + h * e2 * cub)
    out[1] = eps * (B * ct + Pb * sn)
    out[2] = Z
    out[3] = -B * sn + Pb * ct
    return iters


cdef long long pend_adjoint(double* st, double eps, double h, double tol,
                            int max_iter, long long* calls,
                            double* out) noexcept:
    cdef double tau = h / eps
    cdef double ct = cos(tau), sn = sin(tau)
    cdef double a = st[0], r = st[1], pa = st[2], pr = st[3]
    cdef double b = (r / eps) * ct + pr * sn
    cdef double pb = -(r / eps) * sn + pr * ct
    cdef double e2 = eps * eps
    cdef double A, B, An, Bn, be, cub, dA, dB, change, scale, av
    cdef double wpA, wppA, Pb, Pa
    cdef long long outer = -1
    cdef int k
    A = a
    B = b
    for k in range(1, max_iter + 1):
        wpA = -sin(2.0 * A)
        calls[0] += 1
        be = pa - h * wpA
        cub = 1.5 * ((B * B) + (pb * pb)) * be - 2.0 * be ** 3
        dA = (h * pa - 2.0 * e2 * pa * (pb * ct + B * sn)
              + 2.0 * e2 * pb * be + h * e2 * cub)
        dB = (-eps * (pa * pa) * ct + eps * (be * be)
              + 1.5 * h * eps * pb * (be * be))
        An = a + dA
        Bn = b + dB
        if not (isfinite(An) and isfinite(Bn)):
            return -2
        change = fabs(An - A)
        av = fabs(Bn - B)
        if av > change:
            change = av
        scale = 1.0
        av = fabs(An)
        if av > scale:
            scale = av
        av = fabs(Bn)
        if av > scale:
            scale = av
        A = An
        B = Bn
        if change <= tol * scale:
            outer = k
            break
    if outer < 0:
        return -1
    wpA = -sin(2.0 * A)
    calls[0] += 1
    wppA = -2.0 * cos(2.0 * A)
    be = pa - h * wpA
    cub = 1.5 * ((B * B) + (pb * pb)) * be - 2.0 * be ** 3
    Pb = pb + eps * (pa * pa) * sn - 1.5 * h * eps * B * (be * be)
    Pa = (pa - h * wpA + 2.0 * h * e2 * pb * be * wppA
          + (h * h) * e2 * cub * wppA)
    out[0] = A
    out[1] = eps * B
    out[2] = Pa
    out[3] = Pb
    return outer


def pendulum_hj_run(double[::1] st0, double eps, double h, double tol,
                    int max_iter, long long n_steps, long long[::1] samples,
                    int scheme):
    """Pendulum long-step run in internal variables; scheme 0 one-sided,
    1 symmetric.  Returns (rows (m, 4), iterations, slow calls, failing
    step or -1, failure kind: 0 none, 1 no convergence, 2 domain)."""
    cdef long long m = samples.shape[0]
    out_arr = np.empty((m, 4))
    cdef double[:, ::1] out = out_arr
    cdef double st[4]
    cdef double mid[4]
    cdef double stn[4]
    cdef long long calls = 0, total_iters = 0, fail = -1
    cdef long long n, idx = 0, it1, it2
    cdef int i, kind = 0
    cdef bint bad
    for i in range(4):
        st[i] = st0[i]
    for n in range(n_steps + 1):
        if idx < m and n == samples[idx]:
            bad = False
            for i in range(4):
                out[idx, i] = st[i]
                if not isfinite(st[i]):
                    bad = True
            if bad:
                fail = n
                kind = 1
                break
            idx += 1
        if n < n_steps:
            if scheme == 0:
                it1 = pend_forward(st, eps, h, tol, max_iter, &calls, stn)
                if it1 < 0:
                    fail = n
                    kind = 1
                    break
                total_iters += it1
            else:
                it1 = pend_forward(st, eps, 0.5 * h, tol, max_iter, &calls,
                                   mid)
                if it1 < 0:
                    fail = n
                    kind = 1
                    break
                it2 = pend_adjoint(mid, eps, 0.5 * h, tol, max_iter, &calls,
                                   stn)
                if it2 < 0:
                    fail = n
                    kind = 1
                    break
                total_iters += it1 + it2
            for i in range(4):
                st[i] = stn[i]
            if 1.0 + st[1] <= 0.1:
                fail = n + 1
                kind = 2
                break
    return out_arr, total_iters, calls, fail, kind


# ---------------------------------------------------------------------------
# reference integrators

cdef void fpu_full_force(double* q1, double* q2, double eps,
                         long long* calls, double* F1,
                         double* F2) noexcept:
    cdef double g1v[3]
    cdef double g2v[3]
    cdef double go[3]
    cdef double w, dot, t
    cdef int i
    calls[0] += 2
    w = fpu_omega(q1)
    fpu_gomega(q1, go)
    fpu_g1(q1, q2, g1v)
    fpu_g2(q1, q2, g2v)
    dot = q2[0] * q2[0] + q2[1] * q2[1] + q2[2] * q2[2]
    for i in range(3):
        t = w * go[i] * dot / (eps * eps)
        F1[i] = -g1v[i] - t
        F2[i] = -g2v[i] - w * w * q2[i] / (eps * eps)


def fpu_verlet_run(double[::1] st0, double eps, double dt, long long n_steps,
                   long long[::1] samples):
    """Velocity Verlet on the full spring chain Hamiltonian.
    Returns (rows (m, 12), slow gradient calls, failing step or -1)."""
    cdef long long m = samples.shape[0]
    out_arr = np.empty((m, 12))
    cdef double[:, ::1] out = out_arr
    cdef double q1[3]
    cdef double q2[3]
    cdef double p1[3]
    cdef double p2[3]
    cdef double F1[3]
    cdef double F2[3]
    cdef double ph1[3]
    cdef double ph2[3]
    cdef long long calls = 0, fail = -1
    cdef long long n, idx = 0
    cdef int i
    cdef bint bad
    for i in range(3):
        q1[i] = st0[i]
        q2[i] = st0[3 + i]
        p1[i] = st0[6 + i]
        p2[i] = st0[9 + i]
    fpu_full_force(q1, q2, eps, &calls, F1, F2)
    for n in range(n_steps + 1):
        if idx < m and n == samples[idx]:
            bad = False
            for i in range(3):
                out[idx, i] = q1[i]
                out[idx, 3 + i] = q2[i]
                out[idx, 6 + i] = p1[i]
                out[idx, 9 + i] = p2[i]
                if not (isfinite(q1[i]) and isfinite(q2[i])
                        and isfinite(p1[i]) and isfinite(p2[i])):
                    bad = True
            if bad:
                fail = n
                break
            idx += 1
        if n < n_steps:
            for i in range(3):
                ph1[i] = p1[i] + 0.5 * dt * F1[i]
                ph2[i] = p2[i] + 0.5 * dt * F2[i]
                q1[i] = q1[i] + dt * ph1[i]
                q2[i] = q2[i] + dt * ph2[i]
            fpu_full_force(q1, q2, eps, &calls, F1, F2)
            for i in range(3):
                p1[i] = ph1[i] + 0.5 * dt * F1[i]
                p2[i] = ph2[i] + 0.5 * dt * F2[i]
    return out_arr, calls, fail


cdef void quartic_full_force(QWork* S, double q1, double* q2, double eps,
                             long long* calls, double* F1,
                             double* F2) noexcept:
    cdef double Ssum = 1.0
    cdef double g
    cdef int c
    calls[0] += 2
    for c in range(S.f):
        Ssum += S.w[c] * q2[c]
    F1[0] = -(0.25 * q1 * (q2[0] * q2[0]) + q1)
    for c in range(S.f):
        g = 4.0 * Ssum ** 3 * S.w[c]
        if c == 0:
            g += 0.25 * (q1 * q1) * q2[0]
        F2[c] = -g - S.omc[c] * S.omc[c] * q2[c] / (eps * eps)


def quartic_verlet_run(int n_fast, double[::1] st0, double eps, double dt,
                       long long n_steps, long long[::1] samples):
    """Velocity Verlet on a quartic benchmark.
    Returns (rows (m, 2 + 2 f), slow gradient calls, failing step or -1)."""
    cdef QWork S
    if quartic_init(&S, n_fast) != 0:
        raise ValueError("n_fast must be 3 or 4")
    cdef int f = S.f
    cdef long long m = samples.shape[0]
    out_arr = np.empty((m, 2 + 2 * f))
    cdef double[:, ::1] out = out_arr
    cdef double q1, p1, ph1
    cdef double q2[4]
    cdef double p2[4]
    cdef double F1[1]
    cdef double F2[4]
    cdef double ph2[4]
    cdef long long calls = 0, fail = -1
    cdef long long n, idx = 0
    cdef int i
    cdef bint bad
    q1 = st0[0]
    p1 = st0[1 + f]
    for i in range(f):
        q2[i] = st0[1 + i]
        p2[i] = st0[2 + f + i]
    quartic_full_force(&S, q1, q2, eps, &calls, F1, F2)
    for n in range(n_steps + 1):
        if idx < m and n == samples[idx]:
            out[idx, 0] = q1
            out[idx, 1 + f] = p1
            bad = not (isfinite(q1) and isfinite(p1))
            for i in range(f):
                out[idx, 1 + i] = q2[i]
                out[idx, 2 + f + i] = p2[i]
                if not (isfinite(q2[i]) and isfinite(p2[i])):
                    bad = True
            if bad:
                fail = n
                break
            idx += 1
        if n < n_steps:
            ph1 = p1 + 0.5 * dt * F1[0]
            q1 = q1 + dt * ph1
            for i in range(f):
                ph2[i] = p2[i] + 0.5 * dt * F2[i]
                q2[i] = q2[i] + dt * ph2[i]
            quartic_full_force(&S, q1, q2, eps, &calls, F1, F2)
            p1 = ph1 + 0.5 * dt * F1[0]
            for i in range(f):
                p2[i] = ph2[i] + 0.5 * dt * F2[i]
    return out_arr, calls, fail


def pendulum_verlet_run(double[::1] st0, double eps, double dt,
                        long long n_steps, long long[::1] samples):
    """Velocity Verlet on the pendulum in Cartesian variables.
    Returns (rows (m, 4), slow gradient calls, failing step or -1)."""
    cdef long long m = samples.shape[0]
    out_arr = np.empty((m, 4))
    cdef double[:, ::1] out = out_arr
    cdef double qx = st0[0], qy = st0[1], px = st0[2], py = st0[3]
    cdef double Fx, Fy, phx, phy, rbar, ang, radial, wp
    cdef long long calls = 0, fail = -1
    cdef long long n, idx = 0
    calls += 1
    rbar = hypot(qx, qy)
    ang = atan2(qy, qx)
    radial = -(rbar - 1.0) / (eps * eps * rbar)
    wp = -sin(2.0 * ang)
    Fx = radial * qx + wp * qy / (rbar * rbar)
    Fy = radial * qy - wp * qx / (rbar * rbar)
    for n in range(n_steps + 1):
        if idx < m and n == samples[idx]:
            out[idx, 0] = qx
            out[idx, 1] = qy
            out[idx, 2] = px
            out[idx, 3] = py
            if not (isfinite(qx) and isfinite(qy) and isfinite(px)
                    and isfinite(py)):
                fail = n
                break
            idx += 1
        if n < n_steps:
            phx = px + 0.5 * dt * Fx
            phy = py + 0.5 * dt * Fy
            qx = qx + dt * phx
            qy = qy + dt * phy
            calls += 1
            rbar = hypot(qx, qy)
            ang = atan2(qy, qx)
            radial = -(rbar - 1.0) / (eps * eps * rbar)
            wp = -sin(2.0 * ang)
            Fx = radial * qx + wp * qy / (rbar * rbar)
            Fy = radial * qy - wp * qx / (rbar * rbar)
            px = phx + 0.5 * dt * Fx
            py = phy + 0.5 * dt * Fy
    return out_arr, calls, fail


# multiple-time-stepping runs: kick with the slow (possibly mollified)
# force, oscillate the fast block with the frequency frozen at step start

cdef void mts_substeps(double H, double dt, long long* n_full,
                       double* rem) noexcept:
    n_full[0] = <long long> floor(H / dt * (1.0 + 1e-12) + 1e-9)
    rem[0] = H - n_full[0] * dt
    if rem[0] <= 1e-9 * dt:
        rem[0] = 0.0


cdef double scalar_cbar(double nu, double H, double dt) noexcept:
    """Trapezoid average of the cosine-like Verlet recursion started at
    (1, 0) under acceleration -nu^2 c; one coordinate."""
    cdef long long n_full, k, n_sub
    cdef double rem, c, cd, cdh, accum, dtk, c_prev
    mts_substeps(H, dt, &n_full, &rem)
    n_sub = n_full + (1 if rem > 0.0 else 0)
    c = 1.0
    cd = 0.0
    accum = 0.0
    for k in range(n_sub):
        dtk = dt if k < n_full else rem
        c_prev = c
        cdh = cd + 0.5 * dtk * (-(nu * nu) * c)
        c = c + dtk * cdh
        cd = cdh + 0.5 * dtk * (-(nu * nu) * c)
        accum += 0.5 * dtk * (c_prev + c)
    return accum / H


def fpu_mts_run(double[::1] st0, double eps, double H, double inner_dt,
                int mollify, long long n_steps, long long[::1] samples):
    """Impulse (mollify = 0) or mollified impulse (1) run on the spring
    chain.  Returns (rows (m, 12), slow gradient calls, failing step)."""
    cdef long long m = samples.shape[0]
    out_arr = np.empty((m, 12))
    cdef double[:, ::1] out = out_arr
    cdef double q1[3]
    cdef double q2[3]
    cdef double p1[3]
    cdef double p2[3]
    cdef double F1[3]
    cdef double F2[3]
    cdef double a2[3]
    cdef double g1v[3]
    cdef double g2v[3]
    cdef double acc[3]
    cdef double p2h[3]
    cdef long long calls = 0, fail = -1
    cdef long long n, idx = 0, n_full, k, n_sub
    cdef double w0, nu, cbar, rem, dtk
    cdef int i
    cdef bint bad
    for i in range(3):
        q1[i] = st0[i]
        q2[i] = st0[3 + i]
        p1[i] = st0[6 + i]
        p2[i] = st0[9 + i]

    # opening kick force
    if mollify:
        w0 = fpu_omega(q1)
        nu = w0 / eps
        cbar = scalar_cbar(nu, H, inner_dt)
        for i in range(3):
            a2[i] = cbar * q2[i]
        calls += 2
        fpu_g1(q1, a2, g1v)
        fpu_g2(q1, a2, g2v)
        for i in range(3):
            F1[i] = -g1v[i]
            F2[i] = -cbar * g2v[i]
    else:
        calls += 2
        fpu_g1(q1, q2, g1v)
        fpu_g2(q1, q2, g2v)
        for i in range(3):
            F1[i] = -g1v[i]
            F2[i] = -g2v[i]

    for n in range(n_steps + 1):
        if idx < m and n == samples[idx]:
            bad = False
            for i in range(3):
                out[idx, i] = q1[i]
                out[idx, 3 + i] = q2[i]
                out[idx, 6 + i] = p1[i]
                out[idx, 9 + i] = p2[i]
                if not (isfinite(q1[i]) and isfinite(q2[i])
                        and isfinite(p1[i]) and isfinite(p2[i])):
                    bad = True
            if bad:
                fail = n
                break
            idx += 1
        if n < n_steps:
            for i in range(3):
                p1[i] = p1[i] + 0.5 * H * F1[i]
                p2[i] = p2[i] + 0.5 * H * F2[i]
            # oscillate with the frequency frozen at the step start
            nu = fpu_omega(q1) / eps
            mts_substeps(H, inner_dt, &n_full, &rem)
            n_sub = n_full + (1 if rem > 0.0 else 0)
            for i in range(3):
                acc[i] = -(nu * nu) * q2[i]
            for k in range(n_sub):
                dtk = inner_dt if k < n_full else rem
                for i in range(3):
                    p2h[i] = p2[i] + 0.5 * dtk * acc[i]
                    q2[i] = q2[i] + dtk * p2h[i]
                    q1[i] = q1[i] + dtk * p1[i]
                for i in range(3):
                    acc[i] = -(nu * nu) * q2[i]
                    p2[i] = p2h[i] + 0.5 * dtk * acc[i]
            # closing kick, shared with the next step
            if mollify:
                w0 = fpu_omega(q1)
                nu = w0 / eps
                cbar = scalar_cbar(nu, H, inner_dt)
                for i in range(3):
                    a2[i] = cbar * q2[i]
                calls += 2
                fpu_g1(q1, a2, g1v)
                fpu_g2(q1, a2, g2v)
                for i in range(3):
                    F1[i] = -g1v[i]
                    F2[i] = -cbar * g2v[i]
            else:
                calls += 2
                fpu_g1(q1, q2, g1v)
                fpu_g2(q1, q2, g2v)
                for i in range(3):
                    F1[i] = -g1v[i]
                    F2[i] = -g2v[i]
            for i in range(3):
                p1[i] = p1[i] + 0.5 * H * F1[i]
                p2[i] = p2[i] + 0.5 * H * F2[i]
    return out_arr, calls, fail


def quartic_mts_run(int n_fast, double[::1] st0, double eps, double H,
                    double inner_dt, int mollify, long long n_steps,
                    long long[::1] samples):
    """Impulse or mollified impulse run on a quartic benchmark.
    Returns (rows (m, 2 + 2 f), slow gradient calls, failing step)."""
    cdef QWork S
    if quartic_init(&S, n_fast) != 0:
        raise ValueError("n_fast must be 3 or 4")
    cdef int f = S.f
    cdef long long m = samples.shape[0]
    out_arr = np.empty((m, 2 + 2 * f))
    cdef double[:, ::1] out = out_arr
    cdef double q1, p1
    cdef double q2[4]
    cdef double p2[4]
    cdef double F1, Ssum, g
    cdef double F2[4]
    cdef double a2[4]
    cdef double cbar[4]
    cdef double acc[4]
    cdef double p2h[4]
    cdef long long calls = 0, fail = -1
    cdef long long n, idx = 0, n_full, k, n_sub
    cdef double rem, dtk
    cdef int i
    cdef bint bad
    q1 = st0[0]
    p1 = st0[1 + f]
    for i in range(f):
        q2[i] = st0[1 + i]
        p2[i] = st0[2 + f + i]

    if mollify:
        for i in range(f):
            cbar[i] = scalar_cbar(S.omc[i] / eps, H, inner_dt)
            a2[i] = cbar[i] * q2[i]
    else:
        for i in range(f):
            a2[i] = q2[i]
    calls += 2
    Ssum = 1.0
    for i in range(f):
        Ssum += S.w[i] * a2[i]
    F1 = -(0.25 * q1 * (a2[0] * a2[0]) + q1)
    for i in range(f):
        g = 4.0 * Ssum ** 3 * S.w[i]
        if i == 0:
            g += 0.25 * (q1 * q1) * a2[0]
        if mollify:
            F2[i] = -cbar[i] * g
        else:
            F2[i] = -g

    for n in range(n_steps + 1):
        if idx < m and n == samples[idx]:
            out[idx, 0] = q1
            out[idx, 1 + f] = p1
            bad = not (isfinite(q1) and isfinite(p1))
            for i in range(f):
                out[idx, 1 + i] = q2[i]
                out[idx, 2 + f + i] = p2[i]
                if not (isfinite(q2[i]) and isfinite(p2[i])):
                    bad = True
            if bad:
                fail = n
                break
            idx += 1
        if n < n_steps:
            p1 = p1 + 0.5 * H * F1
            for i in range(f):
                p2[i] = p2[i] + 0.5 * H * F2[i]
            mts_substeps(H, inner_dt, &n_full, &rem)
            n_sub = n_full + (1 if rem > 0.0 else 0)
            for i in range(f):
                acc[i] = -(S.omc[i] / eps) * (S.omc[i] / eps) * q2[i]
            for k in range(n_sub):
                dtk = inner_dt if k < n_full else rem
                for i in range(f):
                    p2h[i] = p2[i] + 0.5 * dtk * acc[i]
                    q2[i] = q2[i] + dtk * p2h[i]
                q1 = q1 + dtk * p1
                for i in range(f):
                    acc[i] = -(S.omc[i] / eps) * (S.omc[i] / eps) * q2[i]
                    p2[i] = p2h[i] + 0.5 * dtk * acc[i]
            if mollify:
                for i in range(f):
                    a2[i] = cbar[i] * q2[i]
            else:
                for i in range(f):
                    a2[i] = q2[i]
            calls += 2
            Ssum = 1.0
            for i in range(f):
                Ssum += S.w[i] * a2[i]
            F1 = -(0.25 * q1 * (a2[0] * a2[0]) + q1)
            for i in range(f):
                g = 4.0 * Ssum ** 3 * S.w[i]
                if i == 0:
                    g += 0.25 * (q1 * q1) * a2[0]
                if mollify:
                    F2[i] = -cbar[i] * g
                else:
                    F2[i] = -g
            p1 = p1 + 0.5 * H * F1
            for i in range(f):
                p2[i] = p2[i] + 0.5 * H * F2[i]
    return out_arr, calls, fail
