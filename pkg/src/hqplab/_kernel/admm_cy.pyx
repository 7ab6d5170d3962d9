# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled ADMM iteration kernel.

Hot loop of the dense QP solver: one KKT back-substitution (via the cached
dense inverse) plus vector updates per iteration, with a residual check every
``check_every`` iterations. Contract mirrors ``admm_py.run_admm``.
"""

import numpy as np

cdef double DIVERGENCE_NORM = 1e6


def run_admm(double[:, ::1] Kinv, double[:, ::1] H, double[::1] q,
             double[:, ::1] A, double[::1] l, double[::1] u,
             double[::1] rho, double[::1] x, double[::1] z, double[::1] y,
             double sigma, double alpha, int n_iter, int check_every,
             double eps_abs, double eps_rel):
    cdef int n = x.shape[0]
    cdef int mc = z.shape[0]
    cdef int nk = n + mc
    cdef int k, i, j, done = 0, status = 1
    cdef double acc, zt, zin, zn
    cdef double r_prim = 0.0, r_dual = 0.0
    cdef double ax_norm, z_norm, hx_norm, aty_norm, q_norm, x_norm
    cdef double eps_prim, eps_dual, hxq, aty, ax

    rhs_arr = np.empty(nk)
    sol_arr = np.empty(nk)
    cdef double[::1] rhs = rhs_arr
    cdef double[::1] sol = sol_arr

    q_norm = 0.0
    for i in range(n):
        if q[i] > q_norm:
            q_norm = q[i]
        elif -q[i] > q_norm:
            q_norm = -q[i]

    r_prim = 1e30
    r_dual = 1e30
    for k in range(n_iter):
        for i in range(n):
            rhs[i] = sigma * x[i] - q[i]
        for i in range(mc):
            rhs[n + i] = z[i] - y[i] / rho[i]
        for i in range(nk):
            acc = 0.0
            for j in range(nk):
                acc += Kinv[i, j] * rhs[j]
            sol[i] = acc
        for i in range(n):
            x[i] = alpha * sol[i] + (1.0 - alpha) * x[i]
        for i in range(mc):
            zt = z[i] + (sol[n + i] - y[i]) / rho[i]
            zin = alpha * zt + (1.0 - alpha) * z[i] + y[i] / rho[i]
            zn = zin
            if zn < l[i]:
                zn = l[i]
            if zn > u[i]:
                zn = u[i]
            y[i] = rho[i] * (zin - zn)
            z[i] = zn
        done = k + 1
        if done % check_every == 0 or done == n_iter:
            r_prim = 0.0
            ax_norm = 0.0
            z_norm = 0.0
            x_norm = 0.0
            for i in range(mc):
                ax = 0.0
                for j in range(n):
                    ax += A[i, j] * x[j]
                acc = ax - z[i]
                if acc < 0.0:
                    acc = -acc
                if acc > r_prim:
                    r_prim = acc
                if ax < 0.0:
                    ax = -ax
                if ax > ax_norm:
                    ax_norm = ax
                acc = z[i]
                if acc < 0.0:
                    acc = -acc
                if acc > z_norm:
                    z_norm = acc
            r_dual = 0.0
            hx_norm = 0.0
            aty_norm = 0.0
            for i in range(n):
                hxq = 0.0
                for j in range(n):
                    hxq += H[i, j] * x[j]
                if hxq > hx_norm:
                    hx_norm = hxq
                elif -hxq > hx_norm:
                    hx_norm = -hxq
                aty = 0.0
                for j in range(mc):
                    aty += A[j, i] * y[j]
                if aty > aty_norm:
                    aty_norm = aty
                elif -aty > aty_norm:
                    aty_norm = -aty
                acc = hxq + q[i] + aty
                if acc < 0.0:
                    acc = -acc
                if acc > r_dual:
                    r_dual = acc
                acc = x[i]
                if acc < 0.0:
                    acc = -acc
                if acc > x_norm:
                    x_norm = acc
            if x_norm > DIVERGENCE_NORM:
                status = 2
                break
            eps_prim = eps_abs + eps_rel * (ax_norm if ax_norm > z_norm else z_norm)
            acc = hx_norm
            if aty_norm > acc:
                acc = aty_norm
            if q_norm > acc:
                acc = q_norm
            eps_dual = eps_abs + eps_rel * acc
            if r_prim <= eps_prim and r_dual <= eps_dual:
                status = 0
                break
    return status, done, r_prim, r_dual
