"""Pure-NumPy ADMM iteration kernel.

Fallback used when the compiled extension is unavailable. Same contract as
``admm_cy.run_admm``: iterate the operator-splitting scheme in place on
(x, z, y) and return early once the internal residual check passes.

Status codes: 0 converged, 1 iteration budget exhausted, 2 iterates diverged.
"""

import numpy as np

DIVERGENCE_NORM = 1e6


def run_admm(Kinv, H, q, A, l, u, rho, x, z, y, sigma, alpha,
             n_iter, check_every, eps_abs, eps_rel):
    n = x.shape[0]
    mc = z.shape[0]
    rho_inv = 1.0 / rho
    status = 1
    r_prim = np.inf
    r_dual = np.inf
    done = 0
    rhs = np.empty(n + mc)
    for k in range(n_iter):
        rhs[:n] = sigma * x - q
        rhs[n:] = z - rho_inv * y
        sol = Kinv @ rhs
        x *= (1.0 - alpha)
        x += alpha * sol[:n]
        zt = z + rho_inv * (sol[n:] - y)
        zin = alpha * zt + (1.0 - alpha) * z + rho_inv * y
        np.clip(zin, l, u, out=z)
        y[:] = rho * (zin - z)
        done = k + 1
        if done % check_every == 0 or done == n_iter:
            Ax = A @ x
            Hx = H @ x
            ATy = A.T @ y
            r_prim = np.max(np.abs(Ax - z)) if mc else 0.0
            r_dual = np.max(np.abs(Hx + q + ATy))
            if np.max(np.abs(x)) > DIVERGENCE_NORM:
                status = 2
                break
            eps_prim = eps_abs + eps_rel * max(
                np.max(np.abs(Ax)) if mc else 0.0,
                np.max(np.abs(z)) if mc else 0.0)
            eps_dual = eps_abs + eps_rel * max(
                np.max(np.abs(Hx)),
                np.max(np.abs(ATy)),
                np.max(np.abs(q)))
            if r_prim <= eps_prim and r_dual <= eps_dual:
                status = 0
                break
    return status, done, r_prim, r_dual
