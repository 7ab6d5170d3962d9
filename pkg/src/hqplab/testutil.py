"""Shared helpers for checks, tests, and the kernel benchmark.

Includes the independent oracles used to validate the solver: brute-force
active-set enumeration and central finite differences.
"""

import itertools

import numpy as np

from .kinematics import forward_kinematics, pose_error
from .qp import QpProblem


def random_feasible_qp(rng, s_max=20, ni_max=30, ne_max=5, strictly_convex=True):
    """Random strictly convex QP, feasible by construction."""
    s = int(rng.integers(2, s_max + 1))
    ni = int(rng.integers(0, ni_max + 1))
    ne = int(rng.integers(0, min(ne_max, s - 1) + 1))
    M = rng.normal(size=(s + 2, s))
    H = M.T @ M
    if strictly_convex:
        H += 0.5 * np.eye(s)
    g = rng.normal(size=s)
    x0 = rng.normal(size=s)
    C = rng.normal(size=(ni, s)) if ni else None
    d = (C @ x0 + np.abs(rng.normal(size=ni)) + 0.1) if ni else None
    E = rng.normal(size=(ne, s)) if ne else None
    f = (E @ x0) if ne else None
    return QpProblem(H=H, g=g, C=C, d=d, E=E, f=f)


def enumerate_active_set_solution(problem, feas_tol=1e-8, mult_tol=1e-8):
    """Brute-force oracle: try every active subset of the inequality rows,
    solve the equality KKT system, keep the best primal-dual feasible point.

    Only practical for a handful of inequality rows.
    """
    s = problem.dim
    ni = problem.C.shape[0]
    E, f = problem.E, problem.f
    best_x, best_obj = None, np.inf
    for r in range(ni + 1):
        for subset in itertools.combinations(range(ni), r):
            idx = list(subset)
            G = np.vstack([problem.C[idx], E])
            h = np.concatenate([problem.d[idx], f])
            na = G.shape[0]
            K = np.zeros((s + na, s + na))
            K[:s, :s] = problem.H
            K[:s, s:] = G.T
            K[s:, :s] = G
            rhs = np.concatenate([-problem.g, h])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            x = sol[:s]
            lam_act = sol[s:s + len(idx)]
            if len(idx) and np.min(lam_act) < -mult_tol:
                continue
            if ni and np.max(problem.C @ x - problem.d) > feas_tol:
                continue
            if E.shape[0] and np.max(np.abs(E @ x - f)) > feas_tol:
                continue
            obj = problem.objective(x)
            if obj < best_obj:
                best_obj, best_x = obj, x
    return best_x, best_obj


def jacobian_fd(chain, q, step=1e-6):
    """Central finite-difference geometric Jacobian (orientation via the
    rotation-vector rate of the pose difference)."""
    n = len(q)
    J = np.zeros((6, n))
    for i in range(n):
        qp = np.array(q, dtype=float)
        qm = np.array(q, dtype=float)
        qp[i] += step
        qm[i] -= step
        xp = forward_kinematics(chain, qp)
        xm = forward_kinematics(chain, qm)
        J[:, i] = pose_error(xp, xm) / (2.0 * step)
    return J


def nullspace_cascade_oracle(A_list, b_list):
    """Sequential analytic least-squares solution via explicit orthogonal
    nullspace bases. Unconstrained stacks only."""
    s = A_list[0].shape[1]
    x = np.zeros(s)
    Z = np.eye(s)
    for A, b in zip(A_list, b_list):
        AZ = A @ Z
        r = b - A @ x
        y, *_ = np.linalg.lstsq(AZ, r, rcond=None)
        x = x + Z @ y
        # shrink the nullspace basis by the newly fixed directions
        U, sv, Vt = np.linalg.svd(AZ)
        rank = int(np.sum(sv > 1e-12 * (sv[0] if sv.size else 1.0)))
        Z = Z @ Vt[rank:].T
        if Z.shape[1] == 0:
            break
    return x
