"""Compiled vs pure-Python ADMM kernel equivalence."""

import numpy as np
import pytest

from hqplab._kernel import KERNEL_IMPL, run_admm_py
from hqplab.qp import SolverSettings, solve_qp
from hqplab.testutil import random_feasible_qp


def _admm_inputs(problem, settings):
    """Set up the splitting data exactly as the solver does."""
    s = problem.dim
    ni = problem.C.shape[0]
    ne = problem.E.shape[0]
    Hreg = 0.5 * (problem.H + problem.H.T) + settings.reg_eps * np.eye(s)
    A = np.vstack([problem.C, problem.E])
    lo = np.concatenate([np.full(ni, -np.inf), problem.f])
    up = np.concatenate([problem.d, problem.f])
    scale = np.max(np.abs(A), axis=1)
    scale[scale == 0.0] = 1.0
    A_s = np.ascontiguousarray(A / scale[:, None])
    rho = np.concatenate([np.full(ni, settings.rho_ineq),
                          np.full(ne, settings.rho_eq)])
    K = np.zeros((s + ni + ne, s + ni + ne))
    K[:s, :s] = Hreg + settings.sigma * np.eye(s)
    K[:s, s:] = A_s.T
    K[s:, :s] = A_s
    K[s:, s:] = -np.diag(1.0 / rho)
    Kinv = np.ascontiguousarray(np.linalg.inv(K))
    return (Kinv, np.ascontiguousarray(Hreg), problem.g, A_s,
            lo / scale, up / scale, rho)


def _run(kernel, problem, settings, n_iter=300):
    Kinv, H, g, A_s, lo_s, up_s, rho = _admm_inputs(problem, settings)
    s = problem.dim
    x = np.zeros(s)
    z = np.clip(A_s @ x, lo_s, up_s)
    y = np.zeros(A_s.shape[0])
    out = kernel(Kinv, H, g, A_s, lo_s, up_s, rho, x, z, y,
                 settings.sigma, settings.alpha, n_iter, 50, 1e-12, 1e-12)
    return out, x, z, y


@pytest.mark.skipif(KERNEL_IMPL != "cython",
                    reason="compiled kernel not built")
def test_compiled_kernel_matches_pure_python(rng):
    from hqplab._kernel import run_admm_cy
    settings = SolverSettings()
    for _ in range(10):
        problem = random_feasible_qp(rng, s_max=12, ni_max=15, ne_max=3)
        out_py, x_py, z_py, y_py = _run(run_admm_py, problem, settings)
        out_cy, x_cy, z_cy, y_cy = _run(run_admm_cy, problem, settings)
        assert out_py[:2] == out_cy[:2]
        np.testing.assert_allclose(x_cy, x_py, atol=1e-12)
        np.testing.assert_allclose(z_cy, z_py, atol=1e-12)
        np.testing.assert_allclose(y_cy, y_py, atol=1e-12)


def test_pure_python_fallback_solves(rng, monkeypatch):
    """The solver works with the fallback kernel patched in."""
    import hqplab.qp as qp_mod
    monkeypatch.setattr(qp_mod, "run_admm", run_admm_py)
    problem = random_feasible_qp(rng, s_max=10, ni_max=12, ne_max=2)
    sol = solve_qp(problem, SolverSettings())
    assert sol.kkt.within(1e-6, 1e-6, 1e-6)


def test_benchmark_runs():
    from hqplab.benchmark import run_benchmark
    rows = run_benchmark(n_problems=3, seed=1)
    assert any("pure-python kernel" in r for r in rows)
