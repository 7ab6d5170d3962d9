"""Benchmark comparing the compiled and pure-Python ADMM kernels.

Times the same batch of random QPs and a short closed-loop run through both
kernel implementations (the compiled one only if it is importable).
"""

import time

import numpy as np

from ._kernel import KERNEL_IMPL, run_admm_py
from .qp import SolverSettings, solve_qp
from .testutil import random_feasible_qp


def _time_batch(problems, kernel_name):
    import hqplab._kernel as kern
    from . import qp as qp_mod

    saved = kern.run_admm
    if kernel_name == "python":
        kern.run_admm = run_admm_py
    try:
        # qp.py binds run_admm at import; patch the module-level reference
        saved_qp = qp_mod.run_admm
        qp_mod.run_admm = kern.run_admm
        t0 = time.perf_counter()
        for problem in problems:
            solve_qp(problem, SolverSettings())
        elapsed = time.perf_counter() - t0
        qp_mod.run_admm = saved_qp
    finally:
        kern.run_admm = saved
    return elapsed


def run_benchmark(n_problems=50, seed=0):
    rng = np.random.default_rng(seed)
    problems = [random_feasible_qp(rng, s_max=22, ni_max=44, ne_max=6)
                for _ in range(n_problems)]
    rows = [f"active kernel: {KERNEL_IMPL}"]
    t_py = _time_batch(problems, "python")
    rows.append(f"pure-python kernel: {n_problems} solves in {t_py:.3f}s "
                f"({1e3 * t_py / n_problems:.2f} ms/solve)")
    if KERNEL_IMPL == "cython":
        t_cy = _time_batch(problems, "cython")
        rows.append(f"compiled kernel:    {n_problems} solves in {t_cy:.3f}s "
                    f"({1e3 * t_cy / n_problems:.2f} ms/solve)")
        rows.append(f"speedup: {t_py / t_cy:.2f}x")
    else:
        rows.append("compiled kernel unavailable (pure-python build)")
    return rows
