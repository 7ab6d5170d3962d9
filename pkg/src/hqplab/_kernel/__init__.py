"""ADMM kernel selection: compiled extension when present, NumPy otherwise.

Set ``HQPLAB_PURE_PYTHON=1`` to force the fallback (used by the kernel
benchmark and by CI environments without a C compiler).
"""

import os

from .admm_py import run_admm as run_admm_py

if os.environ.get("HQPLAB_PURE_PYTHON") == "1":
    run_admm = run_admm_py
    KERNEL_IMPL = "python"
else:
    try:
        from .admm_cy import run_admm as run_admm_cy

        run_admm = run_admm_cy
        KERNEL_IMPL = "cython"
    except ImportError:
        run_admm = run_admm_py
        KERNEL_IMPL = "python"

__all__ = ["run_admm", "run_admm_py", "KERNEL_IMPL"]
