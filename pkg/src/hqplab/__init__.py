"""hqplab: hierarchical-QP control laboratory.

Dense certified QP solver, strict-priority cascade, mobile-manipulator
kinematics, augmented stack-of-tasks builders, Cartesian ergonomics maps,
a primal linear SVM, and a deterministic closed-loop scenario simulator.
"""

from ._kernel import KERNEL_IMPL

__version__ = "0.1.0"

__all__ = ["KERNEL_IMPL", "__version__"]
