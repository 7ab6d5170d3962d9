"""Self-check suites behind ``hqplab check``.

Each suite is a quick, deterministic verification of a core numerical
contract: Jacobian vs finite differences, QP KKT certification, cascade
strictness, and map frame-transform score preservation.
"""

import numpy as np

from . import ergomap
from .hierarchy import Hierarchy, LeastSquares, TaskLevel, solve_hierarchy
from .kinematics import KinematicChain, forward_kinematics, geometric_jacobian
from .qp import QpProblem, SolverSettings, SolveStatus, solve_qp
from .testutil import jacobian_fd, random_feasible_qp


def check_jacobian(n_configs=20, seed=3):
    chain = KinematicChain.mobile_manipulator_default()
    rng = np.random.default_rng(seed)
    lo, hi = chain.position_limits()
    worst = 0.0
    for _ in range(n_configs):
        q = rng.uniform(np.maximum(lo, -2.0), np.minimum(hi, 2.0))
        J = geometric_jacobian(chain, q)
        J_fd = jacobian_fd(chain, q)
        scale = max(1.0, np.max(np.abs(J)))
        worst = max(worst, np.max(np.abs(J - J_fd)) / scale)
    return worst <= 1e-5


def check_kkt(n_problems=25, seed=11):
    rng = np.random.default_rng(seed)
    for _ in range(n_problems):
        problem = random_feasible_qp(rng, s_max=15, ni_max=20, ne_max=4)
        sol = solve_qp(problem, SolverSettings())
        if sol.status is not SolveStatus.Solved:
            return False
        if max(sol.kkt.stationarity, sol.kkt.primal,
               sol.kkt.complementarity) > 1e-6:
            return False
    return True


def check_strictness(n_stacks=20, seed=5):
    rng = np.random.default_rng(seed)
    for _ in range(n_stacks):
        s = 6
        levels = [TaskLevel(LeastSquares(rng.normal(size=(2, s)),
                                         rng.normal(size=2)),
                            label=f"lvl{j}") for j in range(3)]
        h = Hierarchy(decision_dim=s, levels=levels)
        result = solve_hierarchy(h)
        if result.strictness(h) > 1e-6:
            return False
    return True


def check_frame_transform(seed=9):
    rng = np.random.default_rng(seed)
    subject = ergomap.SubjectProfile(height=1.7)
    fitted = ergomap.fit_map_from_grid(
        ergomap.generate_synthetic_reba_grid(subject))
    human = ergomap.HumanPoseState(position=np.array([1.0, -0.4, 0.0]),
                                   heading=2.1)
    world = ergomap.map_to_world(fitted, human)
    R = human.yaw_matrix()
    for _ in range(50):
        x = rng.uniform(-1.0, 1.0, size=3)
        e_h = ergomap.evaluate_score(fitted, x)
        e_w = ergomap.evaluate_score(world, R @ x + human.position)
        if abs(e_h - e_w) > 1e-9:
            return False
    return True


def run_all():
    return [
        ("jacobian_finite_difference", check_jacobian()),
        ("qp_kkt_certification", check_kkt()),
        ("cascade_strictness", check_strictness()),
        ("map_frame_transform", check_frame_transform()),
    ]
