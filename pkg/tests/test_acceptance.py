"""Release acceptance gate.

Twelve numbered criteria, one test each, with pinned tolerances. Every test
prints a single PASS line on success (visible with ``pytest -s``); the pytest
verdict itself is the authoritative pass/fail signal.
"""

import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from hqplab import ergomap, svm
from hqplab.cli import _load_config, bundled_path
from hqplab.hierarchy import (Hierarchy, LeastSquares, TaskLevel,
                              solve_hierarchy)
from hqplab.kinematics import (JointState, KinematicChain, Pose,
                               fk_and_jacobian, integrate_state, pose_error)
from hqplab.qp import QpProblem, SolverSettings, SolveStatus, solve_qp
from hqplab.simulator import (DEFAULT_Q0, ScenarioEvent, compare_modes,
                              parse_scenario, reorientation_decision,
                              run_scenario)
from hqplab.tasks import (AugmentedLayout, CartesianLimits, GainSet, HrswBox,
                          assemble_stack, build_min_xdot_level,
                          split_solution)
from hqplab.testutil import jacobian_fd, random_feasible_qp


def _report(num, name):
    print(f"[criterion {num:02d}] {name}: PASS")


def _bundled_config(**overrides):
    config = _load_config(bundled_path("default.yaml"))
    return replace(config, **overrides) if overrides else config


@pytest.fixture(scope="module")
def exp3_log():
    events = parse_scenario(bundled_path("exp3_reorientation.scn"))
    return run_scenario(_bundled_config(), events)


@pytest.fixture(scope="module")
def exp4_10s():
    """10 s walk scenario at dt = 1 ms; returns (log, wall seconds)."""
    events = parse_scenario(bundled_path("exp4_walk.scn"))
    config = _bundled_config(duration=10.0)
    t0 = time.perf_counter()
    log = run_scenario(config, events)
    return log, time.perf_counter() - t0


def test_criterion_01_qp_certification():
    rng = np.random.default_rng(42)
    t0 = time.perf_counter()
    for _ in range(100):
        problem = random_feasible_qp(rng, s_max=20, ni_max=30, ne_max=5)
        sol = solve_qp(problem)
        assert sol.status is SolveStatus.Solved
        assert max(sol.kkt.stationarity, sol.kkt.primal,
                   sol.kkt.complementarity) <= 1e-6
    # equality-only problems against the closed-form KKT solution
    for _ in range(25):
        problem = random_feasible_qp(rng, s_max=20, ni_max=0, ne_max=5)
        sol = solve_qp(problem)
        ne = problem.E.shape[0]
        K = np.block([[problem.H, problem.E.T],
                      [problem.E, np.zeros((ne, ne))]])
        x_ref = np.linalg.solve(
            K, np.concatenate([-problem.g, problem.f]))[:problem.dim]
        assert np.max(np.abs(sol.x_star - x_ref)) <= 1e-8
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    _report(1, "qp certification")


def test_criterion_02_hierarchy_strictness(exp3_log, exp4_10s):
    rng = np.random.default_rng(7)
    for _ in range(50):
        s = int(rng.integers(5, 9))
        x0 = rng.normal(size=s)
        levels = []
        for k in range(3):
            m = int(rng.integers(1, 4))
            ineq = None
            if k == 0:
                C = rng.normal(size=(int(rng.integers(1, 5)), s))
                ineq = (C, C @ x0 + rng.uniform(0.1, 1.0, size=C.shape[0]))
            levels.append(TaskLevel(LeastSquares(rng.normal(size=(m, s)),
                                                 rng.normal(size=m)),
                                    ineq=ineq))
        h = Hierarchy(decision_dim=s, levels=levels)
        assert solve_hierarchy(h).strictness(h) <= 1e-6
    for log in (exp3_log, exp4_10s[0]):
        assert np.max(log.col("strictness")) <= 1e-6
    _report(2, "hierarchy strictness")


def test_criterion_03_jacobian_finite_difference():
    chain = KinematicChain.mobile_manipulator_default()
    rng = np.random.default_rng(5)
    lo, hi = chain.position_limits()
    for _ in range(50):
        q = rng.uniform(np.maximum(lo, -2.0), np.minimum(hi, 2.0))
        _, J = fk_and_jacobian(chain, q)
        rel = np.max(np.abs(J - jacobian_fd(chain, q))) / max(
            1.0, np.max(np.abs(J)))
        assert rel <= 1e-5
    _report(3, "jacobian finite difference")


def test_criterion_04_clik_convergence():
    chain = KinematicChain.mobile_manipulator_default()
    state = JointState(q=DEFAULT_Q0.copy(), q_dot=np.zeros(chain.n))
    layout = AugmentedLayout(n=chain.n, m=6)
    x_a, J = fk_and_jacobian(chain, state.q)
    target = Pose(x_a.position + np.array([0.15, 0.10, -0.12]),
                  x_a.orientation)
    # box wide open so only the tracking dynamics are under test
    box = HrswBox(pos_min=target.position - 5.0,
                  pos_max=target.position + 5.0,
                  orient_center=target.orientation,
                  orient_halfwidth=np.full(3, 3.0))
    gains, cart, dt = GainSet(), CartesianLimits(), 1e-3
    terminal = build_min_xdot_level(layout)
    qdot_prev = np.zeros(chain.n)
    warm = None
    errs = []
    for _ in range(2000):  # 2 simulated seconds
        stack = assemble_stack(J, target, x_a, gains, box, chain, state,
                               layout, dt, terminal, cart, qdot_prev)
        result = solve_hierarchy(stack, SolverSettings(), warm_starts=warm)
        warm = result.warm_starts
        base, arm, _, _ = split_solution(result.chi_star, layout)
        qdot_prev = np.concatenate([base, arm])
        state, _ = integrate_state(chain, state, qdot_prev, dt)
        x_a, J = fk_and_jacobian(chain, state.q)
        errs.append(np.max(np.abs(pose_error(target, x_a))))
    errs = np.array(errs)
    assert errs[-1] <= 1e-3
    assert np.min(errs) <= 1e-3
    transient = 200  # 0.2 s of acceleration-limited ramp-up
    assert np.all(np.diff(errs[transient:]) <= 1e-9)
    _report(4, "clik convergence")


def test_criterion_05_workspace_softening():
    config = _bundled_config(duration=2.0, walk_step_length=0.3)
    events = [ScenarioEvent(0.1, "become_collaborative"),
              ScenarioEvent(0.5, "walk_step",
                            {"direction": np.array([1.0, 0.0])})]
    log = run_scenario(config, events)  # raises if any step is infeasible
    t = log.col("t")
    slack = np.abs(log.cols("slack")).max(axis=1)
    jump = np.searchsorted(t, 0.5)
    assert slack[jump] > 1e-3  # the jump actually perturbs the workspace
    settle = np.flatnonzero(slack[jump:] <= 1e-4)
    assert settle.size and settle[0] * config.dt <= 1.0
    viol = np.maximum(log.cols("viol"), 0.0)
    assert np.max(np.abs(viol - np.abs(log.cols("slack")))) <= 1e-6
    _report(5, "workspace softening")


def test_criterion_06_ergonomics_benefit():
    events = parse_scenario(bundled_path("exp4_walk.scn"))
    config = _bundled_config(dt=0.002)
    report = compare_modes(config, events)
    s = report.summary()
    bench_excess = s["final_e_s_benchmark"] - s["map_min_score"]
    ergo_excess = s["final_e_s_ergonomics"] - s["map_min_score"]
    assert bench_excess > 1e-3  # benchmark steady state is off the minimum
    assert ergo_excess < bench_excess * 0.5
    _report(6, "ergonomics benefit")


def test_criterion_07_walk_following(exp4_10s):
    log, _ = exp4_10s
    ee = np.column_stack([log.col(f"xa_p{c}") for c in "xyz"])
    box_min = np.column_stack([log.col(f"box_min_{c}") for c in "xyz"])
    box_max = np.column_stack([log.col(f"box_max_{c}") for c in "xyz"])
    # the box walked 1 m in +x
    np.testing.assert_allclose(box_min[-1, 0] - box_min[0, 0], 1.0,
                               atol=1e-12)
    assert np.all(ee[-1] >= box_min[-1]) and np.all(ee[-1] <= box_max[-1])
    slack = np.abs(log.cols("slack"))[:, :3]
    excess = np.maximum(ee - box_max, 0.0) + np.maximum(box_min - ee, 0.0)
    assert np.max(excess - slack) <= 1e-3
    _report(7, "walk following")


def test_criterion_08_reorientation(exp3_log):
    truth = {("Smooth", "Drill"): True, ("Smooth", "Polisher"): False,
             ("Drilled", "Drill"): False, ("Drilled", "Polisher"): True}
    for (surface, tool), expect in truth.items():
        assert reorientation_decision(surface, tool) is expect
    last = exp3_log.data[-1]
    cols = exp3_log.columns
    q_ee = last[[cols.index(f"xa_{c}") for c in ("qx", "qy", "qz", "qw")]]
    q_box = last[[cols.index(f"box_q{c}") for c in ("x", "y", "z", "w")]]
    halfwidth = last[[cols.index(f"box_ohw_{c}") for c in "xyz"]]
    rel = (Rotation.from_quat(q_box).inv()
           * Rotation.from_quat(q_ee)).as_rotvec()
    # the bundled scenario commands a mismatch flip; the box center moved
    assert abs(Rotation.from_quat(q_box).magnitude() - np.pi) <= 1e-9
    assert np.all(np.abs(rel) <= halfwidth + 1e-2)
    _report(8, "reorientation")


def test_criterion_09_surface_classifier():
    data = svm.synthetic_surface_features(n=200, seed=7)
    l2 = svm.train(data, C=10.0, variant=svm.L2)
    assert svm.training_accuracy(l2, data) == 1.0
    assert l2.info["grad_inf_norm"] <= 1e-6
    tiny = svm.LabeledSet(X=np.array([[-2.0], [-0.5], [0.4], [2.0]]),
                          y=np.array([-1.0, 1.0, -1.0, 1.0]))
    l1 = svm.train(tiny, C=1.0, variant=svm.L1)
    best = np.inf
    for w in np.linspace(-4.0, 4.0, 161):
        for b in np.linspace(-4.0, 4.0, 161):
            cand = svm.LinearModel(w=np.array([w]), b=b,
                                   trained_with=svm.L1, C=1.0)
            best = min(best, svm.objective(cand, tiny, 1.0, svm.L1))
    assert svm.objective(l1, tiny, 1.0, svm.L1) <= best + 1e-3
    qp_model = svm.train(tiny, C=1.0, variant=svm.CONSTRAINED_QP)
    margins = 1.0 - tiny.y * (tiny.X @ qp_model.w + qp_model.b)
    assert np.max(np.abs(qp_model.info["xi"]
                         - np.maximum(margins, 0.0))) <= 1e-6
    _report(9, "surface classifier")


def test_criterion_10_map_fitting():
    rng = np.random.default_rng(17)
    H = np.array([[4.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 5.0]])
    g = np.array([-1.0, 0.4, 2.0])
    c = 7.0
    pts = rng.uniform(-1.0, 1.0, size=(80, 3))
    scores = np.array([0.5 * p @ H @ p + g @ p + c for p in pts])
    fitted = ergomap.fit_map_from_grid(ergomap.ScoreGrid(pts, scores))
    assert np.max(np.abs(fitted.H_e - H)) <= 1e-8
    assert np.max(np.abs(fitted.g_e - g)) <= 1e-8
    assert abs(fitted.c_e - c) <= 1e-8
    human = ergomap.HumanPoseState(position=np.array([1.1, -0.3, 0.0]),
                                   heading=2.2)
    world = ergomap.map_to_world(fitted, human)
    R = human.yaw_matrix()
    for _ in range(100):
        x = rng.uniform(-1.0, 1.0, size=3)
        assert abs(ergomap.evaluate_score(fitted, x)
                   - ergomap.evaluate_score(world, R @ x + human.position)
                   ) <= 1e-9
    _report(10, "map fitting")


def test_criterion_11_throughput(exp4_10s):
    log, wall = exp4_10s
    assert log.data.shape[0] == 10000
    assert wall < 60.0
    _report(11, f"throughput ({wall:.1f}s for 10000 steps)")


def test_criterion_12_determinism(tmp_path):
    events = parse_scenario(bundled_path("exp3_reorientation.scn"))
    config = _bundled_config(duration=2.0)
    paths = []
    for run in ("a", "b"):
        log = run_scenario(config, events)
        path = tmp_path / f"log_{run}.csv"
        log.to_csv(path)
        log.write_summary(tmp_path / f"summary_{run}.txt")
        paths.append(path)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert ((tmp_path / "summary_a.txt").read_bytes()
            == (tmp_path / "summary_b.txt").read_bytes())
    _report(12, "determinism")
