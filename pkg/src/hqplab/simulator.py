"""Closed-loop kinematic simulation of the augmented-HQP controller.

Consumes a timestamped intent-event scenario (the stand-in for the vision
stack), updates the shared workspace and ergonomics map online, solves the
cascade every control period, integrates the robot, and logs everything.
Runs are strictly deterministic for a fixed (config, events) pair.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.transform import Rotation

from . import ergomap, svm
from .errors import (CascadeInfeasible, EventOutOfRange, LevelInfeasible,
                     ToolBeforeDelivery)
from .hierarchy import solve_hierarchy
from .kinematics import (JointState, KinematicChain, Pose, fk_and_jacobian,
                         forward_kinematics, integrate_pose, integrate_state)
from .qp import SolverSettings
from .tasks import (AugmentedLayout, CartesianLimits, GainSet, HrswBox,
                    assemble_stack, build_ergonomics_level,
                    build_min_xdot_level, impedance_torque, split_solution)

MODE_ERGONOMICS = "ergonomics"
MODE_BENCHMARK = "min_velocity_benchmark"

PLANT_IDEAL = "ideal_kinematic"
PLANT_IMPEDANCE = "impedance"

SURFACE_SMOOTH = "Smooth"
SURFACE_DRILLED = "Drilled"
TOOL_DRILL = "Drill"
TOOL_POLISHER = "Polisher"

EV_BECOME_COLLABORATIVE = "become_collaborative"
EV_DELIVER_OBJECT = "deliver_object"
EV_PICK_TOOL = "pick_tool"
EV_WALK_STEP = "walk_step"
EV_STOP_WALKING = "stop_walking"
EV_SET_HUMAN_POSE = "set_human_pose"

_KINDS = (EV_BECOME_COLLABORATIVE, EV_DELIVER_OBJECT, EV_PICK_TOOL,
          EV_WALK_STEP, EV_STOP_WALKING, EV_SET_HUMAN_POSE)


@dataclass
class ScenarioEvent:
    t: float
    kind: str
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.t < 0:
            raise EventOutOfRange(f"event at negative time {self.t}")
        if self.kind not in _KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.kind == EV_WALK_STEP:
            d = np.asarray(self.payload["direction"], dtype=float).ravel()
            if abs(np.linalg.norm(d) - 1.0) > 1e-9:
                raise ValueError("walk direction must be unit norm")
            self.payload["direction"] = d


@dataclass
class ObjectState:
    surface_facing_human: str | None = None
    classified_as: str | None = None
    grasped: bool = False


@dataclass
class SimConfig:
    dt: float = 1e-3
    duration: float = 5.0
    mode: str = MODE_ERGONOMICS
    plant: str = PLANT_IDEAL
    gains: GainSet = field(default_factory=GainSet)
    cart: CartesianLimits = field(default_factory=CartesianLimits)
    subject: ergomap.SubjectProfile = field(
        default_factory=lambda: ergomap.SubjectProfile(height=1.75))
    q0: np.ndarray | None = None
    hrsw_pos_halfwidth: np.ndarray = field(
        default_factory=lambda: np.array([0.35, 0.35, 0.35]))
    hrsw_orient_halfwidth: np.ndarray = field(
        default_factory=lambda: np.array([0.3, 0.3, 0.3]))
    hrsw_center: np.ndarray | None = None  # None: centered at initial EE pose
    walk_step_length: float = 0.2
    walk_follow_offset: np.ndarray = field(
        default_factory=lambda: np.array([-0.45, 0.0, 0.0]))
    human_position: np.ndarray = field(
        default_factory=lambda: np.array([1.1, 0.0, 0.0]))
    human_heading: float = np.pi
    svm_seed: int = 7
    chain_file: str | None = None

    def __post_init__(self):
        if self.dt <= 0 or self.duration <= 0:
            raise ValueError("dt and duration must be positive")
        for name in ("hrsw_pos_halfwidth", "hrsw_orient_halfwidth",
                     "walk_follow_offset", "human_position"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).ravel())
        if self.q0 is not None:
            self.q0 = np.asarray(self.q0, dtype=float).ravel()
        if self.hrsw_center is not None:
            self.hrsw_center = np.asarray(self.hrsw_center, dtype=float).ravel()


DEFAULT_Q0 = np.array([0.0, 0.0, 0.0, 0.0, 0.5, 0.0, -1.2, 0.0, 0.7, 0.0])


@dataclass
class SimLog:
    columns: list
    data: np.ndarray           # (steps, len(columns))
    events_fired: list         # (step index, kind)
    summary: dict

    def col(self, name):
        return self.data[:, self.columns.index(name)]

    def cols(self, prefix):
        idx = [i for i, c in enumerate(self.columns) if c.startswith(prefix)]
        return self.data[:, idx]

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.data:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    def write_summary(self, path):
        with open(path, "w") as fh:
            for key in sorted(self.summary):
                fh.write(f"{key} {self.summary[key]:.17g}\n")


def reorientation_decision(surface: str, tool: str) -> bool:
    """Rotate the grasped object iff the surface facing the human does not
    match the picked tool (drill works the drilled face, polisher the
    smooth one)."""
    return ((surface == SURFACE_SMOOTH and tool == TOOL_DRILL)
            or (surface == SURFACE_DRILLED and tool == TOOL_POLISHER))


class _SimState:
    """Mutable world state threaded through one run."""

    def __init__(self, config: SimConfig):
        self.config = config
        self.chain = (KinematicChain.from_file(config.chain_file)
                      if config.chain_file
                      else KinematicChain.mobile_manipulator_default())
        q0 = config.q0 if config.q0 is not None else DEFAULT_Q0
        self.state = JointState(q=q0.copy(), q_dot=np.zeros(self.chain.n))
        self.q_des = q0.copy()
        self.qdot_des = np.zeros(self.chain.n)
        self.layout = AugmentedLayout(n=self.chain.n, m=6, slack_active=True)
        self.x_a = forward_kinematics(self.chain, self.state.q)
        self.x_d = self.x_a.copy()
        center = (config.hrsw_center if config.hrsw_center is not None
                  else self.x_a.position)
        self.box = HrswBox(
            pos_min=center - config.hrsw_pos_halfwidth,
            pos_max=center + config.hrsw_pos_halfwidth,
            orient_center=self.x_a.orientation.copy(),
            orient_halfwidth=config.hrsw_orient_halfwidth.copy())
        self.human = ergomap.HumanPoseState(
            position=config.human_position.copy(),
            heading=config.human_heading)
        registry = ergomap.build_map_registry()
        self.map_human = ergomap.select_map(registry, config.subject)
        self.map_world = ergomap.map_to_world(self.map_human, self.human)
        self.obj = ObjectState()
        self.collaborative = False
        self.walking = False
        self.classifier = svm.train(
            svm.synthetic_surface_features(seed=config.svm_seed), C=10.0,
            variant=svm.L2)
        self.qdot_prev = np.zeros(self.chain.n)
        self.warm = None
        self._auto_feature_count = 0

    def ergonomics_active(self):
        return self.config.mode == MODE_ERGONOMICS and self.collaborative


def apply_event(state: _SimState, event: ScenarioEvent):
    """Apply one due intent event to the world state."""
    pay = event.payload
    if event.kind == EV_BECOME_COLLABORATIVE:
        state.collaborative = True
    elif event.kind == EV_DELIVER_OBJECT:
        features = pay.get("features", "auto")
        true_surface = pay["true_surface"]
        if isinstance(features, str) and features == "auto":
            features = _auto_feature(state, true_surface)
        label = svm.predict(state.classifier, features)
        state.obj.surface_facing_human = true_surface
        state.obj.classified_as = (SURFACE_SMOOTH if label == svm.LABEL_SMOOTH
                                   else SURFACE_DRILLED)
        state.obj.grasped = True
    elif event.kind == EV_PICK_TOOL:
        if not state.obj.grasped:
            raise ToolBeforeDelivery(f"pick_tool at t={event.t} before delivery")
        if reorientation_decision(state.obj.classified_as, pay["tool"]):
            approach = state.x_a.rotation_matrix()[:, 2]
            state.box.rotate_center(approach, np.pi)
            # the flip commands the reorientation; track the outcome
            state.obj.surface_facing_human = (
                SURFACE_SMOOTH
                if state.obj.surface_facing_human == SURFACE_DRILLED
                else SURFACE_DRILLED)
            state.obj.classified_as = state.obj.surface_facing_human
    elif event.kind == EV_WALK_STEP:
        state.walking = True
        d2 = pay["direction"]
        step = state.config.walk_step_length * np.array([d2[0], d2[1], 0.0])
        state.box.translate(step)
        state.human.position = state.human.position + step
        state.map_world = ergomap.map_to_world(state.map_human, state.human)
    elif event.kind == EV_STOP_WALKING:
        state.walking = False
    elif event.kind == EV_SET_HUMAN_POSE:
        state.human = ergomap.HumanPoseState(
            position=np.asarray(pay["position"], dtype=float),
            heading=float(pay.get("heading", state.human.heading)),
            timestamp=event.t)
        state.map_world = ergomap.map_to_world(state.map_human, state.human)
    return state


def _auto_feature(state: _SimState, true_surface: str):
    """Deterministic synthetic feature draw for a delivered object."""
    rng = np.random.default_rng(
        state.config.svm_seed * 1000 + 17 + state._auto_feature_count)
    state._auto_feature_count += 1
    n_f = state.classifier.w.shape[0]
    mean = np.zeros(n_f)
    mean[0] = 3.0 if true_surface == SURFACE_SMOOTH else -3.0
    return rng.normal(0.0, 1.0, size=n_f) + mean


_LOG_SCALARS = ["t", "e_s", "strictness", "res_l1", "res_l2", "obj_l3",
                "events_fired", "collaborative", "ergonomics_active"]


def _log_columns(layout):
    cols = ["t"]
    cols += [f"q{i}" for i in range(layout.n)]
    cols += [f"xa_{c}" for c in ("px", "py", "pz", "qx", "qy", "qz", "qw")]
    cols += [f"xd_{c}" for c in ("px", "py", "pz", "qx", "qy", "qz", "qw")]
    cols += [f"chi{i}" for i in range(layout.s)]
    cols += [f"slack{i}" for i in range(6)]
    cols += ["e_s"]
    cols += [f"box_min_{c}" for c in "xyz"] + [f"box_max_{c}" for c in "xyz"]
    cols += [f"box_q{c}" for c in ("x", "y", "z", "w")]
    cols += [f"box_ohw_{c}" for c in "xyz"]
    cols += [f"viol{i}" for i in range(6)]
    cols += ["res_l1", "res_l2", "obj_l3", "strictness",
             "events_fired", "collaborative", "ergonomics_active"]
    return cols


def run_scenario(config: SimConfig, events) -> SimLog:
    """Run the closed loop; deterministic for fixed inputs.

    Raises CascadeInfeasible (with the partial log attached as ``.log``)
    if any control step has no feasible cascade.
    """
    events = sorted(events, key=lambda e: e.t)
    for ev in events:
        if ev.t > config.duration:
            raise EventOutOfRange(
                f"event at t={ev.t} beyond duration {config.duration}")
    st = _SimState(config)
    steps = int(round(config.duration / config.dt))
    columns = _log_columns(st.layout)
    data = np.zeros((steps, len(columns)))
    events_fired = []
    settings = SolverSettings()
    ev_idx = 0
    arm = slice(3, st.chain.n)
    st.x_a, J = fk_and_jacobian(st.chain, st.state.q)

    for k in range(steps):
        t = k * config.dt
        fired = 0
        while ev_idx < len(events) and events[ev_idx].t <= t + 1e-12:
            apply_event(st, events[ev_idx])
            events_fired.append((k, events[ev_idx].kind))
            ev_idx += 1
            fired += 1

        if st.ergonomics_active():
            terminal = build_ergonomics_level(
                st.map_world.H_e, st.map_world.g_e, st.x_d, st.layout,
                config.dt)
        else:
            terminal = build_min_xdot_level(st.layout)

        stack = assemble_stack(J, st.x_d, st.x_a, config.gains, st.box,
                               st.chain, st.state, st.layout, config.dt,
                               terminal, config.cart, st.qdot_prev)
        try:
            result = solve_hierarchy(stack, settings, warm_starts=st.warm)
        except LevelInfeasible as exc:
            err = CascadeInfeasible(t, exc.level)
            err.log = _finalize_log(columns, data[:k], events_fired, config)
            raise err from exc
        st.warm = result.warm_starts
        chi = result.chi_star
        base_vel, arm_vel, xd_dot, slack = split_solution(chi, st.layout)
        qdot_cmd = np.concatenate([base_vel, arm_vel])

        # advance desired trajectory and plant
        new_des, _ = integrate_state(
            st.chain, JointState(q=st.q_des, q_dot=st.qdot_des), qdot_cmd,
            config.dt)
        st.q_des, st.qdot_des = new_des.q, qdot_cmd
        if config.plant == PLANT_IDEAL:
            st.state, _ = integrate_state(st.chain, st.state, qdot_cmd,
                                          config.dt)
        else:
            # gravity exactly canceled: net acceleration is the impedance law
            tau = impedance_torque(st.q_des[arm], qdot_cmd[arm],
                                   st.state.q[arm], st.state.q_dot[arm],
                                   config.gains, np.zeros(st.chain.n - 3))
            qddot = np.zeros(st.chain.n)
            qddot[arm] = tau
            qdot_new = st.state.q_dot + qddot * config.dt
            qdot_new[:3] = base_vel
            st.state, _ = integrate_state(st.chain, st.state, qdot_new,
                                          config.dt)
        st.x_d = integrate_pose(st.x_d, xd_dot, config.dt)
        st.x_a, J = fk_and_jacobian(st.chain, st.state.q)
        st.qdot_prev = qdot_cmd

        e_s = ergomap.evaluate_score(st.map_world, st.x_d.position)
        viol = st.box.violation(st.x_d)
        res1 = stack.levels[0].residual(chi)
        res2 = stack.levels[1].residual(chi)
        obj3 = result.per_level[2][1]
        row = np.concatenate([
            [t], st.state.q,
            st.x_a.position, st.x_a.orientation,
            st.x_d.position, st.x_d.orientation,
            chi, slack, [e_s],
            st.box.pos_min, st.box.pos_max, st.box.orient_center,
            st.box.orient_halfwidth, viol,
            [res1, res2, obj3, result.strictness(stack),
             fired, float(st.collaborative), float(st.ergonomics_active())],
        ])
        data[k] = row

    return _finalize_log(columns, data, events_fired, config)


def _finalize_log(columns, data, events_fired, config):
    summary = {}
    if data.shape[0]:
        es = data[:, columns.index("e_s")]
        slack_cols = [columns.index(f"slack{i}") for i in range(6)]
        viol_cols = [columns.index(f"viol{i}") for i in range(6)]
        summary = {
            "steps": float(data.shape[0]),
            "mean_e_s": float(np.mean(es)),
            "final_e_s": float(es[-1]),
            "max_slack": float(np.max(np.abs(data[:, slack_cols]))),
            "max_violation": float(np.max(data[:, viol_cols])),
            "max_strictness": float(np.max(data[:, columns.index("strictness")])),
            "dt": config.dt,
        }
    return SimLog(columns=columns, data=data, events_fired=events_fired,
                  summary=summary)


@dataclass
class ComparisonReport:
    log_ergonomics: SimLog
    log_benchmark: SimLog
    es_ergonomics: np.ndarray
    es_benchmark: np.ndarray
    map_min_score: float

    def summary(self):
        return {
            "mean_e_s_ergonomics": float(np.mean(self.es_ergonomics)),
            "mean_e_s_benchmark": float(np.mean(self.es_benchmark)),
            "final_e_s_ergonomics": float(self.es_ergonomics[-1]),
            "final_e_s_benchmark": float(self.es_benchmark[-1]),
            "map_min_score": self.map_min_score,
        }


def compare_modes(config: SimConfig, events) -> ComparisonReport:
    """Run the scenario in both terminal modes and pair the score traces."""
    cfg_e = replace(config, mode=MODE_ERGONOMICS)
    cfg_b = replace(config, mode=MODE_BENCHMARK)
    log_e = run_scenario(cfg_e, events)
    log_b = run_scenario(cfg_b, events)
    st = _SimState(config)
    return ComparisonReport(
        log_ergonomics=log_e, log_benchmark=log_b,
        es_ergonomics=log_e.col("e_s"), es_benchmark=log_b.col("e_s"),
        map_min_score=st.map_world.min_score())


def parse_scenario(path):
    """Line-delimited scenario records: ``t=.. kind=.. key=value ...``."""
    events = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = {}
            for tok in line.split():
                if "=" not in tok:
                    raise ValueError(f"{path}:{lineno}: bad token {tok!r}")
                key, val = tok.split("=", 1)
                fields[key] = val
            try:
                t = float(fields.pop("t"))
                kind = fields.pop("kind")
            except KeyError as exc:
                raise ValueError(f"{path}:{lineno}: missing {exc}") from exc
            payload = {}
            for key, val in fields.items():
                if key in ("direction", "position", "features"):
                    if val != "auto":
                        val = np.array([float(v) for v in val.split(",")])
                elif key == "heading":
                    val = float(val)
                payload[key] = val
            try:
                events.append(ScenarioEvent(t=t, kind=kind, payload=payload))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return events
