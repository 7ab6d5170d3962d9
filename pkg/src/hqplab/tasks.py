"""Builders for the augmented stack of tasks.

Decision vector layout: [q_dot (n) | xd_dot (m) | slack (m)]. Level 1 is the
closed-loop IK tracking task (with the shared-workspace and box inequality
blocks attached so they bind the whole cascade), level 2 minimizes the
workspace slack, level 3 is either the ergonomics objective or the
minimum-velocity benchmark.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import DimensionMismatch, InconsistentLimits, NotPsd, SlackInactive
from .hierarchy import Hierarchy, LeastSquares, Quadratic, TaskLevel
from .kinematics import Pose, pose_error

_PSD_TOL = -1e-10


@dataclass
class AugmentedLayout:
    n: int                    # joint-space DoF (base + arm)
    m: int = 6                # task dimension
    slack_active: bool = True

    @property
    def s(self):
        return self.n + self.m + (self.m if self.slack_active else 0)

    @property
    def qdot(self):
        return slice(0, self.n)

    @property
    def xdot(self):
        return slice(self.n, self.n + self.m)

    @property
    def slack(self):
        if not self.slack_active:
            raise SlackInactive("layout has no slack block")
        return slice(self.n + self.m, self.n + 2 * self.m)


@dataclass
class HrswBox:
    pos_min: np.ndarray
    pos_max: np.ndarray
    orient_center: np.ndarray         # quaternion [x, y, z, w]
    orient_halfwidth: np.ndarray      # per-axis rotation-vector bound (rad)

    def __post_init__(self):
        self.pos_min = np.asarray(self.pos_min, dtype=float).ravel()
        self.pos_max = np.asarray(self.pos_max, dtype=float).ravel()
        q = np.asarray(self.orient_center, dtype=float).ravel()
        self.orient_center = q / np.linalg.norm(q)
        self.orient_halfwidth = np.asarray(self.orient_halfwidth, dtype=float).ravel()
        if np.any(self.pos_min > self.pos_max):
            raise ValueError("pos_min exceeds pos_max")
        if np.any(self.orient_halfwidth < 0):
            raise ValueError("negative orientation halfwidth")

    def copy(self):
        return HrswBox(self.pos_min.copy(), self.pos_max.copy(),
                       self.orient_center.copy(), self.orient_halfwidth.copy())

    def coords(self, pose: Pose) -> np.ndarray:
        """Box coordinates of a pose: position and rotation vector about
        the orientation center."""
        rel = (Rotation.from_quat(self.orient_center).inv()
               * Rotation.from_quat(pose.orientation)).as_rotvec()
        return np.concatenate([pose.position, rel])

    def bounds(self):
        lo = np.concatenate([self.pos_min, -self.orient_halfwidth])
        hi = np.concatenate([self.pos_max, self.orient_halfwidth])
        return lo, hi

    def violation(self, pose: Pose) -> np.ndarray:
        """Componentwise hard-box violation of a pose (0 inside)."""
        c = self.coords(pose)
        lo, hi = self.bounds()
        return np.maximum(np.maximum(c - hi, lo - c), 0.0)

    def translate(self, delta):
        self.pos_min = self.pos_min + delta
        self.pos_max = self.pos_max + delta

    def rotate_center(self, axis, angle):
        rot = Rotation.from_rotvec(np.asarray(axis, dtype=float) * angle)
        self.orient_center = (rot * Rotation.from_quat(self.orient_center)).as_quat()


@dataclass
class GainSet:
    K_p: np.ndarray = field(default_factory=lambda: 5.0 * np.ones(6))
    K_qp: np.ndarray = field(default_factory=lambda: 200.0 * np.ones(7))
    K_qd: np.ndarray = field(default_factory=lambda: 20.0 * np.ones(7))

    def __post_init__(self):
        for name in ("K_p", "K_qp", "K_qd"):
            v = np.asarray(getattr(self, name), dtype=float).ravel()
            if np.any(v <= 0):
                raise ValueError(f"{name} entries must be positive")
            setattr(self, name, v)


@dataclass
class CartesianLimits:
    vel_max: np.ndarray = field(
        default_factory=lambda: np.array([1.0, 1.0, 1.0, 1.5, 1.5, 1.5]))
    acc_max: np.ndarray | None = None  # off by default

    def __post_init__(self):
        self.vel_max = np.asarray(self.vel_max, dtype=float).ravel()
        if self.acc_max is not None:
            self.acc_max = np.asarray(self.acc_max, dtype=float).ravel()


def _rotvec_rate_matrix(r):
    """Inverse left Jacobian of the rotation vector r: maps the angular
    velocity (in the frame r is expressed in) to the rotation-vector rate."""
    r = np.asarray(r, dtype=float)
    theta = np.linalg.norm(r)
    rx = np.array([[0.0, -r[2], r[1]],
                   [r[2], 0.0, -r[0]],
                   [-r[1], r[0], 0.0]])
    if theta < 1e-8:
        c = 1.0 / 12.0
    else:
        c = 1.0 / theta ** 2 - 0.5 / (theta * np.tan(0.5 * theta))
    return np.eye(3) - 0.5 * rx + c * (rx @ rx)


def build_clik_level(J, x_d_prev: Pose, x_a: Pose, gains: GainSet,
                     layout: AugmentedLayout, dt: float) -> TaskLevel:
    """Closed-loop IK tracking task in the augmented variable."""
    J = np.atleast_2d(np.asarray(J, dtype=float))
    m = layout.m
    if J.shape != (m, layout.n):
        raise DimensionMismatch(f"J is {J.shape}, expected ({m}, {layout.n})")
    if dt <= 0:
        raise ValueError("dt must be positive")
    Kp = np.diag(gains.K_p)
    A = np.zeros((m, layout.s))
    A[:, layout.qdot] = J
    A[:, layout.xdot] = -(np.eye(m) + Kp * dt)
    b = Kp @ pose_error(x_d_prev, x_a)
    return TaskLevel(LeastSquares(A, b), label="clik")


def build_softening_level(layout: AugmentedLayout) -> TaskLevel:
    """Minimize the workspace slack at its own priority."""
    if not layout.slack_active:
        raise SlackInactive("softening level needs an active slack block")
    A = np.zeros((layout.m, layout.s))
    A[:, layout.slack] = np.eye(layout.m)
    return TaskLevel(LeastSquares(A, np.zeros(layout.m)), label="softening")


def build_hrsw_constraints(box: HrswBox, x_d_prev: Pose,
                           layout: AugmentedLayout, dt: float):
    """Softened shared-workspace rows: 2m inequalities on (xd_dot, slack).

    The orientation sub-box lives in rotation-vector coordinates in the
    frame of the box center. The world angular velocity maps into the
    rotation-vector rate through the inverse left Jacobian of the current
    coordinates composed with the center rotation, so the one-step
    prediction prev + dt * (mapped xd_dot) is first-order exact even far
    from the center.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    m = layout.m
    prev = box.coords(x_d_prev)
    lo, hi = box.bounds()
    M = np.eye(m)
    R_c = Rotation.from_quat(box.orient_center).as_matrix()
    M[3:, 3:] = _rotvec_rate_matrix(prev[3:]) @ R_c.T
    C = np.zeros((2 * m, layout.s))
    C[:m, layout.xdot] = dt * M
    C[:m, layout.slack] = -np.eye(m)
    C[m:, layout.xdot] = -dt * M
    C[m:, layout.slack] = -np.eye(m)
    d = np.concatenate([hi - prev, prev - lo])
    return C, d


def build_ergonomics_level(H_e, g_e, x_d_prev: Pose,
                           layout: AugmentedLayout, dt: float,
                           damping: float = 1e-6) -> TaskLevel:
    """Terminal quadratic level from the world-frame ergonomics map.

    Substitutes x_d = x_d_prev + dt * xd_dot into the quadratic score; the
    whole objective is then divided by dt^2, which leaves the minimizer
    unchanged but keeps the matrices at unit scale for the solver. A small
    isotropic damping term makes the level strictly convex over the whole
    decision vector; it only slows the transient and leaves the fixed point
    (H_e x + g_e = 0, the map minimum) unchanged.
    """
    H_e = np.asarray(H_e, dtype=float)
    g_e = np.asarray(g_e, dtype=float).ravel()
    if np.linalg.eigvalsh(0.5 * (H_e + H_e.T))[0] < _PSD_TOL:
        raise NotPsd("ergonomics curvature not PSD")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if damping < 0:
        raise ValueError("damping must be nonnegative")
    s = layout.s
    H = damping * np.eye(s)
    g = np.zeros(s)
    i0 = layout.xdot.start
    H[i0:i0 + 3, i0:i0 + 3] += H_e
    g[i0:i0 + 3] = (H_e @ x_d_prev.position + g_e) / dt
    return TaskLevel(Quadratic(H, g), label="ergonomics")


def build_min_xdot_level(layout: AugmentedLayout,
                         damping: float = 1e-6) -> TaskLevel:
    """Benchmark terminal level: minimize the desired Cartesian velocity.

    The isotropic damping term makes the level strictly convex over the
    whole decision vector, so redundant joint motion resolves to minimum
    norm instead of drifting freely in the task nullspace.
    """
    if damping < 0:
        raise ValueError("damping must be nonnegative")
    s = layout.s
    H = damping * np.eye(s)
    H[layout.xdot, layout.xdot] += np.eye(layout.m)
    return TaskLevel(Quadratic(H, np.zeros(s)), label="min_xdot")


def build_box_constraints(chain, state, layout: AugmentedLayout, dt: float,
                          cart: CartesianLimits | None = None,
                          qdot_prev=None, xdot_prev=None):
    """Elementwise bounds on q_dot and xd_dot as C chi <= d rows.

    Joint velocity bounds intersect three sources: direct velocity limits,
    position limits converted to braking-aware (viability) bounds so the
    joint can always stop before the limit under its acceleration budget,
    and acceleration limits around the previous velocity. If discretization
    makes the acceleration window conflict with a position bound, braking
    takes priority (the window is clamped rather than left empty).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n, m = layout.n, layout.m
    lo_q, hi_q = chain.position_limits()
    vmax = chain.velocity_limits()
    amax = chain.acceleration_limits()
    if qdot_prev is None:
        qdot_prev = np.zeros(n)
    gap_hi = np.maximum(hi_q - state.q, 0.0)
    gap_lo = np.maximum(state.q - lo_q, 0.0)
    half = 0.5 * amax * dt
    brake_hi = np.minimum(-half + np.sqrt(half * half + 2.0 * amax * gap_hi),
                          gap_hi / dt)
    brake_lo = np.minimum(-half + np.sqrt(half * half + 2.0 * amax * gap_lo),
                          gap_lo / dt)
    oth_ub = np.minimum(vmax, brake_hi)
    oth_lb = np.maximum(-vmax, -brake_lo)
    ub = np.minimum(oth_ub, qdot_prev + amax * dt)
    lb = np.maximum(oth_lb, qdot_prev - amax * dt)
    conflict = lb > ub
    # brake harder than amax rather than cross a position limit
    lb = np.where(conflict & (qdot_prev - amax * dt > oth_ub), oth_ub, lb)
    ub = np.where(conflict & (qdot_prev + amax * dt < oth_lb), oth_lb, ub)
    if np.any(lb > ub + 1e-15):
        bad = int(np.argmax(lb - ub))
        raise InconsistentLimits(
            f"joint {bad}: empty velocity interval [{lb[bad]:.4g}, {ub[bad]:.4g}]")

    if cart is None:
        cart = CartesianLimits()
    x_ub = cart.vel_max.copy()
    x_lb = -cart.vel_max
    if cart.acc_max is not None:
        if xdot_prev is None:
            xdot_prev = np.zeros(m)
        x_ub = np.minimum(x_ub, xdot_prev + cart.acc_max * dt)
        x_lb = np.maximum(x_lb, xdot_prev - cart.acc_max * dt)
        if np.any(x_lb > x_ub + 1e-15):
            raise InconsistentLimits("empty Cartesian velocity interval")

    rows = []
    rhs = []
    eye_q = np.zeros((n, layout.s))
    eye_q[:, layout.qdot] = np.eye(n)
    eye_x = np.zeros((m, layout.s))
    eye_x[:, layout.xdot] = np.eye(m)
    rows += [eye_q, -eye_q, eye_x, -eye_x]
    rhs += [ub, -lb, x_ub, -x_lb]
    return np.vstack(rows), np.concatenate(rhs)


def assemble_stack(J, x_d_prev: Pose, x_a: Pose, gains: GainSet, box: HrswBox,
                   chain, state, layout: AugmentedLayout, dt: float,
                   terminal: TaskLevel,
                   cart: CartesianLimits | None = None,
                   qdot_prev=None) -> Hierarchy:
    """Three-level stack: CLIK, slack softening, supplied terminal level.

    The workspace and box inequality blocks are attached at level 1 so that
    accumulation binds them at every level.
    """
    clik = build_clik_level(J, x_d_prev, x_a, gains, layout, dt)
    C_h, d_h = build_hrsw_constraints(box, x_d_prev, layout, dt)
    C_b, d_b = build_box_constraints(chain, state, layout, dt, cart, qdot_prev)
    clik.ineq = (np.vstack([C_h, C_b]), np.concatenate([d_h, d_b]))
    soft = build_softening_level(layout)
    return Hierarchy(decision_dim=layout.s, levels=[clik, soft, terminal])


def split_solution(chi_star, layout: AugmentedLayout):
    """Split chi* into (base_vel, arm_vel, xd_dot, slack)."""
    chi_star = np.asarray(chi_star, dtype=float).ravel()
    if chi_star.shape[0] != layout.s:
        raise DimensionMismatch(f"chi* length {chi_star.shape[0]} != {layout.s}")
    qdot = chi_star[layout.qdot]
    xdot = chi_star[layout.xdot]
    slack = chi_star[layout.slack] if layout.slack_active else np.zeros(0)
    return qdot[:3], qdot[3:], xdot, slack


def impedance_torque(q_arm_des, qdot_arm_des, q_a, qdot_a, gains: GainSet,
                     gravity_term) -> np.ndarray:
    """Joint impedance law: damping + stiffness + gravity compensation."""
    arrs = [np.asarray(v, dtype=float).ravel()
            for v in (q_arm_des, qdot_arm_des, q_a, qdot_a, gravity_term)]
    n_arm = gains.K_qp.shape[0]
    if any(a.shape[0] != n_arm for a in arrs):
        raise DimensionMismatch("impedance inputs must match arm dimension")
    q_des, qd_des, q_act, qd_act, grav = arrs
    return gains.K_qd * (qd_des - qd_act) + gains.K_qp * (q_des - q_act) + grav
