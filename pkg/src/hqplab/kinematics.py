"""Mobile-manipulator kinematic model.

Planar holonomic base (prismatic x, prismatic y, revolute yaw) plus a serial
revolute arm, 10 DoF in the default configuration. Provides forward
kinematics, the geometric Jacobian (linear rows on top, angular rows below,
world frame), pose errors in rotation-vector form, and Euler state
integration with position-limit clamping.

Quaternions are scalar-last [x, y, z, w], matching scipy.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import DimensionMismatch

REVOLUTE = "revolute"
PRISMATIC = "prismatic"


def _unit(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if abs(n - 1.0) > 1e-12:
        raise ValueError(f"axis {v} is not unit norm")
    return v / n


@dataclass
class Pose:
    position: np.ndarray
    orientation: np.ndarray  # quaternion [x, y, z, w]

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).ravel()
        q = np.asarray(self.orientation, dtype=float).ravel()
        n = np.linalg.norm(q)
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"quaternion norm {n} off unit")
        self.orientation = q / n

    @classmethod
    def identity(cls):
        return cls(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0]))

    @classmethod
    def from_rotation_matrix(cls, position, R):
        return cls(np.asarray(position, dtype=float),
                   Rotation.from_matrix(R).as_quat())

    def rotation_matrix(self):
        return Rotation.from_quat(self.orientation).as_matrix()

    def copy(self):
        return Pose(self.position.copy(), self.orientation.copy())


@dataclass
class JointLimits:
    pos_min: float
    pos_max: float
    vel_max: float
    acc_max: float


@dataclass
class JointModel:
    name: str
    kind: str  # REVOLUTE or PRISMATIC
    axis: np.ndarray
    origin_rot: np.ndarray = field(default_factory=lambda: np.eye(3))
    origin_trans: np.ndarray = field(default_factory=lambda: np.zeros(3))
    limits: JointLimits = field(
        default_factory=lambda: JointLimits(-10.0, 10.0, 1.0, 5.0))

    def __post_init__(self):
        self.axis = _unit(self.axis)
        self.origin_rot = np.asarray(self.origin_rot, dtype=float)
        self.origin_trans = np.asarray(self.origin_trans, dtype=float).ravel()
        if self.limits.pos_min >= self.limits.pos_max:
            raise ValueError(f"joint {self.name}: pos_min >= pos_max")


@dataclass
class JointState:
    q: np.ndarray
    q_dot: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).ravel()
        self.q_dot = np.asarray(self.q_dot, dtype=float).ravel()


@dataclass
class KinematicChain:
    joints: list
    ee_rot: np.ndarray = field(default_factory=lambda: np.eye(3))
    ee_trans: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def n(self):
        return len(self.joints)

    def position_limits(self):
        lo = np.array([j.limits.pos_min for j in self.joints])
        hi = np.array([j.limits.pos_max for j in self.joints])
        return lo, hi

    def velocity_limits(self):
        return np.array([j.limits.vel_max for j in self.joints])

    def acceleration_limits(self):
        return np.array([j.limits.acc_max for j in self.joints])

    @classmethod
    def planar_base(cls):
        """Base-only chain: prismatic x, prismatic y, revolute yaw."""
        return cls(joints=_base_joints())

    @classmethod
    def mobile_manipulator_default(cls):
        """Built-in 10-DoF chain: holonomic base + 7R arm (Panda-like reach)."""
        joints = _base_joints()
        arm_lim = JointLimits(-2.9, 2.9, 2.2, 10.0)
        mount = np.array([0.2, 0.0, 0.4])
        zax = [0.0, 0.0, 1.0]
        yax = [0.0, 1.0, 0.0]
        spec = [
            ("arm_1", zax, mount + [0.0, 0.0, 0.333]),
            ("arm_2", yax, [0.0, 0.0, 0.0]),
            ("arm_3", zax, [0.0, 0.0, 0.316]),
            ("arm_4", yax, [0.0825, 0.0, 0.0]),
            ("arm_5", zax, [-0.0825, 0.0, 0.384]),
            ("arm_6", yax, [0.0, 0.0, 0.0]),
            ("arm_7", zax, [0.088, 0.0, 0.0]),
        ]
        for name, axis, trans in spec:
            joints.append(JointModel(name, REVOLUTE, np.array(axis),
                                     np.eye(3), np.array(trans), arm_lim))
        return cls(joints=joints, ee_trans=np.array([0.0, 0.0, 0.107]))

    @classmethod
    def from_file(cls, path):
        """Load a chain description (one ``joint`` record per line).

        Record format (whitespace separated, ``#`` comments):
        joint NAME KIND ax ay az tx ty tz roll pitch yaw pmin pmax vmax amax
        ee_offset tx ty tz roll pitch yaw
        """
        joints = []
        ee_rot, ee_trans = np.eye(3), np.zeros(3)
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split()
                try:
                    if parts[0] == "joint":
                        name, kind = parts[1], parts[2]
                        vals = [float(v) for v in parts[3:]]
                        axis = np.array(vals[0:3])
                        trans = np.array(vals[3:6])
                        rot = Rotation.from_euler("xyz", vals[6:9]).as_matrix()
                        lim = JointLimits(*vals[9:13])
                        joints.append(JointModel(name, kind, axis, rot, trans, lim))
                    elif parts[0] == "ee_offset":
                        vals = [float(v) for v in parts[1:]]
                        ee_trans = np.array(vals[0:3])
                        ee_rot = Rotation.from_euler("xyz", vals[3:6]).as_matrix()
                    else:
                        raise ValueError(f"unknown record {parts[0]!r}")
                except (IndexError, ValueError) as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from exc
        return cls(joints=joints, ee_rot=ee_rot, ee_trans=ee_trans)


def _base_joints():
    wide = JointLimits(-10.0, 10.0, 1.0, 3.0)
    yaw = JointLimits(-6.283, 6.283, 1.5, 5.0)
    return [
        JointModel("base_x", PRISMATIC, np.array([1.0, 0.0, 0.0]), limits=wide),
        JointModel("base_y", PRISMATIC, np.array([0.0, 1.0, 0.0]), limits=wide),
        JointModel("base_yaw", REVOLUTE, np.array([0.0, 0.0, 1.0]), limits=yaw),
    ]


def _axis_angle_matrix(axis, angle):
    """Rodrigues rotation matrix about a unit axis (avoids scipy overhead)."""
    c = np.cos(angle)
    s = np.sin(angle)
    t = 1.0 - c
    x, y, z = axis
    return np.array([
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ])


def _joint_frames(chain, q):
    """Per-joint world frames before motion: list of (R, p, world_axis)."""
    R = np.eye(3)
    p = np.zeros(3)
    frames = []
    for joint, qi in zip(chain.joints, q):
        p = p + R @ joint.origin_trans
        R = R @ joint.origin_rot
        axis_w = R @ joint.axis
        frames.append((R, p, axis_w))
        if joint.kind == REVOLUTE:
            R = R @ _axis_angle_matrix(joint.axis, qi)
        else:
            p = p + axis_w * qi
    return frames, R, p


def forward_kinematics(chain: KinematicChain, q) -> Pose:
    q = np.asarray(q, dtype=float).ravel()
    if q.shape[0] != chain.n:
        raise DimensionMismatch(f"q has length {q.shape[0]}, chain has {chain.n}")
    _, R, p = _joint_frames(chain, q)
    p = p + R @ chain.ee_trans
    R = R @ chain.ee_rot
    return Pose.from_rotation_matrix(p, R)


def fk_and_jacobian(chain: KinematicChain, q):
    """Forward kinematics and geometric Jacobian from one chain traversal."""
    q = np.asarray(q, dtype=float).ravel()
    if q.shape[0] != chain.n:
        raise DimensionMismatch(f"q has length {q.shape[0]}, chain has {chain.n}")
    frames, R, p = _joint_frames(chain, q)
    p_ee = p + R @ chain.ee_trans
    pose = Pose.from_rotation_matrix(p_ee, R @ chain.ee_rot)
    return pose, _jacobian_from_frames(chain, frames, p_ee)


def geometric_jacobian(chain: KinematicChain, q) -> np.ndarray:
    """6 x n Jacobian: rows 0-2 linear, rows 3-5 angular, world frame."""
    q = np.asarray(q, dtype=float).ravel()
    if q.shape[0] != chain.n:
        raise DimensionMismatch(f"q has length {q.shape[0]}, chain has {chain.n}")
    frames, R, p = _joint_frames(chain, q)
    return _jacobian_from_frames(chain, frames, p + R @ chain.ee_trans)


def _jacobian_from_frames(chain, frames, p_ee):
    J = np.zeros((6, chain.n))
    for i, (joint, (_, p_i, axis_w)) in enumerate(zip(chain.joints, frames)):
        if joint.kind == REVOLUTE:
            r = p_ee - p_i
            J[0, i] = axis_w[1] * r[2] - axis_w[2] * r[1]
            J[1, i] = axis_w[2] * r[0] - axis_w[0] * r[2]
            J[2, i] = axis_w[0] * r[1] - axis_w[1] * r[0]
            J[3:, i] = axis_w
        else:
            J[:3, i] = axis_w
    return J


def pose_error(x_d: Pose, x_a: Pose) -> np.ndarray:
    """6-vector error: position difference and rotation vector of q_d q_a^-1."""
    dp = x_d.position - x_a.position
    r_d = Rotation.from_quat(x_d.orientation)
    r_a = Rotation.from_quat(x_a.orientation)
    drot = (r_d * r_a.inv()).as_rotvec()
    return np.concatenate([dp, drot])


def integrate_state(chain: KinematicChain, state: JointState, q_dot_cmd,
                    dt: float):
    """Explicit Euler step clamped to position limits.

    Returns (new_state, limit_hit) where limit_hit flags any clamped joint.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    q_dot_cmd = np.asarray(q_dot_cmd, dtype=float).ravel()
    if q_dot_cmd.shape[0] != chain.n:
        raise DimensionMismatch("velocity command length mismatch")
    q_new = state.q + q_dot_cmd * dt
    lo, hi = chain.position_limits()
    clamped = np.clip(q_new, lo, hi)
    limit_hit = bool(np.any(clamped != q_new))
    return JointState(q=clamped, q_dot=q_dot_cmd.copy()), limit_hit


def integrate_pose(pose: Pose, twist, dt: float) -> Pose:
    """Advance a pose by a 6-d world-frame twist (v, omega) over dt."""
    twist = np.asarray(twist, dtype=float).ravel()
    pos = pose.position + twist[:3] * dt
    dq = Rotation.from_rotvec(twist[3:] * dt)
    quat = (dq * Rotation.from_quat(pose.orientation)).as_quat()
    quat = quat / np.linalg.norm(quat)
    return Pose(pos, quat)
