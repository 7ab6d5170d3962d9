"""Cartesian ergonomics-score maps as PSD quadratic forms.

A map stores e(x) = 1/2 x'H x + g'x + c over 3-D interaction points, fitted
by least squares from sampled scores, PSD-projected, and transformable from
the human frame to the world frame by a yaw + translation congruence.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGrid, MissingClass, WrongFrame

FRAME_HUMAN = "human"
FRAME_WORLD = "world"

SHORT = "short"
AVERAGE = "average"
TALL = "tall"

# stature thresholds (m): < short_max -> short, <= tall_min -> average
STATURE_SHORT_MAX = 1.65
STATURE_TALL_MIN = 1.80


@dataclass
class SubjectProfile:
    height: float
    stature_class: str = ""

    def __post_init__(self):
        if not 1.2 < self.height < 2.2:
            raise ValueError(f"implausible height {self.height}")
        if not self.stature_class:
            self.stature_class = classify_stature(self.height)


def classify_stature(height: float) -> str:
    if height < STATURE_SHORT_MAX:
        return SHORT
    if height <= STATURE_TALL_MIN:  # closed upper bound ties to average
        return AVERAGE
    return TALL


@dataclass
class HumanPoseState:
    position: np.ndarray
    heading: float = 0.0  # yaw, rad
    timestamp: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).ravel()

    def yaw_matrix(self):
        c, s = np.cos(self.heading), np.sin(self.heading)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass
class ScoreGrid:
    points: np.ndarray   # (N, 3) in the human frame
    scores: np.ndarray   # (N,)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.scores = np.asarray(self.scores, dtype=float).ravel()
        if self.points.shape[0] != self.scores.shape[0]:
            raise ValueError("point/score count mismatch")

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", comments="#")
        data = np.atleast_2d(data)
        return cls(points=data[:, :3], scores=data[:, 3])

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("# x,y,z,score\n")
            for p, sc in zip(self.points, self.scores):
                fh.write(f"{p[0]:.17g},{p[1]:.17g},{p[2]:.17g},{sc:.17g}\n")


@dataclass
class ErgonomicsMap:
    H_e: np.ndarray
    g_e: np.ndarray
    c_e: float
    frame: str = FRAME_HUMAN
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.H_e = np.asarray(self.H_e, dtype=float)
        self.g_e = np.asarray(self.g_e, dtype=float).ravel()
        self.c_e = float(self.c_e)

    def minimizer(self):
        return -np.linalg.pinv(self.H_e) @ self.g_e

    def min_score(self):
        return evaluate_score(self, self.minimizer())

    def dump(self, path):
        with open(path, "w") as fh:
            fh.write(f"frame {self.frame}\n")
            fh.write("H " + " ".join(f"{v:.17g}" for v in self.H_e.ravel()) + "\n")
            fh.write("g " + " ".join(f"{v:.17g}" for v in self.g_e) + "\n")
            fh.write(f"c {self.c_e:.17g}\n")
            if "fit_rms" in self.meta:
                fh.write(f"fit_rms {self.meta['fit_rms']:.17g}\n")

    @classmethod
    def load(cls, path):
        vals = {}
        with open(path) as fh:
            for line in fh:
                parts = line.split()
                if parts:
                    vals[parts[0]] = parts[1:]
        meta = {}
        if "fit_rms" in vals:
            meta["fit_rms"] = float(vals["fit_rms"][0])
        return cls(H_e=np.array([float(v) for v in vals["H"]]).reshape(3, 3),
                   g_e=np.array([float(v) for v in vals["g"]]),
                   c_e=float(vals["c"][0]),
                   frame=vals["frame"][0], meta=meta)


def evaluate_score(ergo_map: ErgonomicsMap, x) -> float:
    x = np.asarray(x, dtype=float).ravel()
    return float(0.5 * x @ ergo_map.H_e @ x + ergo_map.g_e @ x + ergo_map.c_e)


def fit_map_from_grid(grid: ScoreGrid) -> ErgonomicsMap:
    """Least-squares fit of a quadratic surface to sampled scores.

    The curvature is symmetrized by construction and projected to PSD by
    clipping negative eigenvalues; the constant is shifted so the score at
    the minimizer is nonnegative.
    """
    pts = grid.points
    if pts.shape[0] < 10:
        raise DegenerateGrid(f"need at least 10 samples, got {pts.shape[0]}")
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    # columns: c, gx, gy, gz, Hxx, Hyy, Hzz, Hxy, Hxz, Hyz
    design = np.column_stack([
        np.ones_like(x), x, y, z,
        0.5 * x * x, 0.5 * y * y, 0.5 * z * z,
        x * y, x * z, y * z,
    ])
    rank = np.linalg.matrix_rank(design)
    if rank < design.shape[1]:
        raise DegenerateGrid(f"design matrix rank {rank} < 10")
    coef, _, _, _ = np.linalg.lstsq(design, grid.scores, rcond=None)
    c = coef[0]
    g = coef[1:4].copy()
    H = np.array([
        [coef[4], coef[7], coef[8]],
        [coef[7], coef[5], coef[9]],
        [coef[8], coef[9], coef[6]],
    ])
    fit_rms = float(np.sqrt(np.mean((design @ coef - grid.scores) ** 2)))

    w, V = np.linalg.eigh(H)
    clipped = float(np.sum(np.abs(np.minimum(w, 0.0))))
    H_psd = V @ np.diag(np.maximum(w, 0.0)) @ V.T
    H_psd = 0.5 * (H_psd + H_psd.T)

    m = ErgonomicsMap(H_e=H_psd, g_e=g, c_e=c, frame=FRAME_HUMAN,
                      meta={"fit_rms": fit_rms, "clipped_eig_mass": clipped})
    low = m.min_score()
    if low < 0.0:
        m.c_e -= low
        m.meta["c_shift"] = -low
    return m


def map_to_world(ergo_map: ErgonomicsMap, human: HumanPoseState) -> ErgonomicsMap:
    """Express a human-frame map in world coordinates (scores preserved)."""
    if ergo_map.frame != FRAME_HUMAN:
        raise WrongFrame(f"expected human-frame map, got {ergo_map.frame}")
    R = human.yaw_matrix()
    t = human.position
    H_w = R @ ergo_map.H_e @ R.T
    Rg = R @ ergo_map.g_e
    g_w = Rg - H_w @ t
    c_w = ergo_map.c_e + 0.5 * t @ H_w @ t - Rg @ t
    return ErgonomicsMap(H_e=H_w, g_e=g_w, c_e=c_w, frame=FRAME_WORLD,
                         meta=dict(ergo_map.meta))


def select_map(registry: dict, subject: SubjectProfile) -> ErgonomicsMap:
    """Pick the stature-class map for a subject from {class: map}."""
    for cls in (SHORT, AVERAGE, TALL):
        if cls not in registry:
            raise MissingClass(f"registry lacks {cls!r} map")
    return registry[classify_stature(subject.height)]


def generate_synthetic_reba_grid(subject: SubjectProfile,
                                 spacing: float = 0.1) -> ScoreGrid:
    """Deterministic stand-in grid: convex bowl centered at an elbow-height
    sweet spot scaled with subject stature, mildly anisotropic."""
    if not 0.02 < spacing < 0.3:
        raise ValueError("spacing out of range (0.02, 0.3)")
    center = synthetic_bowl_center(subject)
    H, base = synthetic_bowl_curvature()
    xs = np.arange(0.1, 0.8 + 1e-9, spacing)
    ys = np.arange(-0.4, 0.4 + 1e-9, spacing)
    zs = np.arange(0.5 * subject.height, 0.75 * subject.height + 1e-9, spacing)
    pts = np.array([(x, y, z) for x in xs for y in ys for z in zs])
    diff = pts - center
    scores = base + 0.5 * np.einsum("ij,jk,ik->i", diff, H, diff)
    return ScoreGrid(points=pts, scores=scores)


def synthetic_bowl_center(subject: SubjectProfile) -> np.ndarray:
    """Sweet spot in the human frame: in front of the chest, z = 0.6 height."""
    return np.array([0.4, 0.0, 0.6 * subject.height])


def synthetic_bowl_curvature():
    """Curvature and floor score of the synthetic bowl (shared by tests)."""
    return np.diag([6.0, 4.0, 8.0]), 0.5


def build_map_registry(heights=(1.55, 1.72, 1.90)) -> dict:
    """Fit one synthetic map per stature class."""
    registry = {}
    for h in heights:
        subject = SubjectProfile(height=h)
        registry[subject.stature_class] = fit_map_from_grid(
            generate_synthetic_reba_grid(subject))
    return registry
