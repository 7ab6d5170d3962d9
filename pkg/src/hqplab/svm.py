"""Primal linear SVM for the binary surface classifier.

Three training routes over the same hinge-margin geometry: the constrained
QP form (delegated to the dense QP solver, variables [w, b, xi]), the L1
primal (hinge loss, smoothing homotopy), and the L2 primal (squared hinge,
smooth quasi-Newton minimization).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .errors import DimensionMismatch, NonPositiveC, SingleClass
from .qp import QpProblem, SolverSettings, solve_qp

L1 = "l1"
L2 = "l2"
CONSTRAINED_QP = "constrained_qp"

LABEL_SMOOTH = 1
LABEL_DRILLED = -1


@dataclass
class LabeledSet:
    X: np.ndarray  # (N, N_f)
    y: np.ndarray  # (N,) in {+1, -1}

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.X.shape[0] != self.y.shape[0]:
            raise DimensionMismatch("instance/label count mismatch")
        if not np.all(np.isin(self.y, (-1.0, 1.0))):
            raise ValueError("labels must be +1/-1")

    @classmethod
    def from_csv(cls, path):
        """Rows: label,feature_1,...,feature_N."""
        data = np.atleast_2d(np.loadtxt(path, delimiter=",", comments="#"))
        return cls(X=data[:, 1:], y=data[:, 0])

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("# label,features...\n")
            for xi, yi in zip(self.X, self.y):
                fh.write(f"{int(yi)}," + ",".join(f"{v:.17g}" for v in xi) + "\n")


@dataclass
class LinearModel:
    w: np.ndarray
    b: float
    trained_with: str
    C: float
    info: dict = field(default_factory=dict)

    def decision(self, X):
        return np.atleast_2d(np.asarray(X, dtype=float)) @ self.w + self.b

    def dump(self, path):
        with open(path, "w") as fh:
            fh.write(f"variant {self.trained_with}\nC {self.C:.17g}\n")
            fh.write("w " + " ".join(f"{v:.17g}" for v in self.w) + "\n")
            fh.write(f"b {self.b:.17g}\n")

    @classmethod
    def load(cls, path):
        vals = {}
        with open(path) as fh:
            for line in fh:
                parts = line.split()
                if parts:
                    vals[parts[0]] = parts[1:]
        return cls(w=np.array([float(v) for v in vals["w"]]),
                   b=float(vals["b"][0]), trained_with=vals["variant"][0],
                   C=float(vals["C"][0]))


def predict(model: LinearModel, x) -> int:
    """Label of a single feature vector; exact ties break to +1."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != model.w.shape[0]:
        raise DimensionMismatch("feature dimension mismatch")
    return 1 if float(model.w @ x + model.b) >= 0.0 else -1


def predict_batch(model: LinearModel, X):
    scores = model.decision(X)
    return np.where(scores >= 0.0, 1, -1)


def objective(model: LinearModel, data: LabeledSet, C: float,
              variant: str) -> float:
    """Primal objective value (pure)."""
    if data.X.shape[1] != model.w.shape[0]:
        raise DimensionMismatch("feature dimension mismatch")
    margins = 1.0 - data.y * (data.X @ model.w + model.b)
    hinge = np.maximum(margins, 0.0)
    reg = 0.5 * float(model.w @ model.w)
    if variant == L2:
        return reg + C * float(np.sum(hinge ** 2))
    return reg + C * float(np.sum(hinge))


def train(data: LabeledSet, C: float, variant: str = L2) -> LinearModel:
    if C <= 0:
        raise NonPositiveC(f"C = {C}")
    if np.all(data.y == data.y[0]):
        raise SingleClass("training data contains a single label")
    if variant == L2:
        return _train_l2(data, C)
    if variant == L1:
        return _train_l1(data, C)
    if variant == CONSTRAINED_QP:
        return _train_qp(data, C)
    raise ValueError(f"unknown variant {variant!r}")


def _l2_value_grad(theta, X, y, C):
    w, b = theta[:-1], theta[-1]
    margins = 1.0 - y * (X @ w + b)
    hinge = np.maximum(margins, 0.0)
    val = 0.5 * w @ w + C * np.sum(hinge ** 2)
    coef = -2.0 * C * hinge * y
    grad_w = w + X.T @ coef
    grad_b = np.sum(coef)
    return val, np.concatenate([grad_w, [grad_b]])


def _train_l2(data: LabeledSet, C: float, gtol: float = 1e-9,
              max_iter: int = 2000) -> LinearModel:
    """Smooth full-batch minimization of the squared-hinge primal."""
    n_f = data.X.shape[1]
    theta0 = np.zeros(n_f + 1)
    res = scipy.optimize.minimize(
        _l2_value_grad, theta0, args=(data.X, data.y, C), jac=True,
        method="L-BFGS-B", options={"gtol": gtol, "ftol": 1e-16,
                                    "maxiter": max_iter})
    theta = res.x
    # final polish: a few exact-Hessian Newton steps on the active margin set
    for _ in range(50):
        val, grad = _l2_value_grad(theta, data.X, data.y, C)
        if np.max(np.abs(grad)) <= 1e-10:
            break
        w, b = theta[:-1], theta[-1]
        margins = 1.0 - data.y * (data.X @ w + b)
        act = margins > 0.0
        Xa = np.column_stack([data.X[act], np.ones(int(np.sum(act)))])
        Hess = 2.0 * C * (Xa.T @ Xa)
        Hess[:n_f, :n_f] += np.eye(n_f)
        try:
            step = np.linalg.solve(Hess + 1e-12 * np.eye(n_f + 1), grad)
        except np.linalg.LinAlgError:
            break
        theta = theta - step
    val, grad = _l2_value_grad(theta, data.X, data.y, C)
    return LinearModel(w=theta[:-1], b=float(theta[-1]), trained_with=L2, C=C,
                       info={"grad_inf_norm": float(np.max(np.abs(grad))),
                             "objective": float(val)})


def _smoothed_hinge_value_grad(theta, X, y, C, mu):
    """Huber-smoothed hinge: quadratic on (0, mu), linear above.

    The smoothed objective differs from the exact hinge primal by at most
    C * N * mu / 2, so driving mu down recovers the nonsmooth optimum.
    """
    w, b = theta[:-1], theta[-1]
    margins = 1.0 - y * (X @ w + b)
    quad = (margins > 0.0) & (margins < mu)
    lin = margins >= mu
    loss = (np.sum(margins[quad] ** 2) / (2.0 * mu)
            + np.sum(margins[lin] - 0.5 * mu))
    dloss = np.clip(margins / mu, 0.0, 1.0)
    coef = -C * dloss * y
    grad_w = w + X.T @ coef
    grad_b = np.sum(coef)
    val = 0.5 * w @ w + C * loss
    return val, np.concatenate([grad_w, [grad_b]])


def _train_l1(data: LabeledSet, C: float, mu_final: float = 1e-8) -> LinearModel:
    """Hinge-loss primal via a deterministic smoothing homotopy: minimize a
    Huber-smoothed hinge with L-BFGS-B, warm starting while the smoothing
    width decays to ``mu_final``."""
    n_f = data.X.shape[1]
    theta = np.zeros(n_f + 1)
    mu = 1e-1
    while True:
        res = scipy.optimize.minimize(
            _smoothed_hinge_value_grad, theta, args=(data.X, data.y, C, mu),
            jac=True, method="L-BFGS-B",
            options={"gtol": 1e-12, "ftol": 1e-16, "maxiter": 2000})
        theta = res.x
        if mu <= mu_final:
            break
        mu = max(mu * 0.1, mu_final)
    model = LinearModel(w=theta[:-1], b=float(theta[-1]), trained_with=L1, C=C)
    model.info["objective"] = objective(model, data, C, L1)
    return model


def _train_qp(data: LabeledSet, C: float) -> LinearModel:
    """Constrained primal: variables [w, b, xi], hinge constraints as rows."""
    N, n_f = data.X.shape
    s = n_f + 1 + N
    H = np.zeros((s, s))
    H[:n_f, :n_f] = np.eye(n_f)
    g = np.zeros(s)
    g[n_f + 1:] = C
    # -y_i (w'x_i + b) - xi_i <= -1  and  -xi_i <= 0
    C1 = np.zeros((N, s))
    C1[:, :n_f] = -data.y[:, None] * data.X
    C1[:, n_f] = -data.y
    C1[:, n_f + 1:] = -np.eye(N)
    C2 = np.zeros((N, s))
    C2[:, n_f + 1:] = -np.eye(N)
    qp = QpProblem(H=H, g=g, C=np.vstack([C1, C2]),
                   d=np.concatenate([-np.ones(N), np.zeros(N)]))
    sol = solve_qp(qp, SolverSettings(max_iter=20000))
    x = sol.x_star
    return LinearModel(w=x[:n_f], b=float(x[n_f]), trained_with=CONSTRAINED_QP,
                       C=C, info={"xi": x[n_f + 1:],
                                  "qp_status": sol.status.value,
                                  "kkt": sol.kkt})


def synthetic_surface_features(n: int = 200, n_f: int = 8, seed: int = 7,
                               separation: float = 6.0) -> LabeledSet:
    """Two deterministic Gaussian clusters standing in for pooled image
    features; separable by construction at the default separation."""
    rng = np.random.default_rng(seed)
    half = n // 2
    mean = np.zeros(n_f)
    mean[0] = separation / 2.0
    X_pos = rng.normal(0.0, 1.0, size=(half, n_f)) + mean
    X_neg = rng.normal(0.0, 1.0, size=(n - half, n_f)) - mean
    X = np.vstack([X_pos, X_neg])
    y = np.concatenate([np.ones(half), -np.ones(n - half)])
    return LabeledSet(X=X, y=y)


def training_accuracy(model: LinearModel, data: LabeledSet) -> float:
    return float(np.mean(predict_batch(model, data.X) == data.y))
