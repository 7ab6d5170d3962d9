"""Strict-priority cascade of QP levels over a shared decision vector.

Levels are solved highest priority first. After level j is solved, the
equality block A_j x = A_j x*_j is appended to every lower level so the
lower levels can only move in the nullspace of what was already decided.
Inequality blocks of levels 1..k all constrain level k.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, LevelInfeasible
from .qp import QpProblem, QpSolution, SolverSettings, SolveStatus, solve_qp

_DEDUP_TOL = 1e-10


@dataclass
class LeastSquares:
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float).ravel()


@dataclass
class Quadratic:
    H: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        self.g = np.asarray(self.g, dtype=float).ravel()


@dataclass
class TaskLevel:
    objective: LeastSquares | Quadratic
    ineq: tuple | None = None   # (C, d)
    eq: tuple | None = None     # (E, f)
    label: str = ""

    def dim(self):
        if isinstance(self.objective, LeastSquares):
            return self.objective.A.shape[1]
        return self.objective.H.shape[0]

    def residual(self, x):
        """Least-squares residual norm at x (None for quadratic levels)."""
        if isinstance(self.objective, LeastSquares):
            return float(np.linalg.norm(self.objective.A @ x - self.objective.b))
        return None


@dataclass
class Hierarchy:
    decision_dim: int
    levels: list

    def validate(self):
        if not self.levels:
            raise DimensionMismatch("hierarchy needs at least one level")
        for k, lvl in enumerate(self.levels):
            if lvl.dim() != self.decision_dim:
                raise DimensionMismatch(
                    f"level {k + 1} ({lvl.label!r}) has dim {lvl.dim()}, "
                    f"expected {self.decision_dim}")
            if isinstance(lvl.objective, Quadratic) and k != len(self.levels) - 1:
                raise DimensionMismatch(
                    f"quadratic objective only allowed at the terminal level "
                    f"(found at level {k + 1})")
            for block, ncol in ((lvl.ineq, 2), (lvl.eq, 2)):
                if block is not None and np.atleast_2d(block[0]).shape[1] != self.decision_dim:
                    raise DimensionMismatch(f"constraint block at level {k + 1}")


@dataclass
class CascadeResult:
    chi_star: np.ndarray
    per_level: list            # (QpSolution, objective value, KktReport)
    propagation_log: list      # appended (E, f) equality blocks per level
    warm_starts: list = field(default_factory=list)

    def level_solution(self, k):
        return self.per_level[k][0].x_star

    def strictness(self, hierarchy):
        """max_j ||A_j chi* - A_j chi*_j||_inf over least-squares levels."""
        worst = 0.0
        for j, lvl in enumerate(hierarchy.levels[:-1]):
            if isinstance(lvl.objective, LeastSquares):
                A = lvl.objective.A
                dev = np.max(np.abs(A @ self.chi_star - A @ self.level_solution(j)))
                worst = max(worst, float(dev))
        return worst


def _dedup_rows(E, f):
    """Keep a maximal independent row subset (rank-revealing pivoted QR)."""
    if E.shape[0] <= 1:
        return E, f
    if E.shape[0] <= E.shape[1]:
        # cheap full-rank screen: a well-pivoted Cholesky of the row Gram
        # matrix means nothing to drop, skipping the QR factorization
        G = E @ E.T
        try:
            L = np.linalg.cholesky(G)
            dmax = float(np.max(np.diagonal(L)))
            if float(np.min(np.diagonal(L))) > 1e-6 * dmax:
                return E, f
        except np.linalg.LinAlgError:
            pass
    _, R, piv = scipy.linalg.qr(E.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return E[:0], f[:0]
    rank = int(np.sum(diag > _DEDUP_TOL * diag[0]))
    keep = np.sort(piv[:rank])
    return E[keep], f[keep]


def accumulate_constraints(h: Hierarchy, k: int, solved) -> QpProblem:
    """Build the level-k QP with accumulated inequalities and propagated
    equalities from the already-solved levels (pure function).

    ``solved`` holds chi*_j for levels j < k (1-based k).
    """
    if not 1 <= k <= len(h.levels):
        raise DimensionMismatch(f"level index {k} out of range")
    if len(solved) < k - 1:
        raise DimensionMismatch(f"level {k} needs {k - 1} prior solutions")
    s = h.decision_dim
    lvl = h.levels[k - 1]

    if isinstance(lvl.objective, LeastSquares):
        A, b = lvl.objective.A, lvl.objective.b
        H = A.T @ A
        g = -A.T @ b
    else:
        H = 0.5 * (lvl.objective.H + lvl.objective.H.T)
        g = lvl.objective.g

    C_rows, d_rows = [], []
    E_rows, f_rows = [], []
    for j in range(k):
        lj = h.levels[j]
        if lj.ineq is not None:
            C_rows.append(np.atleast_2d(lj.ineq[0]))
            d_rows.append(np.asarray(lj.ineq[1], dtype=float).ravel())
        if lj.eq is not None:
            E_rows.append(np.atleast_2d(lj.eq[0]))
            f_rows.append(np.asarray(lj.eq[1], dtype=float).ravel())
    for j in range(k - 1):
        lj = h.levels[j]
        if isinstance(lj.objective, LeastSquares):
            Aj = lj.objective.A
            E_rows.append(Aj)
            f_rows.append(Aj @ solved[j])

    C = np.vstack(C_rows) if C_rows else None
    d = np.concatenate(d_rows) if d_rows else None
    if E_rows:
        E = np.vstack(E_rows)
        f = np.concatenate(f_rows)
        E, f = _dedup_rows(E, f)
    else:
        E, f = None, None
    return QpProblem(H=H, g=g, C=C, d=d, E=E, f=f)


def solve_hierarchy(h: Hierarchy, settings: SolverSettings | None = None,
                    warm_starts=None) -> CascadeResult:
    """Solve the stack level by level, propagating strict priorities."""
    h.validate()
    if settings is None:
        settings = SolverSettings()
    solved = []
    per_level = []
    prop_log = []
    new_warm = []
    # incremental build of the accumulated blocks (same result as calling
    # accumulate_constraints per level, without re-stacking shared rows)
    C_acc, d_acc = None, None
    eq_rows, eqf_rows = [], []
    prop_rows, propf_rows = [], []
    for k in range(1, len(h.levels) + 1):
        lvl = h.levels[k - 1]
        if lvl.ineq is not None:
            Ck = np.atleast_2d(lvl.ineq[0])
            dk = np.asarray(lvl.ineq[1], dtype=float).ravel()
            C_acc = Ck if C_acc is None else np.vstack([C_acc, Ck])
            d_acc = dk if d_acc is None else np.concatenate([d_acc, dk])
        if lvl.eq is not None:
            eq_rows.append(np.atleast_2d(lvl.eq[0]))
            eqf_rows.append(np.asarray(lvl.eq[1], dtype=float).ravel())
        if k > 1:
            prev = h.levels[k - 2]
            if isinstance(prev.objective, LeastSquares):
                prop_rows.append(prev.objective.A)
                propf_rows.append(prev.objective.A @ solved[k - 2])
        if isinstance(lvl.objective, LeastSquares):
            A, b = lvl.objective.A, lvl.objective.b
            Hk, gk = A.T @ A, -A.T @ b
        else:
            Hk = 0.5 * (lvl.objective.H + lvl.objective.H.T)
            gk = lvl.objective.g
        if eq_rows or prop_rows:
            Ek, fk = _dedup_rows(np.vstack(eq_rows + prop_rows),
                                 np.concatenate(eqf_rows + propf_rows))
        else:
            Ek, fk = None, None
        qp = QpProblem(H=Hk, g=gk, C=C_acc, d=d_acc, E=Ek, f=fk)
        prop_log.append((qp.E.copy(), qp.f.copy()))
        lvl_settings = settings
        if warm_starts is not None and k - 1 < len(warm_starts):
            from dataclasses import replace
            lvl_settings = replace(settings, warm_start=warm_starts[k - 1])
        sol = solve_qp(qp, lvl_settings)
        if sol.status is SolveStatus.Infeasible:
            raise LevelInfeasible(k, f"level {k} ({h.levels[k - 1].label!r}) infeasible")
        solved.append(sol.x_star)
        obj = qp.objective(sol.x_star)
        per_level.append((sol, float(obj), sol.kkt))
        new_warm.append(sol.info.get("warm_start"))
    return CascadeResult(chi_star=solved[-1], per_level=per_level,
                         propagation_log=prop_log, warm_starts=new_warm)
