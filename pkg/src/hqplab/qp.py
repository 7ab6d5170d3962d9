"""Dense convex QP solver with KKT certification.

Solves

    min  1/2 x'Hx + g'x
    s.t. Cx <= d,  Ex = f

by operator splitting (ADMM) on the combined constraint block followed by an
active-set polish step that solves the equality-constrained KKT system for
the detected active set. A solution is reported as Solved only when the three
KKT residuals (stationarity, primal infeasibility, complementarity) are below
the configured tolerances.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._kernel import run_admm
from .errors import DimensionMismatch, NonSymmetric, NotPsd

_SYM_TOL = 1e-12
_PSD_TOL = -1e-10
_DIVERGENCE_NORM = 1e6


class SolveStatus(Enum):
    Solved = "solved"
    MaxIterations = "max_iterations"
    Infeasible = "infeasible"


@dataclass
class KktReport:
    stationarity: float
    primal: float
    complementarity: float

    def within(self, tol_stat, tol_prim, tol_comp):
        return (self.stationarity <= tol_stat
                and self.primal <= tol_prim
                and self.complementarity <= tol_comp)


@dataclass
class SolverSettings:
    tol_stat: float = 1e-8
    tol_prim: float = 1e-8
    tol_comp: float = 1e-8
    max_iter: int = 4000
    reg_eps: float = 1e-10
    sigma: float = 1e-6
    rho_ineq: float = 1.0
    rho_eq: float = 1e3
    alpha: float = 1.6
    chunk: int = 200
    check_every: int = 25
    eps_admm: float = 1e-9
    initial_guess: np.ndarray | None = None
    # from a previous solve of a nearby problem:
    # {"xzy": (x, z, y) scaled ADMM iterates, "active": inequality row indices}
    warm_start: dict | None = None


@dataclass
class QpProblem:
    H: np.ndarray
    g: np.ndarray
    C: np.ndarray | None = None
    d: np.ndarray | None = None
    E: np.ndarray | None = None
    f: np.ndarray | None = None

    def __post_init__(self):
        self.H = np.ascontiguousarray(np.atleast_2d(np.asarray(self.H, dtype=float)))
        self.g = np.asarray(self.g, dtype=float).ravel()
        s = self.g.shape[0]
        if self.C is None:
            self.C = np.zeros((0, s))
            self.d = np.zeros(0)
        else:
            self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
            self.d = np.asarray(self.d, dtype=float).ravel()
        if self.E is None:
            self.E = np.zeros((0, s))
            self.f = np.zeros(0)
        else:
            self.E = np.atleast_2d(np.asarray(self.E, dtype=float))
            self.f = np.asarray(self.f, dtype=float).ravel()

    @property
    def dim(self):
        return self.g.shape[0]

    def validate(self, check_psd=False):
        s = self.dim
        if self.H.shape != (s, s):
            raise DimensionMismatch(f"H is {self.H.shape}, expected ({s}, {s})")
        if self.C.shape[1] != s or self.d.shape[0] != self.C.shape[0]:
            raise DimensionMismatch("inequality block shape mismatch")
        if self.E.shape[1] != s or self.f.shape[0] != self.E.shape[0]:
            raise DimensionMismatch("equality block shape mismatch")
        asym = np.max(np.abs(self.H - self.H.T)) if s else 0.0
        if asym > _SYM_TOL * max(1.0, np.max(np.abs(self.H))):
            raise NonSymmetric(f"H asymmetry {asym:.3e}")
        if check_psd and s:
            lam_min = np.linalg.eigvalsh(0.5 * (self.H + self.H.T))[0]
            if lam_min < _PSD_TOL:
                raise NotPsd(f"H has eigenvalue {lam_min:.3e}")

    def objective(self, x):
        return 0.5 * x @ self.H @ x + self.g @ x


@dataclass
class QpSolution:
    x_star: np.ndarray
    lam: np.ndarray
    nu: np.ndarray
    status: SolveStatus
    kkt: KktReport
    info: dict = field(default_factory=dict)


def kkt_residuals(problem: QpProblem, x, lam, nu) -> KktReport:
    """KKT residual report for a candidate primal-dual triple (pure function)."""
    x = np.asarray(x, dtype=float).ravel()
    lam = np.asarray(lam, dtype=float).ravel()
    nu = np.asarray(nu, dtype=float).ravel()
    if (x.shape[0] != problem.dim or lam.shape[0] != problem.C.shape[0]
            or nu.shape[0] != problem.E.shape[0]):
        raise DimensionMismatch("candidate dimensions inconsistent with problem")
    grad = problem.H @ x + problem.g
    if lam.size:
        grad = grad + problem.C.T @ lam
    if nu.size:
        grad = grad + problem.E.T @ nu
    stationarity = float(np.max(np.abs(grad))) if grad.size else 0.0
    prim = 0.0
    comp = 0.0
    if lam.size:
        slacks = problem.C @ x - problem.d
        prim = max(prim, float(np.max(slacks)))
        comp = float(np.max(np.abs(lam * slacks)))
    if nu.size:
        prim = max(prim, float(np.max(np.abs(problem.E @ x - problem.f))))
    return KktReport(stationarity=stationarity, primal=max(prim, 0.0),
                     complementarity=comp)


def solve_qp(problem: QpProblem, settings: SolverSettings | None = None) -> QpSolution:
    """Solve a dense convex QP, returning a certified primal-dual solution."""
    if settings is None:
        settings = SolverSettings()
    problem.validate()
    s = problem.dim
    ni = problem.C.shape[0]
    ne = problem.E.shape[0]

    Hsym = 0.5 * (problem.H + problem.H.T)
    Hreg = Hsym + settings.reg_eps * np.eye(s)
    info = {"reg_eps": settings.reg_eps, "iterations": 0, "polished": False}

    # no inequalities: direct KKT solve is exact
    if ni == 0:
        x, nu = _solve_eq_kkt(Hreg, problem.g, problem.E, problem.f)
        kkt = kkt_residuals(problem, x, np.zeros(0), nu)
        ok = kkt.within(settings.tol_stat, settings.tol_prim, settings.tol_comp)
        status = SolveStatus.Solved if ok else SolveStatus.MaxIterations
        return QpSolution(x, np.zeros(0), nu, status, kkt, info)

    ws = settings.warm_start if isinstance(settings.warm_start, dict) else None

    # fast path: re-certify with the active set carried over from a previous
    # solve of a nearby problem, skipping the splitting iterations entirely
    if ws is not None and ws.get("active") is not None:
        guess = {int(i) for i in ws["active"] if 0 <= int(i) < ni}
        polished = _polish_from_set(problem, Hreg, guess, max_refine=10)
        if polished is not None:
            xp, lam, nu, kkt, act = polished
            if kkt.within(settings.tol_stat, settings.tol_prim,
                          settings.tol_comp):
                info["polished"] = True
                info["warm_path"] = True
                info["warm_start"] = {"active": act}
                return QpSolution(xp, lam, nu, SolveStatus.Solved, kkt, info)

    # combined constraint block, row-scaled to unit infinity norm
    A = np.vstack([problem.C, problem.E])
    lo = np.concatenate([np.full(ni, -np.inf), problem.f])
    up = np.concatenate([problem.d, problem.f])
    row_scale = np.max(np.abs(A), axis=1)
    row_scale[row_scale == 0.0] = 1.0
    A_s = np.ascontiguousarray(A / row_scale[:, None])
    lo_s = lo / row_scale
    up_s = up / row_scale

    rho = np.concatenate([np.full(ni, settings.rho_ineq),
                          np.full(ne, settings.rho_eq)])
    Kmat = np.zeros((s + ni + ne, s + ni + ne))
    Kmat[:s, :s] = Hreg + settings.sigma * np.eye(s)
    Kmat[:s, s:] = A_s.T
    Kmat[s:, :s] = A_s
    Kmat[s:, s:] = -np.diag(1.0 / rho)
    try:
        Kinv = np.ascontiguousarray(np.linalg.inv(Kmat))
    except np.linalg.LinAlgError:
        Kinv = np.ascontiguousarray(np.linalg.pinv(Kmat))

    xzy = ws.get("xzy") if ws is not None else None
    if xzy is not None and xzy[0].shape[0] == s and xzy[1].shape[0] == ni + ne:
        x = xzy[0].copy()
        z = xzy[1].copy()
        y = xzy[2].copy()
    else:
        if settings.initial_guess is not None:
            x = np.asarray(settings.initial_guess, dtype=float).ravel().copy()
            if x.shape[0] != s:
                raise DimensionMismatch("initial guess length mismatch")
        else:
            x = np.zeros(s)
        z = np.clip(A_s @ x, lo_s, up_s)
        y = np.zeros(ni + ne)

    Hc = np.ascontiguousarray(Hreg)
    g = problem.g
    total = 0
    best = None
    while total < settings.max_iter:
        n_iter = min(settings.chunk, settings.max_iter - total)
        y_before = y.copy()
        status_k, done, r_prim, r_dual = run_admm(
            Kinv, Hc, g, A_s, lo_s, up_s, rho, x, z, y,
            settings.sigma, settings.alpha, n_iter, settings.check_every,
            settings.eps_admm, settings.eps_admm)
        total += done
        info["iterations"] = total

        if status_k == 2 or np.max(np.abs(x)) > _DIVERGENCE_NORM:
            return _infeasible(problem, x, y, row_scale, ni, info,
                               "iterate norm exceeded divergence bound")

        up_i = problem.d / row_scale[:ni]
        detected = set(np.flatnonzero(
            (up_i - z[:ni] <= 1e-7) | (y[:ni] > 1e-7)).tolist())
        polished = _polish_from_set(problem, Hreg, detected)
        if polished is None or not polished[3].within(
                settings.tol_stat, settings.tol_prim, settings.tol_comp):
            retry = _polish_from_set(problem, Hreg, set())
            if retry is not None:
                polished = retry
        if polished is not None:
            xp, lam, nu, kkt, act = polished
            if kkt.within(settings.tol_stat, settings.tol_prim, settings.tol_comp):
                info["polished"] = True
                info["warm_start"] = {"xzy": (x, z, y), "active": act}
                return QpSolution(xp, lam, nu, SolveStatus.Solved, kkt, info)
            best = (xp, lam, nu, kkt)

        dy = y - y_before
        if _primal_infeasibility_certificate(A_s, lo_s, up_s, ni, dy):
            return _infeasible(problem, x, y, row_scale, ni, info,
                               "primal infeasibility certificate from dual direction")

        if status_k == 0:
            break

    # budget exhausted (or ADMM converged but polish could not certify)
    lam_raw = y[:ni] / row_scale[:ni]
    nu_raw = y[ni:] / row_scale[ni:]
    kkt_raw = kkt_residuals(problem, x, np.maximum(lam_raw, 0.0), nu_raw)
    cand = (x, np.maximum(lam_raw, 0.0), nu_raw, kkt_raw)
    if best is not None and _kkt_score(best[3]) < _kkt_score(kkt_raw):
        cand = best
    ok = cand[3].within(settings.tol_stat, settings.tol_prim, settings.tol_comp)
    status = SolveStatus.Solved if ok else SolveStatus.MaxIterations
    info["warm_start"] = {"xzy": (x, z, y),
                          "active": np.flatnonzero(cand[1] > 1e-9)}
    return QpSolution(cand[0], cand[1], cand[2], status, cand[3], info)


def _kkt_score(kkt):
    return max(kkt.stationarity, kkt.primal, kkt.complementarity)


def _infeasible(problem, x, y, row_scale, ni, info, why):
    lam = np.maximum(y[:ni] / row_scale[:ni], 0.0)
    nu = y[ni:] / row_scale[ni:]
    kkt = kkt_residuals(problem, x, lam, nu)
    info["infeasibility_reason"] = why
    return QpSolution(x, lam, nu, SolveStatus.Infeasible, kkt, info)


def _primal_infeasibility_certificate(A_s, lo_s, up_s, ni, dy, tol=1e-9):
    nrm = np.max(np.abs(dy)) if dy.size else 0.0
    if nrm <= 1e-12:
        return False
    dyn = dy / nrm
    if np.max(np.abs(A_s.T @ dyn)) > tol * 10:
        return False
    pos = np.maximum(dyn, 0.0)
    neg = np.minimum(dyn, 0.0)
    # rows with l = -inf must not carry negative dual direction
    if ni and np.min(neg[:ni]) < -tol:
        return False
    support = up_s @ pos + lo_s[ni:] @ neg[ni:]
    return support < -tol


def _solve_eq_kkt(Hreg, g, E, f):
    """Exact solve of the equality-constrained KKT system (lstsq fallback)."""
    s = g.shape[0]
    ne = E.shape[0]
    K = np.zeros((s + ne, s + ne))
    K[:s, :s] = Hreg
    K[:s, s:] = E.T
    K[s:, :s] = E
    rhs = np.concatenate([-g, f])
    sol = _robust_solve(K, rhs)
    return sol[:s], sol[s:]


def _robust_solve(K, rhs):
    scale = max(1.0, np.max(np.abs(rhs)))
    try:
        sol = np.linalg.solve(K, rhs)
        res = rhs - K @ sol
        # iterative refinement keeps large-multiplier systems accurate
        # enough for the complementarity certificate
        if np.max(np.abs(res)) > 1e-11 * scale:
            sol += np.linalg.solve(K, res)
            res = rhs - K @ sol
        if np.max(np.abs(res)) <= 1e-8 * scale:
            return sol
    except np.linalg.LinAlgError:
        pass
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    sol += np.linalg.lstsq(K, rhs - K @ sol, rcond=None)[0]
    return sol


def _polish_from_set(problem, Hreg, active, max_refine=150):
    """Active-set polish: exact KKT solve on a candidate active set.

    Refines the set until primal-dual feasible or the budget runs out.
    The first pass takes the whole candidate set at once (fast when the
    guess is right); afterwards, single-exchange steps with Bland's rule
    (lowest index first) guarantee the refinement cannot cycle. Returns
    ``(x, lam, nu, kkt, active_indices)`` or ``None``.
    """
    s = problem.dim
    ni = problem.C.shape[0]
    C, d, E, f = problem.C, problem.d, problem.E, problem.f
    viol_tol = 1e-10 * np.maximum(1.0, np.abs(d)) if ni else np.zeros(0)
    active = set(int(i) for i in active)
    bulk = True
    for _ in range(max_refine):
        idx = sorted(active)
        G = np.vstack([C[idx], E]) if idx else E
        h = np.concatenate([d[idx], f])
        na = len(idx)
        K = np.zeros((s + na + E.shape[0], s + na + E.shape[0]))
        K[:s, :s] = Hreg
        K[:s, s:] = G.T
        K[s:, :s] = G
        rhs = np.concatenate([-problem.g, h])
        sol = _robust_solve(K, rhs)
        xp = sol[:s]
        mult = sol[s:]
        lam = np.zeros(ni)
        lam[idx] = mult[:na]
        nu = mult[na:]

        # an over-determined working set makes the KKT system inconsistent
        # (lstsq then returns a point off the constraints): shed rows
        res = np.max(np.abs(G @ xp - h)) if G.shape[0] else 0.0
        if res > 1e-9 * max(1.0, np.max(np.abs(h)) if h.size else 1.0):
            if not idx:
                return None
            neg = [i for i in idx if lam[i] < -1e-9]
            if neg:
                active.difference_update(neg)
            else:
                active.discard(idx[-1])
            bulk = False
            continue

        viol = (C @ xp - d) if ni else np.zeros(0)
        worst = [int(i) for i in np.flatnonzero(viol > viol_tol)
                 if int(i) not in active]
        neg = [i for i in idx if lam[i] < -1e-9]
        if not worst and not neg:
            lam = np.maximum(lam, 0.0)
            return (xp, lam, nu, kkt_residuals(problem, xp, lam, nu),
                    np.array(idx, dtype=int))
        if bulk and worst:
            active.update(worst)
            bulk = False
        elif worst:
            add = min(worst)
            # a violated row dependent on the working set cannot simply be
            # appended: exchange it against the active row chosen by the
            # dual ratio test on the dependence coefficients
            if G.shape[0]:
                w, res_dep, *_ = np.linalg.lstsq(G.T, C[add], rcond=None)
                dep = np.max(np.abs(G.T @ w - C[add])) <= 1e-8 * max(
                    1.0, np.max(np.abs(C[add])))
                if dep:
                    cand = [(lam[idx[i]] / w[i], idx[i])
                            for i in range(na) if w[i] > 1e-10]
                    if not cand:
                        return None
                    active.discard(min(cand)[1])
            active.add(add)
        else:
            active.discard(min(neg))
    return None


def dump_problem(problem: QpProblem, path):
    """Write a problem in the plain-text matrix debug format."""
    with open(path, "w") as fh:
        fh.write(f"qp {problem.dim} {problem.C.shape[0]} {problem.E.shape[0]}\n")
        for name, arr in (("H", problem.H), ("g", problem.g), ("C", problem.C),
                          ("d", problem.d), ("E", problem.E), ("f", problem.f)):
            flat = np.asarray(arr).ravel()
            fh.write(name + " " + " ".join(f"{v:.17g}" for v in flat) + "\n")


def load_problem(path) -> QpProblem:
    """Read a problem written by :func:`dump_problem`."""
    with open(path) as fh:
        header = fh.readline().split()
        if not header or header[0] != "qp":
            raise ValueError(f"{path}: not a qp dump")
        s, ni, ne = (int(v) for v in header[1:4])
        vals = {}
        for line in fh:
            parts = line.split()
            if parts:
                vals[parts[0]] = np.array([float(v) for v in parts[1:]])
    return QpProblem(
        H=vals["H"].reshape(s, s), g=vals["g"],
        C=vals["C"].reshape(ni, s) if ni else None, d=vals["d"] if ni else None,
        E=vals["E"].reshape(ne, s) if ne else None, f=vals["f"] if ne else None)
