"""PSD feasibility solving and SDPA-sparse export.

A compiled moment problem is an affine slice of the PSD cone: one scalar
variable per equality class, pinned values, and sparse linear rows.  The
solver decides feasibility in layers, cheapest and most rigorous first:

1. exact linear presolve: pins are propagated through rows with a single
   unknown; a violated fully-determined row is an infeasibility proof
   (no PSD reasoning involved);
2. interlacing bound: if the words whose pairwise products are all
   already determined span a principal submatrix with min eigenvalue
   below the infeasibility margin, every completion shares that bound,
   so the problem is infeasible;
3. a phase-1 search max t s.t. X - t*1 >= 0 over the affine set, via a
   deterministic interior-point solve (cvxopt) when the problem is small
   enough, else via Dykstra alternating projections, which can certify
   feasibility (by exhibiting a witness) but reports only inconclusive
   when it stalls.

Verdicts follow the phase-1 value t*: feasible when t* >= -tol (witness
attached and re-checked), infeasible when t* < -infeasibility_margin,
inconclusive otherwise.  A FEASIBLE verdict at level n never claims more
than "no obstruction at level n".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.linalg

from .moment import MomentAssignment, MomentProblem, ResidualReport, check_assignment

try:
    import cvxopt
    import cvxopt.solvers

    _HAVE_CVXOPT = True
except ImportError:  # pragma: no cover - cvxopt is a declared dependency
    _HAVE_CVXOPT = False

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 50000
DEFAULT_MARGIN = 1e-4
LINEAR_TOL = 1e-9

# problems larger than this go to the projection engine; the interior
# point's Newton systems grow with the square of the free-class count
CVXOPT_MAX_FREE = 2500
CVXOPT_MAX_DIM = 200


class SdpStructureError(ValueError):
    pass


@dataclass(frozen=True)
class SdpRow:
    """<F, X> = rhs with F symmetric, given by its upper-triangle entries.

    A coefficient v at an off-diagonal cell (i, j) stands for entries v at
    both (i, j) and (j, i), so it contributes 2*v*X[i, j].
    """

    cells: tuple[tuple[int, int], ...]
    coeffs: tuple[float, ...]
    rhs: float


@dataclass
class AffineSdp:
    dim: int
    rows: tuple[SdpRow, ...]
    objective: str = "feasibility"
    objective_cells: tuple[tuple[int, int], ...] = ()
    objective_coeffs: tuple[float, ...] = ()
    problem: MomentProblem | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.objective not in ("feasibility", "maximize_min_eigenvalue",
                                  "maximize_linear"):
            raise SdpStructureError(f"unknown objective {self.objective!r}")
        for row in self.rows:
            for (i, j), c in zip(row.cells, row.coeffs):
                if not (0 <= i <= j < self.dim):
                    raise SdpStructureError(f"cell ({i},{j}) outside dimension")
                if not math.isfinite(c):
                    raise SdpStructureError("non-finite coefficient")


@dataclass
class FeasibilityOutcome:
    verdict: str                      # feasible | infeasible | inconclusive
    t_star: float
    witness: np.ndarray | None = None
    residuals: ResidualReport | None = None
    iterations: int = 0
    evidence: str = ""

    @property
    def feasible(self) -> bool:
        return self.verdict == "feasible"


# ---------------------------------------------------------------------------
# compile and SDPA export
# ---------------------------------------------------------------------------

def _cell_weight(i: int, j: int) -> float:
    return 1.0 if i == j else 0.5


def _class_rep_cells(problem: MomentProblem) -> list[tuple[int, int]]:
    n = problem.dim
    reps = []
    for cls in range(problem.n_classes):
        flat = int(problem.class_cells_flat(cls).min())
        i, j = divmod(flat, n)
        reps.append((min(i, j), max(i, j)))
    return reps


def compile(problem: MomentProblem,
            objective: Mapping[int, float] | None = None) -> AffineSdp:
    """Flatten a moment problem into cell-level equality rows.

    Bilinear factorisation families cannot be compiled; resolve them
    first (``factorisation.pin_linearize`` or the see-saw), or build a
    hierarchy without them.
    """
    if (problem.factor_pairs or problem.factor_triples) \
            and not problem.linear_factor_rows:
        raise SdpStructureError(
            "problem has bilinear factorisation families; linearize them via "
            "factorisation.pin_linearize / factorisation.seesaw first")
    if problem.flagged_bilinear:
        raise SdpStructureError(
            f"{len(problem.flagged_bilinear)} factorisation pairs are still "
            "bilinear after linearization; use factorisation.seesaw")
    n = problem.dim
    reps = _class_rep_cells(problem)
    rows: list[SdpRow] = []
    # Hankel ties: every upper-triangle cell equals its class representative
    for cls in range(problem.n_classes):
        ri, rj = reps[cls]
        for flat in sorted(set(problem.class_cells_flat(cls).tolist())):
            i, j = divmod(flat, n)
            if i > j or (i, j) == (ri, rj):
                continue
            rows.append(SdpRow(
                ((min(i, j), max(i, j)), (ri, rj)),
                (_cell_weight(i, j), -_cell_weight(ri, rj)), 0.0))
    for cls, val in sorted(problem.pinned.items()):
        ri, rj = reps[cls]
        rows.append(SdpRow(((ri, rj),), (_cell_weight(ri, rj),), float(val)))
    for row in problem.active_rows():
        cells = tuple(reps[c] for c in row.classes)
        coeffs = tuple(co * _cell_weight(*reps[c])
                       for c, co in zip(row.classes, row.coeffs))
        rows.append(SdpRow(cells, coeffs, row.rhs))
    obj_cells: tuple = ()
    obj_coeffs: tuple = ()
    mode = "feasibility"
    if objective is not None:
        mode = "maximize_linear"
        obj_cells = tuple(reps[c] for c in sorted(objective))
        obj_coeffs = tuple(objective[c] * _cell_weight(*reps[c])
                           for c in sorted(objective))
    return AffineSdp(dim=n, rows=tuple(rows), objective=mode,
                     objective_cells=obj_cells, objective_coeffs=obj_coeffs,
                     problem=problem)


def export_sdpa(s: AffineSdp, path: str) -> None:
    """SDPA sparse file: the PSD matrix X is constrained by
    <F_k, X> = b_k with F_0 the objective (maximised); one block."""
    lines = [str(len(s.rows)), "1", str(s.dim),
             " ".join(_fmt(r.rhs) for r in s.rows)]
    for (i, j), c in zip(s.objective_cells, s.objective_coeffs):
        lines.append(f"0 1 {i + 1} {j + 1} {_fmt(c)}")
    for k, row in enumerate(s.rows, start=1):
        for (i, j), c in zip(row.cells, row.coeffs):
            lines.append(f"{k} 1 {i + 1} {j + 1} {_fmt(c)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _fmt(v: float) -> str:
    return f"{v:.16e}"


def parse_sdpa(path: str) -> AffineSdp:
    """Inverse of :func:`export_sdpa` (round-trips bit-exactly)."""
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("*")]
    m = int(raw[0])
    nblock = int(raw[1])
    if nblock != 1:
        raise SdpStructureError("only single-block files are produced here")
    dim = int(raw[2].split()[0])
    rhs = [float(t) for t in raw[3].split()] if m else []
    if len(rhs) != m:
        raise SdpStructureError(f"expected {m} RHS entries, got {len(rhs)}")
    cells: list[list[tuple[int, int]]] = [[] for _ in range(m + 1)]
    coeffs: list[list[float]] = [[] for _ in range(m + 1)]
    for ln in raw[4:]:
        k_s, b_s, i_s, j_s, v_s = ln.split()
        k, b, i, j = int(k_s), int(b_s), int(i_s) - 1, int(j_s) - 1
        if b != 1 or not 0 <= k <= m:
            raise SdpStructureError(f"bad entry line {ln!r}")
        cells[k].append((i, j))
        coeffs[k].append(float(v_s))
    rows = tuple(SdpRow(tuple(cells[k]), tuple(coeffs[k]), rhs[k - 1])
                 for k in range(1, m + 1))
    objective = "maximize_linear" if cells[0] else "feasibility"
    return AffineSdp(dim=dim, rows=rows, objective=objective,
                     objective_cells=tuple(cells[0]),
                     objective_coeffs=tuple(coeffs[0]))


# ---------------------------------------------------------------------------
# PSD projection
# ---------------------------------------------------------------------------

def project_psd(M: np.ndarray, sym_tol: float = 1e-10) -> np.ndarray:
    """Frobenius-nearest PSD matrix (eigenvalue clamp at zero)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("need a square matrix")
    if np.abs(M - M.T).max() > sym_tol:
        raise ValueError("matrix is not symmetric")
    w, v = np.linalg.eigh((M + M.T) / 2)
    out = (v * w.clip(min=0.0)) @ v.T
    return (out + out.T) / 2


# ---------------------------------------------------------------------------
# Class-space machinery
# ---------------------------------------------------------------------------

class _ClassSystem:
    """Affine structure of a moment problem in class coordinates."""

    def __init__(self, problem: MomentProblem):
        self.problem = problem
        self.n = problem.dim
        self.k = problem.n_classes
        self.cell_class = problem.cell_class
        flat = self.cell_class.reshape(-1)
        self.counts = np.bincount(flat, minlength=self.k).astype(float)
        self.known = np.full(self.k, np.nan)
        self.contradiction: str | None = None
        for cls, val in problem.pinned.items():
            self.known[cls] = val
        self._rows = [(np.asarray(r.classes, dtype=int),
                       np.asarray(r.coeffs, dtype=float), r.rhs, r.family)
                      for r in problem.active_rows()]
        self._propagate()
        self.free = np.flatnonzero(np.isnan(self.known))
        self.free_pos = {int(c): i for i, c in enumerate(self.free)}
        self.R, self.b = self._reduced_rows()
        self._proj_ready = False

    # -- presolve ------------------------------------------------------------

    def _propagate(self) -> None:
        pending = list(self._rows)
        self._pending = []
        progress = True
        while progress and self.contradiction is None:
            progress = False
            remaining = []
            for classes, coeffs, rhs, family in pending:
                vals = self.known[classes]
                unknown = np.isnan(vals)
                n_unk = int(unknown.sum())
                if n_unk == 0:
                    resid = float(np.dot(coeffs, vals) - rhs)
                    if abs(resid) > LINEAR_TOL:
                        self.contradiction = self._row_evidence(
                            classes, coeffs, rhs, family, resid)
                        return
                    progress = True
                elif n_unk == 1:
                    i = int(np.flatnonzero(unknown)[0])
                    rest = float(np.dot(coeffs[~unknown], vals[~unknown]))
                    if coeffs[i] == 0.0:
                        if abs(rhs - rest) > LINEAR_TOL:
                            self.contradiction = self._row_evidence(
                                classes, coeffs, rhs, family, rest - rhs)
                            return
                        progress = True
                        continue
                    self.known[classes[i]] = (rhs - rest) / coeffs[i]
                    progress = True
                else:
                    remaining.append((classes, coeffs, rhs, family))
            pending = remaining
        self._pending = pending

    def _row_evidence(self, classes, coeffs, rhs, family, resid) -> str:
        from .words import render_word

        terms = " + ".join(
            f"{c:g}*G[{render_word(self.problem.representative_key(int(k)))}]"
            f"(={self.known[int(k)]:.6g})"
            for k, c in zip(classes, coeffs))
        return (f"violated {family} row: {terms} = {rhs:g} "
                f"(residual {resid:.3e})")

    def _reduced_rows(self):
        rows = []
        rhs = []
        for classes, coeffs, rhs0, _family in self._pending:
            vals = self.known[classes]
            unknown = np.isnan(vals)
            r = np.zeros(len(self.free))
            for cls, co in zip(classes[unknown], coeffs[unknown]):
                r[self.free_pos[int(cls)]] += co
            rows.append(r)
            rhs.append(rhs0 - float(np.dot(coeffs[~unknown], vals[~unknown])))
        if rows:
            return np.asarray(rows), np.asarray(rhs)
        return np.zeros((0, len(self.free))), np.zeros(0)

    # -- geometry ------------------------------------------------------------

    def assemble(self, y_free: np.ndarray) -> np.ndarray:
        y = np.where(np.isnan(self.known), 0.0, self.known)
        y[self.free] = y_free
        return y[self.cell_class]

    def class_average(self, X: np.ndarray) -> np.ndarray:
        sums = np.bincount(self.cell_class.reshape(-1),
                           weights=X.reshape(-1), minlength=self.k)
        return sums / self.counts

    def _prepare_projection(self) -> None:
        if self._proj_ready:
            return
        W_inv = 1.0 / self.counts[self.free]
        if self.R.shape[0]:
            M = self.R * W_inv[None, :]
            gram = M @ self.R.T
            self._corr = W_inv[:, None] * (self.R.T @ np.linalg.pinv(gram))
        else:
            self._corr = None
        self._proj_ready = True

    def project_affine(self, X: np.ndarray) -> np.ndarray:
        """Frobenius projection onto the affine set (pins, propagated
        values, reduced rows)."""
        self._prepare_projection()
        a = self.class_average(X)[self.free]
        if self._corr is not None:
            a = a - self._corr @ (self.R @ a - self.b)
        return self.assemble(a)

    def least_squares_consistent(self) -> tuple[bool, str]:
        if not self.R.shape[0]:
            return True, ""
        sol, *_ = np.linalg.lstsq(self.R, self.b, rcond=None)
        resid = self.R @ sol - self.b
        worst = int(np.abs(resid).argmax())
        if abs(resid[worst]) > LINEAR_TOL * (1.0 + np.abs(self.b).max()):
            return False, (f"linear system inconsistent: row residual "
                           f"{resid[worst]:.3e} after least squares")
        self._y0 = sol
        return True, ""

    def start_point(self) -> np.ndarray:
        y0 = getattr(self, "_y0", None)
        if y0 is None:
            y0 = np.zeros(len(self.free))
        return self.assemble(y0)

    # -- interlacing bound -----------------------------------------------------

    def known_submatrix_bound(self) -> tuple[float | None, list[int]]:
        """Min eigenvalue of the largest greedy principal submatrix whose
        entries are all determined; an upper bound on the phase-1 value."""
        kmask = ~np.isnan(self.known)
        cell_known = kmask[self.cell_class]
        order = np.argsort(-cell_known.sum(axis=1))
        chosen: list[int] = []
        for i in order:
            if cell_known[i, i] and all(cell_known[i, j] for j in chosen):
                chosen.append(int(i))
        if not chosen:
            return None, []
        vals = np.where(kmask, self.known, 0.0)
        sub = vals[self.cell_class[np.ix_(chosen, chosen)]]
        return float(np.linalg.eigvalsh((sub + sub.T) / 2).min()), chosen


# ---------------------------------------------------------------------------
# Engines
# ---------------------------------------------------------------------------

def _outcome_feasible(problem, X, t, iters, evidence="") -> FeasibilityOutcome:
    rep = check_assignment(problem, MomentAssignment(problem, X))
    return FeasibilityOutcome("feasible", t_star=t, witness=X, residuals=rep,
                              iterations=iters, evidence=evidence)


def _cvxopt_phase1(cs: _ClassSystem, tol: float):
    """max t s.t. X(y) - t*1 >= 0, R y = b; deterministic interior point."""
    n, nf = cs.n, len(cs.free)
    nvar = nf + 1
    # G columns (column-major vec of the full matrix)
    entries_i: list[int] = []
    entries_j: list[int] = []
    entries_v: list[float] = []
    for col, cls in enumerate(cs.free):
        cells = cs.problem.class_cells_flat(int(cls))
        for flat in set(cells.tolist()):
            i, j = divmod(flat, n)
            entries_i.append(int(j * n + i))
            entries_j.append(col + 1)
            entries_v.append(-1.0)
    for d in range(n):
        entries_i.append(d * n + d)
        entries_j.append(0)
        entries_v.append(1.0)
    G = cvxopt.spmatrix(entries_v, entries_i, entries_j, (n * n, nvar))
    X_known = cs.assemble(np.zeros(nf))
    h = cvxopt.matrix(X_known.T.reshape(-1).astype(float))
    c = cvxopt.matrix([-1.0] + [0.0] * nf)
    kwargs = {}
    if cs.R.shape[0]:
        # full-row-rank reduction of the equality system
        q, r, piv = scipy.linalg.qr(cs.R.T, mode="economic", pivoting=True)
        rank = int((np.abs(np.diag(r)) > 1e-11 * max(1.0, abs(r[0, 0]))).sum())
        keep = piv[:rank]
        A = np.zeros((rank, nvar))
        A[:, 1:] = cs.R[keep]
        kwargs["A"] = cvxopt.matrix(A)
        kwargs["b"] = cvxopt.matrix(cs.b[keep])
    old = dict(cvxopt.solvers.options)
    cvxopt.solvers.options.update({"show_progress": False,
                                   "abstol": min(tol * 1e-2, 1e-8),
                                   "reltol": 1e-8,
                                   "feastol": 1e-8, "maxiters": 100})
    try:
        sol = cvxopt.solvers.conelp(c, G, h, dims={"l": 0, "q": [], "s": [n]},
                                    **kwargs)
    finally:
        cvxopt.solvers.options.clear()
        cvxopt.solvers.options.update(old)
    if sol["status"] not in ("optimal", "unknown"):
        return None, None, sol["status"]
    x = np.array(sol["x"]).reshape(-1)
    t_star = float(x[0])
    X = cs.project_affine(cs.assemble(x[1:]))
    return t_star, X, sol["status"]


def _cvxopt_linear(cs: _ClassSystem, objective: Mapping[int, float], tol: float):
    """max sum objective[cls]*y[cls] s.t. X(y) >= 0, R y = b."""
    n, nf = cs.n, len(cs.free)
    entries_i: list[int] = []
    entries_j: list[int] = []
    entries_v: list[float] = []
    for col, cls in enumerate(cs.free):
        cells = cs.problem.class_cells_flat(int(cls))
        for flat in set(cells.tolist()):
            i, j = divmod(flat, n)
            entries_i.append(int(j * n + i))
            entries_j.append(col)
            entries_v.append(-1.0)
    G = cvxopt.spmatrix(entries_v, entries_i, entries_j, (n * n, nf))
    X_known = cs.assemble(np.zeros(nf))
    h = cvxopt.matrix(X_known.T.reshape(-1).astype(float))
    cvec = np.zeros(nf)
    fixed_part = 0.0
    for cls, co in objective.items():
        if cls in cs.free_pos:
            cvec[cs.free_pos[cls]] -= co
        elif not np.isnan(cs.known[cls]):
            fixed_part += co * cs.known[cls]
        else:  # pragma: no cover - objective classes are always indexed
            raise SdpStructureError(f"objective references unknown class {cls}")
    c = cvxopt.matrix(cvec)
    kwargs = {}
    if cs.R.shape[0]:
        q, r, piv = scipy.linalg.qr(cs.R.T, mode="economic", pivoting=True)
        rank = int((np.abs(np.diag(r)) > 1e-11 * max(1.0, abs(r[0, 0]))).sum())
        keep = piv[:rank]
        kwargs["A"] = cvxopt.matrix(cs.R[keep])
        kwargs["b"] = cvxopt.matrix(cs.b[keep])
    old = dict(cvxopt.solvers.options)
    cvxopt.solvers.options.update({"show_progress": False,
                                   "abstol": min(tol * 1e-2, 1e-8),
                                   "reltol": 1e-8,
                                   "feastol": 1e-8, "maxiters": 100})
    try:
        sol = cvxopt.solvers.conelp(c, G, h, dims={"l": 0, "q": [], "s": [n]},
                                    **kwargs)
    finally:
        cvxopt.solvers.options.clear()
        cvxopt.solvers.options.update(old)
    if sol["status"] not in ("optimal", "unknown"):
        return None, None, sol["status"]
    y = np.array(sol["x"]).reshape(-1)
    value = fixed_part - float(np.dot(np.array(c).reshape(-1), y))
    return value, cs.assemble(y), sol["status"]


def _dykstra(cs: _ClassSystem, tol: float, max_iter: int,
             check_every: int = 25):
    """Alternating projections with Dykstra correction between the affine
    set and the PSD cone; returns (witness, t, iterations) on success."""
    X = cs.project_affine(cs.start_point())
    P = np.zeros_like(X)
    best_t = -np.inf
    for it in range(1, max_iter + 1):
        Y = project_psd(X + P, sym_tol=np.inf)
        P = X + P - Y
        X = cs.project_affine(Y)
        if it % check_every == 0 or it == max_iter:
            lam = float(np.linalg.eigvalsh(X).min())
            best_t = max(best_t, lam)
            if lam >= -10 * tol:
                return X, lam, it
    return None, best_t, max_iter


def _ascent_estimate(cs: _ClassSystem, iters: int = 300) -> float:
    """Projected supergradient ascent on the min eigenvalue; returns the
    best value reached (a lower bound on the phase-1 optimum).  Skipped
    (returns -inf) on problems too large for the dense projector."""
    if len(cs.free) > 4000 or cs.R.shape[0] > 4000:
        return -np.inf
    cs._prepare_projection()
    if cs.R.shape[0]:
        ker_proj = np.linalg.pinv(cs.R @ cs.R.T)
    X = cs.project_affine(cs.start_point())
    best = -np.inf
    y = cs.class_average(X)[cs.free]
    scale = max(1.0, float(np.abs(cs.known[~np.isnan(cs.known)]).max()))
    for k in range(1, iters + 1):
        X = cs.project_affine(cs.assemble(y))
        w, v = np.linalg.eigh(X)
        best = max(best, float(w[0]))
        g_full = np.bincount(cs.cell_class.reshape(-1),
                             weights=np.outer(v[:, 0], v[:, 0]).reshape(-1),
                             minlength=cs.k)
        g = g_full[cs.free]
        if cs.R.shape[0]:
            g = g - cs.R.T @ (ker_proj @ (cs.R @ g))
        norm = np.linalg.norm(g)
        if norm < 1e-14:
            break
        y = y + (0.5 * scale / math.sqrt(k)) * g / norm
    return best


def propagated_values(problem: MomentProblem) -> tuple[np.ndarray, str | None]:
    """Class values forced by pins plus linear propagation (NaN where
    free), and the first contradiction found, if any."""
    cs = _ClassSystem(problem)
    return cs.known.copy(), cs.contradiction


def solve_feasibility(target: AffineSdp | MomentProblem,
                      tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER,
                      infeasibility_margin: float = DEFAULT_MARGIN,
                      engine: str = "auto") -> FeasibilityOutcome:
    """Phase-1 feasibility of a compiled problem.

    ``engine`` is one of ``auto`` (interior point when the problem is
    small, projections otherwise), ``cvxopt``, or ``projection``.
    """
    if isinstance(target, AffineSdp):
        if target.problem is None:
            raise SdpStructureError(
                "this AffineSdp carries no moment-problem structure (parsed "
                "from a file?); solve the original problem or use an "
                "external SDPA solver")
        problem = target.problem
    else:
        problem = target
    if (problem.factor_pairs or problem.factor_triples) \
            and not problem.linear_factor_rows:
        raise SdpStructureError(
            "bilinear factorisation families present; linearize or see-saw first")
    cs = _ClassSystem(problem)
    if cs.contradiction is not None:
        return FeasibilityOutcome("infeasible", t_star=-np.inf,
                                  evidence=cs.contradiction)
    ok, msg = cs.least_squares_consistent()
    if not ok:
        return FeasibilityOutcome("infeasible", t_star=-np.inf, evidence=msg)
    bound, chosen = cs.known_submatrix_bound()
    if bound is not None and bound < -infeasibility_margin:
        return FeasibilityOutcome(
            "infeasible", t_star=bound,
            evidence=(f"pinned principal submatrix on {len(chosen)} words has "
                      f"min eigenvalue {bound:.6g} (interlacing bound)"))
    if len(cs.free) == 0:
        X = cs.assemble(np.zeros(0))
        lam = float(np.linalg.eigvalsh(X).min())
        if lam >= -tol:
            return _outcome_feasible(problem, X, lam, 0,
                                     "fully determined by the linear constraints")
        if lam < -infeasibility_margin:
            return FeasibilityOutcome(
                "infeasible", t_star=lam,
                evidence="fully determined matrix is not PSD")
        return FeasibilityOutcome("inconclusive", t_star=lam,
                                  evidence="fully determined, min eigenvalue "
                                           "in the inconclusive band")
    use_cvxopt = (engine == "cvxopt"
                  or (engine == "auto" and _HAVE_CVXOPT
                      and len(cs.free) <= CVXOPT_MAX_FREE
                      and cs.n <= CVXOPT_MAX_DIM))
    if use_cvxopt:
        if not _HAVE_CVXOPT:
            raise SdpStructureError("cvxopt engine requested but not installed")
        t_star, X, status = _cvxopt_phase1(cs, tol)
        if t_star is not None:
            if t_star >= -tol:
                lam = float(np.linalg.eigvalsh(X).min())
                if lam < -10 * tol:  # interior point drifted; re-project
                    X = project_psd(X)
                    X = cs.project_affine(X)
                    lam = float(np.linalg.eigvalsh(X).min())
                if lam >= -10 * tol:
                    return _outcome_feasible(problem, X, t_star, 0,
                                             f"interior point ({status})")
                return FeasibilityOutcome(
                    "inconclusive", t_star=t_star, iterations=0,
                    evidence="interior point reported feasibility but the "
                             "witness projection failed")
            if t_star < -infeasibility_margin:
                return FeasibilityOutcome(
                    "infeasible", t_star=t_star,
                    evidence=f"phase-1 optimum {t_star:.6g} (interior point)")
            return FeasibilityOutcome(
                "inconclusive", t_star=t_star,
                evidence="phase-1 optimum inside the inconclusive band")
        # interior point failed; fall through to projections
    budget = max_iter if engine == "projection" else min(max_iter, 2000)
    X, t_best, iters = _dykstra(cs, tol, budget)
    if X is not None:
        return _outcome_feasible(problem, X, t_best, iters,
                                 "alternating projections")
    t_hat = max(t_best, _ascent_estimate(cs))
    return FeasibilityOutcome(
        "inconclusive", t_star=t_hat, iterations=iters,
        evidence=(f"projection engine stalled; best phase-1 value reached "
                  f"{t_hat:.6g} (lower bound)"))


def maximize_linear(problem: MomentProblem, objective: Mapping[int, float],
                    tol: float = DEFAULT_TOL) -> tuple[float, np.ndarray]:
    """Maximise a linear functional of the moment matrix over the
    feasible set; returns (optimal value, witness matrix)."""
    if not _HAVE_CVXOPT:
        raise SdpStructureError("maximize_linear needs the cvxopt engine")
    cs = _ClassSystem(problem)
    if cs.contradiction is not None:
        raise SdpStructureError(f"infeasible problem: {cs.contradiction}")
    ok, msg = cs.least_squares_consistent()
    if not ok:
        raise SdpStructureError(f"infeasible problem: {msg}")
    value, X, status = _cvxopt_linear(cs, objective, tol)
    if value is None:
        raise SdpStructureError(f"interior point failed: {status}")
    return value, X
