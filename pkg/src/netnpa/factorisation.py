"""Handling of the bilinear factorisation families.

The source-independence constraint G[alpha, gamma] = G[alpha, 1] *
G[1, gamma] is bilinear, so it cannot enter an SDP directly.  Three
tools deal with it:

``pin_linearize``
    the rigorous pass: wherever both factors are already forced by the
    pins (directly or through linear propagation), the pair becomes an
    exact linear row.  An infeasibility found afterwards is a genuine
    certificate.

``seesaw``
    the feasibility-seeking heuristic for the remaining pairs: freeze
    the factor scalars, solve the linearized SDP, re-read the scalars
    from the witness, repeat.  It never reports infeasible on its own
    (a stalled bilinear search proves nothing); a feasible verdict is
    only returned when the final witness passes the exact verifier.

``verify_factorisation``
    the exact check, max over pairs of |G_prod - G_row*G_col|.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .moment import (
    FactorConstraint,
    MomentAssignment,
    MomentProblem,
    Row,
)
from . import sdp as _sdp


@dataclass
class SeesawState:
    """Scalar estimates for the unpinned factor cells plus history."""

    scalars: dict[int, float]          # class id -> current estimate
    rounds: int = 0
    history: list[float] = None        # per-round max factor residual

    def __post_init__(self):
        if self.history is None:
            self.history = []

    def dump(self) -> str:
        lines = [f"seesaw rounds: {self.rounds}"]
        lines += [f"  round {i}: max factor residual {r:.3e}"
                  for i, r in enumerate(self.history, 1)]
        return "\n".join(lines)


def pin_linearize(problem: MomentProblem) -> MomentProblem:
    """Turn every factor pair with both factors determined into a linear row.

    Determination includes values reached by propagating the pins through
    the completeness rows (e.g. orthogonality zeros), not only literal
    pins.  Remaining pairs are left attached and flagged as bilinear.
    """
    if not (problem.factor_pairs or problem.factor_triples):
        return problem
    known, contradiction = _sdp.propagated_values(problem)
    # a contradiction among pins alone is legitimate output: the linearized
    # problem will expose it to the solver
    rows: list[Row] = list(problem.linear_factor_rows)
    flagged: list[FactorConstraint] = []
    for fc in problem.factor_pairs + problem.factor_triples:
        lhs, rhs = known[fc.cls_row], known[fc.cls_col]
        if not np.isnan(lhs) and not np.isnan(rhs):
            rows.append(Row((fc.cls_prod,), (1.0,), float(lhs * rhs),
                            "factorisation (linearized)"))
        elif not np.isnan(lhs):
            if lhs == 0.0:
                rows.append(Row((fc.cls_prod,), (1.0,), 0.0,
                                "factorisation (linearized)"))
            else:
                rows.append(Row((fc.cls_prod, fc.cls_col), (1.0, -float(lhs)),
                                0.0, "factorisation (half-linearized)"))
        elif not np.isnan(rhs):
            if rhs == 0.0:
                rows.append(Row((fc.cls_prod,), (1.0,), 0.0,
                                "factorisation (linearized)"))
            else:
                rows.append(Row((fc.cls_prod, fc.cls_row), (1.0, -float(rhs)),
                                0.0, "factorisation (half-linearized)"))
        else:
            flagged.append(fc)
    return replace(problem, linear_factor_rows=tuple(rows),
                   flagged_bilinear=tuple(flagged))


def verify_factorisation(assignment: MomentAssignment,
                         pairs=None) -> float:
    """Max residual |G_prod - G_row * G_col| over the factor families."""
    problem = assignment.problem
    if pairs is None:
        pairs = problem.factor_pairs + problem.factor_triples
    vals = assignment.class_values()
    worst = 0.0
    for fc in pairs:
        worst = max(worst, abs(vals[fc.cls_prod]
                               - vals[fc.cls_row] * vals[fc.cls_col]))
    return float(worst)


def _scalar_rows(problem: MomentProblem, scalars: dict[int, float]) -> list[Row]:
    rows = []

    def tie(prod: int, other: int, s: float) -> Row:
        if s == 0.0:
            return Row((prod,), (1.0,), 0.0, "seesaw")
        return Row((prod, other), (1.0, -s), 0.0, "seesaw")

    for fc in problem.flagged_bilinear:
        s_row = scalars.get(fc.cls_row)
        s_col = scalars.get(fc.cls_col)
        if s_row is not None:
            rows.append(tie(fc.cls_prod, fc.cls_col, s_row))
        if s_col is not None:
            rows.append(tie(fc.cls_prod, fc.cls_row, s_col))
        if s_row is not None and s_col is not None:
            rows.append(Row((fc.cls_prod,), (1.0,), s_row * s_col, "seesaw"))
    return rows


def seesaw(problem: MomentProblem, init: dict[int, float] | None = None,
           rounds: int = 25, tol: float = 1e-8,
           verify_tol: float = 1e-6,
           engine: str = "auto") -> tuple[_sdp.FeasibilityOutcome, SeesawState]:
    """Alternating scalar-freeze heuristic for unresolved factor pairs.

    ``init`` maps factor-cell class ids to starting scalars; without it
    the scalars are read from a witness of the problem *without* the
    bilinear pairs (the standard-relaxation warm start), falling back to
    0.5.  Feasible is returned only when the final witness passes
    :func:`verify_factorisation` at ``verify_tol``; infeasible only when
    the rigorous linearized subproblem already is.
    """
    lp = pin_linearize(problem)
    base = replace(lp, flagged_bilinear=())  # linearized rows only
    out = _sdp.solve_feasibility(base, engine=engine)
    if out.verdict == "infeasible":
        # rigorous: inherited from the pinned-linearized subproblem
        return out, SeesawState(scalars={}, rounds=0)
    if not lp.flagged_bilinear:
        if out.verdict == "feasible":
            resid = verify_factorisation(
                MomentAssignment(problem, out.witness))
            if resid <= verify_tol:
                return out, SeesawState(scalars={}, rounds=0)
            return replace(out, verdict="inconclusive",
                           evidence=f"witness violates factorisation by "
                                    f"{resid:.3e}"), SeesawState({}, 0)
        return out, SeesawState(scalars={}, rounds=0)

    scalar_classes = sorted({c for fc in lp.flagged_bilinear
                             for c in (fc.cls_row, fc.cls_col)})
    scalars: dict[int, float] = {c: 0.5 for c in scalar_classes}
    if out.verdict == "feasible" and out.witness is not None:
        vals = MomentAssignment(problem, out.witness).class_values()
        scalars = {c: float(np.clip(vals[c], 0.0, 1.0)) for c in scalar_classes}
    if init:
        scalars.update(init)
    state = SeesawState(scalars=scalars)
    last = None
    for rnd in range(1, rounds + 1):
        state.rounds = rnd
        trial = replace(lp, flagged_bilinear=(),
                        linear_factor_rows=lp.linear_factor_rows
                        + tuple(_scalar_rows(lp, scalars)))
        inner = _sdp.solve_feasibility(trial, engine=engine)
        if inner.verdict != "feasible":
            return _sdp.FeasibilityOutcome(
                "inconclusive", t_star=inner.t_star,
                evidence=f"see-saw round {rnd}: inner solve "
                         f"{inner.verdict} ({inner.evidence})"), state
        assignment = MomentAssignment(problem, inner.witness)
        resid = verify_factorisation(assignment)
        state.history.append(resid)
        if resid <= verify_tol:
            return replace(inner, evidence=f"see-saw converged in {rnd} "
                                           f"round(s)"), state
        vals = assignment.class_values()
        new_scalars = {c: float(np.clip(vals[c], 0.0, 1.0))
                       for c in scalar_classes}
        drift = max(abs(new_scalars[c] - scalars[c]) for c in scalar_classes)
        scalars = new_scalars
        if last is not None and drift < tol:
            return _sdp.FeasibilityOutcome(
                "inconclusive", t_star=inner.t_star,
                evidence=f"see-saw fixed point after {rnd} rounds with "
                         f"factorisation residual {resid:.3e}"), state
        last = scalars
    return _sdp.FeasibilityOutcome(
        "inconclusive", t_star=0.0,
        evidence=f"see-saw round cap ({rounds}) reached; last residual "
                 f"{state.history[-1]:.3e}"), state
