"""
Full analysis of one scenario, as a single serializable report.

Degradations (invalid input, differences beyond a qubit, vanishing
differences) are reported in-band: the affected sections are ``None`` and a
warning explains why.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

from .entropy import SecrecyReport, robust_min_entropy_bound, secrecy_report
from .jordan import (
    aggregate_distance_bound,
    block_weights_and_scores,
    check_block_inequalities,
    eve_sign_operator,
    joint_block_diagonalize,
)
from .linalg import DEFAULT_TOL
from .scenario import (
    DegenerateDifference,
    QubitAssumptionViolated,
    Scenario,
    chsh_value,
    source_geometry,
    support_dimension,
    validate,
)

SCHEMA_VERSION = 1
CHAIN_TOL = 1e-7
CSV_FIELDS = ("s", "d", "bound", "h_min", "slack")


@dataclass
class AnalysisReport:
    validation: dict
    qubit_assumption: dict | None = None
    s_value: float | None = None
    alpha: float | None = None
    beta: float | None = None
    phi: float | None = None
    secrecy: SecrecyReport | None = None
    blocks: dict | None = None
    chain: list[dict] | None = None
    robust: dict | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        """True when the qubit assumption holds and every checked link of the bound holds."""
        if self.qubit_assumption is None or not self.qubit_assumption["satisfied"]:
            return False
        if self.secrecy is None or self.chain is None or self.secrecy.bound_slack < -CHAIN_TOL:
            return False
        return all(link["slack"] >= -CHAIN_TOL for link in self.chain)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "validation": self.validation,
            "qubit_assumption": self.qubit_assumption,
            "s_value": self.s_value,
            "alpha": self.alpha,
            "beta": self.beta,
            "phi": self.phi,
            "secrecy": None if self.secrecy is None else self.secrecy.to_dict(),
            "blocks": self.blocks,
            "chain": self.chain,
            "robust": self.robust,
            "certified": self.certified,
            "warnings": list(self.warnings),
        }

    def to_json(self, indent: int | None = 2) -> str:
        # json writes floats with repr, the shortest string that round-trips exactly.
        return json.dumps(self.to_dict(), indent=indent, allow_nan=False)

    def summary_row(self) -> dict:
        sec = self.secrecy
        if sec is None:
            return dict.fromkeys(CSV_FIELDS)
        return {"s": sec.s_value, "d": sec.trace_distance, "bound": sec.bound_rhs,
                "h_min": sec.min_entropy, "slack": sec.bound_slack}

    def to_csv(self) -> str:
        return rows_to_csv([self.summary_row()], CSV_FIELDS)


def rows_to_csv(rows, fields) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(row.get(k)) for k in fields})
    return buf.getvalue()


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def analyze(s: Scenario, epsilon: float | None = None, tol: float = DEFAULT_TOL) -> AnalysisReport:
    issues = validate(s, tol)
    rep = AnalysisReport(validation={"valid": not issues, "issues": [i.to_dict() for i in issues]})
    if issues:
        rep.warnings.append("scenario is not valid; no quantities computed")
        return rep

    s_val = chsh_value(s, tol)
    rep.s_value = s_val
    rep.secrecy = secrecy_report(s, s_val, tol)
    if epsilon is not None:
        raw = robust_min_entropy_bound(s_val, epsilon)
        rep.robust = {"epsilon": float(epsilon), "bound": max(raw, 0.0), "raw_bound": raw,
                      "slack": rep.secrecy.min_entropy - raw}

    dim = support_dimension(s)[0]
    try:
        g = source_geometry(s, tol)
    except QubitAssumptionViolated as exc:
        rep.qubit_assumption = {"satisfied": False, "support_dim": exc.dimension}
        rep.warnings.append(str(exc))
        rep.warnings.append("the CHSH min-entropy bound does not apply to this scenario")
        return rep
    except DegenerateDifference as exc:
        rep.qubit_assumption = {"satisfied": True, "support_dim": dim}
        rep.warnings.append(f"{exc}; geometry and block analysis unavailable")
        return rep

    rep.qubit_assumption = {"satisfied": True, "support_dim": g.support_dim}
    rep.alpha, rep.beta, rep.phi = g.alpha, g.beta, g.phi
    dec = block_weights_and_scores(s, g, joint_block_diagonalize(s.obs_u, s.obs_v, tol), tol)
    checks = check_block_inequalities(s, g, dec, eve_sign_operator(s, g, tol), tol)
    rep.blocks = {"p_total": dec.p_total, "s_total": dec.s_total,
                  "blocks": [c.to_dict() for c in checks]}
    rep.chain = aggregate_distance_bound(dec, s, g, tol).to_list()
    if s_val < 2.0:
        rep.warnings.append("S is below the classical value 2; the min-entropy bound is trivial")
    return rep
