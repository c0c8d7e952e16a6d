"""
Property campaigns over seeded random instances.

Every trial runs the whole analysis chain and records the slack of each
check (``>= 0`` means satisfied). Failures are recorded with the trial seed
and never abort the campaign.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .attacks import AttackParams, optimal_attack, random_qubit_scenario, random_violating_scenario
from .entropy import (
    chsh_min_entropy_bound,
    eve_marginals,
    min_entropy_from_distance,
    trace_distance,
    trace_distance_bound,
)
from .jordan import (
    aggregate_distance_bound,
    block_weights_and_scores,
    check_block_inequalities,
    eve_sign_operator,
    joint_block_diagonalize,
)
from .linalg import DEFAULT_TOL
from .scenario import (
    TSIRELSON,
    DegenerateDifference,
    QubitAssumptionViolated,
    Scenario,
    chsh_from_observables,
    chsh_value,
    source_geometry,
    validate,
)

MASK64 = (1 << 64) - 1

CHECK_NAMES = (
    "validation",
    "geometry",
    "chsh_formulas_agree",
    "tsirelson",
    "distance_bound",
    "min_entropy_bound",
    "sum_p",
    "sum_s",
    "witness",
    "tradeoff",
    "tight",
    "block_distance",
    "no_w_radicand",
    "distance<=helstrom",
    "helstrom<=aggregate",
    "aggregate<=concave",
)


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def trial_seed(seed: int, index: int) -> int:
    """Seed of trial ``index``; independent of the total trial count."""
    return splitmix64((splitmix64(seed & MASK64) + index) & MASK64)


@dataclass(frozen=True)
class CampaignConfig:
    trials: int = 1000
    seed: int = 0
    dim_b: int | Sequence[int] = (2, 3, 4)
    dim_e: int | Sequence[int] = (1, 2, 3, 4)
    tolerance: float = 1e-7

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if min(self.dims_b) < 2 or min(self.dims_e) < 1:
            raise ValueError("need dim_b >= 2 and dim_e >= 1")
        if not self.tolerance >= 0:
            raise ValueError("tolerance must be nonnegative")

    @property
    def dims_b(self) -> tuple[int, ...]:
        return (self.dim_b,) if isinstance(self.dim_b, int) else tuple(self.dim_b)

    @property
    def dims_e(self) -> tuple[int, ...]:
        return (self.dim_e,) if isinstance(self.dim_e, int) else tuple(self.dim_e)

    def dims_for(self, index: int) -> tuple[int, int]:
        combos = list(itertools.product(self.dims_b, self.dims_e))
        return combos[index % len(combos)]


@dataclass(frozen=True)
class Violation:
    seed: int
    check: str
    slack: float


@dataclass
class CampaignResult:
    trials_run: int
    violations: list[Violation]
    worst_slack_per_check: dict[str, float]
    rows: list[dict] = field(default_factory=list)
    runtime: float = field(default=0.0, compare=False)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "trials_run": self.trials_run,
            "violations": [{"seed": v.seed, "check": v.check, "slack": v.slack} for v in self.violations],
            "worst_slack_per_check": dict(self.worst_slack_per_check),
            "runtime_seconds": self.runtime,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def rows_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["seed", "dim_b", "dim_e", "s", "d", "bound", "slack"])
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        return buf.getvalue()


def check_scenario(s: Scenario, tol: float = DEFAULT_TOL) -> tuple[dict[str, float], dict]:
    """Slack of every check on one scenario, plus a summary row.

    Invalid scenarios only produce a ``validation`` entry; scenarios whose
    differences vanish skip the geometry-dependent checks.
    """
    slacks: dict[str, float] = {}
    issues = validate(s, tol)
    if issues:
        slacks["validation"] = -max(i.magnitude for i in issues)
        return slacks, {}
    slacks["validation"] = 0.0

    s_val = chsh_value(s, tol)
    e0, e1 = eve_marginals(s, tol)
    d = trace_distance(e0, e1)
    bound = trace_distance_bound(s_val)
    slacks["distance_bound"] = bound - d
    slacks["min_entropy_bound"] = min_entropy_from_distance(min(d, 1.0)) - chsh_min_entropy_bound(s_val)
    slacks["tsirelson"] = TSIRELSON - abs(s_val)
    row = {"s": s_val, "d": d, "bound": bound, "slack": bound - d}

    try:
        g = source_geometry(s, tol)
    except DegenerateDifference:
        return slacks, row
    except QubitAssumptionViolated as exc:
        slacks["geometry"] = -float(exc.dimension)
        return slacks, row
    slacks["geometry"] = 0.0
    slacks["chsh_formulas_agree"] = -abs(chsh_from_observables(s, g) - s_val)

    blocks = joint_block_diagonalize(s.obs_u, s.obs_v, tol)
    dec = block_weights_and_scores(s, g, blocks, tol)
    slacks["sum_p"] = -abs(dec.p_total - 1.0)
    slacks["sum_s"] = -abs(dec.s_total - s_val)
    u_e = eve_sign_operator(s, g, tol)
    for bc in check_block_inequalities(s, g, dec, u_e, tol):
        for c in bc.checks:
            slacks[c.name] = min(slacks.get(c.name, math.inf), c.slack)
        if bc.record.w_op is None:
            # without W the witness radicand must be nonpositive
            r = bc.record
            slacks["no_w_radicand"] = min(slacks.get("no_w_radicand", math.inf), r.p_k ** 2 - r.s_k ** 2 / 4.0)
    for link in aggregate_distance_bound(dec, s, g, tol).links:
        slacks[link.name] = link.slack
    return slacks, row


def run_campaign(c: CampaignConfig,
                 generator: Callable[[int, int, int], Scenario] = random_qubit_scenario,
                 keep_rows: bool = False) -> CampaignResult:
    start = time.perf_counter()
    worst: dict[str, float] = {}
    violations: list[Violation] = []
    rows = []
    for i in range(c.trials):
        seed = trial_seed(c.seed, i)
        dim_b, dim_e = c.dims_for(i)
        try:
            scen = generator(seed, dim_b, dim_e)
            slacks, row = check_scenario(scen)
        except Exception as exc:  # recorded, never fatal
            slacks, row = {"exception": -math.inf}, {}
            del exc
        for name, slack in slacks.items():
            worst[name] = min(worst.get(name, math.inf), slack)
            if slack < -c.tolerance:
                violations.append(Violation(seed, name, slack))
        if keep_rows and row:
            rows.append({"seed": seed, "dim_b": dim_b, "dim_e": dim_e, **row})
    violations.sort(key=lambda v: (v.seed, v.check))
    return CampaignResult(c.trials, violations, worst, rows, runtime=time.perf_counter() - start)


@dataclass
class MixtureCheck:
    weights: list[float]
    s_values: list[float]
    distances: list[float]
    avg_s: float
    avg_d: float
    rhs: float | None
    slack: float | None

    @property
    def applicable(self) -> bool:
        return self.rhs is not None

    def holds(self, tol: float = 1e-7) -> bool:
        return self.slack is None or self.slack >= -tol

    def to_dict(self) -> dict:
        return {
            "weights": self.weights, "s_values": self.s_values, "distances": self.distances,
            "avg_s": self.avg_s, "avg_d": self.avg_d, "rhs": self.rhs, "slack": self.slack,
            "applicable": self.applicable,
        }


def _check_weights(weights: Sequence[float], n: int) -> list[float]:
    w = [float(x) for x in weights]
    if len(w) != n or n == 0:
        raise ValueError(f"expected {n} weights, got {len(w)}")
    if any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
        raise ValueError("weights must be nonnegative and sum to 1")
    return w


def mixture_check_scenarios(components: Sequence[Scenario], weights: Sequence[float]) -> MixtureCheck:
    """Average distinguishability of a shared-randomness mixture against the averaged CHSH bound.

    The bound is only asserted when the averaged CHSH value is at least 2.
    """
    w = _check_weights(weights, len(components))
    s_vals, dists = [], []
    for scen in components:
        s_vals.append(chsh_value(scen))
        dists.append(trace_distance(*eve_marginals(scen)))
    avg_s = sum(q * x for q, x in zip(w, s_vals))
    avg_d = sum(q * x for q, x in zip(w, dists))
    if avg_s >= 2.0:
        rhs = trace_distance_bound(avg_s)
        slack = rhs - avg_d
    else:
        rhs = slack = None
    return MixtureCheck(w, s_vals, dists, avg_s, avg_d, rhs, slack)


def mixture_check(seeds: Sequence[int], weights: Sequence[float], dim_b: int, dim_e: int,
                  generator: Callable[[int, int, int], Scenario] = random_violating_scenario) -> MixtureCheck:
    """Mixture of seeded scenarios, one per component.

    Shared randomness may steer the source, Bob and Eve together, so every
    component keeps its own observables.
    """
    _check_weights(weights, len(seeds))
    return mixture_check_scenarios([generator(sd, dim_b, dim_e) for sd in seeds], weights)


def equality_audit(f_z_grid: Sequence[float]) -> dict:
    """Gap between trace distance and ``sqrt(2 - S^2/4)`` along the tight attack family."""
    entries = []
    for f in f_z_grid:
        if not 0.0 <= f <= 1.0:
            raise ValueError(f"f_z must lie in [0, 1], got {f!r}")
        scen = optimal_attack(AttackParams(float(f)))
        s_val = chsh_value(scen)
        d = trace_distance(*eve_marginals(scen))
        rhs = trace_distance_bound(s_val)
        entries.append({"f_z": float(f), "s": s_val, "d": d, "bound": rhs, "gap": abs(d - rhs)})
    return {"entries": entries, "max_gap": max((e["gap"] for e in entries), default=0.0)}
