"""
Eve-side quantities: marginals, trace distance and the min-entropy bounds.

All bound functions return the raw formula value. Clamping to the physical
range (entropies are nonnegative) happens only when building reports, so a
negative value stays visible to callers that want to detect it.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize

from . import linalg
from .linalg import DEFAULT_TOL, partial_trace, trace_norm
from .scenario import Scenario, require_valid, support_dimension


def eve_marginals(s: Scenario, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eve's reduced states for ``a = 0`` and ``a = 1`` at ``x = 0``."""
    require_valid(s, tol)
    return (
        partial_trace(s.rho, s.dim_b, s.dim_e, "E"),
        partial_trace(s.rho_p, s.dim_b, s.dim_e, "E"),
    )


def trace_distance(a, b) -> float:
    a = linalg.as_matrix(a, "a")
    b = linalg.as_matrix(b, "b")
    if a.shape != b.shape:
        raise linalg.DimensionError(f"trace distance of mismatched shapes {a.shape} and {b.shape}")
    return 0.5 * trace_norm(a - b)


def min_entropy_from_distance(d: float, tol: float = DEFAULT_TOL) -> float:
    """Min entropy (bits) of an equiprobable bit whose two conditional states are ``d`` apart."""
    if not (-tol <= d <= 1.0 + tol) or math.isnan(d):
        raise ValueError(f"trace distance must lie in [0, 1], got {d!r}")
    d = min(max(d, 0.0), 1.0)
    return 1.0 - math.log2(1.0 + d)


def trace_distance_bound(s_value: float) -> float:
    """Largest trace distance compatible with a CHSH value: ``sqrt(2 - S^2/4)``."""
    return math.sqrt(max(0.0, 2.0 - s_value * s_value / 4.0))


def robust_min_entropy_bound(s_value: float, epsilon: float) -> float:
    """Min-entropy bound when the differences are only ``epsilon``-close to a qubit."""
    if epsilon < 0 or math.isnan(epsilon):
        raise ValueError(f"epsilon must be nonnegative, got {epsilon!r}")
    return 1.0 - math.log2(1.0 + trace_distance_bound(s_value - 4.0 * epsilon) + epsilon)


def chsh_min_entropy_bound(s_value: float) -> float:
    """``1 - log2(1 + sqrt(2 - S^2/4))``; nondecreasing in S on [2, 2 sqrt 2]."""
    return 1.0 - math.log2(1.0 + math.sqrt(max(0.0, 2.0 - s_value * s_value / 4.0)))


@dataclass(frozen=True)
class SecrecyReport:
    trace_distance: float
    min_entropy: float
    s_value: float
    bound_rhs: float
    bound_slack: float
    min_entropy_bound: float
    raw_bound_rhs: float
    raw_min_entropy_bound: float

    def to_dict(self) -> dict:
        return asdict(self)


def secrecy_report(s: Scenario, s_value: float, tol: float = DEFAULT_TOL) -> SecrecyReport:
    """Trace distance, min entropy and the CHSH bounds for one scenario.

    ``bound_rhs`` is ``sqrt(2 - S^2/4)`` clipped to the trace-distance range
    [0, 1]; ``min_entropy_bound`` is clipped at 0. The raw values keep the
    unclipped formulas.
    """
    e0, e1 = eve_marginals(s, tol)
    d = min(max(trace_distance(e0, e1), 0.0), 1.0)
    raw_rhs = 2.0 - s_value * s_value / 4.0
    rhs = trace_distance_bound(s_value)
    raw_h = chsh_min_entropy_bound(s_value)
    return SecrecyReport(
        trace_distance=d,
        min_entropy=min_entropy_from_distance(d),
        s_value=s_value,
        bound_rhs=min(rhs, 1.0),
        bound_slack=min(rhs, 1.0) - d,
        min_entropy_bound=max(raw_h, 0.0),
        raw_bound_rhs=raw_rhs,
        raw_min_entropy_bound=raw_h,
    )


def _check_candidate(op, name: str, tol: float) -> None:
    op = linalg.as_matrix(op, name)
    if abs(complex(np.trace(op))) > tol:
        raise ValueError(f"{name} must be traceless")
    if linalg.hermiticity_error(op) > tol:
        raise ValueError(f"{name} must be Hermitian")
    w = np.linalg.eigvalsh(0.5 * (op + linalg.dagger(op)))
    if int(np.sum(np.abs(w) > tol)) > 2:
        raise ValueError(f"{name} has rank above 2")
    if abs(0.5 * float(np.sum(np.abs(w))) - 1.0) > tol:
        raise ValueError(f"{name} must have half trace norm 1")


def qubit_deviation(s: Scenario, z_tilde, x_tilde, alpha_t: float, beta_t: float, tol: float = 1e-8) -> float:
    """How far the state differences are from ``alpha_t Z~`` and ``beta_t X~``.

    Any admissible candidate pair (traceless, rank at most 2 on a common
    subspace, half trace norm 1) gives a sound epsilon for
    :func:`robust_min_entropy_bound`; better candidates give smaller values.
    """
    _check_candidate(z_tilde, "z_tilde", tol)
    _check_candidate(x_tilde, "x_tilde", tol)
    joint = np.hstack([linalg.as_matrix(z_tilde), linalg.as_matrix(x_tilde)])
    sv = np.linalg.svd(joint, compute_uv=False)
    if int(np.sum(sv > 1e-6)) > 2:
        raise ValueError("z_tilde and x_tilde do not share a two-dimensional support")
    for name, t in (("alpha_t", alpha_t), ("beta_t", beta_t)):
        if not (-tol <= t <= 1.0 + tol):
            raise ValueError(f"{name} must lie in [0, 1], got {t!r}")
    return max(
        0.5 * trace_norm((s.rho - s.rho_p) - alpha_t * np.asarray(z_tilde)),
        0.5 * trace_norm((s.sigma - s.sigma_p) - beta_t * np.asarray(x_tilde)),
    )


def nearest_qubit_candidate(delta) -> tuple[np.ndarray, float]:
    """Heuristic rank-2 traceless approximation of a difference operator.

    Keeps the two largest-magnitude eigendirections, removes the trace and
    rescales to half trace norm 1. Returns ``(operator, weight)`` where the
    weight is the half trace norm of the truncated part, capped at 1.
    """
    delta = linalg.as_matrix(delta)
    w, v = linalg.eig_hermitian(delta, tol=1e-8)
    order = np.argsort(-np.abs(w))[:2]
    w2 = w[order]
    v2 = v[:, order]
    w2 = w2 - w2.mean()
    op = (v2 * w2) @ linalg.dagger(v2)
    half = 0.5 * float(np.sum(np.abs(w2)))
    if half <= 0:
        raise ValueError("difference operator has no traceless rank-2 part")
    return op / half, min(half, 1.0)


def _projected_candidate(delta: np.ndarray, iso: np.ndarray) -> tuple[np.ndarray, float, np.ndarray]:
    r = linalg.bloch_vector(linalg.dagger(iso) @ delta @ iso)
    norm = float(np.linalg.norm(r))
    r_hat = r / norm if norm > 0 else np.array([0.0, 0.0, 1.0])
    return iso @ linalg.from_bloch(r_hat) @ linalg.dagger(iso), min(norm, 1.0), r_hat


def fit_qubit_candidates(s: Scenario, restarts: int = 8, seed: int = 0) -> dict:
    """Numerically search for a small epsilon over a common-qubit candidate family.

    The starting candidate projects both differences onto their dominant
    2-D subspace (top left singular vectors of ``[rho - rho', sigma - sigma']``).
    Nelder-Mead then refines the subspace (a real-parametrised complex matrix,
    orthonormalised by QR), two Bloch directions and two weights in [0, 1],
    from that start and from ``restarts - 1`` random ones. This is a
    heuristic: the returned epsilon is attained by the returned candidate, but
    smaller values may exist.
    """
    n = s.dim
    d_rho = s.rho - s.rho_p
    d_sigma = s.sigma - s.sigma_p
    n_iso = 4 * n

    def build(p):
        m = (p[:n_iso:2] + 1j * p[1:n_iso:2]).reshape(n, 2)
        iso, _ = np.linalg.qr(m)
        th1, ph1, th2, ph2, ta, tb = p[n_iso:]
        z = np.array([np.sin(th1) * np.cos(ph1), np.sin(th1) * np.sin(ph1), np.cos(th1)])
        x = np.array([np.sin(th2) * np.cos(ph2), np.sin(th2) * np.sin(ph2), np.cos(th2)])
        zt = iso @ linalg.from_bloch(z) @ linalg.dagger(iso)
        xt = iso @ linalg.from_bloch(x) @ linalg.dagger(iso)
        a = 0.5 * (1.0 + np.tanh(ta))
        b = 0.5 * (1.0 + np.tanh(tb))
        return zt, xt, a, b

    def objective(p):
        zt, xt, a, b = build(p)
        return max(0.5 * trace_norm(d_rho - a * zt), 0.5 * trace_norm(d_sigma - b * xt))

    def angles(r):
        return [math.acos(max(-1.0, min(1.0, r[2]))), math.atan2(r[1], r[0])]

    def weight_param(w):
        w = min(max(w, 1e-6), 1.0 - 1e-6)
        return math.atanh(2.0 * w - 1.0)

    u, _, _ = np.linalg.svd(np.hstack([d_rho, d_sigma]))
    iso0 = u[:, :2]
    zt0, a0, rz = _projected_candidate(d_rho, iso0)
    xt0, b0, rx = _projected_candidate(d_sigma, iso0)
    best = (max(0.5 * trace_norm(d_rho - a0 * zt0), 0.5 * trace_norm(d_sigma - b0 * xt0)),
            (zt0, xt0, a0, b0))
    p0 = np.concatenate([np.column_stack([iso0.real.ravel(), iso0.imag.ravel()]).ravel(),
                         angles(rz), angles(rx), [weight_param(a0), weight_param(b0)]])

    rng = np.random.default_rng(seed)
    opts = {"maxiter": 3000, "xatol": 1e-9, "fatol": 1e-12}
    for k in range(max(restarts, 1)):
        if k == 0:
            start = p0
        else:
            start = np.concatenate([rng.normal(size=n_iso), rng.uniform(0, np.pi, 4), rng.normal(size=2)])
        res = minimize(objective, start, method="Nelder-Mead", options=opts)
        # a fresh simplex often escapes where the first one collapsed
        res = minimize(objective, res.x, method="Nelder-Mead", options=opts)
        if res.fun < best[0]:
            best = (float(res.fun), build(res.x))
    zt, xt, a, b = best[1]
    epsilon = qubit_deviation(s, zt, xt, a, b)
    return {"epsilon": epsilon, "z_tilde": zt, "x_tilde": xt, "alpha_t": a, "beta_t": b,
            "support_dim": support_dimension(s)[0], "heuristic": True}
