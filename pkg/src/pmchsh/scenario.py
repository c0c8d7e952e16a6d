"""
Prepare-and-measure CHSH scenarios.

A scenario holds the four source states on the Bob-Eve space (after the
eavesdropper's unitary) and Bob's two +/-1 observables. ``(x, a)`` indexes
the states as ``(0,0) -> rho``, ``(0,1) -> rho_p``, ``(1,0) -> sigma``,
``(1,1) -> sigma_p``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linalg
from .linalg import DEFAULT_TOL, dagger, partial_trace, trace_norm

STATE_NAMES = ("rho", "rho_p", "sigma", "sigma_p")
TSIRELSON = 2.0 * np.sqrt(2.0)


class ScenarioError(ValueError):
    pass


class InvalidScenario(ScenarioError):
    def __init__(self, issues):
        self.issues = list(issues)
        summary = "; ".join(str(i) for i in self.issues) or "invalid scenario"
        super().__init__(summary)


class QubitAssumptionViolated(ScenarioError):
    """The state differences are not supported on a common qubit subspace."""

    def __init__(self, dimension: int):
        self.dimension = int(dimension)
        super().__init__(f"qubit assumption violated (support dim {self.dimension})")


class DegenerateDifference(ScenarioError):
    def __init__(self, which: str, value: float):
        self.which = which
        self.value = float(value)
        super().__init__(f"{which} = {value:.3e} is too small to define the normalised difference operator")


def _frozen(m) -> np.ndarray:
    a = np.array(m, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Scenario:
    dim_b: int
    dim_e: int
    rho: np.ndarray
    rho_p: np.ndarray
    sigma: np.ndarray
    sigma_p: np.ndarray
    obs_u: np.ndarray
    obs_v: np.ndarray

    def __post_init__(self):
        if int(self.dim_b) < 1 or int(self.dim_e) < 1:
            raise ScenarioError(f"dimensions must be positive, got ({self.dim_b}, {self.dim_e})")
        object.__setattr__(self, "dim_b", int(self.dim_b))
        object.__setattr__(self, "dim_e", int(self.dim_e))
        n = self.dim_b * self.dim_e
        for name in STATE_NAMES:
            m = linalg.as_matrix(getattr(self, name), name)
            if m.shape != (n, n):
                raise ScenarioError(f"{name} has shape {m.shape}, expected ({n}, {n})")
            object.__setattr__(self, name, _frozen(m))
        for name in ("obs_u", "obs_v"):
            m = linalg.as_matrix(getattr(self, name), name)
            if m.shape != (self.dim_b, self.dim_b):
                raise ScenarioError(f"{name} has shape {m.shape}, expected ({self.dim_b}, {self.dim_b})")
            object.__setattr__(self, name, _frozen(m))

    @property
    def dim(self) -> int:
        return self.dim_b * self.dim_e

    @property
    def states(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.rho, self.rho_p, self.sigma, self.sigma_p

    def with_observables(self, u, v) -> "Scenario":
        return Scenario(self.dim_b, self.dim_e, *self.states, u, v)

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            self.dim_b == other.dim_b
            and self.dim_e == other.dim_e
            and all(np.array_equal(getattr(self, k), getattr(other, k)) for k in STATE_NAMES + ("obs_u", "obs_v"))
        )

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "dim_b": self.dim_b,
            "dim_e": self.dim_e,
            "states": {k: linalg.matrix_to_json(getattr(self, k)) for k in STATE_NAMES},
            "observables": {"u": linalg.matrix_to_json(self.obs_u), "v": linalg.matrix_to_json(self.obs_v)},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        try:
            dim_b = int(data["dim_b"])
            dim_e = int(data["dim_e"])
            states = data["states"]
            mats = [linalg.matrix_from_json(states[k], k) for k in STATE_NAMES]
        except (KeyError, TypeError) as exc:
            raise ScenarioError(f"malformed scenario document: missing {exc}") from exc
        if "observables" in data:
            obs = data["observables"]
            u = linalg.matrix_from_json(obs["u"], "u")
            v = linalg.matrix_from_json(obs["v"], "v")
        elif "measurements" in data:
            meas = data["measurements"]
            u, v = (
                observable_from_povm(*[linalg.matrix_from_json(e, f"{key}[{i}]") for i, e in enumerate(meas[key])])
                for key in ("m0", "m1")
            )
        else:
            raise ScenarioError("scenario document needs 'observables' or 'measurements'")
        return cls(dim_b, dim_e, *mats, u, v)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"scenario file is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_json(Path(path).read_text())


def observable_from_povm(m0, m1) -> np.ndarray:
    """``U = M_0 - M_1`` for a binary measurement."""
    m0 = linalg.as_matrix(m0, "m0")
    m1 = linalg.as_matrix(m1, "m1")
    if m0.shape != m1.shape:
        raise ScenarioError(f"POVM elements have mismatched shapes {m0.shape} and {m1.shape}")
    return m0 - m1


@dataclass(frozen=True)
class Issue:
    target: str
    kind: str
    magnitude: float

    def __str__(self):
        return f"{self.target}: {self.kind} violation {self.magnitude:.3e}"

    def to_dict(self):
        return {"target": self.target, "kind": self.kind, "magnitude": self.magnitude}


def validate(s: Scenario, tol: float = DEFAULT_TOL) -> list[Issue]:
    """Every violated scenario invariant, with its size. Empty means valid."""
    issues = []
    for name in STATE_NAMES:
        m = getattr(s, name)
        herm = linalg.hermiticity_error(m)
        if herm > tol:
            issues.append(Issue(name, "hermiticity", herm))
        h = 0.5 * (m + dagger(m))
        low = float(np.linalg.eigvalsh(h)[0])
        if low < -tol:
            issues.append(Issue(name, "positivity", -low))
        tr = abs(complex(np.trace(m)) - 1.0)
        if tr > tol:
            issues.append(Issue(name, "trace", tr))
    for name in ("obs_u", "obs_v"):
        m = getattr(s, name)
        herm = linalg.hermiticity_error(m)
        if herm > tol:
            issues.append(Issue(name, "hermiticity", herm))
        unit = float(np.max(np.abs(m @ m - np.eye(s.dim_b)), initial=0.0))
        if unit > tol:
            issues.append(Issue(name, "unitarity", unit))
    return issues


def require_valid(s: Scenario, tol: float = DEFAULT_TOL) -> None:
    issues = validate(s, tol)
    if issues:
        raise InvalidScenario(issues)


def _chsh_unchecked(s: Scenario) -> float:
    # Accumulated in extended precision; see linalg.sign_operator.
    ext = np.clongdouble
    eye_b = np.eye(s.dim_b, dtype=ext)
    eye_e = np.eye(s.dim_e, dtype=ext)
    observables = (s.obs_u.astype(ext), s.obs_v.astype(ext))
    states = {(0, 0): s.rho, (0, 1): s.rho_p, (1, 0): s.sigma, (1, 1): s.sigma_p}
    states = {k: m.astype(ext) for k, m in states.items()}
    total = np.longdouble(0.0)
    for y, obs in enumerate(observables):
        for b in (0, 1):
            effect = np.kron(0.5 * (eye_b + (-1) ** b * obs), eye_e)
            for (x, a), state in states.items():
                prob = np.trace(effect @ state).real
                total += (-1) ** (a + b + x * y) * prob
    return float(0.5 * total)


def chsh_value(s: Scenario, tol: float = DEFAULT_TOL) -> float:
    """Prepare-and-measure CHSH correlator from the outcome probabilities.

    ``S = 1/2 sum_{abxy} (-1)^(a+b+xy) P(b|a,x,y)`` with
    ``P(b|a,x,y) = Tr[(M_{b|y} (x) 1_E) rho_{x,a}]`` and
    ``M_{b|y} = (1 + (-1)^b O_y) / 2``.
    """
    require_valid(s, tol)
    return _chsh_unchecked(s)


@dataclass(frozen=True, eq=False)
class SourceGeometry:
    alpha: float
    beta: float
    z_op: np.ndarray
    x_op: np.ndarray
    y_op: np.ndarray
    subspace_projector: np.ndarray
    phi: float
    isometry: np.ndarray
    support_dim: int = 2

    def marginal(self, name: str, dim_b: int, dim_e: int, keep: str = "B") -> np.ndarray:
        return partial_trace(getattr(self, name), dim_b, dim_e, keep)


def _support_basis(delta: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (delta + dagger(delta)))
    cutoff = 1e-9 * max(1.0, float(np.sum(np.abs(w))))
    return v[:, np.abs(w) > cutoff]


def support_dimension(s: Scenario) -> tuple[int, np.ndarray]:
    """Dimension and an orthonormal basis of supp(rho - rho') + supp(sigma - sigma')."""
    cols = np.hstack([_support_basis(s.rho - s.rho_p), _support_basis(s.sigma - s.sigma_p)])
    if cols.shape[1] == 0:
        return 0, cols
    u, sv, _ = np.linalg.svd(cols, full_matrices=False)
    # Eigenvector sets are orthonormal individually, so an independent direction
    # contributes a singular value of order one; shared ones give ~sqrt(2) and 0.
    rank = int(np.sum(sv > 1e-6))
    return rank, u[:, :rank]


def _orthogonal_axis(z: np.ndarray) -> np.ndarray:
    best = None
    for axis in (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])):
        rej = axis - np.dot(axis, z) * z
        if best is None or np.linalg.norm(rej) > np.linalg.norm(best):
            best = rej
    return best / np.linalg.norm(best)


def source_geometry(s: Scenario, tol: float = DEFAULT_TOL) -> SourceGeometry:
    """Normalised difference operators Z, X, the orthogonal Y and the source subspace.

    Raises
    ------
    QubitAssumptionViolated
        If the differences span more than two dimensions.
    DegenerateDifference
        If either trace distance ``alpha`` or ``beta`` is at most ``tol``.
    """
    require_valid(s, tol)
    d_rho = s.rho - s.rho_p
    d_sigma = s.sigma - s.sigma_p
    alpha = 0.5 * trace_norm(d_rho)
    beta = 0.5 * trace_norm(d_sigma)
    dim, basis = support_dimension(s)
    if dim > 2:
        raise QubitAssumptionViolated(dim)
    if alpha <= tol:
        raise DegenerateDifference("alpha", alpha)
    if beta <= tol:
        raise DegenerateDifference("beta", beta)
    if dim < 2:  # traceless and nonzero forces rank >= 2
        raise QubitAssumptionViolated(dim)

    z_op = d_rho / alpha
    x_op = d_sigma / beta
    iso = basis
    z_vec = linalg.bloch_vector(dagger(iso) @ z_op @ iso)
    x_vec = linalg.bloch_vector(dagger(iso) @ x_op @ iso)
    z_vec /= np.linalg.norm(z_vec)
    x_vec /= np.linalg.norm(x_vec)
    cos_phi = float(np.clip(np.dot(z_vec, x_vec), -1.0, 1.0))
    cross = np.cross(z_vec, x_vec)
    sin_phi = float(np.linalg.norm(cross))
    if sin_phi > 1e-8:
        y_vec = cross / sin_phi
    else:
        y_vec = _orthogonal_axis(z_vec)
    y_op = iso @ linalg.from_bloch(y_vec) @ dagger(iso)
    return SourceGeometry(
        alpha=alpha,
        beta=beta,
        z_op=z_op,
        x_op=x_op,
        y_op=y_op,
        subspace_projector=iso @ dagger(iso),
        phi=float(np.arccos(cos_phi)),
        isometry=iso,
        support_dim=dim,
    )


def chsh_from_observables(s: Scenario, g: SourceGeometry) -> float:
    """``S = 1/2 Tr[U (a Z_B + b X_B) + V (a Z_B - b X_B)]``."""
    if g.z_op.shape != (s.dim, s.dim):
        raise ScenarioError("geometry does not match scenario dimensions")
    z_b = partial_trace(g.z_op, s.dim_b, s.dim_e, "B")
    x_b = partial_trace(g.x_op, s.dim_b, s.dim_e, "B")
    plus = g.alpha * z_b + g.beta * x_b
    minus = g.alpha * z_b - g.beta * x_b
    return float(0.5 * np.trace(s.obs_u @ plus + s.obs_v @ minus).real)
