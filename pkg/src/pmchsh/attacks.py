"""
Scenario constructors: the tight collective attack, the duplicated-BB84
counterexample, seeded random qubit sources, perturbations of them, and a
derivative-free search for the best attack at a given CHSH value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .linalg import DEFAULT_TOL, dagger, partial_trace, sign_operator
from .scenario import TSIRELSON, Scenario, ScenarioError, _chsh_unchecked, source_geometry

PENALTY_WEIGHT = 1e3
SHRINK_FACTOR = 0.5
MIN_STEP = 1e-9
FEASIBILITY_SLACK = 1e-6
NEAR_TIGHT_FRACTION = 0.25


@dataclass(frozen=True)
class AttackParams:
    f_z: float
    dim_e: int = 2

    def __post_init__(self):
        if not (0.0 <= self.f_z <= 1.0) or math.isnan(self.f_z):
            raise ValueError(f"f_z must lie in [0, 1], got {self.f_z!r}")
        if int(self.dim_e) < 2:
            raise ValueError(f"dim_e must be at least 2, got {self.dim_e!r}")


def f_z_for_chsh(s_value: float) -> float:
    """Invert ``S = 2 sqrt(1 + F_z^2)``."""
    if not (2.0 - 1e-12 <= s_value <= TSIRELSON + 1e-12):
        raise ValueError(f"target CHSH value must lie in [2, 2*sqrt(2)], got {s_value!r}")
    return min(1.0, math.sqrt(max(0.0, s_value * s_value / 4.0 - 1.0)))


def optimal_bob_observables(z_b, x_b, alpha: float, beta: float, tol: float = DEFAULT_TOL):
    """Bob's CHSH-optimal observables for given source marginals.

    Returns ``(sign(a Z_B + b X_B), sign(a Z_B - b X_B))``, which makes
    ``S = ||a Z_B + b X_B||_1 / 2 + ||a Z_B - b X_B||_1 / 2``.
    """
    z_b = linalg.as_matrix(z_b, "z_b")
    x_b = linalg.as_matrix(x_b, "x_b")
    for name, m in (("z_b", z_b), ("x_b", x_b)):
        if linalg.hermiticity_error(m) > tol:
            raise linalg.NotHermitianError(f"{name} is not Hermitian")
    return sign_operator(alpha * z_b + beta * x_b, tol), sign_operator(alpha * z_b - beta * x_b, tol)


def _observables_for_states(rho, rho_p, sigma, sigma_p, dim_b, dim_e):
    d_rho = partial_trace(rho - rho_p, dim_b, dim_e, "B")
    d_sigma = partial_trace(sigma - sigma_p, dim_b, dim_e, "B")
    # alpha Z_B and beta X_B directly; avoids dividing by a vanishing alpha.
    return optimal_bob_observables(d_rho, d_sigma, 1.0, 1.0)


def _pure(vec) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex)
    return np.outer(vec, vec.conj())


def optimal_attack(p: AttackParams) -> Scenario:
    """Collective attack with ``S = 2 sqrt(1 + F_z^2)`` and ``D = sqrt(1 - F_z^2)``.

    Bob holds ``|0>`` or ``|1>`` and Eve ``|psi>`` or ``|psi'>`` with
    ``<psi|psi'> = F_z``; the x = 1 states are the +/- superpositions.
    """
    if not isinstance(p, AttackParams):
        p = AttackParams(float(p))
    de = int(p.dim_e)
    e0 = np.zeros(de)
    e0[0] = 1.0
    e1 = np.zeros(de)
    e1[1] = 1.0
    psi = e0
    psi_p = p.f_z * e0 + math.sqrt(max(0.0, 1.0 - p.f_z ** 2)) * e1
    a = np.kron([1.0, 0.0], psi)
    a_p = np.kron([0.0, 1.0], psi_p)
    # |b><b| = (a + a')(a + a')^dagger / 2 avoids rounding 1/sqrt(2) into the states
    states = [_pure(a), _pure(a_p), 0.5 * _pure(a + a_p), 0.5 * _pure(a - a_p)]
    u, v = _observables_for_states(*states, 2, de)
    return Scenario(2, de, *states, u, v)


def attack_for_chsh(s_target: float, dim_e: int = 2) -> Scenario:
    return optimal_attack(AttackParams(f_z_for_chsh(s_target), dim_e))


def bb84_counterexample() -> Scenario:
    """Bob and Eve each receive a copy of the BB84 state.

    The differences span three dimensions, CHSH is maximal, and Eve's
    marginals are orthogonal.
    """
    zero = np.array([1.0, 0.0])
    one = np.array([0.0, 1.0])
    plus = (zero + one) / math.sqrt(2.0)
    minus = (zero - one) / math.sqrt(2.0)
    states = [_pure(np.kron(k, k)) for k in (zero, one, plus, minus)]
    u, v = _observables_for_states(*states, 2, 2)
    return Scenario(2, 2, *states, u, v)


def _haar_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def _isometry(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    z = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    q, _ = np.linalg.qr(z)
    return q


def _wishart_state(rng: np.random.Generator, n: int, rank: int) -> np.ndarray:
    g = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    m = g @ dagger(g)
    return m / np.trace(m).real


def _random_observable(rng: np.random.Generator, n: int) -> np.ndarray:
    q = _haar_unitary(rng, n)
    signs = rng.choice([-1.0, 1.0], size=n)
    return (q * signs) @ dagger(q)


def _near_tight_source(rng: np.random.Generator, dim_b: int, dim_e: int):
    """Subspace of a random-overlap tight attack and jittered qubit states on it."""
    f = rng.uniform()
    e_b = np.eye(dim_b)
    e_e = np.eye(dim_e)
    cols = [np.kron(e_b[0], e_e[0]), np.kron(e_b[1], f * e_e[0] + math.sqrt(1.0 - f * f) * e_e[1])]
    local = np.kron(_haar_unitary(rng, dim_b), _haar_unitary(rng, dim_e))
    return local @ np.column_stack(cols), _jittered_qubits(rng)


def _jittered_qubits(rng: np.random.Generator) -> list[np.ndarray]:
    """Slightly mixed states near the Bloch directions +z, -z, +x, -x."""
    qubits = []
    for r0 in ((0, 0, 1), (0, 0, -1), (1, 0, 0), (-1, 0, 0)):
        r = np.asarray(r0, dtype=float) + 0.1 * rng.normal(size=3)
        r *= (1.0 - rng.uniform(0.0, 0.05)) / np.linalg.norm(r)
        qubits.append(0.5 * (linalg.SIGMA_I + linalg.from_bloch(r)))
    return qubits


def random_qubit_scenario(seed: int, dim_b: int, dim_e: int) -> Scenario:
    """Seeded random scenario that satisfies the qubit source assumption.

    Four qubit states (pure or Wishart-mixed) are pushed through a random
    isometry into the Bob-Eve space. When Eve has at least two dimensions, a
    quarter of the instances instead jitter the tight attack under random
    local unitaries, so that the bounds are also exercised near equality. Half the instances also mix in an
    x-dependent common state, which leaves the differences inside the qubit
    subspace. Bob's observables are either random projective +/-1 observables
    or the CHSH-optimal pair for the instance, so the population covers the
    CHSH-violating regime as well.
    """
    if int(dim_b) < 2 or int(dim_e) < 1:
        raise ScenarioError(f"need dim_b >= 2 and dim_e >= 1, got ({dim_b}, {dim_e})")
    rng = np.random.default_rng(seed)
    n = dim_b * dim_e
    if dim_e >= 2 and rng.random() < NEAR_TIGHT_FRACTION:
        iso, qubits = _near_tight_source(rng, dim_b, dim_e)
    else:
        iso = _isometry(rng, n, 2)
        qubits = [_wishart_state(rng, 2, int(rng.integers(1, 3))) for _ in range(4)]
    states = [iso @ q @ dagger(iso) for q in qubits]
    if rng.random() < 0.5:
        weight = rng.uniform(0.0, 0.5)
        common = [_wishart_state(rng, n, int(rng.integers(1, n + 1))) for _ in range(2)]
        states = [(1.0 - weight) * st + weight * common[i // 2] for i, st in enumerate(states)]
    if rng.random() < 0.5:
        u, v = _observables_for_states(*states, dim_b, dim_e)
    else:
        u = _random_observable(rng, dim_b)
        v = _random_observable(rng, dim_b)
    return Scenario(dim_b, dim_e, *states, u, v)


def random_violating_scenario(seed: int, dim_b: int, dim_e: int) -> Scenario:
    """Seeded qubit-assumption scenario that typically violates CHSH.

    The source is a jittered tight attack (a random isometry when Eve is
    one-dimensional) and Bob measures the CHSH-optimal pair.
    """
    if int(dim_b) < 2 or int(dim_e) < 1:
        raise ScenarioError(f"need dim_b >= 2 and dim_e >= 1, got ({dim_b}, {dim_e})")
    rng = np.random.default_rng(seed)
    if dim_e >= 2:
        iso, qubits = _near_tight_source(rng, dim_b, dim_e)
    else:
        iso, qubits = _isometry(rng, dim_b, 2), _jittered_qubits(rng)
    states = [iso @ q @ dagger(iso) for q in qubits]
    u, v = _observables_for_states(*states, dim_b, dim_e)
    return Scenario(dim_b, dim_e, *states, u, v)


def perturbed_scenario(base: Scenario, magnitude: float, seed: int) -> Scenario:
    """Mix every source state with weight ``magnitude`` into states outside the qubit subspace.

    The result is ``magnitude``-close to the base geometry in the sense of
    :func:`pmchsh.entropy.qubit_deviation` with candidates ``(Z, X)`` of the
    base and weights ``(1 - magnitude) * (alpha, beta)``. The off-subspace
    states are oriented so that their CHSH contribution never opposes the
    base value, which keeps ``|S - S_base| <= 4 * magnitude``.
    """
    if not (0.0 <= magnitude <= 0.1):
        raise ValueError(f"magnitude must lie in [0, 0.1], got {magnitude!r}")
    g = source_geometry(base)
    n = base.dim
    if n <= 2:
        raise ScenarioError("no room outside the qubit subspace (dim_b * dim_e = 2)")
    if magnitude == 0.0:
        return base
    u_full, _, _ = np.linalg.svd(g.isometry, full_matrices=True)
    comp = u_full[:, 2:]
    rng = np.random.default_rng(seed)
    k = comp.shape[1]
    omegas = [comp @ _wishart_state(rng, k, int(rng.integers(1, k + 1))) @ dagger(comp) for _ in range(4)]
    s_base = _chsh_unchecked(base)
    s_omega = _chsh_unchecked(Scenario(base.dim_b, base.dim_e, *omegas, base.obs_u, base.obs_v))
    if s_omega * s_base < 0:
        omegas = [omegas[1], omegas[0], omegas[3], omegas[2]]
    states = [(1.0 - magnitude) * st + magnitude * om for st, om in zip(base.states, omegas)]
    return Scenario(base.dim_b, base.dim_e, *states, base.obs_u, base.obs_v)


def _trace_norm_2x2(h: np.ndarray) -> float:
    a = h[0, 0].real
    d = h[1, 1].real
    r = math.hypot(0.5 * (a - d), abs(h[0, 1]))
    m = 0.5 * (a + d)
    return abs(m + r) + abs(m - r)


class _AttackFamily:
    """Pure qubit states on a 2-D subspace of the 2 x dim_e space.

    Parameters: ``4 * 2 * dim_e`` reals for the subspace (orthonormalised by
    QR) followed by a (theta, phi) Bloch pair per state.
    """

    def __init__(self, dim_e: int):
        self.dim_e = dim_e
        self.n = 2 * dim_e
        self.n_iso = 4 * self.n
        self.size = self.n_iso + 8

    def vectors(self, p: np.ndarray) -> np.ndarray:
        """State vectors, shaped (4, 2, dim_e) as B x E matrices."""
        m = (p[: self.n_iso : 2] + 1j * p[1 : self.n_iso : 2]).reshape(self.n, 2)
        iso, _ = np.linalg.qr(m)
        th = p[self.n_iso :: 2]
        ph = p[self.n_iso + 1 :: 2]
        q = np.stack([np.cos(th / 2), np.exp(1j * ph) * np.sin(th / 2)])
        return (iso @ q).T.reshape(4, 2, self.dim_e)

    def evaluate(self, p: np.ndarray) -> tuple[float, float]:
        """(S, D) with Bob's optimal observables for these states."""
        vec = self.vectors(p)
        rb = [m @ m.conj().T for m in vec]
        zb = rb[0] - rb[1]
        xb = rb[2] - rb[3]
        s_val = 0.5 * _trace_norm_2x2(zb + xb) + 0.5 * _trace_norm_2x2(zb - xb)
        ze = vec[0].T @ vec[0].conj() - vec[1].T @ vec[1].conj()
        d = 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(ze))))
        return s_val, d

    def scenario(self, p: np.ndarray) -> Scenario:
        states = [_pure(v.reshape(-1)) for v in self.vectors(p)]
        u, v = _observables_for_states(*states, 2, self.dim_e)
        return Scenario(2, self.dim_e, *states, u, v)


def _rotating_search(family: _AttackFamily, x0: np.ndarray, s_target: float, iterations: int,
                     rng: np.random.Generator):
    """Pattern search along a rotating orthonormal frame.

    Each sweep tries +-step along every frame direction, accepting the first
    improvement. After a productive sweep the frame is re-aligned with the
    net move; after a stagnant one the step shrinks and the frame is redrawn.
    Returns ``(objective, D, x)`` for the best accepted feasible point.
    """
    def score(x):
        s_val, d = family.evaluate(x)
        return d - PENALTY_WEIGHT * max(0.0, s_target - s_val), s_val, d

    x = x0.copy()
    f, s_val, d = score(x)
    best = (f, d, x.copy()) if s_val >= s_target - FEASIBILITY_SLACK else None
    frame = np.eye(x.size)
    step = 0.5
    for _ in range(iterations):
        start = x.copy()
        improved = False
        for i in range(x.size):
            for direction in (1.0, -1.0):
                trial = x + direction * step * frame[:, i]
                ft, st, dt = score(trial)
                if ft > f:
                    x, f = trial, ft
                    improved = True
                    if st >= s_target - FEASIBILITY_SLACK and (best is None or ft > best[0]):
                        best = (ft, dt, x.copy())
                    break
        if improved:
            frame, _ = np.linalg.qr(np.column_stack([x - start, frame[:, :-1]]))
        else:
            step *= SHRINK_FACTOR
            if step < MIN_STEP:
                break
            frame, _ = np.linalg.qr(rng.normal(size=(x.size, x.size)))
    return best


def optimize_attack(s_target: float, dim_e: int = 2, restarts: int = 32, iterations: int = 200,
                    seed: int = 0) -> tuple[Scenario, float]:
    """Search for the attack with the largest Eve distinguishability at a CHSH value.

    Random restarts with per-restart derived seeds, each refined by a
    rotating-frame pattern search with step halving on stagnant sweeps. The
    objective is ``D - 1000 * max(0, s_target - S)``. Among points with
    ``S >= s_target - 1e-6`` the highest objective wins, ties going to the
    lowest restart index. The returned D is exact for the returned scenario.
    """
    if s_target > TSIRELSON + 1e-12:
        raise ValueError(f"s_target {s_target!r} exceeds 2*sqrt(2); no quantum attack reaches it")
    if restarts < 1 or iterations < 1:
        raise ValueError("restarts and iterations must be at least 1")
    if int(dim_e) < 1:
        raise ValueError(f"dim_e must be positive, got {dim_e!r}")
    family = _AttackFamily(int(dim_e))
    best = None
    for child in np.random.SeedSequence(seed).spawn(restarts):
        rng = np.random.default_rng(child)
        x0 = np.concatenate([rng.normal(size=family.n_iso), rng.uniform(0.0, 2.0 * math.pi, 8)])
        found = _rotating_search(family, x0, s_target, iterations, rng)
        if found is not None and (best is None or found[0] > best[0]):
            best = found
    if best is None:
        raise RuntimeError(f"no feasible attack found for s_target={s_target!r}")
    return family.scenario(best[2]), float(best[1])
