"""
Joint block diagonalisation of two +/-1 observables and the per-block bounds.

Two Hermitian unitaries ``U`` and ``V`` split into mutually orthogonal
invariant blocks of dimension one or two. With ``A = (U + V)/2`` and
``B = (U - V)/2`` we have ``AB + BA = 0`` and ``A^2 + B^2 = 1``, so an
eigenvector ``w`` of ``A`` with eigenvalue ``0 < c < 1`` pairs with
``B w / sqrt(1 - c^2)`` (an eigenvector for ``-c``). In that basis
``A = c sz`` and ``B = s sx`` with ``s = sqrt(1 - c^2)``, and the Bloch
angle between ``U`` and ``V`` is ``gamma = 2 arccos(c)``. Only Hermitian
eigenproblems are needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .linalg import DEFAULT_TOL, dagger, partial_trace
from .scenario import Scenario, ScenarioError, SourceGeometry

UNIT_CUTOFF = 1e-9
ZERO_CUTOFF = 1e-9


class JordanError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class JordanBlock:
    basis: np.ndarray  # columns, shape (dim, 1) or (dim, 2)
    u_block: np.ndarray
    v_block: np.ndarray
    gamma: float

    @property
    def dimension(self) -> int:
        return self.basis.shape[1]

    @property
    def projector(self) -> np.ndarray:
        return self.basis @ dagger(self.basis)

    def embed(self, m: np.ndarray) -> np.ndarray:
        return self.basis @ m @ dagger(self.basis)


def _block(basis: np.ndarray, u: np.ndarray, v: np.ndarray, gamma: float) -> JordanBlock:
    ub = dagger(basis) @ u @ basis
    vb = dagger(basis) @ v @ basis
    return JordanBlock(basis=basis, u_block=0.5 * (ub + dagger(ub)), v_block=0.5 * (vb + dagger(vb)), gamma=gamma)


def joint_block_diagonalize(u, v, tol: float = DEFAULT_TOL) -> list[JordanBlock]:
    """Common invariant blocks of two Hermitian unitaries.

    1-D blocks carry ``gamma = 0`` when ``u`` and ``v`` agree on them and
    ``gamma = pi`` when they disagree.
    """
    u = linalg.as_matrix(u, "u")
    v = linalg.as_matrix(v, "v")
    if u.shape != v.shape:
        raise JordanError(f"observables have different shapes {u.shape} and {v.shape}")
    for name, m in (("u", u), ("v", v)):
        if not linalg.is_hermitian_unitary(m, tol):
            raise JordanError(f"{name} is not a Hermitian unitary")
    a = 0.5 * (u + v)
    b = 0.5 * (u - v)
    c_vals, vecs = np.linalg.eigh(0.5 * (a + dagger(a)))

    blocks: list[JordanBlock] = []
    kernel = []
    n_pos = n_neg = 0
    for c, w in zip(c_vals, vecs.T):
        if abs(c) >= 1.0 - UNIT_CUTOFF:
            blocks.append(_block(w[:, None], u, v, 0.0))
        elif abs(c) <= ZERO_CUTOFF:
            kernel.append(w)
        elif c > 0:
            n_pos += 1
            s = math.sqrt(1.0 - c * c)
            partner = b @ w / s
            partner /= np.linalg.norm(partner)
            blocks.append(_block(np.column_stack([w, partner]), u, v, 2.0 * math.acos(c)))
        else:
            n_neg += 1
    if n_pos != n_neg:
        raise JordanError(f"unpaired spectrum of (u+v)/2: {n_pos} positive vs {n_neg} negative eigenvalues")
    if kernel:
        k = np.column_stack(kernel)
        bk = dagger(k) @ b @ k
        _, kv = np.linalg.eigh(0.5 * (bk + dagger(bk)))
        for e in kv.T:
            blocks.append(_block((k @ e)[:, None], u, v, math.pi))
    return blocks


def reassemble(blocks: list[JordanBlock], which: str = "u") -> np.ndarray:
    dim = blocks[0].basis.shape[0]
    out = np.zeros((dim, dim), dtype=complex)
    for blk in blocks:
        out += blk.embed(blk.u_block if which == "u" else blk.v_block)
    return out


def block_w_operator(block: JordanBlock, g: SourceGeometry, dim_e: int,
                     tol: float = DEFAULT_TOL) -> np.ndarray | None:
    """Hermitian unitary on the block orthogonal to both observables, or None.

    Equal to ``i[U_k, V_k] / (2 sin gamma)`` up to sign. It is built in the
    block's own basis, where it is exactly ``sigma_y``, which avoids dividing
    by a small ``sin gamma``. The sign makes ``Tr[W Y_B] >= 0``.
    """
    if block.dimension != 2 or math.sin(block.gamma) <= tol:
        return None
    w_op = block.embed(linalg.SIGMA_Y)
    y_b = partial_trace(g.y_op, block.basis.shape[0], dim_e, "B")
    if np.trace(w_op @ y_b).real < 0:
        w_op = -w_op
    return w_op


@dataclass
class BlockRecord:
    dimension: int
    gamma: float
    p_k: float
    s_k: float
    w_op: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "gamma": self.gamma, "p_k": self.p_k, "s_k": self.s_k,
                "has_w": self.w_op is not None}


@dataclass
class BlockDecomposition:
    blocks: list[JordanBlock]
    per_block: list[BlockRecord]

    @property
    def p_total(self) -> float:
        return float(sum(r.p_k for r in self.per_block))

    @property
    def s_total(self) -> float:
        return float(sum(r.s_k for r in self.per_block))

    def to_dict(self) -> dict:
        return {"blocks": [r.to_dict() for r in self.per_block], "p_total": self.p_total, "s_total": self.s_total}


def block_weights_and_scores(s: Scenario, g: SourceGeometry, blocks: list[JordanBlock],
                             tol: float = DEFAULT_TOL) -> BlockDecomposition:
    if g.z_op.shape != (s.dim, s.dim) or any(b.basis.shape[0] != s.dim_b for b in blocks):
        raise ScenarioError("blocks or geometry do not match the scenario")
    z_b = partial_trace(g.z_op, s.dim_b, s.dim_e, "B")
    x_b = partial_trace(g.x_op, s.dim_b, s.dim_e, "B")
    i_b = partial_trace(g.subspace_projector, s.dim_b, s.dim_e, "B")
    records = []
    for blk in blocks:
        uk = blk.embed(blk.u_block)
        vk = blk.embed(blk.v_block)
        s_k = 0.5 * g.alpha * np.trace((uk + vk) @ z_b).real + 0.5 * g.beta * np.trace((uk - vk) @ x_b).real
        p_k = 0.5 * np.trace(blk.projector @ i_b).real
        records.append(BlockRecord(blk.dimension, blk.gamma, float(p_k), float(s_k),
                                   block_w_operator(blk, g, s.dim_e, tol)))
    return BlockDecomposition(list(blocks), records)


@dataclass(frozen=True)
class Inequality:
    name: str
    lhs: float
    rhs: float
    sense: str = "<="

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs if self.sense == "<=" else self.lhs - self.rhs

    def holds(self, tol: float) -> bool:
        return self.slack >= -tol

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "sense": self.sense, "rhs": self.rhs, "slack": self.slack}


@dataclass
class BlockCheck:
    index: int
    record: BlockRecord
    checks: list[Inequality]
    radicand_flag: bool = False  # witness radicand positive with no W operator

    def worst_slack(self) -> float:
        return min(c.slack for c in self.checks)

    def to_dict(self) -> dict:
        d = self.record.to_dict()
        d["index"] = self.index
        d["checks"] = [c.to_dict() for c in self.checks]
        d["radicand_flag"] = self.radicand_flag
        return d


def eve_sign_operator(s: Scenario, g: SourceGeometry, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Helstrom-type unitary with ``Tr[U_E Z_E] = ||Z_E||_1``."""
    return linalg.sign_operator(partial_trace(g.z_op, s.dim_b, s.dim_e, "E"), tol)


def check_block_inequalities(s: Scenario, g: SourceGeometry, d: BlockDecomposition, u_e,
                             tol: float = DEFAULT_TOL) -> list[BlockCheck]:
    """Evaluate the per-block inequalities for every block.

    Per block, with ``t = Tr[W Y_B]/2`` (0 without W) and
    ``z = Tr[(1_k (x) U_E) Z]/2``:

    * ``witness``:      ``alpha t >= sqrt(max(0, S_k^2/4 - p_k^2))``
    * ``tradeoff``:     ``t^2 + z^2 <= p_k^2``
    * ``tight``:        ``S_k^2/4 <= min(a^2, b^2) t^2 + max(a^2, b^2) (Tr[1_k I_B]/2)^2``
    * ``block_distance``: ``z <= p_k sqrt(max(0, 2 - (S_k/p_k)^2/4))``
    """
    u_e = linalg.as_matrix(u_e, "u_e")
    if u_e.shape != (s.dim_e, s.dim_e) or not linalg.is_hermitian_unitary(u_e, 1e-8):
        raise JordanError("u_e must be a Hermitian unitary on Eve's space")
    y_b = partial_trace(g.y_op, s.dim_b, s.dim_e, "B")
    i_b = partial_trace(g.subspace_projector, s.dim_b, s.dim_e, "B")
    lo, hi = sorted((g.alpha ** 2, g.beta ** 2))
    out = []
    for idx, (blk, rec) in enumerate(zip(d.blocks, d.per_block)):
        t = 0.0 if rec.w_op is None else 0.5 * np.trace(rec.w_op @ y_b).real
        z = 0.5 * np.trace(np.kron(blk.projector, u_e) @ g.z_op).real
        half_id = 0.5 * np.trace(blk.projector @ i_b).real
        radicand = rec.s_k ** 2 / 4.0 - rec.p_k ** 2
        checks = [
            Inequality("witness", g.alpha * t, math.sqrt(max(0.0, radicand)), ">="),
            Inequality("tradeoff", t * t + z * z, rec.p_k ** 2),
            Inequality("tight", rec.s_k ** 2 / 4.0, lo * t * t + hi * half_id ** 2),
        ]
        if rec.p_k <= tol:
            checks.append(Inequality("block_distance", abs(z), tol))
        else:
            ratio = rec.s_k / rec.p_k
            checks.append(Inequality("block_distance", z, rec.p_k * math.sqrt(max(0.0, 2.0 - ratio * ratio / 4.0))))
        out.append(BlockCheck(idx, rec, checks, radicand_flag=rec.w_op is None and radicand > 1e-9))
    return out


def block_distance_bound(p_k: float, s_k: float) -> float:
    if p_k <= 0.0:
        return 0.0
    r = s_k / p_k
    return p_k * math.sqrt(max(0.0, 2.0 - r * r / 4.0))


@dataclass
class DistanceChain:
    links: list[Inequality]
    aggregate: float

    def to_list(self) -> list[dict]:
        return [c.to_dict() for c in self.links]


def aggregate_distance_bound(d: BlockDecomposition, s: Scenario, g: SourceGeometry,
                             tol: float = DEFAULT_TOL) -> DistanceChain:
    """``sum_k p_k sqrt(2 - (S_k/p_k)^2/4)`` and the chain it sits in.

    Links, in order: trace distance <= sum of block Helstrom terms <=
    aggregate <= ``sqrt(2 - S^2/4)``.
    """
    e0 = partial_trace(s.rho, s.dim_b, s.dim_e, "E")
    e1 = partial_trace(s.rho_p, s.dim_b, s.dim_e, "E")
    dist = 0.5 * linalg.trace_norm(e0 - e1)
    u_e = eve_sign_operator(s, g, tol)
    helstrom = sum(0.5 * np.trace(np.kron(blk.projector, u_e) @ g.z_op).real for blk in d.blocks)
    agg = sum(block_distance_bound(r.p_k, r.s_k) if r.p_k > tol else 0.0 for r in d.per_block)
    s_total = d.s_total
    final = math.sqrt(max(0.0, 2.0 - s_total * s_total / 4.0))
    links = [
        Inequality("distance<=helstrom", dist, float(helstrom)),
        Inequality("helstrom<=aggregate", float(helstrom), agg),
        Inequality("aggregate<=concave", agg, final),
    ]
    return DistanceChain(links, agg)
