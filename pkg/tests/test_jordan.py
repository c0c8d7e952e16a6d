import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmchsh import linalg
from pmchsh.attacks import AttackParams, optimal_attack, random_qubit_scenario
from pmchsh.jordan import (
    JordanError,
    aggregate_distance_bound,
    block_distance_bound,
    block_w_operator,
    block_weights_and_scores,
    check_block_inequalities,
    eve_sign_operator,
    joint_block_diagonalize,
    reassemble,
)
from pmchsh.entropy import trace_distance_bound
from pmchsh.scenario import Scenario, chsh_value, source_geometry
from oracles import pair_with_blocks

Z, X, Y = linalg.SIGMA_Z, linalg.SIGMA_X, linalg.SIGMA_Y
seeds = st.integers(0, 2**32 - 1)


def analyse(s):
    g = source_geometry(s)
    d = block_weights_and_scores(s, g, joint_block_diagonalize(s.obs_u, s.obs_v))
    return g, d


def test_commuting_pair_gives_one_dim_blocks():
    blocks = joint_block_diagonalize(Z, Z)
    assert [b.dimension for b in blocks] == [1, 1]
    assert sorted(float(b.u_block[0, 0].real) for b in blocks) == [-1.0, 1.0]
    for b in blocks:
        assert np.allclose(b.u_block, b.v_block)
        assert b.gamma == 0.0


def test_pauli_pair_single_block():
    blocks = joint_block_diagonalize(Z, X)
    assert len(blocks) == 1 and blocks[0].dimension == 2
    assert blocks[0].gamma == pytest.approx(math.pi / 2, abs=1e-12)


def test_anticommuting_opposite_pair():
    blocks = joint_block_diagonalize(Z, -Z)
    assert [b.dimension for b in blocks] == [1, 1]
    assert all(b.gamma == math.pi for b in blocks)
    assert np.allclose(reassemble(blocks, "u"), Z)
    assert np.allclose(reassemble(blocks, "v"), -Z)


def test_rejects_non_unitary():
    with pytest.raises(JordanError):
        joint_block_diagonalize(np.diag([1.0, 0.5]), Z)
    with pytest.raises(JordanError):
        joint_block_diagonalize(Z, np.eye(3))


@settings(max_examples=60, deadline=None)
@given(seeds, st.lists(st.floats(0.01, math.pi - 0.01), max_size=3),
       st.integers(0, 2), st.integers(0, 1), st.integers(0, 1))
def test_round_trip_with_known_angles(seed, gammas, ones, minus, mixed):
    if 2 * len(gammas) + ones + minus + mixed == 0:
        ones = 1
    rng = np.random.default_rng(seed)
    u, v = pair_with_blocks(rng, gammas, ones, minus, mixed)
    blocks = joint_block_diagonalize(u, v)
    assert np.max(np.abs(reassemble(blocks, "u") - u)) <= 1e-9
    assert np.max(np.abs(reassemble(blocks, "v") - v)) <= 1e-9
    got = sorted(b.gamma for b in blocks if b.dimension == 2)
    assert np.allclose(got, sorted(gammas), atol=1e-8)
    n = u.shape[0]
    total = sum(b.projector for b in blocks)
    assert np.allclose(total, np.eye(n), atol=1e-9)
    basis = np.hstack([b.basis for b in blocks])
    assert np.allclose(basis.conj().T @ basis, np.eye(n), atol=1e-9)
    a = 0.5 * (u + v)
    for b in blocks:
        assert linalg.is_hermitian_unitary(b.u_block, 1e-8)
        assert linalg.is_hermitian_unitary(b.v_block, 1e-8)
        # invariance under both observables
        assert np.allclose(b.projector @ u @ b.projector, u @ b.projector, atol=1e-9)
        if b.dimension == 2:
            c = np.linalg.eigvalsh(b.basis.conj().T @ a @ b.basis)
            assert math.cos(b.gamma / 2) == pytest.approx(c.max(), abs=1e-8)


def test_w_operator_pauli_block():
    s = optimal_attack(AttackParams(0.5))
    g = source_geometry(s)
    blk = joint_block_diagonalize(Z, X)[0]
    w = block_w_operator(blk, g, s.dim_e)
    comm = 1j * (Z @ X - X @ Z) / 2
    assert np.allclose(w, comm) or np.allclose(w, -comm)
    assert np.allclose(w, -Y) or np.allclose(w, Y)
    y_b = linalg.partial_trace(g.y_op, 2, s.dim_e, "B")
    assert np.trace(w @ y_b).real >= 0


def test_w_operator_absent_for_commuting():
    s = optimal_attack(AttackParams(0.5))
    g = source_geometry(s)
    for blk in joint_block_diagonalize(Z, Z):
        assert block_w_operator(blk, g, s.dim_e) is None


@pytest.mark.parametrize("f", [0.0, 0.3, 0.6, 0.9, 1.0])
def test_tight_attack_single_block_with_equality(f):
    s = optimal_attack(AttackParams(f))
    g, d = analyse(s)
    s_val = chsh_value(s)
    checks = check_block_inequalities(s, g, d, eve_sign_operator(s, g))
    if f > 0:
        assert len(d.per_block) == 1
        rec = d.per_block[0]
        assert rec.p_k == pytest.approx(1.0, abs=1e-12)
        assert rec.s_k == pytest.approx(s_val, abs=1e-12)
        y_b = linalg.partial_trace(g.y_op, 2, s.dim_e, "B")
        assert 0.5 * np.trace(rec.w_op @ y_b).real == pytest.approx(math.sqrt(s_val ** 2 / 4 - 1), abs=1e-8)
        witness = next(c for c in checks[0].checks if c.name == "witness")
        assert abs(witness.slack) <= 1e-7
    else:
        # X_B vanishes, so U = V and every block is one-dimensional
        assert all(r.dimension == 1 for r in d.per_block)
    chain = aggregate_distance_bound(d, s, g)
    for link in chain.links:
        assert abs(link.slack) <= 1e-7
    assert chain.aggregate == pytest.approx(trace_distance_bound(s_val), abs=1e-7)


def test_block_orthogonal_to_support_has_zero_weight():
    # Bob dimension 3; the source lives on |0>, |1> and block {|2>} is untouched
    up = np.zeros((3, 3)); up[0, 0] = 1
    dn = np.zeros((3, 3)); dn[1, 1] = 1
    plus = np.zeros((3, 3)); plus[:2, :2] = 0.5
    minus = np.zeros((3, 3)); minus[:2, :2] = [[0.5, -0.5], [-0.5, 0.5]]
    u = np.eye(3, dtype=complex); u[:2, :2] = (Z + X) / math.sqrt(2)
    v = np.eye(3, dtype=complex); v[:2, :2] = (Z - X) / math.sqrt(2)
    s = Scenario(3, 1, up, dn, plus, minus, u, v)
    g, d = analyse(s)
    zero = [r for b, r in zip(d.blocks, d.per_block) if b.dimension == 1 and abs(b.basis[2, 0]) > 0.99]
    assert len(zero) == 1
    assert zero[0].p_k == pytest.approx(0.0, abs=1e-12)
    assert zero[0].s_k == pytest.approx(0.0, abs=1e-12)
    checks = check_block_inequalities(s, g, d, eve_sign_operator(s, g))
    assert all(c.slack >= -1e-7 for bc in checks for c in bc.checks)


def test_block_distance_bound_conventions():
    assert block_distance_bound(0.0, 0.0) == 0.0
    assert block_distance_bound(1.0, 2.4) == pytest.approx(trace_distance_bound(2.4))
    assert block_distance_bound(0.5, 1.2) == pytest.approx(0.5 * trace_distance_bound(2.4))


def test_check_rejects_bad_eve_unitary():
    s = optimal_attack(AttackParams(0.5))
    g, d = analyse(s)
    with pytest.raises(JordanError):
        check_block_inequalities(s, g, d, np.diag([1.0, 0.5]))


@settings(max_examples=120, deadline=None)
@given(seeds, st.integers(2, 4), st.integers(1, 4))
def test_block_invariants_on_random_sources(seed, db, de):
    s = random_qubit_scenario(seed, db, de)
    g, d = analyse(s)
    s_val = chsh_value(s)
    assert d.p_total == pytest.approx(1.0, abs=1e-9)
    assert d.s_total == pytest.approx(s_val, abs=1e-9)
    for rec in d.per_block:
        assert rec.p_k >= -1e-12
    checks = check_block_inequalities(s, g, d, eve_sign_operator(s, g))
    for bc in checks:
        for c in bc.checks:
            assert c.slack >= -1e-7, (c.name, c.slack)
        assert not bc.radicand_flag
    for link in aggregate_distance_bound(d, s, g).links:
        assert link.slack >= -1e-7, (link.name, link.slack)


def test_decomposition_serializes():
    s = random_qubit_scenario(2, 3, 2)
    _, d = analyse(s)
    doc = d.to_dict()
    assert doc["p_total"] == pytest.approx(1.0)
    assert {"dimension", "gamma", "p_k", "s_k"} <= set(doc["blocks"][0])
