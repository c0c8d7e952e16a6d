import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmchsh import linalg
from oracles import partial_trace_loops, trace_norm_svd


def rand_herm(rng, n):
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return g + g.conj().T


def rand_state(rng, n):
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    m = g @ g.conj().T
    return m / np.trace(m).real


seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 4)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 4), dims)
def test_partial_trace_matches_loops(seed, db, de):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(db * de,) * 2) + 1j * rng.normal(size=(db * de,) * 2)
    for keep in ("B", "E"):
        assert np.allclose(linalg.partial_trace(m, db, de, keep), partial_trace_loops(m, db, de, keep), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 4), dims)
def test_partial_trace_of_product(seed, db, de):
    rng = np.random.default_rng(seed)
    a, b = rand_state(rng, db), rand_state(rng, de)
    ab = linalg.kron(a, b)
    assert np.allclose(linalg.partial_trace(ab, db, de, "B"), a, atol=1e-12)
    assert np.allclose(linalg.partial_trace(ab, db, de, "E"), b, atol=1e-12)


def test_partial_trace_rejects_bad_shape():
    with pytest.raises(linalg.DimensionError):
        linalg.partial_trace(np.eye(5), 2, 2, "B")
    with pytest.raises(ValueError):
        linalg.partial_trace(np.eye(4), 2, 2, "X")


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 6))
def test_trace_norm_matches_svd(seed, n):
    rng = np.random.default_rng(seed)
    h = rand_herm(rng, n)
    assert linalg.trace_norm(h) == pytest.approx(trace_norm_svd(h), rel=1e-10, abs=1e-12)
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    assert linalg.trace_norm(g) == pytest.approx(trace_norm_svd(g), rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 6))
def test_sign_operator_is_helstrom(seed, n):
    rng = np.random.default_rng(seed)
    h = rand_herm(rng, n)
    u = linalg.sign_operator(h)
    assert linalg.is_hermitian_unitary(u, 1e-9)
    assert np.trace(u @ h).real == pytest.approx(linalg.trace_norm(h), rel=1e-10)


def test_sign_operator_zero_eigenvalues_map_to_plus_one():
    u = linalg.sign_operator(np.diag([2.0, 0.0, -1.0]))
    assert np.allclose(u, np.diag([1.0, 1.0, -1.0]))


def test_sign_operator_rejects_non_hermitian():
    with pytest.raises(linalg.NotHermitianError):
        linalg.sign_operator(np.array([[0, 1], [0, 0]]))


def test_eig_hermitian_descending():
    w, v = linalg.eig_hermitian(np.diag([1.0, 3.0, 2.0]))
    assert list(w) == [3.0, 2.0, 1.0]
    assert np.allclose(np.abs(v[:, 0]), [0, 1, 0])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_bloch_round_trip(r):
    m = linalg.from_bloch(r)
    assert np.allclose(linalg.bloch_vector(m), r, atol=1e-12)


def test_paulis_anticommute():
    x, y, z = linalg.PAULIS
    assert np.allclose(x @ y, 1j * z)
    for a in linalg.PAULIS:
        for b in linalg.PAULIS:
            if a is not b:
                assert np.allclose(a @ b + b @ a, 0)


def test_projector_of_unit_vector():
    p = linalg.projector(np.array([1.0, 1.0j]) / np.sqrt(2.0))
    assert np.allclose(p @ p, p)
    assert np.trace(p).real == pytest.approx(1.0)


def test_is_hermitian_unitary():
    assert linalg.is_hermitian_unitary(linalg.SIGMA_X)
    assert not linalg.is_hermitian_unitary(np.diag([1.0, 0.5]))
    assert not linalg.is_hermitian_unitary(np.array([[0, -1], [1, 0]]))


def test_json_round_trip_exact():
    rng = np.random.default_rng(5)
    m = rand_herm(rng, 3)
    back = linalg.matrix_from_json(linalg.matrix_to_json(m))
    assert np.array_equal(back, m)


def test_matrix_from_json_errors():
    with pytest.raises(linalg.DimensionError):
        linalg.matrix_from_json([[1.0, 2.0]])
    with pytest.raises(linalg.LinalgError):
        linalg.matrix_from_json([[["a", 0]]])
