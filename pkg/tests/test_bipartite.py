import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entfree.bipartite import (
    CNOT,
    SWAP,
    BipartiteState,
    UnitaryTag,
    classify_unitary_2q,
    coupling_coefficient,
    factorise_hamiltonian,
    is_product,
    linear_entropy,
    operator_schmidt_coefficients,
    purity,
    purity_via_partial_trace,
    reduced_density,
    schmidt_decompose,
)
from entfree.numerics import (
    DimensionError,
    NotHermitianError,
    hermitian_expm,
    hs_inner,
    kron,
    random_hermitian,
    random_state,
    random_unitary,
)

SZ = np.diag([1.0, -1.0]).astype(complex)
PLUS = np.array([1, 1]) / np.sqrt(2)
BELL = BipartiteState(2, 2, np.array([1, 0, 0, 1]) / np.sqrt(2))
seeds = st.integers(0, 2**32 - 1)


def completed_basis(v, rng):
    """Orthonormal basis whose first vector is v (Gram-Schmidt on random vectors)."""
    d = v.size
    cols = [v]
    while len(cols) < d:
        w = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        for c in cols:
            w = w - np.vdot(c, w) * c
        cols.append(w / np.linalg.norm(w))
    return np.array(cols).T


def test_state_validation():
    with pytest.raises(ValueError):
        BipartiteState(2, 2, np.ones(4))
    with pytest.raises(DimensionError):
        BipartiteState(2, 3, np.ones(4) / 2)
    with pytest.raises(DimensionError):
        BipartiteState(65, 64, np.ones(65 * 64) / np.sqrt(65 * 64))
    s = BipartiteState.product(PLUS, PLUS)
    with pytest.raises(ValueError):
        s.amplitudes[0] = 0


def test_schmidt_product_and_bell(rng):
    sd = schmidt_decompose(BipartiteState.product(random_state(3, rng), random_state(2, rng)))
    assert sd.coefficients[0] == pytest.approx(1, abs=1e-12)
    assert np.all(sd.coefficients[1:] < 1e-12)
    sd = schmidt_decompose(BELL)
    assert np.allclose(sd.coefficients, [2 ** -0.5] * 2, atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 5), st.integers(1, 5))
def test_schmidt_invariants(seed, d_a, d_b):
    rng = np.random.default_rng(seed)
    s = BipartiteState.from_vector(random_state(d_a * d_b, rng), d_a, d_b)
    sd = schmidt_decompose(s)
    c = sd.coefficients
    assert abs(np.sum(c ** 2) - 1) <= 1e-12
    assert np.all(np.diff(c) <= 1e-15) and np.all(c >= 0)
    assert np.allclose(sd.left_basis @ sd.left_basis.conj().T, np.eye(d_a), atol=1e-10)
    assert np.allclose(sd.right_basis @ sd.right_basis.conj().T, np.eye(d_b), atol=1e-10)
    assert np.max(np.abs(sd.reconstruct() - s.amplitudes)) <= 1e-10
    for row in sd.left_basis:
        first = row[np.flatnonzero(np.abs(row) > 1e-12)[0]]
        assert abs(first.imag) < 1e-12 and first.real > 0


def test_purity_examples(rng):
    assert purity(BipartiteState.product(random_state(3, rng), random_state(4, rng))) == pytest.approx(1, abs=1e-12)
    assert purity(BELL) == pytest.approx(0.5, abs=1e-15)
    assert np.allclose(reduced_density(BELL, "A"), np.eye(2) / 2)
    assert linear_entropy(BELL) == pytest.approx(0.5)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 4), st.integers(1, 4))
def test_purity_two_routes_and_sides(seed, d_a, d_b):
    rng = np.random.default_rng(seed)
    s = BipartiteState.from_vector(random_state(d_a * d_b, rng), d_a, d_b)
    p = purity(s)
    assert abs(p - purity_via_partial_trace(s, "A")) <= 1e-12
    assert abs(p - purity_via_partial_trace(s, "B")) <= 1e-12
    assert abs(p - np.sum(schmidt_decompose(s).coefficients ** 4)) <= 1e-12


def test_is_product_boundary():
    assert is_product(BipartiteState.product(PLUS, PLUS))
    assert not is_product(BELL)
    tol = 1e-3
    c2 = tol
    s = BipartiteState(2, 2, np.array([np.sqrt(1 - c2 ** 2), 0, 0, c2]))
    assert schmidt_decompose(s).coefficients[1] == tol
    assert not is_product(s, tol=tol)
    assert is_product(s, tol=tol * 1.0001)


def test_factorise_examples(rng):
    h_a, h_b = random_hermitian(3, rng), random_hermitian(2, rng)
    h = kron(h_a, np.eye(2)) + kron(np.eye(3), h_b)
    assert factorise_hamiltonian(h, 3, 2).coupling_norm <= 1e-11
    dec = factorise_hamiltonian(kron(SZ, SZ), 2, 2)
    assert np.allclose(dec.local_a, 0) and np.allclose(dec.local_b, 0) and dec.scalar == 0
    assert dec.coupling_norm == pytest.approx(2.0, abs=1e-14)
    with pytest.raises(NotHermitianError):
        factorise_hamiltonian(np.triu(np.ones((4, 4))), 2, 2)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_factorise_invariants(seed):
    rng = np.random.default_rng(seed)
    h = random_hermitian(6, rng)
    dec = factorise_hamiltonian(h, 2, 3)
    assert np.max(np.abs(dec.reconstruct() - h)) <= 1e-11
    assert abs(np.trace(dec.local_a)) <= 1e-12 and abs(np.trace(dec.local_b)) <= 1e-12
    from entfree.numerics import partial_trace
    assert np.max(np.abs(partial_trace(dec.coupling, "A", 2, 3))) <= 1e-11
    assert np.max(np.abs(partial_trace(dec.coupling, "B", 2, 3))) <= 1e-11
    parts = [kron(dec.local_a, np.eye(3)), kron(np.eye(2), dec.local_b),
             dec.scalar * np.eye(6), dec.coupling]
    for i in range(4):
        for j in range(i + 1, 4):
            assert abs(hs_inner(parts[i], parts[j])) <= 1e-11


def test_coupling_examples(rng):
    h = kron(random_hermitian(2, rng), np.eye(3)) + kron(np.eye(2), random_hermitian(3, rng))
    assert coupling_coefficient(h, random_state(2, rng), random_state(3, rng)) <= 1e-24 + 1e-14
    assert coupling_coefficient(kron(SZ, SZ), PLUS, PLUS) == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_coupling_matches_basis_completion(seed):
    rng = np.random.default_rng(seed)
    d_a, d_b = 3, 4
    h = random_hermitian(d_a * d_b, rng)
    pa, pb = random_state(d_a, rng), random_state(d_b, rng)
    ua, ub = completed_basis(pa, rng), completed_basis(pb, rng)
    # H in the completed product basis; column (0,0) is the product state
    hm = kron(ua, ub).conj().T @ h @ kron(ua, ub)
    col = hm[:, 0].reshape(d_a, d_b)
    oracle = np.sum(np.abs(col[1:, 1:]) ** 2)
    c = coupling_coefficient(h, pa, pb)
    assert abs(c - oracle) <= 1e-12 * max(1, oracle)
    theta = rng.uniform(0, 2 * np.pi)
    assert abs(coupling_coefficient(h, np.exp(1j * theta) * pa, pb) - c) <= 1e-12


def test_coupling_zero_whenever_factorisable():
    rng = np.random.default_rng(99)
    for _ in range(100):
        h = kron(random_hermitian(2, rng), np.eye(2)) + kron(np.eye(2), random_hermitian(2, rng))
        assert factorise_hamiltonian(h, 2, 2).coupling_norm <= 1e-11
        assert coupling_coefficient(h, random_state(2, rng), random_state(2, rng)) <= 1e-24 + 1e-14


def test_classifier_examples(rng):
    u = kron(random_unitary(2, rng), random_unitary(2, rng))
    assert classify_unitary_2q(u).tag is UnitaryTag.LOCAL
    assert classify_unitary_2q(SWAP).tag is UnitaryTag.SWAP_LOCAL
    res = classify_unitary_2q(CNOT)
    assert res.tag is UnitaryTag.ENTANGLING
    # |0><0| x I + |1><1| x X: two orthogonal terms, each of HS norm 1 * sqrt(2)
    assert np.allclose(res.operator_schmidt_coefficients[:2], [np.sqrt(2)] * 2, atol=1e-14)
    assert np.all(res.operator_schmidt_coefficients[2:] < 1e-14)
    with pytest.raises(ValueError):
        classify_unitary_2q(2 * np.eye(4))
    with pytest.raises(DimensionError):
        classify_unitary_2q(np.eye(8))


@settings(max_examples=50, deadline=None)
@given(seeds, st.floats(-10, 10))
def test_exp_of_local_generator_is_local(seed, s):
    rng = np.random.default_rng(seed)
    h = kron(random_hermitian(2, rng), np.eye(2)) + kron(np.eye(2), random_hermitian(2, rng))
    assert classify_unitary_2q(hermitian_expm(h, s)).tag is UnitaryTag.LOCAL


def test_operator_schmidt_of_identity():
    s = operator_schmidt_coefficients(np.eye(6), 2, 3)
    assert s[0] == pytest.approx(np.sqrt(6)) and np.all(s[1:] < 1e-14)
