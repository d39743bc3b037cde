import numpy as np
import pytest
from numpy.testing import assert_allclose

from decoq.operator_space import (
    PAULIS,
    LiftedOp,
    SuperOp,
    Ad_of,
    ad_of,
    expm,
    expm_action,
    flip_trace,
    hs_inner,
    matrix_unit,
    orthonormal_pauli_basis,
    partial_trace,
    random_density,
    random_hermitian,
    random_unitary,
    sandwich,
    sup_norm,
    swap_operator,
    unvec,
    vec,
)


def test_vec_is_column_stacking():
    x = np.arange(9).reshape(3, 3)
    v = vec(x)
    for k in range(3):
        for l in range(3):
            assert v[l * 3 + k] == x[k, l]
    assert_allclose(unvec(v), x)


def test_matrix_unit_lands_on_expected_index():
    v = vec(matrix_unit(1, 2, 3))
    assert v[2 * 3 + 1] == 1.0
    assert np.count_nonzero(v) == 1


def test_sandwich_matches_direct_product(rng):
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    b = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    x = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    op = SuperOp(3, sandwich(a, b))
    assert_allclose(op.apply(x), a @ x @ b, atol=1e-12)


def test_from_map_reproduces_the_map(rng):
    u = random_unitary(2, rng)
    op = SuperOp.from_map(lambda x: u @ x @ u.conj().T, 2)
    assert_allclose(op.matrix, Ad_of(u).matrix, atol=1e-12)


@pytest.mark.parametrize("dim_h", [2, 3, 4])
def test_Ad_is_a_homomorphism(rng, dim_h):
    u = random_unitary(dim_h, rng)
    v = random_unitary(dim_h, rng)
    assert_allclose(Ad_of(u @ v).matrix, (Ad_of(u) @ Ad_of(v)).matrix, atol=1e-12)


def test_ad_of_is_commutator(rng):
    h = random_hermitian(3, rng)
    x = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    assert_allclose(ad_of(h).apply(x), h @ x - x @ h, atol=1e-12)


def test_ad_of_rejects_non_hermitian():
    with pytest.raises(ValueError, match="not hermitian"):
        ad_of(np.array([[0, 1], [0, 0]]))


def test_Ad_of_rejects_non_unitary():
    with pytest.raises(ValueError, match="not unitary"):
        Ad_of(2 * np.eye(2))


def test_hs_adjoint_duality(rng):
    m = SuperOp(2, rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    x = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    y = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    assert hs_inner(m.apply(x), y) == pytest.approx(hs_inner(x, m.dagger().apply(y)), abs=1e-12)


def test_expm_of_hamiltonian_generator_is_conjugation(rng):
    h = random_hermitian(2, rng)
    t = 0.7
    evals, evecs = np.linalg.eigh(h)
    e_iht = (evecs * np.exp(1j * t * evals)) @ evecs.conj().T
    gen = SuperOp(2, 1j * ad_of(h).matrix)
    x = random_density(2, rng)
    assert_allclose(expm(gen, t).apply(x), e_iht @ x @ e_iht.conj().T, atol=1e-12)


def test_sup_norm_kinds():
    m = SuperOp(2, np.diag([3.0, 4.0, 0.0, 0.0]))
    assert sup_norm(m) == pytest.approx(4.0)
    assert sup_norm(m, "frobenius") == pytest.approx(5.0)
    with pytest.raises(ValueError):
        sup_norm(m, "nuclear")


def test_superop_rejects_wrong_shape():
    with pytest.raises(ValueError):
        SuperOp(2, np.eye(3))


def test_superop_matrix_is_read_only():
    m = SuperOp.identity(2)
    with pytest.raises(ValueError):
        m.matrix[0, 0] = 2.0


def test_partial_trace_of_product(rng):
    a = random_density(2, rng)
    b = random_density(3, rng)
    joint = np.kron(a, b)
    assert_allclose(partial_trace(joint, (2, 3), keep="system"), a, atol=1e-12)
    assert_allclose(partial_trace(joint, (2, 3), keep="bath"), b, atol=1e-12)


def test_flip_trace_equals_trace_with_swap(rng):
    d = 4
    m = rng.normal(size=(d * d, d * d)) + 1j * rng.normal(size=(d * d, d * d))
    assert flip_trace(m, d) == pytest.approx(np.trace(swap_operator(d) @ m), abs=1e-10)


def test_swap_operator_swaps_factors(rng):
    x = rng.normal(size=3)
    y = rng.normal(size=3)
    assert_allclose(swap_operator(3) @ np.kron(x, y), np.kron(y, x))


class TestLiftedOp:

    def _random_lift(self, rng, d=4, arity=2):
        mats = [rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for _ in range(3)]
        return LiftedOp(d, arity, (
            (1.0, ((0, mats[0]),)),
            (0.5j, ((1, mats[1]),)),
            (2.0, ((0, mats[2]), (1, mats[0]))),
        ))

    def test_apply_matches_dense(self, rng):
        op = self._random_lift(rng)
        w = rng.normal(size=op.dim) + 1j * rng.normal(size=op.dim)
        assert_allclose(op.apply(w), op.dense @ w, atol=1e-10)

    def test_apply_accepts_columns(self, rng):
        op = self._random_lift(rng)
        w = rng.normal(size=(op.dim, 3))
        assert_allclose(op.apply(w), op.dense @ w, atol=1e-10)

    def test_apply_product_matches_dense(self, rng):
        op = self._random_lift(rng)
        x = rng.normal(size=4)
        y = rng.normal(size=4)
        assert_allclose(op.apply_product([x, y]), op.dense @ np.kron(x, y), atol=1e-10)

    def test_trace_and_dagger(self, rng):
        op = self._random_lift(rng)
        assert op.trace() == pytest.approx(np.trace(op.dense), abs=1e-10)
        assert_allclose(op.dagger().dense, op.dense.conj().T, atol=1e-12)

    def test_repeated_slot_applies_in_listed_order(self, rng):
        a = rng.normal(size=(4, 4))
        b = rng.normal(size=(4, 4))
        op = LiftedOp(4, 2, ((1.0, ((0, a), (0, b))),))
        assert_allclose(op.dense, np.kron(b @ a, np.eye(4)), atol=1e-12)
        w = rng.normal(size=16)
        assert_allclose(op.apply(w), op.dense @ w, atol=1e-12)

    def test_slot_out_of_range(self):
        with pytest.raises(ValueError):
            LiftedOp(2, 2, ((1.0, ((2, np.eye(2)),)),))

    def test_matrix_free_exponential_matches_dense(self, rng):
        op = self._random_lift(rng).scaled(0.1)
        w = rng.normal(size=op.dim) + 1j * rng.normal(size=op.dim)
        dense = expm_action(op, 0.5, w, matrix_free=False)
        free = expm_action(op, 0.5, w, matrix_free=True)
        assert_allclose(free, dense, rtol=1e-8, atol=1e-10)


def test_expm_action_at_zero_is_identity(rng):
    w = rng.normal(size=4)
    assert_allclose(expm_action(SuperOp.identity(2), 0.0, w), w)


def test_pauli_basis_is_orthonormal():
    basis = orthonormal_pauli_basis(2)
    gram = np.array([[hs_inner(a, b) for b in basis] for a in basis])
    assert_allclose(gram, np.eye(16), atol=1e-12)


def test_paulis_are_unitary_and_hermitian():
    for p in PAULIS:
        assert_allclose(p @ p.conj().T, np.eye(2))
        assert_allclose(p, p.conj().T)
