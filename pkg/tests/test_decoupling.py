import numpy as np
import pytest
from numpy.testing import assert_allclose

from decoq.decoupling import (
    DecouplingSet,
    averaged_generator,
    decoupling_condition_holds,
    fluctuation_generators,
    from_config,
    from_unitaries,
    pauli_set,
    validate,
)
from decoq.errors import ConfigError
from decoq.lindblad import amplitude_damping, compile, dephasing, gkls_spec, hamiltonian_spec
from decoq.operator_space import SIGMA_1, SIGMA_2, SIGMA_3, SuperOp, random_hermitian, sup_norm


@pytest.mark.parametrize("n_qubits", [1, 2])
def test_pauli_set_is_valid(n_qubits):
    dset = pauli_set(n_qubits)
    ok, report = validate(dset)
    assert ok, report
    assert dset.size == 4 ** n_qubits
    assert_allclose(dset.unitaries[0], np.eye(2 ** n_qubits))


def test_identity_must_come_first():
    dset = DecouplingSet(2, (SIGMA_1, np.eye(2), SIGMA_2, SIGMA_3))
    ok, report = validate(dset)
    assert not ok
    assert report["check"] == "identity_first"


def test_non_unitary_member():
    ok, report = validate(DecouplingSet(2, (np.eye(2), 2 * SIGMA_1)))
    assert not ok
    assert report["check"] == "unitary"
    assert report["index"] == 1


def test_missing_group_element():
    ok, report = validate(DecouplingSet(2, (np.eye(2), SIGMA_1, SIGMA_3)))
    assert not ok
    assert report["check"] == "closure"


def test_group_without_averaging_property():
    ok, report = validate(DecouplingSet(2, (np.eye(2), SIGMA_3)))
    assert not ok
    assert report["check"] == "averaging"


def test_closure_is_modulo_phase():
    ok, _ = validate(DecouplingSet(2, (np.eye(2), 1j * SIGMA_1, SIGMA_2, -SIGMA_3)))
    assert ok


def test_from_unitaries_raises_on_invalid_set():
    with pytest.raises(ValueError, match="averaging"):
        from_unitaries([np.eye(2), SIGMA_3])


def test_unitary_generators_are_decoupled(rng):
    for dim_h, dset in ((2, pauli_set(1)), (4, pauli_set(2))):
        for _ in range(20):
            L = compile(hamiltonian_spec(random_hermitian(dim_h, rng)))
            assert decoupling_condition_holds(L, dset)


def test_dissipative_generators_are_not_decoupled(rng):
    for dim_h, dset in ((2, pauli_set(1)), (4, pauli_set(2))):
        for _ in range(20):
            c = rng.normal(size=(dim_h, dim_h)) + 1j * rng.normal(size=(dim_h, dim_h))
            L = compile(gkls_spec(random_hermitian(dim_h, rng), [c], [1.0]))
            assert not decoupling_condition_holds(L, dset)


def test_fluctuations_sum_to_zero(rng, pauli2):
    c = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    L = compile(gkls_spec(random_hermitian(4, rng), [c], [0.5]))
    total = sum((L_j.matrix for L_j in fluctuation_generators(L, pauli2)), np.zeros((16, 16)))
    assert np.max(np.abs(total)) <= 1e-12 * max(sup_norm(L), 1.0)


def test_averaged_generator_is_pulse_invariant(pauli1, ad_generator):
    L_bar = averaged_generator(ad_generator, pauli1)
    for j in range(pauli1.size):
        assert_allclose(pauli1.conjugate(L_bar, j).matrix, L_bar.matrix, atol=1e-12)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
def test_damping_average_and_spectrum(pauli1, gamma):
    """L̄(x) = −γ(2x − σ₁xσ₁ − σ₂xσ₂)，本征值 {0, −2γ, −2γ, −4γ}"""
    L_bar = averaged_generator(amplitude_damping(gamma), pauli1)
    expected = SuperOp.from_map(lambda x: -gamma * (2 * x - SIGMA_1 @ x @ SIGMA_1 - SIGMA_2 @ x @ SIGMA_2), 2)
    assert_allclose(L_bar.matrix, expected.matrix, atol=1e-12)
    evals = np.sort(np.linalg.eigvals(L_bar.matrix).real)
    assert_allclose(evals, [-4 * gamma, -2 * gamma, -2 * gamma, 0.0], atol=1e-12)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
def test_damping_fluctuations_alternate_in_sign(pauli1, gamma):
    """L₀ = −L₁ = −L₂ = L₃ = −γ(σ₃x + xσ₃ − iσ₁xσ₂ + iσ₂xσ₁)"""
    L_list = fluctuation_generators(amplitude_damping(gamma), pauli1)
    L_0 = SuperOp.from_map(lambda x: -gamma * (SIGMA_3 @ x + x @ SIGMA_3 - 1j * SIGMA_1 @ x @ SIGMA_2
                                               + 1j * SIGMA_2 @ x @ SIGMA_1), 2)
    for L_j, sign in zip(L_list, (1, -1, -1, 1)):
        assert_allclose(L_j.matrix, sign * L_0.matrix, atol=1e-12)


def test_dephasing_is_pauli_covariant(pauli1):
    L = dephasing(0.7)
    assert_allclose(averaged_generator(L, pauli1).matrix, L.matrix, atol=1e-12)


def test_dimension_mismatch(pauli2, ad_generator):
    with pytest.raises(ValueError):
        averaged_generator(ad_generator, pauli2)


def test_dilate_tensors_with_bath_identity(pauli1):
    big = pauli1.dilate(3)
    assert big.dim_h == 6
    for v, w in zip(pauli1.unitaries, big.unitaries):
        assert_allclose(w, np.kron(v, np.eye(3)))


class TestFromConfig:

    def test_pauli(self):
        assert from_config({"type": "pauli", "qubits": 2}, 4).size == 16

    def test_qubit_dimension_mismatch(self):
        with pytest.raises(ConfigError) as e:
            from_config({"type": "pauli", "qubits": 2}, 2)
        assert e.value.path == "decoupling.qubits"

    def test_explicit(self):
        obj = {"type": "explicit", "unitaries": [
            [[1, 0], [0, 1]], [[0, 1], [1, 0]], [[0, [0, -1]], [[0, 1], 0]], [[1, 0], [0, -1]]]}
        assert from_config(obj, 2).size == 4

    def test_explicit_invalid_group(self):
        obj = {"type": "explicit", "unitaries": [[[1, 0], [0, 1]], [[1, 0], [0, -1]]]}
        with pytest.raises(ConfigError) as e:
            from_config(obj, 2)
        assert e.value.path == "decoupling.unitaries"

    def test_unknown_type(self):
        with pytest.raises(ConfigError) as e:
            from_config({"type": "clifford"}, 2)
        assert e.value.path == "decoupling.type"
