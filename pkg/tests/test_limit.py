import numpy as np
import pytest
from numpy.testing import assert_allclose

from decoq.lindblad import builtin_spec, compile, dephasing, hamiltonian_spec, table_spec
from decoq.limit import (
    MIXED_KINDS,
    build,
    expected_state,
    expected_state_time_dependent,
    lift_mixed_generators,
    lift_moment_generator,
    signature_lift,
)
from decoq.operator_space import (
    SIGMA_1,
    SIGMA_3,
    SuperOp,
    expm,
    is_density,
    random_density,
    random_hermitian,
    sup_norm,
)


@pytest.fixture
def unitary_gens(rng, pauli1):
    L = compile(hamiltonian_spec(random_hermitian(2, rng)))
    return build(L, pauli1, 0.1)


def test_tau_must_be_positive(pauli1, ad_generator):
    with pytest.raises(ValueError):
        build(ad_generator, pauli1, 0.0)


def test_damping_has_no_diffusion_correction(pauli1, ad_generator):
    """L_j² = 0，故 L̂ = L̄"""
    gens = build(ad_generator, pauli1, 0.01)
    for L_j in gens.L_list:
        assert_allclose(L_j.matrix @ L_j.matrix, 0.0, atol=1e-12)
    assert_allclose(gens.L_hat.matrix, gens.L_bar.matrix, atol=1e-12)
    assert gens.L_hat_drift is gens.L_bar


def test_dephasing_is_unchanged_by_pauli_twirl(pauli1):
    gens = build(dephasing(0.5), pauli1, 0.1)
    assert sup_norm(gens.diffusion_part) <= 1e-12
    assert_allclose(gens.L_hat.matrix, dephasing(0.5).matrix, atol=1e-12)


def test_unitary_limit_is_pure_diffusion(unitary_gens):
    assert sup_norm(unitary_gens.L_bar) <= 1e-12
    square_sum = sum(L_j.matrix @ L_j.matrix for L_j in unitary_gens.L_list)
    assert_allclose(unitary_gens.L_hat.matrix, 0.1 / 4 * square_sum, atol=1e-12)
    # L_j 反厄米，L̂ 厄米半负定
    assert_allclose(unitary_gens.L_hat.matrix, unitary_gens.L_hat.matrix.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(unitary_gens.L_hat.matrix).max() <= 1e-12


def test_expected_state_at_zero(pauli1, ad_generator, rng):
    rho = random_density(2, rng)
    gens = build(ad_generator, pauli1, 0.01)
    assert_allclose(expected_state(gens, rho, 0.0), rho, atol=1e-14)


def test_expected_state_is_a_state(pauli1, ad_generator, rng):
    gens = build(ad_generator, pauli1, 0.01)
    for t in (0.1, 1.0, 5.0):
        assert is_density(expected_state(gens, random_density(2, rng), t), atol=1e-9)


def test_expected_state_rejects_bad_input(pauli1, ad_generator):
    gens = build(ad_generator, pauli1, 0.01)
    with pytest.raises(ValueError):
        expected_state(gens, np.eye(2), 1.0)
    with pytest.raises(ValueError):
        expected_state(gens, np.eye(2) / 2, -1.0)
    with pytest.raises(ValueError):
        expected_state(gens, np.eye(2) / 2, 1.0, scheme="physical")


def test_drift_limit_keeps_unitary_system_still(unitary_gens, rng):
    rho = random_density(2, rng)
    assert_allclose(expected_state(unitary_gens, rho, 3.0, scheme="drift"), rho, atol=1e-10)


def test_diffusion_limit_relaxes_unitary_system(pauli1):
    gens = build(compile(hamiltonian_spec(SIGMA_1 + 0.5 * SIGMA_3)), pauli1, 0.1)
    rho = np.array([[1.0, 0.0], [0.0, 0.0]])
    late = expected_state(gens, rho, 100.0)
    assert_allclose(late, np.eye(2) / 2, atol=1e-6)


class TestLifts:

    def test_single_slot_lift_is_L_hat(self, pauli1, ad_generator):
        gens = build(ad_generator, pauli1, 0.05)
        assert_allclose(lift_moment_generator(gens, 1).dense, gens.L_hat.matrix, atol=1e-12)

    def test_two_slot_lift_structure(self, pauli1, ad_generator):
        gens = build(ad_generator, pauli1, 0.05)
        eye = np.eye(4)
        expected = np.kron(gens.L_hat.matrix, eye) + np.kron(eye, gens.L_hat.matrix.conj())
        for L_j in gens.L_list:
            expected = expected + 2 * 0.05 / 4 * np.kron(L_j.matrix, L_j.matrix.conj())
        assert_allclose(signature_lift(gens, "+-").dense, expected, atol=1e-12)

    def test_check2_for_unitary_generator(self, unitary_gens):
        """L_j† = −L_j 时交叉项反号：check2 = L̂⁽²⁾ − 4(τ/|J|)Σ L_j⊗L_j"""
        check2 = lift_mixed_generators(unitary_gens, "check2").dense
        lift2 = lift_moment_generator(unitary_gens, 2).dense
        cross = sum(np.kron(L_j.matrix, L_j.matrix) for L_j in unitary_gens.L_list)
        assert_allclose(check2, lift2 - 4 * 0.1 / 4 * cross, atol=1e-12)

    @pytest.mark.parametrize("kind", sorted(MIXED_KINDS))
    def test_mixed_arities(self, pauli1, ad_generator, kind):
        gens = build(ad_generator, pauli1, 0.05)
        assert lift_mixed_generators(gens, kind).arity == len(MIXED_KINDS[kind])

    def test_unknown_kind_and_signature(self, pauli1, ad_generator):
        gens = build(ad_generator, pauli1, 0.05)
        with pytest.raises(ValueError):
            lift_mixed_generators(gens, "c99")
        with pytest.raises(ValueError):
            signature_lift(gens, "+x")
        with pytest.raises(ValueError):
            lift_moment_generator(gens, 0)

    def test_lift_of_zero_generator_is_zero(self, pauli1):
        gens = build(SuperOp.zero(2), pauli1, 0.1)
        assert_allclose(lift_moment_generator(gens, 3).dense, 0.0)


class TestTimeDependent:

    def test_constant_table_matches_constant_limit(self, pauli1, ad_generator):
        spec = builtin_spec("amplitude_damping", gamma=1.0)
        rho = np.array([[0.6, 0.2], [0.2, 0.4]])
        result = expected_state_time_dependent(table_spec([0.0, 1.0], [spec, spec]), pauli1, 0.01, rho, 0.5)
        gens = build(ad_generator, pauli1, 0.01)
        assert_allclose(result.state, expected_state(gens, rho, 0.5), atol=1e-10)
        assert not result.flagged
        assert result.sampling == "left_endpoint"
        assert result.n_factors >= 1

    def test_rough_table_is_flagged_but_computed(self, pauli1):
        spec = table_spec([0.0, 1.0], [builtin_spec("dephasing", gamma=1.0), builtin_spec("dephasing", gamma=3.0)])
        result = expected_state_time_dependent(spec, pauli1, 1.0, np.eye(2) / 2, 0.8)
        assert result.flagged
        assert result.max_smoothness_ratio > 0.1
        assert is_density(result.state, atol=1e-9)

    def test_smooth_table_not_flagged(self, pauli1):
        spec = table_spec([0.0, 1.0], [builtin_spec("dephasing", gamma=1.0), builtin_spec("dephasing", gamma=3.0)])
        result = expected_state_time_dependent(spec, pauli1, 0.001, np.eye(2) / 2, 0.8)
        assert not result.flagged

    def test_dephasing_ramp_closed_form(self, pauli1):
        """γ(t) = 1 + 2t 的退相位：相干项衰减 exp(−2∫γ) = exp(−2(t + t²))"""
        spec = table_spec([0.0, 1.0], [builtin_spec("dephasing", gamma=1.0), builtin_spec("dephasing", gamma=3.0)])
        rho = np.array([[0.5, 0.5], [0.5, 0.5]])
        t = 0.8
        result = expected_state_time_dependent(spec, pauli1, 0.001, rho, t)
        assert result.state[0, 1] == pytest.approx(0.5 * np.exp(-2 * (t + t * t)), abs=2e-3)

    def test_time_outside_table(self, pauli1):
        spec = table_spec([0.0, 1.0], [builtin_spec("dephasing", gamma=1.0)] * 2)
        with pytest.raises(ValueError):
            expected_state_time_dependent(spec, pauli1, 0.01, np.eye(2) / 2, 2.0)


def test_expected_state_matches_exponential(pauli1, ad_generator, rng):
    gens = build(ad_generator, pauli1, 0.02)
    rho = random_density(2, rng)
    assert_allclose(expected_state(gens, rho, 0.7), expm(gens.L_hat, 0.7).apply(rho), atol=1e-14)
