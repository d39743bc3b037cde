import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose

from decoq.errors import ConfigError
from decoq.lindblad import (
    GENERAL,
    PURELY_DEPHASING,
    PURELY_UNITARY,
    SIGMA_MINUS,
    amplitude_damping,
    builtin_spec,
    choi_matrix,
    classify_unitarity,
    compile,
    compile_table,
    dephasing,
    from_config,
    gkls_spec,
    hamiltonian_spec,
    is_cpt_generator,
    kraus_ce_spec,
    sample_time_dependent,
    smoothness_ratio,
    table_spec,
)
from decoq.operator_space import SIGMA_1, SIGMA_2, SIGMA_3, SuperOp, expm, random_hermitian, sup_norm


@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
def test_amplitude_damping_matches_gkls_form(gamma):
    gkls = compile(gkls_spec(None, [SIGMA_MINUS], [4 * gamma]))
    assert_allclose(amplitude_damping(gamma).matrix, gkls.matrix, atol=1e-12)


def test_amplitude_damping_closed_form_action():
    L = amplitude_damping(1.0)
    x = np.array([[0.3, 0.2 - 0.1j], [0.2 + 0.1j, 0.7]])
    a, b, c = x[0, 0], x[0, 1], x[1, 0]
    expected = np.array([[-4 * a, -2 * b], [-2 * c, 4 * a]])
    assert_allclose(L.apply(x), expected, atol=1e-12)


def test_kraus_ce_form_matches_builtin():
    b = 2 * SIGMA_MINUS
    a = -0.5 * b.conj().T @ b
    assert_allclose(compile(kraus_ce_spec([b], a)).matrix, amplitude_damping(1.0).matrix, atol=1e-12)


def test_kraus_ce_rejects_non_trace_preserving():
    with pytest.raises(ValueError, match="kraus_ce"):
        compile(kraus_ce_spec([SIGMA_MINUS], np.zeros((2, 2))))


def test_builtin_spec_compiles():
    assert_allclose(compile(builtin_spec("dephasing", gamma=0.5)).matrix, dephasing(0.5).matrix)
    with pytest.raises(ValueError):
        compile(builtin_spec("depolarizing", gamma=1.0))


def test_hamiltonian_generator_is_i_ad(rng):
    h = random_hermitian(2, rng)
    L = compile(hamiltonian_spec(h))
    x = rng.normal(size=(2, 2))
    assert_allclose(L.apply(x), 1j * (h @ x - x @ h), atol=1e-12)


def test_non_hermitian_hamiltonian_rejected():
    with pytest.raises(ValueError, match="not hermitian"):
        compile(hamiltonian_spec(np.array([[0, 1], [0, 0]])))


def test_negative_rate_rejected():
    with pytest.raises(ValueError, match="rate"):
        compile(gkls_spec(None, [SIGMA_MINUS], [-1.0]))


@pytest.mark.parametrize("L", [amplitude_damping(1.0), dephasing(0.3), SuperOp.zero(2)])
def test_builtin_generators_are_cpt(L):
    ok, witness = is_cpt_generator(L)
    assert ok, witness


def test_random_gkls_is_cpt(rng):
    c = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    L = compile(gkls_spec(random_hermitian(3, rng), [c], [0.7]))
    ok, _ = is_cpt_generator(L)
    assert ok


def test_reversed_damping_is_not_cp():
    ok, witness = is_cpt_generator(-amplitude_damping(1.0))
    assert not ok
    assert witness["check"] == "choi_psd"
    assert witness["magnitude"] < 0


def test_trace_breaking_generator_reported():
    ok, witness = is_cpt_generator(SuperOp(2, -np.eye(4)))
    assert not ok
    assert witness["check"] == "trace_annihilation"


def test_choi_of_identity_is_maximally_entangled_projector():
    choi = choi_matrix(SuperOp.identity(2))
    omega = np.array([1, 0, 0, 1])
    assert_allclose(choi, np.outer(omega, omega))


def test_classify_unitarity(rng):
    assert classify_unitarity(compile(hamiltonian_spec(random_hermitian(2, rng)))) == PURELY_UNITARY
    assert classify_unitarity(dephasing(1.0)) == PURELY_DEPHASING
    assert classify_unitarity(amplitude_damping(1.0)) == GENERAL


def test_pauli_representation_of_damping():
    """L(x) = −γ(2x + σ₃x + xσ₃ − σ₁xσ₁ − σ₂xσ₂ − iσ₁xσ₂ + iσ₂xσ₁)"""
    gamma = 0.8

    def direct(x):
        return -gamma * (2 * x + SIGMA_3 @ x + x @ SIGMA_3 - SIGMA_1 @ x @ SIGMA_1 - SIGMA_2 @ x @ SIGMA_2
                         - 1j * SIGMA_1 @ x @ SIGMA_2 + 1j * SIGMA_2 @ x @ SIGMA_1)

    assert_allclose(amplitude_damping(gamma).matrix, SuperOp.from_map(direct, 2).matrix, atol=1e-12)


def test_damping_drives_to_ground_state():
    rho = expm(amplitude_damping(1.0), 20.0).apply(np.eye(2) / 2)
    assert_allclose(rho, np.diag([0.0, 1.0]), atol=1e-12)


class TestTimeDependent:

    def _table(self):
        return table_spec([0.0, 1.0], [builtin_spec("dephasing", gamma=1.0), builtin_spec("dephasing", gamma=3.0)])

    def test_linear_interpolation(self):
        table = compile_table(self._table())
        assert_allclose(table.at(0.5).matrix, dephasing(2.0).matrix, atol=1e-12)
        assert_allclose(table.derivative(0.5).matrix, dephasing(2.0).matrix, atol=1e-12)

    def test_outside_domain(self):
        with pytest.raises(ValueError):
            compile_table(self._table()).at(1.5)

    def test_smoothness_ratio(self):
        table = compile_table(self._table())
        assert smoothness_ratio(table, 0.5, 0.01) == pytest.approx(0.01)

    def test_sampling_warns_on_rough_table(self, caplog):
        with caplog.at_level(logging.WARNING):
            generator, ratio = sample_time_dependent(self._table(), 0.5, tau=1.0)
        assert ratio == pytest.approx(1.0)
        assert any("光滑性" in r.message for r in caplog.records)
        assert_allclose(generator.matrix, dephasing(2.0).matrix, atol=1e-12)

    def test_sampling_quiet_on_smooth_table(self, caplog):
        with caplog.at_level(logging.WARNING):
            _, ratio = sample_time_dependent(self._table(), 0.5, tau=0.01)
        assert ratio < 0.1
        assert not caplog.records

    def test_constant_spec_is_single_point_table(self):
        table = compile_table(builtin_spec("amplitude_damping", gamma=1.0))
        assert table.is_single
        assert sup_norm(table.derivative(3.0)) == 0.0
        generator, ratio = sample_time_dependent(builtin_spec("amplitude_damping", gamma=1.0), 3.0)
        assert ratio == 0.0
        assert_allclose(generator.matrix, amplitude_damping(1.0).matrix)

    def test_unsorted_times_rejected(self):
        spec = table_spec([1.0, 0.0], [builtin_spec("dephasing", gamma=1.0)] * 2)
        with pytest.raises(ValueError):
            compile_table(spec)


class TestFromConfig:

    def test_gkls(self):
        spec = from_config({
            "form": "gkls",
            "H": [[1, 0], [0, -1]],
            "jumps": [{"c": [[0, 0], [1, 0]], "rate": 4.0}],
        })
        L = compile(spec)
        assert L.dim_h == 2
        assert is_cpt_generator(L)[0]

    def test_complex_entries(self):
        spec = from_config({"form": "hamiltonian", "H": [[0, [0, -1]], [[0, 1], 0]]})
        assert_allclose(spec.hamiltonian, SIGMA_2)

    def test_negative_rate_path(self):
        with pytest.raises(ConfigError) as e:
            from_config({"form": "gkls", "jumps": [{"c": [[0, 0], [1, 0]], "rate": -1}]})
        assert e.value.path == "system.lindblad.jumps[0].rate"

    def test_unknown_key_path(self):
        with pytest.raises(ConfigError) as e:
            from_config({"form": "builtin", "name": "dephasing", "bogus": 1})
        assert e.value.path == "system.lindblad.bogus"

    def test_non_hermitian_path(self):
        with pytest.raises(ConfigError) as e:
            from_config({"form": "hamiltonian", "H": [[0, 1], [0, 0]]})
        assert e.value.path == "system.lindblad.H"
        assert "not hermitian" in str(e.value)

    def test_unknown_form(self):
        with pytest.raises(ConfigError) as e:
            from_config({"form": "lindblad"})
        assert e.value.path == "system.lindblad.form"

    def test_nested_table_rejected(self):
        inner = {"form": "table", "times": [0], "specs": [{"form": "builtin", "name": "dephasing"}]}
        with pytest.raises(ConfigError) as e:
            from_config({"form": "table", "times": [0], "specs": [inner]})
        assert e.value.path == "system.lindblad.specs[0].form"

    def test_table(self):
        spec = from_config({
            "form": "table",
            "times": [0.0, 1.0],
            "specs": [{"form": "builtin", "name": "dephasing", "params": {"gamma": 1.0}},
                      {"form": "builtin", "name": "dephasing", "params": {"gamma": 2.0}}],
        })
        assert spec.is_time_dependent
        assert len(spec.specs) == 2
