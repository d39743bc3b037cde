import math
import random

import pytest

from decoq.diagnose import (
    EXTRINSIC,
    INCONCLUSIVE,
    INTRINSIC_OR_MIXED,
    BoundReport,
    bounds,
    classify,
    dilation_norms,
    fit_intercept,
    generator_norms,
    regime_flags,
)
from decoq.dilation import amplitude_damping_bath
from decoq.errors import InsufficientCoverageError
from decoq.fidelity import FidelityCurve
from decoq.lindblad import dephasing
from decoq.limit import build

T_GRID = [0.0035, 0.009, 0.014]
TAUS = [1.5e-4, 5e-5, 1.5e-5]


@pytest.fixture
def damping_report(ad_generator, pauli1):
    return bounds(build(ad_generator, pauli1, TAUS[0]), TAUS[0], T_GRID)


def _curves(one_minus_f, taus=TAUS, t_grid=T_GRID, stderr=1e-9):
    return [
        FidelityCurve(
            t_grid=list(t_grid),
            scheme="mc_physical",
            mc_mean=[1.0 - one_minus_f(tau, t) for t in t_grid],
            mc_stderr=[stderr] * len(t_grid),
            mc_paths=25,
            metadata={"tau": tau},
        )
        for tau in taus
    ]


class TestNorms:

    def test_damping_generator_norms(self, ad_generator, pauli1):
        norms = generator_norms(build(ad_generator, pauli1, 0.01))
        assert norms["L"]["spectral"] == pytest.approx(4 * math.sqrt(2))
        assert norms["L_bar"]["spectral"] == pytest.approx(4.0)
        assert norms["L_minus_L_bar"]["spectral"] == pytest.approx(4.0)
        assert norms["L"]["frobenius"] == pytest.approx(math.sqrt(40))

    def test_damping_bath_norms(self, pauli1):
        norms = dilation_norms(amplitude_damping_bath(1.0, 0.0), pauli1)
        assert norms["L_prime"]["spectral"] == pytest.approx(2.0)
        assert norms["L0_prime"]["spectral"] == pytest.approx(2.0)

    def test_bath_energy_is_not_part_of_the_fluctuation(self, pauli1):
        norms = dilation_norms(amplitude_damping_bath(1.0, 3.0), pauli1)
        assert norms["L0_prime"]["spectral"] == pytest.approx(2.0)
        assert norms["L_prime"]["spectral"] > 2.0


class TestBounds:

    def test_intrinsic_bound_for_damping(self, ad_generator, pauli1):
        """d = |J| = 4，‖L − L̄‖ = ‖L̄‖ = 4：1 − 2τt − 4t²"""
        tau = 0.01
        t_grid = [0.0, 0.05, 0.2]
        report = bounds(build(ad_generator, pauli1, tau), tau, t_grid)
        for t, b in zip(t_grid, report.bound_intrinsic):
            assert b == pytest.approx(1 - 2 * tau * t - 4 * t * t)
        for t, b in zip(t_grid, report.bound_drift_intrinsic):
            assert b == pytest.approx(1 - 4 * t * t)
        assert report.gamma == pytest.approx(4 * math.sqrt(2))
        assert report.bound_extrinsic is None
        assert report.bound_dephasing is None
        assert "extrinsic bound absent: no dilation given" in report.notes
        assert "dephasing bound absent: generator is not purely dephasing" in report.notes

    def test_extrinsic_bound_for_damping_bath(self, ad_generator, pauli1):
        tau = 0.01
        t_grid = [0.1, 0.3]
        dilated = dilation_norms(amplitude_damping_bath(1.0), pauli1)
        report = bounds(build(ad_generator, pauli1, tau), tau, t_grid, dilated=dilated)
        for t, b, b2d in zip(t_grid, report.bound_extrinsic, report.bound_extrinsic_2d):
            assert b == pytest.approx(1 - 8 * tau * t)
            assert b2d == pytest.approx(1 - 32 * tau * t)
        assert report.gamma == pytest.approx(4 * math.sqrt(2))
        assert report.frobenius["bound_extrinsic"] is not None

    def test_extrinsic_profile_is_integrated(self, ad_generator, pauli1):
        tau = 0.01
        dilated = dilation_norms(amplitude_damping_bath(1.0), pauli1)
        gens = build(ad_generator, pauli1, tau)
        constant = bounds(gens, tau, [0.1, 0.3], dilated=dilated)
        profiled = bounds(gens, tau, [0.1, 0.3], dilated=dilated, extrinsic_profile=([0.0, 1.0], [4.0, 4.0]))
        assert profiled.bound_extrinsic == pytest.approx(constant.bound_extrinsic)
        ramp = bounds(gens, tau, [0.5], dilated=dilated, extrinsic_profile=([0.0, 1.0], [0.0, 4.0]))
        # ∫₀^0.5 4t' dt' = 0.5
        assert ramp.bound_extrinsic[0] == pytest.approx(1 - 2 * tau * 0.5)

    def test_dephasing_bound(self, pauli1):
        gamma, tau = 0.5, 0.01
        report = bounds(build(dephasing(gamma), pauli1, tau), tau, [0.2, 1.0])
        # ‖L‖ = 2γ
        for t, b in zip([0.2, 1.0], report.bound_dephasing):
            assert b == pytest.approx(1 - (1 - math.exp(-t * 2 * gamma / 4)) ** 2 / 4)
        assert all(0 <= b <= 1 for b in report.bound_dephasing)

    def test_frobenius_bounds_are_reported(self, ad_generator, pauli1):
        report = bounds(build(ad_generator, pauli1, 0.01), 0.01, [0.1], norm_kind="frobenius")
        assert report.norm_kind == "frobenius"
        assert report.bound_intrinsic == report.frobenius["bound_intrinsic"]

    def test_invalid_arguments(self, ad_generator, pauli1):
        gens = build(ad_generator, pauli1, 0.01)
        with pytest.raises(ValueError):
            bounds(gens, 0.0, [0.1])
        with pytest.raises(ValueError):
            bounds(gens, 0.01, [0.1], norm_kind="trace")

    def test_dict_round_trip(self, damping_report):
        assert BoundReport.from_dict(damping_report.to_dict()) == damping_report


def test_regime_flags():
    assert regime_flags([0.005, 0.02, 0.2], 0.001, 2.0) == [False, True, False]
    assert regime_flags([0.005, 0.02, 0.2], 0.001, 0.0) == [False, True, True]


class TestFitIntercept:

    def test_exact_line(self):
        fit = fit_intercept([1.0, 2.0, 3.0], [2.5, 4.5, 6.5], [0.1, 0.1, 0.1])
        assert fit["intercept"] == pytest.approx(0.5)
        assert fit["slope"] == pytest.approx(2.0)
        assert fit["residual_rms"] == pytest.approx(0.0, abs=1e-12)
        assert fit["intercept_se"] > 0

    def test_zero_stderr_uses_equal_weights(self):
        fit = fit_intercept([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [0.0, 0.0, 0.0])
        assert fit["intercept"] == pytest.approx(0.0, abs=1e-12)
        assert fit["intercept_se"] == 0.0


class TestClassify:

    def test_intrinsic(self, damping_report):
        verdict = classify(_curves(lambda tau, t: 6 * t * t + 2 * tau * t), damping_report)
        assert verdict.classification == INTRINSIC_OR_MIXED
        assert len(verdict.evidence) == len(T_GRID)
        for item in verdict.evidence:
            assert item["intercept"] == pytest.approx(6 * item["t"] ** 2, rel=1e-6)
            assert item["expected_intrinsic"] == pytest.approx(4 * item["t"] ** 2)

    def test_extrinsic(self, damping_report):
        verdict = classify(_curves(lambda tau, t: 8 * tau * t), damping_report)
        assert verdict.classification == EXTRINSIC
        assert all(item["label"] == EXTRINSIC for item in verdict.evidence)

    def test_intercept_far_from_prediction_is_inconclusive(self, damping_report):
        verdict = classify(_curves(lambda tau, t: 400 * t * t + tau * t), damping_report)
        assert verdict.classification == INCONCLUSIVE

    def test_order_does_not_matter(self, damping_report):
        curves = _curves(lambda tau, t: 6 * t * t + 2 * tau * t)
        shuffled = list(curves)
        random.Random(0).shuffle(shuffled)
        assert classify(shuffled, damping_report).to_dict() == classify(curves, damping_report).to_dict()

    def test_analytic_curves_are_accepted(self, damping_report):
        curves = [
            FidelityCurve(t_grid=list(T_GRID), scheme="analytic",
                          analytic_mean=[1 - 6 * t * t - 2 * tau * t for t in T_GRID], metadata={"tau": tau})
            for tau in TAUS
        ]
        assert classify(curves, damping_report).classification == INTRINSIC_OR_MIXED

    @pytest.mark.parametrize("taus", [[1e-4, 1e-5], [1e-4, 5e-5, 2e-5], []])
    def test_insufficient_coverage(self, damping_report, taus):
        with pytest.raises(InsufficientCoverageError):
            classify(_curves(lambda tau, t: tau * t, taus=taus), damping_report)

    def test_t_grid_mismatch(self, damping_report):
        curves = _curves(lambda tau, t: tau * t)
        curves[1] = _curves(lambda tau, t: tau * t, taus=[TAUS[1]], t_grid=[0.004, 0.009, 0.014])[0]
        with pytest.raises(ValueError):
            classify(curves, damping_report)

    def test_missing_tau(self, damping_report):
        curves = _curves(lambda tau, t: tau * t)
        curves[0].metadata = {}
        with pytest.raises(ValueError):
            classify(curves, damping_report)

    def test_no_time_in_regime_window(self, damping_report):
        verdict = classify(_curves(lambda tau, t: tau * t, t_grid=[0.5, 1.0]), damping_report)
        assert verdict.classification == INCONCLUSIVE
        assert verdict.evidence == []
        assert verdict.notes == ["no time point satisfies the regime window"]
