import math
from fractions import Fraction

import numpy as np
import pytest

from cuspext.errors import ConfigurationError, DomainError, InsufficientDataError
from cuspext.geometry import BallR, ComplementInBall, QuadratureSpec, UnitDisk, cusp_complement
from cuspext.integrability import (
    DIVERGENT,
    FINITE,
    INCONCLUSIVE,
    INSUFFICIENT,
    IntegralSeries,
    angular_stretch_series,
    classify_integrability,
    closed_form_threshold,
    exp_integrability,
    integrate_distortion,
    radial_profile_oracle,
    radial_profile_quadrature,
)
from cuspext.maps import AngularStretch, CircleInversion, Identity
from cuspext.rational import INF

SPEC = QuadratureSpec(n=32, levels=16)


def _cumulative(incs):
    out = [0.0]
    for d in incs:
        out.append(out[-1] + d)
    return out


class TestClassifier:
    def test_fast_geometric_decay_is_finite(self):
        assert classify_integrability(_cumulative([1, 1e-3, 1e-5, 1e-7])) == FINITE

    def test_slow_geometric_decay_is_inconclusive(self):
        # halving increments stop well above the 1e-4 relative floor
        assert classify_integrability(_cumulative([1, 0.5, 0.25, 0.125])) == INCONCLUSIVE

    def test_constant_increments_diverge(self):
        assert classify_integrability(_cumulative([1, 1, 1, 1])) == DIVERGENT

    def test_neither_rule(self):
        assert classify_integrability(_cumulative([1, 0.95, 0.93, 0.92])) == INCONCLUSIVE

    def test_overflow_diverges(self):
        assert classify_integrability([0.0, 1.0, 2.0, math.inf]) == DIVERGENT

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            classify_integrability([0.0, 1.0, 2.0])
        assert IntegralSeries.build([0.0, 1.0]).verdict == INSUFFICIENT

    def test_zero_increments_are_finite(self):
        assert classify_integrability([0.0, 2.0, 2.0, 2.0, 2.0]) == FINITE

    def test_build_flags_overflow(self):
        s = IntegralSeries.build([0.0, 1.0, math.inf, math.inf])
        assert "overflow" in s.flags
        assert s.verdict == DIVERGENT


class TestThresholds:
    @pytest.mark.parametrize("p, expected", [(3, 2), (2, 3), (Fraction(3, 2), 5), (4, Fraction(5, 3))])
    def test_closed_form(self, p, expected):
        assert closed_form_threshold("angular-stretch", p) == expected

    def test_limits(self):
        assert closed_form_threshold("angular-stretch", INF) == 1
        assert closed_form_threshold("vertical-stretch-power", 1) == INF

    def test_unknown_family(self):
        with pytest.raises(ConfigurationError):
            closed_form_threshold("shear", 2)

    def test_radial_oracle(self):
        assert radial_profile_oracle(Fraction(3, 2), 2) == Fraction(2, 3)
        assert radial_profile_oracle(2, 4) == INF


class TestIntegrateDistortion:
    def test_identity_on_disk(self):
        series = integrate_distortion(Identity(), UnitDisk(), 5, SPEC)
        assert series.final == pytest.approx(math.pi, rel=1e-12)
        assert series.verdict == FINITE

    @pytest.mark.parametrize("s, p, verdict", [(2, 2, FINITE), (2, 4, DIVERGENT), (1.5, 2, FINITE)])
    def test_angular_stretch(self, s, p, verdict):
        assert angular_stretch_series(s, p, SPEC).verdict == verdict

    def test_profile_quadrature(self):
        quad = radial_profile_quadrature(1.5, 2, QuadratureSpec(n=128)).final
        assert quad == pytest.approx(2.0 / 3.0, rel=1e-3)

    def test_sup_on_cusp_domain_is_bounded(self):
        from cuspext.geometry import PolarModelCusp

        series = integrate_distortion(AngularStretch(2.0), PolarModelCusp(2.0), INF, SPEC)
        assert series.verdict == FINITE
        assert "ess-sup estimate" in series.flags
        # dense polar sampling of the same field bounds the cell-centre maximum
        r, t = np.meshgrid(np.linspace(1e-3, 0.999, 400), np.linspace(0.0, 2 * math.pi, 800))
        z = np.stack([(r * np.cos(t)).ravel(), (r * np.sin(t)).ravel()], axis=-1)
        z = z[PolarModelCusp(2.0).contains(z)]
        dense = AngularStretch(2.0).distortion(z).max()
        assert 3.0 < series.final <= dense * (1 + 1e-9)
        assert len(set(series.values[1:])) == 1

    def test_rejects_small_p(self):
        with pytest.raises(DomainError):
            integrate_distortion(Identity(), UnitDisk(), Fraction(1, 2), SPEC)


class TestExpIntegrability:
    def test_identity(self):
        series = exp_integrability(Identity(), UnitDisk(), 1.0, SPEC)
        assert series.final == pytest.approx(math.pi * math.e, rel=1e-12)
        assert series.verdict == FINITE

    def test_inversion_annulus(self):
        annulus = ComplementInBall(BallR(0.5), 2.0)
        series = exp_integrability(CircleInversion(), annulus, 3.0, SPEC)
        assert series.final == pytest.approx(math.exp(3.0) * math.pi * (4 - 0.25), rel=1e-6)
        assert series.verdict == FINITE

    def test_angular_stretch_diverges(self):
        series = exp_integrability(AngularStretch(2.0), cusp_complement(2.0), 0.1, SPEC)
        assert series.verdict == DIVERGENT
        assert "overflow" in series.flags

    def test_lambda_positive(self):
        with pytest.raises(DomainError):
            exp_integrability(Identity(), UnitDisk(), 0.0, SPEC)


def test_series_to_dict():
    series = angular_stretch_series(2, 2, QuadratureSpec(n=16, levels=6))
    d = series.to_dict()
    assert d["exponent"] == "2"
    assert len(d["values"]) == 7
    assert np.all(np.diff(d["values"]) >= 0)
