import math
from fractions import Fraction

import pytest

from cuspext.errors import ConfigurationError
from cuspext.extension import extension_report
from cuspext.geometry import CuspProfile, QuadratureSpec
from cuspext.integrability import DIVERGENT, FINITE
from cuspext.sharpness import (
    ADMISSIBLE,
    CRITICAL,
    EXCLUDED,
    fiber_lower_bound,
    fiber_s_critical,
    fiber_verdict_symbolic,
    l1_quasidisk_demo,
    phase_diagram,
    threshold_scan,
)
from cuspext.sobolev import TestFunction
from cuspext.thresholds import inward_threshold

SQ = CuspProfile.power(2)


class TestFiberBound:
    def test_finite_matches_closed_form(self):
        gamma, s, Q = 0.1, 2.0, Fraction(7, 5)
        series = fiber_lower_bound(gamma, SQ, Q)
        assert series.verdict == FINITE
        Qf = float(Q)
        oracle = 2**Qf * math.pi ** (1 - Qf) / (gamma * Qf + s * (1 - Qf) + 1)
        assert series.final == pytest.approx(oracle, rel=1e-2)
        assert series.final == pytest.approx(4.910244612520453, rel=1e-12)

    def test_divergent(self):
        assert fiber_lower_bound(0.1, SQ, Fraction(8, 5)).verdict == DIVERGENT

    def test_q_one_is_finite(self):
        for prof in (SQ, CuspProfile.exponential()):
            series = fiber_lower_bound(0.1, prof, 1)
            assert series.verdict == FINITE
            assert series.flags

    @pytest.mark.parametrize("gamma, s, Q", [(0.1, 2, Fraction(7, 5)), (0.1, 2, Fraction(8, 5)),
                                             (0.2, 3, Fraction(5, 4)), (0.5, 1.5, 2)])
    def test_symbolic_agrees(self, gamma, s, Q):
        assert fiber_lower_bound(gamma, CuspProfile.power(s), Q).verdict == fiber_verdict_symbolic(gamma, s, Q)

    def test_bad_options(self):
        with pytest.raises(ConfigurationError):
            fiber_lower_bound(0.1, CuspProfile.exponential(), 2, fibers="angular")
        with pytest.raises(ConfigurationError):
            fiber_lower_bound(0.1, SQ, 2, osc="wiggly")

    @pytest.mark.parametrize("s, q, gamma", [(1.5, 4, 0.2), (1.5, 2, 0.1)])
    def test_lower_bounds_measured_extension(self, s, q, gamma):
        # below threshold: the fiber integral cannot exceed the extension's Q-energy
        rep = extension_report(TestFunction("angular-jump", gamma), s, q, r_U=0.5)
        Qf = float(rep.Q)
        energy = rep.extension.values[-1] ** Qf
        fb = fiber_lower_bound(gamma, CuspProfile.power(s), rep.Q, QuadratureSpec(levels=16), osc="exact", r_max=0.5)
        assert fb.final <= 1.05 * energy


class TestScan:
    def test_p4_q2(self):
        row = threshold_scan([4], [2], [Fraction(3, 2)]).lookup(4, 2, "3/2")
        assert (row["outward_bound"], row["inward_bound"], row["distortion_bound"]) == (3, 2, 4)
        assert row["fiber_bound"] == 2

    @pytest.mark.parametrize("p", [Fraction(3), Fraction(5, 2), 6])
    @pytest.mark.parametrize("q", [Fraction(3, 2), 2, 5])
    def test_fiber_rule_equals_inward_rule(self, p, q):
        assert fiber_s_critical(p, q) == inward_threshold(p, q)

    def test_verdicts(self):
        table = threshold_scan([4], [2], [Fraction(3, 2), 2, 3])
        assert [r["inward"] for r in table.rows] == [ADMISSIBLE, CRITICAL, EXCLUDED]

    def test_csv(self):
        text = threshold_scan(["inf"], ["4"], ["3/2"]).to_csv()
        header, row = text.strip().splitlines()
        assert header.startswith("p,q,s,")
        assert row.startswith("inf,4,3/2,")

    def test_bad_degree(self):
        with pytest.raises(ConfigurationError):
            threshold_scan([4], [2], [1])


def test_phase_diagram_is_reproducible(tmp_path):
    a = phase_diagram(4, tmp_path / "a.svg")
    b = phase_diagram(4, tmp_path / "b.svg")
    assert open(a).read() == open(b).read()
    assert open(a).read().lstrip().startswith("<?xml")


def test_l1_demo_parts():
    rep = l1_quasidisk_demo(QuadratureSpec(n=16))
    a = rep["a_distortion_integrable"]
    assert a["verdict"] == FINITE
    assert a["integral_J"] == pytest.approx(1.0, rel=1e-3)
    assert rep["all_b_divergent"]
    assert rep["c_finite"]
