import math

import numpy as np
import pytest
from scipy.special import exp1

from cuspext.errors import ConfigurationError, DomainError
from cuspext.geometry import (
    BallR,
    CartesianInwardCusp,
    CartesianOutwardCusp,
    ComplementInBall,
    CuspChannel,
    CuspProfile,
    HalfDisk,
    PolarModelCusp,
    QuadratureSpec,
    UnitDisk,
    contains,
    cusp_angle,
    cusp_complement,
    domain_from_config,
    graded_mesh,
    profile_from_config,
    profile_width,
)

SQ = CuspProfile.power(2)


class TestProfiles:
    def test_power_value(self):
        assert profile_width(SQ, 0.5) == 0.25

    @pytest.mark.parametrize("prof", [CuspProfile.power(1.5), SQ, CuspProfile.exponential()])
    def test_unit_at_one(self, prof):
        assert profile_width(prof, 1.0) == pytest.approx(1.0, abs=1e-15)

    def test_exponential_formula(self):
        prof = CuspProfile.exponential()
        assert prof(0.25) == pytest.approx(math.e * math.exp(-4.0), rel=1e-15)
        assert prof(0.0) == 0.0

    @pytest.mark.parametrize("x", [0.0, -0.5])
    def test_width_rejects_nonpositive(self, x):
        with pytest.raises(DomainError):
            profile_width(SQ, x)

    @pytest.mark.parametrize("prof", [CuspProfile.power(3), CuspProfile.exponential()])
    def test_derivative_matches_finite_difference(self, prof):
        x = np.linspace(0.2, 0.9, 8)
        h = 1e-6
        fd = (prof(x + h) - prof(x - h)) / (2 * h)
        assert np.allclose(prof.derivative(x), fd, rtol=1e-6)
        assert np.allclose(prof.log_derivative(x), prof.derivative(x) / prof(x), rtol=1e-12)

    def test_power_needs_degree_above_one(self):
        with pytest.raises((DomainError, ConfigurationError)):
            CuspProfile.power(1.0)

    def test_config_round_trip(self):
        for prof in (SQ, CuspProfile.exponential()):
            back = profile_from_config(prof.to_config())
            assert back(0.3) == prof(0.3)


class TestContains:
    def test_inward_cusp_examples(self):
        dom = CartesianInwardCusp(SQ)
        assert not contains(dom, (0.5, 0.1))
        assert contains(dom, (0.5, 0.3))
        assert not contains(dom, (2.0, 0.0))

    def test_outward_cusp(self):
        dom = CartesianOutwardCusp(SQ)
        assert contains(dom, (0.5, 0.1))
        assert not contains(dom, (0.5, 0.3))
        assert contains(dom, (2.0, 0.0))

    def test_model_cusp_and_complement_partition(self):
        s = 2.0
        rng = np.random.default_rng(1)
        r = rng.uniform(0.01, 0.99, 2000)
        t = rng.uniform(-math.pi, math.pi, 2000)
        z = np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)
        inner, comp = PolarModelCusp(s).contains(z), cusp_complement(s).contains(z)
        assert not np.any(inner & comp)
        assert np.all(inner | comp)

    def test_boundary_is_outside(self):
        s = 2.0
        r = 0.5
        a = cusp_angle(r, s)
        edge = (r * math.cos(a), r * math.sin(a))
        assert not contains(PolarModelCusp(s), edge)
        assert contains(UnitDisk(), (0.6, 0.0))
        assert not contains(UnitDisk(), (0.6, 0.8))

    def test_half_disk(self):
        assert contains(HalfDisk("right"), (0.5, 0.2))
        assert not contains(HalfDisk("right"), (-0.5, 0.2))


class TestAreas:
    @pytest.mark.parametrize("s", [1.5, 2.0, 3.0])
    def test_model_areas(self, s):
        assert cusp_complement(s).area() == pytest.approx(math.pi / (s + 1), rel=1e-12)
        assert PolarModelCusp(s).area() == pytest.approx(math.pi * s / (s + 1), rel=1e-12)

    def test_exponential_channel_area(self):
        # 2e int_0^1 exp(-1/x) dx = 2e (exp(-1) - E1(1))
        oracle = 2 * math.e * (math.exp(-1.0) - exp1(1.0))
        assert CuspChannel(CuspProfile.exponential()).area() == pytest.approx(oracle, rel=1e-10)

    def test_inward_cusp_area(self):
        assert CartesianInwardCusp(SQ).area() == pytest.approx(2.637309311682835, rel=1e-10)

    def test_diameters(self):
        assert UnitDisk().diameter() == 2.0
        assert BallR(0.5).diameter() == 1.0


class TestQuadratureSpec:
    def test_cutoffs(self):
        spec = QuadratureSpec(levels=4, stride=2)
        assert spec.cutoffs() == (1.0, 0.25, 0.0625, 0.015625, 0.00390625)

    @pytest.mark.parametrize("kw", [{"n": 0}, {"levels": -1}, {"stride": 0}, {"grading": 1.5}])
    def test_invalid(self, kw):
        with pytest.raises(ConfigurationError):
            QuadratureSpec(**kw)


class TestMesh:
    def test_unit_disk_area(self):
        mesh = graded_mesh(UnitDisk(), QuadratureSpec(n=64))
        assert mesh.total_area == pytest.approx(math.pi, rel=1e-3)

    @pytest.mark.parametrize("dom", [
        cusp_complement(2.0),
        PolarModelCusp(3.0),
        HalfDisk("right"),
        CartesianInwardCusp(SQ),
        CartesianOutwardCusp(SQ),
        CuspChannel(CuspProfile.exponential()),
    ], ids=lambda d: type(d).__name__)
    def test_mesh_matches_area(self, dom):
        mesh = graded_mesh(dom, QuadratureSpec(n=32, levels=20))
        assert mesh.total_area == pytest.approx(dom.area(), rel=1e-8)

    def test_levels_are_monotone(self):
        mesh = graded_mesh(cusp_complement(2.0), QuadratureSpec(n=16, levels=10))
        sums = mesh.level_sums(mesh.areas)
        assert sums[0] == 0.0
        assert all(b >= a for a, b in zip(sums, sums[1:]))

    def test_cells_inside_domain(self):
        dom = CartesianOutwardCusp(SQ)
        mesh = graded_mesh(dom, QuadratureSpec(n=16, levels=8))
        assert np.all(dom.contains(mesh.centers))
        assert np.all(mesh.areas > 0)

    def test_empty_region(self):
        mesh = graded_mesh(ComplementInBall(BallR(2.0), 1.0), QuadratureSpec(n=8))
        assert len(mesh) == 0
        assert mesh.total_area == 0.0

    def test_r_max_restricts(self):
        mesh = graded_mesh(cusp_complement(2.0), QuadratureSpec(n=32, levels=20), r_max=0.5)
        assert mesh.total_area == pytest.approx(math.pi * 0.5**3 / 3, rel=1e-8)


def test_domain_from_config():
    dom = domain_from_config({"kind": "inward-cusp", "profile": {"kind": "power", "s": 2}})
    assert isinstance(dom, CartesianInwardCusp)
    assert domain_from_config(dom.to_config()).area() == pytest.approx(dom.area())
    with pytest.raises(ConfigurationError):
        domain_from_config({"kind": "triangle"})
