import math

import pytest

from loupe.bubble import (ArcTooCoarse, BubbleMass, bubble_diff_mass,
                          bubble_mass_blocked, rho)
from loupe.geometry import Disk, ExteriorDisk, Intersection
from loupe.kernels import DomainViolation
from loupe.loops import rho_exact


class TestRho:
    def test_matches_series_route(self):
        # angular quadrature of the kernel product vs the Fourier series
        for R in (2.0, 10.0, 50.0):
            assert abs(rho(R).value - rho_exact(R)) < 1e-8

    def test_asymptotic_band(self):
        for R in (10.0, 100.0, 1000.0):
            m = rho(R)
            assert abs(m.value - 1.0 / (2.0 * math.log(R))) <= m.error

    def test_asymptotic_rate_single_constant(self):
        # |rho(R) 2 log R - 1| R log R stays bounded by one constant
        devs = [abs(rho(R).value * 2.0 * math.log(R) - 1.0)
                * R * math.log(R) for R in (10.0, 100.0, 1000.0)]
        assert max(devs) < 10.0

    def test_monotone_decreasing(self):
        vals = [rho(R).value for R in (2.0, 5.0, 20.0, 100.0)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_domain_violation(self):
        with pytest.raises(DomainViolation):
            rho(0.9)


class TestBubbleDiffMass:
    def test_annulus_blocking_matches_rho(self):
        # mass of bubbles at 1 in the disk exterior that leave A_{1,R} is
        # rho(R); the MC route uses the arc-frequency density estimator
        R = 10.0
        D = ExteriorDisk(0j, 1.0)
        Dt = Intersection([D, Disk(0j, R)])
        est = bubble_diff_mass(1.0 + 0j, D, Dt, 60_000, 4)
        target = rho(R).value
        assert abs(est.value - target) < max(4.0 * est.stderr, 0.02 * target)

    def test_deterministic(self):
        R = 5.0
        D = ExteriorDisk(0j, 1.0)
        Dt = Intersection([D, Disk(0j, R)])
        a = bubble_diff_mass(1.0 + 0j, D, Dt, 5000, 9)
        b = bubble_diff_mass(1.0 + 0j, D, Dt, 5000, 9)
        assert a == b

    def test_requires_new_boundary(self):
        D = ExteriorDisk(0j, 1.0)
        with pytest.raises(ValueError):
            bubble_diff_mass(1.0 + 0j, D, D, 100, 0)


class TestBlockedSplit:
    def test_split_sums_to_rho(self):
        # with D = A_{1,R^2} between the annulus A_{1,R} and the exterior,
        # the two difference masses add to rho(R), and the crossing
        # probability has the closed form log R / log R^2 = 1/2
        R = 5.0
        D = Intersection([ExteriorDisk(0j, 1.0), Disk(0j, R * R)])
        inside, escaping, pred = bubble_mass_blocked(1.0 + 0j, D, R,
                                                     40_000, 2)
        total = inside.plus(escaping)
        target = rho(R).value
        assert abs(total.value - target) < max(4.0 * total.stderr,
                                               0.03 * target)
        assert abs(pred["q"] - 0.5) < 0.03
        # leading-order predictions describe the split within the
        # asymptotic accuracy O(1/log R)
        assert abs(inside.value - pred["mass_inside"]) < 0.5 / math.log(R) \
            * pred["mass_inside"] + 4.0 * inside.stderr

    def test_requires_point_on_unit_circle(self):
        with pytest.raises(ValueError):
            bubble_mass_blocked(2.0 + 0j, ExteriorDisk(0j, 1.0), 5.0, 100, 0)


def test_bubble_mass_value_type():
    m = rho(3.0)
    assert isinstance(m, BubbleMass)
    assert m.error > 0


def test_arc_too_coarse_is_runtime_error():
    assert issubclass(ArcTooCoarse, RuntimeError)
