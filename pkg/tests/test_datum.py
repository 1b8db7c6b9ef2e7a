"""
Unit tests for spectrum profiles, grids and weighted norms.
"""

import math
import unittest

import numpy as np

from src.core.data.datum import (
    Bump,
    Constant,
    GeometricGrid,
    Gridded,
    Oscillatory,
    PowerLaw,
    RayleighJeans,
    Scaled,
    bracket,
    eval_profile,
    profile_from_dict,
    weight,
    weighted_sup_norm,
)


class TestProfiles(unittest.TestCase):

    def test_power_law_at_zero(self):
        self.assertEqual(eval_profile(PowerLaw(8), 0.0), 1.0)

    def test_power_law_matches_bracket(self):
        omega = np.array([0.5, 3.0, 1e3])
        np.testing.assert_allclose(PowerLaw(12)(omega), bracket(omega) ** -6, rtol=1e-14)

    def test_oscillatory_at_peaks(self):
        """At w = 2 pi B / N the cosine is 1, so n = (A + 1) <w>^(-M/2)."""
        p = Oscillatory(5.0, 32, 12)
        for B in (3, 50, 400):
            omega = 2 * math.pi * B / 32
            self.assertAlmostEqual(eval_profile(p, omega) / (6.0 * bracket(omega) ** -6), 1.0, places=10)

    def test_oscillatory_positivity_flag(self):
        self.assertTrue(Oscillatory(5.0, 32, 24).is_positive)
        self.assertFalse(Oscillatory(0.0, 32, 24).is_positive)

    def test_rayleigh_jeans(self):
        self.assertAlmostEqual(eval_profile(RayleighJeans(1.0, 2.0), 3.0), 1 / 7, places=15)

    def test_rayleigh_jeans_validation(self):
        with self.assertRaises(ValueError):
            RayleighJeans(0.0, 1.0)
        with self.assertRaises(ValueError):
            RayleighJeans(1.0, -1.0)

    def test_negative_frequency_rejected(self):
        with self.assertRaises(ValueError):
            eval_profile(PowerLaw(8), -1.0)

    def test_bump_is_compactly_supported(self):
        bump = Bump(2.0, 1.0)
        self.assertEqual(eval_profile(bump, 0.9), 0.0)
        self.assertEqual(eval_profile(bump, 3.1), 0.0)
        self.assertAlmostEqual(eval_profile(bump, 2.0), 1.0, places=15)
        with self.assertRaises(ValueError):
            Bump(0.5, 1.0)

    def test_scaled_multiplies(self):
        self.assertAlmostEqual(eval_profile(Scaled(PowerLaw(8), 3.0), 1.0), 3.0 * 2.0 ** -2, places=15)

    def test_profile_from_dict(self):
        p = profile_from_dict({"kind": "oscillatory", "A": 5, "N": 32, "M": 24})
        self.assertEqual(p, Oscillatory(5.0, 32.0, 24.0))
        self.assertEqual(profile_from_dict(p.to_dict()), p)
        nested = profile_from_dict({"kind": "scaled", "factor": 2, "base": {"kind": "constant", "c": 1}})
        self.assertEqual(nested, Scaled(Constant(1.0), 2.0))
        with self.assertRaises(ValueError):
            profile_from_dict({"kind": "gaussian"})
        with self.assertRaises(ValueError):
            profile_from_dict({"kind": "power_law", "exponent": 3})


class TestGrid(unittest.TestCase):

    def test_nodes_have_constant_ratio(self):
        grid = GeometricGrid(1e-2, 1e6, 16)
        nodes = grid.nodes()
        self.assertEqual(len(nodes), 8 * 16 + 1)
        ratios = nodes[1:] / nodes[:-1]
        np.testing.assert_allclose(ratios, grid.ratio, rtol=1e-12)
        self.assertAlmostEqual(nodes[0], 1e-2)
        self.assertAlmostEqual(nodes[-1] / 1e6, 1.0, places=12)

    def test_invalid_grid(self):
        with self.assertRaises(ValueError):
            GeometricGrid(10.0, 1.0, 16)
        with self.assertRaises(ValueError):
            GeometricGrid(1.0, 10.0, 0)


class TestWeightedNorm(unittest.TestCase):

    def test_power_law_same_exponent(self):
        grid = GeometricGrid(1e-2, 1e6, 16)
        self.assertAlmostEqual(weighted_sup_norm(PowerLaw(8), 8, grid).value, 1.0, places=12)

    def test_oscillatory_norm_near_A_plus_one(self):
        grid = GeometricGrid(1.0, 1e3, 64)
        value = weighted_sup_norm(Oscillatory(5.0, 32, 24), 24, grid).value
        self.assertLessEqual(value, 6.0 + 1e-12)
        self.assertGreater(value, 5.9)

    def test_heavier_weight_grows_with_grid(self):
        """<w>^(5) <w>^(-4) at the top node w = 1e4 gives about 1e4."""
        grid = GeometricGrid(1.0, 1e4, 16)
        value = weighted_sup_norm(PowerLaw(8), 10, grid).value
        self.assertAlmostEqual(value / 1e4, 1.0, places=6)

    def test_norm_monotone_under_domination(self):
        grid = GeometricGrid(1e-2, 1e4, 16)
        small = weighted_sup_norm(PowerLaw(10), 8, grid).value
        large = weighted_sup_norm(PowerLaw(8), 8, grid).value
        self.assertLessEqual(small, large)


class TestGridded(unittest.TestCase):

    def test_interpolation_between_nodes(self):
        """Log-log interpolation of the power-law datum stays within 1e-3 between nodes."""
        for M, ppd in ((8, 64), (12, 64)):
            grid = GeometricGrid(1e-2, 1e6, ppd)
            g = Gridded.sample(PowerLaw(M), grid, -M / 2)
            nodes = grid.nodes()
            mids = np.sqrt(nodes[1:] * nodes[:-1])
            rel = np.abs(g(mids) / PowerLaw(M)(mids) - 1.0)
            self.assertLess(float(rel.max()), 1e-3, f"M={M}, ppd={ppd}")

    def test_reproduces_nodes(self):
        grid = GeometricGrid(1e-2, 1e4, 16)
        g = Gridded.sample(PowerLaw(8), grid, -4.0)
        np.testing.assert_allclose(g(grid.nodes()), PowerLaw(8)(grid.nodes()), rtol=1e-12)

    def test_tail_and_floor_extension(self):
        grid = GeometricGrid(1e-2, 1e4, 16)
        g = Gridded.sample(PowerLaw(8), grid, -4.0)
        top = float(g(1e4))
        self.assertAlmostEqual(float(g(1e5)) / (top * 10.0 ** -4), 1.0, places=12)
        self.assertEqual(float(g(1e-5)), float(g(1e-2)))

    def test_sign_changing_values_use_linear_interpolation(self):
        grid = GeometricGrid(1.0, 1e2, 32)
        g = Gridded.sample(Oscillatory(0.0, 4, 8), grid, -4.0)
        self.assertTrue(np.all(np.isfinite(g(np.geomspace(1.0, 1e2, 500)))))

    def test_wrong_value_count(self):
        with self.assertRaises(ValueError):
            Gridded(GeometricGrid(1.0, 10.0, 4), (1.0, 2.0), -4.0)


class TestWeight(unittest.TestCase):

    def test_weight_inverts_power_law(self):
        omega = np.geomspace(1e-3, 1e5, 50)
        np.testing.assert_allclose(weight(omega, 8) * PowerLaw(8)(omega), 1.0, rtol=1e-12)


if __name__ == '__main__':
    unittest.main()
