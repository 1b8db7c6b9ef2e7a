"""
Unit tests for the cross-section, channels and domain pieces.
"""

import math
import unittest

import numpy as np

from src.core.data.datum import Constant, PowerLaw, RayleighJeans
from src.core.operators.kernel import (
    ALL_PIECES,
    PREFACTOR,
    ChannelId,
    KernelParams,
    OmegaQuad,
    PieceId,
    channel_product,
    cross_section,
    cross_section_values,
    cross_section_via_angular,
    integrand_combination,
    omega2_of,
    piece_weight,
)


def random_resonant(rng, n, scale=10.0):
    """Random (w1, w2, w3, w4) with w3 <= w4 and w2 >= 0."""
    w1 = rng.uniform(0.0, scale, n)
    w3 = rng.uniform(0.0, scale, n)
    w4 = rng.uniform(0.0, scale, n)
    w3, w4 = np.minimum(w3, w4), np.maximum(w3, w4)
    keep = omega2_of(w1, w3, w4) >= 0.0
    w1, w3, w4 = w1[keep], w3[keep], w4[keep]
    return w1, omega2_of(w1, w3, w4), w3, w4


class TestKernelParams(unittest.TestCase):

    def test_rejects_beta_outside_unit_interval(self):
        with self.assertRaises(ValueError):
            KernelParams(1.2, 8)
        with self.assertRaises(ValueError):
            KernelParams(-0.1, 8)

    def test_rejects_small_M(self):
        with self.assertRaises(ValueError):
            KernelParams(0.25, 6)

    def test_oscillatory_runs_need_M_above_10(self):
        with self.assertRaises(ValueError):
            KernelParams(0.5, 8).require_oscillatory()
        self.assertEqual(KernelParams(0.5, 24).require_oscillatory().M, 24)


class TestResonance(unittest.TestCase):

    def test_omega2_examples(self):
        """w2 = w3 + w4 - w1, negative values signal points outside the domain."""
        self.assertEqual(omega2_of(4, 2, 3), 1)
        self.assertEqual(omega2_of(1, 0.5, 0.5), 0)
        self.assertEqual(omega2_of(10, 1, 2), -7)

    def test_from_triple_is_resonant(self):
        rng = np.random.default_rng(1)
        for w1, w2, w3, w4 in zip(*random_resonant(rng, 200)):
            q = OmegaQuad.from_triple(w1, w3, w4)
            self.assertAlmostEqual(q.omega1 + q.omega2, q.omega3 + q.omega4, delta=1e-12)

    def test_non_resonant_quadruple_rejected(self):
        with self.assertRaises(ValueError):
            OmegaQuad(1.0, 1.0, 1.0, 1.5)
        with self.assertRaises(ValueError):
            OmegaQuad.from_triple(10.0, 1.0, 2.0)


class TestCrossSection(unittest.TestCase):

    def test_unit_quadruple(self):
        """All frequencies 1, beta = 0 gives the bare prefactor 64 pi^3."""
        value = cross_section(OmegaQuad(1, 1, 1, 1), KernelParams(0.0, 8))
        self.assertAlmostEqual(value, 64 * math.pi ** 3, places=9)
        self.assertAlmostEqual(value, 1984.402, places=3)

    def test_beta_one_substitution(self):
        value = cross_section(OmegaQuad(4, 1, 2, 3), KernelParams(1.0, 8))
        self.assertAlmostEqual(value / (768 * math.pi ** 3), 1.0, places=12)

    def test_vanishes_with_omega2(self):
        q = OmegaQuad.from_triple(1.0, 0.25, 0.75)
        self.assertEqual(q.omega2, 0.0)
        self.assertEqual(cross_section(q, KernelParams(0.5, 8)), 0.0)

    def test_omega1_zero_singular_for_small_beta(self):
        with self.assertRaises(ValueError):
            cross_section(OmegaQuad(0.0, 2.0, 1.0, 1.0), KernelParams(0.25, 8))
        self.assertEqual(cross_section(OmegaQuad(0.0, 2.0, 1.0, 1.0), KernelParams(0.75, 8)), 0.0)

    def test_two_routes_agree(self):
        """Direct formula and the angular-factor route agree when w4 is the largest frequency."""
        rng = np.random.default_rng(7)
        p = KernelParams(0.4, 8)
        checked = 0
        for w1, w2, w3, w4 in zip(*random_resonant(rng, 2000)):
            if min(w1, w2, w3) <= 0.0 or w4 < max(w1, w2, w3):
                continue
            q = OmegaQuad(w1, w2, w3, w4)
            direct = cross_section(q, p)
            other = cross_section_via_angular(q, p)
            self.assertAlmostEqual(direct / other, 1.0, delta=1e-12, msg=f"quadruple {q}")
            checked += 1
        self.assertGreater(checked, 100)


class TestPieces(unittest.TestCase):

    def test_tiling_claims_each_point_once(self):
        """Every domain point belongs to exactly one piece under the half-open convention."""
        rng = np.random.default_rng(3)
        for omega1 in (0.5, 2.0, 17.0):
            w1, _, w3, w4 = random_resonant(rng, 20000, scale=4 * omega1)
            w1 = np.full_like(w3, omega1)
            keep = omega2_of(w1, w3, w4) >= 0.0
            w3, w4 = w3[keep], w4[keep]
            counts = sum(piece.contains(omega1, w3, w4).astype(int) for piece in ALL_PIECES)
            self.assertTrue(np.all(counts == 1), f"w1={omega1}: {np.unique(counts)}")

    def test_boundaries_follow_half_open_convention(self):
        self.assertIs(PieceId.classify(2.0, 1.0, 1.5), PieceId.D22)
        self.assertIs(PieceId.classify(2.0, 0.999, 1.5), PieceId.D21)
        self.assertIs(PieceId.classify(2.0, 1.0, 2.0), PieceId.D22)
        self.assertIs(PieceId.classify(2.0, 1.0, 2.0001), PieceId.D3)
        self.assertIs(PieceId.classify(2.0, 2.0, 3.0), PieceId.D3)
        self.assertIs(PieceId.classify(2.0, 2.0001, 3.0), PieceId.D1)
        self.assertIsNone(PieceId.classify(10.0, 1.0, 2.0))

    def test_piece_weight_equals_cross_section_on_its_piece(self):
        rng = np.random.default_rng(11)
        p = KernelParams(0.3, 8)
        omega1 = 3.0
        w3 = rng.uniform(0.0, 12.0, 5000)
        w4 = rng.uniform(0.0, 12.0, 5000)
        w3, w4 = np.minimum(w3, w4), np.maximum(w3, w4)
        w2 = omega2_of(omega1, w3, w4)
        keep = (w2 > 0.0) & (w3 > 0.0)
        w2, w3, w4 = w2[keep], w3[keep], w4[keep]
        full = cross_section_values(p, omega1, w2, w3, w4)
        for piece in ALL_PIECES:
            mask = piece.contains(omega1, w3, w4)
            self.assertTrue(mask.any())
            restricted = piece_weight(piece, p, omega1, w2[mask], w3[mask], w4[mask])
            np.testing.assert_allclose(restricted, full[mask], rtol=1e-13, err_msg=piece.value)

    def test_d1_prefactor_absorbs_sqrt_omega1(self):
        p = KernelParams(0.5, 8)
        value = piece_weight(PieceId.D1, p, 4.0, 6.0, 5.0, 5.0)
        self.assertAlmostEqual(value, PREFACTOR * 4.0 ** 0.5 * (150.0) ** 0.5, places=6)


class TestChannels(unittest.TestCase):

    def test_channel_index_triples(self):
        self.assertEqual(ChannelId.C234.indices, (2, 3, 4))
        self.assertEqual(ChannelId.C124.indices, (1, 2, 4))
        self.assertTrue(ChannelId.C134.is_gain)
        self.assertFalse(ChannelId.C123.is_gain)

    def test_power_law_product_at_unit_frequencies(self):
        M = 8
        n = PowerLaw(M)
        value = channel_product(ChannelId.C234, n, n, n, OmegaQuad(1, 1, 1, 1))
        self.assertAlmostEqual(value, (2.0 ** (-M / 4)) ** 3, places=14)

    def test_constant_profiles_give_one(self):
        one = Constant(1.0)
        self.assertEqual(channel_product(ChannelId.C123, one, one, one, OmegaQuad(4, 1, 2, 3)), 1.0)

    def test_rayleigh_jeans_product(self):
        rj = RayleighJeans(1.0, 2.0)
        q = OmegaQuad(4, 1, 2, 3)
        expected = 1 / 9 * 1 / 5 * 1 / 7
        self.assertAlmostEqual(channel_product(ChannelId.C134, rj, rj, rj, q), expected, places=15)

    def test_rayleigh_jeans_annihilates_integrand(self):
        """n2n3n4 + n1n3n4 - n1n2n3 - n1n2n4 vanishes pointwise for 1/(a + b w)."""
        rng = np.random.default_rng(5)
        w1, w2, w3, w4 = random_resonant(rng, 30000, scale=100.0)
        w1, w2, w3, w4 = w1[:10000], w2[:10000], w3[:10000], w4[:10000]
        self.assertEqual(len(w1), 10000)
        for a, b in ((1.0, 2.0), (0.3, 0.0), (5.0, 0.01)):
            rj = RayleighJeans(a, b)
            n1, n2, n3, n4 = rj(w1), rj(w2), rj(w3), rj(w4)
            combo = integrand_combination(n1, n2, n3, n4)
            scale = n2 * n3 * n4 + n1 * n3 * n4 + n1 * n2 * n3 + n1 * n2 * n4
            self.assertLessEqual(float(np.max(np.abs(combo) / scale)), 1e-12, f"a={a}, b={b}")


if __name__ == '__main__':
    unittest.main()
