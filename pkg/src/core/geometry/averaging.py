"""
Sphere geometry of the collision kernel.

A pair (k1, k2) is parametrised on the resonant sphere by
k1* = V + |u|/2 sigma and k2* = V - |u|/2 sigma with V = (k1 + k2)/2 and
u = k1 - k2. Every sphere integral used here depends on sigma only through
z = V_hat . sigma, so it reduces to 2 pi times an integral over z in [-1, 1].
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.core.numerics.quadrature import QuadConfig, integrate_1d
from src.core.operators.kernel import KernelParams

logger = logging.getLogger(__name__)

_DEGENERATE = 1e-8


@dataclass(frozen=True)
class PairGeometry:
    k1: Tuple[float, float, float]
    k2: Tuple[float, float, float]

    def __post_init__(self):
        for name in ("k1", "k2"):
            vec = np.asarray(getattr(self, name), dtype=float)
            if vec.shape != (3,):
                raise ValueError(f"PairGeometry.{name} must be a 3-vector, got shape {vec.shape}")
            object.__setattr__(self, name, tuple(float(x) for x in vec))

    @property
    def E(self) -> float:
        return float(np.dot(self.k1, self.k1) + np.dot(self.k2, self.k2))

    @property
    def V(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.k1) + np.asarray(self.k2))

    @property
    def u(self) -> np.ndarray:
        return np.asarray(self.k1) - np.asarray(self.k2)

    @property
    def uV(self) -> float:
        return float(np.linalg.norm(self.u) * np.linalg.norm(self.V))

    def parallelogram_defect(self) -> float:
        """E/2 - (|V|^2 + |u|^2/4); zero up to rounding."""
        return 0.5 * self.E - float(np.dot(self.V, self.V) + 0.25 * np.dot(self.u, self.u))


@dataclass(frozen=True)
class SpherePoint:
    sigma: Tuple[float, float, float]

    def __post_init__(self):
        vec = np.asarray(self.sigma, dtype=float)
        if vec.shape != (3,) or abs(np.linalg.norm(vec) - 1.0) > 1e-12:
            raise ValueError(f"SpherePoint needs a unit 3-vector, got {self.sigma}")
        object.__setattr__(self, "sigma", tuple(float(x) for x in vec))

    def z(self, g: PairGeometry) -> Optional[float]:
        """V_hat . sigma, or None when V = 0."""
        norm = np.linalg.norm(g.V)
        if norm == 0.0:
            return None
        return float(np.dot(g.V / norm, self.sigma))


def energy_gap(g: PairGeometry) -> float:
    """E/2 - uV, computed as (k1 . k2)^2 / (E/2 + uV) to avoid cancellation."""
    denom = 0.5 * g.E + g.uV
    if denom == 0.0:
        return 0.0
    return float(np.dot(g.k1, g.k2) ** 2 / denom)


def kstar(g: PairGeometry, sigma) -> Tuple[np.ndarray, np.ndarray]:
    """
    Post-collision pair for one unit vector sigma, or for an (n, 3) array of them.

    Returns:
        (k1star, k2star) with the same leading shape as sigma.
    """
    sigma = np.asarray(sigma.sigma if isinstance(sigma, SpherePoint) else sigma, dtype=float)
    norms = np.linalg.norm(sigma, axis=-1)
    if np.any(np.abs(norms - 1.0) > 1e-12):
        raise ValueError("kstar needs unit vectors sigma")
    half_u = 0.5 * np.linalg.norm(g.u)
    return g.V + half_u * sigma, g.V - half_u * sigma


def _z_integral(f, cfg: QuadConfig) -> float:
    """2 pi int_{-1}^{1} f(z) dz, each half integrated from its outer endpoint inward."""
    lower = integrate_1d(f, -1.0, 0.0, cfg)
    upper = integrate_1d(lambda t: f(1.0 - t), 0.0, 1.0, cfg)
    return 2.0 * math.pi * (lower.value + upper.value)


def _F_stable(gap: float, half_E: float, uV: float) -> float:
    a = 1.0 + gap
    b = 1.0 + half_E + uV
    # (4pi/uV)(a^-1/2 - b^-1/2) rewritten with b - a = 2 uV
    return 8.0 * math.pi / (math.sqrt(a) * math.sqrt(b) * (math.sqrt(a) + math.sqrt(b)))


def F_closed(g: PairGeometry) -> float:
    """Closed form of the sphere average of <k1*>^-3."""
    E, uV = g.E, g.uV
    if uV < _DEGENERATE * (1.0 + E):
        return 4.0 * math.pi * (1.0 + 0.5 * E) ** -1.5
    return _F_stable(energy_gap(g), 0.5 * E, uV)


def F1_closed(g: PairGeometry) -> float:
    """Same average with k2*; equal to F_closed by sigma -> -sigma."""
    return F_closed(g)


def F_quad(g: PairGeometry, cfg: QuadConfig = QuadConfig(), which: str = "k1") -> float:
    """2 pi int_{-1}^{1} (1 + E/2 +/- uV z)^(-3/2) dz by adaptive quadrature."""
    if which not in ("k1", "k2"):
        raise ValueError(f"which must be 'k1' or 'k2', got {which!r}")
    sign = 1.0 if which == "k1" else -1.0
    # 1 + E/2 + uV z = 1 + (E/2 - uV) + uV (1 + z)
    gap, uV = energy_gap(g), g.uV
    return _z_integral(lambda z: (1.0 + gap + uV * (1.0 + sign * z)) ** -1.5, cfg)


def appendix_I(g: PairGeometry, p: KernelParams, cfg: QuadConfig = QuadConfig()) -> float:
    """
    2 pi int_{-1}^{1} (E/2 - uV z)^beta (1 + E/2 + uV z)^-(M/2 - beta) dz,
    the sphere integral of |k1*|^(2 beta) / <k2*>^(M - 2 beta).
    """
    if not p.M / 2.0 - p.beta - 1.0 > 0.0:
        raise ValueError(f"appendix_I needs M/2 - beta - 1 > 0, got beta={p.beta}, M={p.M}")
    gap, uV, half_E = energy_gap(g), g.uV, 0.5 * g.E
    power = p.M / 2.0 - p.beta

    def integrand(z):
        # E/2 - uV z = gap + uV (1 - z), nonnegative by construction
        return (gap + uV * (1.0 - z)) ** p.beta * (1.0 + half_E + uV * z) ** -power

    if uV < _DEGENERATE * (1.0 + g.E):
        return 4.0 * math.pi * half_E ** p.beta * (1.0 + half_E) ** -power
    return _z_integral(integrand, cfg)


def appendix_lower_bound_scan(p: KernelParams, k2: Sequence[float], magnitudes: Sequence[float],
                              direction: Sequence[float] = (1.0, 0.0, 0.0),
                              cfg: QuadConfig = QuadConfig()) -> List[dict]:
    """I(k1, k2) / |k1|^(2 beta - 2) along the ray k1 = |k1| * direction."""
    unit = np.asarray(direction, dtype=float)
    unit = unit / np.linalg.norm(unit)
    rows = []
    for r in magnitudes:
        g = PairGeometry(tuple(r * unit), tuple(k2))
        value = appendix_I(g, p, cfg)
        rows.append({"k1_norm": float(r), "I": value, "ratio": value / r ** (2.0 * p.beta - 2.0),
                     "energy_gap": energy_gap(g)})
    return rows


def default_battery(seed: int = 0, n_radii: int = 13, n_random: int = 4) -> List[PairGeometry]:
    """
    Sample pairs with |k1|, |k2| in {0} U logspace(1e-3, 1e3) over collinear,
    antipodal, orthogonal and random-direction configurations.
    """
    rng = np.random.default_rng(seed)
    radii = np.concatenate([[0.0], np.logspace(-3.0, 3.0, n_radii)])
    ex, ey = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    pairs = []
    for r1 in radii:
        for r2 in radii:
            pairs.append(PairGeometry(tuple(r1 * ex), tuple(r2 * ex)))
            pairs.append(PairGeometry(tuple(r1 * ex), tuple(-r2 * ex)))
            pairs.append(PairGeometry(tuple(r1 * ex), tuple(r2 * ey)))
            for _ in range(n_random):
                d1, d2 = rng.normal(size=3), rng.normal(size=3)
                pairs.append(PairGeometry(tuple(r1 * d1 / np.linalg.norm(d1)),
                                          tuple(r2 * d2 / np.linalg.norm(d2))))
    return pairs


@dataclass
class AveragingReport:
    rows: List[dict]
    sup_weighted: float
    max_rel_deviation: float
    fitted_slope: Optional[float] = None


def averaging_bound_check(samples: Sequence[PairGeometry], cfg: QuadConfig = QuadConfig(),
                          fit_range: Tuple[float, float] = (1e2, 1e6)) -> AveragingReport:
    """
    Weighted sup of F (1 + |k1|^2 + |k2|^2) over the samples, with the
    quadrature/closed-form deviation and the log-slope of F (1 + E) against E.
    """
    rows = []
    for g in samples:
        closed = F_closed(g)
        quad = F_quad(g, cfg)
        quad_k2 = F_quad(g, cfg, which="k2")
        rows.append({
            "k1_norm": float(np.linalg.norm(g.k1)),
            "k2_norm": float(np.linalg.norm(g.k2)),
            "cos_angle": _cos_angle(g),
            "E": g.E,
            "uV": g.uV,
            "F_closed": closed,
            "F_quad": quad,
            "F1_quad": quad_k2,
            "rel_deviation": abs(quad - closed) / closed,
            "weighted": closed * (1.0 + g.E),
        })
    sup = max(r["weighted"] for r in rows)
    deviation = max(max(r["rel_deviation"], abs(r["F1_quad"] - r["F_closed"]) / r["F_closed"]) for r in rows)

    slope = _envelope_slope(rows, fit_range)
    logger.info(f"averaging battery: {len(rows)} pairs, sup F(1+E)={sup:.6g}, max deviation={deviation:.3e}")
    return AveragingReport(rows=rows, sup_weighted=sup, max_rel_deviation=deviation, fitted_slope=slope)


def _cos_angle(g: PairGeometry) -> float:
    n1, n2 = np.linalg.norm(g.k1), np.linalg.norm(g.k2)
    if n1 == 0.0 or n2 == 0.0:
        return float("nan")
    return float(np.dot(g.k1, g.k2) / (n1 * n2))


def _envelope_slope(rows: Sequence[dict], fit_range: Tuple[float, float]) -> Optional[float]:
    """Log-slope of the per-half-decade maximum of F (1 + E) against E."""
    envelope = {}
    for r in rows:
        if fit_range[0] <= r["E"] <= fit_range[1]:
            key = round(2.0 * math.log10(r["E"])) / 2.0
            envelope[key] = max(envelope.get(key, 0.0), r["weighted"])
    if len(envelope) < 2:
        return None
    keys = sorted(envelope)
    return float(np.polyfit(np.array(keys) * math.log(10.0), np.log([envelope[k] for k in keys]), 1)[0])
