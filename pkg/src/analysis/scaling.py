"""
Log-log scaling fits of operator samples and the exponents they are checked against.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from config import settings
from src.core.data.datum import Profile, weight
from src.core.numerics.quadrature import QuadConfig
from src.core.operators.collision import gain
from src.core.operators.kernel import KernelParams

logger = logging.getLogger(__name__)

MIN_SAMPLES = 8
MIN_DECADES = 2.0


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    log_prefactor: float
    r_squared: float
    max_residual: float
    fit_window: Tuple[float, float]
    n_samples: int

    @property
    def prefactor(self) -> float:
        return math.exp(self.log_prefactor)

    def to_dict(self) -> Dict[str, float]:
        return {
            "exponent": self.exponent,
            "log_prefactor": self.log_prefactor,
            "r_squared": self.r_squared,
            "max_residual": self.max_residual,
            "fit_window": list(self.fit_window),
            "n_samples": self.n_samples,
        }


def scaling_fit(samples: Sequence[Tuple[float, float]]) -> ScalingFit:
    """
    Least-squares line through (log w1, log value).

    Args:
        samples: (w1, value) pairs, w1 strictly increasing, values > 0

    Returns:
        ScalingFit with the slope as exponent and the largest residual in log units.
    """
    if len(samples) < MIN_SAMPLES:
        raise ValueError(f"scaling_fit needs at least {MIN_SAMPLES} samples, got {len(samples)}")
    omegas = np.array([s[0] for s in samples], dtype=float)
    values = np.array([s[1] for s in samples], dtype=float)
    if np.any(values <= 0.0) or not np.all(np.isfinite(values)):
        raise ValueError("scaling_fit needs strictly positive finite values; take |.| upstream")
    if np.any(omegas <= 0.0) or np.any(np.diff(omegas) <= 0.0):
        raise ValueError("scaling_fit needs positive, strictly increasing w1")
    if math.log10(omegas[-1] / omegas[0]) < MIN_DECADES - 1e-9:
        raise ValueError(
            f"fit window [{omegas[0]:g}, {omegas[-1]:g}] spans fewer than {MIN_DECADES:g} decades"
        )

    x, y = np.log(omegas), np.log(values)
    slope, intercept = np.polyfit(x, y, 1)
    residuals = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - float(np.sum(residuals ** 2)) / ss_tot if ss_tot > 0.0 else 1.0
    return ScalingFit(
        exponent=float(slope),
        log_prefactor=float(intercept),
        r_squared=r_squared,
        max_residual=float(np.max(np.abs(residuals))),
        fit_window=(float(omegas[0]), float(omegas[-1])),
        n_samples=len(samples),
    )


def log_samples(lo: float, hi: float, n: int = settings.DEFAULT_FIT_SAMPLES) -> np.ndarray:
    return np.geomspace(lo, hi, n)


def peak_samples(lo: float, hi: float, N: int, n: int = settings.DEFAULT_FIT_SAMPLES) -> np.ndarray:
    """
    Peaks w1 = 2 pi B / N of cos(N w), B integer, roughly log-spaced and above 10.

    The first peak is the last one at or below lo and the last is the first one
    at or above hi, so the samples span at least [lo, hi].
    """
    step = 2.0 * math.pi / N
    b_lo = max(int(math.floor(lo / step)), 1)
    while b_lo * step <= 10.0:
        b_lo += 1
    b_hi = max(int(math.ceil(hi / step)), b_lo + 1)
    B = np.unique(np.round(np.geomspace(b_lo, b_hi, n)).astype(int))
    return step * B


def sample_operator(fn: Callable[[float], float], omegas: Sequence[float],
                    n_jobs: Optional[int] = None, desc: Optional[str] = None) -> List[Tuple[float, float]]:
    """Evaluate fn at each w1 (in parallel with joblib) and return (w1, value) pairs."""
    n_jobs = settings.resolve_n_jobs(n_jobs)
    omegas = [float(w) for w in omegas]
    iterator = tqdm(omegas, desc=desc, disable=desc is None)
    if n_jobs == 1:
        values = [fn(w) for w in iterator]
    else:
        values = Parallel(n_jobs=n_jobs)(delayed(fn)(w) for w in iterator)
    return list(zip(omegas, [float(v) for v in values]))


SHARP_EXPONENTS = frozenset({"gain", "C234_D21", "full_leading"})


def predicted_exponents(p: KernelParams) -> Dict[str, float]:
    """
    Log-slopes in w1 for the power-law datum <w>^(-M/2).

    gain and C234_D21 are sharp. C234_D22, C234_D3, C234_D1, Cprime234, the
    side channels and full are upper bounds. The D21 and D3 parts of the full
    operator cancel at first order under w2 <-> w3, so |full| decays one power
    faster than its bound: full_leading is that measured slope, gain - 2.
    """
    b, M = p.beta, p.M
    return {
        "gain": 2 * b - 0.5 - M / 2,
        "C234_D21": 2 * b - 0.5 - M / 2,
        "C234_D22": 3 * b + 0.5 - M,
        "C234_D3": 2 * b + 0.5 - M / 2,
        "C234_D1": 3 * b + 1.0 - M,
        "Cprime234": 2 * b - 1.5 - M / 2,
        "side_channels": 4 * b + 2.0 - M,
        "full": 2 * b - 1.5 - M / 2,
        "full_leading": 2 * b - 2.5 - M / 2,
        "membership": -M / 2,
    }


def second_iterate_growth(p: KernelParams, n0: Profile, omegas: Sequence[float],
                          cfg: QuadConfig = QuadConfig(), n_jobs: Optional[int] = None) -> ScalingFit:
    """
    Fit <w1>^(M/2) G[n0](w1). A positive exponent means the second Picard
    iterate of the gain-only equation leaves the weighted space.
    """
    samples = sample_operator(lambda w: float(weight(w, p.M)) * gain(p, n0, w, cfg), omegas, n_jobs)
    return scaling_fit(samples)
