"""
Beta sweeps locating where the fitted operator exponent crosses -M/2,
the edge of membership in the weighted space <w>^(-M/2) L^inf.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from config import settings
from src.analysis.scaling import ScalingFit, log_samples, peak_samples, scaling_fit
from src.core.data.datum import Oscillatory, PowerLaw
from src.core.numerics.quadrature import QuadConfig
from src.core.operators.collision import full_combined, gain
from src.core.operators.kernel import KernelParams

logger = logging.getLogger(__name__)

MAX_BETA_STEP = 0.05


class DatumKind(str, Enum):
    GAIN_POWER = "gain_power"
    FULL_POWER = "full_power"
    FULL_OSCILLATORY = "full_oscillatory"

    @classmethod
    def parse(cls, value) -> "DatumKind":
        aliases = {"gain": cls.GAIN_POWER, "full": cls.FULL_POWER, "oscillatory": cls.FULL_OSCILLATORY}
        if isinstance(value, cls):
            return value
        if value in aliases:
            return aliases[value]
        try:
            return cls(value)
        except ValueError:
            raise ValueError(f"unknown threshold kind {value!r}; expected one of "
                             f"{[k.value for k in cls] + sorted(aliases)}") from None


@dataclass(frozen=True)
class ThresholdResult:
    datum_kind: DatumKind
    beta_star: Optional[float]
    beta_grid: Tuple[float, ...]
    exponent_curve: Tuple[float, ...]
    M: float
    monotone: bool
    fits: Tuple[ScalingFit, ...] = ()

    def rows(self) -> List[Dict[str, float]]:
        return [
            {"beta": b, "exponent": e, "r_squared": f.r_squared, "max_residual": f.max_residual,
             "log_prefactor": f.log_prefactor, "membership_exponent": -self.M / 2.0}
            for b, e, f in zip(self.beta_grid, self.exponent_curve, self.fits)
        ]


def _sample_value(kind: DatumKind, p: KernelParams, omega1: float, cfg: QuadConfig, A: float, N: int) -> float:
    if kind is DatumKind.GAIN_POWER:
        return gain(p, PowerLaw(p.M), omega1, cfg)
    if kind is DatumKind.FULL_POWER:
        return abs(full_combined(p, PowerLaw(p.M), omega1, cfg).value)
    return abs(full_combined(p, Oscillatory(A, N, p.M), omega1, cfg.with_(osc_freq=float(N))).value)


def validate_beta_grid(beta_grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(beta_grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise ValueError("beta_grid needs at least two values")
    if np.any(grid < 0.0) or np.any(grid > 1.0):
        raise ValueError(f"beta_grid must lie in [0, 1], got [{grid.min()}, {grid.max()}]")
    steps = np.diff(grid)
    if np.any(steps <= 0.0):
        raise ValueError("beta_grid must be strictly increasing")
    if np.any(steps > MAX_BETA_STEP + 1e-12):
        raise ValueError(f"beta_grid step must be <= {MAX_BETA_STEP}, got {steps.max():g}")
    return grid


def locate_crossing(betas: Sequence[float], exponents: Sequence[float], target: float) -> Optional[float]:
    """First beta where the exponent curve reaches target, interpolated linearly."""
    for b0, b1, e0, e1 in zip(betas[:-1], betas[1:], exponents[:-1], exponents[1:]):
        if e0 == target:
            return float(b0)
        if (e0 - target) * (e1 - target) < 0.0:
            return float(b0 + (target - e0) * (b1 - b0) / (e1 - e0))
    if exponents[-1] == target:
        return float(betas[-1])
    return None


def threshold_sweep(kind, M: float, beta_grid: Sequence[float], cfg: QuadConfig = QuadConfig(),
                    A: float = settings.DEFAULT_OSC_A, N: int = settings.DEFAULT_OSC_N,
                    fit_window: Tuple[float, float] = settings.DEFAULT_FIT_WINDOW,
                    n_samples: int = settings.DEFAULT_FIT_SAMPLES,
                    n_jobs: Optional[int] = None, progress: bool = False) -> ThresholdResult:
    """
    Fit the operator exponent at each beta and locate the crossing of -M/2.

    Args:
        kind: gain_power, full_power or full_oscillatory (aliases gain/full/oscillatory)
        M: weight exponent; > 10 for full_oscillatory
        beta_grid: increasing betas in [0, 1] with step <= 0.05
        cfg: quadrature settings
        A, N: oscillatory datum parameters
        fit_window: w1 range of the fit
        n_samples: w1 samples per beta
        n_jobs: joblib workers (KWE_THREADS when None)

    Returns:
        ThresholdResult; monotone=False marks a diagnostic failure.
    """
    kind = DatumKind.parse(kind)
    grid = validate_beta_grid(beta_grid)
    params = [KernelParams(float(b), M) for b in grid]
    if kind is DatumKind.FULL_OSCILLATORY:
        params[0].require_oscillatory()
        omegas = peak_samples(fit_window[0], fit_window[1], N, n_samples)
    else:
        omegas = log_samples(fit_window[0], fit_window[1], n_samples)

    tasks = [(i, float(w)) for i in range(len(params)) for w in omegas]
    n_jobs = settings.resolve_n_jobs(n_jobs)
    iterator = tqdm(tasks, desc=f"{kind.value} sweep", disable=not progress)
    if n_jobs == 1:
        values = [_sample_value(kind, params[i], w, cfg, A, N) for i, w in iterator]
    else:
        values = Parallel(n_jobs=n_jobs)(delayed(_sample_value)(kind, params[i], w, cfg, A, N) for i, w in iterator)

    fits = []
    for i in range(len(params)):
        samples = [(w, v) for (j, w), v in zip(tasks, values) if j == i]
        fits.append(scaling_fit(samples))
    exponents = [f.exponent for f in fits]

    monotone = bool(np.all(np.diff(exponents) > 0.0))
    if not monotone:
        logger.warning(f"{kind.value} sweep (M={M}): exponent curve is not monotone in beta")
    beta_star = locate_crossing(list(grid), exponents, -M / 2.0)
    if beta_star is None:
        logger.warning(f"{kind.value} sweep (M={M}): exponent never crosses {-M / 2.0} on the grid")
    else:
        logger.info(f"{kind.value} sweep (M={M}): beta* = {beta_star:.4f}")
    return ThresholdResult(
        datum_kind=kind,
        beta_star=beta_star,
        beta_grid=tuple(float(b) for b in grid),
        exponent_curve=tuple(exponents),
        M=M,
        monotone=monotone,
        fits=tuple(fits),
    )
