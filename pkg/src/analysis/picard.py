"""
Empirical trilinear constant and Picard iteration for the isotropic equation.

Iterates f^{n+1}(t) = n0 + int_0^t C[f^n](s) ds are kept on a geometric
frequency grid and a uniform time grid on [0, T], T = 1 / (8 C1 R^2). The
time integral uses the left-endpoint rule: C[f^n] is evaluated once per time
node and accumulated.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from config import settings
from src.analysis.scaling import sample_operator
from src.core.data.datum import GeometricGrid, Gridded, PowerLaw, Profile, Scaled, weight, weighted_sup_norm
from src.core.numerics.quadrature import QuadConfig
from src.core.operators.collision import collision_piece, full_combined, gain
from src.core.operators.kernel import ALL_PIECES, GAIN_CHANNELS, LOSS_CHANNELS, KernelParams

logger = logging.getLogger(__name__)

WELL_POSED_BETA = 0.25
C1_OMEGAS = tuple(np.logspace(-2.0, 2.0, 9))
C1_QUAD = QuadConfig(rel_tol=1e-6, abs_tol=1e-14)


@dataclass
class ConstantEstimate:
    C1: float
    per_piece: Dict[str, float]
    trials: int
    omegas: Tuple[float, ...]


def _random_triple(rng: np.random.Generator, M: float, trial: int):
    """PowerLaw-type inputs c <w>^(-M'/2) with M' >= M; their weighted norm is exactly c."""
    if trial == 0:
        return [(PowerLaw(M), 1.0)] * 3
    triple = []
    for _ in range(3):
        exponent = M + rng.uniform(0.0, 4.0)
        amplitude = rng.uniform(0.5, 2.0)
        triple.append((Scaled(PowerLaw(exponent), amplitude), amplitude))
    return triple


def _trial_ratios(p: KernelParams, triple, omega1: float, cfg: QuadConfig) -> Dict[str, float]:
    (k, ck), (l, cl), (m, cm) = triple
    norm = ck * cl * cm
    if norm == 0.0:
        return {}
    w = float(weight(omega1, p.M))
    ratios = {}
    total = 0.0
    for c in GAIN_CHANNELS + LOSS_CHANNELS:
        for piece in ALL_PIECES:
            value = abs(collision_piece(p, c, piece, k, l, m, omega1, cfg).value)
            ratios[f"{c.value}_{piece.value}"] = w * value / norm
            total += value
    ratios["total"] = w * total / norm
    return ratios


def estimate_constants(p: KernelParams, trials: int = 4, seed: int = settings.DEFAULT_SEED,
                       omegas: Sequence[float] = C1_OMEGAS, cfg: QuadConfig = C1_QUAD,
                       n_jobs: Optional[int] = None) -> ConstantEstimate:
    """
    Measure the weighted trilinear constant on random power-law triples.

    C1 is the largest <w1>^(M/2) sum_{channel, piece} |C_piece^channel[k, l, m](w1)|
    divided by the product of the weighted input norms. Per-piece maxima are
    kept for diagnostics.
    """
    if p.beta > WELL_POSED_BETA:
        raise ValueError(f"C1 is only bounded for beta <= 1/4, got beta={p.beta}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rng = np.random.default_rng(seed)
    triples = [_random_triple(rng, p.M, t) for t in range(trials)]
    jobs = [(t, float(w)) for t in range(trials) for w in omegas]
    results = sample_ratios(p, triples, jobs, cfg, n_jobs)

    per_piece: Dict[str, float] = {}
    for ratios in results:
        for key, value in ratios.items():
            per_piece[key] = max(per_piece.get(key, 0.0), value)
    C1 = per_piece.pop("total", 0.0)
    logger.info(f"estimated C1={C1:.6g} for beta={p.beta}, M={p.M} over {trials} trials")
    return ConstantEstimate(C1=C1, per_piece=per_piece, trials=trials, omegas=tuple(float(w) for w in omegas))


def sample_ratios(p, triples, jobs, cfg, n_jobs=None) -> List[Dict[str, float]]:
    n_jobs = settings.resolve_n_jobs(n_jobs)
    if n_jobs == 1:
        return [_trial_ratios(p, triples[t], w, cfg) for t, w in jobs]
    return Parallel(n_jobs=n_jobs)(delayed(_trial_ratios)(p, triples[t], w, cfg) for t, w in jobs)


def estimate_C1(p: KernelParams, trials: int = 4, seed: int = settings.DEFAULT_SEED,
                omegas: Sequence[float] = C1_OMEGAS, cfg: QuadConfig = C1_QUAD,
                n_jobs: Optional[int] = None) -> float:
    """Empirical C1; see estimate_constants."""
    return estimate_constants(p, trials, seed, omegas, cfg, n_jobs).C1


@dataclass
class PicardRun:
    R: float
    C1: float
    T: float
    iterate_norms: List[float]
    contraction_factors: List[float]
    times: List[float] = field(default_factory=list)
    omegas: List[float] = field(default_factory=list)
    final_values: List[float] = field(default_factory=list)
    mode: str = "full"
    escaped: bool = False

    @property
    def max_contraction(self) -> float:
        return max(self.contraction_factors, default=0.0)

    def summary(self) -> Dict[str, object]:
        return {
            "R": self.R,
            "C1": self.C1,
            "T": self.T,
            "mode": self.mode,
            "iterate_norms": list(self.iterate_norms),
            "contraction_factors": list(self.contraction_factors),
            "max_contraction": self.max_contraction,
            "escaped": self.escaped,
        }


def picard_solve(p: KernelParams, n0: Profile, grid: GeometricGrid, iterations: int = 5,
                 cfg: QuadConfig = QuadConfig(rel_tol=1e-6), C1: Optional[float] = None,
                 time_steps: int = 4, mode: str = "full", tail_exponent: Optional[float] = None,
                 n_jobs: Optional[int] = None, progress: bool = False) -> PicardRun:
    """
    Picard iterates of the isotropic equation on [0, T], T = 1/(8 C1 R^2).

    Args:
        p: kernel parameters, beta <= 1/4
        n0: nonnegative datum with finite weighted norm R on the grid
        grid: frequency grid carrying the iterates
        iterations: number of Picard steps
        cfg: quadrature settings for each operator evaluation
        C1: trilinear constant; measured with estimate_C1 when None
        time_steps: uniform time nodes in (0, T]
        mode: "full" for C = G - L, "gain" for the gain-only equation
        tail_exponent: power tail of the gridded iterates (default -M/2)

    Returns:
        PicardRun with sup-in-time weighted norms and contraction factors.
    """
    if p.beta > WELL_POSED_BETA:
        raise ValueError(f"picard_solve needs beta <= 1/4, got beta={p.beta}")
    if mode not in ("full", "gain"):
        raise ValueError(f"mode must be 'full' or 'gain', got {mode!r}")
    if iterations < 1 or time_steps < 1:
        raise ValueError("iterations and time_steps must be >= 1")
    nodes = grid.nodes()
    n0_values = np.asarray(n0(nodes), dtype=float)
    if np.any(n0_values < 0.0):
        raise ValueError("picard_solve needs a nonnegative datum")
    R = weighted_sup_norm(n0, p.M, grid).value
    if not np.isfinite(R):
        raise ValueError("datum has infinite weighted norm on the grid")

    if C1 is None:
        C1 = estimate_C1(p, n_jobs=n_jobs) if R > 0.0 else 1.0
    if not C1 > 0.0:
        raise ValueError(f"C1 must be positive, got {C1}")
    T = 1.0 / (8.0 * C1 * R * R) if R > 0.0 else 1.0 / (8.0 * C1)
    times = np.linspace(0.0, T, time_steps + 1)
    dt = T / time_steps
    tail = -p.M / 2.0 if tail_exponent is None else tail_exponent
    w = weight(nodes, p.M)
    operator = gain if mode == "gain" else (lambda kp, n, x, c: full_combined(kp, n, x, c).value)
    cache: Dict[bytes, np.ndarray] = {}

    def rate(values: np.ndarray) -> np.ndarray:
        key = values.tobytes()
        if key not in cache:
            if not np.any(values):
                cache[key] = np.zeros_like(values)
            else:
                profile = Gridded(grid, tuple(values), tail)
                samples = sample_operator(lambda x: operator(p, profile, x, cfg), nodes, n_jobs)
                cache[key] = np.array([v for _, v in samples])
        return cache[key]

    current = np.tile(n0_values, (time_steps + 1, 1))
    norms = [R]
    factors: List[float] = []
    previous_step = None
    for it in tqdm(range(iterations), desc=f"picard ({mode})", disable=not progress):
        rates = np.array([rate(current[j]) for j in range(time_steps)])
        updated = np.empty_like(current)
        updated[0] = n0_values
        updated[1:] = n0_values + dt * np.cumsum(rates, axis=0)

        step = float(np.max(w * np.abs(updated - current)))
        norms.append(float(np.max(w * np.abs(updated))))
        if previous_step is not None:
            factors.append(step / previous_step if previous_step > 0.0 else 0.0)
        logger.debug(f"picard iteration {it + 1}: norm={norms[-1]:.6g} step={step:.3e}")
        previous_step = step
        current = updated

    escaped = bool(max(norms) > 2.0 * R * (1.0 + 1e-12)) if R > 0.0 else False
    if escaped:
        logger.warning(f"picard ({mode}): iterate norm {max(norms):.6g} left the ball of radius 2R={2 * R:.6g}; "
                       f"beta out of range or C1 underestimated")
    return PicardRun(
        R=R,
        C1=C1,
        T=T,
        iterate_norms=norms,
        contraction_factors=factors,
        times=[float(t) for t in times],
        omegas=[float(x) for x in nodes],
        final_values=[float(v) for v in current[-1]],
        mode=mode,
        escaped=escaped,
    )
