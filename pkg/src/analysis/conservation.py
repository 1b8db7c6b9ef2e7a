"""
Waveaction and energy balance of the full operator.

For a compactly supported datum the moments int C[n](w) w^(1/2) dw and
int C[n](w) w^(3/2) dw vanish; the residual ratio divides each by the same
moment of |C[n]|.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from src.analysis.scaling import sample_operator
from src.core.data.datum import Bump, Profile
from src.core.numerics.quadrature import QuadConfig
from src.core.operators.collision import full_combined
from src.core.operators.kernel import KernelParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConservationCheck:
    waveaction: float
    energy: float
    waveaction_abs: float
    energy_abs: float
    n_nodes: int

    @property
    def waveaction_ratio(self) -> float:
        return abs(self.waveaction) / self.waveaction_abs if self.waveaction_abs > 0.0 else 0.0

    @property
    def energy_ratio(self) -> float:
        return abs(self.energy) / self.energy_abs if self.energy_abs > 0.0 else 0.0

    def to_dict(self) -> Dict[str, float]:
        return {
            "waveaction": self.waveaction,
            "energy": self.energy,
            "waveaction_ratio": self.waveaction_ratio,
            "energy_ratio": self.energy_ratio,
            "n_nodes": self.n_nodes,
        }


def support_bound(n: Profile) -> float:
    """Upper end of the output support: w1 <= w3 + w4 with w3, w4 in the datum support."""
    if isinstance(n, Bump):
        return 2.0 * (n.center + n.width)
    raise ValueError(f"conservation check needs a compactly supported datum, got {type(n).__name__}")


def conservation_residuals(p: KernelParams, n: Profile, cfg: QuadConfig = QuadConfig(),
                           panels: int = 48, order: int = 8, omega_hi: Optional[float] = None,
                           n_jobs: Optional[int] = None, progress: bool = False) -> ConservationCheck:
    """
    Moments of full(w1) against w^(1/2) and w^(3/2) by composite Gauss-Legendre
    over (0, omega_hi], omega_hi defaulting to the output support bound.
    """
    hi = support_bound(n) if omega_hi is None else float(omega_hi)
    if panels < 1 or order < 2:
        raise ValueError("panels must be >= 1 and order >= 2")
    x, w = leggauss(order)
    edges = np.linspace(0.0, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()

    samples = sample_operator(lambda w1: full_combined(p, n, w1, cfg).value, nodes, n_jobs,
                              desc="conservation" if progress else None)
    values = np.array([v for _, v in samples])
    sqrt_w = np.sqrt(nodes)
    check = ConservationCheck(
        waveaction=float(np.sum(weights * values * sqrt_w)),
        energy=float(np.sum(weights * values * sqrt_w * nodes)),
        waveaction_abs=float(np.sum(weights * np.abs(values) * sqrt_w)),
        energy_abs=float(np.sum(weights * np.abs(values) * sqrt_w * nodes)),
        n_nodes=len(nodes),
    )
    logger.info(f"conservation: waveaction ratio {check.waveaction_ratio:.3e}, "
                f"energy ratio {check.energy_ratio:.3e}")
    return check
