"""
Cross-section, resonance relation, interaction channels and domain pieces
of the isotropic 4-wave collision operator.

Frequencies are measured in units of |k|^2, so a resonant quadruple obeys
w1 + w2 = w3 + w4 and the operator is integrated over w3 <= w4.
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from src.core.data.datum import Profile

PREFACTOR = 64.0 * math.pi ** 3
_RESONANCE_ULPS = 4.0


@dataclass(frozen=True)
class KernelParams:
    """Interaction strength beta and weight exponent M."""
    beta: float
    M: float

    def __post_init__(self):
        if not (0.0 <= self.beta <= 1.0):
            raise ValueError(f"KernelParams(beta={self.beta}): beta must lie in [0, 1]")
        if not self.M > 6.0:
            raise ValueError(f"KernelParams(M={self.M}): M must be > 6")

    def require_oscillatory(self):
        """Oscillatory ill-posedness runs need M > 10."""
        if not self.M > 10.0:
            raise ValueError(f"oscillatory runs require M > 10, got M={self.M}")
        return self

    def to_dict(self):
        return {"beta": float(self.beta), "M": float(self.M)}


def omega2_of(omega1, omega3, omega4):
    """Resonant partner w2 = w3 + w4 - w1. Negative values lie outside the domain."""
    return omega3 + omega4 - omega1


@dataclass(frozen=True)
class OmegaQuad:
    omega1: float
    omega2: float
    omega3: float
    omega4: float

    def __post_init__(self):
        values = (self.omega1, self.omega2, self.omega3, self.omega4)
        if min(values) < 0.0:
            raise ValueError(f"OmegaQuad{values}: frequencies must be nonnegative")
        lhs = self.omega1 + self.omega2
        rhs = self.omega3 + self.omega4
        if abs(lhs - rhs) > _RESONANCE_ULPS * np.spacing(max(abs(lhs), abs(rhs), 1.0)):
            raise ValueError(f"OmegaQuad{values}: not resonant (w1+w2={lhs}, w3+w4={rhs})")

    @classmethod
    def from_triple(cls, omega1: float, omega3: float, omega4: float) -> "OmegaQuad":
        omega2 = omega2_of(omega1, omega3, omega4)
        if omega2 < 0.0:
            raise ValueError(
                f"(w1={omega1}, w3={omega3}, w4={omega4}) gives w2={omega2} < 0"
            )
        return cls(omega1, omega2, omega3, omega4)

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.omega1, self.omega2, self.omega3, self.omega4)


class ChannelId(Enum):
    """Channel C^{j1 j2 j3}: the product n_{j1} n_{j2} n_{j3} in the integrand."""
    C234 = "C234"
    C134 = "C134"
    C123 = "C123"
    C124 = "C124"

    @property
    def indices(self) -> Tuple[int, int, int]:
        return tuple(int(ch) for ch in self.value[1:])

    @property
    def is_gain(self) -> bool:
        return self in GAIN_CHANNELS


GAIN_CHANNELS = (ChannelId.C234, ChannelId.C134)
LOSS_CHANNELS = (ChannelId.C123, ChannelId.C124)


class PieceId(Enum):
    """
    Integration pieces of {0 <= w3 <= w4, w2 >= 0} for fixed w1.

    Boundaries are half-open: D21 owns w3 < w1/2 and D22 owns w3 >= w1/2
    (both with w4 <= w1), D3 owns w4 > w1 with w3 <= w1, D1 owns w3 > w1.
    """
    D21 = "D21"
    D22 = "D22"
    D3 = "D3"
    D1 = "D1"

    @property
    def sqrt_factor(self) -> str:
        """Which frequency supplies the min-square-root factor on this piece."""
        return {"D21": "omega2", "D22": "omega2", "D3": "omega3", "D1": "omega1"}[self.value]

    @property
    def truncated(self) -> bool:
        """Semi-infinite pieces, cut at omega_max during quadrature."""
        return self in (PieceId.D3, PieceId.D1)

    def outer_limits(self, omega1: float, omega_max: float) -> Tuple[float, float]:
        """Limits of the outer w3 integral."""
        if self is PieceId.D21:
            return 0.0, 0.5 * omega1
        if self is PieceId.D22:
            return 0.5 * omega1, omega1
        if self is PieceId.D3:
            return 0.0, omega1
        return omega1, omega_max

    def inner_limits(self, omega1: float, omega3, omega_max: float):
        """Limits of the inner w4 integral at each outer node w3 (arrays allowed)."""
        omega3 = np.asarray(omega3, dtype=float)
        if self is PieceId.D21:
            return omega1 - omega3, np.full_like(omega3, omega1)
        if self is PieceId.D22:
            return omega3, np.full_like(omega3, omega1)
        if self is PieceId.D3:
            return np.full_like(omega3, omega1), np.full_like(omega3, omega_max)
        return omega3, np.full_like(omega3, omega_max)

    def contains(self, omega1: float, omega3, omega4):
        """Boolean mask of points (w3, w4) owned by this piece."""
        omega3 = np.asarray(omega3, dtype=float)
        omega4 = np.asarray(omega4, dtype=float)
        domain = (omega3 >= 0.0) & (omega3 <= omega4) & (omega2_of(omega1, omega3, omega4) >= 0.0)
        if self is PieceId.D21:
            return domain & (omega3 < 0.5 * omega1) & (omega4 <= omega1)
        if self is PieceId.D22:
            return domain & (omega3 >= 0.5 * omega1) & (omega4 <= omega1)
        if self is PieceId.D3:
            return domain & (omega3 <= omega1) & (omega4 > omega1)
        return domain & (omega3 > omega1)

    @classmethod
    def classify(cls, omega1: float, omega3: float, omega4: float) -> Optional["PieceId"]:
        for piece in cls:
            if bool(piece.contains(omega1, omega3, omega4)):
                return piece
        return None


ALL_PIECES = (PieceId.D21, PieceId.D22, PieceId.D3, PieceId.D1)


def cross_section_values(p: KernelParams, omega1, omega2, omega3, omega4):
    """Vectorised S(w1, w2, w3, w4) with the three-way min of square roots."""
    omega1 = np.asarray(omega1, dtype=float)
    root_min = np.sqrt(np.minimum(np.minimum(omega1, omega2), omega3))
    with np.errstate(divide="ignore"):
        front = PREFACTOR * omega1 ** (p.beta - 0.5)
    return front * (omega2 * omega3 * omega4) ** p.beta * root_min


def cross_section(q: OmegaQuad, p: KernelParams) -> float:
    """
    Cross-section S = 64 pi^3 w1^(beta-1/2) (w2 w3 w4)^beta min(sqrt w1, sqrt w2, sqrt w3).

    Raises:
        ValueError: w1 = 0 with beta < 1/2, where the prefactor is singular.
    """
    if q.omega1 == 0.0 and p.beta < 0.5:
        raise ValueError(f"cross_section: w1 = 0 is singular for beta={p.beta} < 1/2")
    if q.omega1 == 0.0:
        return 0.0
    return float(cross_section_values(p, q.omega1, q.omega2, q.omega3, q.omega4))


def angular_factor(q: OmegaQuad) -> float:
    """Angular average 32 pi^3 / sqrt(w1 w2 w3 w4) * min of the four square roots."""
    roots = np.sqrt(q.as_tuple())
    return 0.5 * PREFACTOR / float(np.prod(roots)) * float(np.min(roots))


def cross_section_via_angular(q: OmegaQuad, p: KernelParams) -> float:
    """S rebuilt from the angular factor; equals cross_section whenever w3 <= w4."""
    jacobian = math.sqrt(q.omega1 * q.omega2 * q.omega3 * q.omega4)
    strength = 2.0 * q.omega1 ** (p.beta - 0.5) * (q.omega2 * q.omega3 * q.omega4) ** p.beta
    return angular_factor(q) * jacobian * strength


def piece_weight(piece: PieceId, p: KernelParams, omega1: float, omega2, omega3, omega4):
    """
    Cross-section restricted to a piece, written with that piece's own
    square-root factor and prefactor. Equals S on the piece.
    """
    strength = (omega2 * omega3 * omega4) ** p.beta
    if piece is PieceId.D1:
        return PREFACTOR * omega1 ** p.beta * strength
    root = np.sqrt(omega3) if piece is PieceId.D3 else np.sqrt(omega2)
    return PREFACTOR * omega1 ** (p.beta - 0.5) * root * strength


def channel_values(c: ChannelId, k: Profile, l: Profile, m: Profile, omegas):
    """Vectorised channel product on arrays (w1, w2, w3, w4)."""
    j1, j2, j3 = c.indices
    return k(omegas[j1 - 1]) * l(omegas[j2 - 1]) * m(omegas[j3 - 1])


def channel_product(c: ChannelId, k: Profile, l: Profile, m: Profile, q: OmegaQuad) -> float:
    """k(w_j1) l(w_j2) m(w_j3) for the channel's index triple."""
    return float(channel_values(c, k, l, m, q.as_tuple()))


def integrand_combination(n1, n2, n3, n4):
    """n2 n3 n4 + n1 n3 n4 - n1 n2 n3 - n1 n2 n4, in factored form."""
    return n2 * n3 * (n4 - n1) + n1 * n4 * (n3 - n2)
