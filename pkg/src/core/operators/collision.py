"""
Isotropic collision operator assembled from piecewise quadratures.

C_i^j[k, l, m](w1) integrates the channel product over domain piece D_i with
the piece's cross-section; gain collects C234 and C134, loss C123 and C124.
The full operator is also computed in one combined pass over the integrand
n2 n3 n4 + n1 n3 n4 - n1 n2 n3 - n1 n2 n4, which keeps its cancellation
pointwise instead of subtracting two large channel sums.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from src.core.data.datum import Oscillatory, PowerLaw, Profile
from src.core.numerics.quadrature import QuadConfig, QuadResult, combine_results, integrate_piece
from src.core.operators.kernel import (
    ALL_PIECES,
    GAIN_CHANNELS,
    LOSS_CHANNELS,
    ChannelId,
    KernelParams,
    PieceId,
    channel_values,
    integrand_combination,
    omega2_of,
    piece_weight,
)

logger = logging.getLogger(__name__)

# tolerance of the gain pass that sets the accuracy scale of full_combined
SCALE_REL_TOL = 1e-4


@dataclass(frozen=True)
class PieceResult:
    channel: ChannelId
    piece: PieceId
    value: float
    quad: QuadResult


@dataclass(frozen=True)
class CollisionResult:
    omega1: float
    per_piece: List[PieceResult]
    gain: float
    loss: float
    full: float
    combined: Optional[QuadResult] = None
    resolved: bool = True

    def piece(self, channel: ChannelId, piece: PieceId) -> PieceResult:
        for r in self.per_piece:
            if r.channel is channel and r.piece is piece:
                return r
        raise KeyError(f"{channel.value}/{piece.value}")

    @property
    def err_estimate(self) -> float:
        return float(sum(r.quad.err_estimate for r in self.per_piece))

    def to_row(self) -> Dict[str, float]:
        row = {"omega1": self.omega1, "gain": self.gain, "loss": self.loss, "full": self.full}
        row["full_combined"] = self.combined.value if self.combined is not None else float("nan")
        row["full_combined_err"] = self.combined.err_estimate if self.combined is not None else float("nan")
        for r in self.per_piece:
            row[f"{r.channel.value}_{r.piece.value}"] = r.value
        row["err_estimate"] = self.err_estimate
        row["resolved"] = self.resolved
        return row


def _quadruple(omega1, omega3, omega4):
    # w2 is clipped at 0: near the w2 = 0 edge the subtraction can round below zero.
    omega2 = np.maximum(omega2_of(omega1, omega3, omega4), 0.0)
    return np.broadcast_arrays(np.asarray(omega1, dtype=float), omega2, omega3, omega4)


def _check_omega1(omega1: float):
    if not omega1 > 0.0:
        raise ValueError(f"collision operator is evaluated at w1 > 0, got {omega1}")


def _piece_integral(p: KernelParams, piece: PieceId, omega1: float, combine, cfg: QuadConfig,
                    scale: Optional[float] = None) -> QuadResult:
    def integrand(w3, w4):
        omegas = _quadruple(omega1, w3, w4)
        return piece_weight(piece, p, omega1, omegas[1], omegas[2], omegas[3]) * combine(omegas)
    return integrate_piece(piece, omega1, integrand, cfg, scale)


def collision_piece(p: KernelParams, c: ChannelId, piece: PieceId,
                    k: Profile, l: Profile, m: Profile,
                    omega1: float, cfg: QuadConfig = QuadConfig()) -> PieceResult:
    """
    One channel on one domain piece, C_piece^c[k, l, m](w1).

    Args:
        p: kernel parameters (beta, M)
        c: channel selecting which frequencies feed k, l, m
        piece: integration piece
        k, l, m: input profiles
        omega1: output frequency, > 0
        cfg: quadrature settings

    Returns:
        PieceResult carrying the value and its QuadResult.
    """
    _check_omega1(omega1)
    quad = _piece_integral(p, piece, omega1, lambda w: channel_values(c, k, l, m, w), cfg)
    return PieceResult(channel=c, piece=piece, value=quad.value, quad=quad)


def gain(p: KernelParams, n: Profile, omega1: float, cfg: QuadConfig = QuadConfig()) -> float:
    """Gain operator C234[n,n,n] + C134[n,n,n]: both channels integrated in one pass per piece."""
    return gain_result(p, n, omega1, cfg).value


def gain_result(p: KernelParams, n: Profile, omega1: float, cfg: QuadConfig = QuadConfig()) -> QuadResult:
    _check_omega1(omega1)

    def both(w):
        n1, n2, n3, n4 = (n(x) for x in w)
        return n3 * n4 * (n2 + n1)

    return combine_results([_piece_integral(p, piece, omega1, both, cfg) for piece in ALL_PIECES])


def full_combined(p: KernelParams, n: Profile, omega1: float, cfg: QuadConfig = QuadConfig(),
                  scale: Optional[float] = None) -> QuadResult:
    """
    Full operator from the single combined integrand, summed over the four pieces.

    The result is a small difference of gain-sized terms, so convergence is judged
    against scale. When scale is None the gain is computed at a loose tolerance
    to supply it.
    """
    _check_omega1(omega1)
    if scale is None:
        scale = abs(gain_result(p, n, omega1, cfg.with_(rel_tol=max(cfg.rel_tol, SCALE_REL_TOL))).value)

    def combination(w):
        return integrand_combination(*(n(x) for x in w))

    return combine_results([_piece_integral(p, piece, omega1, combination, cfg, scale) for piece in ALL_PIECES])


def full_collision(p: KernelParams, n: Profile, omega1: float,
                   cfg: QuadConfig = QuadConfig(), combined: bool = True) -> CollisionResult:
    """
    Full operator with all 16 channel/piece integrals retained.

    full = gain - loss by construction. When combined=True the combined-integrand
    pass is attached as well. A warning is logged when |full| is below ten
    times the summed error estimates.
    """
    per_piece = [
        collision_piece(p, c, piece, n, n, n, omega1, cfg)
        for c in GAIN_CHANNELS + LOSS_CHANNELS
        for piece in ALL_PIECES
    ]
    gain_value = float(sum(r.value for r in per_piece if r.channel.is_gain))
    loss_value = float(sum(r.value for r in per_piece if not r.channel.is_gain))
    full = gain_value - loss_value
    err = float(sum(r.quad.err_estimate for r in per_piece))
    resolved = abs(full) >= 10.0 * err
    if not resolved:
        logger.warning(f"full operator at w1={omega1:g}: |full|={abs(full):.3e} below 10x summed "
                       f"error {err:.3e}; cancellation exceeds numeric resolution")
    return CollisionResult(
        omega1=omega1,
        per_piece=per_piece,
        gain=gain_value,
        loss=loss_value,
        full=full,
        combined=full_combined(p, n, omega1, cfg, scale=abs(gain_value)) if combined else None,
        resolved=resolved,
    )


def cprime_234(p: KernelParams, omega1: float, cfg: QuadConfig = QuadConfig()) -> float:
    """
    C234 on the power-law datum with the modified cross-section
    S |<w1>^(M/2) - <w4>^(M/2)| / <w1>^(M/2).
    """
    return cprime_234_result(p, omega1, cfg).value


def cprime_234_result(p: KernelParams, omega1: float, cfg: QuadConfig = QuadConfig()) -> QuadResult:
    _check_omega1(omega1)
    n = PowerLaw(p.M)
    n1 = float(n(omega1))

    # |<w1>^a - <w4>^a| / (<w1>^a <w4>^a) = |n(w4) - n(w1)|
    def modified(w):
        return n(w[1]) * n(w[2]) * np.abs(n(w[3]) - n1)

    return combine_results([_piece_integral(p, piece, omega1, modified, cfg) for piece in ALL_PIECES])


def loss_channel_bound(p: KernelParams, omega1: float, cfg: QuadConfig = QuadConfig()) -> Dict[str, float]:
    """
    Compare C123[n01] with C234[n01] + C'234 on the power-law datum.
    The loss channel is expected to sit below the bound.
    """
    n = PowerLaw(p.M)
    c123 = sum(collision_piece(p, ChannelId.C123, piece, n, n, n, omega1, cfg).value for piece in ALL_PIECES)
    c234 = sum(collision_piece(p, ChannelId.C234, piece, n, n, n, omega1, cfg).value for piece in ALL_PIECES)
    cprime = cprime_234(p, omega1, cfg)
    return {"omega1": omega1, "C123": c123, "C234": c234, "Cprime234": cprime,
            "holds": bool(c123 <= c234 + cprime)}


@dataclass(frozen=True)
class TermDecomposition:
    omega1: float
    A: float
    N: int
    I1: float
    I2: float
    I3: float
    I4: float
    I5: float
    I6: float

    @property
    def rest(self) -> float:
        return self.I2 + self.I3 + self.I4 + self.I5 + self.I6

    @property
    def margin(self) -> float:
        return self.I1 - self.rest

    @property
    def dominant(self) -> bool:
        return self.margin > 0.0

    def to_row(self) -> Dict[str, float]:
        return {"omega1": self.omega1, "A": self.A, "N": self.N, "I1": self.I1, "I2": self.I2,
                "I3": self.I3, "I4": self.I4, "I5": self.I5, "I6": self.I6,
                "margin": self.margin, "dominant": self.dominant}


def term_decomposition(p: KernelParams, A: float, N: int, omega1: float,
                       cfg: QuadConfig = QuadConfig()) -> TermDecomposition:
    """
    Split the full operator on (A + cos(N w)) <w>^(-M/2) into the oscillation
    main term I1 and the remainders I2..I6.

    Raises:
        ValueError: M <= 10, A <= 1 or N not a positive integer.
    """
    p.require_oscillatory()
    if not A > 1.0:
        raise ValueError(f"term_decomposition needs A > 1, got {A}")
    if int(N) != N or N < 1:
        raise ValueError(f"term_decomposition needs a positive integer N, got {N}")
    _check_omega1(omega1)
    N = int(N)
    n01 = PowerLaw(p.M)
    n02 = Oscillatory(0.0, N, p.M)
    osc_cfg = cfg.with_(osc_freq=float(N))

    c234 = {piece: collision_piece(p, ChannelId.C234, piece, n01, n01, n01, omega1, cfg).value
            for piece in ALL_PIECES}
    c234_total = sum(c234.values())
    mixed_21 = collision_piece(p, ChannelId.C234, PieceId.D21, n01, n01, n02, omega1, osc_cfg).value
    mixed_3 = collision_piece(p, ChannelId.C234, PieceId.D3, n01, n01, n02, omega1, osc_cfg).value
    side = sum(collision_piece(p, c, piece, n01, n01, n01, omega1, cfg).value
               for c in (ChannelId.C124, ChannelId.C134) for piece in ALL_PIECES)

    return TermDecomposition(
        omega1=omega1,
        A=A,
        N=N,
        I1=A ** 2 * abs(np.cos(N * omega1)) * c234_total,
        I2=A ** 2 * (abs(mixed_21) + abs(mixed_3)),
        I3=4.0 * (A + 1.0) * c234_total,
        I4=A * (A + 1.0) ** 2 * cprime_234(p, omega1, cfg),
        I5=(A + 1.0) ** 3 * side,
        I6=A ** 2 * (c234[PieceId.D22] + c234[PieceId.D1]),
    )
