"""
Adaptive 7/15-point Gauss-Kronrod quadrature.

All panels of all intervals in a batch are evaluated together as one
(panels, 15) array, so the integrand must be vectorised. Nodes are open:
interval endpoints are never evaluated.

Each interval is refined until the sum of its panel error estimates is
below max(rel_tol |value|, abs_tol). Panels whose estimate has reached the
roundoff floor are not split further. Running out of depth or of the panel
budget leaves the interval flagged as not converged with an inflated error.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from config import settings
from src.core.operators.kernel import PieceId

logger = logging.getLogger(__name__)

# Kronrod extension of the 7-point Gauss rule (QUADPACK qk15), nonnegative half.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])

NODES = np.concatenate([-_XGK[:7], [0.0], _XGK[6::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:7], [_WGK[7]], _WGK[6::-1]])

# Gauss nodes sit at the odd positions of the Kronrod node set.
_gauss_nodes, _gauss_weights = leggauss(7)
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[1::2] = _gauss_weights
assert np.allclose(NODES[1::2], _gauss_nodes, atol=1e-14)

_EPS = np.finfo(float).eps
_STALL_INFLATION = 10.0
# Initial panel edges sit at these offsets above the lower endpoint.
_OFFSETS = 10.0 ** np.arange(-9, 16)


@dataclass(frozen=True)
class QuadConfig:
    """
    Quadrature settings.

    omega_max=None picks max(1e6, 1e3 * w1) per call. osc_freq > 0 splits
    initial panels within osc_window of the lower endpoint to width
    <= pi / (4 osc_freq).
    """
    rel_tol: float = settings.DEFAULT_REL_TOL
    abs_tol: float = settings.DEFAULT_ABS_TOL
    max_depth: int = settings.DEFAULT_MAX_DEPTH
    omega_max: Optional[float] = None
    osc_freq: float = 0.0
    osc_window: float = settings.DEFAULT_OSC_WINDOW
    max_panels: int = settings.DEFAULT_MAX_PANELS
    batch_size: int = 2048

    def __post_init__(self):
        if not self.rel_tol > 0.0:
            raise ValueError(f"QuadConfig(rel_tol={self.rel_tol}): rel_tol must be > 0")
        if self.abs_tol < 0.0:
            raise ValueError(f"QuadConfig(abs_tol={self.abs_tol}): abs_tol must be >= 0")
        if self.max_depth < 1 or self.max_panels < 1:
            raise ValueError("QuadConfig: max_depth and max_panels must be positive")
        if self.omega_max is not None and not self.omega_max > 0.0:
            raise ValueError(f"QuadConfig(omega_max={self.omega_max}) must be positive")
        if self.osc_freq < 0.0:
            raise ValueError(f"QuadConfig(osc_freq={self.osc_freq}) must be >= 0")

    def resolve_omega_max(self, omega1: float) -> float:
        if self.omega_max is None:
            return max(1e6, 1e3 * omega1)
        if not self.omega_max > omega1:
            raise ValueError(f"omega_max={self.omega_max} must exceed w1={omega1}")
        return self.omega_max

    def with_(self, **changes) -> "QuadConfig":
        return replace(self, **changes)

    def to_dict(self):
        return {
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "max_depth": self.max_depth,
            "omega_max": self.omega_max,
            "osc_freq": self.osc_freq,
            "osc_window": self.osc_window,
            "max_panels": self.max_panels,
        }


@dataclass(frozen=True)
class QuadResult:
    value: float
    err_estimate: float
    tail_bound: float = 0.0
    evaluations: int = 0
    converged: bool = True
    tail_ok: bool = True

    def __post_init__(self):
        for name in ("value", "err_estimate", "tail_bound"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"QuadResult.{name} is not finite: {getattr(self, name)}")


def combine_results(results: Sequence[QuadResult], signs: Optional[Sequence[float]] = None) -> QuadResult:
    """Signed sum of independent quadratures; errors and tails add."""
    if signs is None:
        signs = [1.0] * len(results)
    return QuadResult(
        value=float(sum(s * r.value for s, r in zip(signs, results))),
        err_estimate=float(sum(r.err_estimate for r in results)),
        tail_bound=float(sum(r.tail_bound for r in results)),
        evaluations=int(sum(r.evaluations for r in results)),
        converged=all(r.converged for r in results),
        tail_ok=all(r.tail_ok for r in results),
    )


@dataclass
class BatchResult:
    values: np.ndarray
    errors: np.ndarray
    converged: np.ndarray
    evaluations: int


def _gk15(f, lo, hi, owner):
    centre = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = centre[:, None] + half[:, None] * NODES[None, :]
    fx = np.broadcast_to(np.asarray(f(x, owner), dtype=float), x.shape)
    if not np.all(np.isfinite(fx)):
        bad = np.argwhere(~np.isfinite(fx))[0]
        raise ValueError(f"integrand is not finite at x={x[tuple(bad)]!r}")
    kronrod = half * (fx @ KRONROD_WEIGHTS)
    gauss = half * (fx @ GAUSS_WEIGHTS)
    resabs = half * (np.abs(fx) @ KRONROD_WEIGHTS)
    mean = (fx @ KRONROD_WEIGHTS) * 0.5
    resasc = half * (np.abs(fx - mean[:, None]) @ KRONROD_WEIGHTS)
    err = np.abs(kronrod - gauss)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(
            (resasc > 0.0) & (err > 0.0),
            resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5),
            err,
        )
    floor = 50.0 * _EPS * resabs
    return kronrod, np.maximum(scaled, floor), scaled <= floor


def initial_panels(a: np.ndarray, b: np.ndarray, cfg: QuadConfig):
    """
    Geometric panel edges a + 10^k above each lower endpoint, plus period-scale
    splitting near the lower endpoint when cfg.osc_freq > 0.

    Returns (lo, hi, owner) arrays.
    """
    n = len(a)
    width = b - a
    floor = np.maximum(64.0 * np.spacing(np.maximum(np.abs(a), np.abs(b))), 1e-300)
    use = (_OFFSETS[None, :] >= floor[:, None]) & (_OFFSETS[None, :] < width[:, None] - floor[:, None])
    n_inner = use.sum(axis=1)
    counts = n_inner + 1
    rows, cols = np.nonzero(use)
    owner = np.repeat(np.arange(n), counts)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    lo = np.empty(counts.sum())
    hi = np.empty(counts.sum())
    lo[starts] = a
    hi[starts + counts - 1] = b
    if len(rows):
        inner_starts = np.concatenate(([0], np.cumsum(n_inner)[:-1]))
        within = np.arange(len(rows)) - np.repeat(inner_starts, n_inner)
        pos = starts[rows] + within + 1
        points = a[rows] + _OFFSETS[cols]
        lo[pos] = points
        hi[pos - 1] = points

    if cfg.osc_freq > 0.0:
        max_width = math.pi / (4.0 * cfg.osc_freq)
        near = lo < a[owner] + cfg.osc_window
        pieces = np.where(near, np.ceil((hi - lo) / max_width).astype(int), 1)
        pieces = np.maximum(pieces, 1)
        if np.any(pieces > 1):
            rep_owner = np.repeat(owner, pieces)
            rep_lo = np.repeat(lo, pieces)
            rep_w = np.repeat((hi - lo) / pieces, pieces)
            rep_start = np.repeat(np.cumsum(pieces) - pieces, pieces)
            index = np.arange(pieces.sum()) - rep_start
            new_lo = rep_lo + index * rep_w
            new_hi = np.where(index == np.repeat(pieces, pieces) - 1, np.repeat(hi, pieces), new_lo + rep_w)
            lo, hi, owner = new_lo, new_hi, rep_owner
    return lo, hi, owner


def _adaptive(f, a, b, cfg: QuadConfig, owner_offset: int) -> BatchResult:
    n = len(a)
    lo, hi, owner = initial_panels(a, b, cfg)
    depth = np.zeros(len(lo), dtype=int)
    val, err, limited = _gk15(f, lo, hi, owner + owner_offset)
    evaluations = 15 * len(lo)
    converged = np.ones(n, dtype=bool)
    open_owner = np.ones(n, dtype=bool)
    inflate = np.ones(n)

    while True:
        total = np.bincount(owner, weights=val, minlength=n)
        err_total = np.bincount(owner, weights=err, minlength=n)
        n_panels = np.bincount(owner, minlength=n)
        tol = np.maximum(cfg.rel_tol * np.abs(total), cfg.abs_tol)
        need = open_owner & (err_total > tol)
        if not need.any():
            break

        share = tol[owner] / n_panels[owner]
        wants = need[owner] & (err > share)
        splittable = wants & ~limited & (depth < cfg.max_depth)

        can_split = np.bincount(owner, weights=splittable.astype(float), minlength=n) > 0
        over_budget = n_panels + np.bincount(owner, weights=splittable.astype(float), minlength=n) > cfg.max_panels
        stuck = need & (~can_split | over_budget)
        if stuck.any():
            # Panels at the roundoff floor cannot be improved; anything else is exhaustion.
            exhausted_panels = wants & ~limited
            exhausted = stuck & (np.bincount(owner, weights=exhausted_panels.astype(float), minlength=n) > 0)
            converged[exhausted] = False
            inflate[exhausted] = _STALL_INFLATION
            open_owner[stuck] = False
            splittable &= ~stuck[owner]
        if not splittable.any():
            break

        keep = ~splittable
        mid = 0.5 * (lo[splittable] + hi[splittable])
        child_lo = np.concatenate([lo[splittable], mid])
        child_hi = np.concatenate([mid, hi[splittable]])
        child_owner = np.tile(owner[splittable], 2)
        child_depth = np.tile(depth[splittable] + 1, 2)
        c_val, c_err, c_limited = _gk15(f, child_lo, child_hi, child_owner + owner_offset)
        evaluations += 15 * len(child_lo)

        lo = np.concatenate([lo[keep], child_lo])
        hi = np.concatenate([hi[keep], child_hi])
        owner = np.concatenate([owner[keep], child_owner])
        depth = np.concatenate([depth[keep], child_depth])
        val = np.concatenate([val[keep], c_val])
        err = np.concatenate([err[keep], c_err])
        limited = np.concatenate([limited[keep], c_limited])

    values = np.bincount(owner, weights=val, minlength=n)
    errors = np.bincount(owner, weights=err, minlength=n) * inflate
    return BatchResult(values, errors, converged, evaluations)


def integrate_batch(f: Callable, a, b, cfg: QuadConfig) -> BatchResult:
    """
    Integrate many intervals at once.

    Args:
        f: f(x, owner) -> array shaped like x, where x has shape (panels, 15)
           and owner[i] is the interval index of panel row i
        a, b: arrays of lower and upper limits, a < b elementwise
        cfg: quadrature settings

    Returns:
        BatchResult with per-interval values, error estimates and flags.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise ValueError(f"limit arrays differ in shape: {a.shape} vs {b.shape}")
    if not np.all(np.isfinite(a) & np.isfinite(b)):
        raise ValueError("integration limits must be finite")
    if np.any(a >= b):
        raise ValueError("integration needs a < b on every interval")

    chunks = []
    for start in range(0, len(a), cfg.batch_size):
        stop = min(start + cfg.batch_size, len(a))
        chunks.append(_adaptive(f, a[start:stop], b[start:stop], cfg, start))
    if not chunks:
        return BatchResult(np.zeros(0), np.zeros(0), np.zeros(0, dtype=bool), 0)
    return BatchResult(
        values=np.concatenate([c.values for c in chunks]),
        errors=np.concatenate([c.errors for c in chunks]),
        converged=np.concatenate([c.converged for c in chunks]),
        evaluations=sum(c.evaluations for c in chunks),
    )


def integrate_1d(f: Callable, a: float, b: float, cfg: QuadConfig = QuadConfig()) -> QuadResult:
    """
    Adaptive integral of a vectorised f over the open interval (a, b).

    Raises:
        ValueError: a >= b, infinite limits, or f not finite at a node.
    """
    if not a < b:
        raise ValueError(f"integrate_1d needs a < b, got a={a}, b={b}")
    batch = integrate_batch(lambda x, owner: f(x), [a], [b], cfg)
    converged = bool(batch.converged[0])
    if not converged:
        logger.warning(f"integrate_1d on ({a}, {b}) did not converge; err={batch.errors[0]:.3e}")
    return QuadResult(
        value=float(batch.values[0]),
        err_estimate=float(batch.errors[0]),
        evaluations=batch.evaluations,
        converged=converged,
    )


def _power_tail(h_lo, h_hi, x):
    """
    Mass beyond x of a function sampled at x and 2x, assuming power decay.
    Falls back to |h(x)| x when the samples do not decay faster than 1/x.
    """
    h_lo = np.abs(h_lo)
    h_hi = np.abs(h_hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.log2(h_hi / h_lo)
        tail = np.where(slope < -1.0, h_lo * x / (-slope - 1.0), h_lo * x)
    tail = np.where(h_lo == 0.0, h_hi * 2.0 * x, tail)
    return np.where(np.isfinite(tail), tail, 0.0)


def _tail_bound(piece: PieceId, omega1: float, integrand: Callable, omega_max: float) -> float:
    o_lo, o_hi = piece.outer_limits(omega1, omega_max)
    lo, hi, _ = initial_panels(np.array([o_lo]), np.array([o_hi]), QuadConfig())
    half = 0.5 * (hi - lo)
    w3 = (0.5 * (lo + hi))[:, None] + half[:, None] * NODES[None, :]
    weights = half[:, None] * KRONROD_WEIGHTS[None, :]
    inner = _power_tail(integrand(w3, np.full_like(w3, omega_max)),
                        integrand(w3, np.full_like(w3, 2.0 * omega_max)), omega_max)
    tail = float(np.sum(weights * inner))
    if piece is PieceId.D1:
        def beyond(x):
            x = np.atleast_1d(x)
            return _power_tail(integrand(x, x), integrand(x, 2.0 * x), x)
        tail += float(_power_tail(beyond(omega_max), beyond(2.0 * omega_max), omega_max)[0])
    return tail


def integrate_piece(piece: PieceId, omega1: float, integrand: Callable,
                    cfg: QuadConfig = QuadConfig(), scale: Optional[float] = None) -> QuadResult:
    """
    Iterated adaptive integral of integrand(w3, w4) over one domain piece:
    inner over w4, outer over w3, with every outer node solving its own inner
    interval. D3 and D1 are truncated at omega_max and report a tail bound.

    scale is the magnitude the result is judged against when it is a small
    difference of larger terms (the gain for a full-operator piece). Inner
    integrals that stall are then accepted while their propagated error stays
    below rel_tol * scale. Only the convergence verdict uses scale.

    The integrand receives broadcastable arrays and must be vectorised.
    """
    if not omega1 > 0.0:
        raise ValueError(f"integrate_piece needs w1 > 0, got {omega1}")
    omega_max = cfg.resolve_omega_max(omega1)
    inner_cfg = cfg.with_(rel_tol=0.25 * cfg.rel_tol, abs_tol=0.25 * cfg.abs_tol)
    stats = {"evaluations": 0, "unconverged": 0, "stalled_err": 0.0}

    def outer(x, _owner):
        w3 = x.ravel()
        # outer quadrature weight of every node, recovered from the panel extent
        half = (x[:, -1] - x[:, 0]) / (NODES[-1] - NODES[0])
        node_weights = (half[:, None] * KRONROD_WEIGHTS[None, :]).ravel()
        a, b = piece.inner_limits(omega1, w3, omega_max)
        out = np.zeros_like(w3)
        ok = b > a
        if ok.any():
            nodes = w3[ok]
            res = integrate_batch(lambda y, own: integrand(nodes[own][:, None], y), a[ok], b[ok], inner_cfg)
            out[ok] = res.values
            stalled = ~res.converged
            stats["evaluations"] += res.evaluations
            stats["unconverged"] += int(np.count_nonzero(stalled))
            stats["stalled_err"] += float(np.sum(node_weights[ok][stalled] * res.errors[stalled]))
        return out.reshape(x.shape)

    o_lo, o_hi = piece.outer_limits(omega1, omega_max)
    res = integrate_batch(outer, [o_lo], [o_hi], cfg)
    value = float(res.values[0])
    err = float(res.errors[0]) + inner_cfg.rel_tol * abs(value) + stats["stalled_err"]
    budget = max(cfg.rel_tol * max(abs(value), abs(scale or 0.0)), cfg.abs_tol)
    stall_ok = stats["stalled_err"] <= budget
    converged = bool(res.converged[0]) and stall_ok
    if not stall_ok:
        err *= _STALL_INFLATION
        logger.warning(f"{piece.value} at w1={omega1:g}: {stats['unconverged']} inner integrals did not converge; "
                       f"stalled error {stats['stalled_err']:.3e} above {budget:.3e}")
    elif stats["unconverged"]:
        logger.debug(f"{piece.value} at w1={omega1:g}: {stats['unconverged']} inner integrals stalled "
                     f"within budget ({stats['stalled_err']:.3e} <= {budget:.3e})")
    if not res.converged[0]:
        logger.warning(f"{piece.value} at w1={omega1:g}: outer integral did not converge; err={err:.3e}")

    tail = _tail_bound(piece, omega1, integrand, omega_max) if piece.truncated else 0.0
    tail_ok = tail <= max(cfg.rel_tol * max(abs(value), abs(scale or 0.0)), cfg.abs_tol)
    if not tail_ok:
        logger.warning(f"{piece.value} at w1={omega1:g}: tail {tail:.3e} exceeds tolerance; "
                       f"omega_max={omega_max:g} is insufficient")
    return QuadResult(
        value=value,
        err_estimate=err,
        tail_bound=tail,
        evaluations=res.evaluations + stats["evaluations"],
        converged=converged,
        tail_ok=tail_ok,
    )
