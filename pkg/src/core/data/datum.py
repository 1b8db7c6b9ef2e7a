"""
Spectrum profiles n(w), geometric frequency grids and weighted sup norms.

The weight on frequency space is <w>^(M/2) with <w> = sqrt(1 + w^2), so the
power-law datum <w>^(-M/2) has unit weighted norm for the same M.
"""
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, ClassVar, Dict, Tuple

import numpy as np


def bracket(omega):
    """Japanese bracket <w> = sqrt(1 + w^2)."""
    omega = np.asarray(omega, dtype=float)
    return np.sqrt(1.0 + omega * omega)


def weight(omega, M: float):
    """Norm weight <w>^(M/2)."""
    omega = np.asarray(omega, dtype=float)
    return (1.0 + omega * omega) ** (0.25 * M)


def _power_decay(omega, M: float):
    omega = np.asarray(omega, dtype=float)
    return (1.0 + omega * omega) ** (-0.25 * M)


class Profile(ABC):
    """A spectrum n(w) on w >= 0. Profiles are immutable and vectorised."""
    kind: ClassVar[str] = ""

    @abstractmethod
    def evaluate(self, omega) -> np.ndarray:
        ...

    def __call__(self, omega):
        return self.evaluate(omega)

    def to_dict(self) -> Dict[str, Any]:
        raise ValueError(f"{type(self).__name__} profiles are not serialisable")


@dataclass(frozen=True)
class PowerLaw(Profile):
    M: float
    kind: ClassVar[str] = "power_law"

    def evaluate(self, omega):
        return _power_decay(omega, self.M)

    def to_dict(self):
        return {"kind": self.kind, "M": float(self.M)}


@dataclass(frozen=True)
class Oscillatory(Profile):
    """(A + cos(N w)) <w>^(-M/2). A = 0 gives the pure oscillatory component."""
    A: float
    N: float
    M: float
    kind: ClassVar[str] = "oscillatory"

    @property
    def is_positive(self) -> bool:
        return self.A > 1.0

    def evaluate(self, omega):
        omega = np.asarray(omega, dtype=float)
        return (self.A + np.cos(self.N * omega)) * _power_decay(omega, self.M)

    def to_dict(self):
        return {"kind": self.kind, "A": float(self.A), "N": float(self.N), "M": float(self.M)}


@dataclass(frozen=True)
class RayleighJeans(Profile):
    """Equilibrium 1/(a + b w)."""
    a: float
    b: float
    kind: ClassVar[str] = "rayleigh_jeans"

    def __post_init__(self):
        if not self.a > 0.0 or self.b < 0.0:
            raise ValueError(f"RayleighJeans(a={self.a}, b={self.b}) needs a > 0 and b >= 0")

    def evaluate(self, omega):
        omega = np.asarray(omega, dtype=float)
        return 1.0 / (self.a + self.b * omega)

    def to_dict(self):
        return {"kind": self.kind, "a": float(self.a), "b": float(self.b)}


@dataclass(frozen=True)
class Constant(Profile):
    c: float = 1.0
    kind: ClassVar[str] = "constant"

    def evaluate(self, omega):
        omega = np.asarray(omega, dtype=float)
        return np.full_like(omega, self.c)

    def to_dict(self):
        return {"kind": self.kind, "c": float(self.c)}


@dataclass(frozen=True)
class Bump(Profile):
    """Smooth bump of the given height, supported on |w - center| < width."""
    center: float
    width: float
    height: float = 1.0
    kind: ClassVar[str] = "bump"

    def __post_init__(self):
        if not self.width > 0.0 or self.center - self.width < 0.0:
            raise ValueError(
                f"Bump(center={self.center}, width={self.width}) must sit inside w >= 0"
            )

    def evaluate(self, omega):
        omega = np.asarray(omega, dtype=float)
        s2 = ((omega - self.center) / self.width) ** 2
        inside = s2 < 1.0
        with np.errstate(divide="ignore", over="ignore"):
            core = np.exp(1.0 - 1.0 / np.where(inside, 1.0 - s2, 1.0))
        return np.where(inside, self.height * core, 0.0)

    def to_dict(self):
        return {"kind": self.kind, "center": float(self.center),
                "width": float(self.width), "height": float(self.height)}


@dataclass(frozen=True)
class Scaled(Profile):
    base: Profile
    factor: float
    kind: ClassVar[str] = "scaled"

    def evaluate(self, omega):
        return self.factor * self.base.evaluate(omega)

    def to_dict(self):
        return {"kind": self.kind, "factor": float(self.factor), "base": self.base.to_dict()}


@dataclass(frozen=True)
class GeometricGrid:
    """Nodes w_min * r^i with constant ratio r, from w_min to w_max inclusive."""
    omega_min: float = 1e-2
    omega_max: float = 1e6
    points_per_decade: int = 16

    def __post_init__(self):
        if not (0.0 < self.omega_min < self.omega_max):
            raise ValueError(
                f"GeometricGrid needs 0 < omega_min < omega_max, got "
                f"({self.omega_min}, {self.omega_max})"
            )
        if int(self.points_per_decade) < 1:
            raise ValueError(f"points_per_decade must be >= 1, got {self.points_per_decade}")

    @property
    def size(self) -> int:
        decades = math.log10(self.omega_max / self.omega_min)
        return max(2, int(round(decades * self.points_per_decade)) + 1)

    @property
    def ratio(self) -> float:
        return (self.omega_max / self.omega_min) ** (1.0 / (self.size - 1))

    def nodes(self) -> np.ndarray:
        return np.geomspace(self.omega_min, self.omega_max, self.size)

    def to_dict(self):
        return {"omega_min": float(self.omega_min), "omega_max": float(self.omega_max),
                "points_per_decade": int(self.points_per_decade)}


@dataclass(frozen=True)
class Gridded(Profile):
    """
    Profile known on a geometric grid.

    Inside the grid values are interpolated linearly in log-log coordinates
    (linearly in log w when some value is not positive). Beyond omega_max
    the tail is n(w_max) (w / w_max)^tail_exponent; below omega_min the
    first value is held constant.
    """
    grid: GeometricGrid
    values: Tuple[float, ...]
    tail_exponent: float
    kind: ClassVar[str] = "gridded"
    _log_nodes: np.ndarray = field(init=False, repr=False, compare=False)
    _array: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        array = np.asarray(self.values, dtype=float)
        if array.shape != (self.grid.size,):
            raise ValueError(f"Gridded needs {self.grid.size} values, got {array.shape}")
        if not np.all(np.isfinite(array)):
            raise ValueError("Gridded values must be finite")
        object.__setattr__(self, "values", tuple(float(v) for v in array))
        object.__setattr__(self, "_array", array)
        object.__setattr__(self, "_log_nodes", np.log(self.grid.nodes()))

    @classmethod
    def sample(cls, profile: Profile, grid: GeometricGrid, tail_exponent: float) -> "Gridded":
        return cls(grid, tuple(profile(grid.nodes())), tail_exponent)

    def evaluate(self, omega):
        omega = np.asarray(omega, dtype=float)
        clipped = np.clip(omega, self.grid.omega_min, self.grid.omega_max)
        log_x = np.log(clipped)
        if np.all(self._array > 0.0):
            inside = np.exp(np.interp(log_x, self._log_nodes, np.log(self._array)))
        else:
            inside = np.interp(log_x, self._log_nodes, self._array)
        top = self._array[-1] * (np.maximum(omega, self.grid.omega_max) / self.grid.omega_max) ** self.tail_exponent
        return np.where(omega > self.grid.omega_max, top, inside)


@dataclass(frozen=True)
class WeightedNorm:
    M: float
    value: float


def eval_profile(p: Profile, omega):
    """
    Evaluate a profile at w >= 0.

    Returns a float for scalar input and an array otherwise.
    """
    array = np.asarray(omega, dtype=float)
    if np.any(array < 0.0):
        raise ValueError(f"profiles are defined on w >= 0, got {omega}")
    out = p(array)
    return float(out) if np.ndim(out) == 0 else out


def weighted_sup_norm(p: Profile, M: float, grid: GeometricGrid) -> WeightedNorm:
    """sup over grid nodes of <w>^(M/2) |n(w)|."""
    nodes = grid.nodes()
    return WeightedNorm(M=M, value=float(np.max(weight(nodes, M) * np.abs(p(nodes)))))


_PROFILE_KINDS = {
    PowerLaw.kind: PowerLaw,
    Oscillatory.kind: Oscillatory,
    RayleighJeans.kind: RayleighJeans,
    Constant.kind: Constant,
    Bump.kind: Bump,
}


def profile_from_dict(spec: Dict[str, Any]) -> Profile:
    """Build a profile from its config-file form, e.g. {"kind": "power_law", "M": 8}."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == Scaled.kind:
        return Scaled(profile_from_dict(spec["base"]), float(spec["factor"]))
    if kind not in _PROFILE_KINDS:
        raise ValueError(f"unknown profile kind {kind!r}; expected one of "
                         f"{sorted(list(_PROFILE_KINDS) + [Scaled.kind])}")
    try:
        return _PROFILE_KINDS[kind](**{key: float(value) for key, value in spec.items()})
    except TypeError as e:
        raise ValueError(f"bad fields for profile kind {kind!r}: {e}") from e


def profile_to_dict(p: Profile) -> Dict[str, Any]:
    return p.to_dict()


def geometric_grid_from_spec(spec: Dict[str, Any]) -> GeometricGrid:
    return GeometricGrid(
        omega_min=float(spec.get("omega_min", 1e-2)),
        omega_max=float(spec.get("omega_max", 1e6)),
        points_per_decade=int(spec.get("points_per_decade", 16)),
    )
