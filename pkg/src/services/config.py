"""
Run configuration: YAML experiment files merged with command-line flags.

Flags win over file values. The JSON echo produced by RunConfig.to_dict
parses back to an equal RunConfig.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml

from config import settings
from src.core.data.datum import GeometricGrid, Profile, geometric_grid_from_spec, profile_from_dict
from src.core.numerics.quadrature import QuadConfig
from src.core.operators.kernel import KernelParams

logger = logging.getLogger(__name__)

COMMANDS = ("collision", "scaling", "thresholds", "picard", "averaging", "spectra")
BATTERIES = ("default", "small")


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass(frozen=True)
class OscillationSpec:
    A: float = settings.DEFAULT_OSC_A
    N: int = settings.DEFAULT_OSC_N


@dataclass(frozen=True)
class RunConfig:
    command: str
    kernel: KernelParams = KernelParams(0.25, 8.0)
    profile: Optional[Dict[str, Any]] = None
    grid: GeometricGrid = GeometricGrid(**settings.DEFAULT_GRID)
    quad: QuadConfig = QuadConfig()
    oscillation: OscillationSpec = OscillationSpec()
    fit_window: Tuple[float, float] = settings.DEFAULT_FIT_WINDOW
    samples: int = settings.DEFAULT_FIT_SAMPLES
    out: str = str(settings.OUTPUTS_DIR)
    seed: int = settings.DEFAULT_SEED
    # command-specific
    kind: str = "gain"
    beta_grid: Tuple[float, ...] = tuple(round(0.05 * i, 10) for i in range(21))
    omega1: Tuple[float, ...] = (1e2, 1e3, 1e4)
    terms: bool = False
    iterations: int = 5
    time_steps: int = 4
    picard_mode: str = "full"
    C1: Optional[float] = None
    trials: int = 4
    battery: str = "default"
    betas: Tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)

    def datum(self) -> Profile:
        """Configured profile; the power-law datum with the kernel's M when unset."""
        spec = self.profile or {"kind": "power_law", "M": self.kernel.M}
        try:
            return profile_from_dict(spec)
        except ValueError as e:
            raise ConfigError(str(e)) from e

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "kernel": self.kernel.to_dict(),
            "profile": dict(self.profile) if self.profile is not None else None,
            "grid": self.grid.to_dict(),
            "quad": self.quad.to_dict(),
            "oscillation": {"A": float(self.oscillation.A), "N": int(self.oscillation.N)},
            "fit_window": [float(x) for x in self.fit_window],
            "samples": self.samples,
            "out": self.out,
            "seed": self.seed,
            "kind": self.kind,
            "beta_grid": [float(b) for b in self.beta_grid],
            "omega1": [float(w) for w in self.omega1],
            "terms": self.terms,
            "iterations": self.iterations,
            "time_steps": self.time_steps,
            "picard_mode": self.picard_mode,
            "C1": self.C1,
            "trials": self.trials,
            "battery": self.battery,
            "betas": [float(b) for b in self.betas],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        data = dict(data or {})
        command = data.get("command")
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}; expected one of {list(COMMANDS)}")
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            kernel_spec = data.get("kernel") or {}
            kernel = KernelParams(float(kernel_spec.get("beta", 0.25)), float(kernel_spec.get("M", 8.0)))
            quad_spec = dict(data.get("quad") or {})
            quad = QuadConfig(**{k: v for k, v in quad_spec.items() if v is not None or k == "omega_max"})
            osc_spec = data.get("oscillation") or {}
            oscillation = OscillationSpec(float(osc_spec.get("A", settings.DEFAULT_OSC_A)),
                                          int(osc_spec.get("N", settings.DEFAULT_OSC_N)))
            grid = geometric_grid_from_spec(data.get("grid") or settings.DEFAULT_GRID)
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e

        defaults = cls(command=command)
        values = {
            "command": command,
            "kernel": kernel,
            "profile": data.get("profile"),
            "grid": grid,
            "quad": quad,
            "oscillation": oscillation,
        }
        scalars = {"samples": int, "out": str, "seed": int, "kind": str, "terms": bool, "iterations": int,
                   "time_steps": int, "picard_mode": str, "trials": int, "battery": str}
        for key, cast in scalars.items():
            values[key] = cast(data[key]) if data.get(key) is not None else getattr(defaults, key)
        for key in ("fit_window", "beta_grid", "omega1", "betas"):
            values[key] = tuple(float(x) for x in data[key]) if data.get(key) is not None else getattr(defaults, key)
        values["C1"] = float(data["C1"]) if data.get("C1") is not None else None
        config = cls(**values)
        config.validate()
        return config

    def validate(self) -> "RunConfig":
        """Per-command checks; raises ConfigError."""
        try:
            self.datum()
            if len(self.fit_window) != 2 or not 0.0 < self.fit_window[0] < self.fit_window[1]:
                raise ConfigError(f"fit_window must be (lo, hi) with 0 < lo < hi, got {self.fit_window}")
            if self.command == "thresholds" and self.kind in ("oscillatory", "full_oscillatory"):
                self.kernel.require_oscillatory()
            if self.command == "collision" and self.terms:
                self.kernel.require_oscillatory()
            if self.command == "picard":
                if self.kernel.beta > 0.25:
                    raise ConfigError(f"picard needs beta <= 1/4, got {self.kernel.beta}")
                if self.picard_mode not in ("full", "gain"):
                    raise ConfigError(f"picard_mode must be full or gain, got {self.picard_mode!r}")
            if self.command == "collision" and any(w <= 0.0 for w in self.omega1):
                raise ConfigError("collision needs w1 > 0")
            if self.command == "averaging" and self.battery not in BATTERIES:
                raise ConfigError(f"battery must be one of {list(BATTERIES)}, got {self.battery!r}")
            if self.command == "spectra" and any(not 0.0 <= b <= 1.0 for b in self.betas):
                raise ConfigError("spectra betas must lie in [0, 1]")
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(str(e)) from e
        return self


def load_config_file(path) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path) as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping at top level")
    return data


def _parse_floats(text: str, count: int, flag: str) -> Tuple[float, ...]:
    try:
        values = tuple(float(x) for x in str(text).split(","))
    except ValueError:
        raise ConfigError(f"{flag} expects {count} comma-separated numbers, got {text!r}") from None
    if len(values) != count:
        raise ConfigError(f"{flag} expects {count} comma-separated numbers, got {text!r}")
    return values


def _deep_update(base: Dict[str, Any], updates: Dict[str, Any]) -> Dict[str, Any]:
    for key, value in updates.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


def flag_overrides(args) -> Dict[str, Any]:
    """Nested overrides from parsed CLI flags; unset flags are skipped."""
    overrides: Dict[str, Any] = {}
    get = lambda name: getattr(args, name, None)
    if get("beta") is not None:
        overrides.setdefault("kernel", {})["beta"] = get("beta")
    if get("M") is not None:
        overrides.setdefault("kernel", {})["M"] = get("M")
    if get("A") is not None:
        overrides.setdefault("oscillation", {})["A"] = get("A")
    if get("N") is not None:
        overrides.setdefault("oscillation", {})["N"] = get("N")
    if get("grid") is not None:
        lo, hi, ppd = _parse_floats(get("grid"), 3, "--grid")
        overrides["grid"] = {"omega_min": lo, "omega_max": hi, "points_per_decade": int(ppd)}
    if get("tol") is not None:
        overrides.setdefault("quad", {})["rel_tol"] = get("tol")
    if get("omega_max") is not None:
        overrides.setdefault("quad", {})["omega_max"] = get("omega_max")
    if get("fit_window") is not None:
        overrides["fit_window"] = list(_parse_floats(get("fit_window"), 2, "--fit-window"))
    if get("omega1") is not None:
        overrides["omega1"] = [float(x) for x in str(get("omega1")).split(",")]
    for name in ("out", "seed", "kind", "iterations", "battery", "samples", "trials", "C1"):
        if get(name) is not None:
            overrides[name] = get(name)
    if get("terms"):
        overrides["terms"] = True
    if get("mode") is not None:
        overrides["picard_mode"] = get("mode")
    return overrides


def build_config(command: str, args=None, config_path=None) -> RunConfig:
    """File values first, then flags; the command comes from the CLI."""
    data: Dict[str, Any] = {}
    if config_path:
        data = load_config_file(config_path)
        logger.info(f"loaded config {config_path}")
    data["command"] = command
    if args is not None:
        _deep_update(data, flag_overrides(args))
        # spectra tabulates a single row when --beta is given
        if command == "spectra" and getattr(args, "beta", None) is not None:
            data["betas"] = [args.beta]
    return RunConfig.from_dict(data)
