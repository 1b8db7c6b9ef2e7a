"""Kolmogorov-Zakharov cascade exponents as functions of beta."""
from dataclasses import dataclass
from typing import Dict

DIRECT_CAPACITY_BETA = 0.75
INVERSE_THRESHOLD_BETA = 0.25


@dataclass(frozen=True)
class CascadeExponents:
    beta: float
    nu: float
    energy_spectrum_exp: float
    inverse_flux_exp: float
    direct_capacity: str
    inverse_threshold_beta: float = INVERSE_THRESHOLD_BETA

    def to_row(self) -> Dict[str, object]:
        return {
            "beta": self.beta,
            "nu": self.nu,
            "energy_spectrum_exp": self.energy_spectrum_exp,
            "inverse_flux_exp": self.inverse_flux_exp,
            "direct_capacity": self.direct_capacity,
            "inverse_threshold_beta": self.inverse_threshold_beta,
        }


def cascade_exponents(beta: float) -> CascadeExponents:
    """
    Direct-cascade spectrum n ~ k^nu with nu = -3 - 8 beta/3, the 1D energy
    spectrum exponent 1 - 8 beta/3 and the inverse flux exponent -7/3 - 8 beta/3.
    Direct capacity is finite iff beta < 3/4.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"cascade_exponents needs beta in [0, 1], got {beta}")
    shift = 8.0 * beta / 3.0
    return CascadeExponents(
        beta=beta,
        nu=-3.0 - shift,
        energy_spectrum_exp=1.0 - shift,
        inverse_flux_exp=-7.0 / 3.0 - shift,
        direct_capacity="finite" if beta < DIRECT_CAPACITY_BETA else "infinite",
    )
