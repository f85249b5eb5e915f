"""Operating-point parameters for the microlaser/micromaser model.

Every frequency-like quantity in this package is carried in dimensionless
form, scaled by the atomic transit time tau:

    g_tau       = g * tau          atom-cavity coupling
    gamma_c_tau = gamma_c * tau    cavity half width
    delta_tau   = (omega_c - omega_0) * tau   passive cavity detuning

The mean intracavity atom number N is dimensionless by itself and doubles
as the injection rate through r_a * tau = N.  Only frequency differences
ever enter the equations, so absolute optical frequencies are never
represented.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class SystemParams:
    """One operating point of the microlaser.

    Attributes
    ----------
    g_tau : float
        Coupling constant times transit time, > 0.
    gamma_c_tau : float
        Cavity half width times transit time, > 0.
    n_atoms : float
        Mean intracavity atom number N, >= 0.
    delta_tau : float
        Passive cavity detuning (omega_c - omega_0) * tau, any real.
    """

    g_tau: float
    gamma_c_tau: float
    n_atoms: float
    delta_tau: float = 0.0

    def __post_init__(self):
        if not (self.g_tau > 0.0):
            raise ValueError(f"g_tau must be > 0, got {self.g_tau}")
        if not (self.gamma_c_tau > 0.0):
            raise ValueError(f"gamma_c_tau must be > 0, got {self.gamma_c_tau}")
        if not (self.n_atoms >= 0.0):
            raise ValueError(f"n_atoms must be >= 0, got {self.n_atoms}")
        if not math.isfinite(self.delta_tau):
            raise ValueError(f"delta_tau must be finite, got {self.delta_tau}")

    @property
    def injection_rate_tau(self) -> float:
        """Atom injection rate r_a * tau (equals N for unit transit time)."""
        return self.n_atoms

    @property
    def threshold_atom_number(self) -> float:
        """N_th = 2 gamma_c / (g^2 tau), the lasing-threshold atom number."""
        return 2.0 * self.gamma_c_tau / (self.g_tau ** 2)

    @property
    def pump_parameter_sq(self) -> float:
        """theta^2 = N g^2 tau / (2 gamma_c) = N / N_th."""
        return self.n_atoms / self.threshold_atom_number

    @property
    def n_ex(self) -> float:
        """N_ex = N / (2 gamma_c tau), atoms traversing per cavity lifetime."""
        return self.n_atoms / (2.0 * self.gamma_c_tau)

    @property
    def delta_over_gamma_c(self) -> float:
        return self.delta_tau / self.gamma_c_tau

    def with_(self, **kw) -> "SystemParams":
        """Copy with selected fields replaced (sweep helper)."""
        fields = dict(g_tau=self.g_tau, gamma_c_tau=self.gamma_c_tau,
                      n_atoms=self.n_atoms, delta_tau=self.delta_tau)
        fields.update(kw)
        return SystemParams(**fields)


def params_from_gamma_c_units(g_tau: float, gamma_c_tau: float, n_atoms: float,
                              delta_over_gamma_c: float) -> SystemParams:
    """Build SystemParams with the detuning given in units of gamma_c."""
    return SystemParams(g_tau, gamma_c_tau, n_atoms,
                        delta_over_gamma_c * gamma_c_tau)


@dataclass(frozen=True)
class EffectiveDetuning:
    """Field-atom detuning (omega - omega_0) * tau in the shifted steady state.

    Equals params.delta_tau plus the mean frequency pulling; identical to the
    passive detuning whenever the pulling vanishes.
    """

    delta_prime_tau: float

    def __post_init__(self):
        if not math.isfinite(self.delta_prime_tau):
            raise ValueError("delta_prime_tau must be finite")
