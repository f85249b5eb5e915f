"""Per-photon-number quantities of the quantum microlaser theory.

All functions work in tau-scaled units (see params module) and are pure:
identical inputs give bit-identical outputs.  The central object is the
complex per-mode rate mu_n/2 whose real part D_n is the phase-diffusion
half width of the n-th spectral component and whose negative imaginary
part delta_n is the per-photon-number frequency pulling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .params import EffectiveDetuning, SystemParams

TRAPPING_SIN_EPS = 1e-9


class QuadratureError(RuntimeError):
    """Raised when an adaptive quadrature cannot reach the requested accuracy."""

    def __init__(self, message: str, error_estimate: float):
        super().__init__(f"{message} (achieved error estimate {error_estimate:.3e})")
        self.error_estimate = error_estimate


def rabi_frequency(n, params: SystemParams, dp: EffectiveDetuning):
    """Generalized n-photon Rabi frequency Omega_n * tau.

    Omega_n = sqrt(4 g^2 (n+1) + delta_prime^2).  Exact; accepts scalar or
    array n >= 0.
    """
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise ValueError("photon index n must be >= 0")
    out = np.sqrt(4.0 * params.g_tau ** 2 * (n + 1.0) + dp.delta_prime_tau ** 2)
    return float(out) if out.ndim == 0 else out


def emission_probability(n, params: SystemParams, dp: EffectiveDetuning):
    """Per-atom photon emission probability with n photons present.

    P(n) = [4 g^2 (n+1) / Omega_n^2] sin^2(Omega_n tau / 2), in [0, 1].
    """
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise ValueError("photon index n must be >= 0")
    w = np.sqrt(4.0 * params.g_tau ** 2 * (n + 1.0) + dp.delta_prime_tau ** 2)
    out = (4.0 * params.g_tau ** 2 * (n + 1.0) / (w * w)) * np.sin(0.5 * w) ** 2
    return float(out) if out.ndim == 0 else out


def mu_exact(n, params: SystemParams, dp: EffectiveDetuning):
    """Exact complex decay rate mu_n/2 of the first off-diagonal mode.

    Implements the full six-term expression term by term, with the cavity
    contribution kept as the -gamma_c(2n+1) + 2 gamma_c sqrt(n(n+1)) pair
    (no algebraic rearrangement, so the value is directly comparable with
    the brute-force evolution path):

        -mu_n/2 = r_a [ cos(W_n/2) cos(W_{n+1}/2)
                        + (d'^2 / W_n W_{n+1}) sin(W_n/2) sin(W_{n+1}/2)
                        - i (d'/W_{n+1}) cos(W_n/2) sin(W_{n+1}/2)
                        + i (d'/W_n) cos(W_{n+1}/2) sin(W_n/2)
                        + (4 g^2 sqrt((n+1)(n+2)) / W_n W_{n+1})
                          * sin(W_n/2) sin(W_{n+1}/2)
                        - 1 ]
                  + 2 gamma_c sqrt(n(n+1)) - gamma_c (2n+1)

    with W_k = Omega_k tau and d' = delta_prime tau.  Returns mu_n tau / 2;
    its real part is D_n tau and its negative imaginary part delta_n tau.
    """
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise ValueError("photon index n must be >= 0")
    g = params.g_tau
    k = params.gamma_c_tau
    b = dp.delta_prime_tau
    wn = np.sqrt(4.0 * g * g * (n + 1.0) + b * b)
    wn1 = np.sqrt(4.0 * g * g * (n + 2.0) + b * b)
    sn, cn = np.sin(0.5 * wn), np.cos(0.5 * wn)
    sn1, cn1 = np.sin(0.5 * wn1), np.cos(0.5 * wn1)
    atom = (cn * cn1
            + (b * b) / (wn * wn1) * sn * sn1
            - 1j * (b / wn1) * cn * sn1
            + 1j * (b / wn) * cn1 * sn
            + (4.0 * g * g * np.sqrt((n + 1.0) * (n + 2.0)) / (wn * wn1)) * sn * sn1
            - 1.0)
    minus_half_mu = (params.n_atoms * atom
                     + 2.0 * k * np.sqrt(n * (n + 1.0))
                     - k * (2.0 * n + 1.0))
    out = -minus_half_mu
    return complex(out) if out.ndim == 0 else out


def decay_approx(n, params: SystemParams, dp: EffectiveDetuning):
    """Large-n approximation of the phase diffusion constant D_n * tau.

    D_n ~= 2 r_a sin^2(g^2 tau / 2 Omega_n) + gamma_c / 4n.  Valid only for
    n >> 1; n = 0 is rejected because the gamma_c/4n term is an artifact of
    the expansion (use mu_exact there).
    """
    n = np.asarray(n, dtype=float)
    if np.any(n < 1):
        raise ValueError("decay_approx requires n >= 1; use mu_exact for n = 0")
    g = params.g_tau
    w = np.sqrt(4.0 * g * g * (n + 1.0) + dp.delta_prime_tau ** 2)
    out = (2.0 * params.n_atoms * np.sin(g * g / (2.0 * w)) ** 2
           + params.gamma_c_tau / (4.0 * n))
    return float(out) if out.ndim == 0 else out


def pulling_approx(n, params: SystemParams, dp: EffectiveDetuning):
    """Large-n approximation of the frequency pulling delta_n * tau.

    delta_n ~= -r_a (g^2 d' tau / Omega_n^2) [1 - sin(Omega_n tau)/(Omega_n tau)]

    The sign is opposite to the field-atom detuning (the line is pulled
    toward atomic resonance) and the value vanishes on resonance.  The
    index n may be fractional; it only enters through Omega_n.
    """
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise ValueError("photon index n must be >= 0")
    g = params.g_tau
    b = dp.delta_prime_tau
    w = np.sqrt(4.0 * g * g * (n + 1.0) + b * b)
    out = -params.n_atoms * g * g * b / (w * w) * (1.0 - np.sin(w) / w)
    return float(out) if out.ndim == 0 else out


def xi(phi):
    """Rabi-angle characteristic function xi(Phi) = (1 - sin(Phi)/Phi) / Phi^2.

    Continuous at 0 with xi(0+) = 1/6; the small-angle branch evaluates the
    series 1/6 - Phi^2/120 + Phi^4/5040 because the direct expression loses
    all significance near 0.
    """
    phi = np.asarray(phi, dtype=float)
    if np.any(phi < 0):
        raise ValueError("phi must be >= 0")
    small = phi < 1e-4
    phi_safe = np.where(small, 1.0, phi)
    direct = (1.0 - np.sin(phi_safe) / phi_safe) / (phi_safe * phi_safe)
    series = 1.0 / 6.0 - phi * phi / 120.0 + phi ** 4 / 5040.0
    out = np.where(small, series, direct)
    return float(out) if out.ndim == 0 else out


def pulling_decomposition(params: SystemParams, dp: EffectiveDetuning,
                          mean_n: float):
    """Split the mean pulling into conventional-laser, pump and Rabi factors.

    Returns (conventional, pump, xi_value) such that for mean_n >> 1

        <delta_n> * tau ~= -(conventional) * (pump) * (xi_value)

    where pump = N / N_th and xi_value = xi(Phi) with the semiclassical
    Rabi angle Phi = sqrt(4 g^2 <n> + d'^2) tau.  The product reproduces
    -pulling_approx evaluated at the same Rabi angle to roundoff; the
    conventional factor is 2 gamma_c d' tau^2, i.e. twice the textbook
    pulling obtained from a dephasing rate equal to the transit-time
    bandwidth.
    """
    if mean_n < 0:
        raise ValueError("mean_n must be >= 0")
    b = dp.delta_prime_tau
    phi = np.sqrt(4.0 * params.g_tau ** 2 * mean_n + b * b)
    conventional = 2.0 * params.gamma_c_tau * b
    pump = params.n_atoms / params.threshold_atom_number
    return conventional, pump, xi(phi)


def dwell_time_integral(gamma_p_tau: float, omega_tau: float,
                        rtol: float = 1e-11):
    """Numerical value of int_0^inf s e^(-2 gp s) [1 - sin(om s)/(om s)] ds.

    Splits into a smooth part and an oscillatory part handled by a
    sine-weighted quadrature on the half line.  Returns (value, error
    estimate); raises QuadratureError if the estimate exceeds the target.
    """
    if gamma_p_tau <= 0:
        raise ValueError("gamma_p_tau must be > 0")
    if omega_tau <= 0:
        raise ValueError("omega_tau must be > 0")
    gp, om = gamma_p_tau, omega_tau
    i1, e1 = quad(lambda s: s * np.exp(-2.0 * gp * s), 0.0, np.inf,
                  epsabs=0.0, epsrel=rtol, limit=400)
    i2, e2 = quad(lambda s: np.exp(-2.0 * gp * s), 0.0, np.inf,
                  weight="sin", wvar=om, epsabs=1e-14, limit=800)
    value = i1 - i2 / om
    err = e1 + abs(e2 / om)
    if err > max(1e-13, 10.0 * rtol * abs(value)):
        raise QuadratureError("dwell-time quadrature did not converge", err)
    return value, err


def conventional_limit_average(params: SystemParams, gamma_p_tau: float,
                               omega_tau: float) -> float:
    """Mean pulling * tau after averaging over exponential dwell times.

    Averages the transit-time pulling formula over the dwell-time density
    P(s) = 2 gp exp(-2 gp s), which washes out the coherent Rabi angle and
    recovers the conventional-laser behaviour: the result equals
    -r_a g^2 Delta / (2 gp (4 gp^2 + Omega^2)) in tau units, and reduces to
    -Delta gamma_c / (2 gp) under the conventional steady-state condition
    2 r_a g^2 / (4 gp^2 + Omega^2) = 2 gamma_c.
    """
    integral, _ = dwell_time_integral(gamma_p_tau, omega_tau)
    g = params.g_tau
    prefactor = -params.n_atoms * g * g * params.delta_tau / omega_tau ** 2
    return prefactor * 2.0 * gamma_p_tau * integral


def trapping_indices(params: SystemParams, dp: EffectiveDetuning,
                     n_max: int) -> np.ndarray:
    """Indices n <= n_max whose Rabi angle sits on a trapping condition.

    Flags |sin(Omega_n tau / 2)| < 1e-9, where the emission probability
    vanishes and the photon ladder truncates.
    """
    n = np.arange(n_max + 1, dtype=float)
    w = np.sqrt(4.0 * params.g_tau ** 2 * (n + 1.0) + dp.delta_prime_tau ** 2)
    return np.where(np.abs(np.sin(0.5 * w)) < TRAPPING_SIN_EPS)[0]


@dataclass(frozen=True)
class PullingProfile:
    """Arrays of Omega_n, D_n and delta_n (all * tau) for n = 0..n_max."""

    delta_prime: EffectiveDetuning
    omega_n: np.ndarray
    d_n: np.ndarray
    pulling_n: np.ndarray
    n_max: int
    trapping: np.ndarray  # flagged trapping indices, possibly empty


def pulling_profile(params: SystemParams, dp: EffectiveDetuning,
                    n_max: int, coupling_quad=None) -> PullingProfile:
    """Evaluate the exact kernel over n = 0..n_max.

    coupling_quad, when given, is a (nodes, weights) pair describing a
    quadrature over an effective g*tau distribution; the complex rates are
    then weight-averaged over the nodes (mode-function extension point,
    disabled by default).
    """
    n = np.arange(n_max + 1, dtype=float)
    if coupling_quad is None:
        z = mu_exact(n, params, dp)
    else:
        z = averaged_mu(n, params, dp, *coupling_quad)
    return PullingProfile(
        delta_prime=dp,
        omega_n=rabi_frequency(n, params, dp),
        d_n=np.real(z),
        pulling_n=-np.imag(z),
        n_max=n_max,
        trapping=trapping_indices(params, dp, n_max),
    )


def averaged_mu(n, params: SystemParams, dp: EffectiveDetuning,
                nodes, weights):
    """Quadrature average of mu_exact over an effective coupling distribution."""
    nodes = np.asarray(nodes, dtype=float)
    weights = np.asarray(weights, dtype=float)
    _check_quad(nodes, weights)
    out = 0.0
    for g_node, w in zip(nodes, weights):
        out = out + w * mu_exact(n, params.with_(g_tau=float(g_node)), dp)
    return out


def averaged_emission_probability(n, params: SystemParams,
                                  dp: EffectiveDetuning, nodes, weights):
    """Quadrature average of the emission probability over coupling nodes."""
    nodes = np.asarray(nodes, dtype=float)
    weights = np.asarray(weights, dtype=float)
    _check_quad(nodes, weights)
    out = 0.0
    for g_node, w in zip(nodes, weights):
        out = out + w * emission_probability(n, params.with_(g_tau=float(g_node)), dp)
    return out


def _check_quad(nodes, weights):
    if nodes.shape != weights.shape or nodes.ndim != 1 or nodes.size == 0:
        raise ValueError("coupling quadrature needs matching 1-d nodes/weights")
    if np.any(nodes <= 0):
        raise ValueError("coupling quadrature nodes must be positive")
    total = weights.sum()
    if not np.isclose(total, 1.0, rtol=1e-9, atol=0.0):
        warnings.warn(f"coupling quadrature weights sum to {total!r}, not 1")
