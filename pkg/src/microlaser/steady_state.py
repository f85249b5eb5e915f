"""Steady-state photon statistics and the self-consistent detuning solve.

The photon number distribution follows from detailed balance between the
per-atom gain flow r_a P(n-1) p_{n-1} and the cavity loss flow
2 gamma_c n p_n.  The effective detuning is then pinned by the fixed point

    delta_prime = delta + <delta_n>

where the mean pulling is taken over the coherence weight (n+1) p_{n+1}
(the same weight that builds the first-order correlation function; the
identical weight is used for <D_n> and the pulling spread).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernel
from .params import EffectiveDetuning, SystemParams

DEFAULT_TAIL_THRESHOLD = 1e-12
DEFAULT_N_CAP = 20000
DEFAULT_FIXED_POINT_TOL = 1e-10
DEFAULT_DAMPING = 0.5
MIN_DAMPING = 1.0 / 64.0


@dataclass(frozen=True)
class PhotonDistribution:
    """Truncated steady-state photon number distribution.

    p[n] holds the probability of n photons for n = 0..n_max, normalized to
    unit total.  tail_mass estimates the probability that the truncation
    discarded, relative to the untruncated distribution.
    """

    p: np.ndarray
    n_max: int
    mean_n: float
    mandel_q: Optional[float]
    tail_mass: float


def _distribution_from_probs(p: np.ndarray, tail_mass: float) -> PhotonDistribution:
    p = p / p.sum()
    n = np.arange(len(p), dtype=float)
    mean_n = float(np.dot(n, p))
    if mean_n > 0.0:
        var = float(np.dot(n * n, p)) - mean_n ** 2
        mandel_q = var / mean_n - 1.0
    else:
        mandel_q = None
    return PhotonDistribution(p=p, n_max=len(p) - 1, mean_n=mean_n,
                              mandel_q=mandel_q, tail_mass=tail_mass)


def suggested_basis_size(params: SystemParams) -> int:
    """Photon-basis size covering the steady state with Poissonian margin.

    Gain never exceeds r_a, so the support is bounded by N_ex plus a few
    standard deviations of shot noise.
    """
    nex = params.n_ex
    return int(max(64, np.ceil(nex + 12.0 * np.sqrt(nex + 25.0) + 50.0)))


def photon_distribution(params: SystemParams, dp: EffectiveDetuning, *,
                        tail_threshold: float = DEFAULT_TAIL_THRESHOLD,
                        n_cap: int = DEFAULT_N_CAP,
                        coupling_quad=None) -> PhotonDistribution:
    """Detailed-balance photon distribution at a given effective detuning.

    Built from the recursion

        p_n = p_{n-1} * [N / (2 gamma_c tau n)] * P(n-1)

    evaluated in log space to avoid overflow, where P is the per-atom
    emission probability.  The truncation grows geometrically until the
    estimated discarded mass drops below tail_threshold (or n_cap is hit,
    which is reported as a warning).  Emission factors at trapping indices
    (|sin| below roundoff scale) are treated as exact zeros, which hard-
    truncates the ladder exactly as the trapping condition demands.
    """
    if params.n_atoms == 0.0:
        return _distribution_from_probs(np.array([1.0]), 0.0)

    n_max = min(suggested_basis_size(params), n_cap)
    while True:
        n = np.arange(1, n_max + 1, dtype=float)
        if coupling_quad is None:
            pn = kernel.emission_probability(n - 1.0, params, dp)
        else:
            pn = kernel.averaged_emission_probability(n - 1.0, params, dp,
                                                      *coupling_quad)
        wn = kernel.rabi_frequency(n - 1.0, params, dp)
        pn = np.where(np.abs(np.sin(0.5 * wn)) < kernel.TRAPPING_SIN_EPS, 0.0, pn)
        ratio = params.n_atoms / (2.0 * params.gamma_c_tau * n) * pn
        with np.errstate(divide="ignore"):
            log_ratio = np.log(ratio, out=np.full_like(ratio, -np.inf),
                               where=ratio > 0.0)
        log_p = np.concatenate([[0.0], np.cumsum(log_ratio)])
        log_p -= log_p.max()
        q = np.exp(log_p)
        total = q.sum()

        # geometric bound on the mass beyond the truncation
        r_edge = float(ratio[-1]) if np.isfinite(log_p[-1]) else 0.0
        if 0.0 < r_edge < 1.0:
            tail = q[-1] * r_edge / (1.0 - r_edge)
        elif r_edge == 0.0 or q[-1] == 0.0:
            tail = 0.0
        else:
            tail = np.inf
        tail_mass = tail / (total + tail)

        if tail_mass < tail_threshold or n_max >= n_cap:
            break
        n_max = min(2 * n_max, n_cap)

    if tail_mass >= tail_threshold:
        warnings.warn(
            f"photon basis capped at {n_max} with tail mass {tail_mass:.3e} "
            f"above threshold {tail_threshold:.1e}")
    return _distribution_from_probs(q, tail_mass)


@dataclass(frozen=True)
class SteadyState:
    """Converged operating point: distribution, kernel profile and moments."""

    params: SystemParams
    delta_prime: EffectiveDetuning
    dist: PhotonDistribution
    profile: kernel.PullingProfile
    mean_pulling: float      # <delta_n> * tau
    pulling_std: float       # spread of delta_n * tau over the weight
    mean_diffusion: float    # <D_n> * tau
    iterations: int
    converged: bool
    residual: float          # delta + <delta_n> - delta_prime, tau units
    trapping_flags: np.ndarray = field(default_factory=lambda: np.array([], int))
    damping_final: float = DEFAULT_DAMPING


def _coherence_weights(p: np.ndarray) -> np.ndarray:
    """Unnormalized spectral weights w_n = (n+1) p_{n+1}, n = 0..n_max-1."""
    n = np.arange(len(p) - 1, dtype=float)
    return (n + 1.0) * p[1:]


def _weighted_moments(p, profile):
    w = _coherence_weights(p)
    total = w.sum()
    if total <= 0.0:
        # no photons: the only surviving component is the n = 0 coherence
        return 0.0, 0.0, float(profile.d_n[0])
    w = w / total
    d = profile.pulling_n[:len(w)]
    dd = profile.d_n[:len(w)]
    mean_pull = float(np.dot(w, d))
    var = max(float(np.dot(w, d * d)) - mean_pull ** 2, 0.0)
    return mean_pull, float(np.sqrt(var)), float(np.dot(w, dd))


def mean_pulling_at(params: SystemParams, dp: EffectiveDetuning, *,
                    tail_threshold: float = DEFAULT_TAIL_THRESHOLD,
                    n_cap: int = DEFAULT_N_CAP,
                    coupling_quad=None) -> float:
    """<delta_n> * tau at a frozen effective detuning (one solver iterate)."""
    dist = photon_distribution(params, dp, tail_threshold=tail_threshold,
                               n_cap=n_cap, coupling_quad=coupling_quad)
    profile = kernel.pulling_profile(params, dp, dist.n_max,
                                     coupling_quad=coupling_quad)
    return _weighted_moments(dist.p, profile)[0]


def detuning_residual(params: SystemParams, delta_prime_tau: float,
                      **kw) -> float:
    """Fixed-point residual r(d') = delta + <delta_n>(d') - d' in tau units."""
    mp = mean_pulling_at(params, EffectiveDetuning(delta_prime_tau), **kw)
    return params.delta_tau + mp - delta_prime_tau


def self_consistent_detuning(params: SystemParams, *,
                             damping: float = DEFAULT_DAMPING,
                             tol: float = DEFAULT_FIXED_POINT_TOL,
                             max_iter: int = 500,
                             warm_start: Optional[float] = None,
                             tail_threshold: float = DEFAULT_TAIL_THRESHOLD,
                             n_cap: int = DEFAULT_N_CAP,
                             coupling_quad=None) -> SteadyState:
    """Solve delta_prime = delta + <delta_n>(delta_prime) by damped iteration.

    Starts from the passive detuning (or warm_start) and applies

        d'_{k+1} = d'_k + alpha [ delta + <delta_n>(d'_k) - d'_k ]

    Oscillating iterates with non-shrinking steps, as happen near
    multiple-threshold bistability, halve alpha down to 1/64 before the
    solve is declared failed.  A non-converged solve returns the best
    iterate with converged=False and the residual.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must be in (0, 1]")
    alpha = damping
    x = params.delta_tau if warm_start is None else float(warm_start)
    prev_step = None
    best = (np.inf, x)
    solve_kw = dict(tail_threshold=tail_threshold, n_cap=n_cap,
                    coupling_quad=coupling_quad)

    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        mp = mean_pulling_at(params, EffectiveDetuning(x), **solve_kw)
        r = params.delta_tau + mp - x
        if abs(r) < best[0]:
            best = (abs(r), x)
        if abs(r) < tol:
            converged = True
            break
        step = alpha * r
        if prev_step is not None and step * prev_step < 0.0 \
                and abs(step) >= abs(prev_step):
            alpha = max(alpha / 2.0, MIN_DAMPING)
            step = alpha * r
        x += step
        prev_step = step
    else:
        x = best[1]

    dp = EffectiveDetuning(x)
    dist = photon_distribution(params, dp, **{k: v for k, v in solve_kw.items()})
    profile = kernel.pulling_profile(params, dp, dist.n_max,
                                     coupling_quad=coupling_quad)
    mean_pull, pull_std, mean_diff = _weighted_moments(dist.p, profile)
    residual = params.delta_tau + mean_pull - x
    w = _coherence_weights(dist.p)
    w_max = w.max() if len(w) else 0.0
    flagged = profile.trapping[profile.trapping < len(w)] if len(w) else profile.trapping
    active = np.array([i for i in flagged if w_max > 0 and w[i] > 1e-12 * w_max],
                      dtype=int)
    return SteadyState(
        params=params, delta_prime=dp, dist=dist, profile=profile,
        mean_pulling=mean_pull, pulling_std=pull_std, mean_diffusion=mean_diff,
        iterations=iterations, converged=converged, residual=residual,
        trapping_flags=active, damping_final=alpha,
    )


def field_statistics(state: SteadyState):
    """(mean_n, mandel_q, mean_pulling, pulling_std, mean_diffusion).

    Recomputed from the stored distribution and profile; mandel_q is None
    for a vacuum state (undefined), never a number.
    """
    p = state.dist.p
    n = np.arange(len(p), dtype=float)
    mean_n = float(np.dot(n, p))
    if mean_n > 0.0:
        mandel_q = (float(np.dot(n * n, p)) - mean_n ** 2) / mean_n - 1.0
    else:
        mandel_q = None
    mean_pull, pull_std, mean_diff = _weighted_moments(p, state.profile)
    return mean_n, mandel_q, mean_pull, pull_std, mean_diff


def uniqueness_check(params: SystemParams, dampings=(0.5, 0.25), **kw) -> float:
    """Max spread of converged delta_prime across damping choices.

    Near a multiple-threshold transition the fixed point can fail to be
    unique; a spread above solver tolerance signals that both candidate
    detunings attract iterates.
    """
    values = [self_consistent_detuning(params, damping=a, **kw).delta_prime.delta_prime_tau
              for a in dampings]
    return float(np.max(values) - np.min(values))
