"""Boltzmann-weighted thermal seeding and mean-field fluorescence ensembles.

Temperatures are in frequency units (k_B = 1).  Boltzmann weighting of the
oscillator levels implies Bose-Einstein mean occupancy, and the unique
phase-symmetric amplitude distribution with that occupancy is the isotropic
complex Gaussian sampled here.  Ensembles are reproducible: every sample
draws from its own generator, derived from the master seed by counter-mode
splitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError
from .fockspace import ModeParams
from .meanfield import DIVERGENCE_LIMIT, num_steps

#: Beyond this value of omega/T the occupancy underflows to zero anyway.
_EXP_ARG_LIMIT = 700.0


@dataclass(frozen=True)
class ThermalParams:
    """Bath temperature (k_B = 1) and master RNG seed."""

    temperature: float
    seed: int = 0

    def __post_init__(self):
        if not (self.temperature >= 0 and math.isfinite(self.temperature)):
            raise ValueError(f"temperature must be finite and >= 0, "
                             f"got {self.temperature}")


def mean_occupancy(omega: float, temperature: float) -> float:
    """Bose-Einstein mean photon number 1 / (exp(omega/T) - 1)."""
    if omega <= 0:
        raise ValueError(f"omega must be > 0, got {omega}")
    if temperature < 0:
        raise ValueError(f"temperature must be >= 0, got {temperature}")
    if temperature == 0:
        return 0.0
    x = omega / temperature
    if x > _EXP_ARG_LIMIT:
        return 0.0
    return 1.0 / math.expm1(x)


def sample_thermal_amplitude(omega: float, temperature: float,
                             rng: np.random.Generator) -> complex:
    """One thermal coherent label: isotropic complex Gaussian, E|alpha|^2 = nbar."""
    nbar = mean_occupancy(omega, temperature)
    if nbar == 0.0:
        return 0j
    scale = math.sqrt(nbar / 2.0)
    re, im = rng.normal(0.0, scale, size=2)
    return complex(re, im)


@dataclass
class EnsembleStats:
    """Per-time-step statistics of |alpha1|^2 and |alpha2|^2 over an ensemble.

    Means and variances (ddof=1) are taken over the surviving samples;
    trajectories that hit the divergence guard are excluded entirely and
    counted in ``n_failures``.
    """

    times: np.ndarray
    mean_n1: np.ndarray
    var_n1: np.ndarray
    mean_n2: np.ndarray
    var_n2: np.ndarray
    n_samples: int
    n_failures: int


def _rhs_batch(a: np.ndarray, omegas: np.ndarray, kp: complex) -> np.ndarray:
    """Mean-field right-hand side for a (3, N) batch of amplitude columns."""
    out = np.empty_like(a)
    out[0] = -1j * omegas[0] * a[0] - 1j * np.conj(kp) * a[1] * a[2]
    out[1] = -1j * omegas[1] * a[1] - 1j * kp * a[0] * np.conj(a[2])
    out[2] = -1j * omegas[2] * a[2] - 1j * kp * a[0] * np.conj(a[1])
    return out


def fluorescence_ensemble(params: ModeParams, thermal: ThermalParams,
                          t_final: float, dt: float,
                          n_samples: int) -> EnsembleStats:
    """Mean-field fluorescence statistics over thermally seeded trajectories.

    Every sample starts from (pump_alpha0, thermal draw at omega1, thermal
    draw at omega2) and is integrated with the same fixed-step RK4 scheme
    as :func:`opasim.meanfield.integrate_rk4`, batched over the ensemble.
    Identical master seeds give bit-identical statistics.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if t_final < dt:
        raise ValueError(f"t_final = {t_final} must be at least dt = {dt}")

    seed_seq = np.random.SeedSequence(thermal.seed)
    children = seed_seq.spawn(n_samples)
    a = np.empty((3, n_samples), dtype=complex)
    a[0] = params.pump_alpha0
    for k, child in enumerate(children):
        rng = np.random.default_rng(child)
        a[1, k] = sample_thermal_amplitude(params.omega1, thermal.temperature, rng)
        a[2, k] = sample_thermal_amplitude(params.omega2, thermal.temperature, rng)

    steps = num_steps(t_final, dt)
    omegas = np.array(params.omegas)
    kp = params.kappa_prime

    n1 = np.empty((steps + 1, n_samples))
    n2 = np.empty((steps + 1, n_samples))
    n1[0] = np.abs(a[1]) ** 2
    n2[0] = np.abs(a[2]) ** 2
    alive = np.ones(n_samples, dtype=bool)

    for k in range(steps):
        k1 = _rhs_batch(a, omegas, kp)
        k2 = _rhs_batch(a + 0.5 * dt * k1, omegas, kp)
        k3 = _rhs_batch(a + 0.5 * dt * k2, omegas, kp)
        k4 = _rhs_batch(a + dt * k3, omegas, kp)
        a = a + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        bad = ~np.all(np.isfinite(a) & (np.abs(a) < DIVERGENCE_LIMIT), axis=0)
        if np.any(bad & alive):
            alive &= ~bad
            a[:, bad] = 0.0  # frozen; excluded from the aggregates below
        n1[k + 1] = np.abs(a[1]) ** 2
        n2[k + 1] = np.abs(a[2]) ** 2

    n_failures = int(n_samples - np.count_nonzero(alive))
    if n_failures == n_samples:
        raise DivergenceError("every ensemble member diverged")

    n1 = n1[:, alive]
    n2 = n2[:, alive]
    ddof = 1 if n1.shape[1] > 1 else 0
    times = np.arange(steps + 1) * dt
    return EnsembleStats(
        times=times,
        mean_n1=n1.mean(axis=1), var_n1=n1.var(axis=1, ddof=ddof),
        mean_n2=n2.mean(axis=1), var_n2=n2.var(axis=1, ddof=ddof),
        n_samples=n_samples, n_failures=n_failures,
    )
