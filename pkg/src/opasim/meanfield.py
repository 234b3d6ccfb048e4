"""Mean-field three-wave-mixing dynamics for complex mode amplitudes.

With kappa' = kappa * exp(-i*phi) the coupled equations are

    d(alpha0)/dt = -i omega0 alpha0 - i conj(kappa') alpha1 alpha2
    d(alpha1)/dt = -i omega1 alpha1 - i kappa' alpha0 conj(alpha2)
    d(alpha2)/dt = -i omega2 alpha2 - i kappa' alpha0 conj(alpha1)

They conserve the three Manley-Rowe combinations |a0|^2 + |a1|^2,
|a0|^2 + |a2|^2 and |a1|^2 - |a2|^2, which bound every trajectory; the
fixed-step RK4 integrator below is checked against those invariants and
against the closed-form undepleted-pump solution.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .errors import DivergenceError
from .fockspace import ModeParams

#: Amplitudes beyond this magnitude abort the integration as divergent.
DIVERGENCE_LIMIT = 1e6

#: Relative slack used when counting whole steps into a final time.
_STEP_ROUNDING = 1e-9


@dataclass(frozen=True)
class MeanFieldState:
    """Complex amplitudes of pump, signal and idler; |alpha|^2 is a photon number."""

    alpha0: complex
    alpha1: complex
    alpha2: complex

    def __post_init__(self):
        for name in ("alpha0", "alpha1", "alpha2"):
            if not cmath.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def as_tuple(self) -> tuple[complex, complex, complex]:
        return (self.alpha0, self.alpha1, self.alpha2)


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled mean-field evolution starting at ``t0``."""

    t0: float
    dt: float
    samples: list[MeanFieldState]

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if len(self.samples) < 2:
            raise ValueError("a trajectory needs at least 2 samples")

    @property
    def t_final(self) -> float:
        return self.t0 + (len(self.samples) - 1) * self.dt

    def times(self) -> list[float]:
        return [self.t0 + k * self.dt for k in range(len(self.samples))]


def num_steps(t_final: float, dt: float) -> int:
    """Whole steps of size dt fitting into t_final (rounding-tolerant)."""
    return int(math.floor(t_final / dt + _STEP_ROUNDING))


def _rhs(a0: complex, a1: complex, a2: complex,
         w0: float, w1: float, w2: float, kp: complex):
    return (
        -1j * w0 * a0 - 1j * kp.conjugate() * a1 * a2,
        -1j * w1 * a1 - 1j * kp * a0 * a2.conjugate(),
        -1j * w2 * a2 - 1j * kp * a0 * a1.conjugate(),
    )


def derivatives(s: MeanFieldState, params: ModeParams) -> MeanFieldState:
    """Time-derivative triple of the mean-field equations at state ``s``."""
    d0, d1, d2 = _rhs(s.alpha0, s.alpha1, s.alpha2,
                      params.omega0, params.omega1, params.omega2,
                      params.kappa_prime)
    return MeanFieldState(d0, d1, d2)


def integrate_rk4(s0: MeanFieldState, params: ModeParams,
                  t_final: float, dt: float) -> Trajectory:
    """Classic fixed-step RK4 trajectory from ``s0``.

    The last sample sits at the largest multiple of ``dt`` not exceeding
    ``t_final``.  Raises :class:`DivergenceError` (reporting the time) if
    any amplitude leaves the divergence guard.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if t_final < dt:
        raise ValueError(f"t_final = {t_final} must be at least dt = {dt}")

    w0, w1, w2 = params.omegas
    kp = params.kappa_prime
    a0, a1, a2 = s0.as_tuple()
    samples = [s0]
    steps = num_steps(t_final, dt)
    for k in range(steps):
        k1 = _rhs(a0, a1, a2, w0, w1, w2, kp)
        k2 = _rhs(a0 + 0.5 * dt * k1[0], a1 + 0.5 * dt * k1[1],
                  a2 + 0.5 * dt * k1[2], w0, w1, w2, kp)
        k3 = _rhs(a0 + 0.5 * dt * k2[0], a1 + 0.5 * dt * k2[1],
                  a2 + 0.5 * dt * k2[2], w0, w1, w2, kp)
        k4 = _rhs(a0 + dt * k3[0], a1 + dt * k3[1], a2 + dt * k3[2],
                  w0, w1, w2, kp)
        a0 = a0 + (dt / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        a1 = a1 + (dt / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        a2 = a2 + (dt / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        if not all(cmath.isfinite(a) and abs(a) < DIVERGENCE_LIMIT
                   for a in (a0, a1, a2)):
            raise DivergenceError(
                f"mean-field amplitudes diverged at t = {(k + 1) * dt:.6g}",
                time=(k + 1) * dt,
            )
        samples.append(MeanFieldState(a0, a1, a2))
    return Trajectory(t0=0.0, dt=dt, samples=samples)


def manley_rowe(s: MeanFieldState) -> tuple[float, float, float]:
    """The conserved triples (|a0|^2+|a1|^2, |a0|^2+|a2|^2, |a1|^2-|a2|^2)."""
    n0 = abs(s.alpha0) ** 2
    n1 = abs(s.alpha1) ** 2
    n2 = abs(s.alpha2) ** 2
    return (n0 + n1, n0 + n2, n1 - n2)


def undepleted_pump_solution(b1_0: complex, b2_0: complex,
                             params: ModeParams, t: float) -> tuple[complex, complex]:
    """Signal/idler amplitudes when the pump only oscillates, never depletes.

    In the rotating frame b_j = alpha_j * exp(i omega_j t) the linearized
    equations close into

        b1(t) = b1(0) cosh(gt) - i e^{i theta} conj(b2(0)) sinh(gt)
        b2(t) = b2(0) cosh(gt) - i e^{i theta} conj(b1(0)) sinh(gt)

    with gain g = kappa |alpha0(0)| and theta = arg(alpha0(0)) - phi.
    Returns the lab-frame amplitudes (alpha1(t), alpha2(t)).  Valid only
    while pump depletion stays negligible; the tests quantify that window
    against the full RK4 integration.
    """
    g = params.kappa_mag * abs(params.pump_alpha0)
    theta = cmath.phase(params.pump_alpha0) - params.phi if params.pump_alpha0 != 0 \
        else -params.phi
    ch = math.cosh(g * t)
    sh = math.sinh(g * t)
    mix = -1j * cmath.exp(1j * theta) * sh
    b1_t = b1_0 * ch + mix * b2_0.conjugate()
    b2_t = b2_0 * ch + mix * b1_0.conjugate()
    return (b1_t * cmath.exp(-1j * params.omega1 * t),
            b2_t * cmath.exp(-1j * params.omega2 * t))
