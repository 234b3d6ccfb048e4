"""Time-sliced coherent-state propagator for the three-wave-mixing system.

A path is a sequence of coherent labels (one complex triple per time
slice).  Each slice contributes the short-time kernel

    K_j = <next|prev> * (1 - i eta h(next*, prev)),

where <next|prev> is the three-mode coherent overlap and h substitutes
labels into the normal-ordered Hamiltonian with the mixed-argument rule:
conj(next) for every creation operator, prev for every annihilation
operator.  The kernel is exact to O(eta^2) per slice, so slice products
converge to truncated-space propagators at rate O(1/n), and the continuum
limit of the product phase is the classical action evaluated below.
"""

from __future__ import annotations

import cmath
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CoarseStepWarning, DivergenceError
from .fockspace import ModeParams
from .meanfield import MeanFieldState, Trajectory, integrate_rk4

#: Warn when eta * max(omega) exceeds this: the linearized kernel degrades.
KERNEL_STEP_LIMIT = 0.1

#: Guard on the log-magnitude of a slice product.
LOG_OVERFLOW_LIMIT = 700.0

Triple = tuple[complex, complex, complex]


@dataclass(frozen=True)
class SlicedPath:
    """Coherent labels along a discretized path on [t_a, t_b].

    ``labels`` has shape (n+1, 3) for n >= 1 slices; rows 0 and n are the
    fixed endpoints, interior rows are integration variables of the
    underlying functional integral.
    """

    t_a: float
    t_b: float
    labels: np.ndarray

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=complex)
        if labels.ndim != 2 or labels.shape[1] != 3 or labels.shape[0] < 2:
            raise ValueError(
                f"labels must have shape (n+1, 3) with n >= 1, got {labels.shape}"
            )
        if not np.all(np.isfinite(labels)):
            raise ValueError("path labels must be finite")
        if not self.t_b > self.t_a:
            raise ValueError(f"need t_b > t_a, got [{self.t_a}, {self.t_b}]")
        object.__setattr__(self, "labels", labels)

    @property
    def n_slices(self) -> int:
        return self.labels.shape[0] - 1

    @property
    def eta(self) -> float:
        return (self.t_b - self.t_a) / self.n_slices


def path_from_trajectory(traj: Trajectory, t_a: float = 0.0) -> SlicedPath:
    """Reinterpret a mean-field trajectory as a sliced path skeleton."""
    labels = np.array([s.as_tuple() for s in traj.samples], dtype=complex)
    span = traj.dt * (len(traj.samples) - 1)
    return SlicedPath(t_a=t_a, t_b=t_a + span, labels=labels)


def free_propagator_closed_form(alpha_a: complex, alpha_b: complex,
                                omega: float, t: float) -> complex:
    """Untruncated free-mode amplitude <alpha_b| e^{-i omega n t} |alpha_a>."""
    return cmath.exp(-0.5 * abs(alpha_b) ** 2 - 0.5 * abs(alpha_a) ** 2
                     + alpha_b.conjugate() * alpha_a * cmath.exp(-1j * omega * t))


def free_mode_path(alpha: complex, omega: float, t: float, n: int,
                   pinned_end: complex | None = None) -> SlicedPath:
    """Single-mode free classical path alpha * e^{-i omega t} in mode slot 0.

    With ``pinned_end`` the final (bra) label is overridden, which is how a
    fixed-endpoint propagator <pinned_end| U(t) |alpha> is skeletonized on
    the launched classical trajectory: the jump sits entirely in the last
    slice's overlap factor.
    """
    ts = np.linspace(0.0, t, n + 1)
    labels = np.zeros((n + 1, 3), dtype=complex)
    labels[:, 0] = alpha * np.exp(-1j * omega * ts)
    if pinned_end is not None:
        labels[-1, 0] = pinned_end
    return SlicedPath(t_a=0.0, t_b=t, labels=labels)


def _overlap(bra: np.ndarray, ket: np.ndarray) -> complex:
    """Three-mode coherent overlap <bra|ket> of fully quantum labels."""
    exponent = np.sum(-0.5 * np.abs(bra) ** 2 - 0.5 * np.abs(ket) ** 2
                      + np.conj(bra) * ket)
    return complex(np.exp(exponent))


def _mixed_hamiltonian(nxt: np.ndarray, prv: np.ndarray, params: ModeParams) -> complex:
    """Normal-ordered Hamiltonian with bras from ``nxt`` and kets from ``prv``."""
    kp = params.kappa_prime
    free = (params.omega0 * np.conj(nxt[0]) * prv[0]
            + params.omega1 * np.conj(nxt[1]) * prv[1]
            + params.omega2 * np.conj(nxt[2]) * prv[2])
    interaction = (kp * prv[0] * np.conj(nxt[1]) * np.conj(nxt[2])
                   + np.conj(kp) * np.conj(nxt[0]) * prv[1] * prv[2])
    return complex(free + interaction)


def slice_kernel(prev: Triple, next: Triple, eta: float,
                 params: ModeParams) -> complex:
    """Short-time kernel <next| (1 - i eta H) |prev> between coherent labels."""
    if eta <= 0:
        raise ValueError(f"eta must be > 0, got {eta}")
    w_max = max(abs(w) for w in params.omegas)
    if eta * w_max > KERNEL_STEP_LIMIT:
        warnings.warn(
            f"slice step eta*omega = {eta * w_max:.3g} exceeds "
            f"{KERNEL_STEP_LIMIT}; the linearized kernel is inaccurate",
            CoarseStepWarning, stacklevel=2,
        )
    prv = np.asarray(prev, dtype=complex)
    nxt = np.asarray(next, dtype=complex)
    return _overlap(nxt, prv) * (1.0 - 1j * eta * _mixed_hamiltonian(nxt, prv, params))


def _slice_kernels(path: SlicedPath, params: ModeParams) -> np.ndarray:
    """All slice kernels of a path at once (vectorized over slices)."""
    prv = path.labels[:-1]
    nxt = path.labels[1:]
    eta = path.eta

    w_max = max(abs(w) for w in params.omegas)
    if eta * w_max > KERNEL_STEP_LIMIT:
        warnings.warn(
            f"slice step eta*omega = {eta * w_max:.3g} exceeds "
            f"{KERNEL_STEP_LIMIT}; the linearized kernel is inaccurate",
            CoarseStepWarning, stacklevel=3,
        )

    overlap_exp = np.sum(-0.5 * np.abs(nxt) ** 2 - 0.5 * np.abs(prv) ** 2
                         + np.conj(nxt) * prv, axis=1)
    kp = params.kappa_prime
    h = (params.omega0 * np.conj(nxt[:, 0]) * prv[:, 0]
         + params.omega1 * np.conj(nxt[:, 1]) * prv[:, 1]
         + params.omega2 * np.conj(nxt[:, 2]) * prv[:, 2]
         + kp * prv[:, 0] * np.conj(nxt[:, 1]) * np.conj(nxt[:, 2])
         + np.conj(kp) * np.conj(nxt[:, 0]) * prv[:, 1] * prv[:, 2])
    return np.exp(overlap_exp) * (1.0 - 1j * eta * h)


def product_propagator(path: SlicedPath, params: ModeParams) -> complex:
    """Product of all slice kernels along the path, in slice order.

    Raises :class:`DivergenceError` when the running log-magnitude of the
    product leaves the floating-point-safe window.
    """
    kernels = _slice_kernels(path, params)
    product = 1.0 + 0.0j
    log_mag = 0.0
    for k in kernels:
        mag = abs(k)
        if mag == 0.0:
            raise DivergenceError("slice product vanished (|log K| overflow)")
        log_mag += np.log(mag)
        if abs(log_mag) > LOG_OVERFLOW_LIMIT:
            raise DivergenceError(
                f"slice product log-magnitude {log_mag:.3g} exceeds "
                f"{LOG_OVERFLOW_LIMIT}"
            )
        product *= k
    return complex(product)


def _time_derivatives(labels: np.ndarray, dt: float) -> np.ndarray:
    """Centered differences in the interior, one-sided at the endpoints."""
    dot = np.empty_like(labels)
    dot[1:-1] = (labels[2:] - labels[:-2]) / (2.0 * dt)
    dot[0] = (labels[1] - labels[0]) / dt
    dot[-1] = (labels[-1] - labels[-2]) / dt
    return dot


def _free_lagrangian(path: SlicedPath, params: ModeParams) -> np.ndarray:
    """Kinetic minus free-oscillator part of L at every path sample (real)."""
    labels = path.labels
    dot = _time_derivatives(labels, path.eta)
    kinetic = -np.sum(np.imag(np.conj(labels) * dot), axis=1)
    omegas = np.array(params.omegas)
    free = np.sum(omegas[None, :] * np.abs(labels) ** 2, axis=1)
    return kinetic - free


def _interaction_term(path: SlicedPath) -> np.ndarray:
    """The label monomial alpha0 * conj(alpha1) * conj(alpha2) per sample."""
    labels = path.labels
    return labels[:, 0] * np.conj(labels[:, 1]) * np.conj(labels[:, 2])


def lagrangian_samples(path: SlicedPath, params: ModeParams) -> np.ndarray:
    """Classical Lagrangian at every path sample.

    L = sum_j [-Im(conj(a_j) da_j/dt) - omega_j |a_j|^2]
        - 2 Re(kappa' a0 conj(a1) conj(a2)),

    real-valued on conjugate-consistent label paths.
    """
    return (_free_lagrangian(path, params)
            - 2.0 * np.real(params.kappa_prime * _interaction_term(path)))


def classical_action(path: SlicedPath, params: ModeParams) -> float:
    """Trapezoid-rule time integral of the Lagrangian along the path."""
    if path.n_slices < 2:
        raise ValueError("classical_action needs at least 2 slices")
    return float(np.trapezoid(lagrangian_samples(path, params), dx=path.eta))


def lagrangian_difference(path: SlicedPath, params: ModeParams,
                          eta_param: complex) -> np.ndarray:
    """|L - L_alt(eta_param)| per sample, where L_alt swaps the coupling term.

    L_alt replaces the interaction -kappa' a0 a1* a2* - c.c. by the
    phenomenological form +eta a0 a1* a2* + c.c.; the two Lagrangians
    coincide identically under eta_param = -kappa'.
    """
    base = lagrangian_samples(path, params)
    alt = (_free_lagrangian(path, params)
           + 2.0 * np.real(eta_param * _interaction_term(path)))
    return np.abs(base - alt)


def action_equivalence_check(path: SlicedPath, params: ModeParams,
                             eta_param: complex) -> float:
    """Max pointwise gap between the two interaction conventions on a path."""
    return float(np.max(lagrangian_difference(path, params, eta_param)))


@dataclass(frozen=True)
class StationaryPropagatorResult:
    """Slice product along a classically integrated path.

    ``endpoint`` is where the integrated path actually arrived; callers
    compare it with the endpoint they asked for, since the launched path
    is not steered toward ``alpha_b``.
    """

    value: complex
    endpoint: Triple
    requested_endpoint: Triple

    @property
    def endpoint_gap(self) -> float:
        return float(max(abs(a - b) for a, b in
                         zip(self.endpoint, self.requested_endpoint)))


def stationary_propagator(alpha_a: Triple, alpha_b: Triple, t: float,
                          params: ModeParams, n_slices: int) -> StationaryPropagatorResult:
    """Slice product evaluated on the RK4 classical path launched at ``alpha_a``.

    This exercises the stationary-path skeleton of the functional integral
    only: no fluctuation (Gaussian prefactor) integral is performed, so for
    weak coupling the value approximates the exact propagator between
    ``alpha_a`` and the achieved endpoint up to a prefactor near one.
    """
    if n_slices < 1:
        raise ValueError(f"n_slices must be >= 1, got {n_slices}")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t == 0.0:
        return StationaryPropagatorResult(
            value=1.0 + 0.0j, endpoint=tuple(alpha_a),
            requested_endpoint=tuple(alpha_b),
        )
    dt = t / n_slices
    traj = integrate_rk4(MeanFieldState(*alpha_a), params, t_final=t, dt=dt)
    path = path_from_trajectory(traj)
    value = product_propagator(path, params)
    achieved = traj.samples[-1].as_tuple()
    return StationaryPropagatorResult(value=value, endpoint=achieved,
                                      requested_endpoint=tuple(alpha_b))
