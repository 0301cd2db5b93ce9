"""Long-time state of the bichromatically driven system.

The periodic long-time density matrix is expanded in harmonics of the beat
frequency, rho(t) = sum_N rho_N exp(i N delta t), N in [-n_b, n_b]. Matching
harmonics in the master equation gives the three-term recurrence

    (L - i N delta) rho_N + S_up rho_{N+1} + S_down rho_{N-1} = 0,

which is eliminated with matrix continued fractions. A fixed-step RK4
integrator of the full time-dependent equation serves as an oracle.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import HarmonicTruncationError, IntegrationError, SingularSteadyStateError, SolverError
from .hilbert import OperatorSet, SystemParams, build_operator_set
from .liouville import (
    MAX_CONDITION,
    build_sideband_superops,
    build_static_liouvillian,
    devectorize,
    trace_row,
    vectorize,
)

log = logging.getLogger(__name__)

DEFAULT_N_B = 3
DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class BlochHierarchy:
    n_harmonics: int
    delta: float
    components: dict = field(repr=False)
    residual: float = 0.0
    max_condition: float = 0.0

    @property
    def dim(self) -> int:
        return self.components[0].shape[0]

    def __getitem__(self, n: int) -> np.ndarray:
        if abs(n) > self.n_harmonics:
            return np.zeros_like(self.components[0])
        return self.components[n]

    def at(self, t: float) -> np.ndarray:
        """Density matrix at time ``t`` on the periodic orbit."""
        return sum(rho * np.exp(1j * n * self.delta * t) for n, rho in self.components.items())

    def hermiticity_error(self) -> float:
        return max(np.abs(self.components[-n] - self.components[n].conj().T).max()
                   for n in range(self.n_harmonics + 1))


def _checked_inverse(m: np.ndarray, what: str) -> tuple[np.ndarray, float]:
    """Inverse and 1-norm condition number; singular blocks are reported."""
    try:
        inv = np.linalg.inv(m)
    except np.linalg.LinAlgError:
        raise SingularSteadyStateError(f"{what} is exactly singular") from None
    cond = np.abs(m).sum(axis=0).max() * np.abs(inv).sum(axis=0).max()
    log.debug("condition number of %s: %.3g", what, cond)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularSteadyStateError(f"{what} is singular (condition number {cond:.3g})")
    return inv, cond


def _solve_hierarchy(static, s_up, s_down, delta, n_b):
    size = static.shape[0]
    dim = int(round(np.sqrt(size)))
    eye = np.eye(size)

    def block(n):
        return static - 1j * n * delta * eye

    worst = 0.0
    up = {n_b + 1: np.zeros_like(static)}
    for n in range(n_b, 0, -1):
        inv, cond = _checked_inverse(block(n) + s_up @ up[n + 1], f"continued-fraction block N={n}")
        up[n] = -inv @ s_down
        worst = max(worst, cond)
    down = {-n_b - 1: np.zeros_like(static)}
    for n in range(-n_b, 0):
        inv, cond = _checked_inverse(block(n) + s_down @ down[n - 1], f"continued-fraction block N={n}")
        down[n] = -inv @ s_up
        worst = max(worst, cond)

    central = block(0) + s_up @ up[1] + s_down @ down[-1]
    central[0, :] = trace_row(dim)
    inv, cond = _checked_inverse(central, "central steady-state system")
    worst = max(worst, cond)

    vecs = {0: inv[:, 0]}
    for n in range(1, n_b + 1):
        vecs[n] = up[n] @ vecs[n - 1]
        vecs[-n] = down[-n] @ vecs[-n + 1]

    zero = np.zeros(size, dtype=complex)
    residual = 0.0
    for n in range(-n_b, n_b + 1):
        r = block(n) @ vecs[n] + s_up @ vecs.get(n + 1, zero) + s_down @ vecs.get(n - 1, zero)
        residual = max(residual, float(np.abs(r).max()))
    comps = {n: devectorize(v, dim) for n, v in sorted(vecs.items())}
    return comps, residual, worst


def solve_bloch_steady_state(static: np.ndarray, s_up: np.ndarray, s_down: np.ndarray,
                             delta: float, n_b: int = DEFAULT_N_B, tol: float = DEFAULT_TOL,
                             check_convergence: bool = False) -> BlochHierarchy:
    """Harmonic components of the long-time state by matrix continued fractions.

    Raises ``SingularSteadyStateError`` when a block or the central system is
    singular, ``HarmonicTruncationError`` when ``check_convergence`` is set and
    doubling ``n_b`` moves any component by more than ``tol``, and
    ``SolverError`` if any recurrence residual exceeds ``tol``.
    """
    if n_b < 1 or int(n_b) != n_b:
        raise ValueError(f"n_b must be a positive integer, got {n_b!r}")
    if delta == 0:
        raise ValueError("beat frequency delta must be non-zero")
    comps, residual, cond = _solve_hierarchy(static, s_up, s_down, delta, int(n_b))
    if residual > tol:
        raise SolverError(f"hierarchy residual {residual:.3g} exceeds tol {tol:.3g}")
    if check_convergence:
        doubled, _, _ = _solve_hierarchy(static, s_up, s_down, delta, 2 * int(n_b))
        change = max(float(np.abs(doubled[n] - comps[n]).max()) for n in comps)
        if change > tol:
            raise HarmonicTruncationError(
                f"doubling n_b from {n_b} changed the harmonics by {change:.3g} > {tol:.3g}")
    return BlochHierarchy(n_harmonics=int(n_b), delta=delta, components=comps,
                          residual=residual, max_condition=cond)


def solve_params(params: SystemParams, n_b: int = DEFAULT_N_B, tol: float = DEFAULT_TOL,
                 ops: OperatorSet | None = None, check_convergence: bool = False) -> BlochHierarchy:
    ops = ops or build_operator_set(params.n_max)
    static = build_static_liouvillian(params, ops)
    s_up, s_down = build_sideband_superops(params, ops)
    return solve_bloch_steady_state(static, s_up, s_down, params.delta, n_b, tol, check_convergence)


def dc_component(h: BlochHierarchy) -> np.ndarray:
    return h.components[0]


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray = field(repr=False)


def propagate(static, s_up, s_down, delta, v0, t0, t_end, dt, sample_every=1, trace_tol=1e-9):
    """RK4 for dv/dt = [static + s_up e^{-i delta t} + s_down e^{i delta t}] v.

    The step is shortened if needed so that the grid lands exactly on ``t_end``.
    Returns sample times and vectorized states.
    """
    if dt <= 0 or t_end <= t0:
        raise ValueError("need dt > 0 and t_end > t0")
    n_steps = int(np.ceil((t_end - t0) / dt - 1e-9))
    h = (t_end - t0) / n_steps
    dim = int(round(np.sqrt(static.shape[0])))
    tr = trace_row(dim)
    tr0 = tr @ v0
    scale = max(1.0, abs(tr0))

    def rhs(t, v):
        out = static @ v
        if delta:
            out += np.exp(-1j * delta * t) * (s_up @ v) + np.exp(1j * delta * t) * (s_down @ v)
        return out

    v = np.array(v0, dtype=complex)
    times, samples = [t0], [v.copy()]
    for k in range(1, n_steps + 1):
        t = t0 + (k - 1) * h
        k1 = rhs(t, v)
        k2 = rhs(t + 0.5 * h, v + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, v + 0.5 * h * k2)
        k4 = rhs(t + h, v + h * k3)
        v = v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if k % sample_every == 0 or k == n_steps:
            drift = abs(tr @ v - tr0)
            if not np.all(np.isfinite(v)) or drift > trace_tol * scale:
                raise IntegrationError(f"trace drift {drift:.3g} at t={t + h:.4g}; reduce dt")
            times.append(t0 + k * h)
            samples.append(v.copy())
    return np.array(times), np.array(samples)


def integrate_master_equation(params: SystemParams, rho0: np.ndarray, t_end: float, dt: float,
                              sample_every: int = 1, ops: OperatorSet | None = None) -> Trajectory:
    """Brute-force fourth-order integration of the full time-dependent master equation."""
    ops = ops or build_operator_set(params.n_max)
    static = build_static_liouvillian(params, ops)
    s_up, s_down = build_sideband_superops(params, ops)
    times, vecs = propagate(static, s_up, s_down, params.delta, vectorize(rho0), 0.0,
                            t_end, dt, sample_every)
    states = np.array([devectorize(v, ops.dim) for v in vecs])
    return Trajectory(times=times, states=states)


def fourier_components(times: np.ndarray, states: np.ndarray, delta: float, orders) -> dict:
    """Harmonic content of samples spanning exactly one beat period.

    ``times`` must be uniform with the endpoint of the period included; the
    endpoint is dropped so the rectangle rule is exact for periodic data.
    """
    t = times[:-1]
    s = states[:-1]
    return {n: np.tensordot(np.exp(-1j * n * delta * t), s, axes=(0, 0)) / len(t) for n in orders}
