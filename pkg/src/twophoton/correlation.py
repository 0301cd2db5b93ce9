"""Two-time photon-number correlation and windowed two-photon count rates.

G2(t) = <:n(0) n(t):> is computed by quantum regression: the conditioned
operator X0 = a rho a^dag is propagated with a time-independent generator and
projected on the number operator. Diagonalizing the generator turns G2 into

    G2(t) = c0 + sum_n c_n exp(-lambda_n t),

so the conditional and unconditional window averages have closed forms.
G2 is used unnormalized: the photon-flux factor 2*kappa and detector
efficiency are uniform scalings that cancel in peak-to-valley ratios.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import SpectralExpansionError
from .floquet import DEFAULT_N_B, DEFAULT_TOL, BlochHierarchy, propagate, solve_bloch_steady_state
from .hilbert import OperatorSet, SystemParams, build_operator_set
from .liouville import (
    build_sideband_superops,
    build_static_liouvillian,
    steady_state,
    vectorize,
)

RESIDUAL_FALLBACK = 1e-6
_SERIES_CUTOFF = 0.1
_SERIES_TERMS = 12
_RESIDUAL_GRID = np.linspace(0.0, 5.0, 51)


@dataclass(frozen=True)
class Moments:
    mean_n: float
    normal_n2: float


def moments(rho: np.ndarray, ops: OperatorSet | None = None, tol: float = 1e-10) -> Moments:
    """<n> and <:n^2:> = <a^dag a^dag a a> of a density matrix."""
    rho = np.asarray(rho)
    if ops is None:
        ops = build_operator_set(rho.shape[0] // 2 - 1)
    if np.abs(rho - rho.conj().T).max() > tol:
        raise ValueError("density matrix is not Hermitian")
    mean = np.trace(ops.number @ rho)
    n2 = np.trace(ops.a_dag @ ops.a_dag @ ops.a @ ops.a @ rho)
    if max(abs(mean.imag), abs(n2.imag)) > tol:
        raise ValueError("photon-number moments have an imaginary part")
    return Moments(float(mean.real), float(n2.real))


def _conditional_kernel(mu):
    """(1 - exp(-mu)) / mu, with the mu -> 0 limit handled by series."""
    mu = np.asarray(mu, dtype=complex)
    out = np.empty_like(mu)
    small = np.abs(mu) < _SERIES_CUTOFF
    big = ~small
    out[big] = -np.expm1(-mu[big]) / mu[big]
    acc = np.zeros(small.sum(), dtype=complex)
    term = np.ones_like(acc)
    for k in range(_SERIES_TERMS):
        acc += term
        term = term * (-mu[small]) / (k + 2)
    out[small] = acc
    return out


def _unconditional_kernel(mu):
    """(2 / mu) * ((exp(-mu) - 1) / mu + 1) = 2 sum_j (-mu)^j / (j + 2)!."""
    mu = np.asarray(mu, dtype=complex)
    out = np.empty_like(mu)
    small = np.abs(mu) < _SERIES_CUTOFF
    big = ~small
    m = mu[big]
    out[big] = 2.0 / m * (np.expm1(-m) / m + 1.0)
    acc = np.zeros(small.sum(), dtype=complex)
    term = np.ones_like(acc)
    for j in range(_SERIES_TERMS):
        acc += term
        term = term * (-mu[small]) / (j + 3)
    out[small] = acc
    return out


@dataclass(frozen=True)
class G2Coefficients:
    """Exponential-sum representation of G2(t)."""

    c0: float
    c: np.ndarray = field(repr=False)
    lam: np.ndarray = field(repr=False)
    reconstruction_residual: float = 0.0

    @property
    def terms(self):
        return list(zip(self.c, self.lam))

    @property
    def g2_zero(self) -> float:
        return float(self.c0 + self.c.sum().real)

    def scaled(self, factor: float) -> "G2Coefficients":
        return G2Coefficients(self.c0 * factor, self.c * factor, self.lam, self.reconstruction_residual)

    def g2(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("correlation delay must be non-negative")
        vals = self.c0 + (np.exp(-np.multiply.outer(t, self.lam)) @ self.c).real
        return vals if vals.ndim else float(vals)

    def conditional(self, tau_w):
        tau = _check_window(tau_w)
        mu = np.multiply.outer(tau, self.lam)
        vals = self.c0 + (_conditional_kernel(mu) @ self.c).real
        return vals if vals.ndim else float(vals)

    def unconditional(self, tau_w):
        tau = _check_window(tau_w)
        mu = np.multiply.outer(tau, self.lam)
        vals = self.c0 + (_unconditional_kernel(mu) @ self.c).real
        return vals if vals.ndim else float(vals)


@dataclass(frozen=True)
class DirectG2:
    """G2 by direct matrix-exponential propagation.

    Used when the generator's eigenbasis is too ill-conditioned for the
    exponential sum. Window integrals are computed with augmented
    exponentials, which integrate the propagator exactly.
    """

    generator: np.ndarray = field(repr=False)
    x0: np.ndarray = field(repr=False)
    readout: np.ndarray = field(repr=False)

    @property
    def g2_zero(self) -> float:
        return float((self.readout @ self.x0).real)

    def g2(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("correlation delay must be non-negative")
        vals = np.array([(self.readout @ expm(self.generator * s) @ self.x0).real for s in t.ravel()])
        return vals.reshape(t.shape) if t.ndim else float(vals[0])

    def _augmented(self, tau, order):
        n = self.generator.shape[0]
        m = np.zeros((n + order, n + order), dtype=complex)
        m[:n, :n] = self.generator
        m[:n, n] = self.x0
        for k in range(1, order):
            m[n + k - 1, n + k] = 1.0
        return expm(m * tau)[:n, n + order - 1]

    def conditional(self, tau_w):
        tau = _check_window(tau_w)
        vals = np.array([(self.readout @ self._augmented(s, 1)).real / s for s in tau.ravel()])
        return vals.reshape(tau.shape) if tau.ndim else float(vals[0])

    def unconditional(self, tau_w):
        tau = _check_window(tau_w)
        vals = np.array([2.0 * (self.readout @ self._augmented(s, 2)).real / s**2 for s in tau.ravel()])
        return vals.reshape(tau.shape) if tau.ndim else float(vals[0])


def _check_window(tau_w):
    tau = np.asarray(tau_w, dtype=float)
    if np.any(tau <= 0):
        raise ValueError("window time must be positive")
    return tau


@dataclass(frozen=True)
class LiouvillianSpectrum:
    """Eigendecomposition of a generator, shared between conditioning states."""

    generator: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    right: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    zero_index: int = 0
    residual_step: np.ndarray = field(default=None, repr=False)

    @classmethod
    def of(cls, generator: np.ndarray) -> "LiouvillianSpectrum":
        evals, right = np.linalg.eig(generator)
        left = np.linalg.inv(right)
        mags = np.abs(evals)
        k0 = int(np.argmin(mags))
        if mags[k0] > 1e-10 * mags.max():
            raise SpectralExpansionError(f"generator has no zero mode (smallest |lambda| = {mags[k0]:.3g})")
        if np.any(evals.real > 1e-10 * mags.max()):
            raise SpectralExpansionError("generator has a growing mode")
        step = expm(generator * (_RESIDUAL_GRID[1] - _RESIDUAL_GRID[0]))
        return cls(generator, evals, right, left, k0, step)


def _readout(ops: OperatorSet) -> np.ndarray:
    # Tr(n X) = vec(n^T) . vec(X)
    return vectorize(ops.number.T.copy())


def eigen_expand_g2(generator: np.ndarray, rho: np.ndarray, ops: OperatorSet | None = None,
                    spectrum: LiouvillianSpectrum | None = None) -> G2Coefficients:
    """Exponential-sum coefficients of G2(t) = Tr[n exp(L t)(a rho a^dag)].

    The reconstruction residual is the largest deviation from direct
    matrix-exponential propagation on t in [0, 5/kappa], relative to max |G2|.
    Raises ``SpectralExpansionError`` above ``RESIDUAL_FALLBACK``.
    """
    if ops is None:
        ops = build_operator_set(rho.shape[0] // 2 - 1)
    spectrum = spectrum or LiouvillianSpectrum.of(generator)
    x0 = vectorize(ops.a @ rho @ ops.a_dag)
    readout = _readout(ops)
    coeffs = (readout @ spectrum.right) * (spectrum.left @ x0)
    lam = -spectrum.eigenvalues
    keep = np.arange(lam.size) != spectrum.zero_index
    c0 = coeffs[spectrum.zero_index]

    direct = np.empty(_RESIDUAL_GRID.size)
    step = spectrum.residual_step
    v = x0.copy()
    for i in range(_RESIDUAL_GRID.size):
        direct[i] = (readout @ v).real
        v = step @ v
    expanded = c0.real + (np.exp(-np.multiply.outer(_RESIDUAL_GRID, lam[keep])) @ coeffs[keep]).real
    scale = max(np.abs(direct).max(), np.finfo(float).tiny)
    residual = float(np.abs(expanded - direct).max() / scale)
    if not np.isfinite(residual) or residual > RESIDUAL_FALLBACK:
        raise SpectralExpansionError(f"eigen-expansion residual {residual:.3g} too large")
    return G2Coefficients(float(c0.real), coeffs[keep], lam[keep], residual)


def expand_or_direct(generator, rho, ops=None, spectrum=None):
    """Exponential sum when it reconstructs G2, otherwise direct propagation."""
    if ops is None:
        ops = build_operator_set(rho.shape[0] // 2 - 1)
    try:
        return eigen_expand_g2(generator, rho, ops, spectrum)
    except (SpectralExpansionError, np.linalg.LinAlgError):
        return DirectG2(generator, vectorize(ops.a @ rho @ ops.a_dag), _readout(ops))


def g2_at(coeffs, t):
    return coeffs.g2(t)


def delta_conditional(coeffs, tau_w):
    """Conditional 2PCR: (1/tau_w) * integral of G2 over [0, tau_w]."""
    return coeffs.conditional(tau_w)


def delta_unconditional(coeffs, tau_w):
    """Unconditional 2PCR: (2/tau_w^2) * integral over 0 < w < u < tau_w of G2(w)."""
    return coeffs.unconditional(tau_w)


def background_coeffs(params: SystemParams, ops: OperatorSet | None = None,
                      spectrum: LiouvillianSpectrum | None = None):
    """Far-detuned background: the scanning drive is dropped altogether."""
    ops = ops or build_operator_set(params.n_max)
    static = build_static_liouvillian(params, ops)
    return expand_or_direct(static, steady_state(static), ops, spectrum or _safe_spectrum(static))


class StaticModel:
    """Per-coupling generator, its spectrum and the background expansion.

    Everything here is independent of the scanning frequency, so one instance
    serves a whole detuning scan.
    """

    def __init__(self, params: SystemParams, ops: OperatorSet | None = None):
        self.params = params
        self.ops = ops or build_operator_set(params.n_max)
        self.static = build_static_liouvillian(params, self.ops)
        self.s_up, self.s_down = build_sideband_superops(params, self.ops)
        self.spectrum = _safe_spectrum(self.static)
        self._background = None

    @property
    def background(self):
        if self._background is None:
            self._background = expand_or_direct(self.static, steady_state(self.static), self.ops,
                                                self.spectrum)
        return self._background

    def solve(self, delta: float, n_b: int = DEFAULT_N_B, tol: float = DEFAULT_TOL) -> BlochHierarchy:
        return solve_bloch_steady_state(self.static, self.s_up, self.s_down, delta, n_b, tol)

    def peak(self, delta: float, n_b: int = DEFAULT_N_B, tol: float = DEFAULT_TOL):
        """On-peak G2 at beat frequency ``delta``, with the hierarchy it came from.

        G2 conditions on the harmonic-averaged state rho_0 and propagates with
        the static generator (sidebands dropped inside the window).
        """
        hierarchy = self.solve(delta, n_b, tol)
        if self.params.e2 == 0:
            return self.background, hierarchy
        return expand_or_direct(self.static, hierarchy.components[0], self.ops, self.spectrum), hierarchy


def _safe_spectrum(static):
    try:
        return LiouvillianSpectrum.of(static)
    except (SpectralExpansionError, np.linalg.LinAlgError):
        return None


@dataclass(frozen=True)
class PointCorrelations:
    """On-peak and background G2 representations for one parameter point."""

    params: SystemParams
    peak: object
    background: object
    hierarchy: BlochHierarchy = field(repr=False)


def point_correlations(params: SystemParams, n_b: int = DEFAULT_N_B, tol: float = DEFAULT_TOL,
                       ops: OperatorSet | None = None) -> PointCorrelations:
    model = StaticModel(params, ops)
    peak, hierarchy = model.peak(params.delta, n_b, tol)
    return PointCorrelations(params, peak, model.background, hierarchy)


def phase_averaged_g2(params: SystemParams, hierarchy: BlochHierarchy, t_max: float,
                      n_samples: int, n_phases: int = 8, steps_per_sample: int = 20,
                      ops: OperatorSet | None = None):
    """G2 from the full time-dependent generator, averaged over drive phase.

    Conditioning times t0 are spread uniformly over one beat period. Returns
    ``(times, g2)`` with ``times = linspace(0, t_max, n_samples + 1)``.
    """
    ops = ops or build_operator_set(params.n_max)
    static = build_static_liouvillian(params, ops)
    s_up, s_down = build_sideband_superops(params, ops)
    readout = _readout(ops)
    period = 2.0 * np.pi / hierarchy.delta
    dt = t_max / (n_samples * steps_per_sample)
    total = np.zeros(n_samples + 1)
    for k in range(n_phases):
        t0 = k * period / n_phases
        x0 = vectorize(ops.a @ hierarchy.at(t0) @ ops.a_dag)
        _, vecs = propagate(static, s_up, s_down, hierarchy.delta, x0, t0, t0 + t_max, dt,
                            sample_every=steps_per_sample)
        total += (vecs @ readout).real
    return np.linspace(0.0, t_max, n_samples + 1), total / n_phases
