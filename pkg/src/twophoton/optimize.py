"""Peak-to-valley ratio of the two-photon count rate and optimal window times."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .correlation import StaticModel
from .ensemble import CouplingDensity, IntegrandError, _parallel_map, point_mass
from .errors import SolverError
from .floquet import DEFAULT_N_B, DEFAULT_TOL
from .hilbert import PEAK_DELTA_TILDE, SystemParams

log = logging.getLogger(__name__)

DEFAULT_BRACKET = (0.005, 2.0)
DEFAULT_WINDOW_TOL = 1e-3
GAMMA_GRID = (0.2, 2.0, 5.0, 7.0, 10.0)
INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class PvrPoint:
    g: float | None
    tau_w: float
    pvr_con: float
    pvr_unc: float


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    correlation: float


@dataclass(frozen=True)
class WindowOptimum:
    tau_opt: float
    pvr: float
    method: str = "golden"
    evaluations: int = 0

    @property
    def flagged(self) -> bool:
        return self.method != "golden"


class PvrModel:
    """Per-node on-peak and background correlations, ready for window sweeps.

    PVR is the ratio of the P(g)-averaged peak 2PCR to the P(g)-averaged
    background 2PCR; the peak sits at the |1>_- <-> |2>_+ resonance.
    """

    def __init__(self, params: SystemParams, density: CouplingDensity | None = None,
                 n_b: int = DEFAULT_N_B, tol: float = DEFAULT_TOL, workers: int = 1):
        density = density if density is not None else point_mass(params.g)
        self.params = params.at_delta_tilde(PEAK_DELTA_TILDE)
        self.density = density

        def build(g):
            try:
                model = StaticModel(replace(self.params, g=float(g)))
                return model.peak(self.params.delta, n_b, tol)[0], model.background
            except (SolverError, np.linalg.LinAlgError) as exc:
                return IntegrandError(float(g), exc)

        built = _parallel_map(build, density.nodes, workers)
        for res in built:
            if isinstance(res, Exception):
                raise res
        self.peaks = [b[0] for b in built]
        self.backgrounds = [b[1] for b in built]

    def _average(self, items, method, tau):
        return sum(w * getattr(c, method)(tau) for w, c in zip(self.density.weights, items))

    def peak(self, tau_w, which="con"):
        return self._average(self.peaks, _METHOD[which], tau_w)

    def background(self, tau_w, which="con"):
        return self._average(self.backgrounds, _METHOD[which], tau_w)

    def ratio(self, tau_w, which="con"):
        den = self.background(tau_w, which)
        if np.any(np.asarray(den) <= 0):
            raise ZeroDivisionError("background 2PCR vanishes")
        return self.peak(tau_w, which) / den

    def point(self, tau_w: float) -> PvrPoint:
        g = float(self.density.nodes[0]) if self.density.is_point_mass else None
        return PvrPoint(g, tau_w, float(self.ratio(tau_w, "con")), float(self.ratio(tau_w, "unc")))


_METHOD = {"con": "conditional", "unc": "unconditional"}


def pvr(params: SystemParams, density: CouplingDensity | None, tau_w: float,
        n_b: int = DEFAULT_N_B, tol: float = DEFAULT_TOL) -> PvrPoint:
    if tau_w <= 0:
        raise ValueError("window time must be positive")
    return PvrModel(params, density, n_b, tol).point(tau_w)


def golden_section_max(f, lo: float, hi: float, tol: float = DEFAULT_WINDOW_TOL, max_iter: int = 200):
    """Maximize a unimodal ``f`` on [lo, hi]; returns (x, f(x), evaluations)."""
    a, b = lo, hi
    x1 = b - INVPHI * (b - a)
    x2 = a + INVPHI * (b - a)
    f1, f2 = f(x1), f(x2)
    evals = 2
    while b - a > tol and evals < max_iter:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INVPHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INVPHI * (b - a)
            f2 = f(x2)
        evals += 1
    x = 0.5 * (a + b)
    return x, f(x), evals + 1


def maximize_window(f, bracket=DEFAULT_BRACKET, tol: float = DEFAULT_WINDOW_TOL,
                    probes: int = 24, grid_points: int = 200) -> WindowOptimum:
    """Locate the window time maximizing ``f`` inside ``bracket``.

    A coarse log-spaced probe looks for an interior sample beating both ends;
    golden-section search then refines between its neighbours. If no interior
    sample wins, a dense grid is scanned and its best point refined locally;
    that result is flagged through ``method`` ("grid", or "boundary" when the
    maximum sits on a bracket end).
    """
    lo, hi = bracket
    if not 0 < lo < hi:
        raise ValueError(f"invalid bracket {bracket!r}")
    coarse = np.geomspace(lo, hi, probes)
    values = np.array([f(t) for t in coarse])
    k = int(np.argmax(values[1:-1])) + 1
    method = "golden"
    if values[k] <= max(values[0], values[-1]):
        coarse = np.geomspace(lo, hi, grid_points)
        values = np.array([f(t) for t in coarse])
        k = int(np.argmax(values))
        method = "grid" if 0 < k < grid_points - 1 else "boundary"
    a, b = coarse[max(k - 1, 0)], coarse[min(k + 1, coarse.size - 1)]
    x, fx, n = golden_section_max(f, a, b, tol)
    if fx < values[k]:
        x, fx = coarse[k], values[k]
    return WindowOptimum(float(x), float(fx), method, n + coarse.size)


def optimal_window(params: SystemParams, density: CouplingDensity | None = None,
                   bracket=DEFAULT_BRACKET, tol: float = DEFAULT_WINDOW_TOL,
                   n_b: int = DEFAULT_N_B, solver_tol: float = DEFAULT_TOL,
                   model: PvrModel | None = None) -> dict:
    """Window time maximizing the PVR, for both 2PCR variants.

    Returns ``{"con": WindowOptimum, "unc": WindowOptimum}``.
    """
    model = model or PvrModel(params, density, n_b, solver_tol)
    return {which: maximize_window(lambda t, w=which: float(model.ratio(t, w)), bracket, tol)
            for which in ("con", "unc")}


@dataclass(frozen=True)
class CurvePoint:
    axis_value: float
    tau_opt_con: float | None
    tau_opt_unc: float | None
    pvr_con: float | None = None
    pvr_unc: float | None = None
    methods: tuple = ()
    error: str | None = field(default=None)


def tau_opt_curve(axis: str, grid, params: SystemParams, density: CouplingDensity | None = None,
                  bracket=DEFAULT_BRACKET, tol: float = DEFAULT_WINDOW_TOL,
                  n_b: int = DEFAULT_N_B, solver_tol: float = DEFAULT_TOL, workers: int = 1):
    """Optimal window times along the coupling (point mass at each g) or loss-rate axis."""
    grid = [float(x) for x in grid]
    if not grid:
        raise ValueError("grid is empty")
    if axis not in ("g", "gamma"):
        raise ValueError(f"axis must be 'g' or 'gamma', got {axis!r}")

    def one(x):
        try:
            if axis == "g":
                opt = optimal_window(replace(params, g=x), point_mass(x), bracket, tol, n_b, solver_tol)
            else:
                opt = optimal_window(replace(params, gamma=x), density, bracket, tol, n_b, solver_tol)
        except (SolverError, ZeroDivisionError, np.linalg.LinAlgError) as exc:
            log.warning("tau_opt at %s=%g failed: %s", axis, x, exc)
            return CurvePoint(x, None, None, error=str(exc))
        return CurvePoint(x, opt["con"].tau_opt, opt["unc"].tau_opt, opt["con"].pvr, opt["unc"].pvr,
                          (opt["con"].method, opt["unc"].method))

    return _parallel_map(one, grid, workers)


def regression_fit(points) -> RegressionFit:
    """Least-squares line through (gamma/kappa, kappa*tau_opt) with Pearson r."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise ValueError("need at least three points")
    if np.ptp(pts[:, 0]) == 0:
        raise ValueError("abscissa values are all equal")
    res = stats.linregress(pts[:, 0], pts[:, 1])
    return RegressionFit(float(res.slope), float(res.intercept), float(res.rvalue))
