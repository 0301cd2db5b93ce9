"""Coupling-strength distributions, inhomogeneous averaging and detuning scans."""
from __future__ import annotations

import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .correlation import StaticModel
from .errors import SolverError
from .floquet import DEFAULT_N_B, DEFAULT_TOL
from .hilbert import SystemParams

log = logging.getLogger(__name__)

#: Transverse half-width of the atomic beam in units of the mode waist.
MASK_HALF_WIDTH = {"masked": 0.5, "unmasked": 2.0}


class IntegrandError(SolverError):
    def __init__(self, g, cause):
        super().__init__(f"integrand failed at g={g:.6g}: {cause}")
        self.g = g


@dataclass(frozen=True)
class CouplingDensity:
    """Tabulated P(g) on [f_cut * g_max, g_max] and the quadrature used to average over it.

    ``edges``/``values`` hold the histogram (empty for a point mass);
    ``nodes``/``weights`` is the quadrature, with weights summing to one.
    """

    g_max: float
    f_cut: float
    edges: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    geometry: str = "custom"

    @property
    def quadrature_nodes(self):
        return list(zip(self.nodes.tolist(), self.weights.tolist()))

    @property
    def is_point_mass(self) -> bool:
        return self.nodes.size == 1

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    def normalization(self) -> float:
        return float(self.weights.sum())

    def histogram_mass(self, lo: float, hi: float) -> float:
        """Probability of lo <= g <= hi under the tabulated histogram."""
        return float(np.interp(hi, self.edges, self._cdf()) - np.interp(lo, self.edges, self._cdf()))

    def _cdf(self):
        return np.concatenate([[0.0], np.cumsum(self.values * np.diff(self.edges))])


def point_mass(g0: float) -> CouplingDensity:
    """P(g) = delta(g - g0): averaging reduces to a single evaluation."""
    return CouplingDensity(g_max=g0, f_cut=1.0, edges=np.array([]), values=np.array([]),
                           nodes=np.array([float(g0)]), weights=np.array([1.0]), geometry="point")


def density_from_histogram(edges, values, n_nodes: int = 32, geometry: str = "custom") -> CouplingDensity:
    """Normalize a histogram and lay Gauss-Legendre nodes over its support.

    Each node carries the histogram mass of the cell between the midpoints to
    its neighbours, so the weights integrate the histogram exactly.
    """
    edges = np.asarray(edges, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(values < 0):
        raise ValueError("density must be non-negative")
    mass = float(np.sum(values * np.diff(edges)))
    if mass <= 0:
        raise ValueError("density has no mass on its support")
    values = values / mass
    lo, hi = edges[0], edges[-1]
    x, _ = np.polynomial.legendre.leggauss(n_nodes)
    nodes = lo + 0.5 * (x + 1.0) * (hi - lo)
    bounds = np.concatenate([[lo], 0.5 * (nodes[1:] + nodes[:-1]), [hi]])
    cdf = np.concatenate([[0.0], np.cumsum(values * np.diff(edges))])
    weights = np.diff(np.interp(bounds, edges, cdf))
    weights = weights / weights.sum()
    return CouplingDensity(g_max=float(hi), f_cut=float(lo / hi), edges=edges, values=values,
                           nodes=nodes, weights=weights, geometry=geometry)


def draw_couplings(geometry: str, g_max: float, samples: int, seed: int,
                   mask_half_width: float | None = None) -> np.ndarray:
    """Couplings of atoms at random positions in a standing-wave TEM00 mode.

    g = g_max * exp(-x^2 / w0^2) * |cos(2 pi z / lambda)| with z uniform over
    half a wavelength and x uniform over the beam (mask) half-width.
    """
    if mask_half_width is None:
        if geometry not in MASK_HALF_WIDTH:
            raise ValueError(f"unknown beam geometry {geometry!r}")
        mask_half_width = MASK_HALF_WIDTH[geometry]
    rng = np.random.Generator(np.random.Philox(seed))
    x = rng.uniform(-mask_half_width, mask_half_width, samples)
    phase = rng.uniform(0.0, np.pi, samples)
    return g_max * np.exp(-x**2) * np.abs(np.cos(phase))


def sample_coupling_distribution(geometry: str = "masked", g_max: float = 10.0, f_cut: float = 0.1,
                                 samples: int = 10**6, seed: int = 0, bins: int = 90,
                                 n_nodes: int = 32, mask_half_width: float | None = None) -> CouplingDensity:
    """Monte Carlo histogram of P(g) above the cut-off f_cut * g_max."""
    if not 0 < f_cut < 1:
        raise ValueError(f"f_cut must lie in (0, 1), got {f_cut!r}")
    if samples < 10**4:
        raise ValueError("need at least 10^4 samples")
    g = draw_couplings(geometry, g_max, samples, seed, mask_half_width)
    g = g[g >= f_cut * g_max]
    if g.size == 0:
        raise ValueError(f"no couplings above the cut-off f_cut={f_cut}")
    counts, edges = np.histogram(g, bins=bins, range=(f_cut * g_max, g_max))
    return density_from_histogram(edges, counts / (g.size * np.diff(edges)), n_nodes, geometry)


def average_over_g(quantity, density: CouplingDensity):
    """Quadrature average of ``quantity(g)`` (scalar or array valued)."""
    total = 0.0
    for g, w in zip(density.nodes, density.weights):
        try:
            value = quantity(float(g))
        except Exception as exc:
            raise IntegrandError(float(g), exc) from exc
        total = total + w * np.asarray(value)
    return total if np.ndim(total) else float(total)


def write_density(density: CouplingDensity, stream) -> None:
    """Two columns: g/kappa at bin centres and kappa * P(g)."""
    stream.write("g_over_kappa,kappa_P\n")
    for g, p in zip(density.centers, density.values):
        stream.write(f"{float(g)!r},{float(p)!r}\n")


def read_density(stream, n_nodes: int = 32) -> CouplingDensity:
    data = np.loadtxt(stream, delimiter=",", comments="#", skiprows=1, ndmin=2)
    centers, values = data[:, 0], data[:, 1]
    if centers.size < 2:
        raise ValueError("need at least two tabulated points")
    width = np.diff(centers)
    edges = np.concatenate([[centers[0] - width[0] / 2], centers[:-1] + width / 2,
                            [centers[-1] + width[-1] / 2]])
    return density_from_histogram(edges, values, n_nodes)


@dataclass(frozen=True)
class Spectrum:
    delta_tilde: np.ndarray
    value_con: np.ndarray
    value_unc: np.ndarray
    params: SystemParams | None = None
    tau_w: float | None = None
    failures: tuple = ()
    clamped: int = 0

    @property
    def points(self):
        return list(zip(self.delta_tilde.tolist(), self.value_con.tolist(), self.value_unc.tolist()))

    def local_maxima(self, which: str = "con") -> np.ndarray:
        v = self.value_con if which == "con" else self.value_unc
        idx = np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] > v[2:])) + 1
        return self.delta_tilde[idx]

    def write_csv(self, stream) -> None:
        stream.write("delta_tilde,delta_con,delta_unc\n")
        for d, c, u in self.points:
            stream.write(f"{d!r},{c!r},{u!r}\n")

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def read_spectrum(stream) -> Spectrum:
    data = np.loadtxt(stream, delimiter=",", comments="#", skiprows=1, ndmin=2)
    return Spectrum(data[:, 0], data[:, 1], data[:, 2])


def _parallel_map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def spectrum_scan(params: SystemParams, density: CouplingDensity, delta_tilde_grid, tau_w: float,
                  n_b: int = DEFAULT_N_B, tol: float = DEFAULT_TOL, workers: int = 1) -> Spectrum:
    """Ensemble-averaged conditional and unconditional 2PCR vs normalized detuning.

    ``params.detuning1`` is the locked selection g_f; each grid value sets
    delta = g_f (1 + delta_tilde). Failed points are recorded and skipped.
    """
    grid = np.unique(np.asarray(delta_tilde_grid, dtype=float))
    if grid.size == 0:
        raise ValueError("detuning grid is empty")
    models = _parallel_map(lambda g: StaticModel(replace(params, g=float(g))), density.nodes, workers)

    def evaluate(dt):
        delta = params.detuning1 * (1.0 + dt)
        con = unc = 0.0
        for model, w in zip(models, density.weights):
            try:
                coeffs, _ = model.peak(delta, n_b, tol)
                con += w * coeffs.conditional(tau_w)
                unc += w * coeffs.unconditional(tau_w)
            except (SolverError, np.linalg.LinAlgError) as exc:
                return IntegrandError(model.params.g, exc)
        return con, unc

    results = _parallel_map(evaluate, grid, workers)
    keep, failures = [], []
    for dt, res in zip(grid, results):
        if isinstance(res, Exception):
            log.warning("spectrum point delta_tilde=%g failed: %s", dt, res)
            failures.append((float(dt), str(res)))
        else:
            keep.append((dt, *res))
    arr = np.array(keep, dtype=float).reshape(-1, 3)
    return Spectrum(arr[:, 0], arr[:, 1], arr[:, 2], params=params, tau_w=tau_w,
                    failures=tuple(failures))


def background_subtract(bichromatic: Spectrum, monochromatic: Spectrum) -> Spectrum:
    """Pointwise bichromatic minus monochromatic 2PCR, clamped at zero."""
    if (bichromatic.delta_tilde.shape != monochromatic.delta_tilde.shape
            or not np.array_equal(bichromatic.delta_tilde, monochromatic.delta_tilde)):
        raise ValueError("spectra are on different detuning grids")
    con = bichromatic.value_con - monochromatic.value_con
    unc = bichromatic.value_unc - monochromatic.value_unc
    clamped = int(np.sum(con < 0) + np.sum(unc < 0))
    return Spectrum(bichromatic.delta_tilde.copy(), np.maximum(con, 0.0), np.maximum(unc, 0.0),
                    params=bichromatic.params, tau_w=bichromatic.tau_w,
                    failures=bichromatic.failures + monochromatic.failures, clamped=clamped)
