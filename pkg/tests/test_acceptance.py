"""Acceptance criteria, one test each.

Every test records the quantities it measured; the session summary prints a
PASS/FAIL line per criterion. Tolerances are the stated ones.
"""
import time

import numpy as np
import pytest
from scipy import integrate

from twophoton.cli import main
from twophoton.correlation import StaticModel, moments
from twophoton.ensemble import background_subtract, point_mass, spectrum_scan
from twophoton.floquet import propagate, solve_bloch_steady_state
from twophoton.hilbert import (
    PEAK_DELTA_TILDE,
    SystemParams,
    basis_index,
    build_operator_set,
    dressed_energy,
    dressed_state,
    fock_projector,
    jc_hamiltonian,
)
from twophoton.liouville import (
    build_sideband_superops,
    build_static_liouvillian,
    devectorize,
    full_generator,
    steady_state,
    trace_row,
    vectorize,
)
from twophoton.optimize import GAMMA_GRID, optimal_window, regression_fit


@pytest.fixture
def criterion(record_property):
    """Tag the test with its criterion and collect measurements for the summary."""
    measured = {}

    def start(label):
        record_property("criterion", label)

        def note(**values):
            measured.update(values)
            text = ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                             for k, v in measured.items())
            record_property("measured", text)
            return text
        return note

    return start


def _rel(a, b):
    return abs(a - b) / abs(b)


def test_dressed_ladder_exactness(criterion):
    note = criterion("1 dressed-ladder exactness")
    t0 = time.perf_counter()
    p = SystemParams(g=9.0, detuning1=9.0, n_max=5)
    worst_split = worst_residual = 0.0
    for frame in ("rotating", "lab"):
        h = jc_hamiltonian(p, frame)
        for n in range(1, 6):
            idx = [basis_index(n - 1, 1), basis_index(n, 0)]
            lo, hi = np.linalg.eigvalsh(h[np.ix_(idx, idx)])
            worst_split = max(worst_split, abs((hi - lo) - 2 * np.sqrt(n) * p.g))
            for branch in "+-":
                v = dressed_state(n, branch, p.n_max)
                e = dressed_energy(n, branch, p) if frame == "rotating" else np.vdot(v, h @ v).real
                worst_residual = max(worst_residual, float(np.linalg.norm(h @ v - e * v)))
    elapsed = time.perf_counter() - t0
    print(note(split_error=worst_split, eigen_residual=worst_residual, seconds=elapsed))
    assert worst_split <= 1e-9
    assert worst_residual <= 1e-10
    assert elapsed < 1.0


def test_generator_correctness(criterion):
    note = criterion("2 generator correctness")
    t0 = time.perf_counter()
    p = SystemParams()
    static = build_static_liouvillian(p)
    s_up, s_down = build_sideband_superops(p)
    tr = trace_row(p.dim)
    rng = np.random.default_rng(2024)
    worst_trace = worst_herm = 0.0
    for t in rng.uniform(0.0, 2 * np.pi / p.delta * 50, size=10):
        gen = full_generator(static, s_up, s_down, p.delta, t)
        worst_trace = max(worst_trace, float(np.abs(tr @ gen).max()))
        m = rng.normal(size=(p.dim, p.dim)) + 1j * rng.normal(size=(p.dim, p.dim))
        rho = (m + m.conj().T) / 2
        out = devectorize(gen @ vectorize(rho))
        worst_herm = max(worst_herm, float(np.abs(out - out.conj().T).max()))
    elapsed = time.perf_counter() - t0
    print(note(trace_error=worst_trace, hermiticity_error=worst_herm, seconds=elapsed))
    assert worst_trace <= 1e-12
    assert worst_herm <= 1e-12
    assert elapsed < 1.0


def test_continued_fraction_matches_time_integration(criterion):
    note = criterion("3 MCF vs RK4 oracle")
    t0 = time.perf_counter()
    p = SystemParams()
    assert p.delta_tilde == pytest.approx(PEAK_DELTA_TILDE)
    ops = build_operator_set(p.n_max)
    static = build_static_liouvillian(p, ops)
    s_up, s_down = build_sideband_superops(p, ops)
    h = solve_bloch_steady_state(static, s_up, s_down, p.delta, n_b=3)
    mean_mcf = moments(h[0], ops).mean_n

    period = 2 * np.pi / p.delta
    steps = 200
    n_periods = int(np.ceil(30.0 / period)) + 1
    times, vecs = propagate(static, s_up, s_down, p.delta, vectorize(fock_projector(0, 0, p.n_max)),
                            0.0, n_periods * period, period / steps)
    last = vecs[-steps - 1:-1]
    assert times[-steps - 1] >= 30.0
    mean_rk4 = float(np.mean((last @ vectorize(ops.number.T.copy())).real))
    err = _rel(mean_mcf, mean_rk4)
    elapsed = time.perf_counter() - t0
    print(note(n_mcf=mean_mcf, n_rk4=mean_rk4, rel_error=err, seconds=elapsed))
    assert err <= 1e-5
    assert elapsed < 60.0


def test_window_limits(criterion):
    note = criterion("4 window-time limits")
    t0 = time.perf_counter()
    p = SystemParams()
    model = StaticModel(p)
    peak, hierarchy = model.peak(p.delta)
    cases = {
        "peak": (peak, moments(hierarchy[0], model.ops)),
        "background": (model.background, moments(steady_state(model.static).reshape(p.dim, p.dim), model.ops)),
    }
    worst_short = worst_long = worst_short_pair = worst_long_pair = 0.0
    for coeffs, m in cases.values():
        for f in (coeffs.conditional, coeffs.unconditional):
            worst_short = max(worst_short, _rel(f(1e-6), m.normal_n2))
            worst_long = max(worst_long, _rel(f(1e3), m.mean_n**2))
        worst_short_pair = max(worst_short_pair, _rel(coeffs.unconditional(1e-6), coeffs.conditional(1e-6)))
        worst_long_pair = max(worst_long_pair, _rel(coeffs.unconditional(1e3), coeffs.conditional(1e3)))
    elapsed = time.perf_counter() - t0
    print(note(short_vs_n2=worst_short, long_vs_mean_sq=worst_long, pair_short=worst_short_pair,
               pair_long=worst_long_pair, seconds=elapsed))
    assert worst_short <= 1e-4
    assert worst_long <= 1e-2
    assert worst_short_pair <= 1e-3
    assert worst_long_pair <= 1e-3
    assert elapsed < 10.0


def test_closed_forms_and_background_monotonicity(criterion):
    note = criterion("5 closed forms vs quadrature")
    t0 = time.perf_counter()
    p = SystemParams()
    model = StaticModel(p)
    peak, _ = model.peak(p.delta)
    worst = 0.0
    for coeffs in (model.background, peak):
        for tau in (0.01, 0.1, 1.0, 10.0):
            con = integrate.quad(coeffs.g2, 0, tau, epsabs=0, epsrel=1e-12, limit=200)[0] / tau
            unc = 2 * integrate.quad(lambda w: (tau - w) * coeffs.g2(w), 0, tau,
                                     epsabs=0, epsrel=1e-12, limit=200)[0] / tau**2
            worst = max(worst, _rel(coeffs.conditional(tau), con), _rel(coeffs.unconditional(tau), unc))
    grid = np.geomspace(0.005, 2.0, 50)
    background = model.background.conditional(grid)
    steps = np.diff(background)
    elapsed = time.perf_counter() - t0
    print(note(quadrature_rel_error=worst, decreasing_steps=int(np.sum(steps <= 0)),
               first_decrease_at=float(grid[np.argmax(steps <= 0)]), seconds=elapsed))
    assert worst <= 1e-8
    assert np.all(steps > 0), "background conditional rate is not monotone in the window time"
    assert elapsed < 10.0


def test_peak_location(criterion):
    note = criterion("6 peak location")
    t0 = time.perf_counter()
    p = SystemParams(g=9.0, detuning1=9.0, gamma=2.0)
    grid = np.round(np.arange(0.0, 6.0 + 1e-9, 0.02), 12)
    scan = spectrum_scan(p, point_mass(9.0), grid, tau_w=0.1)
    maxima = scan.local_maxima("con")
    nearest = float(maxima[np.argmin(np.abs(maxima - PEAK_DELTA_TILDE))])
    far = scan.value_con[(scan.delta_tilde >= 4.0) & (scan.delta_tilde <= 6.0)]
    variation = float(np.ptp(far) / far.mean())
    elapsed = time.perf_counter() - t0
    print(note(peak_at=nearest, far_variation=variation, seconds=elapsed))
    assert not scan.failures
    assert abs(nearest - PEAK_DELTA_TILDE) <= 0.05
    assert variation < 0.05
    assert elapsed < 300.0


@pytest.fixture(scope="module")
def ensemble_optimum(masked_density):
    return optimal_window(SystemParams(), masked_density)


def test_optimal_window_trends(criterion, ensemble_optimum):
    note = criterion("7 optimal-window trends")
    t0 = time.perf_counter()
    con, unc = ensemble_optimum["con"], ensemble_optimum["unc"]
    elapsed = time.perf_counter() - t0
    print(note(tau_opt_con=con.tau_opt, tau_opt_unc=unc.tau_opt, pvr_con=con.pvr, pvr_unc=unc.pvr,
               methods=f"{con.method}/{unc.method}"))
    assert 0.05 <= con.tau_opt <= 0.2
    assert 0.07 <= unc.tau_opt <= 0.25
    assert unc.tau_opt > con.tau_opt
    assert elapsed < 1800.0


def test_gamma_linearity(criterion, masked_density):
    note = criterion("8 gamma linearity")
    t0 = time.perf_counter()
    base = SystemParams()
    pts = {"con": [], "unc": []}
    for gamma in GAMMA_GRID:
        opt = optimal_window(base.with_(gamma=gamma), masked_density)
        for which in pts:
            pts[which].append((gamma, opt[which].tau_opt))
    fits = {which: regression_fit(v) for which, v in pts.items()}
    elapsed = time.perf_counter() - t0
    print(note(slope_con=fits["con"].slope, r_con=fits["con"].correlation,
               slope_unc=fits["unc"].slope, r_unc=fits["unc"].correlation, seconds=elapsed))
    for fit in fits.values():
        assert abs(fit.correlation) > 0.95
        assert fit.slope < 0
    assert elapsed < 7200.0


def test_background_subtraction_keeps_peak(criterion, masked_density):
    note = criterion("9 background subtraction")
    t0 = time.perf_counter()
    p = SystemParams()
    grid = np.round(np.arange(0.0, 6.0 + 1e-9, 0.05), 12)
    bi = spectrum_scan(p, masked_density, grid, 0.1)
    mono = spectrum_scan(p.with_(e2=0.0), masked_density, grid, 0.1)
    sub = background_subtract(bi, mono)

    def nearest_peak(scan):
        m = scan.local_maxima("con")
        return float(m[np.argmin(np.abs(m - PEAK_DELTA_TILDE))])

    raw, clean = nearest_peak(bi), nearest_peak(sub)
    elapsed = time.perf_counter() - t0
    # inhomogeneous broadening pulls the averaged maximum below 1 + sqrt(2); the
    # offset is reported, the bar is agreement between the two pipelines
    print(note(peak_raw=raw, peak_subtracted=clean, offset=raw - PEAK_DELTA_TILDE,
               clamped=sub.clamped, seconds=elapsed))
    assert raw == clean
    assert elapsed < 600.0


_CLI_CONFIGS = {
    "distribution": "samples = 50000\nseed = 11\n",
    "spectrum": "samples = 20000\nnodes = 4\nbins = 20\ndelta_tilde_min = 2\ndelta_tilde_max = 3\n"
                "delta_tilde_step = 0.1\nbackground_subtract = true\n",
    "pvr-surface": "g_grid_min = 7\ng_grid_max = 9\ng_grid_step = 1\ntau_w_count = 8\n",
    "opt-window": "g_grid_min = 8\ng_grid_max = 10\ng_grid_step = 1\n",
    "regression": "samples = 20000\nnodes = 4\nbins = 20\n",
}


def test_cli_determinism(criterion, tmp_path):
    note = criterion("10 CLI determinism")
    identical = []
    for sub, text in _CLI_CONFIGS.items():
        cfg = tmp_path / f"{sub}.cfg"
        cfg.write_text(text)
        outputs = []
        for run in ("a", "b"):
            out = tmp_path / run / sub
            assert main([sub, "--config", str(cfg), "--out", str(out), "--seed", "11"]) == 0
            outputs.append(((out / f"{sub}.csv").read_bytes(), (out / f"{sub}.json").read_bytes()))
        identical.append(outputs[0] == outputs[1])
    print(note(identical=f"{sum(identical)}/{len(identical)}"))
    assert all(identical)
