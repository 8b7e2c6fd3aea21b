"""Acceptance gate: one test (or test group) per criterion.

The terminal summary prints one PASS/FAIL line per criterion. Measured values
are printed from each test and show up with ``-s`` or in failure output.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from nonlinear_suite import SUITE, newton
from odekit.cli import main
from odekit.estimate import EstimationConfig, Observations, pipeline_cost, pipeline_gradient
from odekit.io import read_json
from odekit.models import CompartmentParams, compartment_model, compartment_rhs, lotka_volterra_model, random_compartment_batch
from odekit.neural_ode import init_mlp, loss_and_gradient, oscillator_data
from odekit.ode_core import IvpProblem, TimeGrid, integrate, make_tableau
from odekit.optimize import AndersonConfig, anderson_accelerate, fixed_point_iterate
from odekit.reaction_diffusion import GrayScottParams, Grid2D, laplacian5, simulate_gray_scott
from odekit.rootfind import RootConfig, broyden1, broyden2
from odekit.sensitivity import finite_difference_gradient

FIXTURES = Path(__file__).parent / "fixtures"
LV_TRUTH = np.array([1.1, 0.4, 0.1, 0.4])


def run_cli(out: Path, experiment: str, config: dict | None = None, *extra: str) -> tuple[int, float]:
    args = [experiment, "--out", str(out), *extra]
    if config is not None:
        cfg = out.parent / f"{out.name}.json"
        cfg.write_text(json.dumps(config))
        args += ["--config", str(cfg)]
    t0 = time.perf_counter()
    rc = main(args)
    return rc, time.perf_counter() - t0


@pytest.fixture(scope="module")
def lv_batch(tmp_path_factory):
    """Canonical seeded LV batch through the CLI: rk38 h=0.01 vs rk4 h=1e-4."""
    out = tmp_path_factory.mktemp("lv") / "batch"
    rc, seconds = run_cli(out, "solve")
    return rc, seconds, read_json(out / "report.json")


# ---------------------------------------------------------------- 1, 2


@pytest.mark.criterion(1, "solver accuracy: seeded 10-model LV batch MSE vs dense reference")
def test_c1_lv_batch_mse(lv_batch):
    rc, seconds, report = lv_batch
    mses = [m["mse"] for m in report["models"]]
    print(f"\n[c1] max MSE {max(mses):.3e}, median {np.median(mses):.3e}, runtime {seconds:.1f}s")
    assert rc == 0 and len(mses) == 10
    assert max(mses) <= 1e-3
    assert np.median(mses) <= 1e-5
    assert seconds <= 120


@pytest.mark.criterion(2, "L1 distance of rk38 h=0.01 LV solves from the dense reference")
def test_c2_lv_l1(tmp_path, lv_batch):
    cfg = {"model": {"name": "lotka_volterra", "params": {"alpha": 1.1, "beta": 0.4, "gamma": 0.1, "delta": 0.4}, "y0": [10, 5]}}
    rc, _ = run_cli(tmp_path / "gt", "solve", cfg)
    gt = read_json(tmp_path / "gt" / "report.json")["models"][0]["l1"]
    batch = np.array([m["l1"] for m in lv_batch[2]["models"]])
    print(f"\n[c2] ground-truth model L1 {gt}, batch max L1 {batch.max(axis=0).tolist()}")
    assert rc == 0
    assert max(gt) <= 0.03
    assert batch.max() <= 0.03


def test_lv_batch_regression(lv_batch):
    # per-model metrics of the seed-42 batch, frozen from a reference run
    frozen = json.loads((FIXTURES / "lv_batch_seed42.json").read_text())
    models = lv_batch[2]["models"]
    for got, want in zip(models, frozen["models"]):
        assert got["params"] == pytest.approx(want["params"], rel=1e-12)
        assert got["y0"] == pytest.approx(want["y0"], rel=1e-12)
        assert got["mse"] == pytest.approx(want["mse"], rel=1e-3, abs=1e-18)
        assert got["l1"] == pytest.approx(want["l1"], rel=1e-3, abs=1e-12)


# ---------------------------------------------------------------- 3


@pytest.mark.slow
@pytest.mark.criterion(3, "LV parameter estimation recovers (1.1, 0.4, 0.1, 0.4) within 0.02")
def test_c3_estimation(tmp_path):
    rc, seconds = run_cli(tmp_path / "est", "estimate")
    r = read_json(tmp_path / "est" / "report.json")
    err = np.abs(np.array(r["theta_hat"]) - LV_TRUTH)
    print(f"\n[c3] theta_hat {r['theta_hat']}, abs error {err.tolist()}, J {r['final_cost']:.3e}, {r['iterations']} iterations, {seconds:.1f}s")
    assert rc == 0
    assert np.all(err <= 0.02)
    assert seconds <= 300


# ---------------------------------------------------------------- 4


@pytest.fixture(scope="module")
def node_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("node") / "run"
    rc, seconds = run_cli(out, "train-node")
    return rc, seconds, read_json(out / "report.json")


@pytest.mark.slow
@pytest.mark.criterion(4, "Neural ODE (32 hidden units) training-window L1 <= 0.05")
def test_c4_neural_ode(node_run):
    rc, seconds, r = node_run
    print(f"\n[c4] hidden {r['hidden']}, train L1 {r['train_l1']:.4f}, final MSE {r['final_loss']:.3e}, {seconds:.1f}s")
    assert rc == 0 and r["hidden"] == 32
    assert r["train_l1"] <= 0.05


@pytest.mark.slow
def test_node_training_reduces_loss_hundredfold(node_run):
    rc, _, r = node_run
    assert rc == 0
    assert r["final_loss"] <= 0.01 * r["initial_loss"]


# ---------------------------------------------------------------- 5


@pytest.mark.criterion(5, "empirical convergence orders on dy/dt = -y")
@pytest.mark.parametrize("method,order,tol", [("euler", 1.0, 0.2), ("rk4", 4.0, 0.3), ("rk38", 4.0, 0.3)])
def test_c5_convergence_order(method, order, tol):
    hs = [0.1, 0.05, 0.025, 0.0125]
    errs = []
    for h in hs:
        n = round(1.0 / h)
        traj = integrate(make_tableau(method), IvpProblem(lambda t, y, th: -y, [1.0], None, TimeGrid(0.0, 1.0, n)))
        errs.append(abs(traj.states[-1, 0] - math.exp(-1.0)))
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    print(f"\n[c5] {method} slope {slope:.3f}")
    assert abs(slope - order) <= tol


# ---------------------------------------------------------------- 6


def _relative_gap(g, fd):
    return float(np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-300))


def _model_points(truth, rng):
    return [truth * rng.uniform(0.8, 1.2, size=truth.size) for _ in range(5)]


@pytest.mark.criterion(6, "sensitivity gradients match central finite differences (rel 1e-4)")
@pytest.mark.parametrize("name", ["lotka_volterra", "compartment3"])
def test_c6_model_gradients(name):
    if name == "lotka_volterra":
        model, truth, y0 = lotka_volterra_model(), LV_TRUTH, np.array([10.0, 5.0])
    else:
        model, truth, y0 = compartment_model(3), np.array([0.2, 0.5, 0.3, 0.4, 0.6]), np.array([10.0, 0.0, 0.0])
    grid = TimeGrid(0.0, 10.0, 1000)
    data = integrate(make_tableau("rk38"), IvpProblem(model.rhs, y0, truth, grid))
    idx = np.arange(20, 1001, 20)
    obs = Observations(data.times[idx], data.states[idx], tuple(range(y0.size)))
    gaps = []
    for theta in _model_points(truth, np.random.default_rng(6)):
        cfg = EstimationConfig(theta0=theta, y0=y0, grid=grid)
        g = pipeline_gradient(model, obs, cfg, theta)
        fd = finite_difference_gradient(lambda th: pipeline_cost(model, obs, cfg, th), theta, eps=1e-6)
        gaps.append(_relative_gap(g, fd))
    print(f"\n[c6] {name} max relative gap {max(gaps):.2e}")
    assert max(gaps) <= 1e-4


@pytest.mark.criterion(6, "sensitivity gradients match central finite differences (rel 1e-4)")
def test_c6_mlp_gradient():
    data = oscillator_data(grid=TimeGrid(0.0, 10.0, 40))
    gaps = []
    for seed in range(5):
        theta = init_mlp(4, seed=seed).flatten()
        _, g = loss_and_gradient(theta, 4, data)
        fd = finite_difference_gradient(lambda th: loss_and_gradient(th, 4, data)[0], theta, eps=1e-6)
        gaps.append(_relative_gap(g, fd))
    print(f"\n[c6] reduced MLP max relative gap {max(gaps):.2e}")
    assert max(gaps) <= 1e-4


# ---------------------------------------------------------------- 7


@pytest.mark.criterion(7, "conservation: closed compartments, periodic Laplacian, uniform Gray-Scott")
@pytest.mark.parametrize("n", [3, 10, 100])
def test_c7_closed_compartment_mass(n):
    params, C0 = random_compartment_batch(n, 10, np.random.default_rng(7))
    closed = CompartmentParams(np.zeros(10), params.k_out, params.k_in)
    traj = integrate(make_tableau("rk38"), IvpProblem(lambda t, y, p: compartment_rhs(p, t, y), C0, closed, TimeGrid(0.0, 100.0, 10000)))
    mass = traj.states.sum(axis=-1)
    drift = float(np.max(np.abs(mass - mass[0]) / mass[0]))
    print(f"\n[c7] n={n} relative mass drift {drift:.2e}")
    assert drift <= 1e-10


@pytest.mark.criterion(7, "conservation: closed compartments, periodic Laplacian, uniform Gray-Scott")
def test_c7_laplacian_sum():
    rng = np.random.default_rng(7)
    worst = max(abs(float(laplacian5(rng.uniform(-1, 1, size=shape)).sum())) for shape in [(3, 3), (17, 5), (100, 100), (64, 128)])
    print(f"\n[c7] max |sum Laplacian| {worst:.2e}")
    assert worst <= 1e-10


@pytest.mark.criterion(7, "conservation: closed compartments, periodic Laplacian, uniform Gray-Scott")
def test_c7_uniform_gray_scott():
    g0 = Grid2D(np.full((100, 100), 0.6), np.full((100, 100), 0.3))
    snaps = simulate_gray_scott(GrayScottParams(), g0, TimeGrid(0.0, 900.0, 900), make_tableau("rk4"), stride=1)
    spread = max(max(np.ptp(g.U), np.ptp(g.V)) for g in snaps)
    print(f"\n[c7] max spatial spread over 900 steps {spread:.2e}")
    assert spread <= 1e-12


# ---------------------------------------------------------------- 8


@pytest.mark.criterion(8, "Broyden methods agree with dense Newton; secant conditions hold")
@pytest.mark.parametrize("name,F,J,x0", SUITE, ids=[s[0] for s in SUITE])
def test_c8_broyden(name, F, J, x0):
    x_star = newton(F, J, x0)
    J0 = J(x0)
    secant1, secant2 = [], []
    r1 = broyden1(F, x0, RootConfig(tol=1e-12, max_iters=200, B0=J0), callback=lambda k, B, s, y: secant1.append(np.linalg.norm(B @ s - y) / max(1.0, np.linalg.norm(y))))
    r2 = broyden2(F, x0, RootConfig(tol=1e-12, max_iters=200, B0=np.linalg.inv(J0)), callback=lambda k, B, s, y: secant2.append(np.linalg.norm(B @ y - s) / max(1.0, np.linalg.norm(s))))
    d1, d2 = np.max(np.abs(r1.x - x_star)), np.max(np.abs(r2.x - x_star))
    s1, s2 = max(secant1, default=0.0), max(secant2, default=0.0)
    print(f"\n[c8] {name}: |b1-newton| {d1:.1e}, |b2-newton| {d2:.1e}, secant {s1:.1e}/{s2:.1e}")
    assert d1 <= 1e-7 and d2 <= 1e-7
    assert s1 <= 1e-10 and s2 <= 1e-10


# ---------------------------------------------------------------- 9


@pytest.mark.criterion(9, "Anderson acceleration reaches the cos fixed point faster than plain iteration")
def test_c9_anderson():
    tol = 1e-12
    res = anderson_accelerate(np.cos, [1.0], AndersonConfig(tol=tol))
    plain = fixed_point_iterate(np.cos, [1.0], tol=tol, max_iters=10_000)
    print(f"\n[c9] Anderson {res.iters} iterations, plain {plain.iters}, x = {res.x[0]:.15f}")
    assert abs(res.x[0] - 0.7390851332151607) <= 1e-10
    assert res.iters < plain.iters


# ---------------------------------------------------------------- 10


def _batch_seconds(n, repeats=5):
    params, C0 = random_compartment_batch(n, 10, np.random.default_rng(42))
    problem = IvpProblem(lambda t, y, p: compartment_rhs(p, t, y), C0, params, TimeGrid(0.0, 100.0, 10000))
    tab = make_tableau("rk38")
    best, traj = math.inf, None
    for _ in range(repeats):
        t0 = time.perf_counter()
        traj = integrate(tab, problem)
        best = min(best, time.perf_counter() - t0)
    return best, traj


@pytest.mark.criterion(10, "100-compartment solve completes; runtime ordering 3 < 10 < 100")
def test_c10_scalability():
    timings = {}
    for n in (3, 10, 100):
        timings[n], traj = _batch_seconds(n)
        assert np.all(np.isfinite(traj.states))
    print(f"\n[c10] best-of-5 seconds {timings} (hardware-specific)")
    assert timings[3] < timings[10] < timings[100]


# ---------------------------------------------------------------- 11


DETERMINISM_CONFIGS = {
    "solve": {"grid": {"t1": 10, "n_steps": 1000}, "reference": {"method": "rk4", "refine": 10}},
    "estimate": {"grid": {"t1": 20, "n_steps": 400}, "observations": {"samples": 200}, "max_iters": 50},
    "train-node": {"epochs": 20},
    "react-diffuse": {},
    "bench": {"grid": {"t1": 1, "n_steps": 100}, "repeats": 1},
}


@pytest.mark.criterion(11, "repeated runs give byte-identical non-timing outputs")
@pytest.mark.parametrize("experiment", list(DETERMINISM_CONFIGS))
def test_c11_determinism(tmp_path, experiment):
    snaps = []
    for name in ("first", "second"):
        out = tmp_path / name
        rc, _ = run_cli(out, experiment, DETERMINISM_CONFIGS[experiment])
        assert rc == 0
        snaps.append({str(p.relative_to(out)): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file() and p.name not in ("timings.json", "bench.csv")})
    print(f"\n[c11] {experiment}: {len(snaps[0])} files compared")
    assert snaps[0] == snaps[1]
