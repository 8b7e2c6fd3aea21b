"""Batch drivers behind the ``odekit`` subcommands.

Each ``cmd_*`` takes a validated config and an output directory, writes its
artifacts there and returns the process exit code. Non-timing outputs are a
pure function of the config; wall-clock figures go to ``timings.json`` (or the
bench table) only.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    BenchConfig,
    EstimateConfig,
    ReactDiffuseConfig,
    SolveConfig,
    TrainNodeConfig,
    config_hash,
)
from .errors import NonFiniteState
from .estimate import EstimationConfig, Observations, estimate_parameters
from .io import write_json, write_params, write_pgm, write_table_csv, write_trajectory_csv
from .models import (
    CompartmentParams,
    LotkaVolterraParams,
    OscillatorParams,
    compartment_model,
    compartment_rhs,
    lotka_volterra_model,
    lv_rhs,
    random_compartment_batch,
    random_lv_batch,
)
from .neural_ode import (
    NodeTrainConfig,
    extrapolate,
    mean_abs_error,
    oscillator_data,
    solve_field,
    train_neural_ode,
)
from .ode_core import IvpProblem, TimeGrid, integrate, make_tableau
from .reaction_diffusion import GrayScottParams, Grid2D, init_gray_scott, simulate_gray_scott

log = logging.getLogger(__name__)

BENCH_DISCLAIMER = (
    "Timings are measured on the local machine and are hardware-specific; "
    "they are not comparable across machines or with timings from other packages."
)


def _provenance(cfg) -> dict:
    return {
        "config": cfg.model_dump(mode="json"),
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "tool": "odekit",
        "tool_version": __version__,
    }


def _grid(spec) -> TimeGrid:
    return TimeGrid(spec.t0, spec.t1, spec.n_steps)


# ---------------------------------------------------------------- solve


_KINDS = {
    "lotka_volterra": (LotkaVolterraParams, lv_rhs),
    "compartment": (CompartmentParams, compartment_rhs),
}


def _batch_rhs(kind: str):
    rhs = _KINDS[kind][1]
    return lambda t, y, p: rhs(p, t, y)


def _params_of(kind: str, theta: np.ndarray):
    return _KINDS[kind][0].from_vector(theta)


def build_solve_batch(cfg: SolveConfig) -> tuple[str, np.ndarray, np.ndarray]:
    """``(kind, thetas (M, p), y0s (M, d))`` for the configured batch."""
    spec = cfg.model
    rng = np.random.default_rng(cfg.seed)
    if spec.name == "lotka_volterra":
        if spec.params is not None:
            p = spec.params
            theta = np.array([[p.alpha, p.beta, p.gamma, p.delta]])
            y0 = np.array([spec.y0 if spec.y0 is not None else [10.0, 5.0]], dtype=float)
        else:
            params, y0 = random_lv_batch(spec.count, rng)
            theta = np.stack([params.alpha, params.beta, params.gamma, params.delta], axis=-1)
        return "lotka_volterra", theta, y0
    n = spec.n
    if spec.k_out is not None:
        theta = np.array([[spec.k_elim] + list(spec.k_out) + list(spec.k_in)])
        y0 = np.zeros((1, n))
        y0[0, 0] = 10.0
    else:
        params, y0 = random_compartment_batch(n, spec.count, rng)
        theta = np.concatenate([params.k_elim[:, None], params.k_out, params.k_in], axis=1)
        if spec.k_elim is not None:
            theta[:, 0] = spec.k_elim
    if spec.y0 is not None:
        y0 = np.tile(np.asarray(spec.y0, dtype=float), (theta.shape[0], 1))
    return "compartment", theta, y0


def _solve_stacked(kind, thetas, y0s, grid, method, stride=1):
    problem = IvpProblem(_batch_rhs(kind), y0s, _params_of(kind, thetas), grid)
    states = integrate(make_tableau(method), problem, stride=stride).states
    return np.moveaxis(states, 1, 0)  # (M, n_points, d)


def _member_metrics(kind, theta, traj, ref) -> dict:
    out = {}
    if ref is not None:
        diff = traj - ref
        out["l1"] = np.abs(diff).mean(axis=0).tolist()
        out["mse"] = float(np.mean(diff * diff))
    if kind == "compartment" and theta[0] == 0.0:
        mass = traj.sum(axis=1)
        out["mass_drift"] = float(np.max(np.abs(mass - mass[0])) / abs(mass[0]))
    return out


def _solve_chunk(args) -> list[dict]:
    """Solve a slice of the batch in one vectorized pass and write its CSVs.

    If the stacked solve hits a non-finite state the members are re-solved one
    by one so only the offending models are marked failed.
    """
    kind, thetas, y0s, grid, method, ref_spec, paths = args
    try:
        trajs = _solve_stacked(kind, thetas, y0s, grid, method)
        refs = None
        if ref_spec is not None:
            refs = _solve_stacked(kind, thetas, y0s, grid.refined(ref_spec[1]), ref_spec[0], ref_spec[1])
    except NonFiniteState as exc:
        if len(paths) == 1:
            return [{"file": Path(paths[0]).name, "status": "failed", "error": str(exc), "step_index": exc.step_index}]
        log.info("batch solve failed (%s); solving members individually", exc)
        return [
            rec
            for i in range(len(paths))
            for rec in _solve_chunk((kind, thetas[i : i + 1], y0s[i : i + 1], grid, method, ref_spec, paths[i : i + 1]))
        ]
    records = []
    for i, path in enumerate(paths):
        write_trajectory_csv(path, grid.points, trajs[i])
        ref = None if refs is None else refs[i]
        records.append({"file": Path(path).name, "status": "ok", **_member_metrics(kind, thetas[i], trajs[i], ref)})
    return records


def cmd_solve(cfg: SolveConfig, out: Path, jobs: int = 1) -> int:
    """Solve the configured batch; one CSV per model plus ``report.json``.

    With ``jobs > 1`` the batch is split into that many slices solved in
    worker processes; results are identical to the serial run.
    """
    t_start = time.perf_counter()
    kind, thetas, y0s = build_solve_batch(cfg)
    grid = _grid(cfg.grid)
    ref_spec = (cfg.reference.method, cfg.reference.refine) if cfg.reference is not None else None
    m = thetas.shape[0]
    paths = [out / f"model_{i:03d}.csv" for i in range(m)]
    names = _KINDS[kind][0].names if kind == "lotka_volterra" else None

    chunks = [c for c in np.array_split(np.arange(m), min(jobs, m)) if c.size]
    tasks = [(kind, thetas[c], y0s[c], grid, cfg.method, ref_spec, [paths[i] for i in c]) for c in chunks]
    if len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=len(tasks)) as pool:
            records = [rec for part in pool.map(_solve_chunk, tasks) for rec in part]
    else:
        records = _solve_chunk(tasks[0])

    for i, rec in enumerate(records):
        rec["index"] = i
        rec["y0"] = y0s[i].tolist()
        rec["params"] = dict(zip(names, thetas[i].tolist())) if names else thetas[i].tolist()
    ok = [r for r in records if r["status"] == "ok"]
    summary = {"kind": kind, "n_models": m, "n_failed": m - len(ok)}
    if ok and "mse" in ok[0]:
        mses = [r["mse"] for r in ok]
        summary.update(max_mse=max(mses), median_mse=float(np.median(mses)))
    if ok and "mass_drift" in ok[0]:
        summary["max_mass_drift"] = max(r["mass_drift"] for r in ok)
    write_json(out / "report.json", {"experiment": "solve", "provenance": _provenance(cfg), "summary": summary, "models": records})
    write_json(out / "timings.json", {"wall_clock_seconds": time.perf_counter() - t_start})
    return 0 if len(ok) == m else 1


# ---------------------------------------------------------------- estimate


def cmd_estimate(cfg: EstimateConfig, out: Path, jobs: int = 1) -> int:
    """Recover model parameters from noiseless synthetic observations."""
    t_start = time.perf_counter()
    spec = cfg.model
    truth = np.array(spec.truth, dtype=float)
    y0 = np.array(spec.y0, dtype=float)
    model = lotka_volterra_model() if spec.name == "lotka_volterra" else compartment_model(y0.size)
    grid = _grid(cfg.grid)
    tableau = make_tableau(cfg.method)
    data = integrate(tableau, IvpProblem(model.rhs, y0, truth, grid))
    stride = grid.n_steps // cfg.observations.samples
    obs_idx = np.arange(1, cfg.observations.samples + 1) * stride
    obs = Observations(data.times[obs_idx], data.states[obs_idx][:, cfg.observations.components], cfg.observations.components)

    if cfg.theta0 is not None:
        theta0 = np.array(cfg.theta0, dtype=float)
    else:
        rng = np.random.default_rng(cfg.seed)
        theta0 = truth + rng.uniform(-cfg.perturbation, cfg.perturbation, size=truth.size)

    ecfg = EstimationConfig(
        theta0=theta0,
        y0=y0,
        grid=grid,
        method=cfg.method,
        optimizer=cfg.optimizer,
        learning_rate=cfg.learning_rate,
        tol=cfg.tol,
        max_outer_iters=cfg.max_iters,
        log_params=cfg.log_params,
    )
    result = estimate_parameters(model, obs, ecfg)
    write_table_csv(
        out / "iterations.csv",
        ["iteration", "cost"] + list(model.param_names),
        [[k, J] + th for k, J, th in result.log],
    )
    report = {
        "experiment": "estimate",
        "provenance": _provenance(cfg),
        "model": model.name,
        "param_names": list(model.param_names),
        "ground_truth": truth.tolist(),
        "theta0": theta0.tolist(),
        "theta_hat": result.theta.tolist(),
        "abs_error": np.abs(result.theta - truth).tolist(),
        "final_cost": result.cost,
        "iterations": result.iterations,
        "converged": result.converged,
        "stop_reason": result.reason,
    }
    write_json(out / "report.json", report)
    write_json(out / "timings.json", {"wall_clock_seconds": time.perf_counter() - t_start})
    return 0


# ---------------------------------------------------------------- train-node


def cmd_train_node(cfg: TrainNodeConfig, out: Path, jobs: int = 1) -> int:
    """Fit a Neural ODE to damped-oscillator data and extrapolate beyond it."""
    t_start = time.perf_counter()
    grid = _grid(cfg.grid)
    osc = cfg.oscillator
    data = oscillator_data(OscillatorParams(osc.k, osc.b), osc.y0, grid, cfg.method)
    ncfg = NodeTrainConfig(cfg.learning_rate, cfg.epochs, cfg.seed, cfg.method, cfg.hidden)
    params, history = train_neural_ode(data, ncfg)
    fit = solve_field(params.flatten(), params.hidden, data.states[0], grid, cfg.method)
    n_ext = max(1, round((cfg.extrapolate_to - grid.t1) / grid.h))
    ext_grid = TimeGrid(grid.t1, cfg.extrapolate_to, n_ext)
    ext = extrapolate(params, fit.states[-1], ext_grid, cfg.method)

    write_params(out / "params.json", params.flatten())
    write_table_csv(out / "loss_history.csv", ["epoch", "loss"], [[e, v] for e, v in enumerate(history)])
    write_trajectory_csv(out / "data.csv", data.times, data.states)
    write_trajectory_csv(out / "fit.csv", fit.times, fit.states)
    write_trajectory_csv(out / "extrapolation.csv", ext.times, ext.states)
    report = {
        "experiment": "train-node",
        "provenance": _provenance(cfg),
        "n_params": int(params.size),
        "hidden": params.hidden,
        "epochs": len(history),
        "initial_loss": history[0],
        "final_loss": float(np.mean((fit.states - data.states) ** 2)),
        "train_l1": mean_abs_error(fit, data),
        "extrapolation_max_abs": float(np.max(np.abs(ext.states))),
    }
    write_json(out / "report.json", report)
    write_json(out / "timings.json", {"wall_clock_seconds": time.perf_counter() - t_start})
    return 0


# ---------------------------------------------------------------- react-diffuse


def cmd_react_diffuse(cfg: ReactDiffuseConfig, out: Path, jobs: int = 1) -> int:
    """Gray-Scott run; V-field PGM frames every ``stride`` steps plus the final state."""
    t_start = time.perf_counter()
    init = cfg.initial
    if init.kind == "seeded":
        g0 = init_gray_scott(cfg.nx, cfg.ny, init.baseline)
    else:
        g0 = Grid2D(np.full((cfg.nx, cfg.ny), init.U), np.full((cfg.nx, cfg.ny), init.V))
    p = GrayScottParams(**cfg.params.model_dump())
    grid = _grid(cfg.grid)
    snaps = simulate_gray_scott(p, g0, grid, make_tableau(cfg.method), stride=cfg.stride)

    frames_dir = out / "frames"
    frames_dir.mkdir(exist_ok=True)
    frames = []
    for i, g in enumerate(snaps):
        name = f"frame_{i * cfg.stride:05d}.pgm"
        write_pgm(frames_dir / name, g.V)
        frames.append({"file": f"frames/{name}", "step": i * cfg.stride, "t": float(grid.points[i * cfg.stride]), "max_V": float(g.V.max())})
    final = snaps[-1]
    ii, jj = np.meshgrid(np.arange(cfg.nx), np.arange(cfg.ny), indexing="ij")
    write_table_csv(
        out / "final_state.csv",
        ["i", "j", "U", "V"],
        zip(ii.ravel().tolist(), jj.ravel().tolist(), map(float, final.U.ravel()), map(float, final.V.ravel())),
    )
    report = {
        "experiment": "react-diffuse",
        "provenance": _provenance(cfg),
        "shape": [cfg.nx, cfg.ny],
        "n_frames": len(frames),
        "frames": frames,
        "var_V_initial": float(g0.V.var()),
        "var_V_final": float(final.V.var()),
        "final_step": int((len(snaps) - 1) * cfg.stride),
    }
    write_json(out / "report.json", report)
    write_json(out / "timings.json", {"wall_clock_seconds": time.perf_counter() - t_start})
    return 0


# ---------------------------------------------------------------- bench


def _time_compartment_batch(n: int, cfg: BenchConfig) -> float:
    params, C0 = random_compartment_batch(n, cfg.count, np.random.default_rng(cfg.seed))
    problem = IvpProblem(_batch_rhs("compartment"), C0, params, _grid(cfg.grid))
    tableau = make_tableau(cfg.method)
    best = np.inf
    for _ in range(cfg.repeats):
        t0 = time.perf_counter()
        integrate(tableau, problem)
        best = min(best, time.perf_counter() - t0)
    return best


def cmd_bench(cfg: BenchConfig, out: Path, jobs: int = 1) -> int:
    """Time compartment-model batches of each configured size (best of ``repeats``)."""
    rows = [(n, _time_compartment_batch(n, cfg)) for n in cfg.compartments]
    write_table_csv(out / "bench.csv", ["compartments", "odekit_seconds"], rows)
    report = {
        "experiment": "bench",
        "provenance": _provenance(cfg),
        "disclaimer": BENCH_DISCLAIMER,
        "rows": [{"compartments": n, "models": cfg.count, "n_steps": cfg.grid.n_steps} for n in cfg.compartments],
        "timing_file": "bench.csv",
    }
    write_json(out / "report.json", report)
    width = max(len(f"{n} Comp.") for n in cfg.compartments)
    print(f"{'':<{width}} | odekit (s)")
    for n, sec in rows:
        print(f"{f'{n} Comp.':<{width}} | {sec:.4f}")
    print(BENCH_DISCLAIMER)
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "estimate": cmd_estimate,
    "train-node": cmd_train_node,
    "react-diffuse": cmd_react_diffuse,
    "bench": cmd_bench,
}
