"""Batched, seeded experiment orchestration.

Every run derives its RNG stream from the master seed and its coordinates
(scenario, dataset size, run index, stage), so the whole study is
reproducible bit-for-bit and runs within a batch are independent.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io as vio
from .attack import make_budget, poisoned_dataset, run_attack
from .errors import MissingArtifacts, RankDeficient, UnstableLoop, VrftLabError
from .lti import SignalSeries
from .metrics import MetricsReport, failed_report, score_series, summarize
from .plant import (
    PlantState,
    ThermalPlantConfig,
    generate_excitation,
    generate_occupancy,
    run_closed_loop,
    run_open_loop,
    scenario_excitation,
    steady_state,
    winter_traces,
)
from .vrft import (
    IoDataset,
    make_reference_model,
    prefilter_dataset,
    realize_controller,
    synthesize,
)

VALIDATION_SETPOINT = 21.0
SAMPLES_PER_WEEK = 7 * 160  # ts = 540 s


@dataclass(frozen=True)
class ExperimentConfig:
    """One study: scenario/size grid, seeds, plant, reference and attack grid."""

    output_dir: Path
    scenarios: tuple[str, ...] = ("A", "B")
    n_points: tuple[int, ...] = (100, 1000)
    n_seeds: int = 50
    master_seed: int = 0
    plant: ThermalPlantConfig = field(default_factory=ThermalPlantConfig)
    omega0: float = 0.002
    ts: float = 540.0
    attack_grid: tuple[tuple[float, float], ...] = ((0.1, 0.2),)
    attack_seeds: int | None = None  # defaults to n_seeds
    budget_y_reference: str = "input_norm"
    weeks: int = 2
    setpoint: float = VALIDATION_SETPOINT
    init_temp: float = 15.0
    shared_weather: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.n_seeds < 1:
            raise VrftLabError("n_seeds must be >= 1")
        for eu, ey in self.attack_grid:
            if not (0.0 <= eu <= 1.0 and 0.0 <= ey <= 1.0):
                raise VrftLabError("attack budgets must lie in [0, 1]^2")
        for s in self.scenarios:
            if s not in ("A", "B"):
                raise VrftLabError(f"unknown scenario {s!r}")
        object.__setattr__(self, "output_dir", Path(self.output_dir))

    def hash(self) -> str:
        doc = asdict(self)
        doc.pop("output_dir")
        doc.pop("jobs")
        return vio.config_hash(doc)

    def group_dir(self, kind: str, scenario: str, n: int) -> Path:
        return self.output_dir / kind / f"{scenario}_n{n}"

    def groups(self) -> list[tuple[str, int]]:
        return [(s, n) for s in self.scenarios for n in self.n_points]


def derive_seed(master_seed: int, *tags) -> int:
    """Independent per-run stream keyed by master seed and run coordinates."""
    key = "|".join([str(master_seed)] + [str(t) for t in tags])
    digest = hashlib.sha256(key.encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def _manifest(cfg: ExperimentConfig, **extra) -> dict:
    from . import __version__

    doc = {
        "config_hash": cfg.hash(),
        "master_seed": cfg.master_seed,
        "vrft_lab_version": __version__,
    }
    doc.update(extra)
    return doc


def _map_runs(fn, items, jobs: int):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


# --- experiment stage ---

def _weather_seed(cfg: ExperimentConfig, stage: str, scenario: str, n: int,
                  run: int) -> int:
    if cfg.shared_weather:
        return derive_seed(cfg.master_seed, stage, "weather", "shared")
    return derive_seed(cfg.master_seed, stage, "weather", scenario, n, run)


def _run_one_experiment(args) -> Path:
    cfg, scenario, n, run = args
    seed = derive_seed(cfg.master_seed, "experiment", scenario, n, run)
    exc_cfg = scenario_excitation(scenario, n, seed)
    exc = generate_excitation(exc_cfg, cfg.ts)
    # training data comes from an empty apartment in winter
    traces = winter_traces(n, _weather_seed(cfg, "experiment", scenario, n, run),
                           ts=cfg.ts)
    # logging starts once the plant has settled under the mean airflow
    init = steady_state(cfg.plant, exc_cfg.mu,
                        float(traces.t_out.samples[0]), 0.0)
    ds = run_open_loop(cfg.plant, exc, traces, init)
    path = cfg.group_dir("datasets", scenario, n) / f"seed{run:03d}.csv"
    vio.write_dataset_csv(path, ds)
    vio.write_json(path.with_suffix(".manifest.json"), _manifest(
        cfg, stage="experiment", scenario=scenario, n=n, run=run, seed=seed,
        prefiltered=False, poisoned=False))
    return path


def cmd_experiment(cfg: ExperimentConfig) -> dict:
    jobs_args = [(cfg, s, n, r)
                 for s, n in cfg.groups() for r in range(cfg.n_seeds)]
    paths = _map_runs(_run_one_experiment, jobs_args, cfg.jobs)
    return {"datasets_written": len(paths), "failures": 0}


def _load_dataset(cfg: ExperimentConfig, scenario: str, n: int, run: int) -> IoDataset:
    path = cfg.group_dir("datasets", scenario, n) / f"seed{run:03d}.csv"
    if not path.exists():
        raise MissingArtifacts([str(path)])
    return vio.read_dataset_csv(path, cfg.ts, meta={"scenario": scenario, "run": run})


# --- synthesis stage ---

def cmd_synthesize(cfg: ExperimentConfig) -> dict:
    mr = make_reference_model(cfg.omega0, cfg.ts)
    failures = 0
    for scenario, n in cfg.groups():
        rows = []
        for run in range(cfg.n_seeds):
            ds = _load_dataset(cfg, scenario, n, run)
            try:
                result = synthesize(ds, mr)
            except RankDeficient:
                failures += 1
                rows.append(f"{run},,,,,,failed")
                continue
            cp = result.controller
            cpath = cfg.group_dir("controllers", scenario, n) / f"seed{run:03d}.json"
            vio.write_controller_json(cpath, cp, cfg.omega0)
            t1, t2, t3 = cp.theta
            rows.append(
                f"{run},{t1!r},{t2!r},{t3!r},{result.loss!r},{result.cond!r},ok")
        losses = cfg.group_dir("controllers", scenario, n) / "losses.csv"
        vio.write_csv(losses, "seed,theta1,theta2,theta3,loss,cond,status", rows)
        vio.write_json(losses.with_suffix(".manifest.json"), _manifest(
            cfg, stage="synthesize", scenario=scenario, n=n))
    return {"failures": failures}


# --- validation stage ---

def _validate_controller(cfg: ExperimentConfig, cp, scenario: str, n: int,
                         run: int, stage: str) -> MetricsReport:
    n_val = cfg.weeks * SAMPLES_PER_WEEK
    occ = generate_occupancy(
        cfg.weeks, derive_seed(cfg.master_seed, stage, "occupancy", scenario, n, run),
        cfg.ts)
    traces = winter_traces(n_val, _weather_seed(cfg, stage, scenario, n, run),
                           occupancy=occ, ts=cfg.ts)
    init = PlantState(cfg.init_temp, cfg.init_temp)
    controller = realize_controller(cp)
    try:
        temp = run_closed_loop(cfg.plant, controller, cfg.setpoint, traces,
                               init, n_val)
    except UnstableLoop:
        return failed_report(n_val)
    return score_series(temp, cfg.setpoint)


def _run_one_validation(args):
    cfg, scenario, n, run = args
    cpath = cfg.group_dir("controllers", scenario, n) / f"seed{run:03d}.json"
    if not cpath.exists():
        return run, None
    cp, _ = vio.read_controller_json(cpath)
    return run, _validate_controller(cfg, cp, scenario, n, run, "validate")


def cmd_validate(cfg: ExperimentConfig) -> dict:
    failures = 0
    for scenario, n in cfg.groups():
        losses_path = cfg.group_dir("controllers", scenario, n) / "losses.csv"
        if not losses_path.exists():
            raise MissingArtifacts([str(losses_path)])
        loss_by_run = _read_losses(losses_path)
        results = _map_runs(
            _run_one_validation,
            [(cfg, scenario, n, r) for r in range(cfg.n_seeds)],
            cfg.jobs)
        scatter, reports, losses = [], [], []
        for run, report in results:
            if report is None:
                failures += 1
                continue
            mpath = (cfg.group_dir("validation", scenario, n)
                     / f"seed{run:03d}.metrics.json")
            vio.write_metrics_json(mpath, report, extra={"seed": run})
            scatter.append((run, report.e_rmse, report.e_psd, report.good))
            reports.append(report)
            losses.append(loss_by_run.get(run, float("nan")))
            if not report.good and report.e_rmse >= 1e5:
                failures += 1
        gdir = cfg.group_dir("validation", scenario, n)
        vio.write_scatter_csv(gdir / "scatter.csv", scatter)
        if len(reports) >= 2:
            summary = summarize(reports, losses)
            vio.write_summary_csv(
                gdir / "summary.csv",
                [vio.summary_row(scenario, n, summary)])
        vio.write_json(gdir / "manifest.json", _manifest(
            cfg, stage="validate", scenario=scenario, n=n,
            setpoint=cfg.setpoint, weeks=cfg.weeks))
    return {"failures": failures}


def _read_losses(path: Path) -> dict[int, float]:
    out = {}
    with open(path) as fh:
        next(fh)
        for line in fh:
            parts = line.strip().split(",")
            if parts[-1] == "ok":
                out[int(parts[0])] = float(parts[4])
    return out


# --- attack stage ---

def _run_one_attack(args):
    cfg, scenario, n, run, eps_u, eps_y = args
    mr = make_reference_model(cfg.omega0, cfg.ts)
    ds = _load_dataset(cfg, scenario, n, run)
    filtered = prefilter_dataset(ds, mr)
    budget = make_budget(eps_u, eps_y, filtered, cfg.budget_y_reference)
    seed = derive_seed(cfg.master_seed, "attack", scenario, n, run, eps_u, eps_y)
    result = run_attack(filtered, mr, budget, seed=seed)
    clean_report = _validate_controller(
        cfg, result.theta_clean, scenario, n, run, "attack-validate")
    poisoned_report = _validate_controller(
        cfg, result.theta_poisoned, scenario, n, run, "attack-validate")
    return run, result, clean_report, poisoned_report


GRID_HEADER = ("scenario,n,eps_u,eps_y,n_runs,clean_rmse_mean,poisoned_rmse_mean,"
               "clean_psd_mean,poisoned_psd_mean,clean_loss_mean,poisoned_loss_mean")


def cmd_attack(cfg: ExperimentConfig) -> dict:
    failures = 0
    n_attack_seeds = cfg.attack_seeds or cfg.n_seeds
    for scenario, n in cfg.groups():
        grid_rows = []
        for eps_u, eps_y in cfg.attack_grid:
            args = [(cfg, scenario, n, r, eps_u, eps_y)
                    for r in range(min(n_attack_seeds, cfg.n_seeds))]
            results = _map_runs(_run_one_attack, args, cfg.jobs)
            edir = (cfg.group_dir("attacks", scenario, n)
                    / f"eps_{eps_u:g}_{eps_y:g}")
            clean_reports, poisoned_reports = [], []
            clean_losses, poisoned_losses = [], []
            for run, result, clean_rep, poison_rep in results:
                doc = vio.attack_result_to_dict(result)
                doc["clean_metrics"] = clean_rep.to_dict()
                doc["poisoned_metrics"] = poison_rep.to_dict()
                vio.write_json(edir / f"seed{run:03d}.attack.json", doc)
                mr = make_reference_model(cfg.omega0, cfg.ts)
                filtered = prefilter_dataset(
                    _load_dataset(cfg, scenario, n, run), mr)
                pds = poisoned_dataset(filtered, result.a_u, result.a_y)
                vio.write_dataset_csv(edir / f"seed{run:03d}.poisoned.csv", pds)
                vio.write_json(
                    edir / f"seed{run:03d}.poisoned.manifest.json",
                    _manifest(cfg, stage="attack", scenario=scenario, n=n,
                              run=run, eps_u=eps_u, eps_y=eps_y,
                              poisoned=True, prefiltered=True,
                              budget_y_reference=cfg.budget_y_reference,
                              seed=result.seed))
                clean_reports.append(clean_rep)
                poisoned_reports.append(poison_rep)
                clean_losses.append(result.objective_trace[0])
                poisoned_losses.append(result.objective_trace[-1])
            if clean_reports:
                grid_rows.append(",".join([
                    scenario, str(n), repr(float(eps_u)), repr(float(eps_y)),
                    str(len(clean_reports)),
                    repr(float(np.mean([r.e_rmse for r in clean_reports]))),
                    repr(float(np.mean([r.e_rmse for r in poisoned_reports]))),
                    repr(float(np.mean([r.e_psd for r in clean_reports]))),
                    repr(float(np.mean([r.e_psd for r in poisoned_reports]))),
                    repr(float(np.mean(clean_losses))),
                    repr(float(np.mean(poisoned_losses))),
                ]))
        gdir = cfg.group_dir("attacks", scenario, n)
        vio.write_csv(gdir / "grid_summary.csv", GRID_HEADER, grid_rows)
        vio.write_json(gdir / "manifest.json", _manifest(
            cfg, stage="attack", scenario=scenario, n=n,
            budget_y_reference=cfg.budget_y_reference,
            attack_grid=[list(p) for p in cfg.attack_grid]))
    return {"failures": failures}


def cmd_report(cfg: ExperimentConfig) -> dict:
    from .report import build_report

    return build_report(cfg)
