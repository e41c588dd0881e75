"""CSV/JSON serialization for signals, datasets, controllers and results.

All numeric output uses shortest round-trip float formatting and LF line
endings so reruns of a seeded study are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import NonMonotonicTimestamps, ParseError
from .lti import SignalSeries
from .metrics import BatchSummary, MetricsReport
from .vrft import ControllerParams, IoDataset


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_lines(path: Path, lines: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path: Path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path: Path):
    with open(path) as fh:
        return json.load(fh)


def config_hash(obj) -> str:
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


# --- signals ---

def write_signal_csv(path: Path, sig: SignalSeries,
                     value_header: str = "value") -> None:
    lines = [f"t_seconds,{value_header}"]
    for i, v in enumerate(sig.samples):
        lines.append(f"{_fmt(i * sig.ts)},{_fmt(v)}")
    _write_lines(Path(path), lines)


def read_signal_csv(path: Path, ts: float) -> SignalSeries:
    ts_list, vals = _read_two_columns(Path(path))
    return SignalSeries(np.asarray(vals), ts)


def _read_two_columns(path: Path) -> tuple[list[float], list[float]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty file", row=0)
    if len(rows[0]) != 2:
        raise ParseError("expected a two-column header", row=1)
    t_list, v_list = [], []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", row=i)
        try:
            t_list.append(float(row[0]))
            v_list.append(float(row[1]))
        except ValueError as exc:
            raise ParseError(str(exc), row=i) from None
    if not t_list:
        raise ParseError("no data rows", row=1)
    return t_list, v_list


def load_weather_csv(path: Path, ts: float = 540.0) -> SignalSeries:
    """Outdoor-temperature CSV (t_seconds,temp_c), resampled to ts by
    linear interpolation."""
    t_list, v_list = _read_two_columns(Path(path))
    t = np.asarray(t_list)
    v = np.asarray(v_list)
    if np.any(np.diff(t) <= 0):
        raise NonMonotonicTimestamps("timestamps must be strictly increasing")
    grid = np.arange(t[0], t[-1] + 1e-9, ts)
    return SignalSeries(np.interp(grid, t, v), ts)


# --- datasets ---

def write_dataset_csv(path: Path, ds: IoDataset) -> None:
    lines = ["t_seconds,u,y"]
    for i in range(len(ds)):
        lines.append(
            f"{_fmt(i * ds.ts)},{_fmt(ds.u.samples[i])},{_fmt(ds.y.samples[i])}")
    _write_lines(Path(path), lines)


def read_dataset_csv(path: Path, ts: float, meta: dict | None = None,
                     prefiltered: bool = False) -> IoDataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["t_seconds", "u", "y"]:
        raise ParseError("expected header t_seconds,u,y", row=1)
    u, y = [], []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", row=i)
        try:
            u.append(float(row[1]))
            y.append(float(row[2]))
        except ValueError as exc:
            raise ParseError(str(exc), row=i) from None
    return IoDataset(
        u=SignalSeries(np.asarray(u), ts),
        y=SignalSeries(np.asarray(y), ts),
        meta=meta or {},
        prefiltered=prefiltered,
    )


# --- controllers ---

def write_controller_json(path: Path, cp: ControllerParams, omega0: float) -> None:
    write_json(Path(path), {
        "theta": [float(t) for t in cp.theta],
        "omega0": omega0,
        "ts": cp.ts,
        "basis": "pid-z",
    })


def read_controller_json(path: Path) -> tuple[ControllerParams, float]:
    doc = read_json(Path(path))
    if doc.get("basis") != "pid-z":
        raise ParseError(f"unsupported controller basis {doc.get('basis')!r}")
    cp = ControllerParams(np.asarray(doc["theta"], dtype=float), float(doc["ts"]))
    return cp, float(doc["omega0"])


# --- attack results ---

def attack_result_to_dict(res) -> dict:
    return {
        "eps_u": res.budget.eps_u,
        "eps_y": res.budget.eps_y,
        "delta_u": res.budget.delta_u,
        "delta_y": res.budget.delta_y,
        "budget_y_reference": res.budget.y_reference,
        "a_u": [float(v) for v in res.a_u],
        "a_y": [float(v) for v in res.a_y],
        "theta_clean": [float(v) for v in res.theta_clean.theta],
        "theta_poisoned": [float(v) for v in res.theta_poisoned.theta],
        "objective_trace": [float(v) for v in res.objective_trace],
        "iterations": res.iterations,
        "restarts_used": res.restarts_used,
        "seed": res.seed,
    }


# --- metrics ---

def write_metrics_json(path: Path, report: MetricsReport, extra: dict | None = None) -> None:
    doc = report.to_dict()
    if extra:
        doc.update(extra)
    write_json(Path(path), doc)


SUMMARY_HEADER = ("scenario,n,vrft_loss_mean,vrft_loss_ci,rmse_mean,rmse_ci,"
                  "avg_psd_mean,avg_psd_ci,pct_good")


def summary_row(scenario: str, n: int, s: BatchSummary) -> str:
    return ",".join([
        scenario, str(n),
        _fmt(s.loss_mean), _fmt(s.loss_ci),
        _fmt(s.rmse_mean), _fmt(s.rmse_ci),
        _fmt(s.psd_mean), _fmt(s.psd_ci),
        _fmt(s.percent_good),
    ])


def write_summary_csv(path: Path, rows: list[str]) -> None:
    _write_lines(Path(path), [SUMMARY_HEADER] + rows)


def write_scatter_csv(path: Path, rows: list[tuple[int, float, float, bool]]) -> None:
    lines = ["seed,rmse,avg_psd,good"]
    for seed, r, p, good in rows:
        lines.append(f"{seed},{_fmt(r)},{_fmt(p)},{str(bool(good)).lower()}")
    _write_lines(Path(path), lines)


def write_csv(path: Path, header: str, rows: list[str]) -> None:
    _write_lines(Path(path), [header] + rows)
