"""Consolidated study report: tables, plot-ready data and rendered figures."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import io as vio
from .errors import MissingArtifacts
from .metrics import ELLIPSE_PSD_SCALE


def _read_csv_dicts(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _collect(cfg) -> dict:
    summaries, scatters, grids = {}, {}, {}
    for scenario, n in cfg.groups():
        key = f"{scenario}_n{n}"
        vdir = cfg.group_dir("validation", scenario, n)
        if (vdir / "summary.csv").exists():
            summaries[key] = _read_csv_dicts(vdir / "summary.csv")[0]
        if (vdir / "scatter.csv").exists():
            scatters[key] = _read_csv_dicts(vdir / "scatter.csv")
        adir = cfg.group_dir("attacks", scenario, n)
        if (adir / "grid_summary.csv").exists():
            grids[key] = _read_csv_dicts(adir / "grid_summary.csv")
    return {"summaries": summaries, "scatters": scatters, "grids": grids}


def _fig_scatter(scatters: dict, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 5))
    for key, rows in sorted(scatters.items()):
        r = [float(row["rmse"]) for row in rows]
        p = [float(row["avg_psd"]) for row in rows]
        ax.scatter(r, p, s=18, label=key, alpha=0.7)
    t = np.linspace(0, np.pi / 2, 200)
    ax.plot(np.cos(t), ELLIPSE_PSD_SCALE * np.sin(t), "k--", lw=1,
            label="quality ellipse")
    ax.set_xlabel("tracking RMSE [degC]")
    ax.set_ylabel("average PSD")
    ax.legend(fontsize=8)
    ax.set_title("Controller quality per run")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _fig_attack_grid(grids: dict, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 5))
    for key, rows in sorted(grids.items()):
        if not rows:
            continue
        xs = [float(r["poisoned_rmse_mean"]) for r in rows]
        ys = [float(r["poisoned_psd_mean"]) for r in rows]
        ax.scatter(xs, ys, marker="x", label=f"{key} poisoned")
        for r, x, y in zip(rows, xs, ys):
            ax.annotate(f"({r['eps_u']},{r['eps_y']})", (x, y), fontsize=6)
        ax.scatter([float(rows[0]["clean_rmse_mean"])],
                   [float(rows[0]["clean_psd_mean"])],
                   marker="o", label=f"{key} clean")
    ax.set_xlabel("mean tracking RMSE [degC]")
    ax.set_ylabel("mean average PSD")
    ax.legend(fontsize=8)
    ax.set_title("Poisoning impact per budget")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _markdown(cfg, data: dict) -> str:
    lines = ["# Study report", ""]
    lines += ["## Validation summary", "",
              "| group | VRFT loss | RMSE | avg PSD | % good |",
              "|---|---|---|---|---|"]
    for key, s in sorted(data["summaries"].items()):
        lines.append(
            f"| {key} | {float(s['vrft_loss_mean']):.4g} ± {float(s['vrft_loss_ci']):.2g}"
            f" | {float(s['rmse_mean']):.4g} ± {float(s['rmse_ci']):.2g}"
            f" | {float(s['avg_psd_mean']):.4g} ± {float(s['avg_psd_ci']):.2g}"
            f" | {100 * float(s['pct_good']):.0f}% |")
    if data["grids"]:
        lines += ["", "## Poisoning impact", "",
                  "| group | (eps_u, eps_y) | clean RMSE | poisoned RMSE |",
                  "|---|---|---|---|"]
        for key, rows in sorted(data["grids"].items()):
            for r in rows:
                lines.append(
                    f"| {key} | ({r['eps_u']}, {r['eps_y']}) "
                    f"| {float(r['clean_rmse_mean']):.4g} "
                    f"| {float(r['poisoned_rmse_mean']):.4g} |")
    lines += ["", "## Conventions", "",
              f"- master seed: {cfg.master_seed}",
              f"- config hash: {cfg.hash()}",
              "- Welch PSD: Hann window, segment 256 (or next lower power of "
              "two), 50% overlap, per-segment demeaning, density scaling",
              f"- output perturbation budget scaled by: {cfg.budget_y_reference}",
              f"- validation: setpoint {cfg.setpoint} degC over {cfg.weeks} weeks",
              ""]
    return "\n".join(lines)


def build_report(cfg) -> dict:
    data = _collect(cfg)
    if not data["summaries"] and not data["grids"]:
        missing = [str(cfg.group_dir("validation", s, n) / "summary.csv")
                   for s, n in cfg.groups()]
        raise MissingArtifacts(missing)
    rdir = cfg.output_dir / "report"
    figures = rdir / "figures"
    figures.mkdir(parents=True, exist_ok=True)
    doc = {
        "summaries": data["summaries"],
        "attack_grids": data["grids"],
        "scatter": data["scatters"],
        "conventions": {
            "welch": {"window": "hann", "segment": 256, "overlap": 0.5,
                      "detrend": "constant", "scaling": "density"},
            "budget_y_reference": cfg.budget_y_reference,
            "master_seed": cfg.master_seed,
            "config_hash": cfg.hash(),
        },
    }
    vio.write_json(rdir / "report.json", doc)
    (rdir / "report.md").write_text(_markdown(cfg, data), newline="\n")
    written = {"report_json": str(rdir / "report.json"),
               "report_md": str(rdir / "report.md")}
    if data["scatters"]:
        _fig_scatter(data["scatters"], figures / "controller_scatter.png")
        written["scatter_figure"] = str(figures / "controller_scatter.png")
    if data["grids"]:
        _fig_attack_grid(data["grids"], figures / "attack_grid.png")
        written["attack_figure"] = str(figures / "attack_grid.png")
    return written
