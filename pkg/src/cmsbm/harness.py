"""Seeded batch experiments: detection ROC/AUC sweeps and recovery cosine
curves, with CSV and SVG emission.

Determinism contract: rerunning a plan with the same seeds reproduces every
CSV byte-for-byte, independent of the worker count.  Trial seeds follow
base_seed + arm_index*10**6 + trial_index for planted draws and an offset of
500000 for null draws, so arms and hypotheses extend independently.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field
from multiprocessing import get_context
from typing import Any, Optional

import numpy as np

from ._workers import run_trial, variant_color
from .errors import InvalidParams, SchemaMismatch
from .model import ModelParams, validate_params
from .thresholds import interaction_matrix, sigma_plus, threshold_F

CSV_TAG = "#cmsbm-csv-v1"
CSV_COLUMNS = (
    "arm",
    "hypothesis",
    "seed",
    "variant",
    "value",
    "F_intro",
    "F_sec3",
    "sigma_plus",
    "auc",
    "cosine",
    "elapsed",
)
_ARM_STRIDE = 10**6
_NULL_OFFSET = 500_000


@dataclass(frozen=True)
class ExperimentPlan:
    """A sweep of parameter arms with per-arm trial counts and variants."""

    base_params: ModelParams
    sweep: tuple[dict, ...]
    trials: int
    aleph: int
    statistic_variants: tuple[str, ...] = ("all",)
    seed: int = 0
    kind: str = "detection"
    backend: str = "transfer"
    corrections: Optional[bool] = None
    threshold_c: float = 0.5
    project: bool = True
    floor: float = 0.05
    proj_max_iters: int = 5000
    proj_tol: float = 1e-8
    round: bool = True
    op_budget: float = 1e11

    def __post_init__(self):
        if self.kind not in ("detection", "recovery"):
            raise InvalidParams(f"plan kind must be detection or recovery, got {self.kind!r}")
        if self.trials < 1:
            raise InvalidParams(f"trials must be >= 1, got {self.trials}")
        if not self.sweep:
            raise InvalidParams("sweep must contain at least one arm")
        if not self.statistic_variants:
            raise InvalidParams("statistic_variants must be nonempty")
        for variant in self.statistic_variants:
            color = variant_color(variant)
            if color is not None and not (0 <= color <= self.base_params.L):
                raise InvalidParams(f"variant {variant!r} names a color outside 0..L")
        for i in range(len(self.sweep)):
            validate_params(self.arm_params(i))

    def arm_params(self, index: int) -> ModelParams:
        overrides = {k: v for k, v in self.sweep[index].items() if k != "label"}
        merged = dict(self.base_params.to_dict())
        merged.update(overrides)
        return ModelParams.from_dict(merged)

    def arm_label(self, index: int) -> str:
        return str(self.sweep[index].get("label", f"arm{index:02d}"))

    def effective_corrections(self) -> bool:
        # faithful (collision-corrected) statistic by default for recovery;
        # detection defaults to the cheap collapsed form whose null mean is
        # exactly zero
        if self.corrections is None:
            return self.kind == "recovery"
        return self.corrections


def load_plan(path: str) -> ExperimentPlan:
    """Read a plan from JSON (canonical) or TOML."""
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    else:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    return plan_from_dict(raw)


def plan_from_dict(raw: dict) -> ExperimentPlan:
    known = {
        "kind",
        "base_params",
        "sweep",
        "trials",
        "aleph",
        "statistic_variants",
        "seed",
        "backend",
        "corrections",
        "threshold_c",
        "project",
        "floor",
        "proj_max_iters",
        "proj_tol",
        "round",
        "op_budget",
    }
    unknown = set(raw) - known
    if unknown:
        raise InvalidParams(f"unknown plan fields: {sorted(unknown)}")
    if "base_params" not in raw or "sweep" not in raw:
        raise InvalidParams("plan needs base_params and sweep")
    kwargs: dict[str, Any] = {
        "base_params": ModelParams.from_dict(raw["base_params"]),
        "sweep": tuple(dict(arm) for arm in raw["sweep"]),
        "trials": int(raw.get("trials", 1)),
        "aleph": int(raw.get("aleph", 3)),
        "statistic_variants": tuple(raw.get("statistic_variants", ["all"])),
        "seed": int(raw.get("seed", 0)),
        "kind": raw.get("kind", "detection"),
        "backend": raw.get("backend", "transfer"),
        "corrections": raw.get("corrections"),
        "threshold_c": float(raw.get("threshold_c", 0.5)),
        "project": bool(raw.get("project", True)),
        "floor": float(raw.get("floor", 0.05)),
        "proj_max_iters": int(raw.get("proj_max_iters", 5000)),
        "proj_tol": float(raw.get("proj_tol", 1e-8)),
        "round": bool(raw.get("round", True)),
        "op_budget": float(raw.get("op_budget", 1e11)),
    }
    return ExperimentPlan(**kwargs)


@dataclass
class ExperimentRecord:
    """One CSV row: a single statistic evaluation inside an experiment."""

    arm: str
    hypothesis: str
    seed: int
    variant: str
    value: float
    F_intro: float
    F_sec3: float
    sigma_plus: float
    auc: Optional[float] = None
    cosine: Optional[float] = None
    elapsed: Optional[float] = None  # kept out of the CSV for byte-stable output
    extras: dict = field(default_factory=dict)

    def csv_row(self) -> str:
        cells = [
            self.arm,
            self.hypothesis,
            str(self.seed),
            self.variant,
            _fmt(self.value),
            _fmt(self.F_intro),
            _fmt(self.F_sec3),
            _fmt(self.sigma_plus),
            _fmt(self.auc),
            _fmt(self.cosine),
            "",  # elapsed: machine-dependent, never serialized
        ]
        return ",".join(cells)


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


# ---------------------------------------------------------------------------
# AUC, two routes
# ---------------------------------------------------------------------------


def auc_rank(planted_scores, null_scores) -> float:
    """AUC by the rank statistic; ties counted half."""
    p = np.asarray(planted_scores, dtype=float)
    q = np.asarray(null_scores, dtype=float)
    combined = np.concatenate([p, q])
    order = np.argsort(combined, kind="mergesort")
    ranks = np.empty(combined.size, dtype=float)
    sorted_vals = combined[order]
    i = 0
    while i < combined.size:
        j = i
        while j + 1 < combined.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # average rank, 1-based
        i = j + 1
    rank_sum = float(ranks[: p.size].sum())
    return (rank_sum - p.size * (p.size + 1) / 2.0) / (p.size * q.size)


def roc_points(planted_scores, null_scores) -> list[tuple[float, float]]:
    """Empirical ROC as (FPR, TPR) points, thresholds descending through
    every distinct score (ties move both coordinates at once)."""
    p = np.sort(np.asarray(planted_scores, dtype=float))[::-1]
    q = np.sort(np.asarray(null_scores, dtype=float))[::-1]
    thresholds = np.unique(np.concatenate([p, q]))[::-1]
    pts = [(0.0, 0.0)]
    for t in thresholds:
        tpr = float(np.count_nonzero(p >= t)) / p.size
        fpr = float(np.count_nonzero(q >= t)) / q.size
        pts.append((fpr, tpr))
    if pts[-1] != (1.0, 1.0):
        pts.append((1.0, 1.0))
    return pts


def auc_trapezoid(planted_scores, null_scores) -> float:
    """AUC by trapezoidal integration of the empirical ROC; equals
    auc_rank to floating-point accuracy."""
    pts = roc_points(planted_scores, null_scores)
    total = 0.0
    for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
        total += (x1 - x0) * (y0 + y1) / 2.0
    return total


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------


def _arm_threshold_fields(params: ModelParams) -> tuple[float, float, float]:
    F_intro = threshold_F(params, variant="intro")
    F_sec3 = threshold_F(params, variant="sec3")
    sp = sigma_plus(interaction_matrix(params))
    return F_intro, F_sec3, sp


def _run_tasks(tasks: list[dict], workers: int) -> list[dict]:
    if workers <= 1:
        return [run_trial(t) for t in tasks]
    ctx = get_context("spawn")
    with ctx.Pool(processes=workers) as pool:
        return pool.map(run_trial, tasks, chunksize=1)


def _make_tasks(plan: ExperimentPlan, hypotheses: tuple[str, ...]) -> list[dict]:
    tasks = []
    for arm_idx in range(len(plan.sweep)):
        params_dict = plan.arm_params(arm_idx).to_dict()
        for hyp in hypotheses:
            offset = 0 if hyp == "P" else _NULL_OFFSET
            for trial in range(plan.trials):
                tasks.append(
                    {
                        "params": params_dict,
                        "hypothesis": hyp,
                        "seed": plan.seed + arm_idx * _ARM_STRIDE + offset + trial,
                        "variants": plan.statistic_variants,
                        "aleph": plan.aleph,
                        "backend": plan.backend,
                        "corrections": plan.effective_corrections(),
                        "threshold_c": plan.threshold_c,
                        "kind": plan.kind,
                        "project": plan.project and plan.kind == "recovery",
                        "floor": plan.floor,
                        "proj_max_iters": plan.proj_max_iters,
                        "proj_tol": plan.proj_tol,
                        "round": plan.round,
                        "op_budget": plan.op_budget,
                        "arm_idx": arm_idx,
                    }
                )
    return tasks


def _write_csv(path: str, records: list[ExperimentRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_TAG + "\n")
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rec in records:
            fh.write(rec.csv_row() + "\n")


def run_detection_experiment(
    plan: ExperimentPlan, out_dir: str, workers: int = 1, plots: bool = False
) -> dict:
    """Planted and null trials per arm, AUC per (arm, variant) by the rank
    statistic; writes detection.csv (+ summary JSON, optional SVG)."""
    if plan.kind != "detection":
        raise InvalidParams(f"plan kind is {plan.kind!r}, expected detection")
    os.makedirs(out_dir, exist_ok=True)
    tasks = _make_tasks(plan, ("P", "Q"))
    results = _run_tasks(tasks, workers)

    records: list[ExperimentRecord] = []
    arm_fields = {i: _arm_threshold_fields(plan.arm_params(i)) for i in range(len(plan.sweep))}
    for task, result in zip(tasks, results):
        F_intro, F_sec3, sp = arm_fields[task["arm_idx"]]
        for row in result["rows"]:
            records.append(
                ExperimentRecord(
                    arm=plan.arm_label(task["arm_idx"]),
                    hypothesis=task["hypothesis"],
                    seed=task["seed"],
                    variant=row["variant"],
                    value=row["value"],
                    F_intro=F_intro,
                    F_sec3=F_sec3,
                    sigma_plus=sp,
                    elapsed=result["elapsed"],
                )
            )

    # AUC per (arm, variant), stamped on every row of that pair
    summary_arms = []
    for arm_idx in range(len(plan.sweep)):
        label = plan.arm_label(arm_idx)
        F_intro, F_sec3, sp = arm_fields[arm_idx]
        auc_by_variant = {}
        for variant in plan.statistic_variants:
            p_scores = [
                r.value for r in records if r.arm == label and r.variant == variant and r.hypothesis == "P"
            ]
            q_scores = [
                r.value for r in records if r.arm == label and r.variant == variant and r.hypothesis == "Q"
            ]
            auc = auc_rank(p_scores, q_scores)
            auc_by_variant[variant] = auc
            for r in records:
                if r.arm == label and r.variant == variant:
                    r.auc = auc
        summary_arms.append(
            {
                "label": label,
                "params": plan.arm_params(arm_idx).to_dict(),
                "F_intro": F_intro,
                "F_sec3": F_sec3,
                "sigma_plus": sp,
                "auc": auc_by_variant,
                "trials": plan.trials,
            }
        )

    csv_path = os.path.join(out_dir, "detection.csv")
    _write_csv(csv_path, records)
    summary = {
        "kind": "detection",
        "aleph": plan.aleph,
        "backend": plan.backend,
        "corrections": plan.effective_corrections(),
        "arms": summary_arms,
        "csv": csv_path,
    }
    with open(os.path.join(out_dir, "detection_summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if plots:
        summary["plots"] = emit_plots(csv_path)
    return summary


def run_recovery_experiment(
    plan: ExperimentPlan, out_dir: str, workers: int = 1, plots: bool = False
) -> dict:
    """Planted trials per arm; per variant records the normalized planted
    correlation (value) and Frobenius cosine, plus a projected "all_hat" row
    per trial when projection is on; writes recovery.csv."""
    if plan.kind != "recovery":
        raise InvalidParams(f"plan kind is {plan.kind!r}, expected recovery")
    os.makedirs(out_dir, exist_ok=True)
    tasks = _make_tasks(plan, ("P",))
    results = _run_tasks(tasks, workers)

    records: list[ExperimentRecord] = []
    arm_fields = {i: _arm_threshold_fields(plan.arm_params(i)) for i in range(len(plan.sweep))}
    slack_by_arm: dict[str, list[float]] = {}
    overlap_by_arm: dict[str, list[float]] = {}
    iters_by_arm: dict[str, list[int]] = {}
    for task, result in zip(tasks, results):
        label = plan.arm_label(task["arm_idx"])
        F_intro, F_sec3, sp = arm_fields[task["arm_idx"]]
        for row in result["rows"]:
            records.append(
                ExperimentRecord(
                    arm=label,
                    hypothesis="P",
                    seed=task["seed"],
                    variant=row["variant"],
                    value=row["value"],
                    F_intro=F_intro,
                    F_sec3=F_sec3,
                    sigma_plus=sp,
                    cosine=row["cosine"],
                    elapsed=result["elapsed"],
                )
            )
            if row["variant"] == "all_hat":
                slack_by_arm.setdefault(label, []).append(row["slack"])
                iters_by_arm.setdefault(label, []).append(row["proj_iters"])
                if "overlap" in row:
                    overlap_by_arm.setdefault(label, []).append(row["overlap"])

    summary_arms = []
    for arm_idx in range(len(plan.sweep)):
        label = plan.arm_label(arm_idx)
        F_intro, F_sec3, sp = arm_fields[arm_idx]
        variants = list(plan.statistic_variants)
        if plan.project:
            variants.append("all_hat")
        mean_value = {}
        mean_cosine = {}
        for variant in variants:
            vals = [r.value for r in records if r.arm == label and r.variant == variant]
            coss = [r.cosine for r in records if r.arm == label and r.variant == variant]
            if vals:
                mean_value[variant] = float(np.mean(vals))
                mean_cosine[variant] = float(np.mean(coss))
        arm_summary = {
            "label": label,
            "params": plan.arm_params(arm_idx).to_dict(),
            "F_intro": F_intro,
            "F_sec3": F_sec3,
            "sigma_plus": sp,
            "mean_value": mean_value,
            "mean_cosine": mean_cosine,
            "trials": plan.trials,
        }
        if label in slack_by_arm:
            arm_summary["max_constraint_slack"] = max(slack_by_arm[label])
            arm_summary["max_projection_iters"] = max(iters_by_arm[label])
        if label in overlap_by_arm:
            arm_summary["mean_overlap"] = float(np.mean(overlap_by_arm[label]))
        summary_arms.append(arm_summary)

    csv_path = os.path.join(out_dir, "recovery.csv")
    _write_csv(csv_path, records)
    summary = {
        "kind": "recovery",
        "aleph": plan.aleph,
        "backend": plan.backend,
        "corrections": plan.effective_corrections(),
        "floor": plan.floor if plan.project else None,
        "arms": summary_arms,
        "csv": csv_path,
    }
    with open(os.path.join(out_dir, "recovery_summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if plots:
        summary["plots"] = emit_plots(csv_path)
    return summary


# ---------------------------------------------------------------------------
# SVG emission
# ---------------------------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _read_csv(csv_path: str) -> list[dict]:
    with open(csv_path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CSV_TAG:
        raise SchemaMismatch(f"{csv_path}: missing {CSV_TAG} header line")
    if len(lines) < 2 or tuple(lines[1].split(",")) != CSV_COLUMNS:
        raise SchemaMismatch(f"{csv_path}: column header does not match {','.join(CSV_COLUMNS)}")
    rows = []
    for line in lines[2:]:
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != len(CSV_COLUMNS):
            raise SchemaMismatch(f"{csv_path}: row with {len(cells)} cells")
        rows.append(dict(zip(CSV_COLUMNS, cells)))
    if not rows:
        raise SchemaMismatch(f"{csv_path}: no data rows")
    return rows


def _px(x: float) -> str:
    return f"{x:.2f}"


def _svg_header(width: int, height: int) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
    )


def _polyline(points: list[tuple[float, float]], color: str) -> str:
    coords = " ".join(f"{_px(x)},{_px(y)}" for x, y in points)
    return f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>\n'


def _text(x: float, y: float, s: str, size: int = 11, anchor: str = "start") -> str:
    return (
        f'<text x="{_px(x)}" y="{_px(y)}" font-family="monospace" font-size="{size}" '
        f'text-anchor="{anchor}">{s}</text>\n'
    )


def _axes(x0: float, y0: float, x1: float, y1: float) -> str:
    # plot box: (x0, y0) bottom-left, (x1, y1) top-right in pixel coords
    return (
        f'<rect x="{_px(x0)}" y="{_px(y1)}" width="{_px(x1 - x0)}" height="{_px(y0 - y1)}" '
        f'fill="none" stroke="black" stroke-width="1"/>\n'
    )


def _safe_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", label)


def _emit_roc_svg(csv_path: str, rows: list[dict]) -> list[str]:
    out_dir = os.path.dirname(os.path.abspath(csv_path))
    arms: list[str] = []
    for row in rows:
        if row["arm"] not in arms:
            arms.append(row["arm"])
    variants: list[str] = []
    for row in rows:
        if row["variant"] not in variants:
            variants.append(row["variant"])
    paths = []
    for arm in arms:
        W, H, m = 520, 470, 60
        x0, y0, x1, y1 = m, H - m, m + 380, H - m - 380
        svg = _svg_header(W, H)
        svg += _axes(x0, y0, x1, y1)
        svg += _polyline([(x0, y0), (x1, y1)], "#bbbbbb")
        svg += _text((x0 + x1) / 2, y0 + 30, "false positive rate", anchor="middle")
        svg += _text(x0 - 35, (y0 + y1) / 2, "TPR", anchor="middle")
        for t in (0.0, 0.5, 1.0):
            svg += _text(x0 + t * (x1 - x0), y0 + 14, f"{t:.1f}", size=9, anchor="middle")
            svg += _text(x0 - 8, y0 - t * (y0 - y1) + 3, f"{t:.1f}", size=9, anchor="end")
        legend_y = y1 + 14
        for vi, variant in enumerate(variants):
            p_scores = [
                float(r["value"]) for r in rows
                if r["arm"] == arm and r["variant"] == variant and r["hypothesis"] == "P"
            ]
            q_scores = [
                float(r["value"]) for r in rows
                if r["arm"] == arm and r["variant"] == variant and r["hypothesis"] == "Q"
            ]
            if not p_scores or not q_scores:
                continue
            pts = roc_points(p_scores, q_scores)
            pix = [(x0 + fx * (x1 - x0), y0 - ty * (y0 - y1)) for fx, ty in pts]
            color = _PALETTE[vi % len(_PALETTE)]
            svg += _polyline(pix, color)
            auc = auc_rank(p_scores, q_scores)
            svg += _text(x1 + 6, legend_y, f"{variant} AUC={auc:.3f}", size=10)
            svg += _polyline([(x1 + 6, legend_y - 10), (x1 + 2, legend_y - 10)], color)
            legend_y += 16
        svg += _text((x0 + x1) / 2, y1 - 8, f"ROC {arm}", size=13, anchor="middle")
        svg += "</svg>\n"
        path = os.path.join(out_dir, f"roc_{_safe_name(arm)}.svg")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(svg)
        paths.append(path)
    return paths


def _emit_cosine_svg(csv_path: str, rows: list[dict]) -> list[str]:
    out_dir = os.path.dirname(os.path.abspath(csv_path))
    arms: list[str] = []
    for row in rows:
        if row["arm"] not in arms:
            arms.append(row["arm"])
    variants: list[str] = []
    for row in rows:
        if row["variant"] not in variants:
            variants.append(row["variant"])
    F_of_arm = {arm: float(next(r["F_intro"] for r in rows if r["arm"] == arm)) for arm in arms}
    arms_sorted = sorted(arms, key=lambda a: F_of_arm[a])
    fmin, fmax = F_of_arm[arms_sorted[0]], F_of_arm[arms_sorted[-1]]
    if fmax == fmin:
        fmax = fmin + 1.0
    ymin, ymax = -0.2, 1.0

    W, H, m = 560, 420, 60
    x0, y0, x1, y1 = m, H - m, W - 130, m
    svg = _svg_header(W, H)
    svg += _axes(x0, y0, x1, y1)
    svg += _text((x0 + x1) / 2, y0 + 30, "F", anchor="middle")
    svg += _text(x0 - 35, (y0 + y1) / 2, "cosine", anchor="middle")
    for arm in arms_sorted:
        fx = x0 + (F_of_arm[arm] - fmin) / (fmax - fmin) * (x1 - x0)
        svg += _text(fx, y0 + 14, f"{F_of_arm[arm]:.2f}", size=9, anchor="middle")
    for t in (0.0, 0.5, 1.0):
        ty = y0 - (t - ymin) / (ymax - ymin) * (y0 - y1)
        svg += _text(x0 - 8, ty + 3, f"{t:.1f}", size=9, anchor="end")
    legend_y = y1 + 14
    for vi, variant in enumerate(variants):
        pts = []
        for arm in arms_sorted:
            coss = [
                float(r["cosine"]) for r in rows
                if r["arm"] == arm and r["variant"] == variant and r["cosine"] != ""
            ]
            if not coss:
                continue
            mean_cos = float(np.mean(coss))
            fx = x0 + (F_of_arm[arm] - fmin) / (fmax - fmin) * (x1 - x0)
            ty = y0 - (mean_cos - ymin) / (ymax - ymin) * (y0 - y1)
            pts.append((fx, ty))
        if not pts:
            continue
        color = _PALETTE[vi % len(_PALETTE)]
        svg += _polyline(pts, color)
        svg += _text(x1 + 6, legend_y, variant, size=10)
        svg += _polyline([(x1 + 6, legend_y - 10), (x1 + 2, legend_y - 10)], color)
        legend_y += 16
    svg += _text((x0 + x1) / 2, y1 - 8, "mean cosine vs F", size=13, anchor="middle")
    svg += "</svg>\n"
    path = os.path.join(out_dir, "cosine.svg")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    return [path]


def emit_plots(csv_path: str) -> list[str]:
    """ROC SVGs (detection CSV) or a cosine-vs-F SVG (recovery CSV)."""
    rows = _read_csv(csv_path)
    if any(r["hypothesis"] == "Q" for r in rows):
        return _emit_roc_svg(csv_path, rows)
    return _emit_cosine_svg(csv_path, rows)
