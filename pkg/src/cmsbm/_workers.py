"""Process-pool worker for the experiment harness.

One task = one (arm, hypothesis, trial): sample the observation, evaluate
every requested statistic variant, optionally project and round.  BLAS is
pinned to one thread inside the computation so results are bit-identical
regardless of how many worker processes run.
"""

from __future__ import annotations

import time
from typing import Any

from threadpoolctl import threadpool_limits

from .model import ModelParams, sample_null, sample_planted
from .rounding import ProjectionConfig, metrics, psd_project, sign_round
from .statistics import StatisticConfig, detection_statistic, recovery_matrix


def variant_color(variant: str):
    """Map a variant name ("all" or "colorK") to a color restriction."""
    if variant == "all":
        return None
    if variant.startswith("color"):
        return int(variant[len("color") :])
    raise ValueError(f"unknown statistic variant {variant!r}")


def run_trial(task: dict[str, Any]) -> dict[str, Any]:
    """Evaluate all variants for one sampled observation; returns one row
    dict per emitted CSV row, in deterministic order."""
    params = ModelParams.from_dict(task["params"])
    start = time.perf_counter()
    rows: list[dict[str, Any]] = []
    with threadpool_limits(limits=1):
        sampler = sample_planted if task["hypothesis"] == "P" else sample_null
        obs = sampler(params, task["seed"])
        for variant in task["variants"]:
            cfg = StatisticConfig(
                aleph=task["aleph"],
                backend=task["backend"],
                threshold_c=task["threshold_c"],
                b_collision_correction=task["corrections"],
                color_restrict=variant_color(variant),
                op_budget=task["op_budget"],
            )
            if task["kind"] == "detection":
                rep = detection_statistic(obs, params, cfg)
                rows.append({"variant": variant, "value": rep.value, "cosine": None})
            else:
                rep = recovery_matrix(obs, params, cfg)
                x = obs.truth.x.astype(float)
                n = params.n
                rows.append(
                    {
                        "variant": variant,
                        "value": float(x @ rep.matrix @ x) / n**2,
                        "cosine": metrics(rep.matrix, obs.truth)["cosine"],
                    }
                )
                if variant == "all" and task.get("project", False):
                    est = psd_project(
                        rep.matrix,
                        ProjectionConfig(
                            correlation_floor=task["floor"],
                            max_iters=task["proj_max_iters"],
                            tol=task["proj_tol"],
                        ),
                    )
                    row = {
                        "variant": "all_hat",
                        "value": float(x @ est.phi_hat @ x) / n**2,
                        "cosine": metrics(est.phi_hat, obs.truth)["cosine"],
                        "slack": est.diagnostics["constraint_slack"],
                        "proj_iters": est.diagnostics["iters"],
                    }
                    if task.get("round", False):
                        x_hat = sign_round(est, task["seed"])
                        row["overlap"] = metrics(x_hat, obs.truth)["overlap"]
                    rows.append(row)
    return {"rows": rows, "elapsed": time.perf_counter() - start}
