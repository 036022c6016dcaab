"""Command-line interface.

Subcommands: sample, threshold, families, detect, recover, experiment,
verify.  Non-CSV commands print a machine-readable JSON document on stdout;
errors go to stderr as one JSON line with the error name and a remedy.

Exit codes: 0 success, 1 validation/usage error, 2 verification failure.

Heavy imports are deferred until after the thread environment is configured,
so --threads / CMSBM_THREADS can pin the BLAS pool before numpy loads.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

from .errors import CmsbmError, DominanceViolated

_REMEDIES = {
    "InvalidParams": "fix the rejected field in the params/plan file",
    "IndexOutOfRange": "use a layer index between 0 and L-1",
    "InfeasibleSize": "increase n and p or decrease aleph",
    "BudgetExceeded": "shrink aleph or L, or raise the operation budget",
    "PartitionBudgetExceeded": "use the exact backend or keep aleph <= 6",
    "NoConvergence": "raise --proj-max-iters or loosen --proj-tol",
    "Infeasible": "lower --floor to at most 1",
    "MissingTruth": "run on a planted sample (drop --null)",
    "DominanceViolated": "implementation regression; inspect the verify report",
    "SchemaMismatch": "regenerate the CSV/plan with this package version",
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1 instead of argparse's 2
        raise _UsageError(message)


def _setup_threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("CMSBM_THREADS", "").strip()
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise _UsageError(f"CMSBM_THREADS={env!r} is not an integer")
        else:
            threads = 1
    if threads < 1:
        raise _UsageError(f"thread count must be >= 1, got {threads}")
    for var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        os.environ.setdefault(var, str(threads))
    return threads


def _emit(obj: dict) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _finite_or_none(x: float) -> float | None:
    return float(x) if math.isfinite(x) else None


def _load_validated_params(path: str):
    from .model import load_params, validate_params

    params = load_params(path)
    validate_params(params)
    return params


def _resolve_observation(args):
    """Either load a saved observation directory or sample a fresh one."""
    from .model import load_observation, sample_null, sample_planted

    if getattr(args, "obs", None):
        obs, params = load_observation(args.obs)
        return obs, params
    params = _load_validated_params(args.params)
    sampler = sample_null if getattr(args, "null", False) else sample_planted
    return sampler(params, args.seed), params


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_sample(args) -> int:
    from .model import sample_null, sample_planted, save_observation

    params = _load_validated_params(args.params)
    sampler = sample_null if args.null else sample_planted
    obs = sampler(params, args.seed)
    save_observation(obs, params, args.out)
    _emit(
        {
            "out": args.out,
            "provenance": obs.provenance,
            "seed": args.seed,
            "n": params.n,
            "p": params.p,
            "L": params.L,
            "edge_counts": [layer.edge_count for layer in obs.layers],
        }
    )
    return 0


def _cmd_threshold(args) -> int:
    from .thresholds import chi2_surrogate, interaction_matrix, sigma_plus, threshold_F

    params = _load_validated_params(args.params)
    F_intro = threshold_F(params)
    surrogate = chi2_surrogate(params)
    _emit(
        {
            "F_intro": float(F_intro),
            "F_sec3": float(threshold_F(params, variant="sec3")),
            "sigma_plus": float(sigma_plus(interaction_matrix(params))),
            "chi2_surrogate_t0": _finite_or_none(surrogate.value),
            "chi2_divergence_reason": surrogate.divergence_reason,
            "feasible_detection": bool(F_intro > 1.0),
        }
    )
    return 0


def _cmd_families(args) -> int:
    from .families import enumerate_cycles, enumerate_paths

    params = _load_validated_params(args.params)
    if args.topology == "cycle":
        fam = enumerate_cycles(args.aleph, params, color_restrict=args.color)
    else:
        fam = enumerate_paths(args.aleph, params, color_restrict=args.color)
    color_cols = [f"c{c}" for c in range(params.L + 1)]
    lines = ["topology,canonical_word,aut,dif0,dif," + ",".join(color_cols) + ",xi"]
    for fc in fam.classes:
        word = "-".join(str(c) for c in fc.word.letters)
        counts = ",".join(str(c) for c in fc.counts)
        lines.append(f"{fam.topology},{word},{fc.aut},{fc.dif0},{fc.dif},{counts},{fc.xi!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_detect(args) -> int:
    from .statistics import StatisticConfig, detection_statistic

    obs, params = _resolve_observation(args)
    cfg = StatisticConfig(
        aleph=args.aleph,
        backend=args.backend,
        threshold_c=args.c,
        b_collision_correction=args.corrections == "on",
        color_restrict=args.color,
        op_budget=args.op_budget,
    )
    report = detection_statistic(obs, params, cfg)
    _emit(
        {
            "value": float(report.value),
            "beta": float(report.beta),
            "tau": float(report.tau),
            "decision": bool(report.decision),
            "elapsed": float(report.elapsed),
            "backend": report.backend,
            "aleph": report.aleph,
            "provenance": obs.provenance,
        }
    )
    return 0


def _cmd_recover(args) -> int:
    import numpy as np

    from .model import save_matrix
    from .rounding import ProjectionConfig, metrics, psd_project, sign_round
    from .statistics import StatisticConfig, recovery_matrix

    obs, params = _resolve_observation(args)
    cfg = StatisticConfig(
        aleph=args.aleph,
        backend=args.backend,
        b_collision_correction=args.corrections == "on",
        color_restrict=args.color,
        op_budget=args.op_budget,
    )
    report = recovery_matrix(obs, params, cfg)
    proj_cfg = ProjectionConfig(
        correlation_floor=args.floor, max_iters=args.proj_max_iters, tol=args.proj_tol
    )
    estimate = psd_project(report.matrix, proj_cfg)
    round_seed = args.seed if args.round_seed is None else args.round_seed
    x_hat = sign_round(estimate, round_seed)

    os.makedirs(args.out, exist_ok=True)
    phi_path = os.path.join(args.out, "phi.bin")
    phi_hat_path = os.path.join(args.out, "phi_hat.bin")
    save_matrix(phi_path, report.matrix)
    save_matrix(phi_hat_path, estimate.phi_hat)

    quality = {"raw": None, "projected": None, "overlap": None}
    if obs.truth is not None:
        quality["raw"] = metrics(report.matrix, obs.truth)["cosine"]
        quality["projected"] = metrics(estimate.phi_hat, obs.truth)["cosine"]
        quality["overlap"] = metrics(x_hat.astype(float), obs.truth)["overlap"]

    diagnostics = {
        "projection": {k: float(v) for k, v in estimate.diagnostics.items()},
        "beta": float(report.beta),
        "elapsed": float(report.elapsed),
        "backend": report.backend,
        "aleph": report.aleph,
        "round_seed": int(round_seed),
        "quality": quality,
        "x_hat": [int(v) for v in np.asarray(x_hat)],
    }
    sidecar = os.path.join(args.out, "diagnostics.json")
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(diagnostics, fh, indent=2, sort_keys=True)
        fh.write("\n")

    _emit(
        {
            "out": args.out,
            "phi": phi_path,
            "phi_hat": phi_hat_path,
            "diagnostics": sidecar,
            "constraint_slack": diagnostics["projection"]["constraint_slack"],
            "projection_iters": int(diagnostics["projection"]["iters"]),
            "quality": quality,
        }
    )
    return 0


def _cmd_experiment(args) -> int:
    from .harness import load_plan, run_detection_experiment, run_recovery_experiment

    plan = load_plan(args.plan)
    workers = args.workers if args.workers is not None else args.resolved_threads
    runner = run_detection_experiment if plan.kind == "detection" else run_recovery_experiment
    summary = runner(plan, args.out, workers=workers, plots=args.plots)
    summary["workers"] = workers
    _emit(summary)
    return 0


def _cmd_verify(args) -> int:
    report = _verify_suite()
    _emit(report)
    return 0 if report["pass"] else 2


def _verify_suite() -> dict:
    """Cross-checks of every fast path against an independent route."""
    import numpy as np

    from .families import enumerate_cycles, enumerate_paths
    from .harness import auc_rank, auc_trapezoid
    from .model import ModelParams, sample_null, sample_planted
    from .oracles import brute_force_detection, brute_force_recovery, moment_dominance_suite
    from .statistics import StatisticConfig, detection_statistic, recovery_matrix
    from .thresholds import interaction_matrix, sigma_plus, threshold_F, word_recursion

    checks: list[dict] = []

    def add(name: str, ok: bool, detail) -> None:
        checks.append({"name": name, "pass": bool(ok), "detail": detail})

    # Sign-vector moments never exceed their Gaussian surrogates.
    try:
        suite = moment_dominance_suite()
        add("moment_dominance", True, {"checked": suite["checked"], "max_gap": suite["max_gap"]})
    except DominanceViolated as exc:
        add("moment_dominance", False, str(exc))

    # Fast backends against the literal brute-force statistic.
    worst_det = 0.0
    for L in (1, 2):
        params = ModelParams(n=10, p=5, L=L, mu=0.6, rho=0.6, lam=(2.0,) * L, eps=(0.4,) * L)
        for seed in (0, 1):
            for sampler in (sample_planted, sample_null):
                obs = sampler(params, seed)
                ref = brute_force_detection(obs, params, aleph=3)
                scale = max(abs(ref), 1e-9)
                for backend in ("exact", "transfer"):
                    got = detection_statistic(
                        obs, params, StatisticConfig(aleph=3, backend=backend)
                    ).value
                    worst_det = max(worst_det, abs(got - ref) / scale)
    add("detection_vs_bruteforce", worst_det <= 1e-10, {"worst_rel_err": worst_det})

    worst_rec = 0.0
    params = ModelParams(n=8, p=4, L=1, mu=0.6, rho=0.6, lam=(2.0,), eps=(0.4,))
    for aleph in (1, 2):
        for seed in (0, 1):
            obs = sample_planted(params, seed)
            ref = brute_force_recovery(obs, params, aleph=aleph)
            scale = max(float(np.abs(ref).max()), 1e-9)
            for backend in ("exact", "transfer"):
                got = recovery_matrix(
                    obs, params, StatisticConfig(aleph=aleph, backend=backend)
                ).matrix
                worst_rec = max(worst_rec, float(np.abs(got - ref).max()) / scale)
    add("recovery_vs_bruteforce", worst_rec <= 1e-10, {"worst_rel_err": worst_rec})

    # Exact vs transfer beyond the brute-force range.
    params = ModelParams(n=30, p=15, L=2, mu=0.5, rho=0.6, lam=(3.0, 3.0), eps=(0.5, 0.5))
    worst_pair = 0.0
    for seed in (0, 1):
        obs = sample_planted(params, seed)
        ex = detection_statistic(obs, params, StatisticConfig(aleph=3, backend="exact")).value
        tr = detection_statistic(obs, params, StatisticConfig(aleph=3, backend="transfer")).value
        worst_pair = max(worst_pair, abs(ex - tr) / max(abs(ex), 1e-9))
    add("exact_vs_transfer", worst_pair <= 1e-8, {"worst_rel_err": worst_pair})

    # Family normalizers against their closed-form routes.
    worst_beta = 0.0
    for L in (1, 2):
        params = ModelParams(n=100, p=50, L=L, mu=0.5, rho=0.6, lam=(3.0,) * L, eps=(0.5,) * L)
        P = interaction_matrix(params).entries
        for aleph in range(3, 7):
            beta = enumerate_cycles(aleph, params).beta
            trace = float(np.trace(np.linalg.matrix_power(P, aleph)))
            worst_beta = max(worst_beta, abs(beta - trace / (2 * aleph)) / max(trace / (2 * aleph), 1e-12))
        for aleph in range(1, 7):
            beta = enumerate_paths(aleph, params).beta
            expected = float(word_recursion(params, aleph).sum() / 2.0)
            worst_beta = max(worst_beta, abs(beta - expected) / max(expected, 1e-12))
    add("beta_dual_route", worst_beta <= 1e-12, {"worst_rel_err": worst_beta})

    # AUC rank statistic against trapezoidal ROC integration.
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(17)))
    worst_auc = 0.0
    for _ in range(20):
        p = np.round(rng.standard_normal(50) + 0.4, 1)
        q = np.round(rng.standard_normal(45), 1)
        worst_auc = max(worst_auc, abs(auc_rank(p, q) - auc_trapezoid(p, q)))
    add("auc_dual_route", worst_auc <= 1e-12, {"worst_abs_err": worst_auc})

    # Spectral and scan-form thresholds agree on which side of 1 they sit.
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(18)))
    agree = True
    checked = 0
    while checked < 300:
        L = int(rng.integers(1, 4))
        params = ModelParams(
            n=1000,
            p=int(1000 / rng.uniform(0.5, 4.0)),
            L=L,
            mu=float(rng.uniform(0.0, 1.5)),
            rho=float(rng.uniform(0.0, 1.0)),
            lam=tuple(float(v) for v in rng.uniform(0.5, 12.0, L)),
            eps=tuple(float(v) for v in rng.uniform(0.05, 0.95, L)),
        )
        F = threshold_F(params)
        if abs(F - 1.0) <= 0.02:
            continue
        sp = sigma_plus(interaction_matrix(params))
        agree = agree and ((sp >= 1.0) == (F >= 1.0))
        checked += 1
    add("threshold_sign_agreement", agree, {"checked": checked})

    return {"checks": checks, "pass": all(c["pass"] for c in checks)}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="cmsbm", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker/BLAS thread count (default: CMSBM_THREADS env var, else 1)",
    )
    parser.add_argument(
        "--log-level",
        default="warning",
        choices=("debug", "info", "warning", "error"),
        help="logging verbosity",
    )
    parser.set_defaults(func=None)
    sub = parser.add_subparsers(dest="command")

    def add_params(p, required=True):
        p.add_argument("--params", required=required, help="model params file (JSON or TOML)")

    def add_obs_source(p):
        add_params(p, required=False)
        p.add_argument("--obs", help="saved observation directory (overrides --params sampling)")
        p.add_argument("--seed", type=int, default=0, help="sampling seed")
        p.add_argument("--null", action="store_true", help="sample from the no-signal law")

    p = sub.add_parser("sample", help="draw one observation and save it to a directory")
    add_params(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--null", action="store_true", help="sample from the no-signal law")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("threshold", help="print the detection threshold report as JSON")
    add_params(p)
    p.set_defaults(func=_cmd_threshold)

    p = sub.add_parser("families", help="enumerate decorated shape classes as CSV")
    add_params(p)
    p.add_argument("--aleph", type=int, required=True, help="number of letters")
    p.add_argument("--topology", choices=("cycle", "path"), default="cycle")
    p.add_argument("--color", type=int, default=None, help="restrict to one color")
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")
    p.set_defaults(func=_cmd_families)

    p = sub.add_parser("detect", help="evaluate the detection statistic on one sample")
    add_obs_source(p)
    p.add_argument("--aleph", type=int, required=True)
    p.add_argument("--backend", choices=("exact", "transfer"), default="transfer")
    p.add_argument("--c", type=float, default=0.5, help="threshold constant in tau = c sqrt(beta)")
    p.add_argument("--corrections", choices=("on", "off"), default="on",
                   help="feature-collision corrections in the transfer backend")
    p.add_argument("--color", type=int, default=None, help="monochromatic baseline color")
    p.add_argument("--op-budget", type=float, default=1e11)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("recover", help="estimate the labeling: statistic, projection, rounding")
    add_obs_source(p)
    p.add_argument("--aleph", type=int, required=True)
    p.add_argument("--backend", choices=("exact", "transfer"), default="transfer")
    p.add_argument("--corrections", choices=("on", "off"), default="on")
    p.add_argument("--color", type=int, default=None)
    p.add_argument("--floor", type=float, default=0.05, help="correlation floor of the projection")
    p.add_argument("--proj-max-iters", type=int, default=5000)
    p.add_argument("--proj-tol", type=float, default=1e-8)
    p.add_argument("--round-seed", type=int, default=None, help="rounding seed (default: --seed)")
    p.add_argument("--op-budget", type=float, default=1e11)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_recover)

    p = sub.add_parser("experiment", help="run a sweep plan and write CSV + summary")
    p.add_argument("--plan", required=True, help="plan file (JSON or TOML)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--plots", action="store_true", help="also write SVG plots")
    p.add_argument("--workers", type=int, default=None, help="process count (default: --threads)")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("verify", help="run the oracle cross-check suite (exit 2 on failure)")
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        resolved = _setup_threads(args.threads)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=getattr(logging, args.log_level.upper()))
    if args.func is None:
        print("usage error: a subcommand is required (see cmsbm --help)", file=sys.stderr)
        return 1
    args.resolved_threads = resolved
    try:
        return args.func(args)
    except CmsbmError as exc:
        name = type(exc).__name__
        print(
            json.dumps(
                {"error": name, "message": str(exc), "remedy": _REMEDIES.get(name, "see README")}
            ),
            file=sys.stderr,
        )
        return 1
    except OSError as exc:
        print(
            json.dumps(
                {
                    "error": type(exc).__name__,
                    "message": str(exc),
                    "remedy": "check that the input path exists and is readable",
                }
            ),
            file=sys.stderr,
        )
        return 1
    except ValueError as exc:  # malformed JSON/TOML and kindred parse errors
        print(
            json.dumps(
                {
                    "error": type(exc).__name__,
                    "message": str(exc),
                    "remedy": "fix the malformed input file or flag value",
                }
            ),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
