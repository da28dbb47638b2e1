"""Experiment runner CLI: run / tune / certify / check-invariants."""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import math
import os
import shutil
import sys
from pathlib import Path

import numpy as np
import yaml

from . import algorithms, config, diagnostics, hruc, invariants, kernels, \
    network, problems
from .errors import DualmixError

OUTPUT_ROOT_ENV = "DUALMIX_OUT"


# ---------------------------------------------------------------------------
# Experiment assembly
# ---------------------------------------------------------------------------


def build_problem(cfg: config.ExperimentConfig, seed: int):
    spec = dict(cfg.problem)
    spec["seed"] = seed  # batch seed replaces the spec seed per replica
    return problems.problem_from_spec(spec)


def build_kernel(cfg: config.ExperimentConfig, dim: int):
    return kernels.kernel_from_spec(cfg.kernel, dim)


def build_mixing(cfg: config.ExperimentConfig, m: int):
    graph = network.graph_from_spec(cfg.graph, m)
    return network.metropolis_weights(graph)


def resolve_L(cfg, prob, kernel, seed) -> float:
    if cfg.L is not None:
        return float(cfg.L)
    if "L_exact" in prob.meta:
        return float(prob.meta["L_exact"])
    return problems.estimate_rel_smoothness(prob, kernel, n_samples=50,
                                            seed=[seed, 23])


def _algo_cfg(spec: dict, max_iter_override=None) -> algorithms.AlgoConfig:
    return algorithms.AlgoConfig(
        algorithm=spec["kind"],
        eta=float(spec.get("eta", 0.1)),
        delta=float(spec.get("delta", math.inf)),
        max_iter=int(max_iter_override if max_iter_override is not None
                     else spec.get("max_iter", 1000)),
        y0=spec.get("y0", "grad"),
    )


def kernel_for_algorithm(kind: str, kernel, x0):
    """DDA runs over the kernel shifted so the initial point minimizes it."""
    if kind != "dda":
        return kernel
    shift = np.asarray(x0, dtype=float) - kernel.minimizer()
    return kernels.shifted(kernel, shift)


def execute_run(cfg, algo_spec, seed, *, max_iter=None, record_every=1,
                eta=None, delta=None, run_id=None):
    """Build and execute one (algorithm, seed) cell; returns (result, meta)."""
    prob = build_problem(cfg, seed)
    kernel = build_kernel(cfg, prob.d)
    mix = build_mixing(cfg, prob.m)
    x0 = config.initial_point(cfg, prob, kernel, seed)
    L = resolve_L(cfg, prob, kernel, seed)
    spec = dict(algo_spec)
    if eta is not None:
        spec["eta"] = eta
    if delta is not None:
        spec["delta"] = delta
    if spec.get("eta") == "auto" or spec.get("delta") == "auto":
        eta_auto, delta_auto, _ = algorithms.compliant_parameters(
            kernel, L, mix.rho, prob.m)
        if spec.get("eta") == "auto":
            spec["eta"] = eta_auto
        if spec.get("delta") == "auto":
            spec["delta"] = delta_auto
    acfg = _algo_cfg(spec, max_iter)
    run_kernel = kernel_for_algorithm(acfg.algorithm, kernel, x0)
    rid = run_id or f"{acfg.algorithm}_s{seed}"
    result = algorithms.run(prob, run_kernel, mix, acfg, x0, L=L,
                            run_id=rid, record_every=record_every)
    meta = {"rho": mix.rho, "L": L, "eta": acfg.eta, "delta": acfg.delta,
            "graph_retries": getattr(mix.graph, "retries", 0), "seed": seed,
            "run_id": rid, "algorithm": acfg.algorithm}
    return result, meta


# ---------------------------------------------------------------------------
# Tuning
# ---------------------------------------------------------------------------


def _final_metric(result, metric: str) -> float:
    if result.status == "diverged":
        return math.inf
    rec = result.records[-1]
    val = getattr(rec, metric)
    return val if math.isfinite(val) else math.inf


def tune(cfg: config.ExperimentConfig, threads=1, max_iter=None) -> dict:
    """Grid-search eta (and delta for dmgt) per algorithm.

    Every cell runs for the full iteration budget on every seed; a cell's
    score is the seed-mean of the final selection metric, diverged runs
    scoring worst.  Ties break toward smaller eta, then smaller delta.
    """
    metric = cfg.tuning["select_by"]
    cells = []
    for ai, spec in enumerate(cfg.algorithms):
        etas = cfg.tuning["eta_grid"]
        deltas = cfg.tuning["delta_grid"] if spec["kind"] == "dmgt" else [None]
        for eta in etas:
            for delta in deltas:
                for seed in cfg.seeds:
                    cells.append((ai, float(eta),
                                  None if delta is None else float(delta), seed))

    def work(cell):
        ai, eta, delta, seed = cell
        result, _ = execute_run(cfg, cfg.algorithms[ai], seed,
                                max_iter=max_iter, record_every=0,
                                eta=eta, delta=delta)
        return cell, _final_metric(result, metric)

    scores = {}
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as ex:
            for cell, val in ex.map(work, cells):
                scores[cell] = val
    else:
        for cell in cells:
            _, val = work(cell)
            scores[cell] = val

    table = {}
    for ai, spec in enumerate(cfg.algorithms):
        etas = cfg.tuning["eta_grid"]
        deltas = cfg.tuning["delta_grid"] if spec["kind"] == "dmgt" else [None]
        best = None
        for eta in etas:
            for delta in deltas:
                vals = [scores[(ai, float(eta),
                                None if delta is None else float(delta), s)]
                        for s in cfg.seeds]
                mean = math.inf if any(not math.isfinite(v) for v in vals) \
                    else sum(vals) / len(vals)
                key = (mean, float(eta),
                       math.inf if delta is None else float(delta))
                if best is None or key < best[0]:
                    best = (key, eta, delta, mean)
        _, eta, delta, mean = best
        name = f"{spec['kind']}#{ai}"
        if not math.isfinite(mean):
            table[name] = {"kind": spec["kind"], "status": "all-diverged",
                           "eta": None, "delta": None, "metric": None}
        else:
            table[name] = {"kind": spec["kind"], "status": "ok",
                           "eta": float(eta),
                           "delta": None if delta is None else float(delta),
                           "metric": mean}
    return table


# ---------------------------------------------------------------------------
# Batch execution
# ---------------------------------------------------------------------------


def run_batch(cfg: config.ExperimentConfig, out_dir, threads=1,
              max_iter=None) -> dict:
    """Run every (algorithm, seed) cell and write CSVs, plot data, manifest.

    Outputs are byte-deterministic for a fixed config: every cell is an
    independent deterministic computation and files are written serially in
    sorted order after all cells complete.  The manifest is written last as
    the commit marker; on failure, partial outputs are removed.
    """
    out = Path(out_dir)
    created = not out.exists()
    out.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        cells = [(ai, seed) for ai in range(len(cfg.algorithms))
                 for seed in cfg.seeds]

        def work(cell):
            ai, seed = cell
            rid = f"{ai:02d}_{cfg.algorithms[ai]['kind']}_s{seed}"
            return cell, execute_run(cfg, cfg.algorithms[ai], seed,
                                     max_iter=max_iter, record_every=1,
                                     run_id=rid)

        results = {}
        if threads > 1:
            with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as ex:
                for cell, payload in ex.map(work, cells):
                    results[cell] = payload
        else:
            for cell in cells:
                results[cell] = work(cell)[1]

        finite_f = [r.f_bar
                    for result, _ in results.values()
                    for r in result.records if math.isfinite(r.f_bar)]
        f_star = min(finite_f) if finite_f else math.nan
        for result, _ in results.values():
            for r in result.records:
                if math.isfinite(r.f_bar):
                    r.rel_error = r.f_bar - f_star

        csv_files = []
        for cell in sorted(results):
            result, meta = results[cell]
            fname = f"run_{meta['run_id']}.csv"
            path = out / fname
            path.write_text(diagnostics.records_to_csv(result.records),
                            encoding="utf-8")
            written.append(path)
            csv_files.append(fname)

        for metric in ("stationarity", "rel_error", "f_bar"):
            path = out / f"plot_{metric}.csv"
            path.write_text(_plot_data(results, metric), encoding="utf-8")
            written.append(path)

        manifest = {
            "config": yaml.safe_load(config.serialize(cfg)),
            "config_hash": hashlib.sha256(
                config.serialize(cfg).encode()).hexdigest(),
            "seeds": cfg.seeds,
            "f_star": None if math.isnan(f_star) else f_star,
            "runs": [
                {k: results[cell][1][k]
                 for k in ("run_id", "algorithm", "seed", "eta", "delta",
                           "rho", "L", "graph_retries")}
                | {"status": results[cell][0].status,
                   "diverged_at": results[cell][0].diverged_at}
                for cell in sorted(results)
            ],
            "csv_files": csv_files,
        }
        for entry in manifest["runs"]:
            if entry["delta"] is not None and math.isinf(entry["delta"]):
                entry["delta"] = "inf"
        mpath = out / "manifest.json"
        mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                         encoding="utf-8")
        written.append(mpath)
        return manifest
    except Exception:
        for p in written:
            p.unlink(missing_ok=True)
        if created:
            shutil.rmtree(out, ignore_errors=True)
        raise


def _plot_data(results, metric) -> str:
    ids = [meta["run_id"] for _, meta in
           (results[c] for c in sorted(results))]
    series = {}
    tmax = 0
    for cell in sorted(results):
        result, meta = results[cell]
        vals = {r.t: getattr(r, metric) for r in result.records}
        series[meta["run_id"]] = vals
        tmax = max(tmax, max(vals) if vals else 0)
    lines = ["t," + ",".join(ids)]
    for t in range(tmax + 1):
        row = [str(t)]
        for rid in ids:
            v = series[rid].get(t)
            row.append("" if v is None or not math.isfinite(v)
                       else f"{v:.17g}")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def _resolve_out(path_str) -> Path:
    p = Path(path_str)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not p.is_absolute():
        return Path(root) / p
    return p


def _cmd_run(args):
    cfg = config.parse_config(args.config)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    out = _resolve_out(args.out or cfg.output)
    manifest = run_batch(cfg, out, threads=args.threads, max_iter=args.max_iter)
    print(f"wrote {len(manifest['csv_files'])} run files to {out}")
    for entry in manifest["runs"]:
        print(f"  {entry['run_id']}: status={entry['status']} "
              f"eta={entry['eta']:g} rho={entry['rho']:.4f}")
    return 0


def _cmd_tune(args):
    cfg = config.parse_config(args.config)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    table = tune(cfg, threads=args.threads, max_iter=args.max_iter)
    any_diverged_all = False
    for name, row in table.items():
        if row["status"] == "all-diverged":
            any_diverged_all = True
            print(f"{name}: every grid cell diverged")
        else:
            delta = "" if row["delta"] is None else f" delta={row['delta']:g}"
            print(f"{name}: eta={row['eta']:g}{delta} "
                  f"({cfg.tuning['select_by']}={row['metric']:.6g})")
    if args.out:
        out = _resolve_out(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(table, indent=2, sort_keys=True) + "\n",
                       encoding="utf-8")
    return 1 if any_diverged_all and args.strict else 0


def _cmd_certify(args):
    spec = yaml.safe_load(args.kernel)
    if isinstance(spec, str):
        spec = {"kind": spec}
    kernel = kernels.kernel_from_spec(spec, args.dim)
    deltas = [float(s) for s in args.deltas.split(",")]
    report = hruc.certify(kernel, deltas, args.samples, args.seed,
                          floor=args.floor)
    print(report.summary())
    if args.out:
        out = _resolve_out(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(report.csv_rows(), encoding="utf-8")
        print(f"rows written to {out}")
    return 0 if report.consistent else 1


def _cmd_check(args):
    failures = invariants.run_all(verbose=True)
    print(f"{len(invariants.CHECKS) - failures}/{len(invariants.CHECKS)} "
          f"checks passed")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dualmix",
        description="Decentralized mirror-descent experiments")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="override the config seed list with one seed")
    common.add_argument("--out", default=None, help="output path")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--max-iter", type=int, default=None,
                        help="override every algorithm's iteration budget")

    pr = sub.add_parser("run", parents=[common],
                        help="run a batch and write CSV/plot data/manifest")
    pr.add_argument("config")
    pr.set_defaults(fn=_cmd_run)

    pt = sub.add_parser("tune", parents=[common],
                        help="grid-search step sizes per algorithm")
    pt.add_argument("config")
    pt.add_argument("--strict", action="store_true",
                    help="exit nonzero if an algorithm diverges everywhere")
    pt.set_defaults(fn=_cmd_tune)

    pc = sub.add_parser("certify", help="empirically certify a kernel modulus")
    pc.add_argument("--kernel", required=True,
                    help="YAML kernel spec, e.g. '{kind: power, mu: 1, r: 2}'")
    pc.add_argument("--dim", type=int, default=5)
    pc.add_argument("--deltas", default="0.01,0.1,1")
    pc.add_argument("--samples", type=int, default=1000)
    pc.add_argument("--seed", type=int, default=7)
    pc.add_argument("--floor", type=float, default=0.1,
                    help="near-boundary offset of the interior sampler")
    pc.add_argument("--out", default=None)
    pc.set_defaults(fn=_cmd_certify)

    pk = sub.add_parser("check-invariants",
                        help="execute the runnable property suite")
    pk.set_defaults(fn=_cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (DualmixError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
