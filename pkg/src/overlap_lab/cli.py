"""Command-line front end for the laboratory.

Subcommands: gen (datasets), poc (three-condition comparison with its
gate), sweep (topological-weight sweep with threshold detection),
stress (degradation protocols on a trained fused model), stats
(dip / gmm / pelt / tost / etr on CSV input), topo (persistence /
bottleneck / tsas on point-cloud and diagram CSVs).

Contract: exit 0 on success, 2 on usage or configuration errors, 3 when
a computation aborted. Reports are canonical JSON (sorted keys, no
timestamps) and re-running a command with identical flags and seed
reproduces them byte for byte; timestamps live only in manifest.json,
which every artifact-writing command writes before computing starts.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import datetime
import json
import subprocess
import sys
import warnings
from dataclasses import dataclass, field, replace
from os import environ
from pathlib import Path

import numpy as np

from . import __version__, model, stats, synth
from .exceptions import (
    FitError,
    OverlapLabError,
    ParameterError,
    StateError,
    StiffnessError,
    SweepError,
)
from .harness import (
    CONDITIONS,
    STRESS_MODES,
    ExperimentConfig,
    alpha_sweep,
    canonical_json,
    resolve_architecture,
    run_condition,
    run_poc,
    stress_test,
    write_json,
)
from .ph import (
    PointCloud,
    bottleneck_distance,
    compute_persistence,
    diagram_from_csv,
    diagram_to_csv,
    dtm_filtration,
    rips_filtration,
    tsas,
    witness_filtration,
)

_ABORT_ERRORS = (SweepError, FitError, StiffnessError, StateError)


# ----------------------------------------------------------------- manifest

@dataclass
class RunManifest:
    """Provenance record for one invocation.

    Written to manifest.json before any computation starts (with the
    planned artifact paths), then finalized with the finish timestamp
    and the artifacts actually present. The manifest is the only file
    that carries timestamps; reports stay byte-reproducible.
    """

    command: str
    config_hash: str | None
    seed: object
    out_dir: Path
    outputs: list = field(default_factory=list)
    started_at: str | None = None
    finished_at: str | None = None
    version: str = ""

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        self.version = self.version or _version()

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "version": self.version,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "outputs": sorted(str(p) for p in self.outputs),
        }

    def _write(self) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        with open(self.out_dir / "manifest.json", "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def start(self, planned) -> "RunManifest":
        self.outputs = list(planned)
        self.started_at = _now()
        self._write()
        return self

    def finish(self) -> None:
        # replace the plan with what actually exists on disk
        found = [p.relative_to(self.out_dir)
                 for p in sorted(self.out_dir.rglob("*"))
                 if p.is_file() and p.name != "manifest.json"]
        self.outputs = [str(p) for p in found]
        self.finished_at = _now()
        self._write()


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _version() -> str:
    for parent in Path(__file__).resolve().parents:
        if (parent / ".git").exists():
            try:
                out = subprocess.run(
                    ["git", "-C", str(parent), "describe", "--tags",
                     "--always", "--dirty"],
                    capture_output=True, text=True, timeout=5)
                if out.returncode == 0 and out.stdout.strip():
                    return out.stdout.strip()
            except OSError:
                pass
            break
    return "v" + __version__


# ------------------------------------------------------------ small helpers

def _env_seed() -> int | None:
    raw = environ.get("OVERLAP_LAB_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ParameterError(
            f"OVERLAP_LAB_SEED must be an integer, got {raw!r}")


def _int_list(text: str) -> list:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise ParameterError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise ParameterError(f"expected comma-separated numbers, got {text!r}")


def _read_table(path) -> np.ndarray:
    """Numeric CSV, one row per record; a single header line is tolerated."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"input file not found: {path}")
    for skip in (0, 1):
        try:
            arr = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
            break
        except ValueError:
            if skip == 1:
                raise ParameterError(f"{path}: not a numeric CSV")
    if arr.size == 0:
        raise ParameterError(f"{path}: empty input")
    return arr


def _read_series(path) -> np.ndarray:
    return _read_table(path)[:, 0]


def _load_config(path) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    try:
        payload = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{p}: invalid JSON ({exc})")
    if not isinstance(payload, dict):
        raise ParameterError(f"{p}: config must be a JSON object")
    base = ExperimentConfig().to_dict()
    base.update(payload)
    return ExperimentConfig.from_dict(base)


def _print_json(obj) -> None:
    sys.stdout.write(canonical_json(obj))


def _child_run(cfg_dict: dict):
    # runs in a worker process; must stay module-level picklable
    return run_condition(ExperimentConfig.from_dict(cfg_dict))


def _parallel_runner(configs, jobs):
    """Pre-train the given configs across processes; return a runner
    the harness can call, falling back to in-process training on any
    config it was not warmed with."""
    configs = list(configs)
    if jobs <= 1 or len(configs) <= 1:
        return None
    done: dict = {}
    with concurrent.futures.ProcessPoolExecutor(
            max_workers=min(jobs, len(configs))) as pool:
        futures = {pool.submit(_child_run, c.to_dict()): c.hash
                   for c in configs}
        for fut in concurrent.futures.as_completed(futures):
            done[futures[fut]] = fut.result()

    def runner(cfg):
        hit = done.pop(cfg.hash, None)
        return hit if hit is not None else run_condition(cfg)

    return runner


# ------------------------------------------------------------------- gen

def cmd_gen(args) -> int:
    seed = args.seed if args.seed is not None else (_env_seed() or 0)
    out = Path(args.out)
    manifest = RunManifest("gen", None, seed, out)
    planned = ["dataset.bin", "header.json"]
    manifest.start(planned)

    ds = synth.generate(args.family, args.n, seed, args.entanglement)
    synth.save_dataset(ds, out / "dataset.bin")
    header = {
        "format": "synthetic-dataset-v1",
        "family": args.family,
        "n": args.n,
        "seed": seed,
        "entanglement": args.entanglement,
        "path": "dataset.bin",
    }
    if args.ceiling:
        ceiling = synth.separable_ceiling(ds)
        header["separable_ceiling"] = ceiling
        print(f"separable_ceiling={ceiling:.6g}")
    write_json(out / "header.json", header)
    manifest.finish()
    print(f"wrote {out / 'dataset.bin'} ({args.n} samples)")
    return 0


# ------------------------------------------------------------------- poc

def _poc_configs(base, seeds, conditions):
    # mirrors run_poc's schedule; a drift here only costs warm-cache misses
    out = []
    for cond in conditions:
        for s in seeds:
            fam_train, _ = synth.transfer_pair(s)
            out.append(replace(base, condition=cond, seed=s,
                               family=fam_train))
    return out


def cmd_poc(args) -> int:
    base = _load_config(args.config)
    if args.seeds is not None:
        seeds = _int_list(args.seeds)
    else:
        env = _env_seed()
        seeds = [env] if env is not None else [0, 1, 2]

    if args.dry_run:
        resolved = {
            "config": base.to_dict(),
            "config_hash": base.hash,
            "seeds": seeds,
            "architecture": resolve_architecture(base).to_dict(),
        }
        _print_json(resolved)
        return 0

    out = Path(args.out)
    manifest = RunManifest("poc", base.hash, seeds, out)
    planned = ["report.json"] + [
        f"{cond}_seed{s}/{name}"
        for cond in CONDITIONS for s in seeds
        for name in ("config.json", "metrics.csv", "report.json",
                     "diagrams/final.csv")]
    manifest.start(planned)

    runner = _parallel_runner(_poc_configs(base, seeds, CONDITIONS),
                              args.jobs)
    report = run_poc(seeds=seeds, base=base, out_dir=out, runner=runner)
    manifest.finish()

    for cond in CONDITIONS:
        entry = report["conditions"][cond]
        mean = entry["transfer_accuracy"]["mean"]
        hold = entry["holdout_accuracy"]["mean"]
        print(f"{cond}: holdout "
              f"{'n/a' if hold is None else f'{hold:.4f}'}, transfer "
              f"{'n/a' if mean is None else f'{mean:.4f}'}")
    for note in report["notes"]:
        print(f"note: {note}")
    if report["aborted"]:
        print("aborted runs; gate withheld", file=sys.stderr)
        return 3
    print(f"GATE={report['gate']}")
    return 0


# ------------------------------------------------------------------- sweep

def cmd_sweep(args) -> int:
    base = _load_config(args.config)
    alphas = _float_list(args.alphas)
    if args.seeds is not None:
        seeds = _int_list(args.seeds)
    else:
        env = _env_seed()
        seeds = [env] if env is not None else [0, 1, 2]

    out = Path(args.out)
    manifest = RunManifest("sweep", base.hash, seeds, out)
    planned = ["report.json"] + [
        f"alpha{ai}_seed{s}/{name}"
        for ai in range(len(alphas)) for s in seeds
        for name in ("config.json", "metrics.csv", "report.json",
                     "diagrams/final.csv")]
    if args.plot:
        planned += ["ns_histogram.svg", "tau_vs_ns.svg"]
    manifest.start(planned)

    configs = [replace(base, condition="uoo", alpha0=a, seed=s)
               for a in alphas for s in seeds]
    runner = _parallel_runner(configs, args.jobs)
    report = alpha_sweep(alphas, seeds=seeds, base=base, draws=args.draws,
                         out_dir=out, runner=runner)

    if args.plot:
        from . import plots
        plots.ns_histogram(report["per_alpha"], report["kappa_star"],
                           out / "ns_histogram.svg")
        points = [(r.ns_mean, r.tau_final)
                  for r in report["runs"].values()
                  if not r.aborted and r.ns_mean is not None
                  and r.tau_final is not None]
        plots.tau_vs_ns(points, report["kappa_double_star"],
                        out / "tau_vs_ns.svg")
    manifest.finish()

    for entry in report["per_alpha"]:
        ns = entry["ns_mean"]
        print(f"alpha={entry['alpha']:g}: mean NS "
              f"{'n/a' if ns is None else f'{ns:.4f}'}, "
              f"{entry['n_success']}/{entry['n_runs']} runs ok")
    print(f"label={report['label']}")
    return 0


# ------------------------------------------------------------------- stress

def cmd_stress(args) -> int:
    base = _load_config(args.config)
    seed = args.seed if args.seed is not None else _env_seed()
    if seed is not None:
        base = replace(base, seed=seed)
    base = replace(base, condition="uoo")
    modes = (list(STRESS_MODES) if args.mode == "all"
             else [m.strip() for m in args.mode.split(",")])
    for m in modes:
        if m not in STRESS_MODES:
            raise ParameterError(
                f"mode must be drawn from {STRESS_MODES} or 'all'")

    out = Path(args.out)
    manifest = RunManifest("stress", base.hash, base.seed, out)
    planned = ["report.json"]
    if args.plot:
        planned += [f"stress_{m}.svg" for m in modes]
    manifest.start(planned)

    run = run_condition(base)
    if run.aborted:
        print(f"training aborted: {run.abort_reason}", file=sys.stderr)
        write_json(out / "report.json",
                   {"run": run.to_dict(), "modes": {}})
        manifest.finish()
        return 3

    reports = {}
    for m in modes:
        reports[m] = stress_test(run, m, stress_epochs=args.stress_epochs,
                                 n_checkpoints=args.checkpoints)
    write_json(out / "report.json",
               {"run": run.to_dict(), "modes": reports})

    if args.plot:
        from . import plots
        for m in modes:
            plots.stress_trajectories(reports[m], out / f"stress_{m}.svg")
    manifest.finish()

    for m in modes:
        rep = reports[m]
        print(f"{m}: NS {rep['ns_initial']:.4f} -> {rep['ns_final']:.4f}, "
              f"b1 {rep['b1_initial']:.4f} -> {rep['b1_final']:.4f}, "
              f"collapse={rep['collapse']}")
    return 0


# ------------------------------------------------------------------- stats

def _stats_emit(args, report, plot=None) -> int:
    if plot and args.out is None:
        raise ParameterError("--plot needs --out to place the SVG")
    _print_json(report)
    if args.out is not None:
        out = Path(args.out)
        manifest = RunManifest(f"stats {args.stats_cmd}", None,
                               getattr(args, "seed", None), out)
        planned = ["report.json"] + ([plot[1]] if plot else [])
        manifest.start(planned)
        write_json(out / "report.json", report)
        if plot:
            plot[0](out / plot[1])
        manifest.finish()
    return 0


def cmd_stats_dip(args) -> int:
    x = _read_series(args.input)
    stat, p = stats.dip_test(x, draws=args.draws, seed=args.seed)
    report = {"statistic": stat, "p_value": p, "n": int(x.size),
              "draws": args.draws, "seed": args.seed}
    plot = None
    if args.plot:
        from . import plots
        plot = (lambda path: plots.sample_histogram(
            x, {}, path, f"dip={stat:.4f}, p={p:.4f}"), "dip.svg")
    return _stats_emit(args, report, plot)


def cmd_stats_gmm(args) -> int:
    x = _read_series(args.input)
    bic1, bic2, crossover = stats.gmm2_bic(x, seed=args.seed)
    report = {"bic_1": bic1, "bic_2": bic2,
              "preferred_components": 2 if bic2 < bic1 else 1,
              "crossover": crossover, "n": int(x.size), "seed": args.seed}
    plot = None
    if args.plot:
        from . import plots
        plot = (lambda path: plots.sample_histogram(
            x, {"crossover": crossover}, path,
            f"BIC k=1: {bic1:.1f}, k=2: {bic2:.1f}"), "gmm.svg")
    return _stats_emit(args, report, plot)


def cmd_stats_pelt(args) -> int:
    x = _read_series(args.input)
    cps = stats.pelt(x, penalty=args.penalty)
    report = {"changepoints": [int(c) for c in cps], "n": int(x.size),
              "penalty": args.penalty}
    plot = None
    if args.plot:
        from . import plots
        plot = (lambda path: plots.series_with_changepoints(x, cps, path),
                "pelt.svg")
    return _stats_emit(args, report, plot)


def cmd_stats_tost(args) -> int:
    a = _read_series(args.input_a)
    b = _read_series(args.input_b)
    result = stats.tost(a, b, args.delta, alpha=args.alpha)
    report = result.to_dict()
    report.update({"alpha": args.alpha, "n_a": int(a.size),
                   "n_b": int(b.size)})
    return _stats_emit(args, report)


def cmd_stats_etr(args) -> int:
    value = stats.etr(args.p_near, args.p_cross, args.p_random)
    report = {"etr": value, "p_near": args.p_near,
              "p_cross": args.p_cross, "p_random": args.p_random}
    return _stats_emit(args, report)


# ------------------------------------------------------------------- topo

def _build_filtration(pc, args):
    if args.filtration == "rips":
        return rips_filtration(pc, max_dim=args.max_dim,
                               max_scale=args.max_scale)
    if args.filtration == "witness":
        return witness_filtration(pc, args.landmarks, max_dim=args.max_dim)
    return dtm_filtration(pc, args.k, max_dim=args.max_dim)


def cmd_topo_persistence(args) -> int:
    if args.plot and args.out is None:
        raise ParameterError("--plot needs --out to place the SVG")
    cloud = _read_table(args.input)
    pc = PointCloud(cloud)
    pd = compute_persistence(_build_filtration(pc, args))
    features = {}
    for d in range(args.max_dim + 1):
        iv = pd.intervals(d)
        fin = int(np.isfinite(iv[:, 1]).sum())
        features[str(d)] = {"finite": fin, "infinite": int(len(iv) - fin)}
    report = {
        "n_points": pc.n,
        "filtration": args.filtration,
        "max_dim": args.max_dim,
        "max_scale": args.max_scale,
        "features": features,
        "tau": model.structural_tension(pd),
    }
    _print_json(report)
    if args.out is not None:
        out = Path(args.out)
        manifest = RunManifest("topo persistence", None, None, out)
        planned = ["report.json", "diagram.csv"]
        if args.plot:
            planned.append("diagram.svg")
        manifest.start(planned)
        write_json(out / "report.json", report)
        diagram_to_csv(pd, out / "diagram.csv")
        if args.plot:
            from . import plots
            plots.diagram(pd, out / "diagram.svg", max_dim=args.max_dim)
        manifest.finish()
    return 0


def cmd_topo_bottleneck(args) -> int:
    d1 = diagram_from_csv(args.input_a)
    d2 = diagram_from_csv(args.input_b)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        dist = bottleneck_distance(d1, d2, dim=args.dim)
    report = {"bottleneck_distance": dist if np.isfinite(dist) else None,
              "infinite": bool(not np.isfinite(dist)), "dim": args.dim}
    _print_json(report)
    if args.out is not None:
        out = Path(args.out)
        RunManifest("topo bottleneck", None, None, out).start(["report.json"])
        write_json(out / "report.json", report)
    return 0


def cmd_topo_tsas(args) -> int:
    a = _read_table(args.input_a)
    b = _read_table(args.input_b)
    score = tsas(a, b)
    report = {"tsas": score}
    _print_json(report)
    if args.out is not None:
        out = Path(args.out)
        RunManifest("topo tsas", None, None, out).start(["report.json"])
        write_json(out / "report.json", report)
    return 0


# ------------------------------------------------------------------ parser

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="overlap-lab",
        description="Datasets, training comparisons, threshold sweeps, "
                    "stress protocols, and the statistics around them.")
    parser.add_argument("--version", action="version",
                        version=f"overlap-lab {_version()}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic two-modality "
                                   "dataset")
    p.add_argument("--family", default="xor0",
                   help="dataset family id (xor<k>)")
    p.add_argument("--n", type=int, default=1000, help="sample count")
    p.add_argument("--seed", type=int, default=None,
                   help="draw seed; falls back to OVERLAP_LAB_SEED, then 0")
    p.add_argument("--entanglement", type=float, default=0.0,
                   help="cross-modal coupling strength in [0, 1]")
    p.add_argument("--out", default="runs/gen", help="output directory")
    p.add_argument("--ceiling", action="store_true",
                   help="also estimate the separable-model accuracy "
                        "ceiling (needs n >= 200)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("poc", help="train the three conditions and emit "
                                   "the gate decision")
    p.add_argument("config", nargs="?", default=None,
                   help="JSON file of training-config overrides")
    p.add_argument("--seeds", default=None,
                   help="comma-separated replicate seeds; falls back to "
                        "OVERLAP_LAB_SEED, then 0,1,2")
    p.add_argument("--out", default="runs/poc", help="output directory")
    p.add_argument("--jobs", type=int, default=1,
                   help="worker processes for independent training runs")
    p.add_argument("--dry-run", action="store_true",
                   help="print the resolved config and exit without "
                        "training")
    p.set_defaults(func=cmd_poc)

    p = sub.add_parser("sweep", help="sweep the topological weight and "
                                     "run threshold detection")
    p.add_argument("config", nargs="?", default=None,
                   help="JSON file of training-config overrides")
    p.add_argument("--alphas", required=True,
                   help="comma-separated topological weights")
    p.add_argument("--seeds", default=None,
                   help="comma-separated replicate seeds; falls back to "
                        "OVERLAP_LAB_SEED, then 0,1,2")
    p.add_argument("--draws", type=int, default=10000,
                   help="null-table draws for the dip test")
    p.add_argument("--out", default="runs/sweep", help="output directory")
    p.add_argument("--jobs", type=int, default=1,
                   help="worker processes for independent training runs")
    p.add_argument("--plot", action="store_true",
                   help="write entropy-histogram and tension-vs-entropy "
                        "SVGs")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stress", help="train the fused condition, then "
                                      "run degradation protocols")
    p.add_argument("config", nargs="?", default=None,
                   help="JSON file of training-config overrides")
    p.add_argument("--mode", default="all",
                   help="comma-separated subset of "
                        f"{', '.join(STRESS_MODES)}, or 'all'")
    p.add_argument("--seed", type=int, default=None,
                   help="training seed; falls back to OVERLAP_LAB_SEED")
    p.add_argument("--stress-epochs", type=int, default=50,
                   help="continued-training epochs per protocol")
    p.add_argument("--checkpoints", type=int, default=10,
                   help="diagnostic checkpoints per protocol")
    p.add_argument("--out", default="runs/stress", help="output directory")
    p.add_argument("--plot", action="store_true",
                   help="write aligned-trajectory SVGs")
    p.set_defaults(func=cmd_stress)

    p = sub.add_parser("stats", help="detection and falsification "
                                     "statistics on CSV input")
    ssub = p.add_subparsers(dest="stats_cmd", required=True)

    q = ssub.add_parser("dip", help="unimodality dip test")
    q.add_argument("input", help="CSV file, first column is the sample")
    q.add_argument("--draws", type=int, default=10000,
                   help="null-calibration draws")
    q.add_argument("--seed", type=int, default=0, help="null-table seed")
    q.add_argument("--out", default=None, help="also write report.json here")
    q.add_argument("--plot", action="store_true",
                   help="write a sample histogram SVG (needs --out)")
    q.set_defaults(func=cmd_stats_dip)

    q = ssub.add_parser("gmm", help="one- vs two-component fit with BIC")
    q.add_argument("input", help="CSV file, first column is the sample")
    q.add_argument("--seed", type=int, default=0, help="restart seed")
    q.add_argument("--out", default=None, help="also write report.json here")
    q.add_argument("--plot", action="store_true",
                   help="write a histogram SVG with the crossover marker "
                        "(needs --out)")
    q.set_defaults(func=cmd_stats_gmm)

    q = ssub.add_parser("pelt", help="mean-shift changepoint detection")
    q.add_argument("input", help="CSV file, first column is the series")
    q.add_argument("--penalty", type=float, default=None,
                   help="per-changepoint penalty (default: from the "
                        "series' own noise)")
    q.add_argument("--out", default=None, help="also write report.json here")
    q.add_argument("--plot", action="store_true",
                   help="write a series SVG with changepoint lines "
                        "(needs --out)")
    q.set_defaults(func=cmd_stats_pelt)

    q = ssub.add_parser("tost", help="equivalence test on two samples")
    q.add_argument("input_a", help="CSV file, first column is group A")
    q.add_argument("input_b", help="CSV file, first column is group B")
    q.add_argument("--delta", type=float, required=True,
                   help="equivalence margin on the standardized "
                        "difference")
    q.add_argument("--alpha", type=float, default=0.05,
                   help="test level")
    q.add_argument("--out", default=None, help="also write report.json here")
    q.set_defaults(func=cmd_stats_tost)

    q = ssub.add_parser("etr", help="fraction of forced-choice error "
                                    "mass on the near-miss class")
    q.add_argument("p_near", type=float,
                   help="error probability of the near-miss choice "
                        "(right content, wrong structure); the numerator")
    q.add_argument("p_cross", type=float,
                   help="error probability of the crossed choice "
                        "(right structure, wrong content)")
    q.add_argument("p_random", type=float,
                   help="error probability of the unrelated choice")
    q.add_argument("--out", default=None, help="also write report.json here")
    q.set_defaults(func=cmd_stats_etr)

    p = sub.add_parser("topo", help="persistence diagrams and distances "
                                    "on CSV input")
    tsub = p.add_subparsers(dest="topo_cmd", required=True)

    q = tsub.add_parser("persistence", help="diagram of a point cloud")
    q.add_argument("input", help="CSV file, one point per row")
    q.add_argument("--filtration", choices=("rips", "witness", "dtm"),
                   default="rips", help="complex construction")
    q.add_argument("--max-dim", type=int, default=1,
                   help="top homology dimension")
    q.add_argument("--max-scale", type=float, default=float("inf"),
                   help="scale cutoff for edges (rips only)")
    q.add_argument("--landmarks", type=int, default=32,
                   help="landmark count (witness only)")
    q.add_argument("--k", type=int, default=8,
                   help="neighbor count (dtm only)")
    q.add_argument("--out", default=None,
                   help="write report.json and diagram.csv here")
    q.add_argument("--plot", action="store_true",
                   help="write a birth/death scatter SVG (needs --out)")
    q.set_defaults(func=cmd_topo_persistence)

    q = tsub.add_parser("bottleneck", help="bottleneck distance between "
                                           "two diagram CSVs")
    q.add_argument("input_a", help="diagram CSV")
    q.add_argument("input_b", help="diagram CSV")
    q.add_argument("--dim", type=int, default=1,
                   help="homology dimension to compare")
    q.add_argument("--out", default=None, help="also write report.json here")
    q.set_defaults(func=cmd_topo_bottleneck)

    q = tsub.add_parser("tsas", help="loop-shape alignment score between "
                                     "two point-cloud CSVs")
    q.add_argument("input_a", help="point-cloud CSV")
    q.add_argument("input_b", help="point-cloud CSV")
    q.add_argument("--out", default=None, help="also write report.json here")
    q.set_defaults(func=cmd_topo_tsas)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    for name in ("jobs", "stress_epochs", "checkpoints"):
        v = getattr(args, name, None)
        if v is not None and v < 1:
            print(f"error: --{name.replace('_', '-')} must be >= 1",
                  file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except _ABORT_ERRORS as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 3
    except (OverlapLabError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
