"""Command-line entry point: ``hetprobit <command> ...``.

Every command is deterministic given its inputs and seeds. JSON goes to
stdout unless an output path is given; errors go to stderr with a nonzero
exit status.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import formats as fm
from . import svg
from .dgp import SimulationError, inverse_transform, simulate, transform, transform_point
from .harness import (
    compare_transformed,
    plateau_detect,
    profile_grid,
    run_multistart,
    stability_summary,
    two_stage_fit,
)
from .model import (
    DimensionError,
    InputError,
    ParamVector,
    benchmark_value,
    log_likelihood,
    plateau_approximation,
)
from .optimize import OptimizerSpec, SannSettings, likelihood_objective, maximize

EXIT_ERROR = 2
EXIT_CHECK_FAILED = 1
TRANSFORM_TOL = 1e-9


class CliError(Exception):
    pass


def _emit(obj, out, schema):
    fm.validate(obj, schema)
    text = fm.dumps(obj)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _floats(text: str, what: str) -> list:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise CliError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _sidecar_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".params.json")


def _reference(args, cfg, dataset_path) -> ParamVector:
    """Reference point from --reference, the config, or the dataset's sidecar."""
    if getattr(args, "reference", None):
        return fm.read_params(args.reference)
    ref = cfg.get("multistart", {}).get("reference")
    if ref is not None:
        return fm.params_from_dict(ref)
    side = _sidecar_path(dataset_path)
    if side.exists():
        return fm.read_params(side)
    raise CliError("no reference point: pass --reference, set multistart.reference, "
                   f"or provide {side}")


def _start(text: str, dim: int, box: float) -> np.ndarray:
    if text.startswith("random:"):
        try:
            seed = int(text.split(":", 1)[1])
        except ValueError:
            raise CliError(f"--start: bad seed in {text!r}") from None
        return np.random.default_rng(np.random.SeedSequence(seed)).uniform(-box, box, size=dim)
    x = np.array(_floats(text, "--start"))
    if x.size != dim:
        raise CliError(f"--start has {x.size} components, dataset needs {dim}")
    return x


# --------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    cfg = fm.read_config(args.config) if args.config else {}
    section = dict(cfg.get("dgp", {}))
    if args.preset:
        section["preset"] = args.preset
    if args.seed is not None:
        section["seed"] = args.seed
    if args.n is not None:
        section["n"] = args.n
    if "seed" not in section:
        raise CliError("simulate needs a seed (dgp.seed in the config or --seed)")
    out = args.out or cfg.get("output", {}).get("dataset")
    if not out:
        raise CliError("simulate needs an output path (--out or output.dataset)")
    dcfg, name = fm.dgp_config(section)
    sim = simulate(dcfg)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fm.write_dataset(out, sim.data)
    side = fm.simulation_sidecar(sim, name)
    _emit(side, _sidecar_path(out), "simulation")
    print(f"wrote {out} (n={sim.data.n}, k1={sim.data.k1}, k2={sim.data.k2}, "
          f"crossover={sim.crossover:.3f})", file=sys.stderr)
    return 0


def cmd_fit(args) -> int:
    d = fm.read_dataset(args.dataset)
    x0 = _start(args.start, d.k1 + d.k2, args.start_box)
    spec = OptimizerSpec(args.method, max_iter=args.max_iter, seed=args.seed,
                         sann=SannSettings(eval_budget=args.sann_budget))
    start = ParamVector.from_flat(x0, d.k1)
    two = None
    if args.two_stage and d.k2:
        ts = two_stage_fit(d, spec, start, delta=args.plateau_delta, tau=args.plateau_tau)
        res = ts.result
        two = {"triggered": ts.triggered, "stage1": fm.result_to_dict(ts.stage1, d.n),
               "stage2": fm.result_to_dict(ts.stage2, d.n) if ts.stage2 else None}
    else:
        res = maximize(likelihood_objective(d), spec, x0, keep_trace=False)
    plateau = bool(d.k2 and plateau_detect(d, res, args.plateau_delta, args.plateau_tau))
    out = {
        "dataset": str(args.dataset),
        "n": d.n,
        "method": spec.method,
        "start": fm.params_to_dict(start),
        "result": fm.result_to_dict(res, d.n),
        "plateau": plateau,
        "benchmark": benchmark_value(d),
        "two_stage": two,
    }
    _emit(out, args.out, "fit")
    return 0


def _write_method_outputs(outdir: Path, label: str, mr, axes=None):
    sub = outdir / label.replace("#", "_")
    sub.mkdir(parents=True, exist_ok=True)
    (sub / "distance_hist.csv").write_text(fm.histogram_csv(mr.distance_hist, False))
    (sub / "valuegap_hist.csv").write_text(fm.histogram_csv(mr.value_gap_hist, True))
    (sub / "distance_hist.svg").write_text(svg.histogram_svg(
        mr.distance_hist, title=f"{label}: distance to reference",
        xlabel="Euclidean distance (log scale)", axes=axes and axes[0]))
    (sub / "valuegap_hist.svg").write_text(svg.histogram_svg(
        mr.value_gap_hist, title=f"{label}: log-likelihood shortfall per observation",
        xlabel="(reference - estimate) / n (log scale)",
        better_label="better than at reference", axes=axes and axes[1]))


def _warn_stability(report, tag=""):
    for label, mr in report.methods.items():
        st = stability_summary(np.array([r.result.point.flat for r in mr.records]), report.config.cluster_radius)
        if st.warning:
            print(f"warning: {tag}{label}: terminal points split into {st.n_clusters} clusters "
                  f"({st.major_clusters} holding at least 5% of runs); estimates are unstable",
                  file=sys.stderr)


def _ms_config(args):
    cfg = fm.read_config(args.config)
    if "seed" not in cfg.get("multistart", {}):
        raise CliError("multistart needs multistart.seed in the config")
    return cfg


def _outdir(args, cfg) -> Path:
    out = args.out_dir or cfg.get("output", {}).get("dir")
    if not out:
        raise CliError("an output directory is required (--out-dir or output.dir)")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_multistart(args) -> int:
    cfg = _ms_config(args)
    d = fm.read_dataset(args.dataset)
    ms = fm.multistart_config(cfg, _reference(args, cfg, args.dataset))
    outdir = _outdir(args, cfg)
    report = run_multistart(d, ms, threads=args.threads)
    for label, mr in report.methods.items():
        _write_method_outputs(outdir, label, mr)
    _emit(fm.report_to_dict(report), outdir / "report.json", "report")
    _warn_stability(report)
    return 0


def cmd_compare(args) -> int:
    cfg = _ms_config(args)
    d = fm.read_dataset(args.dataset)
    ms = fm.multistart_config(cfg, _reference(args, cfg, args.dataset))
    outdir = _outdir(args, cfg)
    pr = compare_transformed(d, ms, threads=args.threads)
    axes_json = {}
    for label in pr.original.methods:
        a, b = pr.original.methods[label], pr.transformed.methods[label]
        dist_axes = svg.histogram_axes([a.distance_hist, b.distance_hist])
        gap_axes = svg.histogram_axes([a.value_gap_hist, b.value_gap_hist])
        axes_json = {"distance": list(dist_axes), "value_gap": list(gap_axes)}
        _write_method_outputs(outdir / "original", label, a, (dist_axes, gap_axes))
        _write_method_outputs(outdir / "transformed", label, b, (dist_axes, gap_axes))
        stem = label.replace("#", "_")
        (outdir / f"{stem}_distance_compare.svg").write_text(svg.histogram_svg(
            [a.distance_hist, b.distance_hist], title=f"{label}: distance to reference",
            xlabel="Euclidean distance (log scale)", labels=["original", "transformed"], axes=dist_axes))
        (outdir / f"{stem}_valuegap_compare.svg").write_text(svg.histogram_svg(
            [a.value_gap_hist, b.value_gap_hist], title=f"{label}: log-likelihood shortfall per observation",
            xlabel="(reference - estimate) / n (log scale)", labels=["original", "transformed"],
            better_label="better than at reference", axes=gap_axes))
    paired = all(np.array_equal(transform_point(ParamVector.from_flat(s, d.k1)).flat, t)
                 for s, t in zip(pr.original.starts, pr.transformed.starts))
    out = {
        "original": fm.report_to_dict(pr.original),
        "transformed": fm.report_to_dict(pr.transformed),
        "axes": axes_json,
        "paired_starts": paired,
    }
    _emit(out, outdir / "compare.json", "compare")
    fm.write_dataset(outdir / "transformed.csv", pr.transformed_data)
    for label in pr.original.methods:
        a = pr.original.methods[label].summary
        b = pr.transformed.methods[label].summary
        print(f"{label}: better than reference {a['better_than_reference']} -> {b['better_than_reference']}, "
              f"plateau-flagged {a['plateau']} -> {b['plateau']}", file=sys.stderr)
    return 0


def cmd_profile(args) -> int:
    d = fm.read_dataset(args.dataset)
    base = fm.read_params(args.base)
    idx = [int(v) for v in _floats(args.indices, "--indices")]
    if len(idx) != 2:
        raise CliError("--indices needs two variance-coefficient indices, e.g. 0,1")
    rng = _floats(args.range, "--range")
    if len(rng) == 2:
        ranges = (tuple(rng), tuple(rng))
    elif len(rng) == 4:
        ranges = (tuple(rng[:2]), tuple(rng[2:]))
    else:
        raise CliError("--range takes lo,hi or lo1,hi1,lo2,hi2")
    g = profile_grid(d, base, idx[0], idx[1], ranges, args.resolution, args.clip_floor)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "profile.csv").write_text(fm.profile_csv(g))
    (outdir / "profile.svg").write_text(svg.heatmap_svg(g))
    vr = g.value_range()
    side = {
        "dataset": str(args.dataset),
        "indices": idx,
        "base": fm.params_to_dict(base),
        "base_value": fm._num(g.base_value),
        "axis1": fm._vec(g.axis1),
        "axis2": fm._vec(g.axis2),
        "clip_floor": g.clip_floor,
        "clipped_cells": int(g.clipped.sum()),
        "value_range": fm._num(vr),
        "value_range_per_obs": fm._num(vr / d.n),
    }
    _emit(side, outdir / "profile.json", "profile")
    return 0


def cmd_transform(args) -> int:
    d = fm.read_dataset(args.dataset)
    p = fm.read_params(args.params)
    d_t, p_t = transform(d, p)
    l0 = log_likelihood(d, p).value
    l1 = log_likelihood(d_t, p_t).value
    d_back, _ = inverse_transform(d_t, p_t)
    diff = abs(l0 - l1)
    ok = diff < TRANSFORM_TOL
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fm.write_dataset(out, d_t)
    side = {
        "dataset": str(args.dataset),
        "output": str(out),
        "original": fm.params_to_dict(p),
        "transformed": fm.params_to_dict(p_t),
        "loglik_original": l0,
        "loglik_transformed": l1,
        "abs_difference": diff,
        "tolerance": TRANSFORM_TOL,
        "equal": ok,
        "max_roundtrip_z_error": float(np.max(np.abs(d_back.Z - d.Z))),
    }
    _emit(side, _sidecar_path(out), "transform")
    print(f"log-likelihood original {l0!r}, transformed {l1!r}, |difference| {diff:.3g}: "
          f"{'equal' if ok else 'NOT EQUAL'}", file=sys.stderr)
    return 0 if ok else EXIT_CHECK_FAILED


def cmd_benchmark(args) -> int:
    d = fm.read_dataset(args.dataset)
    out = {
        "n": d.n,
        "benchmark": benchmark_value(d),
        "benchmark_normalized": benchmark_value(d) / d.n,
        "params": None,
        "loglik": None,
        "normalized": None,
        "gap_per_obs": None,
        "plateau_approximation": None,
        "negative_z": None,
    }
    if args.params:
        p = fm.read_params(args.params)
        ev = log_likelihood(d, p)
        out.update(params=fm.params_to_dict(p), loglik=fm._num(ev.value), normalized=fm._num(ev.normalized),
                   gap_per_obs=fm._num(ev.normalized - benchmark_value(d) / d.n))
        if d.k2:
            pa = plateau_approximation(d, p.beta)
            out.update(plateau_approximation=pa.value, negative_z=pa.negative_z)
    _emit(out, args.out, "benchmark")
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hetprobit", description="Heteroskedastic probit estimation and diagnostics.")
    sub = ap.add_subparsers(dest="command", required=True)

    def threads(p):
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: $HETPROBIT_THREADS or the CPU count)")

    p = sub.add_parser("simulate", help="draw a seeded dataset")
    p.add_argument("--config", help="JSON experiment config (dgp section is used)")
    p.add_argument("--preset", choices=["het-paper", "het-continuous", "het-gamma6", "probit-paper"])
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--out", help="dataset CSV path; the sidecar goes next to it as <stem>.params.json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="maximize the log-likelihood from one start")
    p.add_argument("dataset")
    p.add_argument("--method", default="BFGS")
    p.add_argument("--start", default="random:0", help="comma-separated vector or random:<seed>")
    p.add_argument("--start-box", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0, help="seed for SANN proposals")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--sann-budget", type=int, default=10_000)
    p.add_argument("--two-stage", action="store_true", help="refit gamma from zero when the fit lands on the plateau")
    p.add_argument("--plateau-delta", type=float, default=0.05)
    p.add_argument("--plateau-tau", type=float, default=2.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    for name, func, text in (("multistart", cmd_multistart, "many starts, histograms and stability check"),
                             ("compare", cmd_compare, "multistart on the data and on its transform")):
        p = sub.add_parser(name, help=text)
        p.add_argument("dataset")
        p.add_argument("--config", required=True)
        p.add_argument("--reference", help="params JSON or builtin:<name> (default: config or dataset sidecar)")
        p.add_argument("--out-dir")
        threads(p)
        p.set_defaults(func=func)

    p = sub.add_parser("profile", help="log-likelihood over two variance coefficients")
    p.add_argument("dataset")
    p.add_argument("--base", required=True, help="params JSON, fit result JSON, or builtin:<name>")
    p.add_argument("--indices", default="0,1")
    p.add_argument("--range", default="-5,15", help="lo,hi or lo1,hi1,lo2,hi2; write --range=-5,15 when lo is negative")
    p.add_argument("--resolution", type=int, default=41)
    p.add_argument("--clip-floor", type=float, default=-10_000.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("transform", help="shift Z by -1/2 and rescale the parameters")
    p.add_argument("dataset")
    p.add_argument("--params", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("benchmark", help="-n ln 2 and the log-likelihood at a point")
    p.add_argument("dataset")
    p.add_argument("--params")
    p.add_argument("--out")
    p.set_defaults(func=cmd_benchmark)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, fm.FormatError, InputError, DimensionError, SimulationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
