"""Dataset CSV, JSON report and config readers/writers.

Floats are written so that they read back bit-for-bit: plain positional
notation in dataset CSVs, ``repr`` (shortest round-trip) everywhere else.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import fields
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .dgp import DgpConfig, SimulatedDataset, preset
from .harness import Histogram, MultiStartConfig, MultiStartReport, ProfileGrid, stability_summary
from .model import LN2, Dataset, InputError, ParamVector
from .optimize import OptimizerSpec, OptimResult, SannSettings


class FormatError(ValueError):
    """A file could not be parsed or failed validation."""


def fmt_float(x: float) -> str:
    return np.format_float_positional(float(x), unique=True, trim="-")


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _vec(a):
    return [_num(v) for v in np.asarray(a, dtype=float)]


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def load_schema(name: str) -> dict:
    return json.loads(resources.files("hetprobit.schemas").joinpath(f"{name}.schema.json").read_text())


def validate(obj, name: str):
    """Raise :class:`FormatError` unless ``obj`` matches the named schema."""
    try:
        jsonschema.validate(obj, load_schema(name))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise FormatError(f"{name}: {where}: {exc.message}") from None


def read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


# --------------------------------------------------------------------------
# datasets


def dataset_to_csv(d: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["y"] + [f"x{j + 1}" for j in range(d.k1)] + [f"z{j + 1}" for j in range(d.k2)])
    for i in range(d.n):
        w.writerow([str(int(d.y[i]))] + [fmt_float(v) for v in d.X[i]] + [fmt_float(v) for v in d.Z[i]])
    return buf.getvalue()


def write_dataset(path, d: Dataset):
    Path(path).write_text(dataset_to_csv(d))


def _parse_header(header, path):
    if not header or header[0] != "y":
        raise FormatError(f"{path}:1: first column must be 'y'")
    k1 = k2 = 0
    for name in header[1:]:
        if name == f"x{k1 + 1}" and k2 == 0:
            k1 += 1
        elif name == f"z{k2 + 1}":
            k2 += 1
        else:
            raise FormatError(f"{path}:1: unexpected column {name!r}; expected y, x1..xk1, z1..zk2")
    if k1 < 1:
        raise FormatError(f"{path}:1: at least one x column is required")
    return k1, k2


def read_dataset(path) -> Dataset:
    """Read ``y, x1..xk1, z1..zk2`` CSV; errors name the file and line."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror}") from None
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise FormatError(f"{path}: empty file")
    k1, k2 = _parse_header(rows[0], path)
    width = 1 + k1 + k2
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != width:
            raise FormatError(f"{path}:{lineno}: expected {width} fields, found {len(row)}")
        try:
            vals = [float(v) for v in row]
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
        if vals[0] not in (0.0, 1.0):
            raise FormatError(f"{path}:{lineno}: y must be 0 or 1, got {row[0]!r}")
        if not all(math.isfinite(v) for v in vals):
            raise FormatError(f"{path}:{lineno}: non-finite value")
        data.append(vals)
    if not data:
        raise FormatError(f"{path}: no observations")
    arr = np.array(data)
    try:
        return Dataset(arr[:, 0], arr[:, 1:1 + k1], arr[:, 1 + k1:])
    except (InputError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from None


# --------------------------------------------------------------------------
# parameters


def params_to_dict(p: ParamVector) -> dict:
    return {"beta": _vec(p.beta), "gamma": _vec(p.gamma)}


def params_from_dict(obj) -> ParamVector:
    """Parameters from a ``{"beta", "gamma"}`` object, a sidecar, or a fit result."""
    if isinstance(obj, dict) and "beta" not in obj:
        if "result" in obj:
            obj = obj["result"]
        if "point" in obj:
            obj = obj["point"]
    try:
        return ParamVector(np.array(obj["beta"], dtype=float), np.array(obj.get("gamma", []), dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"parameter object needs numeric 'beta' and 'gamma' lists ({exc})") from None


BUILTIN_REFERENCES = ("alvarez-brehm",)


def read_params(path) -> ParamVector:
    """Read parameters from a JSON file, or ``builtin:<name>`` for a bundled reference."""
    text = str(path)
    if text.startswith("builtin:"):
        name = text.split(":", 1)[1]
        if name not in BUILTIN_REFERENCES:
            raise FormatError(f"unknown built-in reference {name!r}; choose from {BUILTIN_REFERENCES}")
        return params_from_dict(reference_ab())
    return params_from_dict(read_json(path))


def simulation_sidecar(sim: SimulatedDataset, preset_name: str | None = None) -> dict:
    cfg = sim.config
    return {
        "n": sim.data.n,
        "k1": sim.data.k1,
        "k2": sim.data.k2,
        "beta": _vec(sim.beta0),
        "gamma": _vec(sim.gamma0),
        "crossover": sim.crossover,
        "resamples_used": sim.resamples_used,
        "seed": cfg.seed,
        "preset": preset_name,
        "z_kind": cfg.z_kind,
    }


def reference_ab() -> dict:
    """Published reference estimates for the abortion-attitudes survey model (data not bundled)."""
    return json.loads(resources.files("hetprobit.data").joinpath("alvarez_brehm_reference.json").read_text())


# --------------------------------------------------------------------------
# results and reports


def spec_to_dict(spec: OptimizerSpec) -> dict:
    return {
        "method": spec.method,
        "max_iter": spec.iteration_cap,
        "f_tol": spec.f_tol,
        "g_tol": spec.g_tol,
        "seed": spec.seed,
        "sann": {
            "initial_temp": spec.sann.initial_temp,
            "proposal_scale": spec.sann.proposal_scale,
            "eval_budget": spec.sann.eval_budget,
        },
    }


def result_to_dict(r: OptimResult, n: int | None = None) -> dict:
    out = {
        "point": params_to_dict(r.point),
        "value": _num(r.value),
        "normalized": _num(r.value / n) if n else None,
        "iterations": r.iterations,
        "evals": r.evals,
        "grad_evals": r.grad_evals,
        "terminated": r.terminated,
    }
    return out


def histogram_to_dict(h: Histogram, pooled: bool) -> dict:
    return {
        "bins": [[lo, hi, c] for lo, hi, c in h.rows()],
        "better_than_reference": h.better if pooled else None,
    }


def report_to_dict(report: MultiStartReport, include_records: bool = True) -> dict:
    cfg = report.config
    methods = []
    for label, mr in report.methods.items():
        st = stability_summary(np.array([r.result.point.flat for r in mr.records]), cfg.cluster_radius)
        entry = {
            "label": label,
            "spec": spec_to_dict(mr.spec),
            "summary": mr.summary,
            "stability": {
                "n_clusters": st.n_clusters,
                "major_clusters": st.major_clusters,
                "warning": st.warning,
                "cluster_sizes": st.cluster_sizes,
            },
            "distance_histogram": histogram_to_dict(mr.distance_hist, False),
            "value_gap_histogram": histogram_to_dict(mr.value_gap_hist, True),
        }
        if include_records:
            entry["records"] = [
                {
                    "run": i,
                    "start": _vec(r.start.flat),
                    "point": params_to_dict(r.result.point),
                    "value": _num(r.result.value),
                    "distance": _num(r.distance),
                    "value_gap": _num(r.value_gap),
                    "better_than_reference": bool(r.better_than_reference),
                    "plateau": bool(r.plateau),
                    "terminated": r.result.terminated,
                    "iterations": r.result.iterations,
                    "evals": r.result.evals,
                    "grad_evals": r.result.grad_evals,
                }
                for i, r in enumerate(mr.records)
            ]
        methods.append(entry)
    return {
        "n": report.n,
        "reference": params_to_dict(report.reference),
        "reference_value": _num(report.reference_value),
        "reference_normalized": _num(report.reference_value / report.n),
        "benchmark": -report.n * LN2,
        "config": {
            "num_starts": cfg.num_starts,
            "start_box": cfg.start_box,
            "seed": cfg.seed,
            "plateau_delta": cfg.plateau_delta,
            "plateau_tau": cfg.plateau_tau,
            "cluster_radius": cfg.cluster_radius,
        },
        "methods": methods,
    }


HIST_HEADER = ["bin_left", "bin_right", "count"]


def histogram_csv(h: Histogram, pooled: bool) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HIST_HEADER)
    if pooled:
        w.writerow(["better_than_reference", "", h.better])
    for lo, hi, c in h.rows():
        w.writerow([repr(lo), repr(hi), c])
    return buf.getvalue()


def read_histogram_csv(path) -> tuple[list, int | None]:
    """Return ``([(left, right, count), ...], better_count_or_None)``."""
    rows = list(csv.reader(io.StringIO(Path(path).read_text())))
    if not rows or rows[0] != HIST_HEADER:
        raise FormatError(f"{path}:1: expected header {','.join(HIST_HEADER)}")
    bins, better = [], None
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            if row[0] == "better_than_reference":
                better = int(row[2])
            else:
                bins.append((float(row[0]), float(row[1]), int(row[2])))
        except (IndexError, ValueError):
            raise FormatError(f"{path}:{lineno}: malformed row") from None
    return bins, better


PROFILE_HEADER = ["i", "j", "axis1", "axis2", "value", "clipped"]


def profile_csv(g: ProfileGrid) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PROFILE_HEADER)
    for i, a1 in enumerate(g.axis1):
        for j, a2 in enumerate(g.axis2):
            w.writerow([i, j, repr(float(a1)), repr(float(a2)), repr(float(g.values[i, j])), int(g.clipped[i, j])])
    return buf.getvalue()


def read_profile_csv(path):
    """Return ``(axis1, axis2, values, clipped)`` from a profile CSV."""
    rows = list(csv.reader(io.StringIO(Path(path).read_text())))
    if not rows or rows[0] != PROFILE_HEADER:
        raise FormatError(f"{path}:1: expected header {','.join(PROFILE_HEADER)}")
    body = rows[1:]
    ni = max(int(r[0]) for r in body) + 1
    nj = max(int(r[1]) for r in body) + 1
    axis1, axis2 = np.empty(ni), np.empty(nj)
    values = np.empty((ni, nj))
    clipped = np.zeros((ni, nj), dtype=bool)
    for r in body:
        i, j = int(r[0]), int(r[1])
        axis1[i], axis2[j] = float(r[2]), float(r[3])
        values[i, j] = float(r[4])
        clipped[i, j] = r[5] == "1"
    return axis1, axis2, values, clipped


# --------------------------------------------------------------------------
# experiment config


def read_config(path) -> dict:
    cfg = read_json(path)
    validate(cfg, "config")
    return cfg


def dgp_config(section: dict) -> tuple[DgpConfig, str | None]:
    section = dict(section)
    name = section.pop("preset", None)
    if "gamma0" in section and section["gamma0"] is not None:
        section["gamma0"] = tuple(section["gamma0"])
    if name is not None:
        return preset(name, **section), name
    return DgpConfig(**section), None


def optimizer_spec(section: dict) -> OptimizerSpec:
    section = dict(section)
    sann = SannSettings(**section.pop("sann", {}))
    return OptimizerSpec(sann=sann, **section)


def multistart_config(cfg: dict, reference: ParamVector | None = None) -> MultiStartConfig:
    section = dict(cfg.get("multistart", {}))
    if "seed" not in section:
        raise FormatError("config: multistart.seed is required")
    ref = section.pop("reference", None)
    if ref is not None:
        reference = params_from_dict(ref)
    methods = tuple(optimizer_spec(m) for m in cfg.get("methods", [{"method": "BFGS"}]))
    allowed = {f.name for f in fields(MultiStartConfig)} - {"methods", "reference"}
    unknown = set(section) - allowed
    if unknown:
        raise FormatError(f"config: unknown multistart keys {sorted(unknown)}")
    return MultiStartConfig(methods=methods, reference=reference, **section)
