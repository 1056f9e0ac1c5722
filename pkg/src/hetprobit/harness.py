"""Multi-start experiments and plateau diagnostics.

Every method in a :class:`MultiStartConfig` is started from the same set of
points, drawn uniformly from ``[-start_box, start_box]^(k1+k2)``. Each run is
compared with a reference point (usually the parameters that generated the
data) by Euclidean distance and by the per-observation log-likelihood gap.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import pdist, squareform

from .dgp import transform, transform_point
from .model import LN2, Dataset, DimensionError, ParamVector, gradient_flat, log_likelihood, loglik_value
from .optimize import Objective, OptimizerSpec, OptimResult, likelihood_objective, maximize

DISTANCE_BIN_WIDTH = 0.05  # decades
VALUE_GAP_BIN_WIDTH = 0.1  # decades
QUANTILES = (0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0)


@dataclass(frozen=True)
class MultiStartConfig:
    num_starts: int = 1000
    start_box: float = 5.0
    seed: int = 0
    methods: tuple = (OptimizerSpec("BFGS"),)
    reference: ParamVector | None = None
    plateau_delta: float = 0.05
    plateau_tau: float = 2.0
    cluster_radius: float = 0.5

    def __post_init__(self):
        if self.num_starts < 1:
            raise ValueError("num_starts must be at least 1")
        if self.start_box <= 0:
            raise ValueError("start_box must be positive")
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.methods:
            raise ValueError("at least one method is required")


@dataclass
class RunRecord:
    start: ParamVector
    result: OptimResult
    distance: float
    value_gap: float
    better_than_reference: bool
    plateau: bool


@dataclass
class Histogram:
    """Counts on decadic log-scale bins.

    ``edges`` has one more entry than ``counts``. When ``zero_count`` is
    positive it is reported as an extra bin ``[0, edges[0])``. Negative values
    are pooled into ``better`` rather than binned.
    """

    edges: np.ndarray
    counts: np.ndarray
    zero_count: int = 0
    better: int = 0

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.zero_count + self.better

    def rows(self):
        """``(bin_left, bin_right, count)`` rows, zero bin first when populated."""
        out = []
        if self.zero_count:
            out.append((0.0, float(self.edges[0]), self.zero_count))
        out.extend((float(lo), float(hi), int(c)) for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts))
        return out


def decade_range(values, width: float):
    """Integer bin-index span ``(lo, hi)`` covering the positive ``values``."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v) & (v > 0)]
    if v.size == 0:
        return 0, 1
    k = np.floor(np.log10(v) / width).astype(int)
    return int(k.min()), int(k.max()) + 1


def log_histogram(values, width: float, pool_negative: bool = False, span=None) -> Histogram:
    values = np.asarray(values, dtype=float)
    better = 0
    if pool_negative:
        better = int(np.count_nonzero(values < 0))
        values = values[values >= 0]
    elif np.any(values < 0):
        raise ValueError("negative values need pool_negative=True")
    zero = int(np.count_nonzero(values == 0))
    positive = values[values > 0]
    lo, hi = span if span is not None else decade_range(positive, width)
    edges = 10.0 ** (width * np.arange(lo, hi + 1))
    counts = np.zeros(hi - lo, dtype=int)
    if positive.size:
        k = np.floor(np.log10(positive) / width).astype(int)
        np.add.at(counts, np.clip(k - lo, 0, hi - lo - 1), 1)
    return Histogram(edges, counts, zero, better)


@dataclass
class MethodReport:
    label: str
    spec: OptimizerSpec
    records: list
    distance_hist: Histogram
    value_gap_hist: Histogram
    summary: dict


@dataclass
class MultiStartReport:
    n: int
    reference: ParamVector
    reference_value: float
    starts: np.ndarray
    config: MultiStartConfig
    methods: dict = field(default_factory=dict)


def draw_starts(cfg: MultiStartConfig, dim: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    return rng.uniform(-cfg.start_box, cfg.start_box, size=(cfg.num_starts, dim))


def run_seed(base: int, *keys: int) -> int:
    """Independent per-run seed derived from ``(base, *keys)``."""
    state = np.random.SeedSequence([base, *keys]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("HETPROBIT_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def _map(fn, items, threads):
    threads = resolve_threads(threads)
    if threads == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def plateau_detect(d: Dataset, r: OptimResult, delta: float = 0.05, tau: float = 2.0) -> bool:
    """Flag a terminal point that looks like a plateau solution.

    True when the per-observation log-likelihood is within ``delta`` of
    ``-ln 2`` and every variance coefficient exceeds ``tau``.
    """
    if d.k2 < 1:
        raise ValueError("plateau detection needs at least one variance covariate")
    gamma = r.point.gamma
    if gamma.shape != (d.k2,):
        raise DimensionError(f"result has {gamma.shape[0]} variance coefficients, dataset has {d.k2}")
    return abs(r.value / d.n + LN2) < delta and float(gamma.min()) > tau


def _label(spec: OptimizerSpec, taken) -> str:
    label, k = spec.method, 2
    while label in taken:
        label, k = f"{spec.method}#{k}", k + 1
    return label


def _summarize(records, n_clusters):
    dist = np.array([r.distance for r in records])
    gap = np.array([r.value_gap for r in records])
    terminated = {}
    for r in records:
        terminated[r.result.terminated] = terminated.get(r.result.terminated, 0) + 1
    return {
        "quantiles": list(QUANTILES),
        "distance_quantiles": np.quantile(dist, QUANTILES).tolist(),
        "value_gap_quantiles": np.quantile(gap, QUANTILES).tolist(),
        "better_than_reference": sum(r.better_than_reference for r in records),
        "plateau": sum(r.plateau for r in records),
        "cluster_count": n_clusters,
        "terminated": dict(sorted(terminated.items())),
    }


def run_multistart(d: Dataset, cfg: MultiStartConfig, *, starts=None, threads: int | None = None,
                   span=None) -> MultiStartReport:
    """Run every configured method from every start point.

    ``starts`` overrides the sampled start set (one row per run). ``span``
    fixes the histogram bin ranges as ``{"distance": (lo, hi), "value_gap": (lo, hi)}``.
    Output does not depend on ``threads``.
    """
    ref = cfg.reference
    if ref is None:
        raise ValueError("MultiStartConfig.reference is required")
    if ref.k1 != d.k1 or ref.k2 != d.k2:
        raise DimensionError(f"reference dims ({ref.k1}, {ref.k2}) do not match dataset ({d.k1}, {d.k2})")
    dim = d.k1 + d.k2
    starts = draw_starts(cfg, dim) if starts is None else np.asarray(starts, dtype=float)
    if starts.shape != (cfg.num_starts, dim):
        raise DimensionError(f"starts must have shape ({cfg.num_starts}, {dim})")
    obj = likelihood_objective(d)
    ref_value = log_likelihood(d, ref).value
    ref_flat = ref.flat
    report = MultiStartReport(d.n, ref, ref_value, starts, cfg)
    span = span or {}

    for m_idx, spec in enumerate(cfg.methods):
        def one(i, spec=spec, m_idx=m_idx):
            run_spec = replace(spec, seed=run_seed(spec.seed, cfg.seed, m_idx, i)) if spec.method == "SANN" else spec
            res = maximize(obj, run_spec, starts[i], keep_trace=False)
            gap = (ref_value - res.value) / d.n
            plateau = d.k2 > 0 and plateau_detect(d, res, cfg.plateau_delta, cfg.plateau_tau)
            return RunRecord(ParamVector.from_flat(starts[i], d.k1), res,
                             float(np.linalg.norm(res.point.flat - ref_flat)), gap, gap < 0, plateau)

        records = _map(one, range(cfg.num_starts), threads)
        dist = [r.distance for r in records]
        gaps = [r.value_gap for r in records]
        clusters = cluster_points(np.array([r.result.point.flat for r in records]), cfg.cluster_radius)
        label = _label(spec, report.methods)
        report.methods[label] = MethodReport(
            label, spec, records,
            log_histogram(dist, DISTANCE_BIN_WIDTH, span=span.get("distance")),
            log_histogram(gaps, VALUE_GAP_BIN_WIDTH, pool_negative=True, span=span.get("value_gap")),
            _summarize(records, int(clusters.max()) + 1),
        )
    return report


# --------------------------------------------------------------------------
# stability


def cluster_points(points: np.ndarray, radius: float) -> np.ndarray:
    """Single-linkage cluster labels at ``radius``, numbered by first appearance."""
    points = np.asarray(points, dtype=float)
    if len(points) == 1:
        return np.zeros(1, dtype=int)
    adjacency = squareform(pdist(points)) <= radius
    _, labels = connected_components(adjacency, directed=False)
    # relabel in order of first appearance
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = np.empty_like(order)
    remap[order] = np.arange(order.size)
    return remap[labels]


@dataclass
class StabilitySummary:
    n_clusters: int
    cluster_sizes: list
    major_clusters: int
    warning: bool
    labels: np.ndarray


def stability_summary(points, radius: float = 0.5, major_share: float = 0.05) -> StabilitySummary:
    """Cluster ``points`` and decide whether they form one stable estimate.

    Warns when two or more clusters each hold ``major_share`` of the runs, or
    when the runs outside the largest cluster together reach that share
    (terminal points scattered along a flat region form many tiny clusters).
    """
    labels = cluster_points(points, radius)
    sizes = np.bincount(labels)
    threshold = major_share * len(labels)
    major = int(np.count_nonzero(sizes >= threshold))
    warning = major > 1 or len(labels) - int(sizes.max()) >= threshold
    return StabilitySummary(int(sizes.size), sorted(sizes.tolist(), reverse=True), major, bool(warning), labels)


def stability_check(d: Dataset, cfg: MultiStartConfig, cluster_radius: float = 0.5, *,
                    report: MultiStartReport | None = None, threads: int | None = None) -> dict:
    """Cluster terminal points per method and warn when they disagree.

    See :func:`stability_summary` for the warning rule. Pass an existing
    ``report`` to skip re-running.
    """
    if cfg.num_starts < 2:
        raise ValueError("stability check needs at least two starts")
    if report is None:
        report = run_multistart(d, cfg, threads=threads)
    return {
        label: stability_summary(np.array([r.result.point.flat for r in mr.records]), cluster_radius)
        for label, mr in report.methods.items()
    }


# --------------------------------------------------------------------------
# transformed comparison


@dataclass
class PairedReport:
    original: MultiStartReport
    transformed: MultiStartReport
    transformed_data: Dataset


def compare_transformed(d: Dataset, cfg: MultiStartConfig, *, threads: int | None = None) -> PairedReport:
    """Run the same experiment on ``d`` and on its sign-balanced transform.

    Start ``i`` of the transformed leg is ``transform_point`` of start ``i`` of
    the original leg, and the reference is transformed the same way. Both
    reports share histogram bin ranges so they can be drawn on one scale.
    """
    if d.k2 < 1:
        raise ValueError("transform comparison needs at least one variance covariate")
    if cfg.reference is None:
        raise ValueError("MultiStartConfig.reference is required")
    d_t, ref_t = transform(d, cfg.reference)
    starts = draw_starts(cfg, d.k1 + d.k2)
    starts_t = np.array([transform_point(ParamVector.from_flat(s, d.k1)).flat for s in starts])
    first = run_multistart(d, cfg, starts=starts, threads=threads)
    second = run_multistart(d_t, replace(cfg, reference=ref_t), starts=starts_t, threads=threads)
    # rebin both legs on the union of their ranges
    for label in first.methods:
        a, b = first.methods[label], second.methods[label]
        for attr, width, pool in (("distance", DISTANCE_BIN_WIDTH, False), ("value_gap", VALUE_GAP_BIN_WIDTH, True)):
            va = [getattr(r, attr) for r in a.records]
            vb = [getattr(r, attr) for r in b.records]
            lo_a, hi_a = decade_range(va, width)
            lo_b, hi_b = decade_range(vb, width)
            span = (min(lo_a, lo_b), max(hi_a, hi_b))
            setattr(a, f"{attr}_hist", log_histogram(va, width, pool, span))
            setattr(b, f"{attr}_hist", log_histogram(vb, width, pool, span))
    return PairedReport(first, second, d_t)


# --------------------------------------------------------------------------
# profile grid


@dataclass
class ProfileGrid:
    index_pair: tuple
    axis1: np.ndarray
    axis2: np.ndarray
    values: np.ndarray  # values[i, j] at (axis1[i], axis2[j])
    clip_floor: float
    clipped: np.ndarray
    base: ParamVector
    base_value: float

    def value_range(self, lo1=-math.inf, lo2=-math.inf, hi1=math.inf, hi2=math.inf) -> float:
        """Spread of the unclipped values inside the given coordinate box."""
        sel = np.ix_((self.axis1 >= lo1) & (self.axis1 <= hi1), (self.axis2 >= lo2) & (self.axis2 <= hi2))
        v = self.values[sel][~self.clipped[sel]]
        return float(v.max() - v.min()) if v.size else math.nan


def profile_grid(d: Dataset, base: ParamVector, j1: int, j2: int, ranges, resolution=41,
                 clip_floor: float = -10_000.0) -> ProfileGrid:
    """Log-likelihood over a grid of two variance coefficients, the rest held at ``base``."""
    if j1 == j2:
        raise ValueError("profile indices must differ")
    for j in (j1, j2):
        if not 0 <= j < d.k2:
            raise ValueError(f"variance index {j} out of range for k2 = {d.k2}")
    if base.k1 != d.k1 or base.k2 != d.k2:
        raise DimensionError("base point does not match dataset")
    r1, r2 = (resolution, resolution) if np.isscalar(resolution) else resolution
    (lo1, hi1), (lo2, hi2) = ranges
    axis1 = np.linspace(lo1, hi1, int(r1))
    axis2 = np.linspace(lo2, hi2, int(r2))
    values = np.empty((axis1.size, axis2.size))
    gamma = base.gamma.copy()
    for i, g1 in enumerate(axis1):
        for j, g2 in enumerate(axis2):
            gamma[j1], gamma[j2] = g1, g2
            values[i, j] = loglik_value(d, base.beta, gamma)[0]
    return ProfileGrid((j1, j2), axis1, axis2, values, clip_floor, values < clip_floor,
                       base, log_likelihood(d, base).value)


# --------------------------------------------------------------------------
# two-stage refit


@dataclass
class TwoStageResult:
    result: OptimResult
    stage1: OptimResult
    stage2: OptimResult | None

    @property
    def triggered(self) -> bool:
        return self.stage2 is not None


def gamma_objective(d: Dataset, beta) -> Objective:
    """Log-likelihood as a function of the variance coefficients alone."""
    beta = np.asarray(beta, dtype=float)
    k1 = d.k1

    def fun(g):
        return loglik_value(d, beta, g)[0]

    def grad(g):
        return gradient_flat(d, beta, g)[k1:]

    return Objective(fun, grad, 0)


def two_stage_fit(d: Dataset, spec: OptimizerSpec, start, *, delta: float = 0.05, tau: float = 2.0,
                  gamma_start=None) -> TwoStageResult:
    """Joint fit, then a variance-only refit from a fresh start if stage 1 hit the plateau.

    Stage 2 keeps the stage-1 ``beta`` fixed and restarts ``gamma`` from
    ``gamma_start`` (zeros by default). The better of the two results by
    log-likelihood is returned in ``result``.
    """
    if d.k2 < 1:
        raise ValueError("two-stage fitting needs at least one variance covariate")
    stage1 = maximize(likelihood_objective(d), spec, start)
    if not plateau_detect(d, stage1, delta, tau):
        return TwoStageResult(stage1, stage1, None)
    beta = stage1.point.beta
    g0 = np.zeros(d.k2) if gamma_start is None else np.asarray(gamma_start, dtype=float)
    inner = maximize(gamma_objective(d, beta), spec, g0)
    stage2 = replace(inner, point=ParamVector(beta, inner.point.flat))
    best = stage2 if stage2.value > stage1.value else stage1
    return TwoStageResult(best, stage1, stage2)
