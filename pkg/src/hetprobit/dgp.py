"""Seeded simulated datasets and the sign-balancing transformation of ``Z``.

Random streams come from numpy's PCG64. The covariates are drawn from the
first child of ``SeedSequence(seed)``; every parameter/disturbance attempt of
the rejection loop draws from its own further child, so attempt ``j`` is the
same regardless of how many attempts preceded it being rejected.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .model import Dataset, DimensionError, ParamVector, crossover_fraction


class SimulationError(RuntimeError):
    """The rejection sampler ran out of attempts."""


@dataclass(frozen=True)
class DgpConfig:
    n: int = 1000
    k1: int = 3
    k2: int = 2
    param_box: float = 5.0
    crossover_lo: float = 0.20
    crossover_hi: float = 0.30
    z_kind: str = "bernoulli-half"
    max_resamples: int = 10_000
    seed: int = 0
    # fixed variance coefficients; sampled from the box when None
    gamma0: tuple | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.k1 < 1 or self.k2 < 0:
            raise ValueError("need k1 >= 1 and k2 >= 0")
        if not 0.0 <= self.crossover_lo <= self.crossover_hi <= 1.0:
            raise ValueError("need 0 <= crossover_lo <= crossover_hi <= 1")
        if self.max_resamples < 1:
            raise ValueError("max_resamples must be at least 1")
        if self.z_kind not in ("bernoulli-half", "continuous-nonneg"):
            raise ValueError(f"unknown z_kind {self.z_kind!r}")
        if self.gamma0 is not None and len(self.gamma0) != self.k2:
            raise ValueError("gamma0 length must equal k2")


PRESETS = {
    "het-paper": DgpConfig(k1=3, k2=2),
    "het-continuous": DgpConfig(k1=3, k2=2, z_kind="continuous-nonneg"),
    "het-gamma6": DgpConfig(k1=3, k2=6, gamma0=(-0.6, 0.84, -0.69, -0.15, -0.16, 0.42)),
    "probit-paper": DgpConfig(k1=5, k2=0),
}


def preset(name: str, **overrides) -> DgpConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, **overrides)


@dataclass(frozen=True)
class SimulatedDataset:
    data: Dataset
    beta0: np.ndarray
    gamma0: np.ndarray
    crossover: float
    resamples_used: int
    config: DgpConfig = field(default=None, compare=False)

    @property
    def params(self) -> ParamVector:
        return ParamVector(self.beta0, self.gamma0)


def _covariates(cfg: DgpConfig, rng: np.random.Generator):
    X = np.ones((cfg.n, cfg.k1))
    X[:, 1:] = rng.integers(0, 2, size=(cfg.n, cfg.k1 - 1))
    if cfg.z_kind == "bernoulli-half":
        Z = rng.integers(0, 2, size=(cfg.n, cfg.k2)).astype(float)
    else:
        Z = rng.random((cfg.n, cfg.k2))
    return X, Z


def _centered_beta(X: np.ndarray, box: float, rng: np.random.Generator) -> np.ndarray:
    beta = np.empty(X.shape[1])
    beta[1:] = rng.uniform(-box, box, size=X.shape[1] - 1)
    # intercept chosen so the sample mean of x'beta is zero
    beta[0] = -np.mean(X[:, 1:] @ beta[1:])
    return beta


def _draw(cfg: DgpConfig, X, Z, rng):
    beta = _centered_beta(X, cfg.param_box, rng)
    if cfg.gamma0 is not None:
        gamma = np.asarray(cfg.gamma0, dtype=float)
    else:
        gamma = rng.uniform(-cfg.param_box, cfg.param_box, size=cfg.k2)
    # exp(z'gamma) is the standard deviation of the disturbance
    eps = rng.standard_normal(cfg.n) * np.exp(Z @ gamma)
    y = (X @ beta + eps >= 0.0).astype(float)
    return beta, gamma, y


def simulate_het(cfg: DgpConfig) -> SimulatedDataset:
    """Draw a heteroskedastic dataset whose crossover lies in the configured band.

    Covariates are drawn once; parameters and disturbances are redrawn
    together until the crossover fraction falls in
    ``[crossover_lo, crossover_hi]``.
    """
    if cfg.k2 < 1:
        raise ValueError("simulate_het needs k2 >= 1; use simulate_probit for k2 == 0")
    cov_seq, attempt_root = np.random.SeedSequence(cfg.seed).spawn(2)
    X, Z = _covariates(cfg, np.random.default_rng(cov_seq))
    seen_lo, seen_hi = 1.0, 0.0
    for attempt in range(cfg.max_resamples):
        (seq,) = attempt_root.spawn(1)
        beta, gamma, y = _draw(cfg, X, Z, np.random.default_rng(seq))
        data = Dataset(y, X, Z)
        c = crossover_fraction(data, beta)
        if cfg.crossover_lo <= c <= cfg.crossover_hi:
            return SimulatedDataset(data, beta, gamma, c, attempt, cfg)
        seen_lo, seen_hi = min(seen_lo, c), max(seen_hi, c)
    raise SimulationError(
        f"no draw in {cfg.max_resamples} attempts had crossover in "
        f"[{cfg.crossover_lo}, {cfg.crossover_hi}]; realized range was [{seen_lo:.4f}, {seen_hi:.4f}]"
    )


def simulate_probit(cfg: DgpConfig) -> SimulatedDataset:
    """Draw a homoskedastic probit dataset (unit-variance disturbances, no crossover rule)."""
    if cfg.k2 != 0:
        raise ValueError("simulate_probit needs k2 == 0")
    cov_seq, attempt_root = np.random.SeedSequence(cfg.seed).spawn(2)
    X, Z = _covariates(cfg, np.random.default_rng(cov_seq))
    beta, gamma, y = _draw(cfg, X, Z, np.random.default_rng(attempt_root.spawn(1)[0]))
    data = Dataset(y, X, Z)
    return SimulatedDataset(data, beta, gamma, crossover_fraction(data, beta), 0, cfg)


def simulate(cfg: DgpConfig) -> SimulatedDataset:
    return simulate_het(cfg) if cfg.k2 else simulate_probit(cfg)


def _beta_scale(gamma: np.ndarray) -> float:
    return float(np.exp(-0.5 * np.sum(gamma)))


def transform_point(p: ParamVector) -> ParamVector:
    """Map ``(beta, gamma)`` to ``(exp(-sum(gamma)/2) * beta, gamma)``."""
    return ParamVector(_beta_scale(p.gamma) * p.beta, p.gamma)


def inverse_transform_point(p: ParamVector) -> ParamVector:
    return ParamVector(p.beta / _beta_scale(p.gamma), p.gamma)


def transform(d: Dataset, p0: ParamVector) -> tuple[Dataset, ParamVector]:
    """Shift every variance covariate by ``-1/2`` and rescale ``p0`` to match.

    The probit index ``x'beta / exp(z'gamma)`` of each row is unchanged, so
    the log-likelihood of the transformed pair equals the original.
    """
    if d.k2 < 1:
        raise ValueError("transform needs at least one variance covariate")
    if p0.k1 != d.k1 or p0.k2 != d.k2:
        raise DimensionError(f"parameter dims ({p0.k1}, {p0.k2}) do not match dataset ({d.k1}, {d.k2})")
    return Dataset(d.y, d.X, d.Z - 0.5), transform_point(p0)


def inverse_transform(d: Dataset, p: ParamVector) -> tuple[Dataset, ParamVector]:
    if p.k1 != d.k1 or p.k2 != d.k2:
        raise DimensionError(f"parameter dims ({p.k1}, {p.k2}) do not match dataset ({d.k1}, {d.k2})")
    return Dataset(d.y, d.X, d.Z + 0.5), inverse_transform_point(p)
