"""Heteroskedastic probit log-likelihood.

The success probability of observation ``i`` is ``Phi(x_i'beta / exp(z_i'gamma))``.
A dataset with zero variance columns (``k2 == 0``) is the ordinary probit
model; there is no separate code path for it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import erfc, erfcx

LN2 = math.log(2.0)

# Floor returned in place of -inf; the `degenerate` flag is set alongside it.
DEGENERATE_FLOOR = -1e300

# exp(z'gamma) is clamped into [1e-300, 1e300].
_LOG_SCALE_MIN = math.log(1e-300)
_LOG_SCALE_MAX = math.log(1e300)

_SQRT2 = math.sqrt(2.0)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class DimensionError(ValueError):
    """Parameter or data shapes do not agree."""


class InputError(ValueError):
    """Data or parameters contain values outside the model's domain."""


@dataclass(frozen=True)
class Dataset:
    """Binary outcomes ``y`` with choice covariates ``X`` and variance covariates ``Z``."""

    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray = field(default=None)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        n = y.shape[0]
        if self.Z is None:
            Z = np.zeros((n, 0))
        else:
            Z = np.asarray(self.Z, dtype=float)
            if Z.ndim == 1:
                Z = Z.reshape(-1, 1)
        if n < 1:
            raise InputError("dataset needs at least one observation")
        if X.ndim != 2 or Z.ndim != 2 or X.shape[0] != n or Z.shape[0] != n:
            raise DimensionError(
                f"row counts differ: y has {n}, X has {X.shape[0]}, Z has {Z.shape[0]}"
            )
        if X.shape[1] < 1:
            raise DimensionError("X needs at least one column")
        if not np.all((y == 0) | (y == 1)):
            raise InputError("y entries must be 0 or 1")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Z))):
            raise InputError("X and Z must be finite")
        for name, arr in (("y", y), ("X", X), ("Z", Z)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def k1(self) -> int:
        return self.X.shape[1]

    @property
    def k2(self) -> int:
        return self.Z.shape[1]


@dataclass(frozen=True)
class ParamVector:
    """A point ``(beta, gamma)`` in parameter space."""

    beta: np.ndarray
    gamma: np.ndarray = field(default=None)

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float).reshape(-1)
        gamma = np.zeros(0) if self.gamma is None else np.array(self.gamma, dtype=float).reshape(-1)
        for name, arr in (("beta", beta), ("gamma", gamma)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_flat(cls, x, k1: int) -> "ParamVector":
        x = np.asarray(x, dtype=float).reshape(-1)
        return cls(x[:k1], x[k1:])

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate([self.beta, self.gamma])

    @property
    def k1(self) -> int:
        return self.beta.shape[0]

    @property
    def k2(self) -> int:
        return self.gamma.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ParamVector):
            return NotImplemented
        return np.array_equal(self.beta, other.beta) and np.array_equal(self.gamma, other.gamma)

    def __hash__(self):
        return hash((self.beta.tobytes(), self.gamma.tobytes()))


class LikelihoodEval(NamedTuple):
    value: float
    normalized: float
    degenerate: bool = False


class PlateauApproximation(NamedTuple):
    value: float
    negative_z: bool


def log_ndtr(a):
    """Natural log of the standard normal CDF, accurate deep into both tails.

    Uses the scaled complementary error function below ``a = -1`` so that the
    Gaussian factor is handled analytically, e.g. ``log_ndtr(-40)`` is about
    ``-804.6`` instead of ``-inf``.
    """
    a = np.asarray(a, dtype=float)
    out = np.empty_like(a)
    left = a < -1.0
    al = a[left]
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out[left] = np.log(0.5 * erfcx(-al / _SQRT2)) - 0.5 * al * al
    ar = a[~left]
    out[~left] = np.log1p(-0.5 * erfc(ar / _SQRT2))
    return out


def inverse_mills(a):
    """``phi(a) / Phi(a)`` evaluated without forming either factor."""
    a = np.asarray(a, dtype=float)
    with np.errstate(over="ignore"):
        return _SQRT_2_OVER_PI / erfcx(-a / _SQRT2)


def _check_dims(d: Dataset, beta: np.ndarray, gamma: np.ndarray):
    if beta.shape != (d.k1,) or gamma.shape != (d.k2,):
        raise DimensionError(
            f"parameter has dims ({beta.shape[0]}, {gamma.shape[0]}), "
            f"dataset expects ({d.k1}, {d.k2})"
        )
    if not (np.all(np.isfinite(beta)) and np.all(np.isfinite(gamma))):
        raise InputError("parameter components must be finite")


def _index(d: Dataset, beta: np.ndarray, gamma: np.ndarray):
    """Return the probit index ``a`` and the log-scale ``z'gamma`` (clamped) with its clamp mask."""
    log_scale = d.Z @ gamma if d.k2 else np.zeros(d.n)
    clamped = (log_scale < _LOG_SCALE_MIN) | (log_scale > _LOG_SCALE_MAX)
    log_scale = np.clip(log_scale, _LOG_SCALE_MIN, _LOG_SCALE_MAX)
    with np.errstate(over="ignore", invalid="ignore"):
        a = (d.X @ beta) / np.exp(log_scale)
    return a, np.exp(log_scale), clamped


def loglik_terms(d: Dataset, beta, gamma) -> np.ndarray:
    """Per-observation contributions ``y ln Phi(a) + (1-y) ln(1 - Phi(a))``."""
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    _check_dims(d, beta, gamma)
    a, _, _ = _index(d, beta, gamma)
    # 1 - Phi(a) == Phi(-a), so each term is log_ndtr of the signed index.
    q = 2.0 * d.y - 1.0
    return log_ndtr(q * a)


def _sum_terms(terms: np.ndarray) -> tuple[float, bool]:
    bad = ~np.isfinite(terms) | (terms < DEGENERATE_FLOOR)
    if bad.any():
        terms = np.where(bad, DEGENERATE_FLOOR, terms)
    with np.errstate(over="ignore"):
        total = float(np.sum(terms))
    if not total >= DEGENERATE_FLOOR:
        return DEGENERATE_FLOOR, True
    return min(total, 0.0), bool(bad.any())


def loglik_value(d: Dataset, beta, gamma) -> tuple[float, bool]:
    """Fast path returning ``(value, degenerate)``."""
    return _sum_terms(loglik_terms(d, beta, gamma))


def log_likelihood(d: Dataset, p: ParamVector) -> LikelihoodEval:
    """Log-likelihood of ``p`` on ``d``.

    Returns a :class:`LikelihoodEval` with the total, the per-observation
    average and a flag set when some term underflowed to the
    :data:`DEGENERATE_FLOOR` sentinel.
    """
    value, degenerate = loglik_value(d, p.beta, p.gamma)
    return LikelihoodEval(value, value / d.n, degenerate)


def gradient(d: Dataset, p: ParamVector) -> np.ndarray:
    """Analytic gradient ``(dl/dbeta, dl/dgamma)`` as one flat vector."""
    return gradient_flat(d, p.beta, p.gamma)


def gradient_flat(d: Dataset, beta, gamma) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    _check_dims(d, beta, gamma)
    a, scale, clamped = _index(d, beta, gamma)
    q = 2.0 * d.y - 1.0
    # w = phi(a)(y - Phi(a)) / (Phi(a)(1 - Phi(a))) = q * lambda(q a)
    w = q * inverse_mills(q * a)
    with np.errstate(over="ignore", invalid="ignore"):
        g_beta = d.X.T @ (w / scale)
        if d.k2:
            wa = np.where(clamped, 0.0, w * a)
            g_gamma = -(d.Z.T @ wa)
        else:
            g_gamma = np.zeros(0)
    return np.concatenate([g_beta, g_gamma])


def plateau_approximation(d: Dataset, beta) -> PlateauApproximation:
    """Limit of the log-likelihood as every variance coefficient grows large.

    Rows with ``z_i == 0`` keep their ordinary probit contribution at
    ``beta``; every other row contributes ``-ln 2``. The limit assumes
    ``Z >= 0``, so ``negative_z`` reports whether that assumption fails.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (d.k1,):
        raise DimensionError(f"beta has {beta.shape[0]} components, dataset expects {d.k1}")
    zero_rows = np.all(d.Z == 0.0, axis=1)
    q = 2.0 * d.y[zero_rows] - 1.0
    head = log_ndtr(q * (d.X[zero_rows] @ beta))
    value = float(np.sum(head)) - LN2 * int(np.count_nonzero(~zero_rows))
    return PlateauApproximation(value, bool(np.any(d.Z < 0)))


def benchmark_value(d_or_n) -> float:
    """``-n ln 2``: the log-likelihood when every fitted probability is one half."""
    n = d_or_n.n if isinstance(d_or_n, Dataset) else int(d_or_n)
    return -n * LN2


def crossover_fraction(d: Dataset, beta0) -> float:
    """Share of rows whose outcome disagrees with ``1(x_i'beta0 >= 0)``."""
    beta0 = np.asarray(beta0, dtype=float)
    if beta0.shape != (d.k1,):
        raise DimensionError(f"beta0 has {beta0.shape[0]} components, dataset expects {d.k1}")
    predicted = (d.X @ beta0 >= 0.0).astype(float)
    return float(np.count_nonzero(d.y != predicted)) / d.n
