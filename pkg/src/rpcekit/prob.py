"""Marginal distributions, isoprobabilistic transforms and Latin-Hypercube designs.

Every marginal is bound to one standardized reference variable:

* ``uniform(a, b)``  -> uniform on [-1, 1] (Legendre basis), affine map
* ``gaussian``, ``lognormal``, ``gumbel`` -> standard normal (Hermite basis),
  via ``z = Phi^-1(F(x))``

Lognormal and Gumbel marginals are parameterized by the mean and standard
deviation of the variable itself.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import special

EULER_GAMMA = 0.5772156649015329

KINDS = ("uniform", "gaussian", "lognormal", "gumbel")


class DomainError(ValueError):
    """Raised when a point or probability lies outside the admissible domain."""


def _as_array(x):
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class Marginal:
    """A univariate distribution.

    Parameters
    ----------
    kind : str
        One of ``uniform``, ``gaussian``, ``lognormal``, ``gumbel``.
    params : tuple of float
        ``(a, b)`` for uniform, ``(mu, sigma)`` for gaussian and
        ``(mean, std)`` of the variable for lognormal and gumbel.
    """

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown marginal kind {self.kind!r}")
        p = tuple(float(v) for v in self.params)
        if len(p) != 2 or not all(math.isfinite(v) for v in p):
            raise ValueError(f"{self.kind} needs two finite parameters, got {self.params!r}")
        if self.kind == "uniform" and not p[0] < p[1]:
            raise ValueError("uniform(a, b) requires a < b")
        if self.kind != "uniform" and p[1] <= 0:
            raise ValueError(f"{self.kind} requires a positive scale")
        if self.kind == "lognormal" and p[0] <= 0:
            raise ValueError("lognormal requires a positive mean")
        object.__setattr__(self, "params", p)

    # -- derived parameters -------------------------------------------------
    @property
    def family(self) -> str:
        """Polynomial family of the standardized variable."""
        return "legendre" if self.kind == "uniform" else "hermite"

    @property
    def lognormal_params(self):
        """(lambda, zeta) of the underlying normal."""
        mean, std = self.params
        zeta2 = math.log1p((std / mean) ** 2)
        return math.log(mean) - 0.5 * zeta2, math.sqrt(zeta2)

    @property
    def gumbel_params(self):
        """(location, scale) of the max-type Gumbel."""
        mean, std = self.params
        scale = std * math.sqrt(6.0) / math.pi
        return mean - EULER_GAMMA * scale, scale

    @property
    def support(self):
        if self.kind == "uniform":
            return self.params
        if self.kind == "lognormal":
            return (0.0, math.inf)
        return (-math.inf, math.inf)

    @property
    def mean(self) -> float:
        if self.kind == "uniform":
            return 0.5 * (self.params[0] + self.params[1])
        return self.params[0]

    @property
    def std(self) -> float:
        if self.kind == "uniform":
            return (self.params[1] - self.params[0]) / math.sqrt(12.0)
        return self.params[1]

    # -- distribution functions ---------------------------------------------
    def _check_support(self, x):
        lo, hi = self.support
        bad = ~((x >= lo) & (x <= hi))
        if np.any(bad):
            raise DomainError(
                f"{self.kind}{self.params}: {int(bad.sum())} value(s) outside support [{lo}, {hi}], "
                f"e.g. {x[bad].ravel()[:3].tolist()}"
            )

    def cdf(self, x):
        x = _as_array(x)
        if self.kind == "uniform":
            a, b = self.params
            return np.clip((x - a) / (b - a), 0.0, 1.0)
        if self.kind == "gaussian":
            mu, sigma = self.params
            return special.ndtr((x - mu) / sigma)
        if self.kind == "lognormal":
            lam, zeta = self.lognormal_params
            with np.errstate(divide="ignore"):
                return np.where(x > 0, special.ndtr((np.log(np.maximum(x, 1e-300)) - lam) / zeta), 0.0)
        loc, scale = self.gumbel_params
        return np.exp(-np.exp(-(x - loc) / scale))

    def sf(self, x):
        x = _as_array(x)
        if self.kind == "gumbel":
            loc, scale = self.gumbel_params
            return -np.expm1(-np.exp(-(x - loc) / scale))
        if self.kind == "gaussian":
            mu, sigma = self.params
            return special.ndtr(-(x - mu) / sigma)
        return 1.0 - self.cdf(x)

    def quantile(self, u):
        u = _as_array(u)
        if np.any(~((u > 0) & (u < 1))):
            raise DomainError("quantile requires probabilities strictly inside (0, 1)")
        if self.kind == "uniform":
            a, b = self.params
            return a + (b - a) * u
        if self.kind == "gaussian":
            mu, sigma = self.params
            return mu + sigma * special.ndtri(u)
        if self.kind == "lognormal":
            lam, zeta = self.lognormal_params
            return np.exp(lam + zeta * special.ndtri(u))
        loc, scale = self.gumbel_params
        return loc - scale * np.log(-np.log(u))

    # -- standardization ----------------------------------------------------
    def to_standard(self, x):
        x = _as_array(x)
        self._check_support(x)
        if self.kind == "uniform":
            a, b = self.params
            return (2.0 * x - (a + b)) / (b - a)
        if self.kind == "gaussian":
            mu, sigma = self.params
            return (x - mu) / sigma
        if self.kind == "lognormal":
            lam, zeta = self.lognormal_params
            return (np.log(x) - lam) / zeta
        # upper tail through the survival function keeps precision near u = 1
        u = self.cdf(x)
        return np.where(u < 0.5, special.ndtri(u), -special.ndtri(self.sf(x)))

    def from_standard(self, z):
        z = _as_array(z)
        if self.kind == "uniform":
            a, b = self.params
            return 0.5 * (a + b) + 0.5 * (b - a) * z
        if self.kind == "gaussian":
            mu, sigma = self.params
            return mu + sigma * z
        if self.kind == "lognormal":
            lam, zeta = self.lognormal_params
            return np.exp(lam + zeta * z)
        loc, scale = self.gumbel_params
        # -log(F) with F = Phi(z), evaluated stably in both tails
        neg_log_f = -special.log_ndtr(z)
        return loc - scale * np.log(neg_log_f)

    def to_dict(self):
        return {"kind": self.kind, "params": list(self.params)}


def uniform(a, b):
    return Marginal("uniform", (a, b))


def gaussian(mu, sigma):
    return Marginal("gaussian", (mu, sigma))


def lognormal(mean, std):
    return Marginal("lognormal", (mean, std))


def gumbel(mean, std):
    return Marginal("gumbel", (mean, std))


@dataclass(frozen=True)
class InputModel:
    """Independent marginals defining the joint input distribution."""

    marginals: tuple

    def __init__(self, marginals: Iterable[Marginal]):
        marginals = tuple(marginals)
        if not marginals:
            raise ValueError("an input model needs at least one marginal")
        object.__setattr__(self, "marginals", marginals)

    @property
    def dim(self) -> int:
        return len(self.marginals)

    @property
    def families(self) -> list:
        return [m.family for m in self.marginals]

    def _check_shape(self, x):
        x = np.atleast_2d(_as_array(x))
        if x.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim} columns, got {x.shape[1]}")
        return x

    def to_standard(self, x):
        """Map physical points (Q x M) to standardized coordinates."""
        x = self._check_shape(x)
        out = np.empty_like(x)
        bad = []
        for i, m in enumerate(self.marginals):
            try:
                out[:, i] = m.to_standard(x[:, i])
            except DomainError as exc:
                bad.append(f"x{i + 1}: {exc}")
        if bad:
            raise DomainError("; ".join(bad))
        return out

    def from_standard(self, z):
        z = self._check_shape(z)
        return np.column_stack([m.from_standard(z[:, i]) for i, m in enumerate(self.marginals)])

    def to_json(self) -> str:
        return json.dumps([m.to_dict() for m in self.marginals])

    @classmethod
    def from_json(cls, text: str) -> "InputModel":
        return cls.from_list(json.loads(text))

    @classmethod
    def from_list(cls, items) -> "InputModel":
        return cls(Marginal(d["kind"], tuple(d["params"])) for d in items)


@dataclass
class ExperimentalDesign:
    """Training inputs ``X`` (N x M, physical space) and optional responses ``y``."""

    X: np.ndarray
    y: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        if self.y is not None:
            self.y = np.asarray(self.y, dtype=float).ravel()
            if self.y.shape[0] != self.X.shape[0]:
                raise ValueError("X and y have different numbers of rows")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def evaluate(self, func) -> "ExperimentalDesign":
        """Fill ``y`` by evaluating ``func`` on the rows of ``X``."""
        self.y = np.asarray(func(self.X), dtype=float).ravel()
        return self

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = [f"x{i + 1}" for i in range(self.dim)]
        if self.y is not None:
            header.append("y")
        writer.writerow(header)
        for n in range(self.n):
            row = [repr(float(v)) for v in self.X[n]]
            if self.y is not None:
                row.append(repr(float(self.y[n])))
            writer.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ExperimentalDesign":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty design file")
        header = [h.strip() for h in rows[0]]
        has_y = header[-1] == "y"
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
        if data.ndim != 2 or data.shape[0] == 0:
            raise ValueError("design file has no data rows")
        if has_y:
            return cls(data[:, :-1], data[:, -1])
        return cls(data)


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def lhs_sample(model: InputModel, n: int, seed=0, centered: bool = False) -> ExperimentalDesign:
    """Latin-Hypercube design of ``n`` points.

    Each column gets an independent permutation of the ``n`` probability
    strata and a uniform jitter inside its stratum (stratum midpoints when
    ``centered``). Every dimension draws from its own seeded substream, so the
    design is a deterministic function of ``(model, n, seed)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    streams = _seed_sequence(seed).spawn(model.dim)
    X = np.empty((n, model.dim))
    for i, (m, ss) in enumerate(zip(model.marginals, streams)):
        rng = np.random.default_rng(ss)
        perm = rng.permutation(n)
        jitter = np.full(n, 0.5) if centered else rng.random(n)
        u = (perm + jitter) / n
        u = np.clip(u, 1e-16, 1.0 - 1e-16)
        X[:, i] = m.quantile(u)
    return ExperimentalDesign(X, seed=seed if isinstance(seed, (int, np.integer)) else None)


def derive_seed(*keys: int) -> int:
    """A 32-bit integer seed derived deterministically from a key path."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])
