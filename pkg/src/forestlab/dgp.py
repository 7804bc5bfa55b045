"""Data-generating processes: covariate laws, regression functions, noise.

Three regression functions are supported, each reading only its leading
`relevant_count` coordinates so that any extra columns are irrelevant:

* ``linear``  f(x) = x1 + x2 + x3 + x4 + x5
* ``mars``    f(x) = 10 sin(pi x1 x2) + 20 (x3 - 0.05)^2 + 10 x4 + 5 x5
* ``hidden``  f(x) = x1 - 1(0.6 <= x2 <= 0.65)

Responses are ``y = g(x) + eps`` with ``g = f / sigma_f`` when normalized
(``g = f`` otherwise) and ``eps ~ N(0, sigma_eps^2)``, where ``sigma_eps``
is fixed by the signal-to-noise ratio ``Var(g(X)) / sigma_eps^2``.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from forestlab.errors import InputError, NumericError
from forestlab.seeding import SeedLike, derive, generator

#: Seed of the sigma_f calibration draws; shared by every experiment.
CALIBRATION_SEED = 20241031
#: Number of covariate draws used to estimate sigma_f.
CALIBRATION_N = 100_000


class LawKind(str, enum.Enum):
    UNIFORM = "uniform"
    NORMAL = "normal"
    EQUICORRELATED = "equicorrelated"


class RegressionKind(str, enum.Enum):
    LINEAR = "linear"
    MARS = "mars"
    HIDDEN = "hidden"

    @property
    def relevant_count(self) -> int:
        return 2 if self is RegressionKind.HIDDEN else 5


@dataclass(frozen=True)
class CovariateLaw:
    """Joint law of the covariate vector.

    ``uniform`` is i.i.d. U(0, 1), ``normal`` i.i.d. N(0, 1) and
    ``equicorrelated`` is N(0, S) with unit diagonal and every off-diagonal
    entry equal to `rho`.
    """

    kind: LawKind
    rho: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", LawKind(self.kind))
        rho = float(self.rho)
        if not (0.0 <= rho <= 1.0):
            raise InputError(f"rho must lie in [0, 1], got {self.rho}")
        if self.kind is not LawKind.EQUICORRELATED and rho != 0.0:
            raise InputError(f"rho is only meaningful for the equicorrelated law, got rho={rho} for {self.kind.value}")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def parse(cls, name: str, rho: float = 0.0) -> "CovariateLaw":
        aliases = {"u": "uniform", "n": "normal", "iid_uniform01": "uniform",
                   "iid_standard_normal": "normal", "equicorrelated_normal": "equicorrelated"}
        key = str(name).strip().lower()
        key = aliases.get(key, key)
        try:
            kind = LawKind(key)
        except ValueError:
            raise InputError(f"unknown covariate law {name!r}; expected one of "
                             f"{[k.value for k in LawKind]}") from None
        return cls(kind, rho)

    @property
    def short(self) -> str:
        if self.kind is LawKind.UNIFORM:
            return "U"
        if self.kind is LawKind.NORMAL:
            return "N"
        return f"N(rho={self.rho:g})"


def _as_kind(f) -> RegressionKind:
    try:
        return RegressionKind(f)
    except ValueError:
        raise InputError(f"unknown regression function {f!r}; expected one of "
                         f"{[k.value for k in RegressionKind]}") from None


def eval_regression(f: RegressionKind | str, x) -> np.ndarray | float:
    """Raw (un-normalized) regression function at a point or at each row of `x`."""
    kind = _as_kind(f)
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 1
    if arr.ndim not in (1, 2):
        raise InputError(f"x must be a vector or a matrix, got shape {arr.shape}")
    rows = arr.reshape(1, -1) if scalar else arr
    if rows.shape[1] < kind.relevant_count:
        raise InputError(f"{kind.value} reads {kind.relevant_count} covariates, got {rows.shape[1]}")

    if kind is RegressionKind.LINEAR:
        out = rows[:, 0] + rows[:, 1] + rows[:, 2] + rows[:, 3] + rows[:, 4]
    elif kind is RegressionKind.MARS:
        out = (10.0 * np.sin(np.pi * rows[:, 0] * rows[:, 1])
               + 20.0 * (rows[:, 2] - 0.05) ** 2
               + 10.0 * rows[:, 3]
               + 5.0 * rows[:, 4])
    else:
        x2 = rows[:, 1]
        out = rows[:, 0] - ((x2 >= 0.6) & (x2 <= 0.65)).astype(np.float64)
    return float(out[0]) if scalar else out


def sample_covariates(law: CovariateLaw, n: int, p: int, seed: SeedLike) -> np.ndarray:
    """Draw an ``n x p`` covariate matrix.

    The equicorrelated law uses the single-factor construction
    ``x_j = sqrt(rho) z0 + sqrt(1 - rho) z_j``, which is exact for a
    constant correlation and stays valid at ``rho = 1`` where the
    covariance matrix is singular.
    """
    if not isinstance(law, CovariateLaw):
        raise InputError(f"law must be a CovariateLaw, got {type(law).__name__}")
    if n < 1 or p < 1:
        raise InputError(f"need n >= 1 and p >= 1, got n={n}, p={p}")
    rng = generator(seed)
    if law.kind is LawKind.UNIFORM:
        return rng.random((n, p))
    if law.kind is LawKind.NORMAL:
        return rng.standard_normal((n, p))
    z = rng.standard_normal((n, p + 1))
    return math.sqrt(law.rho) * z[:, :1] + math.sqrt(1.0 - law.rho) * z[:, 1:]


def estimate_sigma_f(f: RegressionKind | str, law: CovariateLaw, p_total: int,
                     calib_n: int = CALIBRATION_N, seed: SeedLike = CALIBRATION_SEED) -> float:
    """Sample standard deviation of f(X) over `calib_n` covariate draws."""
    kind = _as_kind(f)
    if calib_n < 10_000:
        raise InputError(f"calib_n must be at least 10000, got {calib_n}")
    if p_total < kind.relevant_count:
        raise InputError(f"p_total={p_total} is below the {kind.relevant_count} relevant covariates")
    x = sample_covariates(law, calib_n, p_total, derive(seed, "calibration"))
    sd = float(np.std(eval_regression(kind, x), ddof=1))
    if not sd > 0.0:
        raise NumericError(f"f(X) has zero variance under {law}; normalization is undefined")
    return sd


@dataclass(frozen=True)
class DgpSpec:
    """A fully resolved data-generating process."""

    f: RegressionKind
    law: CovariateLaw
    p_total: int
    snr: float
    normalized: bool
    sigma_f: float
    sigma_eps: float

    @property
    def relevant_count(self) -> int:
        return self.f.relevant_count

    @property
    def irrelevant_count(self) -> int:
        return self.p_total - self.f.relevant_count

    @property
    def signal_scale(self) -> float:
        """Divisor applied to f: sigma_f when normalized, else 1."""
        return self.sigma_f if self.normalized else 1.0

    def signal(self, x: np.ndarray) -> np.ndarray:
        """Noiseless response g(x) (normalized when the spec says so)."""
        return eval_regression(self.f, x) / self.signal_scale


def resolve_spec(f: RegressionKind | str, law: CovariateLaw, p_total: int, snr: float,
                 normalized: bool, *, calib_n: int = CALIBRATION_N,
                 calib_seed: SeedLike = CALIBRATION_SEED,
                 sigma_f: float | None = None) -> DgpSpec:
    """Build a DgpSpec, estimating sigma_f by Monte Carlo unless it is given."""
    kind = _as_kind(f)
    if p_total < kind.relevant_count:
        raise InputError(f"p_total={p_total} is below the {kind.relevant_count} relevant covariates of {kind.value}")
    if not (snr > 0 and math.isfinite(snr)):
        raise InputError(f"snr must be positive and finite, got {snr}")
    if sigma_f is None:
        sigma_f = estimate_sigma_f(kind, law, p_total, calib_n, calib_seed)
    elif not sigma_f > 0:
        raise InputError(f"sigma_f must be positive, got {sigma_f}")
    effective = 1.0 if normalized else sigma_f
    return DgpSpec(f=kind, law=law, p_total=int(p_total), snr=float(snr),
                   normalized=bool(normalized), sigma_f=float(sigma_f),
                   sigma_eps=effective / math.sqrt(snr))


@dataclass(frozen=True, eq=False)
class Dataset:
    """A simulated sample; `signal` holds the noiseless g(x_i)."""

    x: np.ndarray
    y: np.ndarray
    signal: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("x", "y", "signal"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.x.ndim != 2 or self.x.shape[0] < 1:
            raise InputError(f"x must be a non-empty n x p matrix, got shape {self.x.shape}")
        if self.y.shape != (self.x.shape[0],) or self.signal.shape != self.y.shape:
            raise InputError("x, y and signal disagree on the number of observations")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self.x.shape, dtype=np.int64).tobytes())
        h.update(self.x.tobytes())
        h.update(self.y.tobytes())
        return h.hexdigest()


def generate_dataset(spec: DgpSpec, n: int, seed: SeedLike) -> Dataset:
    """Draw n observations from `spec`.

    Covariates come from the ``"covariates"`` sub-stream of `seed` and the
    standard normal noise from ``"noise"``; the two never share draws.
    """
    if n < 1:
        raise InputError(f"n must be at least 1, got {n}")
    x = sample_covariates(spec.law, n, spec.p_total, derive(seed, "covariates"))
    g = spec.signal(x)
    eps = generator(seed, "noise").standard_normal(n)
    return Dataset(x=x, y=g + spec.sigma_eps * eps, signal=g)
