"""Bias-variance decompositions, tree decorrelation and paired comparisons.

A :class:`RunAccumulator` holds streaming sums over training replicates
("runs") for a fixed test set of J points with known signal ``f_j`` and
noisy response ``y_j``.  Per run it receives the ensemble predictions
``p_j`` and, optionally, the per-point sums ``S_j = sum_b d_b`` and
``Q_j = sum_b d_b^2`` of the centred tree predictions ``d_b = t_b - f_j``.
Centring on the signal leaves every variance and covariance unchanged
and keeps the sums from cancelling when predictions are large.

Two decompositions of the mean squared signal error are available:

* conditional on x (the headline one): per point, bias_j is the gap
  between f_j and the mean prediction and var_j the spread of predictions
  across runs (divisor W); both are then averaged over points;
* conditional on the fitted model: per run, the mean and the variance over
  points of ``f_j - p_j`` (divisor J), averaged over runs.

Both split the same grand mean of ``(f_j - p_{w,j})^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from forestlab.errors import InputError, NumericError

_DEGENERATE_RTOL = 1e-12


def tree_moments(per_tree_preds: np.ndarray, signal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-point ``(S, Q)`` of tree predictions centred on `signal`.

    `per_tree_preds` is ``B x J``.
    """
    t = np.asarray(per_tree_preds, dtype=np.float64)
    f = np.asarray(signal, dtype=np.float64)
    if t.ndim != 2 or t.shape[1] != f.shape[0]:
        raise InputError(f"per-tree predictions must be B x {f.shape[0]}, got {t.shape}")
    d = t - f
    return d.sum(axis=0), np.einsum("bj,bj->j", d, d)


@dataclass
class RunAccumulator:
    """Streaming sufficient statistics for one method over W runs."""

    signal: np.ndarray
    response: np.ndarray
    B: int | None = None
    W: int = 0
    sum_d: np.ndarray = field(default=None, repr=False)
    sum_d2: np.ndarray = field(default=None, repr=False)
    sum_sqerr_y: np.ndarray = field(default=None, repr=False)
    sum_S: np.ndarray = field(default=None, repr=False)
    sum_Q: np.ndarray = field(default=None, repr=False)
    sum_S2: np.ndarray = field(default=None, repr=False)
    mse_run: list = field(default_factory=list, repr=False)
    err_mean_run: list = field(default_factory=list, repr=False)
    err_var_run: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.signal = np.asarray(self.signal, dtype=np.float64)
        self.response = np.asarray(self.response, dtype=np.float64)
        if self.signal.ndim != 1 or self.signal.shape != self.response.shape:
            raise InputError("signal and response must be vectors of equal length")
        J = self.J
        for name in ("sum_d", "sum_d2", "sum_sqerr_y", "sum_S", "sum_Q", "sum_S2"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(J))

    @property
    def J(self) -> int:
        return self.signal.shape[0]

    @property
    def has_tree_stats(self) -> bool:
        return self.B is not None

    def add_run(self, ensemble_preds, tree_stats=None, B: int | None = None) -> "RunAccumulator":
        p = np.asarray(ensemble_preds, dtype=np.float64)
        if p.shape != (self.J,):
            raise InputError(f"ensemble predictions must have length {self.J}, got shape {p.shape}")
        if tree_stats is not None:
            S, Q = (np.asarray(a, dtype=np.float64) for a in tree_stats)
            if S.shape != (self.J,) or Q.shape != (self.J,):
                raise InputError(f"tree statistics must have length {self.J}")
            if B is None or int(B) < 1:
                raise InputError("B is required alongside tree statistics")
            if self.W > 0 and self.B is None:
                raise InputError("tree statistics must be supplied for every run or none")
            if self.W > 0 and self.B != int(B):
                raise InputError(f"B changed between runs ({self.B} -> {B})")
            self.B = int(B)
        elif self.B is not None:
            raise InputError("tree statistics must be supplied for every run or none")

        d = p - self.signal
        r = self.response - p
        self.sum_d += d
        self.sum_d2 += d * d
        self.sum_sqerr_y += r * r
        if tree_stats is not None:
            self.sum_S += S
            self.sum_Q += Q
            self.sum_S2 += S * S
        e = -d
        e_mean = float(e.mean())
        self.mse_run.append(float(np.mean(r * r)))
        self.err_mean_run.append(e_mean)
        self.err_var_run.append(float(np.mean((e - e_mean) ** 2)))
        self.W += 1
        return self

    def merge(self, other: "RunAccumulator") -> "RunAccumulator":
        """Field-wise sum with an accumulator over a disjoint set of runs."""
        if not (np.array_equal(self.signal, other.signal) and np.array_equal(self.response, other.response)):
            raise InputError("accumulators refer to different test sets")
        if self.W and other.W and self.B != other.B:
            raise InputError(f"cannot merge accumulators with B={self.B} and B={other.B}")
        out = RunAccumulator(self.signal, self.response, B=self.B if self.W else other.B)
        out.W = self.W + other.W
        for name in ("sum_d", "sum_d2", "sum_sqerr_y", "sum_S", "sum_Q", "sum_S2"):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        for name in ("mse_run", "err_mean_run", "err_var_run"):
            setattr(out, name, list(getattr(self, name)) + list(getattr(other, name)))
        return out

    def _require(self, min_runs: int):
        if self.W < min_runs:
            raise NumericError(f"need at least {min_runs} run(s), accumulator has {self.W}")

    def point_stats(self) -> "PointStats":
        """Per-point conditional bias, variance and MSE across runs."""
        self._require(1)
        mean_d = self.sum_d / self.W
        var = np.maximum(self.sum_d2 / self.W - mean_d ** 2, 0.0)
        return PointStats(bias=-mean_d, variance=var, mse=self.sum_sqerr_y / self.W)


def accumulate_run(acc: RunAccumulator, ensemble_preds, per_tree_stats, test_y) -> RunAccumulator:
    """Add one (training set, method) run to `acc` in place and return it.

    `per_tree_stats` is ``(S, Q, B)`` as produced by :func:`tree_moments`
    plus the tree count, or None when tree predictions were not kept.
    """
    if not np.array_equal(np.asarray(test_y, dtype=np.float64), acc.response):
        raise InputError("test_y does not match the accumulator's test responses")
    if per_tree_stats is None:
        return acc.add_run(ensemble_preds)
    S, Q, B = per_tree_stats
    return acc.add_run(ensemble_preds, (S, Q), B)


@dataclass(frozen=True)
class PointStats:
    bias: np.ndarray
    variance: np.ndarray
    mse: np.ndarray

    @property
    def bias_sq(self) -> np.ndarray:
        return self.bias ** 2


@dataclass(frozen=True)
class TreeDiagnostics:
    tree_variance: float
    pairwise_correlation: float
    correlation_ratio_of_means: float
    mean_covariance: float
    degenerate_points: int
    clamped_points: int


@dataclass(frozen=True)
class DecompositionReport:
    bias_sq: float
    variance: float
    tree_variance: float
    pairwise_correlation: float
    irreducible: float
    mse_empirical: float
    mse_plugin: float
    irreducible_empirical: float = math.nan
    correlation_ratio_of_means: float = math.nan
    degenerate_points: int = 0
    clamped_points: int = 0


def tree_diagnostics_detail(acc: RunAccumulator, B: int | None = None) -> TreeDiagnostics:
    """Average tree variance and pairwise tree correlation over test points.

    The cross moment uses all tree pairs within a run,
    ``(S^2 - Q) / (B (B - 1))``.  Points where trees never vary get
    correlation 1; estimates outside [-1, 1] are clamped.  Both events are
    counted in the result.
    """
    acc._require(2)
    if not acc.has_tree_stats:
        raise InputError("accumulator holds no tree statistics")
    B = acc.B if B is None else int(B)
    if B != acc.B:
        raise InputError(f"B={B} does not match the accumulated B={acc.B}")
    if B < 2:
        raise InputError("pairwise correlation needs B >= 2")
    N = acc.W * B
    mean_t = acc.sum_S / N
    second = acc.sum_Q / N
    tree_var = second - mean_t ** 2
    cross = (acc.sum_S2 - acc.sum_Q) / (acc.W * B * (B - 1))
    cov = cross - mean_t ** 2
    degenerate = tree_var <= _DEGENERATE_RTOL * np.maximum(second, np.finfo(float).tiny)
    tree_var = np.where(degenerate, 0.0, tree_var)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(degenerate, 1.0, cov / np.where(degenerate, 1.0, tree_var))
    clamped = int(np.count_nonzero((corr < -1.0) | (corr > 1.0)))
    corr = np.clip(corr, -1.0, 1.0)
    mean_var = float(tree_var.mean())
    ratio = float(cov.mean() / mean_var) if mean_var > 0 else 1.0
    return TreeDiagnostics(tree_variance=mean_var, pairwise_correlation=float(corr.mean()),
                           correlation_ratio_of_means=ratio, mean_covariance=float(cov.mean()),
                           degenerate_points=int(np.count_nonzero(degenerate)), clamped_points=clamped)


def tree_diagnostics(acc: RunAccumulator, B: int | None = None) -> tuple[float, float]:
    """``(tree_variance, pairwise_correlation)`` averaged over test points."""
    diag = tree_diagnostics_detail(acc, B)
    return diag.tree_variance, diag.pairwise_correlation


def decompose_conditional_on_x(acc: RunAccumulator, sigma_eps: float) -> DecompositionReport:
    """Squared bias, variance and MSE, conditioning on the test point first."""
    acc._require(2)
    stats = acc.point_stats()
    bias_sq = float(np.mean(stats.bias_sq))
    variance = float(np.mean(stats.variance))
    irreducible = float(sigma_eps) ** 2
    mse_empirical = float(np.sum(acc.sum_sqerr_y) / (acc.W * acc.J))
    if acc.has_tree_stats and acc.B >= 2:
        diag = tree_diagnostics_detail(acc)
    else:
        diag = TreeDiagnostics(math.nan, math.nan, math.nan, math.nan, 0, 0)
    return DecompositionReport(
        bias_sq=bias_sq,
        variance=variance,
        tree_variance=diag.tree_variance,
        pairwise_correlation=diag.pairwise_correlation,
        irreducible=irreducible,
        mse_empirical=mse_empirical,
        mse_plugin=bias_sq + variance + irreducible,
        irreducible_empirical=float(np.mean((acc.response - acc.signal) ** 2)),
        correlation_ratio_of_means=diag.correlation_ratio_of_means,
        degenerate_points=diag.degenerate_points,
        clamped_points=diag.clamped_points,
    )


def decompose_conditional_on_fhat(errors) -> tuple[float, float]:
    """``(bias_sq, variance)`` conditioning on the fitted model first.

    `errors` is the ``W x J`` matrix of ``f_j - p_{w,j}``.
    """
    e = np.asarray(errors, dtype=np.float64)
    if e.ndim != 2 or e.shape[0] < 1:
        raise InputError(f"errors must be a W x J matrix with W >= 1, got shape {e.shape}")
    if e.shape[1] < 2:
        raise NumericError("need at least two test points per run")
    b = e.mean(axis=1)
    v = ((e - b[:, None]) ** 2).mean(axis=1)
    return float(np.mean(b ** 2)), float(np.mean(v))


def fhat_decomposition(acc: RunAccumulator) -> tuple[float, float]:
    """Streaming counterpart of :func:`decompose_conditional_on_fhat`."""
    acc._require(1)
    if acc.J < 2:
        raise NumericError("need at least two test points per run")
    b = np.asarray(acc.err_mean_run)
    return float(np.mean(b ** 2)), float(np.mean(acc.err_var_run))


def decorrelation_identity_gap(report: DecompositionReport) -> float:
    """Relative gap ``|Var - Corr * TreeVar| / Var`` of the large-B identity."""
    if not report.variance > 0:
        raise NumericError("ensemble variance is zero; the relative gap is undefined")
    return abs(report.variance - report.pairwise_correlation * report.tree_variance) / report.variance


def relative_difference(mse_bag: float, mse_forest: float) -> float:
    """Percentage MSE difference of bagging over forest."""
    if not mse_forest > 0:
        raise NumericError(f"forest MSE must be positive, got {mse_forest}")
    return 100.0 * (mse_bag - mse_forest) / mse_forest


def paired_t(z) -> tuple[float, float, float]:
    """``(t, z_bar, z_std)`` for per-run differences `z` (sample sd, divisor W - 1)."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] < 2:
        raise InputError(f"need at least two paired runs, got shape {z.shape}")
    z_bar = float(z.mean())
    z_std = float(z.std(ddof=1))
    if not z_std > 0:
        raise NumericError("per-run differences have zero spread; t is undefined")
    return z_bar / (z_std / math.sqrt(z.shape[0])), z_bar, z_std


@dataclass(frozen=True)
class ComparisonReport:
    bagging: DecompositionReport
    forest: DecompositionReport
    delta_r_percent: float
    t_statistic: float
    z_bar: float
    z_std: float
    W: int


def compare(acc_bag: RunAccumulator, acc_forest: RunAccumulator, sigma_eps: float) -> ComparisonReport:
    """Decompose both methods and test their paired MSE difference.

    When the per-run differences have no spread (identical methods) the
    t statistic is reported as NaN.
    """
    if acc_bag.W != acc_forest.W:
        raise InputError(f"methods saw different numbers of runs ({acc_bag.W} vs {acc_forest.W})")
    bag = decompose_conditional_on_x(acc_bag, sigma_eps)
    forest = decompose_conditional_on_x(acc_forest, sigma_eps)
    z = np.asarray(acc_bag.mse_run) - np.asarray(acc_forest.mse_run)
    try:
        t, z_bar, z_std = paired_t(z)
    except NumericError:
        t, z_bar, z_std = math.nan, float(z.mean()), 0.0
    return ComparisonReport(bagging=bag, forest=forest,
                            delta_r_percent=relative_difference(bag.mse_empirical, forest.mse_empirical),
                            t_statistic=t, z_bar=z_bar, z_std=z_std, W=acc_bag.W)


@dataclass(frozen=True)
class SliceBin:
    bin_low: float
    bin_high: float
    bin_mid: float
    d_mse: float
    d_bias_sq: float
    d_var: float
    count: int


def conditional_slice(bagging: PointStats, forest: PointStats, covariate_values, bins: int) -> list[SliceBin]:
    """Bagging-minus-forest conditional MSE, bias^2 and variance by quantile bin.

    Points are sorted by the covariate and cut into `bins` groups of
    (nearly) equal count; each bin reports the mean difference over its
    points.
    """
    if int(bins) < 2:
        raise InputError(f"bins must be at least 2, got {bins}")
    v = np.asarray(covariate_values, dtype=np.float64)
    if v.ndim != 1 or v.shape != bagging.mse.shape or v.shape != forest.mse.shape:
        raise InputError("covariate values and point statistics must have the same length")
    if np.unique(v).shape[0] < bins:
        raise InputError(f"only {np.unique(v).shape[0]} distinct covariate values for {bins} bins")
    order = np.argsort(v, kind="stable")
    d_mse = bagging.mse - forest.mse
    d_bias = bagging.bias_sq - forest.bias_sq
    d_var = bagging.variance - forest.variance
    out = []
    for chunk in np.array_split(order, int(bins)):
        lo, hi = float(v[chunk[0]]), float(v[chunk[-1]])
        out.append(SliceBin(bin_low=lo, bin_high=hi, bin_mid=0.5 * (lo + hi),
                            d_mse=float(d_mse[chunk].mean()), d_bias_sq=float(d_bias[chunk].mean()),
                            d_var=float(d_var[chunk].mean()), count=int(chunk.shape[0])))
    return out
