"""Paired bagging-versus-forest experiments.

Random streams of an experiment, all derived from ``master_seed``:

* ``("test",)``         the single shared test set;
* ``("train", w)``      training set of run w (covariates and noise are
  further split into ``"covariates"`` and ``"noise"``);
* ``("trees", w)``      tree seeds of run w, shared by both methods.  Tree b
  then uses ``("tree", b)`` below it, split into ``"bootstrap"`` and
  ``"mtry"``.

Sharing the tree streams between methods means bagging and forest see the
same bootstrap samples; they differ only through the covariate draws.
sigma_f comes from the fixed calibration seed, not the master seed.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields


from forestlab.cart import GrowthParams
from forestlab.dgp import Dataset, DgpSpec, generate_dataset, resolve_spec
from forestlab.ensemble import _ordered_mean, predict_per_tree, train_ensemble
from forestlab.errors import InputError
from forestlab.harness.config import ExperimentConfig
from forestlab.metrics import (ComparisonReport, RunAccumulator, SliceBin, compare,
                               conditional_slice, tree_moments)
from forestlab.seeding import derive

log = logging.getLogger(__name__)

METHODS = ("bagging", "forest")


@dataclass(frozen=True)
class ReportRow:
    """One column of a results table."""

    label: str
    sigma_f: float
    sigma_eps: float
    bias_sq_bag: float
    bias_sq_forest: float
    var_bag: float
    var_forest: float
    tree_var_bag: float
    tree_var_forest: float
    corr_bag: float
    corr_forest: float
    irreducible: float
    mse_bag: float
    mse_forest: float
    t_statistic: float
    delta_r_percent: float

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.field_names()}

    @classmethod
    def from_comparison(cls, label: str, spec: DgpSpec, cmp: ComparisonReport) -> "ReportRow":
        bag, forest = cmp.bagging, cmp.forest
        return cls(
            label=label,
            sigma_f=1.0 if spec.normalized else spec.sigma_f,
            sigma_eps=spec.sigma_eps,
            bias_sq_bag=bag.bias_sq,
            bias_sq_forest=forest.bias_sq,
            var_bag=bag.variance,
            var_forest=forest.variance,
            tree_var_bag=bag.tree_variance,
            tree_var_forest=forest.tree_variance,
            corr_bag=bag.pairwise_correlation,
            corr_forest=forest.pairwise_correlation,
            irreducible=bag.irreducible_empirical,
            mse_bag=bag.mse_empirical,
            mse_forest=forest.mse_empirical,
            t_statistic=cmp.t_statistic,
            delta_r_percent=cmp.delta_r_percent,
        )


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    spec: DgpSpec
    test: Dataset = field(repr=False)
    accumulators: dict = field(repr=False)
    comparison: ComparisonReport
    row: ReportRow
    train_digests: list = field(default_factory=list, repr=False)

    def point_stats(self, method: str):
        return self.accumulators[method].point_stats()


# Worker-process state, set once per process by _init_worker.
_STATE: dict = {}


def _init_worker(config: ExperimentConfig, spec: DgpSpec, test: Dataset):
    _STATE["config"] = config
    _STATE["spec"] = spec
    _STATE["test"] = test


def _run_one(w: int):
    config: ExperimentConfig = _STATE["config"]
    spec: DgpSpec = _STATE["spec"]
    test: Dataset = _STATE["test"]
    master = config.master_seed
    data = generate_dataset(spec, config.n, derive(master, "train", w))
    tree_seed = derive(master, "trees", w)
    out = {}
    digests = []
    for method, mtry in zip(METHODS, (spec.p_total, config.mtry)):
        params = GrowthParams(mtry=mtry, min_node_size=config.min_node_size)
        model = train_ensemble(data, params, config.B, tree_seed)
        per_tree = predict_per_tree(model, test.x)
        S, Q = tree_moments(per_tree, test.signal)
        out[method] = (_ordered_mean(per_tree), S, Q)
        digests.append(model.data_digest)
    return w, out, digests


def _run_many(config: ExperimentConfig, spec: DgpSpec, test: Dataset, workers: int):
    runs = range(config.W)
    if workers <= 1:
        _init_worker(config, spec, test)
        try:
            yield from map(_run_one, runs)
        finally:
            _STATE.clear()
        return
    chunk = max(1, config.W // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=(config, spec, test)) as pool:
        yield from pool.map(_run_one, runs, chunksize=chunk)


def resolve_config_spec(config: ExperimentConfig) -> DgpSpec:
    return resolve_spec(config.regression, config.covariate_law, config.p_total,
                        config.snr, config.normalized)


def execute(config: ExperimentConfig) -> ExperimentResult:
    """Run W paired replicates and keep per-point statistics for both methods.

    Runs are consumed in index order whatever the worker count, so every
    number in the result is independent of `workers`.
    """
    spec = resolve_config_spec(config)
    test = generate_dataset(spec, config.test_size, derive(config.master_seed, "test"))
    accs = {m: RunAccumulator(test.signal, test.y) for m in METHODS}
    digests = []
    workers = config.effective_workers()
    log.info("running %s (W=%d, B=%d, workers=%d)", config.display_label, config.W, config.B, workers)
    for w, out, run_digests in _run_many(config, spec, test, workers):
        if len(set(run_digests)) != 1:
            raise RuntimeError(f"run {w}: bagging and forest were trained on different data")
        digests.append(run_digests[0])
        for method in METHODS:
            p, S, Q = out[method]
            # Tree correlation needs two trees; single-tree runs report NaN.
            if config.B >= 2:
                accs[method].add_run(p, (S, Q), config.B)
            else:
                accs[method].add_run(p)
    cmp = compare(accs["bagging"], accs["forest"], spec.sigma_eps)
    row = ReportRow.from_comparison(config.display_label, spec, cmp)
    return ExperimentResult(config=config, spec=spec, test=test, accumulators=accs,
                            comparison=cmp, row=row, train_digests=digests)


def run_experiment(config: ExperimentConfig) -> ReportRow:
    return execute(config).row


@dataclass
class SweepResult:
    kind: str
    grid: list
    results: list = field(repr=False)

    @property
    def rows(self) -> list[ReportRow]:
        return [r.row for r in self.results]

    @property
    def delta_r(self) -> list[float]:
        return [r.row.delta_r_percent for r in self.results]

    def curves(self) -> dict:
        """Per-method squared bias and variance along the grid."""
        return {
            "bagging": {"bias_sq": [r.row.bias_sq_bag for r in self.results],
                        "variance": [r.row.var_bag for r in self.results]},
            "forest": {"bias_sq": [r.row.bias_sq_forest for r in self.results],
                       "variance": [r.row.var_forest for r in self.results]},
        }


def sweep_configs(kind: str, base: ExperimentConfig, grid) -> list[ExperimentConfig]:
    grid = list(grid)
    if not grid:
        raise InputError("grid: must contain at least one value")
    relevant = base.regression.relevant_count
    out = []
    if kind == "irrelevant":
        for g in grid:
            if isinstance(g, bool) or int(g) != g or g < 0:
                raise InputError(f"grid: irrelevant counts must be non-negative integers, got {g!r}")
            p_total = relevant + int(g)
            if p_total % 3:
                warnings.warn(f"p_total={p_total} is not a multiple of 3; mtry=p/3 then changes "
                              "non-monotonically along the sweep", stacklevel=2)
            out.append(base.replace(p_total=p_total, label=f"{base.display_label} irrelevant={int(g)}"))
    elif kind == "rho":
        for g in grid:
            if not (isinstance(g, (int, float)) and 0.0 <= g <= 1.0):
                raise InputError(f"grid: rho values must lie in [0, 1], got {g!r}")
            out.append(base.replace(law="equicorrelated", rho=float(g),
                                    label=f"{base.display_label} rho={float(g):g}"))
    else:
        raise InputError(f"kind: expected 'irrelevant' or 'rho', got {kind!r}")
    return out


def run_sweep(kind: str, base: ExperimentConfig, grid) -> SweepResult:
    configs = sweep_configs(kind, base, grid)
    return SweepResult(kind=kind, grid=list(grid), results=[execute(c) for c in configs])


def figure_bins(result: ExperimentResult, covariate_index: int, bins: int) -> list[SliceBin]:
    """Binned bagging-minus-forest conditional differences along one covariate.

    `covariate_index` is 1-based (covariate 3 is the third column).
    """
    p = result.spec.p_total
    if isinstance(covariate_index, bool) or int(covariate_index) != covariate_index \
            or not 1 <= covariate_index <= p:
        raise InputError(f"covariate: must be an integer in [1, {p}], got {covariate_index!r}")
    values = result.test.x[:, int(covariate_index) - 1]
    return conditional_slice(result.point_stats("bagging"), result.point_stats("forest"), values, bins)


def emit_figure_data(result: ExperimentResult, covariate_index: int, bins: int, path) -> list[SliceBin]:
    from forestlab.harness.output import write_figure_csv

    table = figure_bins(result, covariate_index, bins)
    write_figure_csv(table, path)
    return table
