"""Bagging and random-forest ensembles as equal-weight averages of trees."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from forestlab.cart import GrowthParams, _as_rows, _predict_packed, grow_tree
from forestlab.dgp import Dataset
from forestlab.errors import InputError
from forestlab.seeding import SeedLike, derive


def tree_seed(seed: SeedLike, b: int) -> np.random.SeedSequence:
    """Seed of tree `b`; independent of B, so adding trees keeps earlier ones."""
    return derive(seed, "tree", b)


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    trees: tuple
    params: GrowthParams
    p: int
    data_digest: str = ""
    _packed: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.trees) < 1:
            raise InputError("an ensemble needs at least one tree")
        object.__setattr__(self, "trees", tuple(self.trees))
        sizes = np.array([t.node_count for t in self.trees], dtype=np.int64)
        roots = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64)
        shift = np.repeat(roots, sizes)
        feature = np.concatenate([t.feature for t in self.trees])
        left = np.concatenate([t.left for t in self.trees])
        right = np.concatenate([t.right for t in self.trees])
        internal = feature >= 0
        left = np.where(internal, left + shift, -1)
        right = np.where(internal, right + shift, -1)
        threshold = np.concatenate([t.threshold for t in self.trees])
        value = np.concatenate([t.value for t in self.trees])
        object.__setattr__(self, "_packed", (feature, threshold, left, right, value, roots))

    @property
    def B(self) -> int:
        return len(self.trees)

    @property
    def kind(self) -> str:
        return "bagging" if self.params.mtry == self.p else "forest"


def _grow_one(args):
    data, params, seed, b = args
    return grow_tree(data, params, tree_seed(seed, b))


def train_ensemble(data: Dataset, params: GrowthParams, B: int, seed: SeedLike,
                   workers: int = 1) -> EnsembleModel:
    """Grow B trees on `data`; tree b uses the sub-seed ``("tree", b)`` of `seed`.

    Trees are grown on a thread pool when ``workers > 1``.  The model does
    not depend on `workers`.
    """
    if int(B) < 1:
        raise InputError(f"B must be at least 1, got {B}")
    if params.mtry > data.p:
        raise InputError(f"mtry={params.mtry} exceeds the number of covariates p={data.p}")
    jobs = [(data, params, seed, b) for b in range(int(B))]
    if workers > 1 and B > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trees = list(pool.map(_grow_one, jobs))
    else:
        trees = [_grow_one(job) for job in jobs]
    return EnsembleModel(trees=tuple(trees), params=params, p=data.p, data_digest=data.digest())


def predict_per_tree(model: EnsembleModel, x) -> np.ndarray:
    """Tree predictions: length B for a point, ``B x J`` for a matrix of J points."""
    scalar = np.ndim(x) == 1
    rows = _as_rows(x, model.p)
    out = _predict_packed(*model._packed, rows)
    return out[:, 0] if scalar else out


def predict_ensemble(model: EnsembleModel, x) -> np.ndarray | float:
    """Mean of the tree predictions, summed in tree-index order."""
    per_tree = predict_per_tree(model, x)
    if per_tree.ndim == 1:
        return float(_ordered_mean(per_tree[:, None])[0])
    return _ordered_mean(per_tree)


def _ordered_mean(per_tree: np.ndarray) -> np.ndarray:
    acc = np.zeros(per_tree.shape[1], dtype=np.float64)
    for row in per_tree:
        acc += row
    return acc / per_tree.shape[0]
