"""CART regression trees with per-split covariate subsampling.

Growth follows the least-squares CART recipe.  At a node holding the
in-bag points ``I`` (with bootstrap multiplicity) the candidate splits are
``x_j <= t`` for each drawn covariate ``j`` and each midpoint ``t`` between
consecutive distinct values of ``x_j`` over ``I``; the chosen split
maximizes the decrease of the within-node sum of squares

    SS(I) - SS(I_left) - SS(I_right).

Rules that the rest of the package relies on:

* a node is terminal when it holds ``<= min_node_size`` in-bag points, when
  its responses are all equal, or when no candidate has a gain above
  ``1e-12 * SS(I)``.  Children may end up smaller than `min_node_size`;
* ties (gains within a relative ``1e-10``) go to the lowest covariate
  index, then the lowest threshold;
* when ``mtry < p`` the candidate covariates are a uniform draw without
  replacement (partial Fisher-Yates over a pre-drawn block of uniforms,
  one row per split attempt).  With ``mtry == p`` nothing is drawn, so
  the tree depends on the bootstrap stream only;
* the bootstrap sample and the covariate draws come from the
  ``"bootstrap"`` and ``"mtry"`` sub-streams of the tree seed.

Bootstrap indices are 0-based throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from forestlab.dgp import Dataset
from forestlab.errors import InputError
from forestlab.seeding import SeedLike, generator

#: Relative gain margin under which two candidate splits count as tied.
TIE_RTOL = 1e-10
#: Gains at or below this fraction of the node sum of squares are not splits.
MIN_GAIN_FRACTION = 1e-12

_LEAF = -1


@numba.njit(cache=True, nogil=True)
def _grow(xt, y, inbag, mtry, min_node_size, draws, use_draws, tie_rtol, min_gain_fraction):
    p = xt.shape[0]
    m = inbag.shape[0]
    cap = 2 * m + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap, dtype=np.float64)
    count = np.zeros(cap, dtype=np.int64)

    idx = inbag.copy()
    spill = np.empty(m, dtype=np.int64)
    d = np.empty(m, dtype=np.float64)
    vals = np.empty(m, dtype=np.float64)
    perm = np.empty(p, dtype=np.int64)
    all_features = np.arange(p)

    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_node = np.empty(cap, dtype=np.int64)
    top = 1
    st_start[0] = 0
    st_end[0] = m
    st_node[0] = 0
    n_nodes = 1
    attempt = 0

    while top > 0:
        top -= 1
        start = st_start[top]
        end = st_end[top]
        node = st_node[top]
        cnt = end - start

        s = 0.0
        ymin = np.inf
        ymax = -np.inf
        for k in range(start, end):
            v = y[idx[k]]
            s += v
            if v < ymin:
                ymin = v
            if v > ymax:
                ymax = v
        mean = s / cnt
        value[node] = mean
        count[node] = cnt
        if cnt <= min_node_size or ymin == ymax:
            continue

        total = 0.0
        sst = 0.0
        for k in range(cnt):
            dk = y[idx[start + k]] - mean
            d[k] = dk
            total += dk
            sst += dk * dk

        if use_draws:
            for k in range(p):
                perm[k] = k
            for k in range(mtry):
                j = k + int(draws[attempt, k] * (p - k))
                if j >= p:
                    j = p - 1
                tmp = perm[k]
                perm[k] = perm[j]
                perm[j] = tmp
            cand = np.sort(perm[:mtry])
        else:
            cand = all_features
        attempt += 1

        floor = min_gain_fraction * sst
        found = False
        best_gain = 0.0
        best_j = -1
        best_thr = 0.0
        for jj in range(cand.shape[0]):
            j = cand[jj]
            for k in range(cnt):
                vals[k] = xt[j, idx[start + k]]
            order = np.argsort(vals[:cnt])
            sl = 0.0
            for r in range(cnt - 1):
                o = order[r]
                sl += d[o]
                a = vals[o]
                b = vals[order[r + 1]]
                if a < b:
                    nl = r + 1
                    nr = cnt - nl
                    sr = total - sl
                    gain = sl * sl / nl + sr * sr / nr - total * total / cnt
                    if gain > floor and ((not found) or gain > best_gain * (1.0 + tie_rtol)):
                        found = True
                        best_gain = gain
                        best_j = j
                        t = 0.5 * (a + b)
                        if t >= b:
                            t = a
                        best_thr = t
        if not found:
            continue

        nl = 0
        nr = 0
        for k in range(start, end):
            i = idx[k]
            if xt[best_j, i] <= best_thr:
                idx[start + nl] = i
                nl += 1
            else:
                spill[nr] = i
                nr += 1
        for k in range(nr):
            idx[start + nl + k] = spill[k]

        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feature[node] = best_j
        threshold[node] = best_thr
        left[node] = lc
        right[node] = rc
        st_start[top] = start + nl
        st_end[top] = end
        st_node[top] = rc
        top += 1
        st_start[top] = start
        st_end[top] = start + nl
        st_node[top] = lc
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), count[:n_nodes].copy())


@numba.njit(cache=True, nogil=True)
def _route(feature, threshold, left, right, root, x):
    out = np.empty(x.shape[0], dtype=np.int64)
    for i in range(x.shape[0]):
        node = root
        while feature[node] >= 0:
            if x[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@numba.njit(cache=True, nogil=True)
def _predict_packed(feature, threshold, left, right, value, roots, x):
    n_trees = roots.shape[0]
    out = np.empty((n_trees, x.shape[0]), dtype=np.float64)
    for b in range(n_trees):
        root = roots[b]
        for i in range(x.shape[0]):
            node = root
            while feature[node] >= 0:
                if x[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[b, i] = value[node]
    return out


@dataclass(frozen=True)
class GrowthParams:
    """Tree growth settings; ``mtry == p`` is bagging."""

    mtry: int
    min_node_size: int = 5
    bootstrap: bool = True

    def __post_init__(self):
        if int(self.mtry) < 1:
            raise InputError(f"mtry must be at least 1, got {self.mtry}")
        if int(self.min_node_size) < 1:
            raise InputError(f"min_node_size must be at least 1, got {self.min_node_size}")
        object.__setattr__(self, "mtry", int(self.mtry))
        object.__setattr__(self, "min_node_size", int(self.min_node_size))
        object.__setattr__(self, "bootstrap", bool(self.bootstrap))


@dataclass(frozen=True)
class SplitRule:
    covariate_index: int
    threshold: float

    def goes_left(self, x) -> bool:
        return bool(x[self.covariate_index] <= self.threshold)


def _readonly(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Tree:
    """A grown tree stored as flat node arrays.

    Node 0 is the root.  Internal nodes have ``feature >= 0`` and children
    ``left``/``right``; leaves have ``feature == -1`` and predict ``value``,
    the mean of the ``count`` in-bag responses that reached them.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray
    inbag: np.ndarray = field(repr=False)
    p: int = 0

    def __post_init__(self):
        for name in ("feature", "threshold", "left", "right", "value", "count", "inbag"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    @property
    def node_count(self) -> int:
        return self.feature.shape[0]

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature == _LEAF

    @property
    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.is_leaf)

    def split_rule(self, node: int) -> SplitRule | None:
        if self.feature[node] == _LEAF:
            return None
        return SplitRule(int(self.feature[node]), float(self.threshold[node]))

    def apply(self, x) -> np.ndarray:
        """Leaf index reached by each row of `x`."""
        rows = _as_rows(x, self.p)
        return _route(self.feature, self.threshold, self.left, self.right, 0, rows)

    def same_partition(self, other: "Tree") -> bool:
        """True when both trees have identical structure and split rules."""
        return (np.array_equal(self.feature, other.feature)
                and np.array_equal(self.threshold, other.threshold)
                and np.array_equal(self.left, other.left)
                and np.array_equal(self.right, other.right))


def _as_rows(x, p: int) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != p:
        raise InputError(f"expected points with {p} covariates, got shape {np.shape(x)}")
    return np.ascontiguousarray(arr)


def bootstrap_indices(n: int, seed: SeedLike) -> np.ndarray:
    """n draws with replacement from ``0..n-1`` (the tree's bootstrap stream)."""
    if n < 1:
        raise InputError(f"n must be at least 1, got {n}")
    return generator(seed, "bootstrap").integers(0, n, size=n, dtype=np.int64)


def grow_tree(data: Dataset, params: GrowthParams, seed: SeedLike) -> Tree:
    """Grow one tree on `data` (see the module docstring for the rules)."""
    if data.n < 1:
        raise InputError("cannot grow a tree on an empty dataset")
    p = data.p
    if params.mtry > p:
        raise InputError(f"mtry={params.mtry} exceeds the number of covariates p={p}")
    if params.bootstrap:
        inbag = bootstrap_indices(data.n, seed)
    else:
        inbag = np.arange(data.n, dtype=np.int64)
    use_draws = params.mtry < p
    if use_draws:
        draws = generator(seed, "mtry").random((2 * data.n + 1, params.mtry))
    else:
        draws = np.empty((0, 0), dtype=np.float64)
    xt = np.ascontiguousarray(data.x.T)
    arrays = _grow(xt, data.y, inbag, params.mtry, params.min_node_size, draws,
                   use_draws, TIE_RTOL, MIN_GAIN_FRACTION)
    return Tree(*arrays, inbag=inbag, p=p)


def predict_tree(tree: Tree, x) -> np.ndarray | float:
    """Leaf mean at a point, or at each row of a matrix."""
    scalar = np.ndim(x) == 1
    rows = _as_rows(x, tree.p)
    out = _predict_packed(tree.feature, tree.threshold, tree.left, tree.right, tree.value,
                          np.zeros(1, dtype=np.int64), rows)[0]
    return float(out[0]) if scalar else out
