"""Derivative-free fitting: models to target mappings, models to data, unrestricted fits.

Objectives here are cheap per point but not smooth everywhere (the hierarchy
models are piecewise constant in regions where a best response is locked in),
so every fit is a coarse scan of the parameter box followed by bounded
Nelder-Mead refinement from the most promising scan points. The reported
minimum is the best value seen anywhere in the run, not the last simplex.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Dataset, Mapping, Menu, ProblemKind, discrepancy
from .errors import ConfigError, InfiniteDivergence, NonFinite, ZeroLikelihood

_CHUNK = 2048  # rows per batched objective call, keeps game-menu temporaries small


def _thread_count() -> int:
    raw = os.environ.get("RESTRICTLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class OptConfig:
    """Budget and tolerances for the grid-then-simplex search."""

    n_starts: int = 20
    max_iters: int = 500
    x_tol: float = 1e-6
    f_tol: float = 1e-9
    grid_points: int = 200
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_starts < 1 or self.max_iters < 1:
            raise ConfigError("n_starts and max_iters must be positive")
        if self.grid_points < 2:
            raise ConfigError("grid_points must be at least 2")
        if self.x_tol <= 0.0 or self.f_tol <= 0.0:
            raise ConfigError("tolerances must be positive")


# ---------------------------------------------------------------------------
# Search internals


def _axis_grid(box: np.ndarray, points_per_axis: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, points_per_axis) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _latin_hypercube(box: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    p = box.shape[0]
    strata = np.tile(np.arange(n, dtype=float), (p, 1))
    u = (rng.permuted(strata, axis=1).T + rng.random((n, p))) / n
    return box[:, 0] + u * (box[:, 1] - box[:, 0])


def _improves(f: float, x: np.ndarray, best_f: float, best_x: np.ndarray | None) -> bool:
    # total order: value first, then lexicographic parameter vector
    if best_x is None or f < best_f:
        return True
    return f == best_f and tuple(x) < tuple(best_x)


def _nelder_mead(
    obj1, x0: np.ndarray, box: np.ndarray, cfg: OptConfig
) -> tuple[float, np.ndarray | None]:
    """Bounded Nelder-Mead from x0; returns the best (value, point) it evaluated.

    Candidate points are projected onto the box before evaluation, so the
    simplex always lives inside it.
    """
    lo, hi = box[:, 0], box[:, 1]
    p = x0.size
    best_f: float = np.inf
    best_x: np.ndarray | None = None

    def ev(x: np.ndarray) -> float:
        nonlocal best_f, best_x
        f = float(obj1(x))
        if not np.isfinite(f):
            f = np.inf
        if _improves(f, x, best_f, best_x):
            best_f, best_x = f, x.copy()
        return f

    width = hi - lo
    simplex = [np.clip(x0, lo, hi)]
    for j in range(p):
        step = 0.05 * (width[j] if width[j] > 0.0 else 1.0)
        x = simplex[0].copy()
        x[j] = x[j] + step if x[j] + step <= hi[j] else x[j] - step
        simplex.append(x)
    simplex = np.array(simplex)
    fvals = np.array([ev(x) for x in simplex])

    for _ in range(cfg.max_iters):
        order = np.lexsort((*(simplex[:, j] for j in range(p - 1, -1, -1)), fvals))
        simplex, fvals = simplex[order], fvals[order]
        if (
            np.max(np.abs(simplex - simplex[0])) <= cfg.x_tol
            and np.max(np.abs(fvals - fvals[0])) <= cfg.f_tol
        ):
            break
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = np.clip(centroid + (centroid - worst), lo, hi)
        fr = ev(xr)
        if fr < fvals[0]:
            xe = np.clip(centroid + 2.0 * (centroid - worst), lo, hi)
            fe = ev(xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
        elif fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = np.clip(centroid + 0.5 * (centroid - worst), lo, hi)
            else:
                xc = np.clip(centroid - 0.5 * (centroid - worst), lo, hi)
            fc = ev(xc)
            if fc < min(fr, float(fvals[-1])):
                simplex[-1], fvals[-1] = xc, fc
            else:
                for i in range(1, p + 1):
                    simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
                    fvals[i] = ev(simplex[i])
    return best_f, best_x


def _minimize(
    batch_obj, box: np.ndarray, naive: np.ndarray, cfg: OptConfig, error_cls=NonFinite
) -> tuple[np.ndarray, float]:
    """Scan the box, refine from the best scan points, return (theta, value).

    The scan is a full axis grid for one or two parameters and a seeded Latin
    hypercube of grid_points**2 points otherwise. The naive parameter and the
    box midpoint are always scanned, and the naive parameter is always among
    the refinement starts, so the result can never fall behind it.
    """
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    naive = np.asarray(naive, dtype=float)
    p = box.shape[0]
    if p == 0:
        val = float(batch_obj(np.zeros((1, 0)))[0])
        if not np.isfinite(val):
            raise error_cls("objective is non-finite at the only candidate")
        return naive.copy(), val

    if p <= 2:
        grid = _axis_grid(box, cfg.grid_points)
    else:
        rng = np.random.default_rng(cfg.seed)
        grid = _latin_hypercube(box, cfg.grid_points**2, rng)
    midpoint = (box[:, 0] + box[:, 1]) / 2.0
    cands = np.vstack([grid, midpoint[None, :], naive[None, :]])

    vals = np.empty(len(cands))
    for start in range(0, len(cands), _CHUNK):
        stop = min(start + _CHUNK, len(cands))
        vals[start:stop] = batch_obj(cands[start:stop])
    vals = np.where(np.isfinite(vals), vals, np.inf)

    order = np.lexsort((*(cands[:, j] for j in range(p - 1, -1, -1)), vals))
    best_x, best_f = cands[order[0]].copy(), float(vals[order[0]])

    starts = [cands[i] for i in order[: cfg.n_starts]]
    if not any(np.array_equal(s, naive) for s in starts):
        starts.append(naive)

    def obj1(x: np.ndarray) -> float:
        return float(batch_obj(x[None, :])[0])

    workers = _thread_count()
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda s: _nelder_mead(obj1, s, box, cfg), starts))
    else:
        results = [_nelder_mead(obj1, s, box, cfg) for s in starts]
    for f, x in results:
        if x is not None and _improves(f, x, best_f, best_x):
            best_f, best_x = f, x

    if not np.isfinite(best_f):
        raise error_cls("objective evaluated non-finite at every candidate")
    return best_x, best_f


# ---------------------------------------------------------------------------
# Objectives


def _mapping_objective(model, menu: Menu, target: np.ndarray, weights: np.ndarray, kind: ProblemKind):
    if kind is ProblemKind.MEAN:

        def batch_obj(thetas: np.ndarray) -> np.ndarray:
            pred = model.predict_batch(menu, thetas)
            return (pred - target) ** 2 @ weights

        return batch_obj
    if kind is ProblemKind.MEDIAN:

        def batch_obj(thetas: np.ndarray) -> np.ndarray:
            pred = model.predict_batch(menu, thetas)
            return np.abs(pred - target) @ weights

        return batch_obj

    # decomposable KL order: the target mapping plays the role of the true
    # conditional law, so the divergence is taken with the target as reference
    pos = target > 0.0
    log_target = np.where(pos, np.log(np.where(pos, target, 1.0)), 0.0)

    def batch_obj(thetas: np.ndarray) -> np.ndarray:
        pred = model.predict_batch(menu, thetas)
        sup = pred > 0.0
        terms = np.where(pos, target * (log_target - np.log(np.where(sup, pred, 1.0))), 0.0)
        out = terms.sum(axis=-1) @ weights
        out[(pos & ~sup).any(axis=(1, 2))] = np.inf
        return out

    return batch_obj


def _safe_discrepancy(kind, f, g, weights) -> float:
    try:
        return discrepancy(kind, f, g, weights)
    except InfiniteDivergence:
        return float("inf")


# ---------------------------------------------------------------------------
# Sufficient statistics of a dataset


@dataclass
class ItemStats:
    """Per-item sufficient statistics of a dataset on a menu."""

    n_items: int
    n_obs: int
    counts: np.ndarray
    sums: np.ndarray
    global_mean: float
    y_by_item: list[np.ndarray]
    action_counts: np.ndarray | None

    @classmethod
    def from_dataset(cls, data: Dataset, menu: Menu) -> "ItemStats":
        n_items = len(menu)
        if np.any(data.item_index < 0) or np.any(data.item_index >= n_items):
            raise ConfigError("observation item index is out of range for the menu")
        yfloat = data.y.astype(float)
        counts = np.bincount(data.item_index, minlength=n_items).astype(float)
        sums = np.bincount(data.item_index, weights=yfloat, minlength=n_items)

        order = np.argsort(data.item_index, kind="stable")
        sorted_items = data.item_index[order]
        sorted_y = yfloat[order]
        bounds = np.searchsorted(sorted_items, np.arange(n_items + 1))
        y_by_item = [np.sort(sorted_y[bounds[i] : bounds[i + 1]]) for i in range(n_items)]

        action_counts = None
        if not menu.is_lottery_menu:
            acts = data.y.astype(np.int64)
            if np.any(acts != yfloat) or np.any(acts < 0) or np.any(acts > 2):
                raise ConfigError("game outcomes must be action indices 0, 1, or 2")
            action_counts = np.zeros((n_items, 3))
            np.add.at(action_counts, (data.item_index, acts), 1.0)

        return cls(
            n_items=n_items,
            n_obs=data.n_obs,
            counts=counts,
            sums=sums,
            global_mean=float(yfloat.mean()),
            y_by_item=y_by_item,
            action_counts=action_counts,
        )

    @property
    def seen(self) -> np.ndarray:
        return self.counts > 0.0

    def item_means_or(self, default) -> np.ndarray:
        """Per-item sample means, with `default` filling items that have no data."""
        default = np.broadcast_to(np.asarray(default, dtype=float), (self.n_items,))
        means = np.divide(
            self.sums, self.counts, out=np.zeros(self.n_items), where=self.counts > 0.0
        )
        return np.where(self.counts > 0.0, means, default)


def _data_objective(model, menu: Menu, stats: ItemStats, kind: ProblemKind, data: Dataset):
    if kind is ProblemKind.MEAN:
        # mean squared error equals sum_i (n_i/N)(f_i - ybar_i)^2 plus a theta-free constant
        wts = stats.counts / stats.n_obs
        tmeans = stats.item_means_or(0.0)

        def batch_obj(thetas: np.ndarray) -> np.ndarray:
            pred = model.predict_batch(menu, thetas)
            return (pred - tmeans) ** 2 @ wts

        return batch_obj
    if kind is ProblemKind.MEDIAN:
        item_of_obs = data.item_index
        y = data.y.astype(float)

        def batch_obj(thetas: np.ndarray) -> np.ndarray:
            pred = model.predict_batch(menu, thetas)
            return np.abs(pred[:, item_of_obs] - y).mean(axis=1)

        return batch_obj

    if stats.action_counts is None:
        raise ConfigError("log-loss fitting needs a game menu")
    W = stats.action_counts / stats.n_obs

    def batch_obj(thetas: np.ndarray) -> np.ndarray:
        pred = model.predict_batch(menu, thetas)
        logs = np.where(W > 0.0, np.log(np.where(pred > 0.0, pred, 1.0)), 0.0)
        out = -(W * logs).sum(axis=(1, 2))
        out[((pred <= 0.0) & (W > 0.0)).any(axis=(1, 2))] = np.inf
        return out

    return batch_obj


# ---------------------------------------------------------------------------
# Public fits


def fit_model_to_mapping(
    model, target, kind: ProblemKind, menu: Menu, cfg: OptConfig | None = None
) -> tuple[np.ndarray, float]:
    """Minimize d(f_theta, target) over the model's box; returns (theta_hat, d_star).

    The naive parameter is always searched, so d_star never exceeds the naive
    member's own discrepancy to the target.
    """
    cfg = cfg if cfg is not None else OptConfig()
    tvals = np.asarray(getattr(target, "values", target), dtype=float)
    weights = menu.weights

    closed = model.closed_form_mapping_fit(menu, tvals, weights, kind)
    if closed is not None:
        theta = np.asarray(closed, dtype=float)
        return theta, discrepancy(kind, tvals, model.predict(menu, theta), weights)

    batch_obj = _mapping_objective(model, menu, tvals, weights, kind)
    theta, _ = _minimize(batch_obj, model.bounds, model.naive_params, cfg)
    # report the canonical single-pair discrepancy at the chosen point, and
    # fall back to the naive member on any tie or stray ulp against it
    d_theta = _safe_discrepancy(kind, tvals, model.predict(menu, theta), weights)
    naive = np.asarray(model.naive_params, dtype=float)
    d_naive = _safe_discrepancy(kind, tvals, model.predict(menu, naive), weights)
    if d_naive <= d_theta:
        return naive.copy(), d_naive
    return theta, d_theta


def fit_model_to_data(
    model, train: Dataset, kind: ProblemKind, menu: Menu, cfg: OptConfig | None = None
) -> np.ndarray:
    """Minimize empirical loss on the training data over the model's box."""
    cfg = cfg if cfg is not None else OptConfig()
    stats = ItemStats.from_dataset(train, menu)
    closed = model.closed_form_data_fit(menu, stats, kind)
    if closed is not None:
        return np.asarray(closed, dtype=float)
    batch_obj = _data_objective(model, menu, stats, kind, train)
    error_cls = ZeroLikelihood if kind is ProblemKind.DISTRIBUTION else NonFinite
    theta, _ = _minimize(batch_obj, model.bounds, model.naive_params, cfg, error_cls=error_cls)
    return theta


def fit_unrestricted(
    train: Dataset, kind: ProblemKind, menu: Menu, epsilon: float = 0.5
) -> Mapping:
    """Best unrestricted mapping for the training data.

    ConditionalMean: per-item sample means, global mean where an item has no
    observations. ConditionalMedian: per-item medians, global median fallback.
    ConditionalDistribution: per-item action frequencies with epsilon
    pseudo-counts per action, so test folds never meet a zero probability.
    """
    stats = ItemStats.from_dataset(train, menu)
    if kind is ProblemKind.MEAN:
        return Mapping(stats.item_means_or(stats.global_mean))
    if kind is ProblemKind.MEDIAN:
        global_median = float(np.median(train.y.astype(float)))
        values = np.array(
            [float(np.median(ys)) if ys.size else global_median for ys in stats.y_by_item]
        )
        return Mapping(values)

    if epsilon < 0.0:
        raise ConfigError("smoothing epsilon must be nonnegative")
    if stats.action_counts is None:
        raise ConfigError("distribution fitting needs a game menu")
    num = stats.action_counts + epsilon
    den = num.sum(axis=1, keepdims=True)
    probs = np.divide(num, den, out=np.full_like(num, 1.0 / 3.0), where=den > 0.0)
    return Mapping(probs)
