"""Completeness: K-fold cross-validated fit, normalized between naive and unrestricted.

kappa_hat = (CV(naive) - CV(model)) / (CV(naive) - CV(unrestricted))

so 0 means the model predicts no better than the naive rule and 1 means it
captures everything the best attainable mapping does. The variance estimator
follows the printed recipe: per-fold sample variances of the per-observation
loss difference between the model and the unrestricted fit, averaged over
folds and divided by the squared denominator, with the CI scaled by sqrt(N).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Dataset, Menu, ProblemKind, naive_mapping, normal_quantile, obs_losses
from .errors import ConfigError, DegenerateTarget, NaiveNotWorse
from .fit import OptConfig, _thread_count, fit_model_to_data, fit_unrestricted
from .restrict import f_discrepancy
from .samplers import substream

NAIVE = "naive"
UNRESTRICTED = "unrestricted"


def fold_assignment(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Seeded permutation split into k folds whose sizes differ by at most one."""
    if k < 2:
        raise ConfigError("cross-validation needs at least K = 2 folds")
    if k > n:
        raise ConfigError(f"cannot split {n} observations into {k} nonempty folds")
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, k)


def data_folds(dataset: Dataset, k: int, seed: int) -> list[np.ndarray]:
    """Fold index sets over a dataset, invariant to observation order.

    Observations are ranked by (item, outcome) before the seeded permutation
    is laid over them, so fold contents depend on the data multiset rather
    than on row positions; shuffling the input rows leaves every fold's
    contents, and hence every CV number, unchanged.
    """
    positions = fold_assignment(dataset.n_obs, k, seed)
    canon = np.lexsort((dataset.y, dataset.item_index))
    return [canon[p] for p in positions]


def _fit_family(family, train: Dataset, kind: ProblemKind, menu: Menu, cfg, epsilon: float):
    if family == NAIVE:
        return naive_mapping(menu)
    if family == UNRESTRICTED:
        return fit_unrestricted(train, kind, menu, epsilon).values
    theta = fit_model_to_data(family, train, kind, menu, cfg)
    return family.predict(menu, theta)


def kfold_cv(
    family,
    dataset: Dataset,
    kind: ProblemKind,
    menu: Menu,
    K: int,
    seed: int,
    cfg: OptConfig | None = None,
    epsilon: float = 0.5,
) -> tuple[float, np.ndarray, list[np.ndarray]]:
    """Cross-validated error of a family: a model, "naive", or "unrestricted".

    Returns the mean of the K fold errors, the per-observation test losses in
    dataset order, and the fitted prediction table of each fold.
    """
    folds = data_folds(dataset, K, seed)
    losses = np.empty(dataset.n_obs)
    fitted: list[np.ndarray | None] = [None] * len(folds)
    fold_errors = np.empty(len(folds))

    def run_fold(k: int) -> None:
        test_idx = folds[k]
        train_idx = np.concatenate([folds[j] for j in range(len(folds)) if j != k])
        values = _fit_family(family, dataset.subset(train_idx), kind, menu, cfg, epsilon)
        fold_losses = obs_losses(values, dataset.subset(test_idx), kind)
        losses[test_idx] = fold_losses
        fitted[k] = values
        fold_errors[k] = fold_losses.mean()

    workers = _thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_fold, range(len(folds))))
    else:
        for k in range(len(folds)):
            run_fold(k)
    return float(fold_errors.mean()), losses, fitted


def kappa_from_cv(cv_naive: float, cv_model: float, cv_unrestricted: float) -> float:
    """Completeness from the three cross-validated errors."""
    denominator = cv_naive - cv_unrestricted
    if denominator <= 0.0:
        raise NaiveNotWorse(
            "cross-validated naive error does not exceed the unrestricted error"
        )
    return (cv_naive - cv_model) / denominator


@dataclass
class CompleteReport:
    """Completeness estimate with the three CV errors, its SE, and the CI."""

    cv_model: float
    cv_naive: float
    cv_unrestricted: float
    kappa_hat: float
    sigma_hat: float
    ci: tuple[float, float]
    level: float
    K: int
    N: int
    seed: int
    model: str

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "K": self.K,
            "N": self.N,
            "seed": self.seed,
            "level": self.level,
            "cv_model": self.cv_model,
            "cv_naive": self.cv_naive,
            "cv_unrestricted": self.cv_unrestricted,
            "kappa_hat": self.kappa_hat,
            "sigma_hat": self.sigma_hat,
            "ci": [self.ci[0], self.ci[1]],
        }


def estimate_completeness(
    model,
    dataset: Dataset,
    kind: ProblemKind,
    menu: Menu,
    K: int = 10,
    seed: int = 0,
    level: float = 0.95,
    cfg: OptConfig | None = None,
    epsilon: float = 0.5,
) -> CompleteReport:
    """Completeness of a model on real data, all three CVs on identical folds.

    The variance of the per-observation loss difference (model minus
    unrestricted) is computed per fold with divisor J - 1 where J is the
    actual fold size; single-observation folds contribute zero variance.
    """
    folds = data_folds(dataset, K, seed)
    cv_model, model_losses, _ = kfold_cv(model, dataset, kind, menu, K, seed, cfg, epsilon)
    cv_unr, unr_losses, _ = kfold_cv(UNRESTRICTED, dataset, kind, menu, K, seed, cfg, epsilon)
    cv_naive, _, _ = kfold_cv(NAIVE, dataset, kind, menu, K, seed, cfg, epsilon)

    kappa_hat = kappa_from_cv(cv_naive, cv_model, cv_unr)

    delta = model_losses - unr_losses
    fold_vars = []
    for test_idx in folds:
        d = delta[test_idx]
        fold_vars.append(d.var(ddof=1) if d.size >= 2 else 0.0)
    denominator = cv_naive - cv_unr
    sigma_hat = float(np.sqrt(np.mean(fold_vars)) / denominator)

    half = normal_quantile(level) * sigma_hat / np.sqrt(dataset.n_obs)
    return CompleteReport(
        cv_model=float(cv_model),
        cv_naive=float(cv_naive),
        cv_unrestricted=float(cv_unr),
        kappa_hat=float(kappa_hat),
        sigma_hat=sigma_hat,
        ci=(float(kappa_hat - half), float(kappa_hat + half)),
        level=level,
        K=K,
        N=dataset.n_obs,
        seed=seed,
        model=getattr(model, "name", str(model)),
    )


@dataclass
class GroupCompleteness:
    """Per-group completeness plus the observation-weighted average."""

    reports: dict
    failures: dict
    weighted_kappa: float

    def to_dict(self) -> dict:
        return {
            "weighted_kappa": self.weighted_kappa,
            "groups": {str(g): rep.to_dict() for g, rep in self.reports.items()},
            "failures": {str(g): msg for g, msg in self.failures.items()},
        }


def group_completeness(
    model,
    dataset: Dataset,
    kind: ProblemKind,
    menu: Menu,
    K: int = 10,
    seed: int = 0,
    level: float = 0.95,
    cfg: OptConfig | None = None,
    epsilon: float = 0.5,
) -> GroupCompleteness:
    """Completeness per group label, with failures recorded instead of aborting."""
    if dataset.group is None:
        raise ConfigError("group_completeness needs a dataset with group labels")
    reports: dict = {}
    failures: dict = {}
    labels = np.unique(dataset.group)
    for g in labels:
        idx = np.flatnonzero(dataset.group == g)
        try:
            reports[g.item() if hasattr(g, "item") else g] = estimate_completeness(
                model, dataset.subset(idx), kind, menu, K, seed, level, cfg, epsilon
            )
        except (ConfigError, NaiveNotWorse) as exc:
            failures[g.item() if hasattr(g, "item") else g] = str(exc)
    if reports:
        weights = np.array([rep.N for rep in reports.values()], dtype=float)
        kappas = np.array([rep.kappa_hat for rep in reports.values()])
        weighted = float(weights @ kappas / weights.sum())
    else:
        weighted = float("nan")
    return GroupCompleteness(reports=reports, failures=failures, weighted_kappa=weighted)


def alt_fstar_discrepancy(
    model,
    naive,
    dataset: Dataset,
    kind: ProblemKind,
    B: int = 200,
    seed: int = 0,
    cfg: OptConfig | None = None,
    menu: Menu | None = None,
    epsilon: float = 0.5,
) -> tuple[float, float]:
    """Plug-in discrepancy to the estimated best mapping, with a bootstrap SE.

    The best mapping is estimated by its per-item table (sample means,
    medians, or smoothed frequencies, by problem kind); the model is then fit
    to that table and normalized by the naive discrepancy to it. The SE is
    the standard deviation of the same statistic over B nonparametric
    bootstrap resamples of the observations.
    """
    if menu is None:
        raise ConfigError("alt_fstar_discrepancy needs the menu")
    if B < 1:
        raise ConfigError("bootstrap count must be positive")

    def delta_of(data: Dataset) -> float:
        beta_hat = fit_unrestricted(data, kind, menu, epsilon)
        return f_discrepancy(model, naive, beta_hat, kind, menu, cfg)

    delta_hat = delta_of(dataset)

    def one_resample(b: int) -> float:
        rng = substream(seed, b)
        idx = rng.integers(0, dataset.n_obs, size=dataset.n_obs)
        try:
            return delta_of(dataset.subset(idx))
        except DegenerateTarget:
            return float("nan")

    workers = _thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            draws = np.array(list(pool.map(one_resample, range(B))))
    else:
        draws = np.array([one_resample(b) for b in range(B)])
    good = draws[np.isfinite(draws)]
    se = float(np.std(good, ddof=1)) if good.size >= 2 else float("nan")
    return float(delta_hat), se
