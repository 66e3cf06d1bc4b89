"""Optimizer behavior: recovery, nesting, budget monotonicity, and the unrestricted fits."""

from __future__ import annotations

import math

import numpy as np
import pytest

from restrictlab.core import (
    BinaryLottery,
    Dataset,
    Game3x3,
    Menu,
    ProblemKind,
    discrepancy,
    empirical_error,
    expected_value,
    naive_mapping,
    uniform_play,
)
from restrictlab.errors import ConfigError
from restrictlab.fit import (
    ItemStats,
    OptConfig,
    fit_model_to_data,
    fit_model_to_mapping,
    fit_unrestricted,
)
from restrictlab.models import CptBinary, LogitLevel1, LogitPchm, Pchm, TableModel
from restrictlab.samplers import MuSpec, sample_mapping, substream


def gain_menu(n=12, seed=11) -> Menu:
    rng = np.random.default_rng(seed)
    items = []
    for _ in range(n):
        zl = rng.uniform(0, 8)
        zh = zl + rng.uniform(1, 20)
        items.append(BinaryLottery(float(zh), float(zl), float(rng.uniform(0.05, 0.95))))
    return Menu(tuple(items))


def sweep_menu() -> Menu:
    """5 stake pairs x 5 probabilities, enough variation to identify all of (alpha, gamma, eta)."""
    pairs = [(20, 0), (40, 10), (50, 20), (80, 20), (100, 40)]
    ps = [0.05, 0.25, 0.5, 0.75, 0.95]
    items = tuple(
        BinaryLottery(float(zh), float(zl), float(p)) for zh, zl in pairs for p in ps
    )
    return Menu(items)


def game_menu(n=8, seed=5) -> Menu:
    rng = np.random.default_rng(seed)
    games = []
    for i in range(n):
        rows = tuple(tuple(float(v) for v in r) for r in rng.uniform(0, 10, size=(3, 3)))
        cols = tuple(tuple(float(v) for v in r) for r in rng.uniform(0, 10, size=(3, 3)))
        games.append(Game3x3(f"g{i}", rows, cols))
    return Menu(tuple(games))


# ---------------------------------------------------------------------------
# OptConfig


def test_optconfig_validation():
    with pytest.raises(ConfigError):
        OptConfig(n_starts=0)
    with pytest.raises(ConfigError):
        OptConfig(max_iters=0)
    with pytest.raises(ConfigError):
        OptConfig(grid_points=1)
    with pytest.raises(ConfigError):
        OptConfig(x_tol=0.0)
    with pytest.raises(ConfigError):
        OptConfig(f_tol=-1.0)
    assert OptConfig().n_starts == 20


# ---------------------------------------------------------------------------
# fit_model_to_mapping


def test_realizable_target_recovered_cpt():
    menu = gain_menu()
    model = CptBinary(("alpha", "gamma", "eta"))
    theta0 = np.array([0.8, 0.7, 1.3])
    target = model.predict(menu, theta0)
    theta, d = fit_model_to_mapping(
        model, target, ProblemKind.MEAN, menu, OptConfig(grid_points=40)
    )
    assert d <= 1e-8
    assert np.max(np.abs(model.predict(menu, theta) - target)) <= 1e-4


def test_realizable_target_recovered_logit_pchm():
    menu = game_menu()
    model = LogitPchm()
    theta0 = np.array([1.5, 2.0])
    target = model.predict(menu, theta0)
    theta, d = fit_model_to_mapping(
        model, target, ProblemKind.DISTRIBUTION, menu, OptConfig(grid_points=25)
    )
    assert d <= 1e-8
    assert np.max(np.abs(model.predict(menu, theta) - target)) <= 1e-4


def test_naive_target_gives_exact_zero_at_naive_parameter():
    menu = gain_menu()
    model = CptBinary(("alpha", "gamma", "eta"))
    theta, d = fit_model_to_mapping(
        model, expected_value(menu), ProblemKind.MEAN, menu, OptConfig(grid_points=12)
    )
    assert d == 0.0
    assert np.array_equal(theta, model.naive_params)

    gmenu = game_menu()
    theta, d = fit_model_to_mapping(
        Pchm(), uniform_play(gmenu), ProblemKind.DISTRIBUTION, gmenu, OptConfig(grid_points=12)
    )
    assert d == 0.0
    assert np.array_equal(theta, np.zeros(1))


def test_target_outside_family_has_positive_discrepancy():
    menu = Menu(
        (
            BinaryLottery(20, 0, 0.5),
            BinaryLottery(15, 5, 0.3),
            BinaryLottery(30, 10, 0.7),
            BinaryLottery(12, 2, 0.5),
            BinaryLottery(25, 0, 0.9),
            BinaryLottery(18, 6, 0.1),
        )
    )
    target = expected_value(menu).copy()
    target[0] += 1.5  # a single-item bump no curvature parameter can track
    model = CptBinary(("alpha",))
    _, d = fit_model_to_mapping(model, target, ProblemKind.MEAN, menu)
    assert d > 1e-4


def test_monotone_budget():
    menu = gain_menu(n=8, seed=2)
    order_rng = substream(99, 0)
    target = sample_mapping(menu, MuSpec(kind="uniform-fosd"), order_rng)
    model = CptBinary(("gamma", "eta"))

    base = OptConfig(grid_points=51, n_starts=4, seed=3)
    finer_grid = OptConfig(grid_points=101, n_starts=4, seed=3)  # dyadic superset
    more_starts = OptConfig(grid_points=51, n_starts=8, seed=3)

    _, d_base = fit_model_to_mapping(model, target, ProblemKind.MEAN, menu, base)
    _, d_grid = fit_model_to_mapping(model, target, ProblemKind.MEAN, menu, finer_grid)
    _, d_starts = fit_model_to_mapping(model, target, ProblemKind.MEAN, menu, more_starts)

    assert d_grid <= d_base + 1e-12
    assert d_starts <= d_base + 1e-12


def test_d_star_is_permutation_invariant():
    menu = gain_menu(n=8, seed=4)
    target = sample_mapping(menu, MuSpec(kind="uniform-fosd"), substream(7, 0))
    model = CptBinary(("gamma", "eta"))
    cfg = OptConfig(grid_points=31, n_starts=5)
    _, d1 = fit_model_to_mapping(model, target, ProblemKind.MEAN, menu, cfg)

    perm = np.random.default_rng(0).permutation(len(menu))
    menu2 = Menu(tuple(menu.items[i] for i in perm))
    _, d2 = fit_model_to_mapping(model, target[perm], ProblemKind.MEAN, menu2, cfg)
    assert math.isclose(d1, d2, rel_tol=1e-9, abs_tol=1e-12)


def test_determinism_and_thread_invariance(monkeypatch):
    menu = gain_menu(n=6, seed=8)
    target = sample_mapping(menu, MuSpec(kind="uniform-fosd"), substream(21, 0))
    model = CptBinary(("alpha", "gamma", "eta"))
    cfg = OptConfig(grid_points=12, n_starts=6, seed=17)

    theta1, d1 = fit_model_to_mapping(model, target, ProblemKind.MEAN, menu, cfg)
    theta2, d2 = fit_model_to_mapping(model, target, ProblemKind.MEAN, menu, cfg)
    assert np.array_equal(theta1, theta2) and d1 == d2

    monkeypatch.setenv("RESTRICTLAB_THREADS", "4")
    theta3, d3 = fit_model_to_mapping(model, target, ProblemKind.MEAN, menu, cfg)
    assert np.array_equal(theta1, theta3) and d1 == d3


def test_reported_d_star_matches_discrepancy_at_theta_hat():
    menu = gain_menu(n=7, seed=14)
    target = sample_mapping(menu, MuSpec(kind="range-only"), substream(3, 0))
    model = CptBinary(("alpha", "gamma"))
    theta, d = fit_model_to_mapping(
        model, target, ProblemKind.MEAN, menu, OptConfig(grid_points=25)
    )
    assert d == discrepancy(ProblemKind.MEAN, model.predict(menu, theta), target, menu.weights)


def test_zero_parameter_model_returns_naive_discrepancy():
    menu = gain_menu(n=5, seed=6)
    target = sample_mapping(menu, MuSpec(kind="range-only"), substream(4, 0))
    model = CptBinary(free=())
    theta, d = fit_model_to_mapping(model, target, ProblemKind.MEAN, menu)
    assert theta.shape == (0,)
    assert d == discrepancy(ProblemKind.MEAN, expected_value(menu), target, menu.weights)


def test_table_model_uses_closed_forms():
    menu = gain_menu(n=6, seed=9)
    model = TableModel(menu)
    target = sample_mapping(menu, MuSpec(kind="range-only"), substream(13, 0))
    theta, d = fit_model_to_mapping(model, target, ProblemKind.MEAN, menu)
    assert np.array_equal(theta, target)
    assert d == 0.0

    rng = np.random.default_rng(1)
    items = rng.integers(0, len(menu), size=60)
    y = expected_value(menu)[items] + rng.normal(0, 1, size=60)
    data = Dataset(items, y)
    fitted = fit_model_to_data(model, data, ProblemKind.MEAN, menu)
    stats = ItemStats.from_dataset(data, menu)
    lo, hi = menu.prize_ranges()
    expected = np.clip(stats.item_means_or(expected_value(menu)), lo, hi)
    assert np.array_equal(fitted, expected)


# ---------------------------------------------------------------------------
# fit_model_to_data


def test_data_fit_recovers_generator():
    menu = sweep_menu()
    model = CptBinary(("alpha", "gamma", "eta"))
    theta0 = np.array([0.85, 0.65, 1.2])
    truth = model.predict(menu, theta0)
    rng = np.random.default_rng(42)
    n = 5000
    items = rng.integers(0, len(menu), size=n)
    y = truth[items] + rng.normal(0.0, 0.5, size=n)
    theta = fit_model_to_data(model, Dataset(items, y), ProblemKind.MEAN, menu)
    assert np.max(np.abs(theta - theta0)) <= 0.05


def test_uniform_play_data_fits_lambda_near_zero():
    menu = game_menu(n=15, seed=3)
    rng = np.random.default_rng(0)
    n = 1500
    items = rng.integers(0, len(menu), size=n)
    acts = rng.integers(0, 3, size=n)
    theta = fit_model_to_data(LogitLevel1(), Dataset(items, acts), ProblemKind.DISTRIBUTION, menu)
    assert theta[0] <= 0.01


def test_median_data_fit_runs():
    menu = gain_menu(n=6, seed=19)
    model = CptBinary(("alpha",))
    truth = model.predict(menu, np.array([0.9]))
    items = np.tile(np.arange(len(menu)), 40)
    theta = fit_model_to_data(model, Dataset(items, truth[items]), ProblemKind.MEDIAN, menu)
    assert abs(theta[0] - 0.9) <= 0.05


def test_single_observation_dataset_is_legal():
    menu = gain_menu(n=4, seed=23)
    data = Dataset(np.array([2]), np.array([7.0]))
    theta = fit_model_to_data(CptBinary(("alpha",)), data, ProblemKind.MEAN, menu)
    assert model_in_box(CptBinary(("alpha",)), theta)

    gmenu = game_menu(n=3, seed=23)
    gdata = Dataset(np.array([1]), np.array([0]))
    theta = fit_model_to_data(LogitLevel1(), gdata, ProblemKind.DISTRIBUTION, gmenu)
    assert model_in_box(LogitLevel1(), theta)


def model_in_box(model, theta) -> bool:
    return bool(
        np.all(theta >= model.bounds[:, 0]) and np.all(theta <= model.bounds[:, 1])
    )


# ---------------------------------------------------------------------------
# ItemStats


def test_item_stats_validation():
    menu = gain_menu(n=3, seed=1)
    with pytest.raises(ConfigError):
        ItemStats.from_dataset(Dataset(np.array([3]), np.array([1.0])), menu)
    gmenu = game_menu(n=2, seed=1)
    with pytest.raises(ConfigError):
        ItemStats.from_dataset(Dataset(np.array([0]), np.array([1.5])), gmenu)
    with pytest.raises(ConfigError):
        ItemStats.from_dataset(Dataset(np.array([0]), np.array([4])), gmenu)


def test_item_stats_means_and_fallback():
    menu = gain_menu(n=3, seed=1)
    data = Dataset(np.array([0, 0, 1]), np.array([4.0, 6.0, 10.0]))
    stats = ItemStats.from_dataset(data, menu)
    filled = stats.item_means_or(np.array([-1.0, -1.0, -1.0]))
    assert filled[0] == 5.0 and filled[1] == 10.0 and filled[2] == -1.0
    assert stats.global_mean == pytest.approx(20.0 / 3.0, rel=1e-15)


# ---------------------------------------------------------------------------
# fit_unrestricted


def test_unrestricted_mean_and_global_fallback():
    menu = gain_menu(n=3, seed=1)
    data = Dataset(np.array([0, 0, 1]), np.array([4.0, 6.0, 10.0]))
    fitted = fit_unrestricted(data, ProblemKind.MEAN, menu)
    assert fitted.values[0] == 5.0
    assert fitted.values[1] == 10.0
    assert fitted.values[2] == pytest.approx(20.0 / 3.0, rel=1e-15)


def test_unrestricted_median():
    menu = gain_menu(n=2, seed=1)
    data = Dataset(np.array([0, 0, 0]), np.array([1.0, 9.0, 2.0]))
    fitted = fit_unrestricted(data, ProblemKind.MEDIAN, menu)
    assert fitted.values[0] == 2.0
    assert fitted.values[1] == 2.0  # global median fallback


def test_unrestricted_smoothing_arithmetic():
    gmenu = game_menu(n=2, seed=2)
    items = np.zeros(10, dtype=int)
    acts = np.zeros(10, dtype=int)
    fitted = fit_unrestricted(Dataset(items, acts), ProblemKind.DISTRIBUTION, gmenu, epsilon=0.5)
    assert np.allclose(fitted.values[0], np.array([10.5, 0.5, 0.5]) / 11.5, atol=1e-15)
    assert np.allclose(fitted.values[1], np.ones(3) / 3.0, atol=1e-15)
    with pytest.raises(ConfigError):
        fit_unrestricted(Dataset(items, acts), ProblemKind.DISTRIBUTION, gmenu, epsilon=-0.1)


def test_unrestricted_minimizes_squared_training_error():
    menu = gain_menu(n=6, seed=31)
    rng = np.random.default_rng(31)
    items = rng.integers(0, len(menu), size=200)
    y = expected_value(menu)[items] + rng.normal(0, 2, size=200)
    data = Dataset(items, y)
    fitted = fit_unrestricted(data, ProblemKind.MEAN, menu)
    base = empirical_error(fitted.values, data, ProblemKind.MEAN)
    for _ in range(100):
        perturbed = fitted.values + rng.normal(0, 0.3, size=len(menu))
        assert base <= empirical_error(perturbed, data, ProblemKind.MEAN)
