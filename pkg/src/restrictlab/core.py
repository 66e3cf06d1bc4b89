"""Shared vocabulary: menu/item types, mappings, datasets, losses, and discrepancies.

A *menu* is a finite list of decision problems (lotteries or 3x3 games) with
sampling weights. A *mapping* assigns each menu item a prediction: a certainty
equivalent for lottery menus, a distribution over the three row actions for
game menus. Prediction problems come in three kinds, named by the population
object a model is trying to match:

- ``ProblemKind.MEAN``: squared loss, optimum is the conditional mean.
- ``ProblemKind.DISTRIBUTION``: log loss, optimum is the conditional law.
- ``ProblemKind.MEDIAN``: absolute loss, optimum is a conditional median.

For the first two kinds the expected-error gap between a mapping and the
optimal mapping equals a weighted discrepancy between the two (squared
Euclidean and KL respectively); for the median kind no such decomposition
exists. ``check_decomposition`` verifies the identity by enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from statistics import NormalDist

import numpy as np

from .errors import ConfigError, InfiniteDivergence, ZeroLikelihood


class ProblemKind(Enum):
    MEAN = "mean"
    DISTRIBUTION = "distribution"
    MEDIAN = "median"


# ---------------------------------------------------------------------------
# Menu items


@dataclass(frozen=True)
class BinaryLottery:
    """Two-outcome lottery paying z_high with probability p, else z_low.

    Prizes must not straddle zero: the gain domain has z_high >= z_low >= 0,
    the loss domain 0 >= z_high >= z_low.
    """

    z_high: float
    z_low: float
    p: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"lottery probability {self.p} outside [0, 1]")
        if self.z_high < self.z_low:
            raise ConfigError(f"z_high {self.z_high} below z_low {self.z_low}")
        if self.z_low < 0.0 < self.z_high:
            raise ConfigError(
                f"mixed-sign lottery ({self.z_high}, {self.z_low}) not supported"
            )

    @property
    def domain(self) -> str:
        return "loss" if self.z_high <= 0.0 else "gain"

    def support(self) -> np.ndarray:
        return np.array([self.z_low, self.z_high])

    def cdf(self, t: np.ndarray) -> np.ndarray:
        """P(Z <= t), a right-continuous step function."""
        return np.where(t >= self.z_high, 1.0, np.where(t >= self.z_low, 1.0 - self.p, 0.0))


@dataclass(frozen=True)
class ThreeOutcomeLottery:
    """Lottery over prizes z1 >= z2 >= z3 >= 0 with probabilities (p1, p2, p3)."""

    z1: float
    z2: float
    z3: float
    p1: float
    p2: float
    p3: float

    def __post_init__(self) -> None:
        ps = (self.p1, self.p2, self.p3)
        if min(ps) < 0.0 or abs(sum(ps) - 1.0) > 1e-9:
            raise ConfigError(f"lottery probabilities {ps} are not a distribution")
        if not self.z1 >= self.z2 >= self.z3 >= 0.0:
            raise ConfigError(
                f"prizes ({self.z1}, {self.z2}, {self.z3}) must be ordered and nonnegative"
            )

    def support(self) -> np.ndarray:
        return np.array([self.z3, self.z2, self.z1])

    def cdf(self, t: np.ndarray) -> np.ndarray:
        out = np.zeros_like(t, dtype=float)
        out = np.where(t >= self.z3, self.p3, out)
        out = np.where(t >= self.z2, self.p3 + self.p2, out)
        out = np.where(t >= self.z1, 1.0, out)
        return out


@dataclass(frozen=True)
class Game3x3:
    """Symmetric-role 3x3 game; payoff matrices are row-player and column-player views."""

    game_id: str
    row_payoffs: tuple[tuple[float, float, float], ...]
    col_payoffs: tuple[tuple[float, float, float], ...]

    def __post_init__(self) -> None:
        for mat, label in ((self.row_payoffs, "row"), (self.col_payoffs, "col")):
            if len(mat) != 3 or any(len(r) != 3 for r in mat):
                raise ConfigError(f"{label} payoff matrix of game {self.game_id} is not 3x3")


LotteryItem = BinaryLottery | ThreeOutcomeLottery
MenuItem = BinaryLottery | ThreeOutcomeLottery | Game3x3


@dataclass
class Menu:
    """A finite family of decision problems with item weights summing to one."""

    items: tuple[MenuItem, ...]
    weights: np.ndarray | None = None
    name: str = ""

    def __post_init__(self) -> None:
        if not self.items:
            raise ConfigError("menu has no items")
        kinds = {type(it) for it in self.items}
        if len(kinds) > 1:
            raise ConfigError("menu mixes item types")
        if self.weights is None:
            self.weights = np.full(len(self.items), 1.0 / len(self.items))
        else:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != (len(self.items),):
                raise ConfigError("menu weights shape does not match item count")
            if np.any(self.weights < 0) or not math.isclose(self.weights.sum(), 1.0, abs_tol=1e-9):
                raise ConfigError("menu weights must be nonnegative and sum to one")

    def __len__(self) -> int:
        return len(self.items)

    @property
    def item_kind(self) -> str:
        it = self.items[0]
        if isinstance(it, BinaryLottery):
            return "binary"
        if isinstance(it, ThreeOutcomeLottery):
            return "three_outcome"
        return "game"

    @property
    def is_lottery_menu(self) -> bool:
        return self.item_kind in ("binary", "three_outcome")

    def prize_ranges(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-item (lowest prize, highest prize). Lottery menus only."""
        if "_ranges" not in self.__dict__:
            if self.item_kind == "binary":
                lo = np.array([it.z_low for it in self.items])
                hi = np.array([it.z_high for it in self.items])
            elif self.item_kind == "three_outcome":
                lo = np.array([it.z3 for it in self.items])
                hi = np.array([it.z1 for it in self.items])
            else:
                raise ConfigError("game menus have no prize ranges")
            self.__dict__["_ranges"] = (lo, hi)
        return self.__dict__["_ranges"]

    def binary_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(z_high, z_low, p) arrays for a binary-lottery menu."""
        if "_binary" not in self.__dict__:
            if self.item_kind != "binary":
                raise ConfigError("binary arrays require a binary-lottery menu")
            self.__dict__["_binary"] = (
                np.array([it.z_high for it in self.items]),
                np.array([it.z_low for it in self.items]),
                np.array([it.p for it in self.items]),
            )
        return self.__dict__["_binary"]

    def three_outcome_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """((n,3) prizes, (n,3) probabilities) for a three-outcome menu."""
        if "_three" not in self.__dict__:
            if self.item_kind != "three_outcome":
                raise ConfigError("three-outcome arrays require a three-outcome menu")
            self.__dict__["_three"] = (
                np.array([(it.z1, it.z2, it.z3) for it in self.items]),
                np.array([(it.p1, it.p2, it.p3) for it in self.items]),
            )
        return self.__dict__["_three"]

    def payoff_tensor(self) -> np.ndarray:
        """(n, 3, 3) row-player payoffs. Game menus only."""
        if self.item_kind != "game":
            raise ConfigError("payoff tensor requires a game menu")
        if "_payoffs" not in self.__dict__:
            self.__dict__["_payoffs"] = np.array(
                [it.row_payoffs for it in self.items], dtype=float
            )
        return self.__dict__["_payoffs"]


@dataclass
class Mapping:
    """A prediction per menu item: shape (n,) for lotteries, (n, 3) for games."""

    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def validate_mapping(menu: Menu, values: np.ndarray, atol: float = 1e-9) -> None:
    """Raise ConfigError unless values are feasible predictions for the menu."""
    values = np.asarray(values, dtype=float)
    if menu.is_lottery_menu:
        if values.shape != (len(menu),):
            raise ConfigError(f"expected shape ({len(menu)},), got {values.shape}")
        lo, hi = menu.prize_ranges()
        if np.any(values < lo - atol) or np.any(values > hi + atol):
            raise ConfigError("certainty equivalent outside its lottery's prize range")
    else:
        if values.shape != (len(menu), 3):
            raise ConfigError(f"expected shape ({len(menu)}, 3), got {values.shape}")
        if np.any(values < -atol) or np.any(np.abs(values.sum(axis=1) - 1.0) > 1e-6):
            raise ConfigError("play distribution rows must be on the simplex")


@dataclass
class Dataset:
    """Observations (menu item index, outcome), optionally tagged with a group label.

    Outcomes are floats (reported certainty equivalents) for lottery menus and
    integer action indices in {0, 1, 2} for game menus.
    """

    item_index: np.ndarray
    y: np.ndarray
    group: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.item_index = np.asarray(self.item_index, dtype=np.int64)
        self.y = np.asarray(self.y)
        if self.item_index.ndim != 1 or self.item_index.shape != self.y.shape[:1]:
            raise ConfigError("item_index and y must be aligned 1-d arrays")
        if self.item_index.size == 0:
            raise ConfigError("dataset has no observations")
        if self.group is not None:
            self.group = np.asarray(self.group)
            if self.group.shape != self.item_index.shape:
                raise ConfigError("group labels must align with observations")

    @property
    def n_obs(self) -> int:
        return int(self.item_index.size)

    def subset(self, idx: np.ndarray) -> "Dataset":
        g = None if self.group is None else self.group[idx]
        return Dataset(self.item_index[idx], self.y[idx], g)


# ---------------------------------------------------------------------------
# Losses


def obs_losses(values: np.ndarray, dataset: Dataset, kind: ProblemKind) -> np.ndarray:
    """Pointwise loss of mapping `values` at each observation, in dataset order."""
    values = np.asarray(values, dtype=float)
    pred = values[dataset.item_index]
    if kind is ProblemKind.MEAN:
        return (pred - dataset.y) ** 2
    if kind is ProblemKind.MEDIAN:
        return np.abs(pred - dataset.y)
    prob = pred[np.arange(dataset.n_obs), dataset.y.astype(np.int64)]
    if np.any(prob <= 0.0):
        bad = int(np.argmax(prob <= 0.0))
        raise ZeroLikelihood(
            f"observation {bad} has zero predicted probability under log loss"
        )
    return -np.log(prob)


def empirical_error(values: np.ndarray, dataset: Dataset, kind: ProblemKind) -> float:
    """Mean pointwise loss of a mapping over a dataset."""
    return float(np.mean(obs_losses(values, dataset, kind)))


# ---------------------------------------------------------------------------
# Discrepancies between mappings

_KL_ATOL = 0.0  # exact zero counts as "no mass"


def discrepancy(
    kind: ProblemKind, f: np.ndarray, g: np.ndarray, weights: np.ndarray
) -> float:
    """Weighted discrepancy d(f, g) between two mappings on the same menu.

    MEAN: sum_x w(x) (f(x) - g(x))^2.
    MEDIAN: sum_x w(x) |f(x) - g(x)|.
    DISTRIBUTION: sum_x w(x) KL(f(.|x) || g(.|x)), expectation under the first
    argument; 0 log 0 = 0, and f > 0 where g = 0 raises InfiniteDivergence.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if f.shape != g.shape:
        raise ConfigError(f"mapping shapes differ: {f.shape} vs {g.shape}")
    if kind is ProblemKind.MEAN:
        return float(weights @ (f - g) ** 2)
    if kind is ProblemKind.MEDIAN:
        return float(weights @ np.abs(f - g))
    support = f > _KL_ATOL
    if np.any(support & (g <= 0.0)):
        raise InfiniteDivergence("reference mapping puts mass where the other has none")
    terms = np.zeros_like(f)
    np.log(np.where(support, f / np.where(support, g, 1.0), 1.0), out=terms)
    kl_per_item = np.sum(f * terms, axis=-1)
    return float(weights @ kl_per_item)


# ---------------------------------------------------------------------------
# Finite joints and the decomposition identity


@dataclass
class DiscreteJoint:
    """A finite joint law over (item, outcome), used as an enumeration oracle.

    For MEAN / MEDIAN kinds, item x draws outcome y_support[x][j] with
    probability y_probs[x][j]. For DISTRIBUTION kind the outcome is an action
    in {0, 1, 2} and y_probs is an (n, 3) array (y_support is ignored).
    """

    item_weights: np.ndarray
    y_probs: list[np.ndarray] | np.ndarray
    y_support: list[np.ndarray] | None = None

    def __post_init__(self) -> None:
        self.item_weights = np.asarray(self.item_weights, dtype=float)
        if abs(self.item_weights.sum() - 1.0) > 1e-9 or np.any(self.item_weights < 0):
            raise ConfigError("item weights must form a distribution")


def expected_error(joint: DiscreteJoint, values: np.ndarray, kind: ProblemKind) -> float:
    """Exact expected loss of a mapping under the joint, by enumeration."""
    values = np.asarray(values, dtype=float)
    w = joint.item_weights
    if kind is ProblemKind.DISTRIBUTION:
        probs = np.asarray(joint.y_probs, dtype=float)
        support = probs > 0.0
        if np.any(support & (values <= 0.0)):
            raise ZeroLikelihood("mapping has zero probability on a realized action")
        logs = np.where(support, np.log(np.where(values > 0, values, 1.0)), 0.0)
        return float(w @ (-np.sum(probs * logs, axis=1)))
    total = 0.0
    for x, wx in enumerate(w):
        ys = np.asarray(joint.y_support[x], dtype=float)
        ps = np.asarray(joint.y_probs[x], dtype=float)
        if kind is ProblemKind.MEAN:
            total += wx * float(ps @ (ys - values[x]) ** 2)
        else:
            total += wx * float(ps @ np.abs(ys - values[x]))
    return total


def optimal_mapping(joint: DiscreteJoint, kind: ProblemKind) -> np.ndarray:
    """Exact minimizer of expected loss under the joint.

    MEAN: per-item conditional means. DISTRIBUTION: the conditional laws.
    MEDIAN: the per-item support point minimizing expected absolute loss
    (an L1 minimizer is always attained on the support).
    """
    if kind is ProblemKind.DISTRIBUTION:
        return np.asarray(joint.y_probs, dtype=float).copy()
    out = np.empty(len(joint.item_weights))
    for x in range(len(joint.item_weights)):
        ys = np.asarray(joint.y_support[x], dtype=float)
        ps = np.asarray(joint.y_probs[x], dtype=float)
        if kind is ProblemKind.MEAN:
            out[x] = float(ps @ ys)
        else:
            # weighted median: smallest support point with cumulative mass >= 1/2,
            # which is the lower end of the (possibly flat) L1 minimizer interval
            order = np.argsort(ys, kind="stable")
            cum = np.cumsum(ps[order])
            idx = min(int(np.searchsorted(cum, 0.5)), len(order) - 1)
            out[x] = ys[order[idx]]
    return out


def check_decomposition(
    joint: DiscreteJoint, values: np.ndarray, kind: ProblemKind
) -> tuple[float, float]:
    """Return (excess expected error of `values`, discrepancy from the optimum).

    The two coincide for MEAN and DISTRIBUTION kinds; under log loss the
    discrepancy takes the optimal mapping as the KL reference, which is the
    orientation the identity holds in. MEDIAN is rejected: no discrepancy
    reproduces the excess error there.
    """
    if kind is ProblemKind.MEDIAN:
        raise ConfigError("no decomposition exists for the median kind")
    f_opt = optimal_mapping(joint, kind)
    gap = expected_error(joint, values, kind) - expected_error(joint, f_opt, kind)
    return gap, discrepancy(kind, f_opt, values, joint.item_weights)


# ---------------------------------------------------------------------------
# Naive mappings


def expected_value(menu: Menu) -> np.ndarray:
    """Per-item expected prize of a lottery menu."""
    if menu.item_kind == "binary":
        zh, zl, p = menu.binary_arrays()
        return p * zh + (1.0 - p) * zl
    if menu.item_kind == "three_outcome":
        z, p = menu.three_outcome_arrays()
        return np.sum(p * z, axis=1)
    raise ConfigError("expected value requires a lottery menu")


def uniform_play(menu: Menu) -> np.ndarray:
    """Uniform action distribution for every game in the menu."""
    if menu.item_kind != "game":
        raise ConfigError("uniform play requires a game menu")
    return np.full((len(menu), 3), 1.0 / 3.0)


def naive_mapping(menu: Menu) -> np.ndarray:
    """The model-free benchmark: expected value for lotteries, uniform play for games."""
    return expected_value(menu) if menu.is_lottery_menu else uniform_play(menu)


def normal_quantile(level: float) -> float:
    """Two-sided normal critical value q such that P(|Z| <= q) = level."""
    if not 0.0 < level < 1.0:
        raise ConfigError(f"confidence level {level} outside (0, 1)")
    return NormalDist().inv_cdf(0.5 + level / 2.0)
