"""Samplers for hypothetical mappings from the permissible set.

Certainty-equivalent menus: the permissible set is the box of per-item prize
ranges intersected with the first-order stochastic dominance (FOSD) order
constraints. Uniform draws come from a single-site Gibbs sampler on that order
polytope; beta-perturbed draws come from per-coordinate beta proposals with
rejection; range-only draws ignore the order constraints.

Game menus: the permissible set constrains strictly dominated actions to
probability <= 1/3 and a strictly dominant action to probability >= 1/3;
draws are Dirichlet(1,1,1) with rejection, independently per game.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Game3x3, LotteryItem, Menu, expected_value
from .errors import ConfigError, RejectionBudgetExceeded

DEFAULT_BURN_IN = 500
DEFAULT_THINNING = 50
DEFAULT_REJECTION_BUDGET = 1_000_000

MU_KINDS = ("uniform-fosd", "beta-fosd", "range-only")


@dataclass(frozen=True)
class MuSpec:
    """Distribution over the permissible set, plus sampler controls."""

    kind: str = "uniform-fosd"
    a: float = 1.0
    b: float = 1.0
    burn_in: int = DEFAULT_BURN_IN
    thinning: int = DEFAULT_THINNING
    rejection_budget: int = DEFAULT_REJECTION_BUDGET

    def __post_init__(self) -> None:
        if self.kind not in MU_KINDS:
            raise ConfigError(f"unknown mu kind {self.kind!r}; expected one of {MU_KINDS}")
        if self.kind == "beta-fosd" and (self.a <= 0 or self.b <= 0):
            raise ConfigError("beta parameters must be positive")
        if self.burn_in < 1 or self.thinning < 1:
            raise ConfigError("burn_in and thinning must be positive")
        if self.rejection_budget < 1:
            raise ConfigError("rejection budget must be positive")

    @property
    def label(self) -> str:
        if self.kind == "beta-fosd":
            return f"beta-fosd(a={self.a:g}, b={self.b:g})"
        return self.kind


# ---------------------------------------------------------------------------
# FOSD order


def _dominates(a: LotteryItem, b: LotteryItem) -> bool:
    """CDF_a <= CDF_b everywhere with strict inequality somewhere."""
    ts = np.union1d(a.support(), b.support())
    ca, cb = a.cdf(ts), b.cdf(ts)
    return bool(np.all(ca <= cb) and np.any(ca < cb))


def build_fosd_order(menu: Menu) -> list[tuple[int, int]]:
    """All pairs (i, j) such that item i FOSD-dominates item j."""
    if not menu.is_lottery_menu:
        raise ConfigError("FOSD order requires a lottery menu")
    pairs = []
    for i, a in enumerate(menu.items):
        for j, b in enumerate(menu.items):
            if i != j and _dominates(a, b):
                pairs.append((i, j))
    return pairs


def order_violations(order: list[tuple[int, int]], values: np.ndarray) -> int:
    """Number of dominance pairs (i, j) with values[i] < values[j]."""
    return sum(1 for i, j in order if values[i] < values[j])


# ---------------------------------------------------------------------------
# CE mapping samplers


class GibbsCeSampler:
    """Single-site Gibbs chain whose stationary law is uniform on the order polytope.

    Each coordinate is redrawn uniformly between the tightest bounds implied by
    its prize range and the current values of its FOSD neighbors, which leaves
    the uniform law on the polytope invariant. The chain starts at the
    expected-value mapping (always feasible). The first draw is taken after
    `burn_in` full sweeps, subsequent draws every `thinning` sweeps.
    """

    def __init__(
        self,
        menu: Menu,
        rng: np.random.Generator,
        order: list[tuple[int, int]] | None = None,
        burn_in: int = DEFAULT_BURN_IN,
        thinning: int = DEFAULT_THINNING,
    ) -> None:
        if order is None:
            order = build_fosd_order(menu)
        self.lo, self.hi = menu.prize_ranges()
        n = len(menu)
        # f_i >= f_j for each dominance pair (i, j): j lower-bounds i, i upper-bounds j
        self._lower_nbrs: list[list[int]] = [[] for _ in range(n)]
        self._upper_nbrs: list[list[int]] = [[] for _ in range(n)]
        for i, j in order:
            self._lower_nbrs[i].append(j)
            self._upper_nbrs[j].append(i)
        self._vals = expected_value(menu).astype(float)
        self._rng = rng
        self._burn_in = burn_in
        self._thinning = thinning
        self._started = False

    def _sweep(self) -> None:
        vals = self._vals
        rnd = self._rng.random
        for x in range(vals.shape[0]):
            l = self.lo[x]
            for j in self._lower_nbrs[x]:
                vj = vals[j]
                if vj > l:
                    l = vj
            h = self.hi[x]
            for i in self._upper_nbrs[x]:
                vi = vals[i]
                if vi < h:
                    h = vi
            vals[x] = l + (h - l) * rnd()

    def draw(self) -> np.ndarray:
        sweeps = self._thinning if self._started else self._burn_in
        self._started = True
        for _ in range(sweeps):
            self._sweep()
        return self._vals.copy()


def sample_ce_mapping(
    menu: Menu,
    spec: MuSpec,
    rng: np.random.Generator,
    order: list[tuple[int, int]] | None = None,
) -> np.ndarray:
    """One hypothetical CE mapping drawn from mu. Fresh Gibbs chain per call."""
    if not menu.is_lottery_menu:
        raise ConfigError("sample_ce_mapping requires a lottery menu")
    lo, hi = menu.prize_ranges()
    if spec.kind == "range-only":
        return lo + (hi - lo) * rng.random(len(menu))
    if order is None:
        order = build_fosd_order(menu)
    if spec.kind == "uniform-fosd":
        chain = GibbsCeSampler(menu, rng, order, spec.burn_in, spec.thinning)
        return chain.draw()
    # beta-fosd: iid scaled beta coordinates, rejected against the order
    pairs_i = np.array([i for i, _ in order], dtype=np.int64)
    pairs_j = np.array([j for _, j in order], dtype=np.int64)
    batch = 1024
    proposed = 0
    while proposed < spec.rejection_budget:
        m = min(batch, spec.rejection_budget - proposed)
        cand = lo + (hi - lo) * rng.beta(spec.a, spec.b, size=(m, len(menu)))
        proposed += m
        if pairs_i.size:
            ok = np.all(cand[:, pairs_i] >= cand[:, pairs_j], axis=1)
        else:
            ok = np.ones(m, dtype=bool)
        hits = np.nonzero(ok)[0]
        if hits.size:
            return cand[hits[0]].copy()
    raise RejectionBudgetExceeded(
        f"no FOSD-consistent beta({spec.a:g},{spec.b:g}) draw in {spec.rejection_budget} proposals"
    )


# ---------------------------------------------------------------------------
# Game dominance and play samplers

DOMINATED = "StrictlyDominated"
DOMINANT = "StrictlyDominant"
NEITHER = "Neither"


def classify_dominance(game: Game3x3) -> tuple[str, str, str]:
    """Pure-strategy strict dominance tags for the three row actions."""
    r = np.asarray(game.row_payoffs, dtype=float)
    beats = np.array(
        [[bool(np.all(r[i] > r[j])) for j in range(3)] for i in range(3)]
    )
    tags = []
    for i in range(3):
        others = [j for j in range(3) if j != i]
        if any(beats[j][i] for j in others):
            tags.append(DOMINATED)
        elif all(beats[i][j] for j in others):
            tags.append(DOMINANT)
        else:
            tags.append(NEITHER)
    return tuple(tags)


def sample_play_mapping(
    menu: Menu,
    rng: np.random.Generator,
    budget: int = DEFAULT_REJECTION_BUDGET,
    tags: list[tuple[str, str, str]] | None = None,
) -> np.ndarray:
    """One hypothetical play mapping: per game, uniform on the simplex subject to
    dominated actions <= 1/3 and a dominant action >= 1/3."""
    if menu.item_kind != "game":
        raise ConfigError("sample_play_mapping requires a game menu")
    if tags is None:
        tags = [classify_dominance(g) for g in menu.items]
    out = np.empty((len(menu), 3))
    alpha = np.ones(3)
    for g in range(len(menu)):
        tag = tags[g]
        for attempt in range(budget):
            q = rng.dirichlet(alpha)
            ok = True
            for i in range(3):
                if tag[i] == DOMINATED and q[i] > 1.0 / 3.0:
                    ok = False
                    break
                if tag[i] == DOMINANT and q[i] < 1.0 / 3.0:
                    ok = False
                    break
            if ok:
                out[g] = q
                break
        else:
            raise RejectionBudgetExceeded(
                f"no dominance-consistent draw for game {g} in {budget} proposals"
            )
    return out


def play_violations(tags: list[tuple[str, str, str]], values: np.ndarray) -> int:
    """Number of (game, action) dominance constraints violated by a play mapping."""
    bad = 0
    for g, tag in enumerate(tags):
        for i in range(3):
            if tag[i] == DOMINATED and values[g, i] > 1.0 / 3.0:
                bad += 1
            if tag[i] == DOMINANT and values[g, i] < 1.0 / 3.0:
                bad += 1
    return bad


# ---------------------------------------------------------------------------
# Unified entry point


def sample_mapping(
    menu: Menu,
    spec: MuSpec,
    rng: np.random.Generator,
    order: list[tuple[int, int]] | None = None,
) -> np.ndarray:
    """Draw one hypothetical mapping from mu for either menu kind."""
    if menu.is_lottery_menu:
        return sample_ce_mapping(menu, spec, rng, order)
    if spec.kind != "uniform-fosd":
        raise ConfigError(
            "game menus define a single permissible-set distribution; use the uniform MuSpec"
        )
    return sample_play_mapping(menu, rng, spec.rejection_budget)


def substream(seed: int, *key: int) -> np.random.Generator:
    """Deterministic independent RNG stream for (seed, key...)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))
