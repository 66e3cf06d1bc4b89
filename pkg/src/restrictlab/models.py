"""Parametric behavioral model families.

Certainty equivalents: cumulative prospect theory with power utility and a
two-parameter probability weighting function, in four nested specifications
(free parameter subsets of (alpha, gamma, eta)), for binary or three-outcome
lotteries, gain or loss domain. Predictions are certainty equivalents in money
units: the rank-dependent value is mapped back through the inverse utility.

Initial play in 3x3 games: a Poisson cognitive-hierarchy model (tau), a logit
level-1 model (lambda), and a logit cognitive-hierarchy hybrid (tau, lambda).
Game payoffs are affinely normalized to a [0, 10] scale per menu before any
logit transformation; the normalization is recorded on the model description.

Every family designates a naive member that reproduces the model-free
benchmark exactly: theta = (1, 1, 1) gives expected value, tau = 0 or
lambda = 0 gives uniform play.
"""

from __future__ import annotations

import numpy as np

from .core import Menu, ProblemKind, expected_value
from .errors import ConfigError

ALPHA_BOX = (0.2, 2.0)
GAMMA_BOX = (0.05, 2.0)
ETA_BOX = (0.05, 5.0)
TAU_BOX = (0.0, 10.0)
LAMBDA_BOX = (0.0, 100.0)
LEVEL_CAP = 10

_CPT_ORDER = ("alpha", "gamma", "eta")
_CPT_BOXES = {"alpha": ALPHA_BOX, "gamma": GAMMA_BOX, "eta": ETA_BOX}


class Model:
    """A parametric family: box-bounded parameters, batch prediction, naive member.

    Subclasses set `name`, `kind`, `param_names`, `bounds` (k, 2), and
    `naive_params` (k,), and implement `predict_batch`.
    """

    name: str
    kind: ProblemKind
    param_names: tuple[str, ...]
    bounds: np.ndarray
    naive_params: np.ndarray

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    def predict_batch(self, menu: Menu, params: np.ndarray) -> np.ndarray:
        """Predictions for a (B, k) batch of parameter vectors."""
        raise NotImplementedError

    def predict(self, menu: Menu, params: np.ndarray) -> np.ndarray:
        return self.predict_batch(menu, np.asarray(params, dtype=float)[None])[0]

    def closed_form_mapping_fit(
        self, menu: Menu, target: np.ndarray, weights: np.ndarray, kind: ProblemKind
    ) -> np.ndarray | None:
        """Exact discrepancy minimizer when one exists; None to use the numeric path."""
        return None

    def closed_form_data_fit(self, menu: Menu, stats, kind: ProblemKind) -> np.ndarray | None:
        """Exact empirical-loss minimizer when one exists; None otherwise."""
        return None

    def describe(self, menu: Menu | None = None) -> dict:
        return {
            "name": self.name,
            "params": list(self.param_names),
            "bounds": [list(b) for b in np.asarray(self.bounds)],
        }


# ---------------------------------------------------------------------------
# Cumulative prospect theory


def weighting(p: np.ndarray, gamma: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """w(p) = eta p^gamma / (eta p^gamma + (1-p)^gamma); w(0)=0, w(1)=1."""
    num = eta * p**gamma
    return num / (num + (1.0 - p) ** gamma)


def _expand_cpt_params(free: tuple[str, ...], theta: np.ndarray) -> tuple[np.ndarray, ...]:
    """Map free-parameter columns onto the full (alpha, gamma, eta) triple; fixed slots are 1."""
    theta = np.asarray(theta, dtype=float)
    cols = {}
    for pos, name in enumerate(free):
        cols[name] = theta[:, pos]
    ones = np.ones(theta.shape[0])
    return tuple(cols.get(name, ones) for name in _CPT_ORDER)


def _validate_free(free: tuple[str, ...]) -> tuple[str, ...]:
    free = tuple(free)
    if not set(free) <= set(_CPT_ORDER) or len(set(free)) != len(free):
        raise ConfigError(f"free parameters {free} must be distinct among {_CPT_ORDER}")
    return tuple(name for name in _CPT_ORDER if name in free)  # canonical order


class CptBinary(Model):
    """CPT certainty equivalents for binary lotteries, gain or loss domain.

    Gain: CE = (w(p) z_high^a + (1-w(p)) z_low^a)^(1/a).
    Loss: value = (1-w(1-p)) v(z_high) + w(1-p) v(z_low) with v(z) = -(-z)^b,
    mapped back through v^{-1}. The curvature slot is named beta there.
    """

    kind = ProblemKind.MEAN

    def __init__(self, free: tuple[str, ...] = _CPT_ORDER, domain: str = "gain") -> None:
        if domain not in ("gain", "loss"):
            raise ConfigError(f"unknown domain {domain!r}")
        internal = tuple(n if n != "beta" else "alpha" for n in free)
        self.free = _validate_free(internal)
        self.domain = domain
        shown = tuple(
            ("beta" if (n == "alpha" and domain == "loss") else n) for n in self.free
        )
        self.param_names = shown
        self.bounds = np.array([_CPT_BOXES[n] for n in self.free])
        self.naive_params = np.ones(len(self.free))
        prefix = "cpt" if domain == "gain" else "cpt-loss"
        self.name = f"{prefix}({','.join(shown)})"

    def predict_batch(self, menu: Menu, params: np.ndarray) -> np.ndarray:
        zh, zl, p = menu.binary_arrays()
        if menu.items[0].domain != self.domain:
            raise ConfigError(f"menu domain {menu.items[0].domain} does not match {self.domain}")
        alpha, gamma, eta = (c[:, None] for c in _expand_cpt_params(self.free, params))
        if self.domain == "gain":
            w = weighting(p[None, :], gamma, eta)
            value = w * zh ** alpha + (1.0 - w) * zl ** alpha
            return value ** (1.0 / alpha)
        w = weighting(1.0 - p[None, :], gamma, eta)
        value = (1.0 - w) * (-((-zh) ** alpha)) + w * (-((-zl) ** alpha))
        return -((-value) ** (1.0 / alpha))


class CptThreeOutcome(Model):
    """Rank-dependent CPT certainty equivalents for three-outcome gain lotteries."""

    kind = ProblemKind.MEAN

    def __init__(self, free: tuple[str, ...] = _CPT_ORDER) -> None:
        self.free = _validate_free(free)
        self.param_names = self.free
        self.bounds = np.array([_CPT_BOXES[n] for n in self.free])
        self.naive_params = np.ones(len(self.free))
        self.name = f"cpt3({','.join(self.free)})"

    def predict_batch(self, menu: Menu, params: np.ndarray) -> np.ndarray:
        z, pr = menu.three_outcome_arrays()
        alpha, gamma, eta = (c[:, None] for c in _expand_cpt_params(self.free, params))
        v = z[None, :, :] ** alpha[:, :, None]
        w23 = weighting((pr[:, 1] + pr[:, 2])[None, :], gamma, eta)
        w3 = weighting(pr[:, 2][None, :], gamma, eta)
        value = v[:, :, 0] + w23 * (v[:, :, 1] - v[:, :, 0]) + w3 * (v[:, :, 2] - v[:, :, 1])
        return value ** (1.0 / alpha)


# ---------------------------------------------------------------------------
# Game models


def normalized_payoffs(menu: Menu) -> tuple[np.ndarray, float, float]:
    """Menu payoffs affinely mapped onto [0, 10]; returns (tensor, scale, offset).

    normalized = (raw + offset) * scale. Softmax responses are shift-invariant,
    so only the scale interacts with the lambda box.
    """
    if "_normalized_payoffs" not in menu.__dict__:
        raw = menu.payoff_tensor()
        mn, mx = float(raw.min()), float(raw.max())
        scale = 10.0 / (mx - mn) if mx > mn else 1.0
        offset = -mn
        menu.__dict__["_normalized_payoffs"] = ((raw + offset) * scale, scale, offset)
    return menu.__dict__["_normalized_payoffs"]


def _poisson_weights(tau: np.ndarray, cap: int) -> np.ndarray:
    """(B, cap+1) Poisson(tau) pmf values; tau = 0 degenerates to level 0."""
    B = tau.shape[0]
    pis = np.empty((B, cap + 1))
    pis[:, 0] = np.exp(-tau)
    for k in range(1, cap + 1):
        pis[:, k] = pis[:, k - 1] * tau / k
    return pis


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _best_response(u: np.ndarray) -> np.ndarray:
    """Uniform mixture over payoff maximizers (ties within 1e-9 of the max)."""
    mx = u.max(axis=-1, keepdims=True)
    mask = u >= mx - 1e-9 * (1.0 + np.abs(mx))
    return mask / mask.sum(axis=-1, keepdims=True)


class _HierarchyModel(Model):
    """Shared Poisson level recursion. Subclasses map level values to level play."""

    kind = ProblemKind.DISTRIBUTION

    def __init__(self, level_cap: int = LEVEL_CAP) -> None:
        if level_cap < 1:
            raise ConfigError("level cap must be at least 1")
        self.level_cap = level_cap

    def _level_play(self, u: np.ndarray, params: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _tau_of(self, params: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def level_plays(self, menu: Menu, params: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-level play distributions and raw Poisson weights (diagnostic).

        Returns (levels, pis) with levels of shape (cap+1, B, n_games, 3) and
        pis of shape (B, cap+1).
        """
        U, _, _ = normalized_payoffs(menu)
        params = np.asarray(params, dtype=float)
        B = params.shape[0]
        tau = self._tau_of(params)
        pis = _poisson_weights(tau, self.level_cap)
        levels = np.empty((self.level_cap + 1, B, U.shape[0], 3))
        levels[0] = 1.0 / 3.0
        # running Poisson-weighted sum of lower-level play and its mass
        acc = pis[:, 0, None, None] * levels[0]
        cum = pis[:, 0].copy()
        for k in range(1, self.level_cap + 1):
            opp = acc / cum[:, None, None]
            u = np.einsum("gij,bgj->bgi", U, opp)
            levels[k] = self._level_play(u, params)
            acc = acc + pis[:, k, None, None] * levels[k]
            cum = cum + pis[:, k]
        return levels, pis

    def predict_batch(self, menu: Menu, params: np.ndarray) -> np.ndarray:
        levels, pis = self.level_plays(menu, params)
        weights = pis / pis.sum(axis=1, keepdims=True)
        return np.einsum("bk,kbgi->bgi", weights, levels)

    def describe(self, menu: Menu | None = None) -> dict:
        d = super().describe(menu)
        d["level_cap"] = self.level_cap
        if menu is not None and menu.item_kind == "game":
            _, scale, offset = normalized_payoffs(menu)
            d["payoff_scale"] = scale
            d["payoff_offset"] = offset
        return d


class Pchm(_HierarchyModel):
    """Poisson cognitive hierarchy: levels best-respond to the truncated
    Poisson mixture of lower levels; tau = 0 nests uniform play."""

    param_names = ("tau",)

    def __init__(self, level_cap: int = LEVEL_CAP) -> None:
        super().__init__(level_cap)
        self.bounds = np.array([TAU_BOX])
        self.naive_params = np.zeros(1)
        self.name = "pchm"

    def _tau_of(self, params: np.ndarray) -> np.ndarray:
        return params[:, 0]

    def _level_play(self, u: np.ndarray, params: np.ndarray) -> np.ndarray:
        return _best_response(u)


class LogitLevel1(Model):
    """Logit response to a uniform opponent; lambda = 0 nests uniform play."""

    kind = ProblemKind.DISTRIBUTION
    param_names = ("lambda",)

    def __init__(self) -> None:
        self.bounds = np.array([LAMBDA_BOX])
        self.naive_params = np.zeros(1)
        self.name = "logit-level1"

    def predict_batch(self, menu: Menu, params: np.ndarray) -> np.ndarray:
        U, _, _ = normalized_payoffs(menu)
        params = np.asarray(params, dtype=float)
        lam = params[:, 0]
        # same contraction as the hierarchy's level-1 step, so the logit-PCHM
        # k=1 component matches this model bit for bit
        opp = np.full((params.shape[0], U.shape[0], 3), 1.0 / 3.0)
        u1 = np.einsum("gij,bgj->bgi", U, opp)
        return _softmax(lam[:, None, None] * u1)


class LogitPchm(_HierarchyModel):
    """Logit cognitive hierarchy: levels respond by softmax(lambda * level value)
    to the truncated Poisson mixture of lower levels."""

    param_names = ("tau", "lambda")

    def __init__(self, level_cap: int = LEVEL_CAP) -> None:
        super().__init__(level_cap)
        self.bounds = np.array([TAU_BOX, LAMBDA_BOX])
        self.naive_params = np.zeros(2)
        self.name = "logit-pchm"

    def _tau_of(self, params: np.ndarray) -> np.ndarray:
        return params[:, 0]

    def _level_play(self, u: np.ndarray, params: np.ndarray) -> np.ndarray:
        lam = params[:, 1]
        return _softmax(lam[:, None, None] * u)


# ---------------------------------------------------------------------------
# Unrestricted table family


class TableModel(Model):
    """The permissible box itself, parameterized by per-item CE values.

    Used to represent an unrestricted family on CE menus; its fits are exact
    per-coordinate projections, so the numeric optimizer is bypassed.
    """

    kind = ProblemKind.MEAN

    def __init__(self, menu: Menu) -> None:
        if not menu.is_lottery_menu:
            raise ConfigError("table model is defined for lottery menus")
        lo, hi = menu.prize_ranges()
        self.bounds = np.column_stack([lo, hi])
        self.naive_params = expected_value(menu)
        self.param_names = tuple(f"ce_{i}" for i in range(len(menu)))
        self.name = f"table[{len(menu)}]"

    def predict_batch(self, menu: Menu, params: np.ndarray) -> np.ndarray:
        return np.asarray(params, dtype=float).copy()

    def closed_form_mapping_fit(
        self, menu: Menu, target: np.ndarray, weights: np.ndarray, kind: ProblemKind
    ) -> np.ndarray | None:
        if kind not in (ProblemKind.MEAN, ProblemKind.MEDIAN):
            return None
        return np.clip(target, self.bounds[:, 0], self.bounds[:, 1])

    def closed_form_data_fit(self, menu: Menu, stats, kind: ProblemKind) -> np.ndarray | None:
        if kind is not ProblemKind.MEAN:
            return None
        return np.clip(stats.item_means_or(self.naive_params), self.bounds[:, 0], self.bounds[:, 1])


# ---------------------------------------------------------------------------
# Registry


def parse_model(spec: str, menu: Menu | None = None, level_cap: int = LEVEL_CAP) -> Model:
    """Build a model from a CLI identifier like 'cpt3:alpha,gamma,eta' or 'pchm'."""
    head, _, arg = spec.partition(":")
    if head == "cpt" or head == "cpt-loss":
        free = tuple(arg.split(",")) if arg else _CPT_ORDER
        return CptBinary(free, domain="gain" if head == "cpt" else "loss")
    if head == "cpt3":
        free = tuple(arg.split(",")) if arg else _CPT_ORDER
        return CptThreeOutcome(free)
    if head == "pchm":
        return Pchm(level_cap)
    if head == "logit-level1":
        return LogitLevel1()
    if head == "logit-pchm":
        return LogitPchm(level_cap)
    if head == "table":
        if menu is None:
            raise ConfigError("table model requires a menu")
        return TableModel(menu)
    raise ConfigError(f"unknown model {spec!r}")
