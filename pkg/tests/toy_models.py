"""Cheap closed-form model families used by the statistical coverage tests."""

from __future__ import annotations

import numpy as np

from restrictlab.core import Menu, ProblemKind, expected_value
from restrictlab.models import Model


class ConstantCeModel(Model):
    """Predicts one shared constant for every item; naive member is 0.5.

    Meant for menus of unit-range lotteries with expected value 0.5, where the
    best fit (the weighted mean of the target) and the resulting discrepancy
    are closed-form, making tens of thousands of delta draws affordable.
    """

    kind = ProblemKind.MEAN

    def __init__(self) -> None:
        self.name = "constant-ce"
        self.param_names = ("c",)
        self.bounds = np.array([[0.0, 1.0]])
        self.naive_params = np.array([0.5])

    def predict_batch(self, menu: Menu, params: np.ndarray) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        return np.repeat(params[:, 0:1], len(menu), axis=1)

    def closed_form_mapping_fit(self, menu, target, weights, kind):
        if kind is not ProblemKind.MEAN:
            return None
        return np.clip(np.array([weights @ target]), 0.0, 1.0)

    def closed_form_data_fit(self, menu, stats, kind):
        if kind is not ProblemKind.MEAN:
            return None
        return np.clip(np.array([stats.global_mean]), 0.0, 1.0)


class LinearToyModel(Model):
    """EV plus a two-parameter linear deviation along a fixed item covariate.

    f_theta(x) = EV(x) + theta_1 + theta_2 * c_x. The naive member is theta =
    (0, 0) exactly, and both fits are ordinary least squares, so completeness
    replications carry no optimizer noise.
    """

    kind = ProblemKind.MEAN

    def __init__(self, menu: Menu, covariate: np.ndarray) -> None:
        self.name = "linear-toy"
        self.param_names = ("a", "b")
        self.bounds = np.array([[-5.0, 5.0], [-5.0, 5.0]])
        self.naive_params = np.zeros(2)
        self.base = expected_value(menu)
        self.covariate = np.asarray(covariate, dtype=float)

    def predict_batch(self, menu: Menu, params: np.ndarray) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        return self.base + params[:, 0:1] + params[:, 1:2] * self.covariate

    def _ols(self, response: np.ndarray, weights: np.ndarray) -> np.ndarray:
        design = np.column_stack([np.ones_like(self.covariate), self.covariate])
        sw = np.sqrt(weights)
        theta, *_ = np.linalg.lstsq(design * sw[:, None], response * sw, rcond=None)
        return np.clip(theta, self.bounds[:, 0], self.bounds[:, 1])

    def closed_form_mapping_fit(self, menu, target, weights, kind):
        if kind is not ProblemKind.MEAN:
            return None
        return self._ols(target - self.base, weights)

    def closed_form_data_fit(self, menu, stats, kind):
        if kind is not ProblemKind.MEAN:
            return None
        means = stats.item_means_or(self.base)
        return self._ols(means - self.base, stats.counts / stats.n_obs)
