"""Exception hierarchy. Every error the library raises derives from RestrictlabError."""

from __future__ import annotations


class RestrictlabError(Exception):
    """Base class for all library errors."""


class ConfigError(RestrictlabError):
    """Invalid user-supplied configuration (bad flag, malformed input file, unknown name)."""


class DegenerateTarget(RestrictlabError):
    """Target mapping coincides with the naive mapping, so the normalized ratio is undefined."""


class NestingViolation(RestrictlabError):
    """Fitted discrepancy exceeds the naive discrepancy beyond numerical tolerance."""


class InfiniteDivergence(RestrictlabError):
    """KL divergence is infinite: the reference puts mass where the other mapping has none."""


class ZeroLikelihood(RestrictlabError):
    """A predicted probability of an observed outcome is zero under log loss."""


class RejectionBudgetExceeded(RestrictlabError):
    """Rejection sampler could not produce a draw within its proposal budget."""


class NonFinite(RestrictlabError):
    """The objective evaluated non-finite at every candidate point."""


class DegenerateDeltas(RestrictlabError):
    """All sampled discrepancy ratios are identical; the CI is a point."""


class NaiveNotWorse(RestrictlabError):
    """Cross-validated naive loss does not exceed the unrestricted loss; kappa is undefined."""
