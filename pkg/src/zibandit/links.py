"""Monotone link functions for the contextual model."""

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit
from scipy.stats import norm


@dataclass(frozen=True)
class Link:
    name: str
    fn: Callable
    deriv: Callable
    bounded: bool  # maps into [0, 1]

    def __call__(self, x):
        return self.fn(x)

    def kappa(self, radius=1.0):
        """``inf |x| <= radius`` of the derivative.

        With features and parameters inside unit balls the linear predictor
        lies in ``[-radius, radius]``; all links here have derivatives that
        are even and unimodal at zero, so the infimum sits at the boundary.
        """
        return float(self.deriv(np.asarray(radius, dtype=float)))


def _logit_deriv(x):
    s = expit(x)
    return s * (1.0 - s)


IDENTITY = Link("identity", lambda x: np.asarray(x, dtype=float), lambda x: np.ones_like(np.asarray(x, dtype=float)), False)
LOGIT = Link("logit", expit, _logit_deriv, True)
PROBIT = Link("probit", norm.cdf, norm.pdf, True)

LINKS = {link.name: link for link in (IDENTITY, LOGIT, PROBIT)}


def get_link(name):
    try:
        return LINKS[name]
    except KeyError:
        raise ValueError(f"unknown link {name!r}; choose from {sorted(LINKS)}") from None
