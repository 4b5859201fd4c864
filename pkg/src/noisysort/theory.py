"""Closed-form information quantities: Bernoulli/model KL divergences,
binomial tail bounds, and reference rate curves for plot overlays."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import WITH_REPLACEMENT, WITHOUT_REPLACEMENT
from .perms import Permutation, kendall_tau

RATE_KINDS = ("minimax_o1", "minimax_o2", "ms_upper", "lower_o1", "lower_o2")


def bernoulli_kl(p: float, q: float) -> float:
    """KL(Ber(p) || Ber(q)); boundary parameters are rejected (divergence is
    infinite there)."""
    if not 0 < p < 1 or not 0 < q < 1:
        raise ValueError(f"p and q must lie strictly in (0, 1), got p={p} q={q}")
    return p * math.log(p / q) + (1 - p) * math.log((1 - p) / (1 - q))


def bernoulli_kl_lower_bound(p: float, q: float) -> float:
    """(p-q)^2 / (2 p (1-q)): a floor on KL(Ber(p) || Ber(q)) for q < p."""
    return (p - q) ** 2 / (2 * p * (1 - q))


def binomial_tail_bounds(n_draws: int, p: float, r: float, s: float) -> tuple[float, float]:
    """Closed-form tail bounds for X ~ Bin(n_draws, p).

    Returns (bound on P(X <= r*n), bound on P(X >= s*n)):

        P(X <= rn) <= exp(-n (p-r)^2 / (2 p (1-r)))
        P(X >= sn) <= exp(-n (p-s)^2 / (2 s (1-p)))
    """
    if not 0 < r < p < s < 1:
        raise ValueError(f"need 0 < r < p < s < 1, got r={r} p={p} s={s}")
    if n_draws < 1:
        raise ValueError("n_draws must be positive")
    lower = math.exp(-n_draws * (p - r) ** 2 / (2 * p * (1 - r)))
    upper = math.exp(-n_draws * (p - s) ** 2 / (2 * s * (1 - p)))
    return lower, upper


def kl_per_discordant_pair(rate: float, lam: float) -> float:
    """2 * rate * lam * log((1+2 lam)/(1-2 lam)): one pair's contribution."""
    return 2.0 * rate * lam * math.log((1 + 2 * lam) / (1 - 2 * lam))


def model_kl(
    pi: Permutation,
    sigma: Permutation,
    kind: str,
    n: int,
    budget: float,
    lam: float,
) -> float:
    """KL divergence between the comparison distributions under two orders.

    Every pair ordered oppositely by ``pi`` and ``sigma`` contributes the
    same amount, so the divergence is proportional to the Kendall tau
    distance: 2 d p lam log((1+2lam)/(1-2lam)) for per-pair observation
    probability p, with p replaced by N / C(n,2) under with-replacement
    sampling (whose N draws tensorize).
    """
    if not 0 < lam < 0.5:
        raise ValueError(f"lam must lie in (0, 1/2), got {lam}")
    if pi.n != n or sigma.n != n:
        raise ValueError("permutation sizes disagree with n")
    d = kendall_tau(pi, sigma)
    if kind == WITHOUT_REPLACEMENT:
        rate = budget
    elif kind == WITH_REPLACEMENT:
        rate = budget / math.comb(n, 2)
    else:
        raise ValueError(f"unknown sampling kind {kind!r}")
    return kl_per_discordant_pair(rate, lam) * d


@dataclass(frozen=True)
class RateCurve:
    """A reference curve value for error-vs-parameter overlays.

    All curves are capped at n(n-1)/2, the Kendall tau diameter: no estimator
    can do worse, so the cap is where rates go trivial.
    """

    kind: str
    n: int
    budget: float
    lam: float

    def __post_init__(self) -> None:
        if self.kind not in RATE_KINDS:
            raise ValueError(f"unknown rate kind {self.kind!r}; know {RATE_KINDS}")

    def value(self) -> float:
        return rate_curve(self.kind, self.n, self.budget, self.lam)


def rate_curve(kind: str, n: int, budget: float, lam: float) -> float:
    """Evaluate a reference rate curve (see RATE_KINDS), capped at n(n-1)/2."""
    cap = n * (n - 1) / 2
    if budget <= 0:
        return cap
    if not 0 < lam < 0.5:
        raise ValueError(f"lam must lie in (0, 1/2), got {lam}")
    if kind == "minimax_o1":
        raw = n / (budget * lam ** 2)
    elif kind == "minimax_o2":
        raw = n ** 3 / (budget * lam ** 2)
    elif kind == "ms_upper":
        if n < 3:
            raise ValueError("ms_upper needs n >= 3")
        raw = (n ** 3 / budget) * math.log(n) * math.log(math.log(n))
    elif kind in ("lower_o1", "lower_o2"):
        scale = n / budget if kind == "lower_o1" else n ** 3 / budget
        raw = min(scale / lam ** 2, scale / math.log(1 / (1 - 2 * lam)))
    else:
        raise ValueError(f"unknown rate kind {kind!r}; know {RATE_KINDS}")
    return min(raw, cap)
