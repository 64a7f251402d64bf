"""Closed-form privacy values and bounds as functions of utility alpha."""

from __future__ import annotations

import math

from ..errors import ContractViolation


def _alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise ContractViolation(f"alpha must lie in [0, 1], got {alpha}")


def _nodes(n: int) -> None:
    if n < 2:
        raise ContractViolation(f"need n >= 2, got {n}")


def diagonal_bound(utility: float) -> float:
    """Upper bound on privacy under shortest-path routing."""
    _alpha(utility)
    return 1.0 - utility


def aon_privacy(n: int, alpha: float) -> float:
    _nodes(n)
    _alpha(alpha)
    return (1.0 - 2.0 / n) * (1.0 - alpha)


def usm_privacy(n_servers: int, n_users: int, mu: int, alpha: float) -> float:
    """All-or-nothing noise on server channels, single-homed hidden users."""
    _nodes(n_servers + n_users)
    _alpha(alpha)
    if mu < 1:
        raise ContractViolation("mu must be at least 1")
    return (1.0 - 2.0 / (n_servers + n_users)) * (1.0 - alpha) + alpha * mu / (mu + 1.0)


def usm_multi_privacy_lb(n_servers: int, n_users: int, mu: int, alpha: float) -> float:
    """Lower bound when users may attach to several servers."""
    _nodes(n_servers + n_users)
    _alpha(alpha)
    if mu < 1:
        raise ContractViolation("mu must be at least 1")
    return (1.0 - 2.0 / (n_servers + n_users)) * (1.0 - alpha) + alpha * mu / (mu + 2.0)


def alternating_privacy(n: int, L: int, alpha: float) -> float:
    """Alternating noise over all simple paths of length L on K_n."""
    _nodes(n)
    _alpha(alpha)
    if L < 2:
        raise ContractViolation("alternating noise needs L >= 2")
    if L >= n:
        raise ContractViolation("a simple path of length L needs n >= L + 1")
    if L % 2 == 0:
        m = min(L, n - L)
        if alpha <= 0.5:
            return 1.0 - 2.0 / n - (2.0 / m - 4.0 / n) * alpha
        return (2.0 - 2.0 / m) * (1.0 - alpha)
    g = 2.0 / (L + 1) + 2.0 / (n - L + 1)
    if alpha <= 0.5:
        return 1.0 - 2.0 / n - (g - 4.0 / n) * alpha
    return (2.0 - g) * (1.0 - alpha)


def _check_iid(n: int, L: int, alpha: float) -> int:
    _nodes(n)
    _alpha(alpha)
    if L < 1:
        raise ContractViolation("need L >= 1")
    lam = L + 1
    if lam > n:
        raise ContractViolation("a simple path of length L needs n >= L + 1")
    return lam


def iid_privacy_lower_bound(n: int, L: int, alpha: float) -> float:
    """Replaces the colour-choice factor by its maximum 2.

    Written as the finite sum (2/lam) sum_t C(lam,t) a^(lam-t) (1-a)^(t-1), which
    equals the closed form with a (1 - a) denominator but stays finite at a = 1.
    """
    lam = _check_iid(n, L, alpha)
    s = math.fsum(math.comb(lam, t) * alpha ** (lam - t) * (1.0 - alpha) ** (t - 1)
                  for t in range(1, lam))
    return 1.0 - 2.0 * (1.0 - alpha) ** L / n - 2.0 / lam * s


def iid_privacy_exact(n: int, L: int, alpha: float) -> float:
    """Exact privacy of i.i.d. noise over all simple L-paths on K_n, O(L^2) terms."""
    lam = _check_iid(n, L, alpha)
    outside = n - lam

    def psi(k: int) -> float:
        return 1.0 if k <= outside else 2.0 * k / (outside + k)

    total = []
    for t in range(1, lam):
        inner = math.fsum(math.comb(t, t - h) * math.comb(lam - t - 1, h - 1) * psi(t - h)
                          for h in range(1, min(t, lam - t) + 1))
        total.append(alpha ** (lam - t) * (1.0 - alpha) ** (t - 1) / t * inner)
    return 1.0 - 2.0 * (1.0 - alpha) ** L / n - math.fsum(total)
