"""Large-system (deterministic equivalent) quantities.

Everything here depends only on the SINR targets ``gamma_k``, the
attenuations ``l_k`` and the dimensions; no channel realization is needed.
Throughout, ``a_k = alpha_k * l_k`` denotes the effective weight of user k.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import optimize

from .exact import ConvergenceError, InfeasibleError
from .model import UserState

__all__ = [
    "OptimalEquivalents",
    "HeuristicEquivalents",
    "synthetic_users",
    "optimal_equivalents",
    "solve_mu",
    "mu_prime",
    "power_deteq",
    "heuristic_deteq",
    "solve_mu_star",
    "optimal_rho",
    "optimal_deteq",
    "rzf_rho_star",
    "parzf_rho_star",
    "parzf_power_bar",
]

MU_TOL = 1e-12
MU_MAX_ITER = 10_000


def synthetic_users(gamma, attenuation) -> tuple[UserState, ...]:
    """Users with given targets and attenuations but no geometric position."""
    gamma = np.asarray(gamma, dtype=float)
    att = np.broadcast_to(np.asarray(attenuation, dtype=float), gamma.shape)
    nan = np.full(2, np.nan)
    return tuple(
        UserState(nan, float(l), float(np.log2(1 + g)), float(g)) for g, l in zip(gamma, att)
    )


def _gl(users: Sequence[UserState]):
    gamma = np.array([u.sinr_target for u in users], dtype=float)
    l = np.array([u.attenuation for u in users], dtype=float)
    return gamma, l


def _weights(alpha, l) -> np.ndarray:
    return np.broadcast_to(np.asarray(alpha, dtype=float), l.shape) * l


@dataclass(frozen=True)
class OptimalEquivalents:
    xi: float
    A: float
    lambda_bar: np.ndarray
    p_bar: np.ndarray
    P_bar: float


def optimal_equivalents(users, sigma2: float, N: int) -> OptimalEquivalents:
    """Closed-form limits of the optimal multipliers, powers and total power.

    With ``xi = 1 - (1/N) sum gamma_i/(1+gamma_i)`` and
    ``A = mean(gamma_i / l_i)``::

        lambda_bar_k = gamma_k / (l_k xi)
        P_bar        = c A sigma2 / xi
        p_bar_k      = gamma_k / (l_k xi^2) * (P_bar + sigma2/l_k * (1+gamma_k)^2)
    """
    gamma, l = _gl(users)
    K = len(gamma)
    if np.any(gamma < 0) or np.any(l <= 0):
        raise ValueError("need gamma >= 0 and l > 0")
    if K > N:
        raise ValueError("need K <= N")
    c = K / N
    xi = 1.0 - np.sum(gamma / (1.0 + gamma)) / N
    assert xi > 0, "xi must be positive for K <= N"
    A = float(np.mean(gamma / l))
    lam = gamma / (l * xi)
    P = c * A * sigma2 / xi
    p = gamma / (l * xi**2) * (P + sigma2 / l * (1.0 + gamma) ** 2)
    return OptimalEquivalents(float(xi), A, lam, p, float(P))


def _F(a, mu, N):
    return np.sum(a / (1.0 + a * mu)) / N


def _F2(a, mu, N):
    return np.sum((a / (1.0 + a * mu)) ** 2) / N


def solve_mu(alpha, users, rho: float, N: int, tol: float = MU_TOL,
             max_iter: int = MU_MAX_ITER) -> float:
    """Solve ``mu = 1 / ((1/N) sum a_i/(1 + a_i mu) + rho)``.

    The map is increasing in ``mu`` and the start ``1/rho`` lies above the
    root, so the iterates decrease monotonically. The stopping rule accounts
    for the local contraction factor ``mu^2 F2`` so the returned value is
    within ``tol`` of the root in relative terms, not merely stalled.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    _, l = _gl(users)
    a = _weights(alpha, l)
    if np.any(a < 0):
        raise ValueError("alpha_k * l_k must be nonnegative")
    mu = 1.0 / rho
    for _ in range(max_iter):
        new = 1.0 / (_F(a, mu, N) + rho)
        q = new**2 * _F2(a, new, N)
        step = abs(new - mu)
        mu = new
        if step <= tol * mu * max(1.0 - q, 1e-300):
            return float(mu)
    raise ConvergenceError(f"mu iteration did not converge (rho={rho:g})", last=mu)


def mu_prime(mu: float, F2: float) -> float:
    """Derivative of ``mu`` with respect to ``rho``: ``-mu^2 / (1 - mu^2 F2)``.

    ``mu`` decreases as the regularization grows, so the value is negative.
    """
    d = 1.0 - mu**2 * F2
    if d <= 0:
        raise InfeasibleError(f"degenerate load: mu^2 F2 = {mu**2 * F2:.6g} >= 1")
    return -(mu**2) / d


@dataclass(frozen=True)
class HeuristicEquivalents:
    mu: float
    mu_prime: float
    F2: float
    A: float
    B: float
    beta: float
    P_bar: float
    p_bar: np.ndarray
    sinr_bar: np.ndarray
    rho: float
    denominator: float
    mu_star: Optional[float] = None
    rho_star: Optional[float] = None


def power_deteq(alpha, users, rho: float, p, N: int, sigma2: float):
    """Large-system total power and SINRs of the heuristic precoder with
    arbitrary powers ``p``.

    Returns
    -------
    P_bar : float
        ``-(c mu'/K) sum_i p_i l_i / (1 + a_i mu)^2``.
    sinr_bar : ndarray
        ``p_k l_k mu^2 / (P_bar + sigma2/l_k (1 + a_k mu)^2)``.
    """
    gamma, l = _gl(users)
    a = _weights(alpha, l)
    K = len(l)
    p = np.asarray(p, dtype=float)
    mu = solve_mu(alpha, users, rho, N)
    dmu = mu_prime(mu, _F2(a, mu, N))
    P = -(K / N) * dmu * np.mean(p * l / (1.0 + a * mu) ** 2)
    sinr = p * l * mu**2 / (P + sigma2 / l * (1.0 + a * mu) ** 2)
    return float(P), sinr


def _deteq_at(a, gamma, l, mu, N, sigma2):
    K = len(l)
    c = K / N
    F2 = _F2(a, mu, N)
    B = float(np.mean(gamma / (1.0 + a * mu) ** 2))
    A = float(np.mean(gamma / l))
    den = 1.0 - mu**2 * F2 - c * B
    if den <= 0:
        raise InfeasibleError(
            f"targets exceed the large-system capacity (denominator {den:.3e})"
        )
    P = c * A * sigma2 / den
    p = gamma * (P + sigma2 / l * (1.0 + a * mu) ** 2) / (l * mu**2)
    return F2, A, B, float(P), p, den


def heuristic_deteq(alpha, users, rho: float, sigma2: float, N: int) -> HeuristicEquivalents:
    """Deterministic equivalents of the heuristic precoder at regularization
    ``rho`` with powers chosen so the limiting SINRs equal the targets.

    ``P_bar = c A sigma2 / (1 - mu^2 F2 - c B)`` and
    ``p_bar_k = gamma_k (P_bar + sigma2/l_k (1 + a_k mu)^2) / (l_k mu^2)``.
    ``sinr_bar`` is recomputed from ``p_bar`` through :func:`power_deteq`,
    so it reproduces ``gamma`` only if the two formulas are consistent.

    Raises
    ------
    InfeasibleError
        If ``1 - mu^2 F2 - c B <= 0``.
    """
    gamma, l = _gl(users)
    a = _weights(alpha, l)
    mu = solve_mu(alpha, users, rho, N)
    F2, A, B, P, p, den = _deteq_at(a, gamma, l, mu, N, sigma2)
    _, sinr = power_deteq(alpha, users, rho, p, N, sigma2)
    return HeuristicEquivalents(
        mu=mu,
        mu_prime=mu_prime(mu, F2),
        F2=F2,
        A=A,
        B=B,
        beta=float(np.mean(gamma)),
        P_bar=P,
        p_bar=p,
        sinr_bar=sinr,
        rho=float(rho),
        denominator=den,
    )


def _star_map(a, gamma, mu):
    w = 1.0 / (1.0 + a * mu) ** 3
    return np.sum(a * gamma * w) / np.sum(a**2 * w)


def _iterate_star(a, gamma, mu, tol, max_iter):
    damping = 1.0
    prev_step = np.inf
    for _ in range(max_iter):
        target = _star_map(a, gamma, mu)
        step = target - mu
        # halve the step whenever the iteration overshoots without shrinking
        if np.sign(step) != np.sign(prev_step) and abs(step) >= abs(prev_step):
            damping *= 0.5
        new = mu + damping * step
        if abs(new - mu) <= tol * abs(new):
            return new
        prev_step = step
        mu = new
    return None


def _bracket_star(a, gamma):
    # mu A(mu) - B(mu) is <= 0 at min(gamma/a) and >= 0 at max(gamma/a)
    ratio = gamma / a
    lo, hi = np.min(ratio), np.max(ratio)
    if lo == hi:
        return float(lo)
    g = lambda m: np.sum(a * (a * m - gamma) / (1.0 + a * m) ** 3)
    return optimize.brentq(g, lo, hi, xtol=0.0, rtol=4 * np.finfo(float).eps)


def solve_mu_star(alpha, users, tol: float = MU_TOL, max_iter: int = MU_MAX_ITER) -> float:
    """Power-minimizing value of ``mu``: the root of ``mu = B(mu) / A(mu)`` with

    ``A(mu) = mean(a_i^2 / (1 + a_i mu)^3)`` and
    ``B(mu) = mean(a_i gamma_i / (1 + a_i mu)^3)``.

    Plain iteration from ``mean(gamma)``, with step halving on oscillation.
    The solve is repeated from 0.1x and 10x that start; disagreement means
    the equation has several roots and is reported as an error. A bracketed
    root search is the fallback when the iteration stalls.
    """
    gamma, l = _gl(users)
    a = _weights(alpha, l)
    if np.any(a <= 0):
        raise ValueError("alpha_k * l_k must be positive")
    if not np.any(gamma > 0):
        raise ValueError("at least one SINR target must be positive")
    start = float(np.mean(gamma))
    roots = []
    for s in (start, 0.1 * start, 10.0 * start):
        r = _iterate_star(a, gamma, s, tol, max_iter)
        roots.append(_bracket_star(a, gamma) if r is None else r)
    ref = roots[0]
    for r in roots[1:]:
        if abs(r - ref) > 1e-6 * abs(ref):
            raise ConvergenceError(
                f"optimal mu fixed point is not unique ({ref:.6g} vs {r:.6g})", last=roots
            )
    return float(ref)


class RhoStar(NamedTuple):
    rho_star: float
    mu_star: float


def optimal_rho(alpha, users, N: int) -> RhoStar:
    """Regularization minimizing the large-system total power:
    ``rho* = 1/mu* - (1/N) sum a_i / (1 + a_i mu*)``."""
    gamma, l = _gl(users)
    a = _weights(alpha, l)
    ms = solve_mu_star(alpha, users)
    return RhoStar(float(1.0 / ms - _F(a, ms, N)), ms)


def optimal_deteq(alpha, users, sigma2: float, N: int) -> HeuristicEquivalents:
    """:func:`heuristic_deteq` evaluated at the optimal regularization."""
    rho, ms = optimal_rho(alpha, users, N)
    if not rho > 0:
        raise InfeasibleError(f"optimal regularization is not positive ({rho:.3e})")
    eq = heuristic_deteq(alpha, users, rho, sigma2, N)
    return HeuristicEquivalents(**{**eq.__dict__, "mu_star": ms, "rho_star": rho})


def rzf_rho_star(users, N: int) -> RhoStar:
    return optimal_rho(1.0, users, N)


class PaRzfRho(NamedTuple):
    rho_star: float
    beta: float


def parzf_rho_star(gamma, c: float) -> PaRzfRho:
    """``rho* = 1/beta - c/(1+beta)`` with ``beta`` the mean SINR target."""
    beta = float(np.mean(gamma))
    if not beta > 0:
        raise ValueError("mean SINR target must be positive")
    if not 0 < c <= 1:
        raise ValueError("load must lie in (0, 1]")
    return PaRzfRho(1.0 / beta - c / (1.0 + beta), beta)


def parzf_power_bar(users, sigma2: float, N: int) -> float:
    """``c A sigma2 / (1 - c beta/(1+beta))``."""
    gamma, l = _gl(users)
    c = len(gamma) / N
    beta = float(np.mean(gamma))
    return float(c * np.mean(gamma / l) * sigma2 / (1.0 - c * beta / (1.0 + beta)))
