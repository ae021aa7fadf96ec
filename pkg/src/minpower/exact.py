"""Finite-dimensional precoders for the SINR-constrained power minimization.

Every scheme here shares one structure: unit-free directions
``A = (H diag(w) H^H + N*ridge*I)^{-1} H`` followed by the power allocation
that meets all SINR targets with equality. The optimal precoder (OLP) takes
``w`` from the fixed point of the Lagrange multiplier equations and
``ridge = 1``; the heuristic family fixes ``w = alpha`` and ``ridge = rho``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg as sla

from .model import ChannelRealization

__all__ = [
    "PrecoderError",
    "InfeasibleError",
    "ConvergenceError",
    "SolverOptions",
    "PrecoderSolution",
    "solve_lambda",
    "directions",
    "power_allocation",
    "evaluate",
    "olp",
    "heuristic",
    "zf",
]


class PrecoderError(Exception):
    """Base class for numerical failures while building a precoder."""


class InfeasibleError(PrecoderError):
    """The SINR targets cannot be met with the given directions."""


class ConvergenceError(PrecoderError):
    def __init__(self, msg, last=None, residual=None):
        super().__init__(msg)
        self.last = last
        self.residual = residual


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10
    max_iter: int = 5000
    # None -> gamma_k / N
    lambda_init: Optional[float] = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.lambda_init is not None and not self.lambda_init > 0:
            raise ValueError("lambda_init must be positive")


@dataclass
class PrecoderSolution:
    V: np.ndarray
    p: np.ndarray
    sinr: np.ndarray
    total_power: float
    directions: np.ndarray
    lam: Optional[np.ndarray] = None
    iterations: int = 0
    converged: bool = True


def _matrix(H) -> np.ndarray:
    return H.H if isinstance(H, ChannelRealization) else np.asarray(H)


def _targets(H, gamma) -> np.ndarray:
    if gamma is None:
        if not isinstance(H, ChannelRealization):
            raise ValueError("gamma is required when H is a plain matrix")
        return H.gamma
    return np.broadcast_to(np.asarray(gamma, dtype=float), (_matrix(H).shape[1],))


def _factor(H: np.ndarray, weights: np.ndarray, ridge: float):
    N = H.shape[0]
    G = (H * weights) @ H.conj().T
    G[np.diag_indices(N)] += N * ridge
    try:
        return sla.cho_factor(G, lower=True, check_finite=False)
    except sla.LinAlgError as exc:
        raise PrecoderError(
            "regularized Gram matrix is not positive definite"
        ) from exc


def solve_lambda(H, gamma=None, opts: SolverOptions = SolverOptions(), history=None):
    """Lagrange multipliers of the optimal precoder.

    Iterates

    .. math::

        \\lambda_k \\leftarrow \\frac{\\gamma_k}{1+\\gamma_k}
        \\left[h_k^H \\Big(\\sum_i \\lambda_i h_i h_i^H + N I\\Big)^{-1} h_k\\right]^{-1}

    until the relative sup-norm change drops below ``opts.tol``. One Cholesky
    factorization per iteration serves all K right-hand sides.

    Parameters
    ----------
    H : ChannelRealization or ndarray
    gamma : array_like, optional
        Strictly positive SINR targets; taken from the realization if omitted.
    opts : SolverOptions
    history : list, optional
        If given, every iterate is appended to it.

    Returns
    -------
    lam : ndarray
    iterations : int

    Raises
    ------
    ConvergenceError
        If ``opts.max_iter`` iterations pass without meeting the tolerance.
    """
    Hm = _matrix(H)
    gamma = _targets(H, gamma)
    N, K = Hm.shape
    if K > N:
        raise ValueError("need K <= N")
    if np.any(gamma <= 0):
        raise ValueError("SINR targets must be strictly positive")
    ratio = gamma / (1.0 + gamma)
    if opts.lambda_init is None:
        lam = gamma / N
    else:
        lam = np.full(K, float(opts.lambda_init))
    if history is not None:
        history.append(lam.copy())
    resid = np.inf
    for it in range(1, opts.max_iter + 1):
        c = _factor(Hm, lam, 1.0)
        X = sla.cho_solve(c, Hm, check_finite=False)
        q = np.einsum("nk,nk->k", Hm.conj(), X).real
        new = ratio / q
        resid = np.max(np.abs(new - lam) / new)
        lam = new
        if history is not None:
            history.append(lam.copy())
        if resid <= opts.tol:
            return lam, it
    raise ConvergenceError(
        f"multiplier iteration did not converge in {opts.max_iter} iterations "
        f"(residual {resid:.3e})",
        last=lam,
        residual=resid,
    )


def directions(H, weights, ridge: float = 1.0) -> np.ndarray:
    """Columns ``(sum_i w_i h_i h_i^H + N*ridge*I)^{-1} h_k`` via a Cholesky solve."""
    Hm = _matrix(H)
    weights = np.broadcast_to(np.asarray(weights, dtype=float), (Hm.shape[1],))
    if np.any(weights < 0) or ridge < 0:
        raise ValueError("weights and ridge must be nonnegative")
    return sla.cho_solve(_factor(Hm, weights, ridge), Hm, check_finite=False)


def power_allocation(H, dirs: np.ndarray, gamma, sigma2: float) -> np.ndarray:
    """Powers that put every SINR exactly on its target for fixed directions.

    Solves ``D p = sigma2 * 1`` where ``D[k,k] = |h_k^H a_k|^2 / gamma_k`` and
    ``D[k,i] = -|h_k^H a_i|^2``. Rows are scaled by ``gamma_k`` before the
    solve so that zero targets yield zero power.

    Raises
    ------
    InfeasibleError
        If the system is singular or any resulting power is not positive.
    """
    Hm = _matrix(H)
    gamma = _targets(H, gamma)
    G = np.abs(Hm.conj().T @ dirs) ** 2
    M = -gamma[:, None] * G
    M[np.diag_indices_from(M)] = np.diag(G)
    try:
        p = np.linalg.solve(M, gamma * sigma2)
    except np.linalg.LinAlgError as exc:
        raise InfeasibleError(
            "power allocation system is singular (duplicate or degenerate channels?)"
        ) from exc
    active = gamma > 0
    if not np.all(np.isfinite(p)) or np.any(p[active] <= 0) or np.any(p < 0):
        raise InfeasibleError(
            "SINR targets unreachable with these directions "
            f"(min power {np.min(p):.3e})"
        )
    return p


def evaluate(H, V: np.ndarray, sigma2: float):
    """Per-user SINRs and total transmit power ``tr(V V^H)`` of a precoder."""
    Hm = _matrix(H)
    S = np.abs(Hm.conj().T @ V) ** 2
    signal = np.diag(S).copy()
    interference = S.sum(axis=1) - signal
    sinr = signal / (interference + sigma2)
    return sinr, float(np.sum(np.abs(V) ** 2))


def _build(H, A, gamma, sigma2, **extra) -> PrecoderSolution:
    p = power_allocation(H, A, gamma, sigma2)
    V = A * np.sqrt(p)
    sinr, P = evaluate(H, V, sigma2)
    return PrecoderSolution(V=V, p=p, sinr=sinr, total_power=P, directions=A, **extra)


def olp(H, gamma=None, sigma2: float = 1.0, opts: SolverOptions = SolverOptions()):
    """Optimal linear precoder: minimum total power meeting every SINR target."""
    gamma = _targets(H, gamma)
    lam, it = solve_lambda(H, gamma, opts)
    return _build(H, directions(H, lam, 1.0), gamma, sigma2, lam=lam, iterations=it)


def heuristic(H, alpha, rho: float, gamma=None, sigma2: float = 1.0):
    """Precoder with fixed weights ``alpha`` and regularization ``rho``.

    ``alpha = 1`` is RZF; ``alpha_k = 1/l_k`` is the position-aware variant
    (RZF on the whitened channels).
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    gamma = _targets(H, gamma)
    return _build(H, directions(H, alpha, rho), gamma, sigma2)


def zf(H, gamma=None, sigma2: float = 1.0) -> PrecoderSolution:
    """Zero-forcing baseline with directions ``H (H^H H)^{-1}``."""
    Hm = _matrix(H)
    gamma = _targets(H, gamma)
    K = Hm.shape[1]
    if K > Hm.shape[0] or np.linalg.matrix_rank(Hm) < K:
        raise InfeasibleError("zero-forcing needs a full column rank channel")
    gram = Hm.conj().T @ Hm
    try:
        c = sla.cho_factor(gram, lower=True, check_finite=False)
    except sla.LinAlgError as exc:
        raise InfeasibleError("channel Gram matrix is singular") from exc
    A = sla.cho_solve(c, Hm.conj().T, check_finite=False).conj().T
    # h_k^H a_i = delta_ki, so each user just needs gamma_k * sigma2 received power
    p = gamma * sigma2
    V = A * np.sqrt(p)
    sinr, P = evaluate(Hm, V, sigma2)
    return PrecoderSolution(V=V, p=p, sinr=sinr, total_power=P, directions=A)
