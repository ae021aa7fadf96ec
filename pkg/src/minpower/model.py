"""Cell geometry, large-scale fading and Rayleigh channel generation.

All randomness is drawn from an explicit :class:`numpy.random.Generator`;
nothing in this module touches global state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SystemConfig",
    "UserState",
    "ChannelRealization",
    "dbm_to_watt",
    "pathloss",
    "sample_positions",
    "make_users",
    "draw_channel",
    "trial_rng",
]


def dbm_to_watt(p_dbm: float) -> float:
    """Convert a power level in dBm to Watts."""
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Static parameters of the single-cell downlink.

    Defaults reproduce the reference scenario: K = 8 users served by N = 10
    antennas in a 250 m cell with a 15 m exclusion radius, path-loss
    ``10**-3.53 / d**3.76`` and -104 dBm total noise over 10 MHz.
    """

    N: int = 10
    K: int = 8
    sigma2: float = field(default_factory=lambda: dbm_to_watt(-104.0))
    cell_radius: float = 250.0
    min_distance: float = 15.0
    pathloss_exponent: float = 3.76
    pathloss_const: float = 10.0 ** -3.53
    bandwidth: float = 10e6

    def __post_init__(self):
        if int(self.N) != self.N or int(self.K) != self.K:
            raise ValueError("N and K must be integers")
        if not 0 < self.K <= self.N:
            raise ValueError(f"need 0 < K <= N, got K={self.K}, N={self.N}")
        if not 0 < self.min_distance < self.cell_radius:
            raise ValueError("need 0 < min_distance < cell_radius")
        if self.pathloss_exponent < 2:
            raise ValueError("pathloss_exponent must be >= 2")
        if self.pathloss_const <= 0:
            raise ValueError("pathloss_const must be positive")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")

    @property
    def load(self) -> float:
        return self.K / self.N


@dataclass(frozen=True)
class UserState:
    position: np.ndarray
    attenuation: float
    rate_target: float
    sinr_target: float

    @classmethod
    def from_rate(cls, position, rate: float, cfg: SystemConfig) -> "UserState":
        position = np.asarray(position, dtype=float)
        return cls(position, pathloss(position, cfg), float(rate), 2.0**rate - 1.0)


@dataclass(frozen=True)
class ChannelRealization:
    """Channel matrix ``H`` (N x K, column k is user k) and the users it serves."""

    H: np.ndarray
    users: tuple[UserState, ...]

    @property
    def N(self) -> int:
        return self.H.shape[0]

    @property
    def K(self) -> int:
        return self.H.shape[1]

    @property
    def attenuation(self) -> np.ndarray:
        return np.array([u.attenuation for u in self.users])

    @property
    def gamma(self) -> np.ndarray:
        return np.array([u.sinr_target for u in self.users])

    @property
    def rates(self) -> np.ndarray:
        return np.array([u.rate_target for u in self.users])

    def whitened(self) -> np.ndarray:
        """Small-scale fading part ``W`` with ``H = W diag(sqrt(l))``."""
        return self.H / np.sqrt(self.attenuation)


def pathloss(x, cfg: SystemConfig) -> float:
    """Average attenuation ``d0 / ||x||**kappa`` at position ``x``.

    Raises
    ------
    ValueError
        If ``x`` lies inside the exclusion radius, where the model is undefined.
    """
    d = float(np.linalg.norm(x))
    # small slack for points sampled exactly on the boundary
    if d < cfg.min_distance * (1 - 1e-12):
        raise ValueError(
            f"distance {d:.6g} m is below the minimum distance {cfg.min_distance} m"
        )
    return cfg.pathloss_const / d**cfg.pathloss_exponent


def sample_positions(rng: np.random.Generator, K: int, cfg: SystemConfig) -> np.ndarray:
    """Draw ``K`` positions uniformly (in area) over the annulus
    ``min_distance <= ||x|| <= cell_radius``. Returns a ``(K, 2)`` array."""
    u = rng.random(K)
    phi = rng.random(K) * 2 * np.pi
    r2_lo, r2_hi = cfg.min_distance**2, cfg.cell_radius**2
    r = np.sqrt(r2_lo + u * (r2_hi - r2_lo))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def make_users(positions, rates, cfg: SystemConfig) -> tuple[UserState, ...]:
    rates = np.broadcast_to(np.asarray(rates, dtype=float), (len(positions),))
    return tuple(UserState.from_rate(x, r, cfg) for x, r in zip(positions, rates))


def draw_channel(
    rng: np.random.Generator, users, N: int
) -> ChannelRealization:
    """Rayleigh channel ``h_k = sqrt(l_k) w_k`` with ``w_k ~ CN(0, I_N)``.

    Real and imaginary parts of every entry of ``w_k`` are independent with
    variance 1/2.
    """
    users = tuple(users)
    if not users:
        raise ValueError("at least one user is required")
    K = len(users)
    W = (rng.standard_normal((N, K)) + 1j * rng.standard_normal((N, K))) / np.sqrt(2)
    scale = np.sqrt([u.attenuation for u in users])
    return ChannelRealization(W * scale, users)


def trial_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for ``(seed, *key)``.

    Streams depend only on the key, never on the order in which they are
    requested, so trials may run on any number of workers.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
