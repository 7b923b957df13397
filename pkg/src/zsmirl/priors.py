"""Gaussian reward priors for the soccer game: three means, two covariances.

Covariance handles expose multiply/solve against the regularized matrix
S = alpha*I + sigma^2*C without ever materializing it. The weak covariance
uses the identity correlation; the strong covariance groups reward entries
into disjoint perfectly-correlated blocks (shot entries tied across states
sharing the shooter's square; all non-shot entries tied within each state),
so C is a union of all-ones blocks and solves reduce to a Sherman-Morrison
update per block.
"""

from dataclasses import dataclass

import numpy as np

from .soccer import A_SHOOT, N_ACTIONS, SoccerConfig, state_tables


@dataclass(frozen=True)
class DiagonalCovariance:
    """alpha*I + sigma^2*I: multiply and solve are scalar operations."""

    dim: int
    alpha: float
    sigma: float = 1.0

    @property
    def scale(self) -> float:
        return self.alpha + self.sigma ** 2

    def multiply(self, v: np.ndarray) -> np.ndarray:
        return self.scale * np.asarray(v, dtype=float)

    def solve(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v, dtype=float) / self.scale


@dataclass(frozen=True)
class BlockCovariance:
    """alpha*I + sigma^2*C with C a union of disjoint all-ones blocks.

    group_index maps every coordinate to its block. Multiplication broadcasts
    block sums; solve applies the closed-form inverse of alpha*I + sigma^2*11'
    per block.
    """

    group_index: np.ndarray
    alpha: float
    sigma: float = 1.0

    def __post_init__(self):
        gi = np.ascontiguousarray(self.group_index, dtype=np.int64)
        if gi.ndim != 1 or gi.min() < 0:
            raise ValueError("group_index must be a flat nonnegative array")
        sizes = np.bincount(gi)
        if (sizes == 0).any():
            raise ValueError("group ids must be contiguous (empty group found)")
        gi.setflags(write=False)
        sizes.setflags(write=False)
        object.__setattr__(self, "group_index", gi)
        object.__setattr__(self, "_sizes", sizes)

    @property
    def dim(self) -> int:
        return self.group_index.shape[0]

    @property
    def n_groups(self) -> int:
        return self._sizes.shape[0]

    def _group_sums(self, v: np.ndarray) -> np.ndarray:
        return np.bincount(self.group_index, weights=v, minlength=self.n_groups)

    def multiply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return self.alpha * v + self.sigma ** 2 * self._group_sums(v)[self.group_index]

    def solve(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        sums = self._group_sums(v)
        correction = self.sigma ** 2 * sums / (self.alpha * (self.alpha + self.sigma ** 2 * self._sizes))
        return v / self.alpha - correction[self.group_index]


@dataclass(frozen=True)
class GaussianPrior:
    """Mean vector plus a covariance handle with multiply/solve capabilities."""

    mean: np.ndarray
    covariance: object

    def __post_init__(self):
        mean = np.ascontiguousarray(self.mean, dtype=float)
        if mean.shape != (self.covariance.dim,):
            raise ValueError(f"mean length {mean.shape} does not match covariance "
                             f"dim {self.covariance.dim}")
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)


def _action_cube(config: SoccerConfig):
    """Broadcast helpers: (a1, a2, s) index grids for the flat reward layout."""
    n = config.n_states
    a1 = np.arange(N_ACTIONS)[:, None, None]
    a2 = np.arange(N_ACTIONS)[None, :, None]
    s = np.arange(n)[None, None, :]
    return a1, a2, s


def weak_mean(config: SoccerConfig) -> np.ndarray:
    """Possession bonus only: +0.8 when A holds the ball, -0.8 when B does."""
    _, _, bit = state_tables(config)
    a1, a2, s = _action_cube(config)
    cube = np.where(bit[s] == 0, 0.8, -0.8) + 0.0 * (a1 + a2)
    return cube.reshape(-1)


def _column_of(square: np.ndarray, cols: int) -> np.ndarray:
    return (square - 1) % cols + 1


def _positional_mean(config: SoccerConfig, region_a: np.ndarray,
                     region_b: np.ndarray) -> np.ndarray:
    """Shared shape of the median and strong means.

    +1 when A holds the ball inside region_a, -1 when B holds inside region_b;
    otherwise +/-0.5 for the holder taking a shot; otherwise 0. The position
    rule wins when both apply.
    """
    pos_a, pos_b, bit = state_tables(config)
    a1, a2, s = _action_cube(config)
    a_holds = bit[s] == 0
    b_holds = ~a_holds
    plus = a_holds & region_a[s]
    minus = b_holds & region_b[s]
    shot_a = a_holds & (a1 == A_SHOOT)
    shot_b = b_holds & (a2 == A_SHOOT)
    cube = np.zeros((N_ACTIONS, N_ACTIONS, config.n_states))
    cube = np.where(shot_b, -0.5, cube)
    cube = np.where(shot_a, 0.5, cube)
    cube = np.where(minus, -1.0, cube)
    cube = np.where(plus, 1.0, cube)
    return cube.reshape(-1)


def median_mean(config: SoccerConfig) -> np.ndarray:
    """Goal guess on whole edge columns plus a +/-0.5 bonus for shooting."""
    pos_a, pos_b, _ = state_tables(config)
    region_a = _column_of(pos_a, config.cols) == 1
    region_b = _column_of(pos_b, config.cols) == config.cols
    return _positional_mean(config, region_a, region_b)


def strong_mean(config: SoccerConfig) -> np.ndarray:
    """As median_mean but the +/-1 regions shrink to the true goal squares."""
    pos_a, pos_b, _ = state_tables(config)
    region_a = np.isin(pos_a, config.goals_a)
    region_b = np.isin(pos_b, config.goals_b)
    return _positional_mean(config, region_a, region_b)


def weak_covariance(dim: int, alpha: float) -> DiagonalCovariance:
    """Identity correlation: rewards independently distributed."""
    if dim <= 0:
        raise ValueError("dim must be positive")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return DiagonalCovariance(dim=dim, alpha=alpha)


def strong_covariance(config: SoccerConfig, alpha: float,
                      sigma: float = 1.0) -> BlockCovariance:
    """Correlation groups for the soccer reward structure.

    (i) the holder's shot entries are tied across all states sharing the
    holder's square (the shot only depends on where the shooter stands);
    (ii) all entries where the holder does not shoot are tied within each
    state (a state-dependent constant). Groups partition all coordinates.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    pos_a, pos_b, bit = state_tables(config)
    S = config.n_squares
    n_states = config.n_states

    a1, a2, s = _action_cube(config)
    a_holds = bit[s] == 0
    holder_shoots = np.where(a_holds, a1 == A_SHOOT, a2 == A_SHOOT)
    holder_square = np.where(a_holds, pos_a[s], pos_b[s])

    # group ids: shot groups come first (2*S of them: per possession and
    # square), then one group per state
    shot_group = bit[s] * S + (holder_square - 1)
    state_group = 2 * S + s + 0 * (a1 + a2)
    cube = np.where(holder_shoots, shot_group, state_group)
    group_index = cube.reshape(-1)
    # compact unused ids (squares never held, e.g. when boards shrink)
    _, group_index = np.unique(group_index, return_inverse=True)
    return BlockCovariance(group_index=group_index, alpha=alpha, sigma=sigma)


def make_prior(config: SoccerConfig, mean_kind: str, cov_kind: str,
               alpha: float, sigma: float = 1.0) -> GaussianPrior:
    """Assemble one of the named prior configurations."""
    means = {"weak": weak_mean, "median": median_mean, "strong": strong_mean}
    if mean_kind not in means:
        raise ValueError(f"unknown mean kind {mean_kind!r}")
    mean = means[mean_kind](config)
    if cov_kind == "weak":
        cov = weak_covariance(mean.shape[0], alpha)
    elif cov_kind == "strong":
        cov = strong_covariance(config, alpha, sigma=sigma)
    else:
        raise ValueError(f"unknown covariance kind {cov_kind!r}")
    return GaussianPrior(mean=mean, covariance=cov)
