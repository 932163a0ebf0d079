"""Two-player tug-of-war with noise on the velocity coordinate.

Each round a biased coin decides who moves: with probability alpha/2 player I
picks the next velocity inside the closed step ball, with alpha/2 player II
does, and with probability beta the velocity jumps uniformly inside the open
ball.  The position then drifts by eps^2/2 times the new velocity and the
clock steps eps^2/2 backwards.  The game stops when the velocity enters the
lateral collar or after N rounds, and pays the boundary datum at the final
state.  Expected payoffs estimated here cross-validate the DPP solver.

Episodes draw from counter-based streams keyed by (seed, episode index), so
results are reproducible independently of scheduling, and payoff aggregation
uses exact summation, so thread count cannot change any reported value.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .domains import BoundaryDatum, SpatialDomain
from .operators import coin_weights, is_inf
from .quadrature import shared_ball_points
from .solver import ValueGrid, time_ladder


@dataclass
class GameState:
    k: int
    X: np.ndarray
    Y: np.ndarray
    done: bool = False


@dataclass
class Strategy:
    """Measurable rule mapping (X, Y, round index, clock time) to a target velocity.

    The engine projects returned targets onto the closed ball of radius eps
    around the current velocity, so the step constraint holds exactly.
    """

    chooser: Callable[[np.ndarray, np.ndarray, int, float], np.ndarray]
    descriptor: str = ""

    def __call__(self, X, Y, k, t):
        return np.atleast_1d(np.asarray(self.chooser(X, Y, k, t), dtype=float))


@dataclass
class GameConfig:
    domain: SpatialDomain
    T: float
    p: float
    epsilon: float
    payoff: BoundaryDatum
    seed: int = 0
    episodes: int = 1000
    noise_method: str = "polar"  # or "rejection"
    n_radial: int = 30           # shared ball point set, must match a paired grid

    def __post_init__(self):
        if not (is_inf(self.p) or self.p >= 2):
            raise ValueError(f"game requires p >= 2, got {self.p}")
        if not (self.epsilon > 0 and self.T > 0):
            raise ValueError("epsilon and T must be positive")

    @property
    def alpha_beta(self):
        return coin_weights(self.p, self.domain.m)


def episode_rng(seed: int, episode: int) -> np.random.Generator:
    """Independent per-episode stream from a counter-based generator."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, episode], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _uniform_ball(rng: np.random.Generator, m: int, method: str) -> np.ndarray:
    if method == "polar":
        if m == 1:
            return np.array([2.0 * rng.random() - 1.0])
        v = rng.standard_normal(m)
        n = np.linalg.norm(v)
        while n == 0.0:
            v = rng.standard_normal(m)
            n = np.linalg.norm(v)
        r = rng.random() ** (1.0 / m)
        return r * v / n
    if method == "rejection":
        while True:
            v = 2.0 * rng.random(m) - 1.0
            if np.dot(v, v) < 1.0:
                return v
    raise ValueError(f"unknown noise method {method!r}")


def _project_step(X: np.ndarray, target: np.ndarray, eps: float) -> np.ndarray:
    d = target - X
    n2 = float(d @ d)
    if n2 <= eps * eps:
        return target
    return X + (eps / math.sqrt(n2)) * d


def _terminal_predicate(domain: SpatialDomain):
    """Cheap exact test for sdf(X) >= 0, the stopping condition."""
    from .domains import Ball, Box

    if isinstance(domain, Box):
        if domain.m == 1:
            lo0, hi0 = float(domain.lo[0]), float(domain.hi[0])
            return lambda X: X[0] <= lo0 or X[0] >= hi0
        lo, hi = domain.lo, domain.hi
        return lambda X: bool(np.any(X <= lo) or np.any(X >= hi))
    if isinstance(domain, Ball):
        c, r2 = domain.center, domain.radius**2
        return lambda X: bool(((X - c) @ (X - c)) >= r2)
    return lambda X: bool(domain.signed_distance(X) >= 0)


def _lateral_mask_fn(domain: SpatialDomain):
    """Vectorized sdf(X) >= 0 over sample batches (X flattened to (S,) for m=1)."""
    from .domains import Ball, Box

    if isinstance(domain, Box) and domain.m == 1:
        lo0, hi0 = float(domain.lo[0]), float(domain.hi[0])
        return lambda Xs: (Xs <= lo0) | (Xs >= hi0)
    return lambda Xs: domain.signed_distance(Xs[:, None]) >= 0


def step(config: GameConfig, state: GameState, s_one: Strategy, s_two: Strategy,
         rng: np.random.Generator, t: float, N: int):
    """Advance one round; returns (new state, coin draw, actor in {'I','II','noise'})."""
    if state.done:
        raise ValueError("cannot step a terminal state")
    prep = getattr(config, "_prep", None)
    if prep is None:
        prep = (config.alpha_beta[0], _terminal_predicate(config.domain))
        object.__setattr__(config, "_prep", prep)
    alpha, terminal = prep
    eps = config.epsilon
    u = rng.random()
    if alpha > 0.0 and u < alpha / 2:
        X_new = _project_step(state.X, s_one(state.X, state.Y, state.k, t), eps)
        actor = "I"
    elif alpha > 0.0 and u < alpha:
        X_new = _project_step(state.X, s_two(state.X, state.Y, state.k, t), eps)
        actor = "II"
    else:
        if config.domain.m == 1 and config.noise_method == "polar":
            X_new = state.X + eps * (2.0 * rng.random() - 1.0)
        else:
            X_new = state.X + eps * _uniform_ball(rng, config.domain.m, config.noise_method)
        actor = "noise"
    Y_new = state.Y + (eps**2 / 2) * X_new
    k_new = state.k + 1
    done = terminal(X_new) or k_new >= N
    return GameState(k_new, X_new, Y_new, done), u, actor


@dataclass
class EpisodeResult:
    tau: int
    X: np.ndarray
    Y: np.ndarray
    t: float
    payoff: float
    log: list = field(default_factory=list)  # rows (k, X, Y, t, coin, actor)


def run_episode(config: GameConfig, start, s_one: Strategy, s_two: Strategy,
                rng: np.random.Generator, log_steps: bool = False) -> EpisodeResult:
    """Play one game from start = (X0, Y0, t0) until the collar or N rounds."""
    X0, Y0, t0 = start
    X = np.atleast_1d(np.asarray(X0, float)).copy()
    Y = np.atleast_1d(np.asarray(Y0, float)).copy()
    t0 = float(t0)
    N, _ = time_ladder(t0, config.epsilon)
    state = GameState(0, X, Y, done=bool(config.domain.signed_distance(X) >= 0) or N == 0)
    log = []
    step_back = config.epsilon**2 / 2
    while not state.done:
        t = t0 - state.k * step_back
        state, coin, actor = step(config, state, s_one, s_two, rng, t, N)
        if log_steps:
            log.append((state.k, state.X.copy(), state.Y.copy(), t0 - state.k * step_back, coin, actor))
    tau = state.k
    t_tau = t0 - tau * step_back
    payoff = float(config.payoff(state.X, state.Y, np.asarray(t_tau)))
    return EpisodeResult(tau, state.X, state.Y, t_tau, payoff, log)


def _exact_mean_se(payoffs: np.ndarray):
    n = len(payoffs)
    mean = math.fsum(payoffs) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((x - mean) ** 2 for x in payoffs) / (n - 1)
    return mean, math.sqrt(var / n)


def estimate_value(config: GameConfig, start, s_one: Strategy, s_two: Strategy,
                   episodes: int | None = None, threads: int = 1,
                   collect_tau: bool = False):
    """Sample mean and standard error of the payoff over seeded episodes.

    Each episode uses its own counter-based stream and results land in a
    fixed slot, so the estimate is identical for any thread count; the final
    reduction is exact summation.
    """
    n = episodes if episodes is not None else config.episodes
    if n < 2:
        raise ValueError("need at least 2 episodes")
    payoffs = np.empty(n)
    taus = np.empty(n, dtype=np.int64) if collect_tau else None

    def work(i):
        res = run_episode(config, start, s_one, s_two, episode_rng(config.seed, i))
        payoffs[i] = res.payoff
        if collect_tau:
            taus[i] = res.tau

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(work, range(n)))
    else:
        for i in range(n):
            work(i)
    mean, se = _exact_mean_se(payoffs)
    if collect_tau:
        return mean, se, taus
    return mean, se


# ---------------------------------------------------------------------------
# strategies


def stay_strategy() -> Strategy:
    return Strategy(lambda X, Y, k, t: X, "stay")


def pull_toward(Z, eps: float) -> Strategy:
    """Move distance eps straight toward Z; stay put once within eps of Z.

    Staying avoids overshooting: the decrease |X - Z| - eps is only needed
    while |X - Z| > eps.
    """
    Z = np.atleast_1d(np.asarray(Z, float))

    def chooser(X, Y, k, t):
        d = X - Z
        n = np.linalg.norm(d)
        if n <= eps:
            return X
        return X - (eps / n) * d

    return Strategy(chooser, f"pull_toward({Z.tolist()})")


def greedy_from_grid(grid: ValueGrid, mode: str, delta_snap: float | None = None,
                     start_time: float | None = None) -> Strategy:
    """Scan the shared ball point set for the extremal one-step DPP value.

    The position is snapped to the delta lattice before evaluation (default
    delta is the grid's position spacing), matching the measurable-selection
    construction; ties break toward the first sample.  ``mode`` is "maximize"
    (player I) or "minimize" (player II).  The clock time passed by the engine
    must lie on the grid's ladder.
    """
    if mode not in ("maximize", "minimize"):
        raise ValueError("mode must be 'maximize' or 'minimize'")
    if delta_snap is None:
        delta_snap = grid.h_y
    if not delta_snap > 0:
        raise ValueError("delta_snap must be positive")
    eps = grid.epsilon
    offs = grid.ball_offsets
    maximize = mode == "maximize"

    if grid.m == 1:
        # flat fast path: this chooser runs millions of times per experiment
        from .solver import InterpolationRangeError

        V = grid.values
        xax, yax = grid.x_axes[0], grid.y_axes[0]
        x0, hx, nx = xax.origin, xax.spacing, xax.n
        y0, hy, ny = yax.origin, yax.spacing, yax.n
        t_first = float(grid.t_slices[0])
        half_step = eps * eps / 2
        n_slices = len(grid.t_slices)
        offs1 = eps * offs[:, 0]
        S = len(offs1)
        F = grid.boundary
        lateral_of = _lateral_mask_fn(grid.domain)
        y_tol = 1e-9 * max(ny - 1, 1)
        nx2, ny2 = nx - 2, ny - 2

        def chooser(X, Y, k, t):
            t_src = t - half_step
            y_hat = delta_snap * math.floor(float(Y[0]) / delta_snap)
            Xs = float(X[0]) + offs1
            Yq = y_hat + half_step * Xs
            if t_src <= 0:
                vals = F(Xs[:, None], Yq[:, None], np.full(S, t_src))
            else:
                i = int(round((t_src - t_first) / half_step))
                if i < 0 or i >= n_slices or abs(t_first + i * half_step - t_src) > 1e-9 * max(1.0, abs(t_src)):
                    raise ValueError(f"time {t_src} not on the grid ladder")
                uy = (Yq - y0) / hy
                if uy.min() < -y_tol or uy.max() > ny - 1 + y_tol:
                    raise InterpolationRangeError(1, float(Yq.max()), y0, yax.top)
                ux = (Xs - x0) / hx
                ix = ux.astype(np.int64)
                np.minimum(ix, nx2, out=ix)
                np.maximum(ix, 0, out=ix)
                fx = ux - ix
                iy = uy.astype(np.int64)
                np.minimum(iy, ny2, out=iy)
                np.maximum(iy, 0, out=iy)
                fy = uy - iy
                Vi = V[i]
                lo = Vi[ix, iy]
                lo = lo + fy * (Vi[ix, iy + 1] - lo)
                hi = Vi[ix + 1, iy]
                hi = hi + fy * (Vi[ix + 1, iy + 1] - hi)
                vals = lo + fx * (hi - lo)
                lateral = lateral_of(Xs)
                if lateral.any():
                    vals[lateral] = F(Xs[lateral][:, None], Yq[lateral][:, None],
                                      np.full(int(np.count_nonzero(lateral)), t_src))
            idx = int(np.argmax(vals) if maximize else np.argmin(vals))
            return np.array([Xs[idx]])
    else:
        def chooser(X, Y, k, t):
            Y_hat = delta_snap * np.floor(np.asarray(Y, float) / delta_snap)
            Xs = X + eps * offs                      # (S, m)
            Yq = Y_hat + (eps**2 / 2) * Xs           # (S, m)
            vals = grid.dpp_query(Xs, Yq, t - eps**2 / 2, clamp=False)
            idx = int(np.argmax(vals) if maximize else np.argmin(vals))
            return Xs[idx]

    return Strategy(chooser, f"greedy-{mode}(snap={delta_snap:g})")


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class SupermartingaleReport:
    rounds: np.ndarray
    mean_x: np.ndarray
    se_x: np.ndarray
    mean_y: np.ndarray
    se_y: np.ndarray
    flags_x: list
    flags_y: list
    c_x: float
    c_y: float


def supermartingale_diagnostic(config: GameConfig, start, Z, episodes: int,
                               opponent: Strategy | None = None,
                               c_x: float | None = None,
                               c_y: float | None = None) -> SupermartingaleReport:
    """Empirical drift check of the compensated distances under the pull strategy.

    Player I pulls toward Z; the opponent is arbitrary but fixed.  Tracks the
    stopped processes  |X_k - Z| - c_x k eps  and
    |Y_k - Y0 - (t0 - t_k) Z| - c_y k eps^2 R,  whose means should never
    increase.  Default compensators: c_x = beta m/(m+1) (the one-step ball
    average drift bound) and c_y from |X - Z| <= R + eps + |Z|.
    """
    X0, Y0, t0 = start
    X0 = np.atleast_1d(np.asarray(X0, float))
    Y0 = np.atleast_1d(np.asarray(Y0, float))
    Z = np.atleast_1d(np.asarray(Z, float))
    m = config.domain.m
    alpha, beta = config.alpha_beta
    from .domains import velocity_bound

    R = velocity_bound(config.domain)
    if c_x is None:
        c_x = beta * m / (m + 1.0)
    if c_y is None:
        c_y = (R + config.epsilon + float(np.linalg.norm(Z))) / (2.0 * R)
    s_one = pull_toward(Z, config.epsilon)
    s_two = opponent or stay_strategy()
    eps = config.epsilon
    N, _ = time_ladder(float(t0), eps)
    MX = np.empty((episodes, N + 1))
    MY = np.empty((episodes, N + 1))
    for i in range(episodes):
        rng = episode_rng(config.seed, i)
        res = run_episode(config, start, s_one, s_two, rng, log_steps=True)
        dx = float(np.linalg.norm(X0 - Z))
        dy = 0.0
        MX[i, 0] = dx
        MY[i, 0] = dy
        last_x, last_y = dx, dy
        for (k, Xk, Yk, tk, _, _) in res.log:
            last_x = float(np.linalg.norm(Xk - Z)) - c_x * k * eps
            last_y = float(np.linalg.norm(Yk - Y0 - (t0 - tk) * Z)) - c_y * k * eps**2 * R
            MX[i, k] = last_x
            MY[i, k] = last_y
        for k in range(res.tau + 1, N + 1):
            MX[i, k] = last_x   # stopped process stays frozen
            MY[i, k] = last_y
    mean_x = MX.mean(axis=0)
    mean_y = MY.mean(axis=0)
    se_x = MX.std(axis=0, ddof=1) / math.sqrt(episodes)
    se_y = MY.std(axis=0, ddof=1) / math.sqrt(episodes)
    flags_x, flags_y = [], []
    for k in range(1, N + 1):
        inc_x = MX[:, k] - MX[:, k - 1]
        inc_y = MY[:, k] - MY[:, k - 1]
        se_ix = inc_x.std(ddof=1) / math.sqrt(episodes) if episodes > 1 else 0.0
        se_iy = inc_y.std(ddof=1) / math.sqrt(episodes) if episodes > 1 else 0.0
        if inc_x.mean() > 3 * se_ix + 1e-12:
            flags_x.append(k)
        if inc_y.mean() > 3 * se_iy + 1e-12:
            flags_y.append(k)
    return SupermartingaleReport(np.arange(N + 1), mean_x, se_x, mean_y, se_y,
                                 flags_x, flags_y, c_x, c_y)
