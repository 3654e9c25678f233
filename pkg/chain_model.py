"""Double birth-death lifted chain on Z x {+, -}.

From (x, +) the chain moves to x+1 with probability A, to x-1 with
probability B, and flips to (x, -) with probability C; the bottom row is
the mirror image. Over long horizons X_n / sqrt(n) is Gaussian with
variance v = (A-B)^2/C + (A+B), and the chain regenerates every time it
completes a + -> - -> + cycle.
"""
import logging
import math
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from sim_data.models import (
    BlockMoments,
    ChainParams,
    LiftedWalkerState,
    ParameterError,
    RegenerativeBlock,
    VolatilityEstimate,
)
from sim_data.streams import make_rng

logger = logging.getLogger(__name__)

MIN_STEPS = 10_000
MIN_REPLICATES = 10

# Uniforms drawn per vectorised chunk of a path.
CHUNK = 1 << 20


def step(state: LiftedWalkerState, params: ChainParams, rng: np.random.Generator) -> LiftedWalkerState:
    """Advance one transition."""
    u = rng.random()
    if u < params.A:
        return LiftedWalkerState(state.x + state.dir, state.dir)
    if u < params.A + params.B:
        return LiftedWalkerState(state.x - state.dir, state.dir)
    return LiftedWalkerState(state.x, -state.dir)


def theoretical_volatility(params: ChainParams) -> float:
    """Limiting volatility (A-B)^2/C + (A+B)."""
    return (params.A - params.B) ** 2 / params.C + (params.A + params.B)


def block_moments(params: ChainParams) -> BlockMoments:
    """Mean duration, mean displacement and displacement variance of one block."""
    A, B, C = params.A, params.B, params.C
    return BlockMoments(
        mean_dt=2.0 / C,
        mean_dx=0.0,
        var_dx=2.0 * (A - B) ** 2 / C ** 2 + 2.0 * (1.0 - C) / C,
    )


def sample_blocks(params: ChainParams, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Draw n i.i.d. regenerative blocks, returned as (dx, dt) arrays.

    G, H ~ Geom(C) on {0, 1, 2, ...}; each of the G (resp. H) in-row moves is
    +1 with probability A/(1-C), so the row displacement is 2*Bin(G, p) - G.
    """
    if n < 1:
        raise ParameterError(f"n must be positive, got {n}")
    p = params.forward_share
    # numpy's geometric lives on {1, 2, ...}
    g = rng.geometric(params.C, size=n) - 1
    h = rng.geometric(params.C, size=n) - 1
    up_leg = 2 * rng.binomial(g, p) - g
    down_leg = 2 * rng.binomial(h, p) - h
    return (up_leg - down_leg).astype(np.int64), (g + h + 2).astype(np.int64)


def sample_block(params: ChainParams, rng: np.random.Generator) -> RegenerativeBlock:
    """Draw one regenerative block."""
    dx, dt = sample_blocks(params, 1, rng)
    return RegenerativeBlock(dx=int(dx[0]), dt=int(dt[0]))


def _path_chunk(params: ChainParams, n: int, rng: np.random.Generator, parity: int):
    """Increments of n consecutive steps.

    parity is 0 when the chain is on the + row before the chunk. Returns
    (increments, flip mask, direction before each step, parity after).
    """
    u = rng.random(n)
    move = np.where(u < params.A, 1, np.where(u < params.A + params.B, -1, 0)).astype(np.int64)
    flip = u >= params.A + params.B
    flips_before = np.cumsum(flip) - flip + parity
    direction = 1 - 2 * (flips_before & 1)
    parity_after = int((parity + np.count_nonzero(flip)) & 1)
    return direction * move, flip, direction, parity_after


def _walk(params: ChainParams, steps: int, rng: np.random.Generator, checkpoints: Sequence[int]) -> np.ndarray:
    """X at each of the (sorted, 1..steps) checkpoint times of one path from (0, +)."""
    marks = np.asarray(checkpoints, dtype=np.int64)
    positions = np.zeros(len(marks), dtype=np.int64)
    x = 0
    parity = 0
    done = 0
    while done < steps:
        n = min(CHUNK, steps - done)
        increments, _, _, parity = _path_chunk(params, n, rng, parity)
        path = np.cumsum(increments) + x
        inside = (marks > done) & (marks <= done + n)
        positions[inside] = path[marks[inside] - done - 1]
        x = int(path[-1])
        done += n
    return positions


def simulate_endpoints(params: ChainParams, steps: int, replicates: int, seed: int) -> np.ndarray:
    """X_steps for `replicates` independent chains started at (0, +).

    Replicate i uses the stream (seed, i).
    """
    if steps < 1 or replicates < 1:
        raise ParameterError("steps and replicates must be positive")
    return np.array([
        _walk(params, steps, make_rng(seed, i), [steps])[0] for i in range(replicates)
    ], dtype=np.int64)


def estimate_volatility(params: ChainParams, steps: int, replicates: int, seed: int) -> VolatilityEstimate:
    """Average of X_steps^2 / steps over independent replicates.

    X_0 = 0 and the drift is zero, so each term is an asymptotically
    unbiased estimate of v (a scaled chi-squared with one degree of freedom).
    """
    if steps < MIN_STEPS:
        raise ParameterError(f"steps must be at least {MIN_STEPS}, got {steps}")
    if replicates < MIN_REPLICATES:
        raise ParameterError(f"replicates must be at least {MIN_REPLICATES}, got {replicates}")
    endpoints = simulate_endpoints(params, steps, replicates, seed)
    terms = endpoints.astype(np.float64) ** 2 / steps
    v_hat = float(terms.mean())
    std_err = float(terms.std(ddof=1) / math.sqrt(replicates))
    logger.debug("volatility estimate %.6f +/- %.6f from %d x %d steps", v_hat, std_err, replicates, steps)
    return VolatilityEstimate(v_hat=v_hat, std_err=std_err, replicates=replicates, steps_per_replicate=steps)


def regenerative_volatility(params: ChainParams, blocks: int, seed: int) -> VolatilityEstimate:
    """Estimate v as E[dx^2] / E[dt] from sampled blocks (ratio estimator)."""
    if blocks < 2:
        raise ParameterError(f"blocks must be at least 2, got {blocks}")
    dx, dt = sample_blocks(params, blocks, make_rng(seed))
    squares = dx.astype(np.float64) ** 2
    durations = dt.astype(np.float64)
    ratio = squares.mean() / durations.mean()
    # delta method for a ratio of means
    residual = squares - ratio * durations
    std_err = residual.std(ddof=1) / (durations.mean() * math.sqrt(blocks))
    return VolatilityEstimate(
        v_hat=float(ratio),
        std_err=float(std_err),
        replicates=blocks,
        steps_per_replicate=int(dt.sum()),
        method="regenerative",
    )


def path_blocks(params: ChainParams, steps: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Blocks cut from one simulated path at the times it re-enters the + row."""
    if steps < 1:
        raise ParameterError(f"steps must be positive, got {steps}")
    times: List[np.ndarray] = [np.zeros(1, dtype=np.int64)]
    positions: List[np.ndarray] = [np.zeros(1, dtype=np.int64)]
    x = 0
    parity = 0
    done = 0
    while done < steps:
        n = min(CHUNK, steps - done)
        increments, flip, direction, parity = _path_chunk(params, n, rng, parity)
        path = np.cumsum(increments) + x
        regen = np.flatnonzero(flip & (direction < 0))
        times.append(regen + done + 1)
        positions.append(path[regen])
        x = int(path[-1])
        done += n
    t = np.concatenate(times)
    xs = np.concatenate(positions)
    return np.diff(xs), np.diff(t)


def volatility_profile(
    params: ChainParams,
    steps: int,
    replicates: int,
    times: Iterable[float],
    seed: int,
) -> List[Tuple[float, float]]:
    """(t, mean of X_{floor(steps*t)}^2 / steps) for each t in (0, 1].

    In the diffusion limit the second value grows like v * t.
    """
    ts = sorted(float(t) for t in times)
    if not ts or ts[0] <= 0 or ts[-1] > 1:
        raise ParameterError("times must lie in (0, 1]")
    marks = [max(1, int(math.floor(steps * t))) for t in ts]
    samples = np.array([
        _walk(params, steps, make_rng(seed, i), marks) for i in range(replicates)
    ], dtype=np.float64)
    scaled = (samples ** 2).mean(axis=0) / steps
    return list(zip(ts, (float(v) for v in scaled)))
