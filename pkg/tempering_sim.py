"""Simulated tempering on a d-dimensional standard normal target.

Under efficient local exploration the point is redrawn exactly from the
tempered target every iteration, so the only state that matters is the
level, the direction bit and S = sum(x_i^2) ~ chi2_d / beta. The normalising
constants of the tempered Gaussians are known in closed form, which makes
the level marginal uniform.
"""
import logging
import math
from dataclasses import replace

import numpy as np
from numba import njit

from scaling_theory import normal_quantile
from sim_data.models import (
    Ladder,
    Mode,
    ParameterError,
    RoundTripStats,
    TemperConfig,
    TemperState,
)
from sim_data.streams import make_rng

logger = logging.getLogger(__name__)

CHUNK = 1 << 20
RATIO_CEILING = 1.0 - 1e-12

# round-trip phases
UNSET = 0
SEEK_HOT = 1
SEEK_COLD = 2

# counter slots
PROPOSALS = 0
ACCEPTANCES = 1
BOUNDARY = 2
ROUND_TRIPS = 3


def spacing_parameter(target_acc: float) -> float:
    """u = -2*sqrt(2)*Phi^-1(target_acc/2), the relative spacing times sqrt(d)."""
    if not 0.0 < target_acc < 1.0:
        raise ParameterError(f"target_acc must lie in (0, 1), got {target_acc}")
    return -2.0 * math.sqrt(2.0) * normal_quantile(target_acc / 2.0)


def build_ladder(beta_min: float, target_acc: float, d: int) -> Ladder:
    """Geometric ladder beta_k = r^k with r = 1 - u/sqrt(d), ending at beta_min.

    With c(beta) = 1/(beta*sqrt(2)) the asymptotic acceptance of every
    adjacent move is target_acc. The last level is the first r^k <= beta_min,
    clamped to beta_min.
    """
    if not 0.0 < beta_min < 1.0:
        raise ParameterError(f"beta_min must lie in (0, 1), got {beta_min}")
    if int(d) != d or d < 1:
        raise ParameterError(f"d must be a positive integer, got {d}")
    ratio = 1.0 - spacing_parameter(target_acc) / math.sqrt(d)
    if ratio >= RATIO_CEILING:
        raise ParameterError(f"target_acc={target_acc} is too close to 1: the ladder would not terminate")
    if ratio <= 0.0:
        raise ParameterError(f"target_acc={target_acc} is too small for d={d}: spacing exceeds the whole range")
    betas = [1.0]
    k = 1
    while ratio ** k > beta_min:
        betas.append(ratio ** k)
        k += 1
    betas.append(beta_min)
    logger.debug("ladder for acc=%.4f, d=%d: %d levels, ratio %.6f", target_acc, d, len(betas), ratio)
    return Ladder(tuple(betas))


def _check_beta(value: float, name: str):
    if not 0.0 < value <= 1.0:
        raise ParameterError(f"{name} must lie in (0, 1], got {value}")


def swap_log_ratio(beta_from: float, beta_to: float, s: float, d: int) -> float:
    """Log acceptance ratio for moving beta_from -> beta_to with the point fixed."""
    _check_beta(beta_from, "beta_from")
    _check_beta(beta_to, "beta_to")
    if not s > 0:
        raise ParameterError(f"s must be positive, got {s}")
    return -(beta_to - beta_from) * s / 2.0 + (d / 2.0) * math.log(beta_to / beta_from)


def swap_acceptance(beta_from: float, beta_to: float, s: float, d: int) -> float:
    """Metropolis acceptance probability min(1, exp(log ratio))."""
    return math.exp(min(0.0, swap_log_ratio(beta_from, beta_to, s, d)))


def initial_state(config: TemperConfig, rng: np.random.Generator) -> TemperState:
    """Level 0 with a point drawn from the cold target."""
    return TemperState(level=0, dir=config.initial_dir, s=float(rng.chisquare(config.d)))


def advance(state: TemperState, config: TemperConfig, rng: np.random.Generator) -> TemperState:
    """One iteration, step by step: redraw the point, propose, accept or reject."""
    betas = config.ladder.betas
    lifted = config.mode is Mode.NONREVERSIBLE
    beta = betas[state.level]
    s = float(rng.chisquare(config.d)) / beta
    if lifted:
        move = state.dir
    else:
        move = 1 if rng.random() < 0.5 else -1
    target = state.level + move
    if not 0 <= target <= config.ladder.top:
        return TemperState(state.level, -state.dir if lifted else state.dir, s)
    if rng.random() < swap_acceptance(beta, betas[target], s, config.d):
        return TemperState(target, state.dir, s)
    return TemperState(state.level, -state.dir if lifted else state.dir, s)


@njit(cache=True)
def _advance_chunk(chi2, u_prop, u_acc, betas, half_d, reversible, count_trips,
                   level, direction, phase, visits, ups, downs, counters):
    top = betas.shape[0] - 1
    for i in range(chi2.shape[0]):
        s = chi2[i] / betas[level]
        if reversible:
            move = 1 if u_prop[i] < 0.5 else -1
        else:
            move = direction
        target = level + move
        counters[0] += 1
        if target < 0 or target > top:
            counters[2] += 1
            if not reversible:
                direction = -direction
        else:
            b0 = betas[level]
            b1 = betas[target]
            log_ratio = -(b1 - b0) * s / 2.0 + half_d * math.log(b1 / b0)
            if log_ratio >= 0.0 or u_acc[i] < math.exp(log_ratio):
                counters[1] += 1
                if target > level:
                    ups[level] += 1
                else:
                    downs[target] += 1
                level = target
            elif not reversible:
                direction = -direction
        visits[level] += 1
        if count_trips:
            if level == top and phase == 1:
                phase = 2
            elif level == 0 and phase == 2:
                counters[3] += 1
                phase = 1
    return level, direction, phase


def run(config: TemperConfig) -> RoundTripStats:
    """Simulate config.iterations tempering steps and count round trips 0 -> N -> 0."""
    rng = make_rng(config.seed)
    betas = np.asarray(config.ladder.betas, dtype=np.float64)
    top = config.ladder.top
    reversible = config.mode is Mode.REVERSIBLE

    visits = np.zeros(top + 1, dtype=np.int64)
    ups = np.zeros(top, dtype=np.int64)
    downs = np.zeros(top, dtype=np.int64)
    counters = np.zeros(4, dtype=np.int64)
    level, direction = 0, int(config.initial_dir)
    phase = SEEK_HOT if config.count_round_trips else UNSET
    unused = np.empty(0, dtype=np.float64)

    done = 0
    while done < config.iterations:
        n = min(CHUNK, config.iterations - done)
        chi2 = rng.chisquare(config.d, size=n)
        u_prop = rng.random(n) if reversible else unused
        u_acc = rng.random(n)
        level, direction, phase = _advance_chunk(
            chi2, u_prop, u_acc, betas, 0.5 * config.d, reversible,
            config.count_round_trips, level, direction, phase,
            visits, ups, downs, counters,
        )
        done += n

    stats = RoundTripStats(
        round_trips=int(counters[ROUND_TRIPS]),
        iterations=config.iterations,
        proposals=int(counters[PROPOSALS]),
        acceptances=int(counters[ACCEPTANCES]),
        boundary_proposals=int(counters[BOUNDARY]),
        level_visits=tuple(int(v) for v in visits),
        up_moves=tuple(int(v) for v in ups),
        down_moves=tuple(int(v) for v in downs),
    )
    logger.debug(
        "%s run, %d levels, %d iterations: %d round trips, acceptance %.4f",
        config.mode.value, top + 1, config.iterations, stats.round_trips, stats.empirical_acc,
    )
    return stats


def measure_acceptance(config: TemperConfig, iterations: int) -> float:
    """Empirical acceptance of a calibration run without round-trip counting."""
    calibration = replace(config, iterations=iterations, count_round_trips=False)
    return run(calibration).empirical_acc
