"""Exact expected round-trip rates for finite ladders.

Per-edge acceptances come from quadrature against the chi-squared law of the
redrawn point; round-trip cycle lengths come from first-passage linear
systems on the level chain (reversible) or the lifted (level, direction)
chain. Boundary conventions match tempering_sim: proposals off the ladder
are rejected, and in the lifted chain every rejection flips the direction.
"""
import logging
import math
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate, linalg, special

from scaling_theory import normal_cdf
from sim_data.models import (
    EdgeAcceptances,
    Ladder,
    Mode,
    ParameterError,
    RoundTripRate,
    SingularSystemError,
)

logger = logging.getLogger(__name__)

QUAD_EPS = 1e-10
TAIL_MASS = 1e-16


def _chi2_logpdf(y: float, d: int) -> float:
    half = 0.5 * d
    return special.xlogy(half - 1.0, y) - 0.5 * y - half * math.log(2.0) - special.gammaln(half)


@lru_cache(maxsize=4096)
def _acceptance_for_ratio(ratio: float, d: int) -> float:
    """E[min(1, r)] for beta' = ratio*beta, written in y = beta*S ~ chi2_d."""
    log_const = 0.5 * d * math.log(ratio)

    def integrand(y: float) -> float:
        log_ratio = -(ratio - 1.0) * y / 2.0 + log_const
        return math.exp(_chi2_logpdf(y, d) + min(0.0, log_ratio))

    lo = float(special.chdtri(d, 1.0 - TAIL_MASS))
    hi = float(special.chdtri(d, TAIL_MASS))
    # min(1, r) has a kink where r = 1
    kink = d * math.log(ratio) / (ratio - 1.0)
    cuts = [lo, kink, hi] if lo < kink < hi else [lo, hi]
    total = 0.0
    for a, b in zip(cuts, cuts[1:]):
        value, _ = integrate.quad(integrand, a, b, epsabs=QUAD_EPS, epsrel=QUAD_EPS, limit=200)
        total += value
    return min(1.0, total)


def edge_acceptance(beta_from: float, beta_to: float, d: int) -> float:
    """Expected acceptance of beta_from -> beta_to with S ~ chi2_d / beta_from."""
    for name, value in (("beta_from", beta_from), ("beta_to", beta_to)):
        if not 0.0 < value <= 1.0:
            raise ParameterError(f"{name} must lie in (0, 1], got {value}")
    if beta_from == beta_to:
        raise ParameterError("beta_from and beta_to must differ")
    if int(d) != d or d < 1:
        raise ParameterError(f"d must be a positive integer, got {d}")
    # the value depends on the betas only through their ratio
    ratio = beta_to / beta_from
    if ratio == 1.0:
        return 1.0
    return _acceptance_for_ratio(ratio, int(d))


def asymptotic_edge_acceptance(u: float) -> float:
    """Large-d limit 2*Phi(-u/(2*sqrt(2))) for relative spacing u/sqrt(d)."""
    return 2.0 * normal_cdf(-u / (2.0 * math.sqrt(2.0)))


def ladder_edges(ladder: Ladder, d: int) -> EdgeAcceptances:
    """Edge acceptances of every adjacent pair of a ladder."""
    betas = ladder.betas
    up = [edge_acceptance(b0, b1, d) for b0, b1 in zip(betas, betas[1:])]
    down = [edge_acceptance(b1, b0, d) for b0, b1 in zip(betas, betas[1:])]
    return EdgeAcceptances(up=tuple(up), down=tuple(down))


def stationary_acceptance(edges: EdgeAcceptances) -> float:
    """Long-run fraction of accepted proposals, off-ladder proposals included.

    The level marginal is uniform in both dynamics, and half of the proposals
    from each end level leave the ladder.
    """
    return (sum(edges.up) + sum(edges.down)) / (2.0 * (edges.top + 1))


def _check_edges(edges: EdgeAcceptances):
    if min(edges.up + edges.down) <= 0.0:
        raise SingularSystemError("an edge with zero acceptance disconnects the ladder")


def mean_first_passage(transition: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Expected steps to reach any of `targets` from every state.

    Solves m[i] = 0 on targets and m[i] = 1 + sum_j P[i, j] m[j] elsewhere.
    """
    dim = transition.shape[0]
    system = np.eye(dim) - transition
    rhs = np.ones(dim)
    for t in targets:
        system[t, :] = 0.0
        system[t, t] = 1.0
        rhs[t] = 0.0
    try:
        times = linalg.solve(system, rhs)
    except (linalg.LinAlgError, ValueError) as exc:
        raise SingularSystemError(f"first-passage system is singular: {exc}") from exc
    if not np.all(np.isfinite(times)) or np.any(times < 0):
        raise SingularSystemError("first-passage system has no finite solution")
    return times


def level_transition_matrix(edges: EdgeAcceptances) -> np.ndarray:
    """Level chain: propose +-1 with probability 1/2, hold on rejection."""
    top = edges.top
    P = np.zeros((top + 1, top + 1))
    for k in range(top + 1):
        if k < top:
            P[k, k + 1] = 0.5 * edges.up[k]
        if k > 0:
            P[k, k - 1] = 0.5 * edges.down[k - 1]
        P[k, k] = 1.0 - P[k].sum()
    return P


def _lifted_index(level: int, direction: int) -> int:
    return 2 * level + (0 if direction > 0 else 1)


def lifted_transition_matrix(edges: EdgeAcceptances) -> np.ndarray:
    """Lifted chain on (level, dir): keep moving in dir, flip on any rejection."""
    top = edges.top
    P = np.zeros((2 * (top + 1), 2 * (top + 1)))
    for k in range(top + 1):
        plus, minus = _lifted_index(k, 1), _lifted_index(k, -1)
        a = edges.up[k] if k < top else 0.0
        if k < top:
            P[plus, _lifted_index(k + 1, 1)] = a
        P[plus, minus] += 1.0 - a
        b = edges.down[k - 1] if k > 0 else 0.0
        if k > 0:
            P[minus, _lifted_index(k - 1, -1)] = b
        P[minus, plus] += 1.0 - b
    return P


def round_trip_rate_reversible(edges: EdgeAcceptances) -> RoundTripRate:
    """Expected 0 -> N -> 0 cycle of the reversible level chain."""
    _check_edges(edges)
    top = edges.top
    P = level_transition_matrix(edges)
    to_hot = mean_first_passage(P, [top])
    to_cold = mean_first_passage(P, [0])
    return RoundTripRate.from_cycle(float(to_hot[0] + to_cold[top]))


def round_trip_rate_nonreversible(edges: EdgeAcceptances) -> RoundTripRate:
    """Expected 0 -> N -> 0 cycle of the lifted chain.

    Level N is always entered as (N, +) and level 0 as (0, -), so the renewal
    cycle runs (0, -) -> N -> 0; the first trip from (0, +) skips one flip.
    """
    _check_edges(edges)
    top = edges.top
    P = lifted_transition_matrix(edges)
    to_hot = mean_first_passage(P, [_lifted_index(top, 1), _lifted_index(top, -1)])
    to_cold = mean_first_passage(P, [_lifted_index(0, 1), _lifted_index(0, -1)])
    descent = to_cold[_lifted_index(top, 1)]
    return RoundTripRate.from_cycle(
        float(to_hot[_lifted_index(0, -1)] + descent),
        initial_cycle_steps=float(to_hot[_lifted_index(0, 1)] + descent),
    )


def round_trip_rate(edges: EdgeAcceptances, mode: Mode) -> RoundTripRate:
    """Dispatch on the move dynamics."""
    if Mode.parse(mode) is Mode.REVERSIBLE:
        return round_trip_rate_reversible(edges)
    return round_trip_rate_nonreversible(edges)
