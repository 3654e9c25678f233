"""Efficiency curves and optimal scaling for tempering moves.

A proposed temperature move at spacing ell is accepted with asymptotic
probability acc(ell) = 2*Phi(-c*ell/2). The reversible dynamics split that
into A = B = acc/2; the lifted (non-reversible) dynamics keep A = acc, B = 0.
Either way the chain's volatility v(ell) comes from the lifted-chain formula
and the efficiency is eff(ell) = ell^2 * v(ell).
"""
import logging
import math
from typing import Callable, Iterable, List, Tuple

import numpy as np
from scipy import optimize as sp_optimize
from scipy import special

from chain_model import theoretical_volatility
from sim_data.models import (
    ChainParams,
    EfficiencyPoint,
    Mode,
    ModeComparison,
    OptimalScaling,
    ParameterError,
    ScalingProblem,
    UnimodalityError,
)

logger = logging.getLogger(__name__)

# Search bracket in s = c*ell/2; both s-curves peak near 1.
S_BRACKET = (5e-7, 10.0)
S_TOLERANCE = 1e-10
SCAN_POINTS = 1024
GENERIC_RTOL = 1e-8


def normal_cdf(z: float) -> float:
    """Standard normal cdf."""
    if not math.isfinite(z):
        raise ParameterError(f"z must be finite, got {z}")
    return float(special.ndtr(z))


def normal_quantile(p: float) -> float:
    """Inverse standard normal cdf, polished by one Newton step."""
    if not 0.0 < p < 1.0:
        raise ParameterError(f"p must lie in (0, 1), got {p}")
    z = float(special.ndtri(p))
    density = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    if density > 0.0:
        z -= (special.ndtr(z) - p) / density
    return float(z)


def _check_positive(**values):
    for name, value in values.items():
        if not value > 0 or not math.isfinite(value):
            raise ParameterError(f"{name} must be positive and finite, got {value}")


def acceptance_rate(ell: float, c: float) -> float:
    """Asymptotic acceptance 2*Phi(-c*ell/2)."""
    _check_positive(ell=ell, c=c)
    return 2.0 * normal_cdf(-c * ell / 2.0)


def mode_chain_params(mode: Mode, acc: float) -> ChainParams:
    """Lifted-chain probabilities induced by an overall acceptance rate."""
    mode = Mode.parse(mode)
    if not 0.0 < acc < 1.0:
        raise ParameterError(f"acceptance must lie in (0, 1), got {acc}")
    if mode is Mode.REVERSIBLE:
        return ChainParams(A=acc / 2.0, B=acc / 2.0, C=1.0 - acc)
    return ChainParams(A=acc, B=0.0, C=1.0 - acc)


def volatility_from_acceptance(mode: Mode, a: float) -> float:
    """v as a function of the acceptance rate: a, or a/(1-a) for the lifted chain."""
    return theoretical_volatility(mode_chain_params(mode, a))


def efficiency(mode: Mode, ell: float, c: float) -> float:
    """eff(ell) = ell^2 * v(ell).

    Uses acc = erfc(x) and 1 - acc = erf(x) with x = c*ell/(2*sqrt(2)), so
    neither tail rounds the acceptance to exactly 0 or 1.
    """
    mode = Mode.parse(mode)
    _check_positive(ell=ell, c=c)
    x = c * ell / (2.0 * math.sqrt(2.0))
    acc = float(special.erfc(x))
    if mode is Mode.REVERSIBLE:
        return ell * ell * acc
    return ell * ell * acc / float(special.erf(x))


def efficiency_from_acceptance(mode: Mode, a: float, c: float) -> float:
    """Efficiency written in terms of the acceptance rate it produces."""
    _check_positive(c=c)
    if not 0.0 < a < 1.0:
        raise ParameterError(f"a must lie in (0, 1), got {a}")
    q = normal_quantile(a / 2.0)
    return volatility_from_acceptance(mode, a) * (4.0 / (c * c)) * q * q


def efficiency_ratio_at_acceptance(a: float) -> float:
    """Lifted over reversible efficiency at equal acceptance: 1/(1-a)."""
    if not 0.0 < a < 1.0:
        raise ParameterError(f"a must lie in (0, 1), got {a}")
    return 1.0 / (1.0 - a)


def efficiency_curve(problem: ScalingProblem, ells: Iterable[float]) -> List[EfficiencyPoint]:
    """Efficiency points along a grid of spacings."""
    return [
        EfficiencyPoint(ell=ell, acc=acceptance_rate(ell, problem.c),
                        eff=efficiency(problem.mode, ell, problem.c))
        for ell in ells
    ]


def optimize(mode: Mode, c: float) -> OptimalScaling:
    """Maximise efficiency(mode, ., c).

    The search runs in s = c*ell/2, where the curve does not depend on c,
    so the optimum scales exactly as ell/c and eff/c^2.
    """
    mode = Mode.parse(mode)
    _check_positive(c=c)
    result = sp_optimize.minimize_scalar(
        lambda s: -efficiency(mode, 2.0 * s, 1.0),
        bounds=S_BRACKET,
        method="bounded",
        options={"xatol": S_TOLERANCE, "maxiter": 500},
    )
    if not result.success:
        raise ArithmeticError(f"optimiser did not converge: {result.message}")
    s_opt = float(result.x)
    ell_opt = 2.0 * s_opt / c
    logger.debug("%s optimum at s=%.10f", mode.value, s_opt)
    return OptimalScaling(
        ell_opt=ell_opt,
        acc_opt=acceptance_rate(ell_opt, c),
        eff_opt=efficiency(mode, ell_opt, c),
    )


def compare_modes(c: float) -> ModeComparison:
    """Both optima for the same c."""
    return ModeComparison(
        reversible=optimize(Mode.REVERSIBLE, c),
        nonreversible=optimize(Mode.NONREVERSIBLE, c),
    )


def _generic_objective(accept_fn: Callable[[float], float], mode: Mode) -> Callable[[float], float]:
    def objective(ell: float) -> float:
        a = float(accept_fn(ell))
        if not 0.0 < a < 1.0:
            raise ParameterError(f"accept_fn({ell}) = {a} is outside (0, 1)")
        if mode is Mode.REVERSIBLE:
            return ell * ell * a
        return ell * ell * a / (1.0 - a)
    return objective


def _count_turns(values: np.ndarray) -> int:
    signs = np.sign(np.diff(values))
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def maximize_generic(
    accept_fn: Callable[[float], float],
    mode: Mode,
    bracket: Tuple[float, float],
) -> OptimalScaling:
    """Maximise ell^2*A(ell) (reversible) or ell^2*A(ell)/(1-A(ell)) (lifted).

    A(ell) is reported unchanged as acc_opt. The reversible objective leaves
    out the constant factor 2 of v = 2A; the maximiser is the same.
    """
    mode = Mode.parse(mode)
    lo, hi = (float(b) for b in bracket)
    if not 0.0 < lo < hi:
        raise ParameterError(f"bracket must satisfy 0 < lo < hi, got {bracket}")
    objective = _generic_objective(accept_fn, mode)

    grid = np.linspace(lo, hi, SCAN_POINTS)
    values = np.array([objective(ell) for ell in grid])
    if _count_turns(values) > 1:
        raise UnimodalityError(f"objective is not unimodal on [{lo}, {hi}]")

    best = int(np.argmax(values))
    left = grid[max(best - 1, 0)]
    right = grid[min(best + 1, SCAN_POINTS - 1)]
    result = sp_optimize.minimize_scalar(
        lambda ell: -objective(ell),
        bounds=(left, right),
        method="bounded",
        options={"xatol": GENERIC_RTOL * max(grid[best], lo), "maxiter": 500},
    )
    ell_opt = float(result.x)
    value = objective(ell_opt)
    if values[best] > value:
        ell_opt, value = float(grid[best]), float(values[best])

    return OptimalScaling(ell_opt=ell_opt, acc_opt=float(accept_fn(ell_opt)), eff_opt=float(value))
