"""Experiment commands: volatility check, optimal scaling, curves, sweeps and fits.

Every cmd_* function prints a short report and returns its result, so the
same code backs the CLI and the tests.
"""
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

import chain_model
import ladder_oracle
import scaling_theory
import tempering_sim
from sim_data.models import (
    ChainParams,
    FitResult,
    Mode,
    ModeComparison,
    ParameterError,
    SweepConfig,
    SweepRow,
    TemperConfig,
    VolatilityReport,
)
from sim_data.streams import derive_seed
from storage import CURVE_COLUMNS, ResultStorage

logger = logging.getLogger(__name__)

WORKERS_ENV = "LIFTEMP_WORKERS"
PASS_SIGMAS = 4.0
MIN_FIT_POINTS = 5


def resolve_workers(flag: Optional[int] = None, configured: Optional[int] = None) -> int:
    """Worker count: flag, then $LIFTEMP_WORKERS, then config, then CPU count."""
    for source, value in (("flag", flag), (WORKERS_ENV, os.getenv(WORKERS_ENV)), ("config", configured)):
        if value in (None, ""):
            continue
        try:
            workers = int(value)
        except (TypeError, ValueError) as e:
            raise ParameterError(f"invalid worker count from {source}: {value!r}") from e
        if workers < 1:
            raise ParameterError(f"worker count must be positive, got {workers} from {source}")
        return workers
    return os.cpu_count() or 1


def parse_grid(text: Union[str, Sequence[float], None], default_count: int = 20) -> Tuple[float, ...]:
    """Acceptance grid from a comma-separated list or a point count spanning [0.05, 0.95]."""
    if text is None:
        count = default_count
    elif isinstance(text, (list, tuple)):
        return tuple(float(a) for a in text)
    elif "," in str(text):
        try:
            return tuple(float(a) for a in str(text).split(",") if a.strip())
        except ValueError as e:
            raise ParameterError(f"invalid grid {text!r}") from e
    else:
        try:
            count = int(text)
        except ValueError as e:
            raise ParameterError(f"invalid grid {text!r}") from e
    if count < 2:
        raise ParameterError(f"a grid needs at least 2 points, got {count}")
    return tuple(round(float(a), 12) for a in np.linspace(0.05, 0.95, count))


def parse_modes(value: Union[str, Sequence, None]) -> Tuple[Mode, ...]:
    """rev, nonrev or both."""
    if value is None or str(value).lower() == "both":
        return (Mode.REVERSIBLE, Mode.NONREVERSIBLE)
    if isinstance(value, (list, tuple)):
        return tuple(Mode.parse(v) for v in value)
    return (Mode.parse(value),)


# volatility

VOLATILITY_METHODS = ("endpoint", "regenerative")


def parse_times(text: Union[str, Sequence[float], None]) -> Tuple[float, ...]:
    """Profile times in (0, 1] from a comma-separated list."""
    if text is None or text == "":
        return ()
    if isinstance(text, (list, tuple)):
        return tuple(float(t) for t in text)
    try:
        return tuple(float(t) for t in str(text).split(",") if t.strip())
    except ValueError as e:
        raise ParameterError(f"invalid profile times {text!r}") from e


def cmd_volatility(
    params: ChainParams,
    steps: int,
    replicates: int,
    seed: int,
    method: str = "endpoint",
    blocks: int = 1_000_000,
    profile_times: Sequence[float] = (),
) -> VolatilityReport:
    """Compare the Monte Carlo volatility with (A-B)^2/C + (A+B).

    method="endpoint" averages X_steps^2/steps over replicates;
    method="regenerative" uses the ratio estimator over `blocks` sampled
    blocks. profile_times adds mean X^2/steps along the paths.
    """
    if method not in VOLATILITY_METHODS:
        raise ParameterError(f"method must be one of {', '.join(VOLATILITY_METHODS)}, got {method!r}")
    theoretical = chain_model.theoretical_volatility(params)
    if method == "regenerative":
        estimate = chain_model.regenerative_volatility(params, blocks, seed)
        budget = f"{blocks} blocks, {estimate.steps_per_replicate} steps"
    else:
        estimate = chain_model.estimate_volatility(params, steps, replicates, seed)
        budget = f"{replicates} replicates x {steps} steps"
    profile = []
    if profile_times:
        profile = chain_model.volatility_profile(params, steps, replicates, profile_times, seed)
    report = VolatilityReport(params=params, theoretical=theoretical, estimate=estimate,
                              sigmas=PASS_SIGMAS, profile=profile)
    deviation = (
        abs(estimate.v_hat - theoretical) / estimate.std_err if estimate.std_err > 0 else 0.0
    )
    print(f"volatility check for A={params.A:.6g}, B={params.B:.6g}, C={params.C:.6g}")
    print(f"  theoretical v   : {theoretical:.6f}")
    print(f"  estimated v_hat : {estimate.v_hat:.6f} +/- {estimate.std_err:.6f} ({method}, {budget})")
    print(f"  deviation       : {deviation:.2f} sigma")
    for t, value in profile:
        print(f"  profile t={t:<6g}: {value:.6f} (v*t = {theoretical * t:.6f})")
    print(f"  result          : {'PASS' if report.passed else 'FAIL'} ({PASS_SIGMAS:g} sigma)")
    return report


# scaling theory

def cmd_optimal(c: float) -> ModeComparison:
    """Optimal spacing, acceptance and efficiency of both dynamics."""
    comparison = scaling_theory.compare_modes(c)
    print(f"optimal scaling for c = {c:g}")
    print(f"  {'mode':<15}{'ell_opt':>12}{'acc_opt':>10}{'eff_opt':>12}")
    for mode, opt in ((Mode.REVERSIBLE, comparison.reversible), (Mode.NONREVERSIBLE, comparison.nonreversible)):
        print(f"  {mode.value:<15}{opt.ell_opt:>12.6f}{opt.acc_opt:>10.6f}{opt.eff_opt:>12.6f}")
    print(f"  efficiency ratio (nonreversible / reversible): {comparison.efficiency_ratio:.6f}")
    print(f"  scaling ratio (nonreversible / reversible)   : {comparison.scaling_ratio:.6f}")
    return comparison


def curve_grid(grid_size: int) -> np.ndarray:
    """k/(n+1) for k = 1..n."""
    if grid_size < 2:
        raise ParameterError(f"grid_size must be at least 2, got {grid_size}")
    return np.arange(1, grid_size + 1) / (grid_size + 1)


def cmd_curves(c: float, grid_size: int, out: Path) -> Path:
    """Write efficiency-vs-acceptance curves plus a companion plot script."""
    out = Path(out)
    comparison = scaling_theory.compare_modes(c)
    rows = []
    for a in curve_grid(grid_size):
        a = float(a)
        rows.append({
            "acc": a,
            "eff_reversible": scaling_theory.efficiency_from_acceptance(Mode.REVERSIBLE, a, c),
            "eff_nonreversible": scaling_theory.efficiency_from_acceptance(Mode.NONREVERSIBLE, a, c),
            "ratio": scaling_theory.efficiency_ratio_at_acceptance(a),
        })
    ResultStorage(out).write_rows(CURVE_COLUMNS, rows)
    optima = {
        "acc_reversible": comparison.reversible.acc_opt,
        "acc_nonreversible": comparison.nonreversible.acc_opt,
        "eff_reversible": comparison.reversible.eff_opt,
        "eff_nonreversible": comparison.nonreversible.eff_opt,
    }
    script = ResultStorage(out.with_name(out.stem + "_plot.py")).write_plot_script(out, optima)
    print(f"wrote {len(rows)} curve points to {out}")
    print(f"plot script: {script}")
    return out


# sweeps

def cmd_run(d: int, beta_min: float, target_acc: float, mode: Mode, iterations: int, seed: int) -> SweepRow:
    """Simulate a single ladder and print its statistics next to the oracle."""
    config = SweepConfig(d=d, beta_min=beta_min, acceptance_grid=(target_acc,),
                         iterations_per_point=iterations, modes=(mode,), seed=seed)
    tempering_sim.build_ladder(beta_min, target_acc, d)
    row = run_sweep_point(0, Mode.parse(mode), target_acc, config)
    if not row.ok:
        raise RuntimeError(row.error)
    print(f"{row.mode} tempering, d={d}, beta_min={beta_min:g}, target acceptance {target_acc:g}")
    print(f"  levels            : {row.n_levels}")
    print(f"  iterations        : {row.iterations}")
    print(f"  acceptance        : {row.empirical_acc:.6f} (per edge {row.edge_acc:.6f})")
    print(f"  round trips       : {row.round_trips}")
    print(f"  rate per million  : {row.rate_per_million:.3f} (oracle {row.oracle_rate_per_million:.3f})")
    return row


def _blank_row(point: int, mode: Mode, target_acc: float, config: SweepConfig) -> SweepRow:
    return SweepRow(mode=mode.value, target_acc=target_acc, d=config.d,
                    beta_min=config.beta_min, seed=config.seed, point=point)


def run_sweep_point(point: int, mode: Mode, target_acc: float, config: SweepConfig) -> SweepRow:
    """Simulate one (mode, target acceptance) point; failures land in the error column."""
    row = _blank_row(point, mode, target_acc, config)
    try:
        ladder = tempering_sim.build_ladder(config.beta_min, target_acc, config.d)
        row.n_levels = ladder.n_levels
        stats = tempering_sim.run(TemperConfig(
            d=config.d,
            ladder=ladder,
            mode=mode,
            iterations=config.iterations_per_point,
            seed=derive_seed(config.seed, point),
        ))
        oracle = ladder_oracle.round_trip_rate(ladder_oracle.ladder_edges(ladder, config.d), mode)
        row.empirical_acc = stats.empirical_acc
        row.edge_acc = stats.edge_acc
        row.round_trips = stats.round_trips
        row.iterations = stats.iterations
        row.rate_per_million = stats.rate_per_million
        row.oracle_rate_per_million = oracle.rate_per_million
    except Exception as e:
        logger.warning("sweep point %d (%s, acc=%.4f) failed: %s", point, mode.value, target_acc, e)
        row.error = f"{type(e).__name__}: {e}"
    return row


def oracle_sweep_point(point: int, mode: Mode, target_acc: float, config: SweepConfig) -> SweepRow:
    """Noise-free counterpart of run_sweep_point."""
    row = _blank_row(point, mode, target_acc, config)
    try:
        ladder = tempering_sim.build_ladder(config.beta_min, target_acc, config.d)
        edges = ladder_oracle.ladder_edges(ladder, config.d)
        rate = ladder_oracle.round_trip_rate(edges, mode)
        row.n_levels = ladder.n_levels
        row.empirical_acc = ladder_oracle.stationary_acceptance(edges)
        row.edge_acc = edges.mean()
        row.rate_per_million = rate.rate_per_million
        row.oracle_rate_per_million = rate.rate_per_million
    except Exception as e:
        logger.warning("oracle point %d (%s, acc=%.4f) failed: %s", point, mode.value, target_acc, e)
        row.error = f"{type(e).__name__}: {e}"
    return row


def _execute(worker, config: SweepConfig, workers: int, progress: bool) -> List[SweepRow]:
    tasks = config.points()
    bar = tqdm(total=len(tasks), disable=not progress, desc="sweep", unit="point")
    rows: List[SweepRow] = []
    if workers <= 1:
        for point, mode, acc in tasks:
            rows.append(worker(point, mode, acc, config))
            bar.update()
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(worker, point, mode, acc, config) for point, mode, acc in tasks]
            for future in as_completed(futures):
                rows.append(future.result())
                bar.update()
    bar.close()
    return sorted(rows, key=lambda r: r.point)


def cmd_sweep(config: SweepConfig, workers: int = 1, progress: bool = False) -> List[SweepRow]:
    """Simulate every (mode, grid value) point and write the sweep CSV."""
    rows = _execute(run_sweep_point, config, workers, progress)
    ResultStorage(Path(config.output_path)).write_sweep(rows)
    failed = sum(1 for r in rows if not r.ok)
    print(f"wrote {len(rows)} sweep points to {config.output_path}" + (f" ({failed} failed)" if failed else ""))
    return rows


def cmd_oracle(config: SweepConfig, workers: int = 1, progress: bool = False) -> List[SweepRow]:
    """Exact round-trip rates for the sweep grid, in the sweep CSV format."""
    rows = _execute(oracle_sweep_point, config, workers, progress)
    ResultStorage(Path(config.output_path)).write_sweep(rows)
    print(f"wrote {len(rows)} oracle points to {config.output_path}")
    return rows


# fitting

def gaussian_midpoint_c(beta_min: float) -> float:
    """Per-dimension Gaussian constant 1/(beta*sqrt(2)) at the middle of [beta_min, 1]."""
    return 1.0 / (0.5 * (1.0 + beta_min) * math.sqrt(2.0))


def resolve_c_effective(c_effective: Union[str, float, None], rows: Sequence[SweepRow]) -> float:
    """'fit' folds c into the scale constant; None uses the Gaussian midpoint value."""
    if c_effective is None or str(c_effective).lower() == "midpoint":
        beta_mins = {r.beta_min for r in rows if not math.isnan(r.beta_min)}
        if len(beta_mins) != 1:
            raise ParameterError("cannot infer c_effective: the CSV needs a single beta_min")
        return gaussian_midpoint_c(beta_mins.pop())
    if str(c_effective).lower() == "fit":
        return 1.0
    try:
        c = float(c_effective)
    except ValueError as e:
        raise ParameterError(f"invalid c_effective {c_effective!r}") from e
    if not c > 0:
        raise ParameterError(f"c_effective must be positive, got {c}")
    return c


def fit_curve(mode: Mode, accs: Sequence[float], rates: Sequence[float], c: float) -> FitResult:
    """Least-squares scale mapping the efficiency curve onto simulated rates."""
    if len(accs) < MIN_FIT_POINTS:
        raise ParameterError(f"{mode.value}: need at least {MIN_FIT_POINTS} points, got {len(accs)}")
    accs = np.asarray(accs, dtype=np.float64)
    rates = np.asarray(rates, dtype=np.float64)
    theory = np.array([scaling_theory.efficiency_from_acceptance(mode, a, c) for a in accs])
    scale = float(theory @ rates / (theory @ theory))
    rel_dev = np.abs(scale * theory - rates) / rates
    return FitResult(
        mode=mode,
        scale=scale,
        max_rel_dev=float(rel_dev.max()),
        argmax_acc_sim=float(accs[int(np.argmax(rates))]),
        argmax_acc_theory=scaling_theory.optimize(mode, c).acc_opt,
        c_effective=c,
        n_points=len(accs),
    )


def _fit_points(rows: Sequence[SweepRow], mode: Mode) -> Tuple[List[float], List[float]]:
    accs, rates = [], []
    for row in rows:
        if Mode.parse(row.mode) is not mode or not row.ok:
            continue
        acc = row.edge_acc if not math.isnan(row.edge_acc) else row.empirical_acc
        if not 0.0 < acc < 1.0 or not row.rate_per_million > 0:
            continue
        accs.append(acc)
        rates.append(row.rate_per_million)
    return accs, rates


def cmd_fit(sim_csv: Path, c_effective: Union[str, float, None], out: Optional[Path]) -> List[FitResult]:
    """Fit one scale constant per mode and report deviations and argmax locations."""
    rows = ResultStorage(Path(sim_csv)).read_sweep()
    c = resolve_c_effective(c_effective, rows)
    modes = [m for m in (Mode.REVERSIBLE, Mode.NONREVERSIBLE)
             if any(Mode.parse(r.mode) is m for r in rows)]
    if not modes:
        raise ParameterError(f"{sim_csv} holds no sweep rows")
    fits = [fit_curve(mode, *_fit_points(rows, mode), c) for mode in modes]

    print(f"fit of {sim_csv} (c_effective = {c:.6g})")
    for fit in fits:
        print(f"  {fit.mode.value:<15} scale={fit.scale:.6g}  max_rel_dev={fit.max_rel_dev:.4f}"
              f"  argmax_acc sim={fit.argmax_acc_sim:.4f} theory={fit.argmax_acc_theory:.4f}")
    if len(fits) == 2:
        print(f"  scale ratio (nonreversible / reversible): {fits[1].scale / fits[0].scale:.4f}")
    if out is not None:
        ResultStorage(Path(out)).write_fits(fits)
    return fits
