"""Value types for the lifted chain, scaling theory and tempering simulations."""
import math
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Dict, List, Optional, Tuple


SUM_TOLERANCE = 1e-12

PLUS = 1
MINUS = -1


class ParameterError(ValueError):
    """Raised when a domain value violates its invariants."""


class SingularSystemError(ValueError):
    """Raised when a first-passage linear system cannot be solved."""


class UnimodalityError(ValueError):
    """Raised when an objective has more than one interior turn on its bracket."""


class Mode(Enum):
    """Temperature-move dynamics."""
    REVERSIBLE = "reversible"
    NONREVERSIBLE = "nonreversible"

    @property
    def short_name(self) -> str:
        """CLI spelling (rev / nonrev)."""
        return "rev" if self is Mode.REVERSIBLE else "nonrev"

    @classmethod
    def parse(cls, value) -> "Mode":
        """Accept a Mode, its value, or the CLI short names."""
        if isinstance(value, Mode):
            return value
        text = str(value).strip().lower()
        aliases = {
            "rev": cls.REVERSIBLE,
            "reversible": cls.REVERSIBLE,
            "nonrev": cls.NONREVERSIBLE,
            "nonreversible": cls.NONREVERSIBLE,
            "non-reversible": cls.NONREVERSIBLE,
        }
        if text not in aliases:
            raise ParameterError(f"Unknown mode {value!r}; expected rev or nonrev")
        return aliases[text]


def _check_direction(value: int, name: str = "dir"):
    if value not in (PLUS, MINUS):
        raise ParameterError(f"{name} must be +1 or -1, got {value!r}")


def _check_probability(value: float, name: str, open_interval: bool = True):
    if not isinstance(value, (int, float)) or math.isnan(value):
        raise ParameterError(f"{name} must be a number, got {value!r}")
    if open_interval and not 0.0 < value < 1.0:
        raise ParameterError(f"{name} must lie in (0, 1), got {value}")
    if not open_interval and not 0.0 <= value <= 1.0:
        raise ParameterError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class ChainParams:
    """Transition probabilities of the double birth-death chain.

    A moves along the current row (right on +, left on -), B moves against it,
    C flips the row. A sum within SUM_TOLERANCE of 1 is renormalised.
    """
    A: float
    B: float
    C: float

    def __post_init__(self):
        for name in ("A", "B", "C"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParameterError(f"{name} must be a finite number, got {value!r}")
        if self.A < 0 or self.B < 0:
            raise ParameterError(f"A and B must be non-negative, got A={self.A}, B={self.B}")
        if self.C <= 0:
            raise ParameterError(f"C must be positive, got C={self.C}")
        total = self.A + self.B + self.C
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise ParameterError(f"A + B + C must equal 1, got {total!r}")
        object.__setattr__(self, "A", float(self.A) / total)
        object.__setattr__(self, "B", float(self.B) / total)
        object.__setattr__(self, "C", float(self.C) / total)

    @property
    def forward_share(self) -> float:
        """P(+1) of a single in-row increment, A/(1-C)."""
        moving = self.A + self.B
        return self.A / moving if moving > 0 else 1.0

    def to_dict(self) -> Dict:
        """Convert to dictionary for saving."""
        return {"A": self.A, "B": self.B, "C": self.C}

    @classmethod
    def from_dict(cls, data: Dict) -> "ChainParams":
        """Create from dictionary."""
        return cls(A=data["A"], B=data["B"], C=data["C"])


@dataclass(frozen=True)
class LiftedWalkerState:
    """Lattice position plus the row (direction) bit."""
    x: int = 0
    dir: int = PLUS

    def __post_init__(self):
        _check_direction(self.dir)


@dataclass(frozen=True)
class RegenerativeBlock:
    """Displacement and duration of one + -> - -> + cycle."""
    dx: int
    dt: int

    def __post_init__(self):
        if self.dt < 2:
            raise ParameterError(f"a block lasts at least 2 steps, got dt={self.dt}")


@dataclass(frozen=True)
class BlockMoments:
    """Closed-form moments of a regenerative block."""
    mean_dt: float
    mean_dx: float
    var_dx: float


@dataclass(frozen=True)
class VolatilityEstimate:
    """Monte Carlo estimate of the limiting volatility.

    For method="regenerative", replicates counts blocks and
    steps_per_replicate is the total number of chain steps they span.
    """
    v_hat: float
    std_err: float
    replicates: int
    steps_per_replicate: int
    method: str = "endpoint"

    def within(self, target: float, sigmas: float = 4.0) -> bool:
        """True if target lies within `sigmas` standard errors of v_hat."""
        return abs(self.v_hat - target) <= sigmas * self.std_err

    def to_dict(self) -> Dict:
        """Convert to dictionary for saving."""
        return asdict(self)


@dataclass(frozen=True)
class ScalingProblem:
    """Acceptance law 2*Phi(-c*ell/2) under one of the two move dynamics."""
    c: float
    mode: Mode = Mode.REVERSIBLE

    def __post_init__(self):
        if not self.c > 0 or not math.isfinite(self.c):
            raise ParameterError(f"c must be positive and finite, got {self.c}")
        object.__setattr__(self, "mode", Mode.parse(self.mode))


@dataclass(frozen=True)
class OptimalScaling:
    """Maximiser of an efficiency curve."""
    ell_opt: float
    acc_opt: float
    eff_opt: float

    def __post_init__(self):
        if not self.ell_opt > 0:
            raise ParameterError(f"ell_opt must be positive, got {self.ell_opt}")
        _check_probability(self.acc_opt, "acc_opt")

    def to_dict(self) -> Dict:
        """Convert to dictionary for saving."""
        return asdict(self)


@dataclass(frozen=True)
class EfficiencyPoint:
    """One point of an efficiency curve."""
    ell: float
    acc: float
    eff: float


@dataclass(frozen=True)
class ModeComparison:
    """Both optima for one c, with their ratios."""
    reversible: OptimalScaling
    nonreversible: OptimalScaling

    @property
    def efficiency_ratio(self) -> float:
        return self.nonreversible.eff_opt / self.reversible.eff_opt

    @property
    def scaling_ratio(self) -> float:
        return self.nonreversible.ell_opt / self.reversible.ell_opt


@dataclass(frozen=True)
class Ladder:
    """Inverse temperatures 1 = beta_0 > beta_1 > ... > beta_N > 0."""
    betas: Tuple[float, ...]

    def __post_init__(self):
        betas = tuple(float(b) for b in self.betas)
        if len(betas) < 2:
            raise ParameterError("a ladder needs at least two levels")
        if betas[0] != 1.0:
            raise ParameterError(f"the first inverse temperature must be 1, got {betas[0]}")
        if betas[-1] <= 0:
            raise ParameterError(f"inverse temperatures must be positive, got {betas[-1]}")
        if any(b1 >= b0 for b0, b1 in zip(betas, betas[1:])):
            raise ParameterError("inverse temperatures must be strictly decreasing")
        object.__setattr__(self, "betas", betas)

    @property
    def top(self) -> int:
        """Index N of the hottest level."""
        return len(self.betas) - 1

    @property
    def n_levels(self) -> int:
        return len(self.betas)

    @property
    def ratios(self) -> List[float]:
        """Adjacent ratios beta_{k+1} / beta_k."""
        return [b1 / b0 for b0, b1 in zip(self.betas, self.betas[1:])]


@dataclass(frozen=True)
class TemperConfig:
    """One simulated-tempering run on the d-dimensional standard normal target."""
    d: int
    ladder: Ladder
    mode: Mode
    iterations: int
    seed: int
    initial_dir: int = PLUS
    count_round_trips: bool = True

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ParameterError(f"d must be a positive integer, got {self.d}")
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ParameterError(f"iterations must be a positive integer, got {self.iterations}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ParameterError(f"seed must be a non-negative integer, got {self.seed}")
        _check_direction(self.initial_dir, "initial_dir")
        object.__setattr__(self, "mode", Mode.parse(self.mode))


@dataclass
class TemperState:
    """Current level, direction bit and squared norm S of the point."""
    level: int
    dir: int
    s: float

    def check(self, ladder: Ladder):
        """Validate against a ladder."""
        if not 0 <= self.level <= ladder.top:
            raise ParameterError(f"level {self.level} outside [0, {ladder.top}]")
        _check_direction(self.dir)
        if not self.s > 0:
            raise ParameterError(f"s must be positive, got {self.s}")


@dataclass(frozen=True)
class RoundTripStats:
    """Counters of one tempering run.

    empirical_acc counts boundary auto-rejections as proposals; edge_acc
    only counts proposals that stay on the ladder.
    """
    round_trips: int
    iterations: int
    proposals: int
    acceptances: int
    boundary_proposals: int = 0
    level_visits: Tuple[int, ...] = ()
    up_moves: Tuple[int, ...] = ()
    down_moves: Tuple[int, ...] = ()

    @property
    def rate_per_million(self) -> float:
        return self.round_trips / (self.iterations / 1e6)

    @property
    def empirical_acc(self) -> float:
        return self.acceptances / self.proposals if self.proposals else 0.0

    @property
    def edge_acc(self) -> float:
        in_range = self.proposals - self.boundary_proposals
        return self.acceptances / in_range if in_range else 0.0

    @property
    def occupancy(self) -> List[float]:
        return [v / self.iterations for v in self.level_visits]


@dataclass(frozen=True)
class EdgeAcceptances:
    """Expected acceptance of each adjacent move: up[k] for k -> k+1, down[k] for k+1 -> k."""
    up: Tuple[float, ...]
    down: Tuple[float, ...]

    def __post_init__(self):
        up = tuple(float(a) for a in self.up)
        down = tuple(float(b) for b in self.down)
        if not up or len(up) != len(down):
            raise ParameterError("up and down need the same, non-zero number of edges")
        for a in up + down:
            if math.isnan(a) or not 0.0 <= a <= 1.0:
                raise ParameterError(f"edge acceptances must lie in [0, 1], got {a}")
        object.__setattr__(self, "up", up)
        object.__setattr__(self, "down", down)

    @property
    def top(self) -> int:
        return len(self.up)

    @classmethod
    def uniform(cls, a: float, n_edges: int) -> "EdgeAcceptances":
        """Every edge accepted with probability a in both directions."""
        return cls(up=(a,) * n_edges, down=(a,) * n_edges)

    def mean(self) -> float:
        return (sum(self.up) + sum(self.down)) / (2 * self.top)


@dataclass(frozen=True)
class RoundTripRate:
    """Expected round-trip cycle length and its inverse.

    initial_cycle_steps is the first round trip from (0, +); the renewal
    cycle starts where the previous one ended.
    """
    expected_cycle_steps: float
    rate_per_step: float
    initial_cycle_steps: float

    @classmethod
    def from_cycle(cls, cycle_steps: float, initial_cycle_steps: Optional[float] = None) -> "RoundTripRate":
        if not cycle_steps > 0:
            raise SingularSystemError(f"non-positive expected cycle length {cycle_steps}")
        if initial_cycle_steps is None:
            initial_cycle_steps = cycle_steps
        return cls(cycle_steps, 1.0 / cycle_steps, initial_cycle_steps)

    @property
    def rate_per_million(self) -> float:
        return self.rate_per_step * 1e6


DEFAULT_ACCEPTANCE_GRID = tuple(round(0.05 + i * (0.90 / 19), 12) for i in range(20))


@dataclass
class SweepConfig:
    """Acceptance-grid sweep over both move dynamics."""
    d: int = 100
    beta_min: float = 0.1
    acceptance_grid: Tuple[float, ...] = DEFAULT_ACCEPTANCE_GRID
    iterations_per_point: int = 20_000_000
    modes: Tuple[Mode, ...] = (Mode.REVERSIBLE, Mode.NONREVERSIBLE)
    seed: int = 0
    output_path: str = "sweep.csv"

    def __post_init__(self):
        self.acceptance_grid = tuple(float(a) for a in self.acceptance_grid)
        self.modes = tuple(Mode.parse(m) for m in self.modes)
        if not self.acceptance_grid:
            raise ParameterError("the acceptance grid is empty")
        for a in self.acceptance_grid:
            _check_probability(a, "grid value")
        if any(a1 <= a0 for a0, a1 in zip(self.acceptance_grid, self.acceptance_grid[1:])):
            raise ParameterError("the acceptance grid must be strictly increasing")
        if self.iterations_per_point < 100_000:
            raise ParameterError(f"iterations_per_point must be at least 1e5, got {self.iterations_per_point}")
        if not 0.0 < self.beta_min < 1.0:
            raise ParameterError(f"beta_min must lie in (0, 1), got {self.beta_min}")
        if int(self.d) != self.d or self.d < 1:
            raise ParameterError(f"d must be a positive integer, got {self.d}")
        if not self.modes:
            raise ParameterError("at least one mode is required")
        if self.seed < 0:
            raise ParameterError(f"seed must be non-negative, got {self.seed}")

    def points(self) -> List[Tuple[int, Mode, float]]:
        """(point index, mode, target acceptance) in a fixed order."""
        pairs = [(mode, acc) for mode in self.modes for acc in self.acceptance_grid]
        return [(i, mode, acc) for i, (mode, acc) in enumerate(pairs)]


@dataclass
class SweepRow:
    """One line of a sweep CSV."""
    mode: str
    target_acc: float
    empirical_acc: float = math.nan
    n_levels: int = 0
    round_trips: int = 0
    iterations: int = 0
    rate_per_million: float = math.nan
    oracle_rate_per_million: float = math.nan
    edge_acc: float = math.nan
    d: int = 0
    beta_min: float = math.nan
    seed: int = 0
    point: int = 0
    error: str = ""

    COLUMNS = (
        "mode", "target_acc", "empirical_acc", "n_levels", "round_trips",
        "iterations", "rate_per_million", "oracle_rate_per_million",
        "edge_acc", "d", "beta_min", "seed", "point", "error",
    )

    def to_dict(self) -> Dict:
        """Convert to dictionary for saving."""
        return {name: getattr(self, name) for name in self.COLUMNS}

    @classmethod
    def from_dict(cls, data: Dict) -> "SweepRow":
        """Create from a CSV record (all values as strings)."""
        floats = ("target_acc", "empirical_acc", "rate_per_million",
                  "oracle_rate_per_million", "edge_acc", "beta_min")
        ints = ("n_levels", "round_trips", "iterations", "d", "seed", "point")
        kwargs = {"mode": data["mode"], "error": data.get("error", "") or ""}
        for name in floats:
            raw = data.get(name, "")
            kwargs[name] = float(raw) if raw not in ("", None) else math.nan
        for name in ints:
            raw = data.get(name, "")
            kwargs[name] = int(raw) if raw not in ("", None) else 0
        return cls(**kwargs)

    @property
    def ok(self) -> bool:
        return not self.error


@dataclass(frozen=True)
class FitResult:
    """Single-constant fit of an efficiency curve to simulated round-trip rates."""
    mode: Mode
    scale: float
    max_rel_dev: float
    argmax_acc_sim: float
    argmax_acc_theory: float
    c_effective: float = 1.0
    n_points: int = 0

    def to_dict(self) -> Dict:
        """Convert to dictionary for saving."""
        data = asdict(self)
        data["mode"] = self.mode.value
        return data


@dataclass
class VolatilityReport:
    """Result of the volatility command."""
    params: ChainParams
    theoretical: float
    estimate: VolatilityEstimate
    sigmas: float = 4.0
    profile: List[Tuple[float, float]] = field(default_factory=list)
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = self.estimate.within(self.theoretical, self.sigmas)
