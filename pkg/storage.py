"""Result files and configuration."""
import csv
import json
import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

from sim_data.models import FitResult, ParameterError, SweepRow

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ("acc", "eff_reversible", "eff_nonreversible", "ratio")
FIT_COLUMNS = ("mode", "scale", "max_rel_dev", "argmax_acc_sim", "argmax_acc_theory", "c_effective", "n_points")


class CsvFormatError(ValueError):
    """Raised when a results CSV cannot be parsed."""


def format_value(value) -> str:
    """Serialise one CSV cell; floats keep 17 significant digits."""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.17g}"
    return str(value)


class ResultStorage:
    """Writes and reads the CSV files produced by the harness."""

    def __init__(self, output_path: Path):
        """Initialize with the target file."""
        self.output_path = Path(output_path)

    def _open_for_write(self):
        try:
            self.output_path.parent.mkdir(parents=True, exist_ok=True)
            return open(self.output_path, "w", encoding="utf-8", newline="")
        except OSError as e:
            raise OSError(f"cannot write {self.output_path}: {e}") from e

    def write_rows(self, columns: Sequence[str], rows: Iterable[Dict]) -> Path:
        """Write a header row and one line per record."""
        with self._open_for_write() as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([format_value(row[name]) for name in columns])
        logger.debug("wrote %s", self.output_path)
        return self.output_path

    def write_sweep(self, rows: Sequence[SweepRow]) -> Path:
        """Save sweep rows in point order."""
        ordered = sorted(rows, key=lambda r: r.point)
        return self.write_rows(SweepRow.COLUMNS, (r.to_dict() for r in ordered))

    def write_fits(self, fits: Sequence[FitResult]) -> Path:
        """Save one line per fitted mode."""
        return self.write_rows(FIT_COLUMNS, (f.to_dict() for f in fits))

    def read_records(self, required: Sequence[str]) -> List[Dict[str, str]]:
        """Load a CSV as dictionaries, checking that the required columns exist."""
        if not self.output_path.exists():
            raise CsvFormatError(f"{self.output_path} does not exist")
        with open(self.output_path, "r", encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f)
            header = reader.fieldnames or []
            missing = [name for name in required if name not in header]
            if missing:
                raise CsvFormatError(f"{self.output_path} lacks columns: {', '.join(missing)}")
            return list(reader)

    def read_sweep(self) -> List[SweepRow]:
        """Load sweep rows written by write_sweep."""
        required = ("mode", "target_acc", "empirical_acc", "n_levels", "round_trips",
                    "iterations", "rate_per_million", "oracle_rate_per_million")
        records = self.read_records(required)
        try:
            return [SweepRow.from_dict(record) for record in records]
        except (KeyError, ValueError) as e:
            raise CsvFormatError(f"malformed row in {self.output_path}: {e}") from e

    def write_plot_script(self, csv_path: Path, optima: Dict[str, float]) -> Path:
        """Write a standalone matplotlib script drawing the efficiency curves of csv_path."""
        lines = [
            '"""Plot efficiency curves written by `main.py curves`."""',
            "import csv",
            "import matplotlib.pyplot as plt",
            "",
            f"CSV_PATH = {str(csv_path)!r}",
            f"OPTIMA = {optima!r}",
            "",
            "with open(CSV_PATH, newline='') as f:",
            "    rows = list(csv.DictReader(f))",
            "acc = [float(r['acc']) for r in rows]",
            "fig, ax = plt.subplots()",
            "ax.plot(acc, [float(r['eff_nonreversible']) for r in rows], color='green', label='non-reversible')",
            "ax.plot(acc, [float(r['eff_reversible']) for r in rows], color='blue', label='reversible')",
            "ax.axvline(OPTIMA['acc_reversible'], color='blue', linestyle='--')",
            "ax.axvline(OPTIMA['acc_nonreversible'], color='green', linestyle='--')",
            "ax.axhline(OPTIMA['eff_reversible'], color='blue', linestyle='--')",
            "ax.axhline(OPTIMA['eff_nonreversible'], color='green', linestyle='--')",
            "ax.set_xlabel('acceptance rate')",
            "ax.set_ylabel('efficiency')",
            "ax.legend()",
            f"fig.savefig({str(Path(csv_path).with_suffix('.png'))!r}, dpi=150)",
            "",
        ]
        with self._open_for_write() as f:
            f.write("\n".join(lines))
        return self.output_path


class ConfigManager:
    """Key/value configuration read from a JSON file."""

    def __init__(self, config_file: Optional[Path] = None, required: bool = False):
        """Load config_file, or the built-in defaults when there is none."""
        self.config_file = Path(config_file) if config_file else None
        self._config = self._get_default_config()
        self.load(required)

    def load(self, required: bool = False):
        """Overlay the file's values on the defaults."""
        if self.config_file is None or not self.config_file.exists():
            if required:
                raise ParameterError(f"config file not found: {self.config_file}")
            return
        try:
            with open(self.config_file, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ParameterError(f"cannot read config {self.config_file}: {e}") from e
        if not isinstance(data, dict):
            raise ParameterError(f"config {self.config_file} must hold a JSON object")
        unknown = sorted(set(data) - set(self._config))
        if unknown:
            logger.warning("ignoring unknown config keys: %s", ", ".join(unknown))
        self._config.update({k: v for k, v in data.items() if k in self._config})

    def get(self, key: str, default=None):
        """Get a config value."""
        return self._config.get(key, default)

    def merged(self, overrides: Dict) -> Dict:
        """Config values with every non-None override applied on top."""
        values = dict(self._config)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return values

    def _get_default_config(self) -> dict:
        """Get default configuration."""
        return {
            "A": 0.25,
            "B": 0.25,
            "C": 0.5,
            "steps": 1_000_000,
            "replicates": 100,
            "method": "endpoint",
            "blocks": 1_000_000,
            "profile": None,
            "c": 1.0,
            "grid_size": 99,
            "d": 100,
            "beta_min": 0.1,
            "iterations": 20_000_000,
            "mode": "both",
            "grid": None,
            "seed": 0,
            "out": None,
            "workers": None,
        }
