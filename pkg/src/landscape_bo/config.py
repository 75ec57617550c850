"""Experiment configuration (TOML) and JSON-lines run-record persistence.

Config grammar, all keys optional except ``functions``::

    functions = [1, 8, 16, 21]
    instances = [1, 2]
    dims = [2]
    seeds = 10              # count (0..9) or an explicit list
    schedules = ["static_ei", "ee50"]   # default: all seven
    parallelism = 4
    output_dir = "runs"

    [budget]
    doe_size = 20           # default 10 * dim
    surrogate_evals = 40

    [gp]
    restarts = 3

    [af_optimizer]
    n_candidates = 1000

``LBO_OUTPUT_DIR`` and ``LBO_PARALLELISM`` override the matching keys.
"""

from __future__ import annotations

import glob
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .acquisition import SCHEDULE_IDS
from .bbob import SUITE
from .engine import AfOptimizerConfig, BudgetConfig, RunRecord
from .gp import GpConfig

RECORDS_FILE = "runs.jsonl"
FAILURES_FILE = "failures.jsonl"
PART_PATTERN = "part-*.jsonl"


@dataclass
class ExperimentConfig:
    functions: List[int]
    instances: List[int] = field(default_factory=lambda: [1])
    dims: List[int] = field(default_factory=lambda: [5])
    seeds: List[int] = field(default_factory=lambda: [0])
    schedules: List[str] = field(default_factory=lambda: list(SCHEDULE_IDS))
    doe_size: Optional[int] = None  # None -> 10 * dim
    surrogate_evals: int = 100
    gp: GpConfig = field(default_factory=GpConfig)
    af_optimizer: AfOptimizerConfig = field(default_factory=AfOptimizerConfig)
    parallelism: int = 1
    output_dir: str = "runs"
    split_seed: int = 0

    def __post_init__(self):
        for name in ("functions", "instances", "dims", "seeds", "schedules"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        bad = [f for f in self.functions if f not in SUITE]
        if bad:
            raise ValueError(f"unknown function ids {bad}")
        bad = [s for s in self.schedules if s not in SCHEDULE_IDS]
        if bad:
            raise ValueError(f"unknown schedule ids {bad}")
        if any(d < 2 for d in self.dims):
            raise ValueError("dims must be >= 2")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        # keep schedules in canonical order
        self.schedules = [s for s in SCHEDULE_IDS if s in self.schedules]

    def budget(self, dim: int) -> BudgetConfig:
        doe = self.doe_size if self.doe_size is not None else 10 * dim
        return BudgetConfig(doe, self.surrogate_evals)

    def matrix(self) -> Iterator[Tuple[int, int, int, int, str]]:
        for f in self.functions:
            for i in self.instances:
                for d in self.dims:
                    for s in self.seeds:
                        for sid in self.schedules:
                            yield (f, i, d, s, sid)

    @classmethod
    def from_dict(cls, d: Dict, env: Optional[Dict[str, str]] = None) -> "ExperimentConfig":
        d = dict(d)
        env = os.environ if env is None else env
        seeds = d.pop("seeds", 1)
        seeds = list(range(int(seeds))) if isinstance(seeds, int) else [int(s) for s in seeds]
        budget = d.pop("budget", {}) or {}
        cfg = dict(
            functions=[int(v) for v in d.pop("functions")],
            instances=[int(v) for v in d.pop("instances", [1])],
            dims=[int(v) for v in d.pop("dims", [5])],
            seeds=seeds,
            schedules=list(d.pop("schedules", SCHEDULE_IDS)),
            doe_size=budget.get("doe_size"),
            surrogate_evals=int(budget.get("surrogate_evals", 100)),
            gp=GpConfig.from_dict(d.pop("gp", {})),
            af_optimizer=AfOptimizerConfig.from_dict(d.pop("af_optimizer", {})),
            parallelism=int(env.get("LBO_PARALLELISM", d.pop("parallelism", 1))),
            output_dir=str(env.get("LBO_OUTPUT_DIR", d.pop("output_dir", "runs"))),
            split_seed=int(d.pop("split_seed", 0)),
        )
        d.pop("parallelism", None)
        d.pop("output_dir", None)
        if d:
            raise ValueError(f"unknown config keys {sorted(d)}")
        return cls(**cfg)

    @classmethod
    def load(cls, path, env: Optional[Dict[str, str]] = None) -> "ExperimentConfig":
        with open(path, "rb") as fh:
            return cls.from_dict(tomllib.load(fh), env)


# ---------------------------------------------------------------------------
# records


def ensure_writable(directory) -> Path:
    """Create ``directory`` if needed and prove it is writable; raises OSError."""
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    probe = path / ".write-probe"
    with open(probe, "w") as fh:
        fh.write("ok")
    probe.unlink()
    return path


def append_record(path, record: RunRecord) -> None:
    with open(path, "a") as fh:
        fh.write(json.dumps(record.to_dict(), allow_nan=True) + "\n")


def _record_files(directory) -> List[Path]:
    d = Path(directory)
    if d.is_file():
        return [d]
    files = [d / RECORDS_FILE] + sorted(Path(p) for p in glob.glob(str(d / PART_PATTERN)))
    return [f for f in files if f.exists()]


def read_records(directory) -> List[RunRecord]:
    """All records in a run directory (merged file plus any unmerged worker parts).

    A truncated trailing line (interrupted write) is ignored.
    """
    out: Dict[Tuple, RunRecord] = {}
    for f in _record_files(directory):
        with open(f) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = RunRecord.from_dict(json.loads(line))
                except json.JSONDecodeError:
                    continue
                out.setdefault(rec.key, rec)
    return [out[k] for k in sorted(out)]


def completed_keys(directory) -> set:
    return {r.key for r in read_records(directory)}


def merge_parts(directory) -> int:
    """Fold worker part files into the main records file (sorted, de-duplicated)."""
    d = Path(directory)
    records = read_records(d)
    tmp = d / (RECORDS_FILE + ".tmp")
    with open(tmp, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), allow_nan=True) + "\n")
    os.replace(tmp, d / RECORDS_FILE)
    for p in glob.glob(str(d / PART_PATTERN)):
        os.remove(p)
    return len(records)


def read_failures(directory) -> List[Dict]:
    path = Path(directory) / FAILURES_FILE
    if not path.exists():
        return []
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_failure(directory, key: Sequence, error: str) -> None:
    with open(Path(directory) / FAILURES_FILE, "a") as fh:
        fh.write(json.dumps({"key": list(key), "error": error}) + "\n")

