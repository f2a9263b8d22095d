"""
Run Records Module
Persists optimization runs as JSON Lines and campaign summaries as JSON
"""

import json
import logging
import math
from collections import Counter
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from src.evolve import UnitaryMatrix

logger = logging.getLogger(__name__)

HISTOGRAM_BIN = 1e-6


class RunRecord:
    """Outcome of one local optimization"""

    def __init__(self, run_index: int, seed: int, start_hash: str, unitary: Dict[str, Any],
                 f: float, p_succ: float, pattern: List[float], iterations: int,
                 converged: bool, wall_time: float, constraint_violation: float = 0.0,
                 message: str = '', ancilla: Optional[str] = None, n: Optional[int] = None):
        """
        Initialize a run record

        Args:
            run_index: Position of the run within its campaign
            seed: Master seed the run's stream was derived from
            start_hash: Fingerprint of the Haar start unitary
            unitary: Final unitary in {"n", "re", "im"} form
            f: Figure of merit at the final unitary
            p_succ: Success probability recomputed at the final unitary
            pattern: Per-Bell-state success probabilities
            iterations: Optimizer iterations used
            converged: Whether the optimizer reported success within tolerance
            wall_time: Seconds spent in the run
            constraint_violation: Orthonormality violation before projection
            message: Optimizer status message
            ancilla: Key of the campaign's ancilla
            n: Mode count of the campaign
        """
        self.run_index = run_index
        self.seed = seed
        self.start_hash = start_hash
        self.unitary = unitary
        self.f = f
        self.p_succ = p_succ
        self.pattern = list(pattern)
        self.iterations = iterations
        self.converged = converged
        self.wall_time = wall_time
        self.constraint_violation = constraint_violation
        self.message = message
        self.ancilla = ancilla
        self.n = n

    def final_unitary(self) -> UnitaryMatrix:
        return UnitaryMatrix.from_dict(self.unitary)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'run_index': self.run_index,
            'seed': self.seed,
            'start_hash': self.start_hash,
            'unitary': self.unitary,
            'f': self.f,
            'p_succ': self.p_succ,
            'pattern': self.pattern,
            'iterations': self.iterations,
            'converged': self.converged,
            'wall_time': self.wall_time,
            'constraint_violation': self.constraint_violation,
            'message': self.message,
            'ancilla': self.ancilla,
            'n': self.n,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunRecord':
        return cls(
            run_index=int(data['run_index']),
            seed=int(data['seed']),
            start_hash=str(data['start_hash']),
            unitary=data['unitary'],
            f=float(data['f']),
            p_succ=float(data['p_succ']),
            pattern=[float(v) for v in data['pattern']],
            iterations=int(data['iterations']),
            converged=bool(data['converged']),
            wall_time=float(data['wall_time']),
            constraint_violation=float(data.get('constraint_violation', 0.0)),
            message=str(data.get('message', '')),
            ancilla=data.get('ancilla'),
            n=data.get('n'),
        )


def append_record(record: RunRecord, filepath: str):
    """Append one record as a single JSON line and flush"""
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, 'a', encoding='utf-8') as f:
        f.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
        f.flush()


def read_records(filepath: str) -> Tuple[List[RunRecord], int]:
    """
    Load run records from a JSON Lines file

    Args:
        filepath: Campaign records file

    Returns:
        (records, number of corrupt lines skipped)
    """
    records: List[RunRecord] = []
    skipped = 0
    filepath = Path(filepath)
    if not filepath.exists():
        return records, skipped

    with open(filepath, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(RunRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                skipped += 1
                logger.warning(f"Skipping corrupt record at {filepath}:{line_number}: {e}")
    return records, skipped


def histogram(values: List[float], bin_width: float = HISTOGRAM_BIN) -> Dict[str, int]:
    """Counts of values binned at ``bin_width``, keyed by the bin centre"""
    decimals = max(0, -math.floor(math.log10(bin_width)))
    counts = Counter(int(round(v / bin_width)) for v in values)
    return {f"{index * bin_width:.{decimals}f}": counts[index] for index in sorted(counts, reverse=True)}


class CampaignSummary:
    """Aggregate of a campaign's run records"""

    def __init__(self, ancilla: Dict[str, Any], label: str, n: int, k: int,
                 master_seed: int, optimizer: Dict[str, Any],
                 plan: Optional[Dict[str, int]] = None):
        self.ancilla = ancilla
        self.label = label
        self.n = n
        self.k = k
        self.master_seed = master_seed
        self.optimizer = optimizer
        self.plan = plan or {}
        self.records: List[RunRecord] = []
        self.created_at = datetime.now()

    def add(self, record: RunRecord):
        self.records.append(record)

    @property
    def runs(self) -> int:
        return len(self.records)

    def converged_records(self) -> List[RunRecord]:
        return [r for r in self.records if r.converged]

    def best_record(self) -> Optional[RunRecord]:
        """Converged run with the largest P_succ (lowest index on ties)"""
        candidates = self.converged_records()
        if not candidates:
            return None
        return max(sorted(candidates, key=lambda r: r.run_index), key=lambda r: r.p_succ)

    @property
    def best_p_succ(self) -> Optional[float]:
        best = self.best_record()
        return best.p_succ if best else None

    def histogram(self) -> Dict[str, int]:
        return histogram([r.p_succ for r in self.converged_records()])

    def to_dict(self) -> Dict[str, Any]:
        best = self.best_record()
        return {
            'ancilla': self.ancilla,
            'label': self.label,
            'n': self.n,
            'k': self.k,
            'master_seed': self.master_seed,
            'optimizer': self.optimizer,
            'plan': self.plan,
            'runs': self.runs,
            'converged_runs': len(self.converged_records()),
            'histogram': self.histogram(),
            'best': None if best is None else {
                'run_index': best.run_index,
                'p_succ': best.p_succ,
                'f': best.f,
                'pattern': best.pattern,
            },
            'per_run_f': [r.f for r in sorted(self.records, key=lambda r: r.run_index)],
            # excluded from determinism comparisons
            'timing': {
                'created_at': self.created_at.isoformat(),
                'wall_time_total': sum(r.wall_time for r in self.records),
            },
        }

    def save_to_json(self, filepath: str) -> str:
        """
        Save the summary to a JSON file

        Args:
            filepath: Output path

        Returns:
            Path to saved file
        """
        filepath = Path(filepath)
        filepath.parent.mkdir(parents=True, exist_ok=True)
        with open(filepath, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True, ensure_ascii=False)
            f.write("\n")
        logger.info(f"Campaign summary saved to {filepath}")
        return str(filepath)


def load_summary(filepath: str) -> Dict[str, Any]:
    """Read a summary JSON document"""
    with open(filepath, 'r', encoding='utf-8') as f:
        return json.load(f)


def summary_path(records_path: str) -> Path:
    """Summary file that accompanies a records file: runs.jsonl -> runs.summary.json"""
    path = Path(records_path)
    return path.with_name(path.stem + '.summary.json')
