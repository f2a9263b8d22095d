"""
Report Module
Builds comparison rows from campaign files against bounds and literature values,
and renders them as a terminal table, plain text or JSON
"""

import json
import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from rich.console import Console
from rich.table import Table

from src.bounds import (DEFAULT_MAX_ROTATION_PAIRS, generic_upper_bound, pair_count,
                        photon_number_bound, polarization_profile, best_rotated_bound)
from src.exceptions import BellMeasurementError, ConfigError
from src.fock import AncillaSpec
from src.records import load_summary, read_records, summary_path
from src.utils import snap_rational

logger = logging.getLogger(__name__)

VIOLATION_TOLERANCE = 1e-7

# Best known explicit schemes, as published. Entries marked 'smaller ancilla'
# reach the value by ignoring part of the ancilla.
LITERATURE_VALUES: Dict[str, Tuple[Fraction, str]] = {
    'vacuum': (Fraction(1, 2), 'linear optics without ancilla'),
    'single_photons-1': (Fraction(1, 2), 'smaller ancilla'),
    'single_photons-2': (Fraction(5, 8), 'two single photons'),
    'single_photons-3': (Fraction(5, 8), 'smaller ancilla'),
    'single_photons-4': (Fraction(3, 4), 'four single photons'),
    'single_photons-6': (Fraction(3, 4), 'smaller ancilla'),
    'single_photons-8': (Fraction(49, 64), 'eight single photons'),
    'single_photons-12': (Fraction(25, 32), 'twelve single photons'),
    'bell_pairs-1': (Fraction(3, 4), 'one extra Bell pair'),
    'bell_pairs-2': (Fraction(3, 4), 'smaller ancilla'),
    'bell_pairs-3': (Fraction(3, 4), 'smaller ancilla'),
    'w3': (Fraction(7, 12), 'measure-and-reuse construction'),
    'evl-1': (Fraction(3, 4), 'four single photons'),
    'evl-2': (Fraction(25, 32), 'twelve single photons'),
}


def literature_value(spec: AncillaSpec) -> Optional[Tuple[Fraction, str]]:
    """
    Best known analytical success probability for an ancilla

    Args:
        spec: Ancilla description

    Returns:
        (value, note) or None when no explicit scheme is known
    """
    if spec.key in LITERATURE_VALUES:
        return LITERATURE_VALUES[spec.key]
    if spec.family == 'ghz':
        return Fraction(3, 4), 'measure GHZ down to one Bell pair'
    if spec.family == 'grice':
        return 1 - Fraction(1, 2 ** (spec.parameter + 1)), f"grice iteration {spec.parameter}"
    return None


@dataclass
class ReportRow:
    """One campaign compared against bounds and the literature"""

    label: str
    ancilla_key: str
    n: int
    k: int
    runs: int
    converged_runs: int
    best_raw: Optional[float]
    best_snapped: Optional[str]
    literature: Optional[Fraction]
    literature_note: str
    generic_bound: Optional[Fraction]
    photon_bound: Fraction
    corrupt_lines: int = 0
    source: str = ''

    @property
    def violations(self) -> List[str]:
        """Names of the bounds the raw optimum exceeds beyond tolerance"""
        if self.best_raw is None:
            return []
        found = []
        if self.generic_bound is not None and self.best_raw > float(self.generic_bound) + VIOLATION_TOLERANCE:
            found.append('generic')
        if self.best_raw > float(self.photon_bound) + VIOLATION_TOLERANCE:
            found.append('photon')
        return found

    @property
    def flagged(self) -> bool:
        return bool(self.violations)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'label': self.label,
            'ancilla': self.ancilla_key,
            'n': self.n,
            'k': self.k,
            'runs': self.runs,
            'converged_runs': self.converged_runs,
            'best_raw': self.best_raw,
            'best_snapped': self.best_snapped,
            'literature': None if self.literature is None else str(self.literature),
            'literature_note': self.literature_note,
            'generic_bound': None if self.generic_bound is None else str(self.generic_bound),
            'photon_bound': str(self.photon_bound),
            'corrupt_lines': self.corrupt_lines,
            'violations': self.violations,
            'source': self.source,
        }


def campaign_bound(spec: AncillaSpec,
                   max_pairs: int = DEFAULT_MAX_ROTATION_PAIRS) -> Optional[Fraction]:
    """Rotated generic bound, or the unrotated one when too many pairs to enumerate"""
    try:
        if pair_count(spec) <= max_pairs:
            value, _ = best_rotated_bound(spec, max_pairs)
        else:
            logger.info(f"{spec.key}: {pair_count(spec)} pairs, reporting the unrotated bound")
            value = generic_upper_bound(polarization_profile(spec))
    except BellMeasurementError as e:
        logger.warning(f"No generic bound for {spec.key}: {e}")
        return None
    return value if isinstance(value, Fraction) else snap_rational(value, 1 << 16, 1e-12)


def _resolve(path: Path) -> Tuple[Path, Optional[Path]]:
    """(summary file, records file or None) for a summary or records path"""
    if path.suffix == '.jsonl':
        return summary_path(str(path)), path
    records = path.with_name(path.name.replace('.summary.json', '.jsonl'))
    return path, (records if records != path and records.exists() else None)


def build_row(path: str, snap_denominator: int = 64, snap_tolerance: float = 1e-7,
              max_pairs: int = DEFAULT_MAX_ROTATION_PAIRS) -> ReportRow:
    """
    Build the report row of one campaign

    Args:
        path: Campaign summary (``*.summary.json``) or records (``*.jsonl``) file
        snap_denominator: Largest denominator for the snapped best value
        snap_tolerance: Snapping tolerance
        max_pairs: Rotation enumeration guard for the generic bound

    Returns:
        ReportRow; when a records file is available the best value is recomputed from it

    Raises:
        ConfigError: when the campaign summary is missing or malformed
    """
    summary_file, records_file = _resolve(Path(path))
    if not summary_file.exists():
        raise ConfigError(f"No campaign summary found for {path} (expected {summary_file})")
    try:
        summary = load_summary(str(summary_file))
        spec = AncillaSpec.from_dict(summary['ancilla'])
        n = int(summary['n'])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Malformed campaign summary {summary_file}: {e}") from e

    corrupt = 0
    if records_file is not None:
        records, corrupt = read_records(str(records_file))
        if corrupt:
            logger.warning(f"{records_file}: {corrupt} corrupt line(s) skipped")
        converged = [r for r in records if r.converged]
        runs = len(records)
        best = max((r.p_succ for r in converged), default=None)
        converged_runs = len(converged)
    else:
        runs = int(summary.get('runs', 0))
        converged_runs = int(summary.get('converged_runs', 0))
        best = (summary.get('best') or {}).get('p_succ')

    snapped = None
    if best is not None:
        fraction = snap_rational(best, snap_denominator, snap_tolerance)
        snapped = str(fraction) if fraction is not None else None

    literature = literature_value(spec)
    row = ReportRow(
        label=spec.label,
        ancilla_key=spec.key,
        n=n,
        k=spec.photon_count,
        runs=runs,
        converged_runs=converged_runs,
        best_raw=best,
        best_snapped=snapped,
        literature=literature[0] if literature else None,
        literature_note=literature[1] if literature else '',
        generic_bound=campaign_bound(spec, max_pairs),
        photon_bound=photon_number_bound(spec.photon_count),
        corrupt_lines=corrupt,
        source=str(path),
    )
    if row.flagged:
        logger.warning(f"{spec.key} n={n}: best {best} exceeds the {', '.join(row.violations)} bound")
    return row


def build_report(paths: Sequence[str], **kwargs) -> List[ReportRow]:
    """One row per campaign file, in the given order"""
    return [build_row(p, **kwargs) for p in paths]


def _cell(value: Any) -> str:
    if value is None:
        return '-'
    if isinstance(value, float):
        return f"{value:.9f}"
    return str(value)


COLUMNS = ('State', 'n', 'k', 'Runs', 'Best P_succ', 'Snapped', 'Literature', 'Bound', 'Bound(k)', 'Flag')


def _row_cells(row: ReportRow) -> List[str]:
    return [
        row.label,
        str(row.n),
        str(row.k),
        f"{row.converged_runs}/{row.runs}",
        _cell(row.best_raw),
        _cell(row.best_snapped),
        _cell(row.literature),
        _cell(row.generic_bound),
        _cell(row.photon_bound),
        'VIOLATION' if row.flagged else '',
    ]


def render_table(rows: Sequence[ReportRow]) -> Table:
    """Rich table of the rows; literature values are labelled as such"""
    table = Table(title="Bell measurement campaigns (literature = best published scheme)")
    for column in COLUMNS:
        table.add_column(column, justify='left' if column in ('State', 'Flag') else 'right')
    for row in rows:
        table.add_row(*_row_cells(row), style='bold red' if row.flagged else None)
    return table


def print_table(rows: Sequence[ReportRow], console: Optional[Console] = None):
    (console or Console()).print(render_table(rows))


def render_text(rows: Sequence[ReportRow]) -> str:
    """Fixed-width plain-text table"""
    cells = [list(COLUMNS)] + [_row_cells(r) for r in rows]
    widths = [max(len(line[i]) for line in cells) for i in range(len(COLUMNS))]
    lines = []
    for index, line in enumerate(cells):
        lines.append('  '.join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip())
        if index == 0:
            lines.append('-' * len(lines[0]))
    corrupt = sum(r.corrupt_lines for r in rows)
    if corrupt:
        lines.append(f"{corrupt} corrupt record line(s) skipped")
    lines.append("Literature: best published analytical value for the same ancilla.")
    return "\n".join(lines) + "\n"


def render_json(rows: Sequence[ReportRow]) -> str:
    document = {
        'rows': [r.to_dict() for r in rows],
        'flagged': sum(1 for r in rows if r.flagged),
        'corrupt_lines': sum(r.corrupt_lines for r in rows),
    }
    return json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
