"""
Unit tests for the report module
"""

import pytest
import sys
import io
import json
from fractions import Fraction
from pathlib import Path

from rich.console import Console

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from src.evolve import UnitaryMatrix
from src.exceptions import ConfigError
from src.fock import AncillaSpec
from src.records import CampaignSummary, RunRecord, append_record, summary_path
from src.report import (
    build_report, build_row, campaign_bound, literature_value, print_table, render_json, render_text
)


def write_campaign(directory, spec, n, values, corrupt=False):
    """Write a records file and its summary; values are (p_succ, converged) pairs"""
    records_path = directory / f"{spec.key}_n{n}.jsonl"
    summary = CampaignSummary(ancilla=spec.to_dict(), label=spec.label, n=n, k=spec.photon_count,
                              master_seed=0, optimizer={'seed': 0})
    for index, (p_succ, converged) in enumerate(values):
        record = RunRecord(run_index=index, seed=0, start_hash=f"h{index}",
                           unitary=UnitaryMatrix.identity(n).to_dict(), f=-4 * p_succ,
                           p_succ=p_succ, pattern=[p_succ] * 4, iterations=5,
                           converged=converged, wall_time=0.1)
        summary.add(record)
        append_record(record, str(records_path))
        if corrupt and index == 0:
            with open(records_path, 'a', encoding='utf-8') as f:
                f.write('{"run_index": 9\n')
    summary.save_to_json(str(summary_path(str(records_path))))
    return records_path


class TestLiteratureValues:
    """Test published reference values"""

    def test_table_entries(self):
        """Test values listed per ancilla"""
        assert literature_value(AncillaSpec('single_photons', 2))[0] == Fraction(5, 8)
        assert literature_value(AncillaSpec('bell_pairs', 1))[0] == Fraction(3, 4)
        assert literature_value(AncillaSpec('w3'))[0] == Fraction(7, 12)

    def test_families(self):
        """Test GHZ and iterated families"""
        assert literature_value(AncillaSpec('ghz', 4))[0] == Fraction(3, 4)
        assert literature_value(AncillaSpec('grice', 2))[0] == Fraction(7, 8)
        assert literature_value(AncillaSpec('evl', 1))[0] == Fraction(3, 4)
        assert literature_value(AncillaSpec('evl', 2))[0] == Fraction(25, 32)
        assert literature_value(AncillaSpec('evl', 3)) is None

    def test_unknown(self):
        """Test ancillae without a published scheme"""
        assert literature_value(AncillaSpec('single_photons', 5)) is None


class TestCampaignBound:
    """Test bounds attached to report rows"""

    def test_rotated(self):
        """Test the rotated bound is reported"""
        assert campaign_bound(AncillaSpec('single_photons', 2)) == Fraction(3, 4)

    def test_guard_falls_back_to_unrotated(self):
        """Test too many pairs fall back to the unrotated profile"""
        assert campaign_bound(AncillaSpec('ghz', 4), max_pairs=1) == Fraction(1, 2)

    def test_unpairable_custom(self):
        """Test an ancilla without pairs has no bound"""
        spec = AncillaSpec.from_dict({'family': 'custom', 'terms': [{'occupation': [1], 're': 1.0}]})

        assert campaign_bound(spec) is None


class TestBuildRow:
    """Test report rows from campaign files"""

    def test_row_from_records(self, tmp_path):
        """Test best value, snapping and corrupt-line count"""
        path = write_campaign(tmp_path, AncillaSpec('single_photons', 2), 6,
                              [(0.625000000004, True), (0.5, True), (0.7, False)], corrupt=True)
        row = build_row(str(path))

        assert row.runs == 3
        assert row.converged_runs == 2
        assert row.best_raw == pytest.approx(0.625)
        assert row.best_snapped == '5/8'
        assert row.literature == Fraction(5, 8)
        assert row.generic_bound == Fraction(3, 4)
        assert row.photon_bound == Fraction(3, 4)
        assert row.corrupt_lines == 1
        assert not row.flagged

    def test_row_from_summary_only(self, tmp_path):
        """Test a summary without its records file"""
        path = write_campaign(tmp_path, AncillaSpec('vacuum'), 4, [(0.5, True)])
        summary_file = summary_path(str(path))
        path.unlink()
        row = build_row(str(summary_file))

        assert row.best_raw == 0.5
        assert row.runs == 1
        assert row.corrupt_lines == 0

    def test_violation_flagged(self, tmp_path):
        """Test values above a bound are flagged, not dropped"""
        path = write_campaign(tmp_path, AncillaSpec('vacuum'), 4, [(0.6, True)])
        row = build_row(str(path))

        assert row.violations == ['generic', 'photon']
        assert row.to_dict()['violations'] == ['generic', 'photon']

    def test_within_tolerance_not_flagged(self, tmp_path):
        """Test round-off above the bound is tolerated"""
        path = write_campaign(tmp_path, AncillaSpec('vacuum'), 4, [(0.5 + 1e-9, True)])

        assert not build_row(str(path)).flagged

    def test_missing_summary(self, tmp_path):
        """Test a missing summary raises a config error"""
        with pytest.raises(ConfigError):
            build_row(str(tmp_path / "absent.jsonl"))

    def test_malformed_summary(self, tmp_path):
        """Test an unreadable summary raises a config error"""
        bad = tmp_path / "bad.summary.json"
        bad.write_text("{broken")

        with pytest.raises(ConfigError):
            build_row(str(bad))


class TestRendering:
    """Test table, text and JSON output"""

    @pytest.fixture
    def rows(self, tmp_path):
        good = write_campaign(tmp_path, AncillaSpec('bell_pairs', 1), 8, [(0.75, True)], corrupt=True)
        bad = write_campaign(tmp_path, AncillaSpec('vacuum'), 4, [(0.6, True)])
        return build_report([str(good), str(bad)])

    def test_render_text(self, rows):
        """Test plain text shows flags, corrupt lines and the literature note"""
        text = render_text(rows)

        assert 'VIOLATION' in text
        assert '3/4' in text
        assert '1 corrupt record line(s) skipped' in text
        assert 'Literature' in text

    def test_render_json(self, rows):
        """Test the JSON document"""
        document = json.loads(render_json(rows))

        assert len(document['rows']) == 2
        assert document['flagged'] == 1
        assert document['corrupt_lines'] == 1
        assert document['rows'][0]['best_snapped'] == '3/4'

    def test_print_table(self, rows):
        """Test the rich table renders every row"""
        buffer = io.StringIO()
        print_table(rows, Console(file=buffer, width=200, color_system=None))
        output = buffer.getvalue()

        assert 'VIOLATION' in output
        assert 'literature' in output

    def test_empty_report(self):
        """Test no campaigns give an empty report"""
        assert build_report([]) == []
        assert json.loads(render_json([]))['rows'] == []
        assert 'Literature' in render_text([])
