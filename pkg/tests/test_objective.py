"""
Unit tests for the objective module
"""

import pytest
import sys
import math
from pathlib import Path

import numpy as np

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from src.compiler import compile_plan, evaluate
from src.evolve import Beamsplitter, Circuit, UnitaryMatrix, circuit_to_unitary, enumerate_events
from src.exceptions import DimensionError
from src.fock import AncillaSpec
from src.objective import (
    DiscriminationPattern, ProbabilityTable, figure_of_merit, figure_of_merit_gradient,
    pattern, snapped_value, success_probability
)
from src.optimizer import haar_unitary


@pytest.fixture(scope="module")
def vacuum_plan():
    return compile_plan(AncillaSpec('vacuum'), 4)


def analyzer() -> UnitaryMatrix:
    return circuit_to_unitary(Circuit([Beamsplitter(0, 2, math.pi / 4),
                                       Beamsplitter(1, 3, math.pi / 4)], 4))


class TestProbabilityTable:
    """Test ProbabilityTable class"""

    def test_shape_checked(self):
        """Test the table must be 4 x N"""
        with pytest.raises(DimensionError):
            ProbabilityTable(np.zeros((3, 2)), [(1, 1), (2, 0)])

    def test_round_off_clamped(self):
        """Test tiny negative values are clamped to zero"""
        table = ProbabilityTable(np.array([[1.0], [-1e-17], [0.0], [0.0]]), [(1,)])

        assert table.values.min() == 0.0

    def test_values_read_only(self):
        """Test stored values cannot be modified"""
        table = ProbabilityTable(np.eye(4), enumerate_events(2, 3))

        with pytest.raises(ValueError):
            table.values[0, 0] = 0.5

    def test_discriminating_mask(self):
        """Test an event is discriminating when exactly one row is nonzero"""
        values = np.array([
            [0.5, 0.5, 0.0],
            [0.5, 0.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, 0.0],
        ])
        table = ProbabilityTable(values, [(2, 0), (1, 1), (0, 2)])

        assert table.discriminating().tolist() == [False, True, True]
        listing = table.discriminating_events()
        assert [entry['bell'] for entry in listing] == ['Φ⁺', 'Ψ⁺']


class TestSuccessProbability:
    """Test success probability and figure of merit"""

    def test_standard_analyzer(self, vacuum_plan):
        """Test the two-beamsplitter analyzer reaches 1/2 with f = -2"""
        table = evaluate(vacuum_plan, analyzer())

        assert success_probability(table) == pytest.approx(0.5)
        assert figure_of_merit(table) == pytest.approx(-2.0)
        assert pattern(table).sorted() == pytest.approx((1.0, 1.0, 0.0, 0.0))

    def test_identity_fails(self, vacuum_plan):
        """Test U = I discriminates nothing"""
        table = evaluate(vacuum_plan, UnitaryMatrix.identity(4))

        assert success_probability(table) == 0.0

    def test_bounded(self, vacuum_plan):
        """Test 0 <= P_succ <= 1/2 on random unitaries without ancilla"""
        rng = np.random.default_rng(4)
        for _ in range(20):
            p = success_probability(evaluate(vacuum_plan, haar_unitary(4, rng)))
            assert 0.0 <= p <= 0.5 + 1e-9

    def test_output_permutation_and_global_phase(self, vacuum_plan):
        """Test f and P_succ ignore a relabelling of output modes and a global phase"""
        u = haar_unitary(4, np.random.default_rng(21)).matrix
        table = evaluate(vacuum_plan, UnitaryMatrix(u))
        reference_f = figure_of_merit(table)
        reference_p = success_probability(table)

        for variant in (u[:, [2, 0, 3, 1]], np.exp(0.7j) * u, np.exp(-1.3j) * u[:, [1, 0, 3, 2]]):
            other = evaluate(vacuum_plan, UnitaryMatrix(variant))
            assert figure_of_merit(other) == pytest.approx(reference_f, abs=1e-12)
            assert success_probability(other) == pytest.approx(reference_p, abs=1e-12)

    def test_threshold_monotone(self, vacuum_plan):
        """Test lowering eps_zero never raises P_succ on a fixed table"""
        rng = np.random.default_rng(8)
        for _ in range(10):
            table = evaluate(vacuum_plan, haar_unitary(4, rng))
            values = [success_probability(table.with_threshold(eps)) for eps in (1e-3, 1e-6, 1e-9, 0.0)]
            assert all(a >= b - 1e-15 for a, b in zip(values, values[1:]))

    def test_figure_of_merit_bounds(self):
        """Test -4 <= f <= 0 and f = -4 for a perfect measurement"""
        perfect = ProbabilityTable(np.eye(4), enumerate_events(2, 3))

        assert figure_of_merit(perfect) == pytest.approx(-4.0)
        assert success_probability(perfect) == pytest.approx(1.0)

    def test_gradient_ties_use_first_state(self):
        """Test the maximum's gradient comes from the first tied Bell state"""
        table = ProbabilityTable(np.full((4, 1), 0.25), [(1,)])
        gradient = np.zeros((4, 1, 2))
        gradient[0, 0] = [1.0, 0.0]
        gradient[1, 0] = [0.0, 1.0]

        np.testing.assert_allclose(figure_of_merit_gradient(table, gradient), [-1.0, 1.0])


class TestDiscriminationPattern:
    """Test DiscriminationPattern class"""

    def test_mean_equals_success(self, vacuum_plan):
        """Test the pattern mean equals P_succ"""
        rng = np.random.default_rng(12)
        table = evaluate(vacuum_plan, haar_unitary(4, rng))

        assert pattern(table).mean == pytest.approx(success_probability(table))

    def test_snapped(self):
        """Test sorted rational display"""
        p = DiscriminationPattern((0.25, 1.0, 0.25 + 1e-9, 1.0 - 2e-10))

        assert p.snapped() == ('1', '1', '1/4', '1/4')
        assert p.to_dict()['PHI_PLUS'] == 0.25

    def test_snapped_value(self):
        """Test rational snapping of success probabilities"""
        assert snapped_value(0.6250000001) == '5/8'
        assert snapped_value(0.5785508) is None
