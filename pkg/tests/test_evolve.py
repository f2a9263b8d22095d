"""
Unit tests for the interferometer evolution module
"""

import pytest
import sys
import json
import math
from pathlib import Path

import numpy as np

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from src.evolve import (
    Beamsplitter, Circuit, ModeSwap, PhaseShifter, UnitaryMatrix, amplitude, amplitude_oracle,
    circuit_to_unitary, enumerate_events, event_count, load_unitary_or_circuit,
    naive_permanent, output_amplitudes, ryser_permanent, substitute
)
from src.exceptions import ConfigError, DimensionError, NotUnitaryError
from src.fock import AmplitudePolynomial, AncillaSpec, BellIndex, input_polynomial
from src.optimizer import haar_unitary


def bell_analyzer() -> UnitaryMatrix:
    """Two balanced beamsplitters mixing the H rails and the V rails"""
    return circuit_to_unitary(Circuit([Beamsplitter(0, 2, math.pi / 4),
                                       Beamsplitter(1, 3, math.pi / 4)], 4))


class TestUnitaryMatrix:
    """Test UnitaryMatrix class"""

    def test_identity(self):
        """Test identity is unitary and validated"""
        u = UnitaryMatrix.identity(3)

        assert u.n == 3
        assert u.validated
        assert u.unitarity_error() == 0.0

    def test_non_unitary_rejected(self):
        """Test a non-unitary matrix raises"""
        with pytest.raises(NotUnitaryError):
            UnitaryMatrix([[1.0, 0.1], [0.0, 1.0]])

    def test_non_square_rejected(self):
        """Test a non-square matrix raises"""
        with pytest.raises(DimensionError):
            UnitaryMatrix(np.ones((2, 3)))

    def test_unvalidated_construction(self):
        """Test validation can be skipped for optimizer iterates"""
        u = UnitaryMatrix([[2.0, 0.0], [0.0, 1.0]], validate=False)

        assert not u.validated

    def test_matrix_is_read_only(self):
        """Test stored entries cannot be modified"""
        u = UnitaryMatrix.identity(2)

        with pytest.raises(ValueError):
            u.matrix[0, 0] = 2.0

    def test_dict_round_trip(self):
        """Test to_dict / from_dict preserve the entries"""
        u = haar_unitary(4, np.random.default_rng(3))
        restored = UnitaryMatrix.from_dict(json.loads(json.dumps(u.to_dict())))

        np.testing.assert_allclose(restored.matrix, u.matrix, atol=1e-15)
        assert restored.fingerprint() == u.fingerprint()

    def test_from_dict_malformed(self):
        """Test malformed descriptions raise config errors"""
        with pytest.raises(ConfigError):
            UnitaryMatrix.from_dict({'n': 2, 're': [[1, 0], [0, 1]]})
        with pytest.raises(DimensionError):
            UnitaryMatrix.from_dict({'n': 3, 're': [[1, 0], [0, 1]], 'im': [[0, 0], [0, 0]]})

    def test_polarization_preserving(self):
        """Test H and V rails stay separate in the standard analyzer"""
        assert bell_analyzer().is_polarization_preserving()
        assert not circuit_to_unitary(Circuit([Beamsplitter(0, 1, 0.3)], 4)).is_polarization_preserving()


class TestCircuit:
    """Test Circuit parsing and composition"""

    def test_beamsplitter_matrix(self):
        """Test the rotation convention on rows (i, j)"""
        m = Beamsplitter(0, 1, math.pi / 4).matrix(2)
        s = 1 / math.sqrt(2)

        np.testing.assert_allclose(m, [[s, -s], [s, s]])

    def test_elements_compose_in_order(self):
        """Test a phase then a swap moves the phase to the other column"""
        u = circuit_to_unitary(Circuit([PhaseShifter(0, math.pi / 2), ModeSwap(0, 1)], 2))

        np.testing.assert_allclose(u.matrix, [[0, 1j], [1, 0]], atol=1e-15)

    def test_from_dict(self):
        """Test parsing every element type"""
        circuit = Circuit.from_dict({'n': 4, 'elements': [
            {'type': 'beamsplitter', 'modes': [0, 2], 'theta': 0.5},
            {'type': 'phase', 'mode': 3, 'phi': 1.0},
            {'type': 'swap', 'modes': [1, 2]},
        ]})

        assert len(circuit.elements) == 3
        assert Circuit.from_dict(circuit.to_dict()).elements == circuit.elements

    def test_unknown_element(self):
        """Test unknown element types raise config errors"""
        with pytest.raises(ConfigError):
            Circuit.from_dict({'n': 2, 'elements': [{'type': 'mirror', 'modes': [0, 1]}]})

    def test_mode_out_of_range(self):
        """Test elements outside 0..n-1 raise dimension errors"""
        with pytest.raises(DimensionError):
            circuit_to_unitary(Circuit([Beamsplitter(0, 4, 0.1)], 4))
        with pytest.raises(DimensionError):
            circuit_to_unitary(Circuit([Beamsplitter(1, 1, 0.1)], 4))

    def test_load_files(self, tmp_path):
        """Test loading unitary and circuit files"""
        circuit_file = tmp_path / "circuit.json"
        circuit_file.write_text(json.dumps({'n': 4, 'elements': [
            {'type': 'beamsplitter', 'modes': [0, 2], 'theta': math.pi / 4},
            {'type': 'beamsplitter', 'modes': [1, 3], 'theta': math.pi / 4},
        ]}))
        unitary_file = tmp_path / "unitary.json"
        unitary_file.write_text(json.dumps(bell_analyzer().to_dict()))

        from_circuit = load_unitary_or_circuit(str(circuit_file))
        from_matrix = load_unitary_or_circuit(str(unitary_file))

        np.testing.assert_allclose(from_circuit.matrix, from_matrix.matrix, atol=1e-15)

    def test_load_malformed_file(self, tmp_path):
        """Test unparsable files raise config errors"""
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")

        with pytest.raises(ConfigError):
            load_unitary_or_circuit(str(bad))


class TestSubstitution:
    """Test polynomial substitution and amplitudes"""

    def test_identity_keeps_polynomial(self):
        """Test U = I leaves the input unchanged"""
        p = input_polynomial(BellIndex.PSI_MINUS, AncillaSpec('single_photons', 1))
        out = substitute(p, UnitaryMatrix.identity(5))

        assert set(out) == set(p)
        for key in p:
            assert out.coefficient(key) == pytest.approx(p.coefficient(key))

    def test_hong_ou_mandel(self):
        """Test two photons on a balanced beamsplitter never exit separately"""
        u = circuit_to_unitary(Circuit([Beamsplitter(0, 1, math.pi / 4)], 2))
        p = AmplitudePolynomial(2, {(1, 1): 1.0})

        assert abs(amplitude(u, p, (1, 1))) < 1e-15
        assert abs(amplitude(u, p, (2, 0))) ** 2 == pytest.approx(0.5)
        assert abs(amplitude(u, p, (0, 2))) ** 2 == pytest.approx(0.5)

    def test_dimension_mismatch(self):
        """Test polynomial and unitary must agree on n"""
        p = input_polynomial(BellIndex.PHI_PLUS, AncillaSpec('vacuum'))

        with pytest.raises(DimensionError):
            substitute(p, UnitaryMatrix.identity(5))

    def test_photon_mismatch(self):
        """Test events with the wrong photon number are rejected"""
        p = input_polynomial(BellIndex.PHI_PLUS, AncillaSpec('vacuum'))

        with pytest.raises(DimensionError):
            amplitude(UnitaryMatrix.identity(4), p, (1, 1, 1, 0))

    def test_output_probabilities_sum_to_one(self):
        """Test unitary evolution preserves the norm"""
        u = haar_unitary(6, np.random.default_rng(11))
        p = input_polynomial(BellIndex.PSI_PLUS, AncillaSpec('single_photons', 2))
        probabilities = [abs(a) ** 2 for a in output_amplitudes(u, p).values()]

        assert sum(probabilities) == pytest.approx(1.0, abs=1e-10)

    def test_column_permutation_moves_events(self):
        """Test permuting the columns of U permutes the output modes of every amplitude"""
        u = haar_unitary(5, np.random.default_rng(12))
        perm = [3, 0, 4, 1, 2]
        v = UnitaryMatrix(u.matrix[:, perm])
        p = input_polynomial(BellIndex.PSI_PLUS, AncillaSpec('single_photons', 1))

        for event in enumerate_events(5, 3):
            moved = [0] * 5
            for j, m in enumerate(event):
                moved[perm[j]] = m
            assert amplitude(v, p, event) == pytest.approx(amplitude(u, p, tuple(moved)), abs=1e-12)

    def test_bell_analyzer_events(self):
        """Test the two-beamsplitter analyzer distinguishes the Ψ states only"""
        u = bell_analyzer()
        psi_plus = input_polynomial(BellIndex.PSI_PLUS, AncillaSpec('vacuum'))
        psi_minus = input_polynomial(BellIndex.PSI_MINUS, AncillaSpec('vacuum'))
        phi_plus = input_polynomial(BellIndex.PHI_PLUS, AncillaSpec('vacuum'))

        plus_events = {e for e, a in output_amplitudes(u, psi_plus).items() if abs(a) > 1e-12}
        minus_events = {e for e, a in output_amplitudes(u, psi_minus).items() if abs(a) > 1e-12}

        assert plus_events.isdisjoint(minus_events)
        assert abs(amplitude(u, phi_plus, (2, 0, 0, 0))) ** 2 == pytest.approx(0.25)


class TestPermanents:
    """Test the permanent-based oracle"""

    def test_ryser_matches_naive(self):
        """Test Ryser's formula against direct expansion"""
        rng = np.random.default_rng(0)
        for size in range(1, 6):
            m = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
            assert ryser_permanent(m) == pytest.approx(naive_permanent(m), abs=1e-10)

    def test_known_permanents(self):
        """Test per(all-ones 3x3) = 3! and the empty permanent"""
        assert ryser_permanent(np.ones((3, 3))) == pytest.approx(6.0)
        assert naive_permanent(np.zeros((0, 0))) == 1.0

    def test_ryser_size_limit(self):
        """Test oversized permanents are refused"""
        with pytest.raises(DimensionError):
            ryser_permanent(np.ones((13, 13)))

    @pytest.mark.parametrize("spec, n", [
        (AncillaSpec('vacuum'), 4),
        (AncillaSpec('single_photons', 1), 6),
        (AncillaSpec('single_photons', 2), 6),
        (AncillaSpec('bell_pairs', 1), 8),
    ])
    def test_oracle_equivalence(self, spec, n):
        """Test substitution amplitudes equal permanent amplitudes on 20 Haar unitaries"""
        rng = np.random.default_rng(2024)
        for _ in range(20):
            u = haar_unitary(n, rng)
            beta = BellIndex(int(rng.integers(4)))
            p = input_polynomial(beta, spec, n)
            expanded = output_amplitudes(u, p)
            for event in enumerate_events(n, p.degree):
                expected = amplitude_oracle(u, p, event)
                assert abs(expanded.get(event, 0j) - expected) < 1e-12


class TestEvents:
    """Test event enumeration"""

    def test_counts(self):
        """Test event counts for the standard configurations"""
        assert len(enumerate_events(4, 2)) == 10
        assert event_count(4, 2) == 10
        assert 4 * event_count(8, 4) == 1320
        assert len(enumerate_events(8, 4)) == event_count(8, 4)

    def test_order_and_uniqueness(self):
        """Test descending lexicographic order without repeats"""
        events = enumerate_events(3, 2)

        assert events[0] == (2, 0, 0)
        assert events[-1] == (0, 0, 2)
        assert events == sorted(set(events), reverse=True)

    def test_invalid_arguments(self):
        """Test invalid sizes raise"""
        with pytest.raises(DimensionError):
            enumerate_events(0, 2)
        with pytest.raises(DimensionError):
            enumerate_events(3, -1)
