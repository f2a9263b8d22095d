"""
Evolution Module
Pushes input polynomials through an interferometer, enumerates detection events
and cross-checks amplitudes against a permanent-based oracle
"""

import hashlib
import itertools
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import comb

from src.exceptions import ConfigError, DimensionError, NotUnitaryError
from src.fock import AmplitudePolynomial, OccupationVector, monomial_normalization

logger = logging.getLogger(__name__)

DEFAULT_UNITARY_TOLERANCE = 1e-9
RYSER_MAX_SIZE = 12


class UnitaryMatrix:
    """
    An n x n complex matrix with a_i = sum_j u_ij c_j.

    Rows are input modes and columns output modes. ``validated`` is set once
    the matrix has passed the unitarity check at ``tolerance``.
    """

    def __init__(self, matrix: Union[np.ndarray, Sequence[Sequence[complex]]],
                 validate: bool = True, tolerance: float = DEFAULT_UNITARY_TOLERANCE):
        array = np.array(matrix, dtype=complex)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise DimensionError(f"Unitary must be square, got shape {array.shape}")
        array.setflags(write=False)
        self._matrix = array
        self.tolerance = tolerance
        self.validated = False
        if validate:
            self.validate(tolerance)

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def n(self) -> int:
        return self._matrix.shape[0]

    def unitarity_error(self) -> float:
        """max |U^dagger U - I| over all entries"""
        gram = self._matrix.conj().T @ self._matrix
        return float(np.max(np.abs(gram - np.eye(self.n))))

    def validate(self, tolerance: Optional[float] = None) -> 'UnitaryMatrix':
        tolerance = self.tolerance if tolerance is None else tolerance
        error = self.unitarity_error()
        if error > tolerance:
            raise NotUnitaryError(
                f"Matrix deviates from unitarity by {error:.3e} (tolerance {tolerance:.1e})"
            )
        self.validated = True
        return self

    def fingerprint(self) -> str:
        """Short hash of the entries, stable across processes"""
        rounded = np.round(self._matrix, 12) + 0.0
        return hashlib.sha1(rounded.tobytes()).hexdigest()[:16]

    def is_polarization_preserving(self, tolerance: float = 1e-7) -> bool:
        """True when no entry couples an H rail (even index) to a V rail (odd index)"""
        parity = np.arange(self.n) % 2
        mixed = parity[:, None] != parity[None, :]
        return bool(np.all(np.abs(self._matrix[mixed]) <= tolerance))

    @classmethod
    def identity(cls, n: int) -> 'UnitaryMatrix':
        return cls(np.eye(n, dtype=complex))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n': self.n,
            're': self._matrix.real.tolist(),
            'im': self._matrix.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any],
                  tolerance: float = DEFAULT_UNITARY_TOLERANCE) -> 'UnitaryMatrix':
        """Build from {"n", "re", "im"}; raises ConfigError on malformed input"""
        try:
            n = int(data['n'])
            real = np.array(data['re'], dtype=float)
            imag = np.array(data['im'], dtype=float)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"Malformed unitary description: {e}") from e
        if real.shape != (n, n) or imag.shape != (n, n):
            raise DimensionError(f"Unitary entries do not match n={n}")
        return cls(real + 1j * imag, validate=True, tolerance=tolerance)

    def __repr__(self) -> str:
        return f"UnitaryMatrix(n={self.n}, validated={self.validated})"


@dataclass(frozen=True)
class Beamsplitter:
    """Real rotation [[cos, -sin], [sin, cos]] on rows (i, j)"""

    i: int
    j: int
    theta: float

    def modes(self) -> Tuple[int, ...]:
        return (self.i, self.j)

    def matrix(self, n: int) -> np.ndarray:
        element = np.eye(n, dtype=complex)
        c, s = math.cos(self.theta), math.sin(self.theta)
        element[self.i, self.i], element[self.i, self.j] = c, -s
        element[self.j, self.i], element[self.j, self.j] = s, c
        return element

    def to_dict(self) -> Dict[str, Any]:
        return {'type': 'beamsplitter', 'modes': [self.i, self.j], 'theta': self.theta}


@dataclass(frozen=True)
class PhaseShifter:
    i: int
    phi: float

    def modes(self) -> Tuple[int, ...]:
        return (self.i,)

    def matrix(self, n: int) -> np.ndarray:
        element = np.eye(n, dtype=complex)
        element[self.i, self.i] = np.exp(1j * self.phi)
        return element

    def to_dict(self) -> Dict[str, Any]:
        return {'type': 'phase', 'mode': self.i, 'phi': self.phi}


@dataclass(frozen=True)
class ModeSwap:
    i: int
    j: int

    def modes(self) -> Tuple[int, ...]:
        return (self.i, self.j)

    def matrix(self, n: int) -> np.ndarray:
        element = np.eye(n, dtype=complex)
        element[[self.i, self.j]] = element[[self.j, self.i]]
        return element

    def to_dict(self) -> Dict[str, Any]:
        return {'type': 'swap', 'modes': [self.i, self.j]}


CircuitElement = Union[Beamsplitter, PhaseShifter, ModeSwap]


@dataclass
class Circuit:
    """Ordered list of optical elements; mode indices are 0-based"""

    elements: List[CircuitElement]
    n: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {'n': self.n, 'elements': [element.to_dict() for element in self.elements]}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'Circuit':
        """
        Parse a circuit description

        Args:
            data: {"n": n, "elements": [{"type": "beamsplitter", "modes": [i, j], "theta": t}, ...]}

        Returns:
            Circuit
        """
        elements: List[CircuitElement] = []
        for entry in data.get('elements', []):
            try:
                kind = entry['type']
                if kind == 'beamsplitter':
                    i, j = entry['modes']
                    elements.append(Beamsplitter(int(i), int(j), float(entry['theta'])))
                elif kind == 'phase':
                    elements.append(PhaseShifter(int(entry['mode']), float(entry['phi'])))
                elif kind == 'swap':
                    i, j = entry['modes']
                    elements.append(ModeSwap(int(i), int(j)))
                else:
                    raise ConfigError(f"Unknown circuit element type: {kind}")
            except (KeyError, TypeError, ValueError) as e:
                raise ConfigError(f"Malformed circuit element {entry!r}") from e
        n = data.get('n')
        return cls(elements, int(n) if n is not None else None)


def circuit_to_unitary(circuit: Circuit, n: Optional[int] = None) -> UnitaryMatrix:
    """
    Multiply the element unitaries in application order

    Args:
        circuit: Elements applied from first to last
        n: Mode count (defaults to the circuit's own)

    Returns:
        Validated UnitaryMatrix

    Raises:
        DimensionError: if an element addresses a mode outside 0..n-1
    """
    n = circuit.n if n is None else n
    if n is None or n < 1:
        raise DimensionError("Circuit mode count is not set")
    unitary = np.eye(n, dtype=complex)
    for element in circuit.elements:
        modes = element.modes()
        if any(m < 0 or m >= n for m in modes):
            raise DimensionError(f"Element {element} addresses a mode outside 0..{n - 1}")
        if len(set(modes)) != len(modes):
            raise DimensionError(f"Element {element} repeats a mode")
        # a -> U b and b -> E c compose to a -> (U E) c
        unitary = unitary @ element.matrix(n)
    return UnitaryMatrix(unitary)


def load_unitary_or_circuit(path: str, n: Optional[int] = None) -> UnitaryMatrix:
    """Read a unitary ({"re", "im"}) or circuit ({"elements"}) JSON file"""
    with open(Path(path), 'r', encoding='utf-8') as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Cannot parse {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a JSON object")
    if 'elements' in data:
        return circuit_to_unitary(Circuit.from_dict(data), n)
    return UnitaryMatrix.from_dict(data)


def _multiply(left: Dict[OccupationVector, complex],
              right: Dict[OccupationVector, complex]) -> Dict[OccupationVector, complex]:
    product: Dict[OccupationVector, complex] = {}
    for k1, c1 in left.items():
        for k2, c2 in right.items():
            key = tuple(a + b for a, b in zip(k1, k2))
            product[key] = product.get(key, 0j) + c1 * c2
    return product


def substitute(polynomial: AmplitudePolynomial, unitary: UnitaryMatrix) -> AmplitudePolynomial:
    """
    Replace every a_i by sum_j u_ij c_j and collect

    Args:
        polynomial: Input polynomial on U.n modes
        unitary: Interferometer

    Returns:
        Output polynomial P_out of the same degree
    """
    n = unitary.n
    if polynomial.n != n:
        raise DimensionError(f"Polynomial has {polynomial.n} modes, unitary has {n}")

    matrix = unitary.matrix
    rows = [
        {tuple(int(c == j) for c in range(n)): matrix[i, j] for j in range(n) if matrix[i, j] != 0}
        for i in range(n)
    ]
    powers: Dict[Tuple[int, int], Dict[OccupationVector, complex]] = {}

    def row_power(i: int, m: int) -> Dict[OccupationVector, complex]:
        if (i, m) not in powers:
            powers[(i, m)] = rows[i] if m == 1 else _multiply(row_power(i, m - 1), rows[i])
        return powers[(i, m)]

    output: Dict[OccupationVector, complex] = {}
    for occupation, coefficient in polynomial.items():
        current = {(0,) * n: coefficient}
        for i, m in enumerate(occupation):
            if m:
                current = _multiply(current, row_power(i, m))
        for key, value in current.items():
            output[key] = output.get(key, 0j) + value
    return AmplitudePolynomial(n, output)


def _check_event(polynomial: AmplitudePolynomial, event: Sequence[int]):
    if len(event) != polynomial.n:
        raise DimensionError(f"Event has {len(event)} modes, polynomial has {polynomial.n}")
    if sum(event) != polynomial.degree:
        raise DimensionError(
            f"Event carries {sum(event)} photons but the input has {polynomial.degree}"
        )


def output_amplitudes(unitary: UnitaryMatrix, polynomial: AmplitudePolynomial) -> Dict[OccupationVector, complex]:
    """Physical amplitude of every event with a nonzero coefficient"""
    expanded = substitute(polynomial, unitary)
    return {e: c * monomial_normalization(e) for e, c in expanded.items()}


def amplitude(unitary: UnitaryMatrix, polynomial: AmplitudePolynomial, event: Sequence[int]) -> complex:
    """
    Physical amplitude of detection event ``event``

    Args:
        unitary: Interferometer
        polynomial: Input polynomial P_in
        event: Output occupation vector

    Returns:
        Coefficient of the event's monomial times sqrt(prod e_j!)
    """
    event = tuple(event)
    _check_event(polynomial, event)
    return substitute(polynomial, unitary).coefficient(event) * monomial_normalization(event)


def naive_permanent(matrix: np.ndarray) -> complex:
    """Permanent by direct expansion over permutations"""
    size = matrix.shape[0]
    if size == 0:
        return 1.0 + 0j
    rows = np.arange(size)
    return complex(sum(np.prod(matrix[rows, list(p)]) for p in itertools.permutations(range(size))))


def ryser_permanent(matrix: np.ndarray) -> complex:
    """Permanent by Ryser's inclusion-exclusion formula"""
    size = matrix.shape[0]
    if size == 0:
        return 1.0 + 0j
    if size > RYSER_MAX_SIZE:
        raise DimensionError(f"Permanent of a {size}x{size} matrix exceeds the oracle limit")
    masks = (np.arange(1, 2 ** size)[:, None] >> np.arange(size)) & 1
    row_sums = matrix @ masks.T
    signs = (-1.0) ** masks.sum(axis=1)
    return complex((-1) ** size * np.sum(signs * np.prod(row_sums, axis=0)))


def permanent(matrix: np.ndarray, method: str = 'ryser') -> complex:
    if method == 'naive':
        return naive_permanent(matrix)
    return ryser_permanent(matrix)


def transition_matrix(unitary: UnitaryMatrix, inputs: Sequence[int], outputs: Sequence[int]) -> np.ndarray:
    """U with row i repeated inputs[i] times and column j repeated outputs[j] times"""
    rows = np.repeat(np.arange(unitary.n), inputs)
    cols = np.repeat(np.arange(unitary.n), outputs)
    return unitary.matrix[np.ix_(rows, cols)]


def amplitude_oracle(unitary: UnitaryMatrix, polynomial: AmplitudePolynomial,
                     event: Sequence[int], method: str = 'ryser') -> complex:
    """
    Amplitude from permanents, independent of ``substitute``

    sum_m coef(m) * per(U[m, e]) / sqrt(prod e_j!)
    """
    event = tuple(event)
    _check_event(polynomial, event)
    total = 0j
    for occupation, coefficient in polynomial.items():
        total += coefficient * permanent(transition_matrix(unitary, occupation, event), method)
    return total / monomial_normalization(event)


def enumerate_events(n: int, photons: int) -> List[OccupationVector]:
    """
    All occupation vectors of length ``n`` holding ``photons`` photons

    Args:
        n: Mode count
        photons: Photon count

    Returns:
        Events in descending lexicographic order, starting at (photons, 0, ..., 0)
        and ending at (0, ..., 0, photons)
    """
    if n < 1:
        raise DimensionError(f"Need at least one mode, got {n}")
    if photons < 0:
        raise DimensionError(f"Photon count must be non-negative, got {photons}")
    events = []
    for placement in itertools.combinations_with_replacement(range(n), photons):
        occupation = [0] * n
        for mode in placement:
            occupation[mode] += 1
        events.append(tuple(occupation))
    return events


def event_count(n: int, photons: int) -> int:
    """binom(n + photons - 1, photons)"""
    return int(comb(n + photons - 1, photons, exact=True))
