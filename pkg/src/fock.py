"""
Fock Polynomial Module
Occupation-vector polynomials over creation operators, Bell states and ancilla families
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Optional, Tuple

from src.exceptions import ConstructionError, DimensionError

logger = logging.getLogger(__name__)

OccupationVector = Tuple[int, ...]

BELL_MODES = 4
NORM_TOLERANCE = 1e-12


class BellIndex(IntEnum):
    """The four Bell states in the fixed table order (Φ⁺, Φ⁻, Ψ⁺, Ψ⁻)"""

    PHI_PLUS = 0
    PHI_MINUS = 1
    PSI_PLUS = 2
    PSI_MINUS = 3

    @property
    def label(self) -> str:
        return ('Φ⁺', 'Φ⁻', 'Ψ⁺', 'Ψ⁻')[self.value]


def occupation_photons(occupation: OccupationVector) -> int:
    """Total photon count of an occupation vector"""
    return sum(occupation)


def monomial_normalization(occupation: Iterable[int]) -> float:
    """
    Bosonic factor relating a monomial coefficient to a physical amplitude

    Args:
        occupation: Photon count per mode

    Returns:
        sqrt(prod_i k_i!)
    """
    return math.sqrt(math.prod(math.factorial(k) for k in occupation))


def monomial_weight(occupation: Iterable[int]) -> int:
    """prod_i k_i!, the squared normalization as an exact integer"""
    return math.prod(math.factorial(k) for k in occupation)


@dataclass(frozen=True)
class AmplitudePolynomial:
    """
    Polynomial in creation operators: occupation vector -> complex coefficient.

    Instances are never mutated after construction. Zero coefficients are
    dropped and every key has length ``n``.
    """

    n: int
    terms: Mapping[OccupationVector, complex] = field(default_factory=dict)

    def __post_init__(self):
        cleaned: Dict[OccupationVector, complex] = {}
        for occupation, coefficient in self.terms.items():
            occupation = tuple(int(k) for k in occupation)
            if len(occupation) != self.n:
                raise ConstructionError(
                    f"Occupation {occupation} has {len(occupation)} modes, expected {self.n}"
                )
            if any(k < 0 for k in occupation):
                raise ConstructionError(f"Negative photon count in {occupation}")
            coefficient = complex(coefficient)
            if coefficient != 0:
                cleaned[occupation] = cleaned.get(occupation, 0j) + coefficient
        object.__setattr__(self, 'terms', {k: v for k, v in cleaned.items() if v != 0})

    @classmethod
    def constant(cls, value: complex = 1.0, n: int = 0) -> 'AmplitudePolynomial':
        """The constant polynomial ``value`` on ``n`` modes"""
        return cls(n, {(0,) * n: value})

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[OccupationVector]:
        return iter(self.terms)

    def items(self):
        return self.terms.items()

    def coefficient(self, occupation: OccupationVector) -> complex:
        """Coefficient of a monomial (zero when absent)"""
        return self.terms.get(tuple(occupation), 0j)

    def degrees(self) -> List[int]:
        """Sorted distinct photon counts of the stored monomials"""
        return sorted({occupation_photons(k) for k in self.terms})

    @property
    def degree(self) -> int:
        """Photon count of a homogeneous polynomial"""
        degrees = self.degrees()
        if len(degrees) > 1:
            raise ConstructionError(f"Polynomial is not homogeneous: degrees {degrees}")
        return degrees[0] if degrees else 0

    def is_homogeneous(self) -> bool:
        return len(self.degrees()) <= 1

    def state_norm(self) -> float:
        """sum_m |coef(m)|^2 prod_i m_i!, equal to 1 for a normalized state"""
        return sum(abs(c) ** 2 * monomial_weight(k) for k, c in self.terms.items())

    def scale(self, factor: complex) -> 'AmplitudePolynomial':
        return AmplitudePolynomial(self.n, {k: c * factor for k, c in self.terms.items()})

    def add(self, other: 'AmplitudePolynomial') -> 'AmplitudePolynomial':
        if other.n != self.n:
            raise DimensionError(f"Cannot add polynomials on {self.n} and {other.n} modes")
        merged = dict(self.terms)
        for occupation, coefficient in other.terms.items():
            merged[occupation] = merged.get(occupation, 0j) + coefficient
        return AmplitudePolynomial(self.n, merged)

    def multiply(self, other: 'AmplitudePolynomial') -> 'AmplitudePolynomial':
        """Product of two polynomials on the same modes"""
        if other.n != self.n:
            raise DimensionError(f"Cannot multiply polynomials on {self.n} and {other.n} modes")
        product: Dict[OccupationVector, complex] = {}
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                key = tuple(a + b for a, b in zip(k1, k2))
                product[key] = product.get(key, 0j) + c1 * c2
        return AmplitudePolynomial(self.n, product)

    def tensor(self, other: 'AmplitudePolynomial') -> 'AmplitudePolynomial':
        """Product of polynomials on disjoint modes; ``other`` takes the modes after ours"""
        product = {
            k1 + k2: c1 * c2
            for k1, c1 in self.terms.items()
            for k2, c2 in other.terms.items()
        }
        return AmplitudePolynomial(self.n + other.n, product)

    def pad(self, n: int) -> 'AmplitudePolynomial':
        """Embed into ``n`` >= self.n modes, extra modes in vacuum"""
        if n < self.n:
            raise DimensionError(f"Cannot pad a {self.n}-mode polynomial to {n} modes")
        extra = (0,) * (n - self.n)
        return AmplitudePolynomial(n, {k + extra: c for k, c in self.terms.items()})

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n': self.n,
            'terms': [
                {'occupation': list(k), 're': c.real, 'im': c.imag}
                for k, c in sorted(self.terms.items(), reverse=True)
            ],
        }


@dataclass(frozen=True)
class ExactPolynomial:
    """
    Integer-coefficient polynomial with a common squared normalization.

    The physical coefficient of each monomial is ``terms[m] * sqrt(norm_sq)``.
    """

    n: int
    terms: Mapping[OccupationVector, int]
    norm_sq: Fraction = Fraction(1)

    def tensor(self, other: 'ExactPolynomial') -> 'ExactPolynomial':
        product = {
            k1 + k2: c1 * c2
            for k1, c1 in self.terms.items()
            for k2, c2 in other.terms.items()
        }
        return ExactPolynomial(self.n + other.n, product, self.norm_sq * other.norm_sq)

    def state_norm(self) -> Fraction:
        return self.norm_sq * sum(c * c * monomial_weight(k) for k, c in self.terms.items())

    def to_amplitude(self) -> AmplitudePolynomial:
        scale = math.sqrt(self.norm_sq)
        return AmplitudePolynomial(self.n, {k: c * scale for k, c in self.terms.items()})


VACUUM = ExactPolynomial(0, {(): 1})


def _ghz_exact(qubits: int) -> ExactPolynomial:
    """GHZ state on ``qubits`` dual-rail pairs: all-H plus all-V"""
    return ExactPolynomial(2 * qubits, {(1, 0) * qubits: 1, (0, 1) * qubits: 1}, Fraction(1, 2))


def _tensor_all(parts: Iterable[ExactPolynomial]) -> ExactPolynomial:
    result = VACUUM
    for part in parts:
        result = result.tensor(part)
    return result


FAMILIES = ('vacuum', 'single_photons', 'bell_pairs', 'ghz', 'w3', 'grice', 'evl', 'custom')
FAMILY_PARAMETER = {
    'vacuum': None,
    'single_photons': 'k',
    'bell_pairs': 'm',
    'ghz': 'k',
    'w3': None,
    'grice': 'N',
    'evl': 'N',
    'custom': None,
}


@dataclass(frozen=True)
class AncillaSpec:
    """Description of an ancillary state fed into modes 5..n"""

    family: str
    parameter: Optional[int] = None
    custom_terms: Tuple[Tuple[OccupationVector, complex], ...] = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConstructionError(f"Unknown ancilla family: {self.family}")
        needs = FAMILY_PARAMETER[self.family]
        if needs is not None:
            if not isinstance(self.parameter, int) or isinstance(self.parameter, bool):
                raise ConstructionError(f"Family {self.family} needs an integer '{needs}'")
            minimum = {'ghz': 2, 'grice': 1, 'evl': 1}.get(self.family, 0)
            if self.parameter < minimum:
                raise ConstructionError(
                    f"Family {self.family} needs {needs} >= {minimum}, got {self.parameter}"
                )
        if self.family == 'custom' and not self.custom_terms:
            raise ConstructionError("Custom ancilla needs a non-empty term list")

    @property
    def key(self) -> str:
        """Stable identifier used for caches and campaign files"""
        if self.family == 'custom':
            payload = json.dumps(self.to_dict(), sort_keys=True).encode('utf-8')
            return f"custom-{hashlib.sha1(payload).hexdigest()[:10]}"
        if self.parameter is None:
            return self.family
        return f"{self.family}-{self.parameter}"

    @property
    def label(self) -> str:
        """Human label in ket notation"""
        p = self.parameter
        return {
            'vacuum': '|0⟩',
            'single_photons': f"|1⟩^⊗{p}",
            'bell_pairs': f"|Φ⁺⟩^⊗{p}",
            'ghz': f"|GHZ_{p}⟩",
            'w3': '|W_3⟩',
            'grice': f"|ϒ_1..ϒ_{p}⟩_G",
            'evl': f"|1⟩^⊗{2 ** (p + 2) - 4}_EvL",
            'custom': 'custom',
        }[self.family]

    def exact(self) -> Optional[ExactPolynomial]:
        """Exact form for built-in families; None for custom ancillae"""
        p = self.parameter
        if self.family == 'vacuum':
            return VACUUM
        if self.family == 'single_photons':
            return ExactPolynomial(p, {(1,) * p: 1})
        if self.family == 'bell_pairs':
            pair = ExactPolynomial(4, {(1, 0, 1, 0): 1, (0, 1, 0, 1): 1}, Fraction(1, 2))
            return _tensor_all([pair] * p)
        if self.family == 'ghz':
            return _ghz_exact(p)
        if self.family == 'w3':
            return ExactPolynomial(
                6,
                {(0, 1, 1, 0, 1, 0): 1, (1, 0, 0, 1, 1, 0): 1, (1, 0, 1, 0, 0, 1): 1},
                Fraction(1, 3),
            )
        if self.family == 'grice':
            return _tensor_all(_ghz_exact(2 ** j) for j in range(1, p + 1))
        if self.family == 'evl':
            # iteration N feeds 2^(N+2) - 4 single photons
            k = 2 ** (p + 2) - 4
            return ExactPolynomial(k, {(1,) * k: 1})
        return None

    def polynomial(self) -> AmplitudePolynomial:
        exact = self.exact()
        if exact is not None:
            return exact.to_amplitude()
        n = len(self.custom_terms[0][0])
        return AmplitudePolynomial(n, dict(self.custom_terms))

    @property
    def mode_count(self) -> int:
        return self.polynomial().n

    @property
    def photon_count(self) -> int:
        return self.polynomial().degree

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {'family': self.family}
        needs = FAMILY_PARAMETER[self.family]
        if needs is not None:
            data[needs] = self.parameter
        if self.family == 'custom':
            data['terms'] = [
                {'occupation': list(k), 're': complex(c).real, 'im': complex(c).imag}
                for k, c in self.custom_terms
            ]
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'AncillaSpec':
        """
        Parse the structured description, e.g. {"family": "bell_pairs", "m": 1}

        Args:
            data: Mapping with a 'family' key and the family's parameter

        Returns:
            AncillaSpec
        """
        if not isinstance(data, Mapping) or 'family' not in data:
            raise ConstructionError("Ancilla description needs a 'family' key")
        family = data['family']
        if family not in FAMILIES:
            raise ConstructionError(f"Unknown ancilla family: {family}")
        needs = FAMILY_PARAMETER[family]
        allowed = {'family'} | ({needs} if needs else set()) | ({'terms'} if family == 'custom' else set())
        unknown = set(data) - allowed
        if unknown:
            raise ConstructionError(f"Unknown keys for family {family}: {sorted(unknown)}")
        if family == 'custom':
            terms = []
            for entry in data.get('terms') or []:
                try:
                    occupation = tuple(int(k) for k in entry['occupation'])
                    coefficient = complex(float(entry.get('re', 0.0)), float(entry.get('im', 0.0)))
                except (KeyError, TypeError, ValueError) as e:
                    raise ConstructionError(f"Malformed custom term {entry!r}") from e
                terms.append((occupation, coefficient))
            spec = cls('custom', None, tuple(terms))
            spec._check_custom()
            return spec
        return cls(family, data.get(needs) if needs else None)

    def _check_custom(self):
        lengths = {len(k) for k, _ in self.custom_terms}
        if len(lengths) != 1:
            raise ConstructionError(f"Custom terms have differing mode counts: {sorted(lengths)}")
        polynomial = self.polynomial()
        if not polynomial.is_homogeneous():
            raise ConstructionError("Custom ancilla must have a fixed photon number")
        norm = polynomial.state_norm()
        if abs(norm - 1.0) > 1e-9:
            raise ConstructionError(f"Custom ancilla is not normalized (norm {norm:.12f})")


def parse_ancilla_argument(text: str) -> AncillaSpec:
    """
    Parse a command-line ancilla argument

    Accepts either JSON (``{"family": "ghz", "k": 3}``) or the short form
    ``family[:parameter]`` (``bell_pairs:1``, ``w3``).
    """
    text = text.strip()
    if text.startswith('{'):
        try:
            return AncillaSpec.from_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise ConstructionError(f"Malformed ancilla JSON: {e}") from e
    family, _, parameter = text.partition(':')
    needs = FAMILY_PARAMETER.get(family)
    if family not in FAMILIES or family == 'custom':
        raise ConstructionError(f"Unknown ancilla family: {family}")
    if needs is None:
        return AncillaSpec(family)
    try:
        return AncillaSpec(family, int(parameter))
    except ValueError as e:
        raise ConstructionError(f"Family {family} needs an integer parameter, got {parameter!r}") from e


_BELL_TERMS = {
    BellIndex.PHI_PLUS: {(1, 0, 1, 0): 1, (0, 1, 0, 1): 1},
    BellIndex.PHI_MINUS: {(1, 0, 1, 0): 1, (0, 1, 0, 1): -1},
    BellIndex.PSI_PLUS: {(1, 0, 0, 1): 1, (0, 1, 1, 0): 1},
    BellIndex.PSI_MINUS: {(1, 0, 0, 1): 1, (0, 1, 1, 0): -1},
}


def bell_polynomial(beta: BellIndex) -> AmplitudePolynomial:
    """
    Dual-rail Bell state on modes 1-4

    Args:
        beta: Which Bell state

    Returns:
        Degree-2 polynomial with two terms of coefficient ±1/sqrt(2)
    """
    return ExactPolynomial(BELL_MODES, _BELL_TERMS[BellIndex(beta)], Fraction(1, 2)).to_amplitude()


def ancilla_polynomial(spec: AncillaSpec) -> AmplitudePolynomial:
    """Ancilla polynomial Q on its own modes (the network's modes 5..n)"""
    polynomial = spec.polynomial()
    if abs(polynomial.state_norm() - 1.0) > 1e-9:
        raise ConstructionError(f"Ancilla {spec.key} is not normalized")
    return polynomial


def input_polynomial(beta: BellIndex, spec: AncillaSpec, n: Optional[int] = None) -> AmplitudePolynomial:
    """
    Network input B_beta * Q

    Args:
        beta: Bell state on modes 1-4
        spec: Ancilla on the following modes
        n: Optional total mode count; extra modes are vacuum

    Returns:
        Polynomial of degree k+2 on 4 + (ancilla modes) or ``n`` modes
    """
    polynomial = bell_polynomial(beta).tensor(ancilla_polynomial(spec))
    if n is not None:
        polynomial = polynomial.pad(n)
    return polynomial
