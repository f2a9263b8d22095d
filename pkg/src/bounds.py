"""
Bounds Module
Analytical upper bounds on polarization-preserving Bell measurements from the
ancilla's polarization profile, including pi/4 rotation preprocessing
"""

import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from scipy.special import comb

from src.exceptions import ConstructionError, DimensionError, PairingError, ResourceLimitError
from src.fock import AncillaSpec, monomial_weight

logger = logging.getLogger(__name__)

Number = Union[Fraction, float]

DEFAULT_MAX_ROTATION_PAIRS = 12
FLOAT_NORM_TOLERANCE = 1e-12


@dataclass(frozen=True)
class PolarizationProfile:
    """
    Weights w_lambda of the ancilla components with lambda H-polarized photons.

    Ancilla modes (5, 6), (7, 8), ... form dual-rail pairs with the first mode
    of each pair as the H rail.
    """

    weights: Tuple[Number, ...]
    rotations: Tuple[int, ...] = ()
    exact: bool = True

    @property
    def k(self) -> int:
        return len(self.weights) - 1

    def weight(self, lam: int) -> Number:
        """w_lambda, zero outside 0..k"""
        if 0 <= lam < len(self.weights):
            return self.weights[lam]
        return Fraction(0) if self.exact else 0.0

    def total(self) -> Number:
        return sum(self.weights, Fraction(0) if self.exact else 0.0)

    def as_floats(self) -> List[float]:
        return [float(w) for w in self.weights]

    def labels(self) -> List[str]:
        return [str(w) if self.exact else f"{w:.12g}" for w in self.weights]


def _pad_to_pairs(spec: AncillaSpec, terms: Dict[Tuple[int, ...], Any], n_modes: int):
    if n_modes % 2 == 0:
        return terms, n_modes
    if spec.family == 'custom':
        raise PairingError(
            f"Custom ancilla has {n_modes} modes; dual-rail pairing needs an even count"
        )
    # trailing photon sits on an H rail; its V partner is vacuum
    return {key + (0,): value for key, value in terms.items()}, n_modes + 1


def _rotate_pair(terms: Dict[Tuple[int, ...], Any], pair: int, exact: bool) -> Dict[Tuple[int, ...], Any]:
    """
    Apply H -> (H - V)/sqrt2, V -> (H + V)/sqrt2 to one pair.

    Exact terms carry integer coefficients; the 2^(-photons/2) factor is applied
    later from the pair's photon count, which the rotation preserves.
    """
    h_mode, v_mode = 2 * pair, 2 * pair + 1
    rotated: Dict[Tuple[int, ...], Any] = {}
    for key, coefficient in terms.items():
        h, v = key[h_mode], key[v_mode]
        factor = 1 if exact else 2 ** (-(h + v) / 2)
        for a in range(h + 1):
            from_h = comb(h, a, exact=True) * (-1) ** (h - a)
            for b in range(v + 1):
                from_v = comb(v, b, exact=True)
                new_key = list(key)
                new_key[h_mode] = a + b
                new_key[v_mode] = h + v - a - b
                new_key = tuple(new_key)
                rotated[new_key] = rotated.get(new_key, 0) + coefficient * from_h * from_v * factor
    return {key: value for key, value in rotated.items() if value != 0}


def pair_count(spec: AncillaSpec) -> int:
    """Number of dual-rail pairs of the (padded) ancilla"""
    return (spec.mode_count + 1) // 2


def polarization_profile(spec: AncillaSpec, rotations: Sequence[int] = ()) -> PolarizationProfile:
    """
    Polarization profile after rotating the selected pairs by pi/4

    Args:
        spec: Ancilla description
        rotations: Indices of the dual-rail pairs to rotate

    Returns:
        PolarizationProfile (exact for built-in families)

    Raises:
        PairingError: custom ancilla with an odd mode count, or invalid pair index
    """
    exact_form = spec.exact()
    exact = exact_form is not None
    if exact:
        terms: Dict[Tuple[int, ...], Any] = dict(exact_form.terms)
        n_modes = exact_form.n
        norm_sq = exact_form.norm_sq
    else:
        polynomial = spec.polynomial()
        terms = dict(polynomial.terms)
        n_modes = polynomial.n
        norm_sq = None

    terms, n_modes = _pad_to_pairs(spec, terms, n_modes)
    pairs = n_modes // 2
    rotations = tuple(sorted(set(rotations)))
    for pair in rotations:
        if not 0 <= pair < pairs:
            raise PairingError(f"Rotation index {pair} outside 0..{pairs - 1}")
        terms = _rotate_pair(terms, pair, exact)

    k = spec.photon_count
    weights: List[Number] = [Fraction(0) if exact else 0.0 for _ in range(k + 1)]
    for key, coefficient in terms.items():
        lam = sum(key[0::2])
        if exact:
            rotated_photons = sum(key[2 * p] + key[2 * p + 1] for p in rotations)
            weights[lam] += (coefficient * coefficient * monomial_weight(key) * norm_sq
                             / 2 ** rotated_photons)
        else:
            weights[lam] += abs(coefficient) ** 2 * monomial_weight(key)

    profile = PolarizationProfile(tuple(weights), rotations, exact)
    total = profile.total()
    if (exact and total != 1) or (not exact and abs(total - 1.0) > FLOAT_NORM_TOLERANCE):
        raise ConstructionError(f"Profile of {spec.key} sums to {total}, expected 1")
    return profile


def _min_sum(profile: PolarizationProfile) -> Number:
    k = profile.k
    return sum((min(profile.weight(lam - 2), profile.weight(lam)) for lam in range(k + 3)),
               Fraction(0) if profile.exact else 0.0)


def generic_upper_bound(profile: PolarizationProfile) -> Number:
    """1/2 + 1/2 * sum_lambda min(w_{lambda-2}, w_lambda)"""
    half = Fraction(1, 2) if profile.exact else 0.5
    return half + half * _min_sum(profile)


def _parity_runs(profile: PolarizationProfile, parity: int) -> List[Number]:
    """Same-parity weights padded with zeros, equal neighbours merged"""
    zero = Fraction(0) if profile.exact else 0.0
    sequence = [zero] + [profile.weight(lam) for lam in range(parity, profile.k + 1, 2)] + [zero]
    return [value for value, _ in itertools.groupby(sequence)]


def local_extrema_bound(profile: PolarizationProfile) -> Number:
    """
    The generic bound from local maxima and minima of each parity sequence

    Equals ``generic_upper_bound`` exactly; kept as an independent evaluation.
    """
    zero = Fraction(0) if profile.exact else 0.0
    half = Fraction(1, 2) if profile.exact else 0.5
    total = zero
    for parity in (0, 1):
        runs = _parity_runs(profile, parity)
        subtotal = sum(profile.weights[parity::2], zero)
        for left, value, right in zip(runs, runs[1:], runs[2:]):
            if value > left and value > right:
                subtotal -= value
            elif value < left and value < right:
                subtotal += value
        total += subtotal
    return half + half * total


def single_local_max_per_parity(profile: PolarizationProfile) -> bool:
    """True when each parity sequence rises then falls (one local maximum run)"""
    for parity in (0, 1):
        runs = _parity_runs(profile, parity)
        peaks = sum(1 for left, value, right in zip(runs, runs[1:], runs[2:])
                    if value > left and value > right)
        if peaks > 1:
            return False
    return True


def pfail_lower_bound(profile: PolarizationProfile) -> Number:
    """1/2 (max_{lambda even} w_lambda + max_{lambda odd} w_lambda)"""
    zero = Fraction(0) if profile.exact else 0.0
    half = Fraction(1, 2) if profile.exact else 0.5
    even = max(profile.weights[0::2], default=zero)
    odd = max(profile.weights[1::2], default=zero)
    return half * (even + odd)


def _ceil_even(value: int) -> int:
    return value if value % 2 == 0 else value + 1


def photon_number_bound(k: int) -> Fraction:
    """
    Success bound from the ancilla photon number alone

    Args:
        k: Ancilla photon count

    Returns:
        1 - 1 / ceil_even(k + 1)
    """
    if k < 0:
        raise DimensionError(f"Photon count must be non-negative, got {k}")
    return 1 - Fraction(1, _ceil_even(k + 1))


def bell_pair_bound(k: int) -> Fraction:
    """
    Failure bound for k/2 ancillary Bell pairs: 2^(-k/2-1) * binom(k/2, floor(k/4))

    Args:
        k: Even ancilla photon count

    Returns:
        Lower bound on the failure probability
    """
    if k < 0 or k % 2:
        raise DimensionError(f"Bell-pair bound needs an even non-negative k, got {k}")
    return Fraction(comb(k // 2, k // 4, exact=True), 2 ** (k // 2 + 1))


def stirling_form(k: int) -> float:
    """Large-k form of bell_pair_bound; includes the e^(-2/3k) factor for k divisible by 4"""
    if k <= 0:
        raise DimensionError(f"Asymptotic form needs k > 0, got {k}")
    leading = 1.0 / math.sqrt(math.pi * k)
    if k % 4 == 0:
        return leading * math.exp(-2.0 / (3.0 * k))
    return leading


def best_rotated_bound(spec: AncillaSpec,
                       max_pairs: int = DEFAULT_MAX_ROTATION_PAIRS) -> Tuple[Number, Tuple[int, ...]]:
    """
    Largest generic bound over all subsets of pi/4-rotated pairs

    W3 gives 17/24 with pairs (0, 1) rotated, above the 2/3 sometimes quoted for it.

    Args:
        spec: Ancilla description
        max_pairs: Refuse ancillae with more pairs than this

    Returns:
        (bound, rotated pair indices); smallest subset wins ties
    """
    pairs = pair_count(spec)
    if pairs > max_pairs:
        raise ResourceLimitError(
            f"{spec.key} has {pairs} pairs; enumerating 2^{pairs} rotation subsets "
            f"exceeds the limit of {max_pairs} pairs"
        )
    best_value: Optional[Number] = None
    best_subset: Tuple[int, ...] = ()
    for size in range(pairs + 1):
        for subset in itertools.combinations(range(pairs), size):
            value = generic_upper_bound(polarization_profile(spec, subset))
            if best_value is None or value > best_value:
                best_value, best_subset = value, subset
    logger.debug(f"Best rotated bound for {spec.key}: {best_value} with pairs {best_subset}")
    return best_value, best_subset


def bound_row(spec: AncillaSpec, rotate: bool = True,
              max_pairs: int = DEFAULT_MAX_ROTATION_PAIRS) -> Dict[str, Any]:
    """
    All bounds for one ancilla, in a form ready for display or JSON

    Args:
        spec: Ancilla description
        rotate: Also search pi/4 rotation subsets
        max_pairs: Rotation enumeration guard

    Returns:
        Dictionary of labels, profile and bound values
    """
    k = spec.photon_count
    profile = polarization_profile(spec)
    generic = generic_upper_bound(profile)
    row: Dict[str, Any] = {
        'ancilla': spec.to_dict(),
        'label': spec.label,
        'k': k,
        'n': 4 + spec.mode_count,
        'profile': profile.labels(),
        'generic_bound': generic,
        'local_extrema_bound': local_extrema_bound(profile),
        'pfail_lower_bound': pfail_lower_bound(profile),
        'single_peaked': single_local_max_per_parity(profile),
        'photon_bound': photon_number_bound(k),
    }
    if rotate:
        value, subset = best_rotated_bound(spec, max_pairs)
        row['rotated_bound'] = value
        row['rotated_pairs'] = list(subset)
    if spec.family == 'bell_pairs' and k > 0:
        failure = bell_pair_bound(k)
        row['bell_pair_failure_bound'] = failure
        row['bell_pair_success_bound'] = 1 - failure
        row['stirling_form'] = stirling_form(k)
    return row
