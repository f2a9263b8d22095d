"""
Unit tests for the analytical bounds module
"""

import pytest
import sys
import math
from fractions import Fraction
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from src.bounds import (
    PolarizationProfile, bell_pair_bound, best_rotated_bound, bound_row, generic_upper_bound,
    local_extrema_bound, pair_count, pfail_lower_bound, photon_number_bound,
    polarization_profile, single_local_max_per_parity, stirling_form
)
from src.exceptions import DimensionError, PairingError, ResourceLimitError
from src.fock import AncillaSpec

F = Fraction


class TestPolarizationProfile:
    """Test polarization profiles"""

    def test_vacuum(self):
        """Test the empty ancilla has all weight at lambda = 0"""
        profile = polarization_profile(AncillaSpec('vacuum'))

        assert profile.weights == (F(1),)
        assert generic_upper_bound(profile) == F(1, 2)

    def test_ghz_unrotated(self):
        """Test GHZ weight splits between all-H and all-V"""
        profile = polarization_profile(AncillaSpec('ghz', 3))

        assert profile.weights == (F(1, 2), 0, 0, F(1, 2))

    def test_rotated_photon_pair(self):
        """Test rotating an H/V photon pair gives H^2 and V^2 halves"""
        profile = polarization_profile(AncillaSpec('single_photons', 2), rotations=[0])

        assert profile.weights == (F(1, 2), 0, F(1, 2))
        assert profile.rotations == (0,)

    def test_profiles_sum_to_one(self):
        """Test every rotation subset keeps the total weight"""
        spec = AncillaSpec('w3')
        for rotations in ([], [0], [1, 2], [0, 1, 2]):
            assert polarization_profile(spec, rotations).total() == 1

    def test_weight_outside_range(self):
        """Test w_lambda is zero outside 0..k"""
        profile = polarization_profile(AncillaSpec('ghz', 2))

        assert profile.weight(-2) == 0
        assert profile.weight(5) == 0

    def test_custom_profile_is_float(self):
        """Test custom ancillae use floating weights"""
        spec = AncillaSpec.from_dict({'family': 'custom', 'terms': [
            {'occupation': [1, 0], 're': 0.6},
            {'occupation': [0, 1], 'im': 0.8},
        ]})
        profile = polarization_profile(spec)

        assert not profile.exact
        assert profile.as_floats() == pytest.approx([0.64, 0.36])

    def test_custom_odd_modes_rejected(self):
        """Test custom ancillae must pair up their modes"""
        spec = AncillaSpec.from_dict({'family': 'custom', 'terms': [{'occupation': [1], 're': 1.0}]})

        with pytest.raises(PairingError):
            polarization_profile(spec)

    def test_odd_single_photons_padded(self):
        """Test an odd photon count gets a vacuum V rail"""
        spec = AncillaSpec('single_photons', 3)

        assert pair_count(spec) == 2
        assert polarization_profile(spec).weights == (0, 0, F(1), 0)

    def test_bad_rotation_index(self):
        """Test rotation indices must address existing pairs"""
        with pytest.raises(PairingError):
            polarization_profile(AncillaSpec('bell_pairs', 1), rotations=[2])


class TestGenericBound:
    """Test the generic profile bound and its rotated maximum"""

    @pytest.mark.parametrize("spec, expected", [
        (AncillaSpec('vacuum'), F(1, 2)),
        (AncillaSpec('single_photons', 1), F(1, 2)),
        (AncillaSpec('single_photons', 2), F(3, 4)),
        (AncillaSpec('single_photons', 3), F(3, 4)),
        (AncillaSpec('single_photons', 4), F(3, 4)),
        (AncillaSpec('single_photons', 6), F(13, 16)),
        (AncillaSpec('single_photons', 8), F(13, 16)),
        (AncillaSpec('single_photons', 12), F(27, 32)),
        (AncillaSpec('bell_pairs', 1), F(3, 4)),
        (AncillaSpec('bell_pairs', 2), F(3, 4)),
        (AncillaSpec('bell_pairs', 3), F(13, 16)),
        (AncillaSpec('ghz', 3), F(3, 4)),
        (AncillaSpec('ghz', 4), F(3, 4)),
        (AncillaSpec('grice', 1), F(3, 4)),
    ])
    def test_rotated_bounds(self, spec, expected):
        """Test best rotated bounds of the reference ancillae"""
        value, _ = best_rotated_bound(spec)

        assert value == expected

    def test_w3_rotated_bound(self):
        """Test the W3 bound over pair rotations"""
        value, rotations = best_rotated_bound(AncillaSpec('w3'))

        assert value == F(17, 24)
        assert len(rotations) == 2

    def test_smallest_subset_wins_ties(self):
        """Test ties keep the smallest rotation subset"""
        _, rotations = best_rotated_bound(AncillaSpec('bell_pairs', 1))

        assert rotations == ()

    def test_rotation_guard(self):
        """Test too many pairs are refused"""
        with pytest.raises(ResourceLimitError):
            best_rotated_bound(AncillaSpec('bell_pairs', 1), max_pairs=1)

    def test_ghz_unrotated_bound(self):
        """Test the unrotated GHZ_4 bound is the linear-optics limit"""
        assert generic_upper_bound(polarization_profile(AncillaSpec('ghz', 4))) == F(1, 2)
        assert generic_upper_bound(polarization_profile(AncillaSpec('ghz', 4), [0, 1])) == F(3, 4)

    @pytest.mark.parametrize("spec, rotations", [
        (AncillaSpec('w3'), [0]),
        (AncillaSpec('ghz', 4), [0, 2, 3]),
        (AncillaSpec('single_photons', 6), [0, 1]),
        (AncillaSpec('bell_pairs', 2), [1]),
    ])
    def test_local_extrema_form_agrees(self, spec, rotations):
        """Test the local-extremum evaluation equals the generic bound"""
        profile = polarization_profile(spec, rotations)

        assert local_extrema_bound(profile) == generic_upper_bound(profile)

    def test_two_peaked_profile(self):
        """Test a profile with two even peaks"""
        profile = PolarizationProfile((F(2, 5), F(0), F(1, 5), F(0), F(2, 5)))

        assert not single_local_max_per_parity(profile)
        assert generic_upper_bound(profile) == F(7, 10)
        assert local_extrema_bound(profile) == F(7, 10)

    @pytest.mark.parametrize("spec, rotations", [
        (AncillaSpec('bell_pairs', 1), []),
        (AncillaSpec('ghz', 4), [0, 1]),
        (AncillaSpec('single_photons', 2), [0]),
    ])
    def test_failure_bound_on_single_peaked_profiles(self, spec, rotations):
        """Test 1 - generic bound equals the peak-based failure bound"""
        profile = polarization_profile(spec, rotations)

        assert single_local_max_per_parity(profile)
        assert 1 - generic_upper_bound(profile) == pfail_lower_bound(profile)


class TestPhotonNumberBounds:
    """Test bounds depending only on photon numbers"""

    def test_photon_bound_small_k(self):
        """Test 1 - 1/ceil_even(k + 1) for k = 0..6"""
        expected = [F(1, 2), F(1, 2), F(3, 4), F(3, 4), F(5, 6), F(5, 6), F(7, 8)]

        assert [photon_number_bound(k) for k in range(7)] == expected

    def test_photon_bound_large_k(self):
        """Test the bound for 8 and 12 photons"""
        assert photon_number_bound(8) == F(9, 10)
        assert photon_number_bound(12) == F(13, 14)

    def test_negative_photons(self):
        """Test negative photon counts raise"""
        with pytest.raises(DimensionError):
            photon_number_bound(-1)

    def test_bell_pair_bound(self):
        """Test the Bell-pair failure bound"""
        assert bell_pair_bound(2) == F(1, 4)
        assert bell_pair_bound(4) == F(1, 4)
        assert 1 - bell_pair_bound(6) == F(13, 16)
        assert bell_pair_bound(12) == F(5, 32)

    def test_bell_pair_bound_odd(self):
        """Test odd photon counts are rejected"""
        with pytest.raises(DimensionError):
            bell_pair_bound(3)

    def test_stirling_form(self):
        """Test the asymptotic form tracks the exact bound"""
        for k in (40, 80, 120):
            assert stirling_form(k) == pytest.approx(float(bell_pair_bound(k)), rel=0.02)
        assert stirling_form(6) == pytest.approx(1 / math.sqrt(6 * math.pi))


class TestBoundRow:
    """Test the combined bound row"""

    def test_bell_pair_row(self):
        """Test the row of one extra Bell pair"""
        row = bound_row(AncillaSpec('bell_pairs', 1))

        assert row['k'] == 2
        assert row['n'] == 8
        assert row['generic_bound'] == F(3, 4)
        assert row['rotated_bound'] == F(3, 4)
        assert row['photon_bound'] == F(3, 4)
        assert row['bell_pair_success_bound'] == F(3, 4)

    def test_single_photons_row(self):
        """Test six photons: photon bound 7/8, rotated bound 13/16"""
        row = bound_row(AncillaSpec('single_photons', 6))

        assert row['photon_bound'] == F(7, 8)
        assert row['rotated_bound'] == F(13, 16)
        assert 'bell_pair_failure_bound' not in row

    def test_without_rotation(self):
        """Test rotation search can be skipped"""
        row = bound_row(AncillaSpec('ghz', 3), rotate=False)

        assert 'rotated_bound' not in row
        assert row['generic_bound'] == F(1, 2)
