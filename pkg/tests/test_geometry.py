import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oamtopo.errors import GeometryError
from oamtopo.geometry import (Family, FucaSpec, RingSpec, build_auxiliary, build_cuca,
                              build_fuca, build_uca, build_uniform_cuca, cuca_rings,
                              element_positions, fuca_projection, positions_csv,
                              topology_from_dict, topology_to_dict, uniform_radii, validate)

LAMBDA_HALF = 299_792_458.0 / 5.8e9 / 2


def _as_set(xy):
    return sorted((round(x, 9) + 0.0, round(y, 9) + 0.0) for x, y in xy)


def test_uca4_quarter_symmetry():
    pos = element_positions(build_uca(4, 1.0))
    np.testing.assert_allclose(pos, [[1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0]], atol=1e-15)


def test_uca4_rotated_quarter_pi():
    xy = element_positions(build_uca(4, 1.0, math.pi / 4))[:, :2]
    h = math.sqrt(2) / 2
    assert _as_set(xy) == _as_set([(h, h), (-h, h), (-h, -h), (h, -h)])


def test_uca16_layout():
    top = build_uca(16, 2.0)
    r = np.hypot(*element_positions(top)[:, :2].T)
    np.testing.assert_allclose(r, 2.0)
    assert top.label == "UCA-16" and top.element_count == 16


@pytest.mark.parametrize("K", [3, 2, 5])
def test_uca_needs_even_k_at_least_4(K):
    with pytest.raises(GeometryError):
        build_uca(K, 1.0)


def test_cuca_2x8_ordering_contract():
    top = build_cuca(cuca_rings([2.0, 1.0], 8))
    pos = element_positions(top)
    assert pos.shape == (16, 3)
    np.testing.assert_allclose(np.hypot(*pos[:8, :2].T), 2.0)
    np.testing.assert_allclose(np.hypot(*pos[8:, :2].T), 1.0)


def test_uniform_radii_for_four_rings():
    assert uniform_radii(4, 2.0) == [2.0, 1.5, 1.0, 0.5]
    top = build_uniform_cuca(4, 4, 2.0)
    assert [r.radius for r in top.rings] == [2.0, 1.5, 1.0, 0.5]
    assert validate(top, LAMBDA_HALF, 2.0).ok


def test_single_ring_cuca_is_uca():
    a = build_cuca([RingSpec(1.3, 8, 0.2)])
    b = build_uca(8, 1.3, 0.2)
    assert a.family is Family.UCA
    np.testing.assert_array_equal(element_positions(a), element_positions(b))


def test_duplicate_radii_reported():
    with pytest.raises(GeometryError) as info:
        build_cuca(cuca_rings([1.0, 1.0], 4))
    assert "distinct-radii" in info.value.report.constraints()


def test_dense_uca_violates_spacing():
    # 64 * lambda/2 ~ 1.65 m of arc needed, 0.628 m available
    assert 2 * math.pi * 0.1 < 64 * LAMBDA_HALF
    with pytest.raises(GeometryError) as info:
        build_uca(64, 0.1, min_spacing=LAMBDA_HALF)
    assert info.value.report.constraints() == ["spacing"]


def test_validate_flags_aperture_and_budget():
    top = build_uca(16, 2.0)
    rep = validate(top, LAMBDA_HALF, max_radius=1.5, max_elements=8)
    assert rep.constraints() == ["aperture", "budget"]
    assert not rep.ok and rep.to_dict()["valid"] is False


def test_fuca_element_position_from_formula():
    spec = FucaSpec(4, 4, 1.2, 0.8)
    pos = element_positions(build_fuca(spec))
    for n in range(4):
        Phi = 2 * math.pi * n / 4
        for k in range(4):
            phi = 2 * math.pi * k / 4
            want = (1.2 * math.cos(Phi) + 0.8 * math.cos(phi), 1.2 * math.sin(Phi) + 0.8 * math.sin(phi))
            np.testing.assert_allclose(pos[4 * n + k, :2], want, atol=1e-14)


def test_fuca_4x8_layout_within_aperture():
    top = build_fuca(FucaSpec(4, 8, 1.2, 0.8))
    assert top.element_count == 32 and top.label == "FUCA 4x8"
    assert np.hypot(*element_positions(top)[:, :2].T).max() <= 2.0 + 1e-12


def test_fuca_radius_ordering_enforced():
    with pytest.raises(GeometryError):
        build_fuca(FucaSpec(4, 4, 0.8, 1.2))


def test_degenerate_fuca_is_centred_uca():
    top = build_fuca(FucaSpec(1, 8, 0.0, 1.0))
    ref = build_uca(8, 1.0)
    np.testing.assert_allclose(element_positions(top), element_positions(ref), atol=1e-15)


def test_ura_16_grid():
    xy = element_positions(build_auxiliary(Family.URA, 16, 2.0))[:, :2]
    step = 2 * (2 / math.sqrt(2)) / 3
    xs = np.unique(np.round(xy[:, 0], 12))
    assert len(xs) == 4
    np.testing.assert_allclose(np.diff(xs), step, rtol=1e-12)
    assert np.hypot(*xy.T).max() <= 2.0 + 1e-12


def test_ura_needs_square_count():
    with pytest.raises(GeometryError):
        build_auxiliary(Family.URA, 12, 2.0)


def test_rla_16_four_arms():
    xy = element_positions(build_auxiliary(Family.RLA, 16, 2.0, arms=4))[:, :2]
    angles = np.round(np.mod(np.arctan2(xy[:, 1], xy[:, 0]), 2 * math.pi), 12)
    vals, counts = np.unique(angles, return_counts=True)
    np.testing.assert_allclose(vals, [0, math.pi / 2, math.pi, 3 * math.pi / 2], atol=1e-12)
    assert list(counts) == [4, 4, 4, 4]


def test_spiral_endpoint_radius():
    xy = element_positions(build_auxiliary(Family.SPIRAL, 16, 2.0))[:, :2]
    assert np.hypot(*xy[-1]) == pytest.approx(2.0, abs=1e-12)
    assert np.hypot(*xy[0]) == 0.0


def test_qfuca_layout_inside_aperture():
    top = build_auxiliary(Family.QFUCA_LAYOUT, 16, 2.0)
    assert top.element_count == 16
    assert np.hypot(*element_positions(top)[:, :2].T).max() <= 2.0 + 1e-12


def test_projection_coaxial_pair():
    spec = FucaSpec(4, 4, 1.2, 0.8)
    for v in range(4):
        p = fuca_projection(spec, spec, 2, 2, v)
        assert p.virtual_radius == 0.8
        assert p.virtual_azimuth == spec.local_azimuths(2)[v]
        assert p.center_offset == 0.0


def test_projection_opposite_pair_offset():
    spec = FucaSpec(2, 4, 1.2, 0.8)
    assert fuca_projection(spec, spec, 0, 1, 0).center_offset == pytest.approx(2.4, abs=1e-12)


def test_projection_adjacent_chord():
    spec = FucaSpec(4, 4, 1.2, 0.8)
    chord = 2 * 1.2 * math.sin(math.pi / 4)
    direct = float(np.hypot(*(spec.center(1) - spec.center(0))))
    p = fuca_projection(spec, spec, 0, 1, 0)
    assert p.center_offset == pytest.approx(chord, abs=1e-12)
    assert p.center_offset == pytest.approx(direct, abs=1e-12)
    assert chord == pytest.approx(1.697056274847714, abs=1e-12)


def test_projection_radius_matches_coordinate_subtraction():
    spec = FucaSpec(4, 8, 1.2, 0.8, 0.1)
    pos = element_positions(build_fuca(spec))[:, :2]
    for n in range(4):
        for m in range(4):
            for v in range(8):
                p = fuca_projection(spec, spec, n, m, v)
                direct = float(np.hypot(*(pos[8 * m + v] - spec.center(n))))
                assert abs(p.virtual_radius - direct) < 1e-12


@settings(max_examples=30, deadline=None)
@given(N=st.integers(1, 4), half_k=st.integers(2, 6), shift=st.floats(0, 0.5))
def test_cuca_invariant_under_2pi_over_k(N, half_k, shift):
    K = 2 * half_k
    top = build_cuca(cuca_rings(uniform_radii(N, 2.0), K, shift), min_spacing=0.0)
    turned = top.rotated(2 * math.pi / K)
    assert _as_set(element_positions(top)[:, :2]) == _as_set(element_positions(turned)[:, :2])


@pytest.mark.parametrize("builder", [
    lambda: build_uca(16, 2.0),
    lambda: build_uniform_cuca(2, 8, 2.0),
    lambda: build_uniform_cuca(8, 4, 2.0),
    lambda: build_fuca(FucaSpec(4, 8, 1.2, 0.8)),
    lambda: build_auxiliary(Family.RLA, 32, 2.0),
    lambda: build_auxiliary(Family.SPIRAL, 32, 2.0),
])
def test_builder_outputs_revalidate_clean(builder):
    top = builder()
    assert validate(top, 0.0).ok
    assert np.hypot(*element_positions(top)[:, :2].T).max() <= top.region.radius + 1e-12


def test_json_round_trip_and_csv():
    top = build_fuca(FucaSpec(4, 4, 1.2, 0.8))
    doc = json.loads(json.dumps(topology_to_dict(top)))
    assert doc["validation"]["valid"] is True
    back = topology_from_dict(doc)
    np.testing.assert_allclose(element_positions(back), element_positions(top), atol=1e-15)
    lines = positions_csv(top).splitlines()
    assert lines[0] == "ring,index,x_m,y_m,z_m" and len(lines) == 17
    assert lines[1].startswith("0,0,")
