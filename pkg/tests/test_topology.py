import hashlib
import math

import numpy as np
import pytest

from helpercache import rng as hrng
from helpercache.errors import InvalidParameterError
from helpercache.topology import (
    DEFAULT_HELPER_MODEL,
    DEFAULT_MACRO_MODEL,
    CellLayout,
    ConnectivityGraph,
    LinkRateModel,
    build_connectivity,
    layout_from_json,
    layout_to_json,
    link_rate,
    place_helpers,
    place_uniform,
)

# sha256 of the 1e-6-rounded coordinate bytes of place_uniform(32, 400, stream(7, "helpers")),
# generated once and kept as a regression pin.
UNIFORM32_SHA256 = "ca1e9ae8b272a46a80c5b09883f174b2c5e00e5a7575719271f7bda8af464b2b"


def test_rate_is_capped_at_zero_distance():
    assert link_rate(0.0, DEFAULT_HELPER_MODEL) == DEFAULT_HELPER_MODEL.max_rate_bps


def test_rate_at_reference_distance():
    model = DEFAULT_MACRO_MODEL
    expected = min(
        model.max_rate_bps, model.bandwidth_hz * math.log2(1.0 + model.reference_snr)
    )
    assert link_rate(model.d0_m, model) == pytest.approx(expected, rel=1e-12)


def test_rate_formula_oracle():
    model = LinkRateModel(
        bandwidth_hz=5e6,
        reference_snr=1e6,
        d0_m=2.0,
        pathloss_exponent=3.0,
        max_rate_bps=1e9,
        helper_radius_m=100.0,
    )
    for d in (2.0, 10.0, 55.5, 400.0):
        snr = 1e6 * (d / 2.0) ** -3.0
        assert link_rate(d, model) == pytest.approx(5e6 * math.log2(1 + snr), rel=1e-12)


def test_rate_monotone_non_increasing():
    d = np.linspace(0.0, 1000.0, 501)
    rates = link_rate(d, DEFAULT_HELPER_MODEL)
    assert np.all(np.diff(rates) <= 0)


def test_helper_rate_dominates_bs_rate_in_range():
    # Within any coverage radius used by the experiments the helper link sits
    # at its 30 Mb/s cap, while the BS rate never exceeds that cap; the coded
    # LP weights rely on this ordering.
    d = np.linspace(0.0, 150.0, 301)
    helper = link_rate(d, DEFAULT_HELPER_MODEL)
    np.testing.assert_allclose(helper, DEFAULT_HELPER_MODEL.max_rate_bps, rtol=0)
    d_bs = np.linspace(0.0, 400.0, 401)
    assert np.all(link_rate(d_bs, DEFAULT_MACRO_MODEL) <= DEFAULT_HELPER_MODEL.max_rate_bps)


def test_model_validation():
    with pytest.raises(InvalidParameterError):
        LinkRateModel(
            bandwidth_hz=-1.0,
            reference_snr=1e8,
            d0_m=1.0,
            pathloss_exponent=3.5,
            max_rate_bps=30e6,
            helper_radius_m=60.0,
        )


def test_place_uniform_empty_and_deterministic():
    assert place_uniform(0, 400.0, hrng.stream(0, "u")).shape == (0, 2)
    a = place_uniform(50, 400.0, hrng.stream(3, "u"))
    b = place_uniform(50, 400.0, hrng.stream(3, "u"))
    np.testing.assert_array_equal(a, b)


def test_place_uniform_disc_moments():
    pts = place_uniform(100_000, 400.0, hrng.stream(9, "moments"))
    radii = np.hypot(pts[:, 0], pts[:, 1])
    assert radii.max() <= 400.0
    assert radii.mean() / 400.0 == pytest.approx(2 / 3, abs=0.01)


def test_uniform_helper_layout_regression():
    pts = place_uniform(32, 400.0, hrng.stream(7, "helpers"))
    digest = hashlib.sha256(np.round(pts, 6).tobytes()).hexdigest()
    assert digest == UNIFORM32_SHA256
    np.testing.assert_allclose(pts[0], [-229.55784843, -256.12704597], atol=1e-6)
    np.testing.assert_allclose(pts[-1], [99.15217836, -320.68723181], atol=1e-6)


def test_grid_single_helper_at_center():
    np.testing.assert_array_equal(place_helpers(1, "grid", 400.0), [[0.0, 0.0]])


def test_grid_four_helpers_form_square():
    pts = place_helpers(4, "grid", 400.0)
    assert pts.shape == (4, 2)
    dists = sorted(
        float(np.hypot(*(pts[i] - pts[j])))
        for i in range(4)
        for j in range(i + 1, 4)
    )
    sides, diagonals = dists[:4], dists[4:]
    assert all(s == pytest.approx(sides[0], rel=1e-12) for s in sides)
    assert all(d == pytest.approx(sides[0] * math.sqrt(2), rel=1e-12) for d in diagonals)


def test_grid_32_fills_clipped_lattice():
    # 6x6 lattice over the 400 m cell loses exactly its 4 corners to the disc.
    pts = place_helpers(32, "grid", 400.0)
    assert pts.shape == (32, 2)
    norms = np.hypot(pts[:, 0], pts[:, 1])
    assert norms.max() <= 400.0
    seen = {(round(x, 6), round(y, 6)) for x, y in pts}
    assert len(seen) == 32
    for x, y in list(seen):
        assert (round(-x, 6), round(y, 6)) in seen
        assert (round(y, 6), round(x, 6)) in seen


def test_grid_16_keeps_outer_rings():
    pts = place_helpers(16, "grid", 400.0)
    norms = np.sort(np.round(np.hypot(pts[:, 0], pts[:, 1]), 2))
    expected = [226.27] * 4 + [320.0] * 4 + [357.77] * 8
    np.testing.assert_allclose(norms, expected, atol=0.01)


def test_place_helpers_validation():
    assert place_helpers(0, "grid", 400.0).shape == (0, 2)
    with pytest.raises(InvalidParameterError):
        place_helpers(-1, "grid", 400.0)
    with pytest.raises(InvalidParameterError):
        place_helpers(4, "hexagon", 400.0)
    with pytest.raises(InvalidParameterError):
        place_helpers(4, "uniform", 400.0)


def test_layout_rejects_positions_outside_cell():
    with pytest.raises(InvalidParameterError):
        CellLayout(400.0, helpers=[[0.0, 0.0]], users=[[401.0, 0.0]])


def test_connectivity_colocated_and_boundary():
    layout = CellLayout(
        400.0,
        helpers=[[0.0, 0.0], [200.0, 0.0]],
        users=[[0.0, 0.0], [60.0, 0.0], [260.0000001, 0.0]],
    )
    graph = build_connectivity(layout)
    assert graph.rates[0, 0] == DEFAULT_HELPER_MODEL.max_rate_bps
    # exactly at the 60 m radius: edge kept
    assert graph.rates[1, 0] > 0
    # sixty metres plus epsilon from the second helper: no edge
    assert graph.rates[2, 1] == 0.0
    assert np.all(graph.bs_rate > 0)


def test_connectivity_conflict_fixture_adjacency():
    # two helpers with one dual-covered user between them
    layout = CellLayout(
        400.0,
        helpers=[[-50.0, 0.0], [50.0, 0.0]],
        users=[[-80.0, 0.0], [-45.0, 20.0], [0.0, 0.0], [80.0, 0.0]],
    )
    graph = build_connectivity(layout)
    adjacency = [set(graph.neighbors(u).tolist()) for u in range(4)]
    assert adjacency == [{0}, {0}, {0, 1}, {1}]
    assert set(graph.users_of(0).tolist()) == {0, 1, 2}
    assert set(graph.users_of(1).tolist()) == {2, 3}


def test_boundary_perturbation_toggles_only_own_edges():
    helpers = [[0.0, 0.0]]
    inside = CellLayout(400.0, helpers, [[59.9, 0.0], [10.0, 10.0]])
    outside = CellLayout(400.0, helpers, [[60.1, 0.0], [10.0, 10.0]])
    g_in = build_connectivity(inside)
    g_out = build_connectivity(outside)
    assert g_in.rates[0, 0] > 0 and g_out.rates[0, 0] == 0
    assert g_in.rates[1, 0] == g_out.rates[1, 0]


def test_graph_accessors_validate():
    graph = ConnectivityGraph(rates=np.zeros((2, 1)), bs_rate=np.array([1e6, 2e6]))
    assert graph.n_users == 2 and graph.n_helpers == 1
    with pytest.raises(InvalidParameterError):
        ConnectivityGraph(rates=np.zeros((2, 1)), bs_rate=np.array([1e6, 0.0]))


def test_layout_json_roundtrip():
    layout = CellLayout(
        400.0,
        helpers=place_helpers(4, "grid", 400.0),
        users=place_uniform(10, 400.0, hrng.stream(2, "json")),
    )
    back = layout_from_json(layout_to_json(layout))
    assert back.cell_radius == layout.cell_radius
    np.testing.assert_allclose(back.helpers, layout.helpers)
    np.testing.assert_allclose(back.users, layout.users)
    with pytest.raises(InvalidParameterError):
        layout_from_json("{}")
