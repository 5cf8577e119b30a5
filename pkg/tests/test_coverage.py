import dataclasses
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from swapsim.core import make_rng
from swapsim.coverage import (
    DisjointHubsWarning,
    HubNetwork,
    Topology,
    Trajectory,
    TrajectoryIssue,
    chain_coverage,
    chain_positions,
    coverage_table,
    endurance,
    gapless_check,
    hex_coverage,
    hex_positions,
    hub_area,
    lens_area_quad,
    overlap_area,
    service_radius,
    union_area_mc,
    validate_trajectory,
)

LENS_1_1 = 2.0 * math.acos(0.5) - 0.5 * math.sqrt(3.0)


def test_endurance(canonical):
    f = canonical.fleet
    assert endurance(f) == pytest.approx(2.0, rel=1e-3)
    assert endurance(dataclasses.replace(f, p_rover=f.q_b * f.v_b)) == pytest.approx(1.0)
    assert endurance(dataclasses.replace(f, q_b=2 * f.q_b)) == pytest.approx(2 * endurance(f))


def test_service_radius(canonical):
    r = service_radius(canonical.fleet)
    assert r == pytest.approx(3600.0, rel=1e-3)
    assert hub_area(3600.0) == math.pi * 3600.0**2


def test_overlap_limits():
    assert overlap_area(1.0, 2.0) == pytest.approx(0.0, abs=1e-15)
    assert overlap_area(1.0, 0.0) == pytest.approx(math.pi)
    assert overlap_area(1.0, 1.0) == pytest.approx(LENS_1_1, rel=1e-12)
    with pytest.warns(DisjointHubsWarning):
        assert overlap_area(1.0, 2.5) == 0.0
    with pytest.raises(ValueError):
        overlap_area(0.0, 1.0)


def test_overlap_matches_quadrature():
    rng = make_rng(0)
    for _ in range(100):
        r = float(rng.uniform(0.1, 5000.0))
        d = float(rng.uniform(0.0, 2.0 * r))
        assert overlap_area(r, d) == pytest.approx(lens_area_quad(r, d), rel=1e-6, abs=1e-12 * r * r)


def test_chain_examples():
    assert chain_coverage(1, 2.0, 1.5) == pytest.approx(hub_area(2.0))
    assert chain_coverage(4, 1.0, 2.0) == pytest.approx(4 * math.pi)
    assert chain_coverage(3, 1.0, 1.0) == pytest.approx(3 * (math.pi - LENS_1_1) + LENS_1_1)


def test_hex_examples():
    assert hex_coverage(1, 2.0) == pytest.approx(hub_area(2.0))
    assert hex_coverage(2, 1.0) == pytest.approx(2 * math.pi - overlap_area(1.0, math.sqrt(3.0)))


def test_hex_triple_against_sampling():
    # the pairwise closed form counts each lens once; the exact union differs by the triple region
    est, se = union_area_mc(hex_positions(3, 1.0), 1.0, 2_000_000, make_rng(1))
    assert abs(est - hex_coverage(3, 1.0)) < 0.01 * est
    pos = hex_positions(3, 1.0)
    d = np.hypot(*(pos[:, None] - pos[None]).transpose(2, 0, 1))
    assert np.allclose(d[np.triu_indices(3, 1)], math.sqrt(3.0))


@settings(max_examples=1000, deadline=None)
@given(st.floats(0.0, 1.0, exclude_max=True), st.floats(1e-3, 1e-2))
def test_overlap_strictly_decreasing(f, step):
    d1 = 2.0 * f
    d2 = min(d1 + step, 2.0)
    assert overlap_area(1.0, d2) < overlap_area(1.0, d1)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 50), st.floats(0.1, 100.0), st.floats(0.0, 1.0))
def test_chain_telescoping(n, r, f):
    d = 2.0 * r * f
    step = chain_coverage(n, r, d) - chain_coverage(n - 1, r, d)
    assert step == pytest.approx(hub_area(r) - overlap_area(r, d), rel=1e-9, abs=1e-9 * r * r)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 20), st.floats(0.1, 100.0), st.floats(0.0, 1.0), st.floats(0.1, 10.0))
def test_area_scaling(n, r, f, k):
    d = 2.0 * r * f
    assert chain_coverage(n, k * r, k * d) == pytest.approx(k * k * chain_coverage(n, r, d), rel=1e-9)
    assert hex_coverage(n, k * r) == pytest.approx(k * k * hex_coverage(n, r), rel=1e-9)
    assert overlap_area(k * r, k * d) == pytest.approx(k * k * overlap_area(r, d), rel=1e-9, abs=1e-12 * k * k)


def test_single_hub_gapless():
    assert gapless_check(HubNetwork(np.zeros((1, 2)), 1.0), 0.01).gapless


def test_two_far_hubs_leave_a_gap():
    net = HubNetwork(chain_positions(2, 2.5), 1.0)
    res = gapless_check(net, 0.01)
    assert not res.gapless
    assert 1.0 < res.first_gap[0] < 1.5 and abs(res.first_gap[1]) < 1e-6


def test_hex_spacing_gapless():
    r = 3600.0
    res = gapless_check(HubNetwork.hex(3, r), r / 200.0)
    assert res.gapless and res.n_checked > 1000


def test_network_validation():
    with pytest.raises(ValueError):
        HubNetwork(chain_positions(2, 2.5), 1.0, Topology.CHAIN, 2.5)
    with pytest.raises(ValueError):
        HubNetwork(np.zeros((0, 2)), 1.0)


def test_trajectories():
    r = 100.0
    net = HubNetwork.chain(2, r, r)
    assert validate_trajectory(Trajectory([[0, 0], [r, 0], [0, 0]]), net)
    long = validate_trajectory(Trajectory([[0, 0], [r + 1e-6, 0], [0, 0]]), net)
    assert not long and long.reasons == (TrajectoryIssue.LENGTH,)
    assert validate_trajectory(Trajectory([[0, 0], [r, 0]]), net)
    stray = validate_trajectory(Trajectory([[50, 50], [r, 0]]), net)
    assert stray.reasons == (TrajectoryIssue.START,)
    with pytest.raises(ValueError):
        Trajectory([[0, 0]])


def test_coverage_table(canonical):
    r = service_radius(canonical.fleet)
    rows = coverage_table(Topology.CHAIN, 3, r, r, make_rng(0), 10_000)
    assert [row.n_h for row in rows] == [1, 2, 3]
    assert rows[2].closed_form == pytest.approx(chain_coverage(3, r, r))
    assert rows[2].sampled == pytest.approx(rows[2].closed_form, rel=0.05)
