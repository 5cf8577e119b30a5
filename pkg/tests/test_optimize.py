import dataclasses
import math
import warnings

import numpy as np
import pytest

from swapsim.core import DockParams, Pose2D, derive_rng
from swapsim.curve import GuideCurve
from swapsim.docksim import RoverBody
from swapsim.optimize import (
    Axis,
    DockSetup,
    EmptyCaptureWarning,
    GridSearchConfig,
    PortBuilder,
    PoseDistribution,
    RegionMismatchError,
    compare_iterations,
    compensation_score,
    grid_search,
    max_compensation,
    monte_carlo_region,
    region_from_samples,
    sweep_boundary,
)

X0 = -0.15


def test_empty_capture_gives_zero(canonical, builder, rover):
    stuck = DockSetup(DockParams(max_steps=10))
    with pytest.warns(EmptyCaptureWarning):
        assert max_compensation(builder, canonical.curve, rover, Axis.YAW, 0.1, stuck) == 0.0


def test_straight_funnel_lateral_capture(builder):
    m, t, d = 0.18, 0.115, 0.15
    straight = GuideCurve(math.degrees(math.atan2(m - t, d)), 0.5, mouth_halfwidth=m, throat_halfwidth=t, depth=d)
    h = t - 1e-4  # rover fills the throat
    rover = RoverBody.box(h, 0.26)
    got = max_compensation(builder, straight, rover, Axis.LATERAL, 5e-4)
    # a corner that clears the mouth corner by less than the contact margin still gets funnelled in
    assert m - h - 5e-4 <= got <= m - h + DockParams().contact_margin
    assert sweep_boundary(builder(straight), rover, Axis.LATERAL, 5e-4) == pytest.approx(got, abs=5e-4)


def test_binary_search_matches_sweep(canonical, builder, port, rover, setup):
    fast = max_compensation(builder, canonical.curve, rover, Axis.YAW, 0.05, setup)
    slow = sweep_boundary(port, rover, Axis.YAW, 0.1, setup)
    assert abs(fast - slow) <= 0.1
    assert 10.0 <= fast <= 35.0


def test_score_formula():
    assert compensation_score(45.0, 0.09, 90.0, 0.18) == pytest.approx(math.sqrt(0.5))
    assert compensation_score(0.0, 0.0, 90.0, 0.18) == 0.0


def test_single_cell_grid(canonical, rover, builder, setup):
    cfg = GridSearchConfig((36.0,), (1.0,), template=canonical.curve)
    ranked = grid_search(cfg, rover, builder, setup)
    assert len(ranked) == 1 and ranked[0][0] == canonical.curve


def test_grid_config_validation():
    with pytest.raises(ValueError):
        GridSearchConfig((), (1.0,))
    with pytest.raises(ValueError):
        GridSearchConfig((20.0, 10.0), (1.0,))
    with pytest.raises(ValueError):
        GridSearchConfig((95.0,), (1.0,))
    assert len(GridSearchConfig.from_steps(9.0, 0.1).curves()) == 121


@pytest.fixture(scope="module")
def full_grid(canonical, rover, builder, setup):
    return grid_search(GridSearchConfig.from_scenario(canonical), rover, builder, setup)


def test_full_grid_is_exhaustive(full_grid):
    assert len(full_grid) == 121
    assert len({(c.theta, c.weight) for c, _ in full_grid}) == 121


def test_optimum_beats_every_cell(full_grid):
    best = full_grid[0][1].score
    assert all(best >= r.score for _, r in full_grid)
    wall = [r.score for c, r in full_grid if c.theta == 90.0]
    assert best >= max(wall)


def test_degenerate_cells_scored_zero(full_grid):
    zero_w = [r for c, r in full_grid if c.weight == 0.0]
    assert len(zero_w) == 11
    assert all(r.score == 0.0 and r.diagnostic.startswith("degenerate") for r in zero_w)


def test_result_ranges(full_grid):
    for _, r in full_grid:
        assert 0.0 <= r.max_yaw <= 90.0 and r.max_lateral >= 0.0


def test_grid_deterministic_and_parallel_merge(canonical, rover, builder, setup):
    cfg = GridSearchConfig.from_scenario(canonical, 30.0, 0.5)
    a = grid_search(cfg, rover, builder, setup)
    b = grid_search(cfg, rover, builder, setup)
    c = grid_search(cfg, rover, builder, setup, jobs=2)
    assert a == b == c


def _dist(mean, sd=(1e-12, 1e-12, 1e-12)):
    return PoseDistribution(mean, sd)


def test_point_distribution_good_pose(port, rover, setup):
    reg = monte_carlo_region(port, rover, _dist(Pose2D(X0, 0.0, 0.0)), 50, derive_rng(0, "t"), setup)
    assert reg.n_pass == 50
    assert reg.hull is not None and reg.hull.degenerate and reg.volume == 0.0


def test_point_distribution_bad_pose(port, rover, setup):
    reg = monte_carlo_region(port, rover, _dist(Pose2D(X0, 0.3, 0.0)), 50, derive_rng(0, "t"), setup)
    assert reg.n_pass == 0 and reg.hull is None and reg.volume == 0.0


def test_pass_cloud_is_exactly_passing_poses(canonical, port, rover, setup):
    dist = PoseDistribution.from_scenario(canonical)
    reg = monte_carlo_region(port, rover, dist, 200, derive_rng(1, "t"), setup)
    passing = np.array([p.as_tuple() for p, ok in reg.samples if ok])
    assert np.array_equal(reg.pass_cloud.points, passing)


def test_pass_rate_reproducible_and_stable(canonical, builder, rover, setup):
    base = builder(dataclasses.replace(canonical.curve, theta=90.0))
    dist = PoseDistribution.from_scenario(canonical)
    n = 400
    rates = [monte_carlo_region(base, rover, dist, n, derive_rng(s, "montecarlo"), setup).pass_rate
             for s in (0, 0, 1, 2)]
    assert rates[0] == rates[1]
    p = np.mean(rates[1:])
    sd = math.sqrt(p * (1 - p) / n)
    assert max(rates) - min(rates) < 2 * 3 * sd


def test_volume_invariant_under_permutation(canonical, port, rover, setup):
    dist = PoseDistribution.from_scenario(canonical)
    poses = dist.sample(300, derive_rng(2, "t"))
    a = region_from_samples(port, rover, poses, dist, setup)
    b = region_from_samples(port, rover, poses[np.random.default_rng(0).permutation(300)], dist, setup)
    assert b.volume == pytest.approx(a.volume, rel=1e-12)


def test_compare_same_region(canonical, port, rover, setup):
    dist = PoseDistribution.from_scenario(canonical)
    reg = monte_carlo_region(port, rover, dist, 100, derive_rng(3, "t"), setup)
    rep = compare_iterations([reg, reg])
    assert rep.rows[1].ratio == 1.0 and rep.rows[1].percent_change == 0.0
    assert not rep.inversions


def test_compare_empty_first_region(canonical, port, rover, setup):
    dist = _dist(Pose2D(X0, 0.3, 0.0))
    poses = dist.sample(20, derive_rng(0, "t"))
    empty = region_from_samples(port, rover, poses, dist, setup)
    good = region_from_samples(port, RoverBody.from_spec(canonical.rover, bumpers=True), poses, dist, setup)
    rep = compare_iterations([empty, good], ["a", "b"])
    assert rep.rows[1].ratio is None and rep.rows[1].percent_change is None
    assert "undefined" in rep.format()


def test_compare_flags_inversion_and_mismatch(canonical, builder, port, rover, setup):
    dist = PoseDistribution.from_scenario(canonical)
    poses = dist.sample(300, derive_rng(4, "t"))
    base = builder(dataclasses.replace(canonical.curve, theta=90.0))
    good = region_from_samples(port, rover, poses, dist, setup)
    bad = region_from_samples(base, rover, poses, dist, setup)
    assert compare_iterations([good, bad], ["opt", "base"]).inversions == ["base"]
    other = region_from_samples(port, rover, dist.sample(300, derive_rng(5, "t")), dist, setup)
    with pytest.raises(RegionMismatchError):
        compare_iterations([good, other])
