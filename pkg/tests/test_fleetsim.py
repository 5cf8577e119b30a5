import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from swapsim.core import DEFAULT_DURATIONS, FleetSpec, ValidationError, derive_rng
from swapsim.coverage import service_radius
from swapsim.fleetsim import (
    NO_FAILURES,
    SWAP_SEQUENCE,
    ConfigurationError,
    FailureModel,
    InfeasibleError,
    fleet_size,
    replay,
    required_terminals,
    return_threshold,
    run_sim,
    travel_charge,
    write_event_log,
)

DAY = 86400.0


def big_hub(p_rover):
    return FleetSpec(p_gen=5500.0, p_hub=0.0, q_b=2.8, v_b=22.2, charge_time=1.0, p_rover=p_rover, v_rover=1.0)


def test_fleet_size_examples(canonical):
    assert fleet_size(big_hub(900.0)) == 6
    assert fleet_size(big_hub(410.0)) == 13
    near_zero = dataclasses.replace(big_hub(900.0), p_hub=5499.0)
    assert fleet_size(near_zero) == 0
    # prototype: charging a module (62.16 W) costs more than running a rover (31.08 W)
    f = canonical.fleet
    assert f.module_charge_power == pytest.approx(62.16)
    assert fleet_size(f) == int(f.p_gen // 62.16)


def test_required_terminals():
    assert [required_terminals(n) for n in (1, 2, 10)] == [2, 3, 11]
    with pytest.raises(ValueError):
        required_terminals(0)


def test_return_threshold(canonical):
    f = canonical.fleet
    assert return_threshold(f, 0.0) == pytest.approx(0.1 * f.q_b)
    r = service_radius(f)
    assert return_threshold(f, r, reserve=0.0) == pytest.approx(0.5 * f.q_b, rel=1e-3)
    assert travel_charge(f, 200.0) == pytest.approx(2 * travel_charge(f, 100.0))
    with pytest.raises(InfeasibleError):
        return_threshold(f, 3 * r)


def test_single_rover_day(canonical):
    m = run_sim(canonical, 1, DAY)
    assert m.rover_uptime_fraction >= 0.97
    assert m.swap_failures == 0 and m.swaps_completed >= 12
    expected = sum(DEFAULT_DURATIONS.values())
    assert expected == 98.0
    assert all(abs(t - expected) < 1e-6 for t in m.service_times)
    assert m.max_charging_power <= canonical.fleet.p_gen - canonical.fleet.p_hub


def test_fifty_swaps_without_failure(canonical):
    m = run_sim(canonical, 1, 60 * 6600.0)
    assert m.swaps_completed >= 50 and m.swap_failures == 0


def test_jam_every_time(canonical):
    m = run_sim(canonical, 2, DAY, FailureModel(jam_prob=1.0))
    jams = [e for e in m.event_log if e.rover_id == 0 and e.transition == "JAM"]
    assert len(jams) == 4  # three reverse-and-retry attempts, then the cap
    assert m.swaps_completed == 0 and m.swap_failures == 1
    assert m.final_rover_states == {0: "STRANDED", 1: "STRANDED"}
    assert any(e.transition == "PORT_DISABLED" for e in m.event_log)
    assert m.rover_uptime_fraction < 0.2


def test_steep_site_strands_rover(canonical):
    m = run_sim(canonical, 1, DAY, FailureModel(terrain_gradient=12.0))
    assert m.final_rover_states[0] == "STRANDED"
    redocks = [e for e in m.event_log if e.transition == "ENTRY->ENTRY"]
    assert len(redocks) == 3


def test_aux_power_loss_adds_reboot(canonical):
    m = run_sim(canonical, 1, DAY, FailureModel(aux_power_fail_prob=1.0, reboot_delay=30.0))
    assert m.swap_failures == 0
    assert m.mean_service_time == pytest.approx(98.0 + 30.0 * len(SWAP_SEQUENCE))


def test_too_few_terminals(canonical):
    with pytest.raises(ConfigurationError):
        run_sim(canonical, 2, DAY, n_terminals=2)
    with pytest.raises(ConfigurationError):
        run_sim(canonical, 0, DAY)


def test_seeded_runs_repeat(canonical):
    fm = FailureModel(jam_prob=0.05, continuity_fail_prob=0.1)
    a = run_sim(canonical, 2, DAY, fm, derive_rng(3, "fleetsim"))
    b = run_sim(canonical, 2, DAY, fm, derive_rng(3, "fleetsim"))
    assert write_event_log(a.event_log) == write_event_log(b.event_log)


def test_failure_profile_file(tmp_path):
    p = tmp_path / "f.yaml"
    p.write_text("jam_prob: 0.2\nmax_retries: 1\n")
    assert FailureModel.load(p) == FailureModel(jam_prob=0.2, max_retries=1)
    p.write_text("jam_prob: 2.0\n")
    with pytest.raises(ValidationError):
        FailureModel.load(p)
    p.write_text("gremlins: 1\n")
    with pytest.raises(ValidationError, match="gremlins"):
        FailureModel.load(p)


def test_event_log_csv(canonical, tmp_path):
    m = run_sim(canonical, 1, 20_000.0)
    out = tmp_path / "events.csv"
    text = write_event_log(m.event_log, out)
    assert out.read_text() == text
    assert text.splitlines()[0] == "time,rover,transition,detail,module,location"


profiles = st.builds(
    FailureModel,
    jam_prob=st.sampled_from([0.0, 0.05, 0.3]),
    continuity_fail_prob=st.sampled_from([0.0, 0.1, 0.5]),
    entry_fail_prob=st.sampled_from([0.0, 0.1, 0.4]),
    aux_power_fail_prob=st.sampled_from([0.0, 0.05]),
    max_retries=st.integers(0, 3),
    max_redocks=st.integers(0, 3),
)


@settings(max_examples=40, deadline=None)
@given(profiles, st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_invariants_hold_on_every_event(canonical, fm, n, seed):
    # check_invariants raises on the first broken conservation or free-slot rule
    m = run_sim(canonical, n, DAY / 2, fm, derive_rng(seed, "fleetsim"))
    assert m.invariant_checks >= len(m.event_log) // 4
    assert m.free_slot_checks == sum(e.transition.startswith("INDEX_EMPTY->") for e in m.event_log)
    assert 0.0 <= m.rover_uptime_fraction <= 1.0
    times = [e.time for e in m.event_log]
    assert times == sorted(times)
    rovers, modules = replay(m.event_log)
    assert rovers == m.final_rover_states
    assert modules == m.final_module_locations
    assert len(modules) == n + required_terminals(n) - 1
