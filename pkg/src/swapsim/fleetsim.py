"""Fleet sizing and a discrete-event model of the battery-swap cycle.

Rovers work at a site ``work_distance`` from the hub, drive back once their
module drops to the return threshold, queue FIFO for a docking port and run
the swap sequence

    ENTRY -> LIFT -> CONTINUITY_CHECK -> INDEX_EMPTY -> SHIFT_OUT
          -> INDEX_FULL -> SHIFT_IN -> LOWER -> EXIT

before driving out again with the fullest module the hub holds.  Modules in
hub terminals charge at ``Q_b / charge_time`` each, as many at a time as the
spare generation ``p_gen - p_hub`` can feed.

Injected failures:

* module jams, handled by reverse-and-retry up to a cap
* failed continuity checks, which send the rover back to ENTRY
* failed entries, retried as redocks up to a cap
* auxiliary-power resets, which add a reboot delay
"""

from __future__ import annotations

import csv
import enum
import heapq
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .core import FleetOps, FleetSpec, Scenario, ValidationError

SWAP_SEQUENCE = (
    "ENTRY",
    "LIFT",
    "CONTINUITY_CHECK",
    "INDEX_EMPTY",
    "SHIFT_OUT",
    "INDEX_FULL",
    "SHIFT_IN",
    "LOWER",
    "EXIT",
)


class RoverState(enum.Enum):
    FIELD = "FIELD"  # working at the site
    APPROACH = "APPROACH"  # driving to the hub
    QUEUED = "QUEUED"  # waiting for a free port
    ENTRY = "ENTRY"
    LIFT = "LIFT"
    CONTINUITY_CHECK = "CONTINUITY_CHECK"
    INDEX_EMPTY = "INDEX_EMPTY"
    SHIFT_OUT = "SHIFT_OUT"
    INDEX_FULL = "INDEX_FULL"
    SHIFT_IN = "SHIFT_IN"
    LOWER = "LOWER"
    EXIT = "EXIT"
    DEPART = "DEPART"  # driving from the hub to the site
    STRANDED = "STRANDED"  # swap failed for good; out of service


DRAINING = (RoverState.FIELD, RoverState.APPROACH, RoverState.DEPART)


class ConfigurationError(ValueError):
    pass


class InfeasibleError(ValueError):
    pass


class InvariantViolation(AssertionError):
    pass


# --- sizing ---------------------------------------------------------------


def fleet_size(spec: FleetSpec) -> int:
    """Rovers one hub can sustain: spare power over the larger of charge power and rover draw."""
    return math.floor((spec.p_gen - spec.p_hub) / max(spec.module_charge_power, spec.p_rover))


def required_terminals(n_rovers: int) -> int:
    """One terminal per rover plus the free slot a swap unloads into."""
    if n_rovers < 1:
        raise ValueError("n_rovers must be >= 1")
    return n_rovers + 1


def travel_charge(spec: FleetSpec, distance: float) -> float:
    """Ah spent driving ``distance`` meters at ``v_rover`` drawing ``p_rover``."""
    return distance / spec.v_rover * spec.p_rover / spec.v_b / 3600.0


def return_threshold(spec: FleetSpec, distance_to_hub: float, reserve: float = 0.1) -> float:
    """Charge (Ah) at which a rover must head back: the trip home plus ``reserve * Q_b``."""
    if distance_to_hub < 0.0:
        raise ValueError("distance must be >= 0")
    need = travel_charge(spec, distance_to_hub)
    if need > spec.q_b:
        raise InfeasibleError(f"{distance_to_hub} m is beyond the range of a full module")
    return need + reserve * spec.q_b


# --- failure model ----------------------------------------------------------


@dataclass(frozen=True)
class FailureModel:
    jam_prob: float = 0.0  # per SHIFT_* attempt
    max_retries: int = 3  # reverse-and-retry attempts after a jam
    continuity_fail_prob: float = 0.0  # per CONTINUITY_CHECK
    entry_fail_prob: float = 0.0  # per ENTRY (misaligned, slipped on a slope)
    max_redocks: int = 3  # ENTRY restarts allowed per swap
    aux_power_fail_prob: float = 0.0  # per swap state
    reboot_delay: float = 30.0  # s added by an auxiliary-power reset
    terrain_gradient: float = 0.0  # deg at the hub site
    gradient_limit: float = 10.0  # deg; above it every entry fails

    def __post_init__(self):
        for name in ("jam_prob", "continuity_fail_prob", "entry_fail_prob", "aux_power_fail_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(name, "probability must lie in [0, 1]")
        if self.max_retries < 0 or self.max_redocks < 0:
            raise ValidationError("max_retries", "retry caps must be >= 0")
        if self.reboot_delay < 0.0:
            raise ValidationError("reboot_delay", "must be >= 0")

    @property
    def effective_entry_fail_prob(self) -> float:
        return 1.0 if self.terrain_gradient > self.gradient_limit else self.entry_fail_prob

    @classmethod
    def load(cls, path) -> "FailureModel":
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        if not isinstance(data, dict):
            raise ValidationError("failure_profile", "expected a mapping")
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(sorted(unknown)[0], "unknown field")
        return cls(**data)


NO_FAILURES = FailureModel()


# --- records --------------------------------------------------------------


@dataclass(frozen=True)
class SwapEvent:
    time: float
    rover_id: int  # -1 for hub-only events
    transition: str  # "FROM->TO", or a hub action
    detail: str = ""
    module: int | None = None
    location: str | None = None  # where ``module`` is after the event


@dataclass
class Module:
    id: int
    charge: float  # Ah
    location: tuple  # ("ROVER", id) | ("HUB_TERMINAL", k) | ("IN_TRANSFER", port)
    charging: bool = False

    def where(self) -> str:
        return f"{self.location[0]}({self.location[1]})"


@dataclass
class _Rover:
    id: int
    state: RoverState
    module: int | None
    since: float = 0.0
    field_time: float = 0.0
    stranded_since: float | None = None
    port: int | None = None
    swap_start: float = 0.0
    redocks: int = 0
    attempts: int = 0
    pending: int | None = None  # module moving through the port
    target: int | None = None  # terminal picked by the last INDEX step


@dataclass
class SimMetrics:
    rover_uptime_fraction: float
    swaps_completed: int
    swap_failures: int
    mean_service_time: float
    event_log: list[SwapEvent] = field(repr=False)
    service_times: list[float] = field(repr=False, default_factory=list)
    per_rover_uptime: list[float] = field(default_factory=list)
    invariant_checks: int = 0
    free_slot_checks: int = 0
    max_charging_power: float = 0.0
    final_rover_states: dict = field(default_factory=dict)
    final_module_locations: dict = field(default_factory=dict)

    def summary(self) -> str:
        return (
            f"uptime {self.rover_uptime_fraction:.4f}  swaps {self.swaps_completed}  "
            f"failures {self.swap_failures}  mean service {self.mean_service_time:.2f} s"
        )


def write_event_log(events: list[SwapEvent], path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", "rover", "transition", "detail", "module", "location"])
    for e in events:
        w.writerow([repr(e.time), e.rover_id, e.transition, e.detail,
                    "" if e.module is None else e.module, e.location or ""])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def replay(events: list[SwapEvent]) -> tuple[dict, dict]:
    """Rover states and module locations as implied by the log alone."""
    rovers, modules = {}, {}
    for e in events:
        if e.rover_id >= 0 and "->" in e.transition:
            rovers[e.rover_id] = e.transition.split("->", 1)[1]
        if e.module is not None and e.location is not None:
            modules[e.module] = e.location
    return rovers, modules


# --- simulation -------------------------------------------------------------


class _Sim:
    def __init__(self, fleet: FleetSpec, ops: FleetOps, n_rovers: int, duration: float,
                 failures: FailureModel, rng: np.random.Generator, n_terminals: int, check: bool):
        self.f = fleet
        self.ops = ops
        self.fail = failures
        self.rng = rng
        self.duration = duration
        self.check = check
        self.t = 0.0
        self.seq = 0
        self.queue: list = []
        self.log: list[SwapEvent] = []
        self.drain = fleet.p_rover / fleet.v_b / 3600.0  # Ah/s
        self.charge_rate = fleet.q_b / (fleet.charge_time * 3600.0)  # Ah/s per module
        spare = fleet.p_gen - fleet.p_hub
        self.max_charging = int(math.floor(spare / fleet.module_charge_power + 1e-12))
        self.threshold = return_threshold(fleet, ops.work_distance, ops.reserve)
        self.trip = ops.work_distance / fleet.v_rover
        self.dispatch_min = self.threshold + travel_charge(fleet, ops.work_distance)
        self.n_terminals = n_terminals
        self.terminals: list[int | None] = [None] * n_terminals
        self.modules: list[Module] = []
        self.rovers: list[_Rover] = []
        self.ports: list[int | None] = [None] * ops.n_ports
        self.port_ok = [True] * ops.n_ports
        self.waiting: list[int] = []
        self.hub_version = 0
        self.last_charge_update = 0.0
        self.completed = 0
        self.failures = 0
        self.service: list[float] = []
        self.checks = 0
        self.free_slot_checks = 0
        self.max_power = 0.0
        self.waiting_for_charge: list[int] = []

        for i in range(n_rovers):
            m = Module(len(self.modules), fleet.q_b, ("ROVER", i))
            self.modules.append(m)
            self.rovers.append(_Rover(i, RoverState.DEPART, m.id))
        for k in range(n_terminals - 1):
            m = Module(len(self.modules), fleet.q_b, ("HUB_TERMINAL", k))
            self.modules.append(m)
            self.terminals[k] = m.id
        self.n_modules = len(self.modules)

    # -- bookkeeping

    def push(self, when: float, rover_id: int, kind: str, payload=None):
        heapq.heappush(self.queue, (when, rover_id, self.seq, kind, payload))
        self.seq += 1

    def emit(self, rover_id, transition, detail="", module=None):
        loc = self.modules[module].where() if module is not None else None
        self.log.append(SwapEvent(self.t, rover_id, transition, detail, module, loc))

    def move(self, r: _Rover, new: RoverState, detail=""):
        self.settle_rover(r)
        self.emit(r.id, f"{r.state.value}->{new.value}", detail)
        r.state = new
        r.since = self.t

    def settle_rover(self, r: _Rover):
        """Account drain and field time from ``r.since`` up to now."""
        dt = self.t - r.since
        if dt <= 0.0:
            return
        if r.state in DRAINING and r.module is not None:
            m = self.modules[r.module]
            m.charge = max(0.0, m.charge - self.drain * dt)
        if r.state is RoverState.FIELD:
            r.field_time += dt
        r.since = self.t

    def settle_hub(self):
        dt = self.t - self.last_charge_update
        if dt > 0.0:
            for m in self.modules:
                if m.charging:
                    m.charge = min(self.f.q_b, m.charge + self.charge_rate * dt)
        self.last_charge_update = self.t

    def reallocate_charging(self):
        """Feed the fullest unfinished modules first, as many as the power budget allows."""
        self.settle_hub()
        for mid in self.terminals:
            # within a microsecond of full counts as full; the clock cannot resolve less
            if mid is not None and (self.f.q_b - self.modules[mid].charge) / self.charge_rate < 1e-6:
                self.modules[mid].charge = self.f.q_b
        cands = []
        for k, mid in enumerate(self.terminals):
            if mid is not None and self.modules[mid].charge < self.f.q_b:
                cands.append((-self.modules[mid].charge, k, mid))
        cands.sort()
        active = {mid for _, _, mid in cands[: self.max_charging]}
        for m in self.modules:
            m.charging = m.id in active
        power = len(active) * self.f.module_charge_power
        self.max_power = max(self.max_power, power)
        self.hub_version += 1
        if active:
            nxt = min((self.f.q_b - self.modules[mid].charge) / self.charge_rate for mid in active)
            self.push(self.t + nxt, -1, "charge_done", self.hub_version)

    def check_invariants(self):
        if not self.check:
            return
        self.checks += 1
        seen = {}
        for r in self.rovers:
            if r.module is not None:
                seen.setdefault(r.module, []).append(("ROVER", r.id))
        for k, mid in enumerate(self.terminals):
            if mid is not None:
                seen.setdefault(mid, []).append(("HUB_TERMINAL", k))
        for r in self.rovers:
            if r.pending is not None and self.modules[r.pending].location[0] == "IN_TRANSFER":
                seen.setdefault(r.pending, []).append(self.modules[r.pending].location)
        for m in self.modules:
            if m.location[0] == "IN_TRANSFER" and m.id not in seen:
                seen[m.id] = [m.location]  # jammed in a disabled port
        if len(self.modules) != self.n_modules or set(seen) != set(range(self.n_modules)):
            raise InvariantViolation(f"t={self.t}: module count/location mismatch {seen}")
        for mid, locs in seen.items():
            m = self.modules[mid]
            if len(locs) != 1 or tuple(locs[0]) != tuple(m.location):
                raise InvariantViolation(f"t={self.t}: module {mid} in {locs}, records {m.location}")
            if not -1e-12 <= m.charge <= self.f.q_b + 1e-12:
                raise InvariantViolation(f"t={self.t}: module {mid} charge {m.charge} out of bounds")
            if m.charging and m.location[0] != "HUB_TERMINAL":
                raise InvariantViolation(f"t={self.t}: module {mid} charging outside a terminal")
        drawn = sum(m.charging for m in self.modules) * self.f.module_charge_power
        if drawn > self.f.p_gen - self.f.p_hub + 1e-9:
            raise InvariantViolation(f"t={self.t}: charging draws {drawn} W")

    def chance(self, p: float) -> bool:
        if p <= 0.0:
            return False
        if p >= 1.0:
            return True
        return bool(self.rng.random() < p)

    # -- rover life cycle

    def start(self):
        self.emit(-1, "INIT", f"rovers={len(self.rovers)} terminals={self.n_terminals} ports={len(self.ports)}")
        for m in self.modules:
            self.emit(-1, "PLACE", "initial", m.id)
        self.reallocate_charging()
        for r in self.rovers:
            self.emit(r.id, "INIT->DEPART")
            self.push(self.trip, r.id, "arrive_site")
        self.check_invariants()

    def schedule_return(self, r: _Rover):
        c = self.modules[r.module].charge
        wait = max(0.0, (c - self.threshold) / self.drain)
        self.push(self.t + wait, r.id, "leave_site")

    def state_time(self, r: _Rover, name: str) -> float:
        d = self.ops.durations[name]
        if self.chance(self.fail.aux_power_fail_prob):
            self.emit(r.id, "AUX_POWER_LOSS", f"reboot +{self.fail.reboot_delay:g}s in {name}")
            d += self.fail.reboot_delay
        return d

    def enter(self, r: _Rover, name: str, detail=""):
        self.move(r, RoverState[name], detail)
        self.push(self.t + self.state_time(r, name), r.id, "done", name)

    def try_dock(self):
        if not any(self.port_ok):
            while self.waiting:
                r = self.rovers[self.waiting.pop(0)]
                self.move(r, RoverState.STRANDED, "no working port")
                r.stranded_since = self.t
            return
        for p in range(len(self.ports)):
            if self.ports[p] is None and self.port_ok[p] and self.waiting:
                rid = self.waiting.pop(0)
                r = self.rovers[rid]
                r.port = p
                r.swap_start = self.t
                r.redocks = 0
                self.ports[p] = rid
                self.enter(r, "ENTRY", f"port={p}")

    def strand(self, r: _Rover, why: str, disable_port: bool):
        self.failures += 1
        self.move(r, RoverState.STRANDED, why)
        r.stranded_since = self.t
        if r.port is not None:
            if disable_port:
                self.port_ok[r.port] = False
                self.emit(-1, "PORT_DISABLED", f"port={r.port}")
            self.ports[r.port] = None
            r.port = None
        self.try_dock()

    def handle(self, kind: str, rid: int, payload):
        if kind == "charge_done":
            if payload == self.hub_version:
                self.reallocate_charging()
                self.retry_waiting_for_charge()
            return
        r = self.rovers[rid]
        if kind == "arrive_site":
            self.move(r, RoverState.FIELD)
            self.schedule_return(r)
        elif kind == "leave_site":
            self.settle_rover(r)  # so the logged charge is current
            self.move(r, RoverState.APPROACH, f"charge={self.modules[r.module].charge:.6f}")
            self.push(self.t + self.trip, r.id, "arrive_hub")
        elif kind == "arrive_hub":
            self.move(r, RoverState.QUEUED)
            self.waiting.append(r.id)
            self.try_dock()
        elif kind == "done":
            self.finish_state(r, payload)
        elif kind == "wait_charge":
            self.begin_index_full(r)

    def finish_state(self, r: _Rover, name: str):
        fm = self.fail
        if name == "ENTRY":
            if self.chance(fm.effective_entry_fail_prob):
                self.redock(r, "entry failed")
            else:
                self.enter(r, "LIFT")
        elif name == "LIFT":
            self.enter(r, "CONTINUITY_CHECK")
        elif name == "CONTINUITY_CHECK":
            if self.chance(fm.continuity_fail_prob):
                self.redock(r, "no continuity")
            else:
                self.enter(r, "INDEX_EMPTY")
        elif name == "INDEX_EMPTY":
            self.free_slot_checks += 1
            free = [k for k, mid in enumerate(self.terminals) if mid is None]
            if not free:
                raise InvariantViolation(f"t={self.t}: no free terminal at SHIFT_OUT")
            r.attempts = 0
            mid = r.module
            r.module = None
            r.pending = mid
            self.modules[mid].location = ("IN_TRANSFER", r.port)
            self.enter(r, "SHIFT_OUT", f"terminal={free[0]}")
            self.emit(r.id, "MODULE", "rover->transfer", mid)
            r.target = free[0]
        elif name == "SHIFT_OUT":
            if self.chance(fm.jam_prob):
                self.jam(r, "SHIFT_OUT")
                return
            k = r.target
            mid = r.pending
            self.settle_hub()
            self.terminals[k] = mid
            self.modules[mid].location = ("HUB_TERMINAL", k)
            r.pending = None
            self.emit(r.id, "MODULE", f"transfer->terminal {k}", mid)
            self.reallocate_charging()
            self.begin_index_full(r)
        elif name == "INDEX_FULL":
            r.attempts = 0
            k = r.target
            mid = self.terminals[k]
            self.settle_hub()
            self.terminals[k] = None
            m = self.modules[mid]
            m.charging = False
            m.location = ("IN_TRANSFER", r.port)
            r.pending = mid
            self.reallocate_charging()
            self.enter(r, "SHIFT_IN", f"terminal={k}")
            self.emit(r.id, "MODULE", "terminal->transfer", mid)
        elif name == "SHIFT_IN":
            if self.chance(fm.jam_prob):
                self.jam(r, "SHIFT_IN")
                return
            mid = r.pending
            r.pending = None
            r.module = mid
            self.modules[mid].location = ("ROVER", r.id)
            self.emit(r.id, "MODULE", "transfer->rover", mid)
            self.enter(r, "LOWER")
        elif name == "LOWER":
            self.enter(r, "EXIT")
        elif name == "EXIT":
            self.completed += 1
            self.service.append(self.t - r.swap_start)
            self.ports[r.port] = None
            r.port = None
            self.move(r, RoverState.DEPART, f"service={self.service[-1]:.6f}")
            self.push(self.t + self.trip, r.id, "arrive_site")
            self.try_dock()

    def begin_index_full(self, r: _Rover):
        self.settle_hub()
        best = None
        for k, mid in enumerate(self.terminals):
            if mid is not None and (best is None or self.modules[mid].charge > self.modules[self.terminals[best]].charge):
                best = k
        if best is None or self.modules[self.terminals[best]].charge < self.dispatch_min:
            # nothing worth taking yet; hold the port until a module is charged enough
            if r.id not in self.waiting_for_charge:
                self.waiting_for_charge.append(r.id)
                self.emit(r.id, "WAIT_CHARGE", f"need {self.dispatch_min:.6f} Ah")
            return
        if r.id in self.waiting_for_charge:
            self.waiting_for_charge.remove(r.id)
        r.target = best
        self.enter(r, "INDEX_FULL", f"terminal={best} charge={self.modules[self.terminals[best]].charge:.6f}")

    def retry_waiting_for_charge(self):
        for rid in list(self.waiting_for_charge):
            self.begin_index_full(self.rovers[rid])

    def redock(self, r: _Rover, why: str):
        if r.redocks >= self.fail.max_redocks:
            self.strand(r, f"{why}; redock cap reached", disable_port=False)
            return
        r.redocks += 1
        self.enter(r, "ENTRY", f"{why}; redock {r.redocks}")

    def jam(self, r: _Rover, name: str):
        if r.attempts >= self.fail.max_retries:
            self.emit(r.id, "JAM", f"{name} jammed; retry cap reached", r.pending)
            self.strand(r, f"module jammed in {name}", disable_port=True)
            return
        r.attempts += 1
        self.emit(r.id, "JAM", f"{name} overcurrent; reverse and retry {r.attempts}", r.pending)
        self.push(self.t + self.state_time(r, name), r.id, "done", name)

    def run(self) -> SimMetrics:
        self.start()
        while self.queue and self.queue[0][0] <= self.duration:
            when, rid, _, kind, payload = heapq.heappop(self.queue)
            self.t = when
            self.handle(kind, rid, payload)
            self.check_invariants()
        self.t = self.duration
        self.settle_hub()
        for r in self.rovers:
            self.settle_rover(r)
        ups = [r.field_time / self.duration for r in self.rovers]
        mean = float(np.mean(self.service)) if self.service else float("nan")
        return SimMetrics(
            rover_uptime_fraction=float(np.mean(ups)),
            swaps_completed=self.completed,
            swap_failures=self.failures,
            mean_service_time=mean,
            event_log=self.log,
            service_times=list(self.service),
            per_rover_uptime=ups,
            invariant_checks=self.checks,
            free_slot_checks=self.free_slot_checks,
            max_charging_power=self.max_power,
            final_rover_states={r.id: r.state.value for r in self.rovers},
            final_module_locations={m.id: m.where() for m in self.modules},
        )


def run_sim(scenario: Scenario, n_rovers: int, duration: float | None = None,
            failure_model: FailureModel = NO_FAILURES, rng: np.random.Generator | None = None,
            n_terminals: int | None = None, check_invariants: bool = True) -> SimMetrics:
    """Simulate ``n_rovers`` sharing one hub for ``duration`` seconds."""
    if n_rovers < 1:
        raise ConfigurationError("n_rovers must be >= 1")
    terms = required_terminals(n_rovers) if n_terminals is None else n_terminals
    if terms < required_terminals(n_rovers):
        raise ConfigurationError(
            f"{terms} terminals cannot serve {n_rovers} rovers; need {required_terminals(n_rovers)}"
        )
    duration = scenario.sim_duration if duration is None else duration
    if not duration > 0.0:
        raise ConfigurationError("duration must be positive")
    if rng is None:
        from .core import derive_rng

        rng = derive_rng(scenario.seed, "fleetsim")
    sim = _Sim(scenario.fleet, scenario.fleet_ops, n_rovers, duration, failure_model, rng, terms,
               check_invariants)
    return sim.run()
