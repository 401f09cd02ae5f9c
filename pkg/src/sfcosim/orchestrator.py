"""Multi-rate co-simulation driver.

The EMT subsystem steps at ``dt_micro`` and the shifted-frequency subsystem
at ``dt_macro = k * dt_micro``. They only interact through Bergeron links
whose travel time is at least ``dt_macro``, so during the interval
``(T, T + dt_macro]`` each side only needs remote data up to ``T``. Both
sides therefore advance from the data available at the barrier ``T``
(Jacobi exchange). No iteration is needed and the result does not depend
on the order in which the two sides run.
"""
from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .emt import EMTSolver
from .network import Network, NetworkError
from .results import ResultSet
from .sfemt import OMEGA_50HZ, SFEMTSolver
from .spectral import EspritConfig
from .steady import SteadyState
from .wavelink import (RECONSTRUCTIONS, BoundaryConverter, LineEnd, TravelingWaveLink,
                       interpolate_envelope)

INTERFACES = ("esprit", "delay", "passthrough", "monolithic")


class ScheduleError(ValueError):
    pass


@dataclass
class Subsystem:
    name: str
    network: Network
    kind: str = "emt"
    dt: float = 20e-6
    omega_s: float = OMEGA_50HZ

    def __post_init__(self):
        if self.kind not in ("emt", "sfemt"):
            raise ScheduleError(f"subsystem {self.name!r}: kind must be emt or sfemt")
        if not self.dt > 0:
            raise ScheduleError(f"subsystem {self.name!r}: dt must be positive")


@dataclass
class LinkSpec:
    name: str
    z_c: float
    tau: float
    a: tuple
    b: tuple


@dataclass
class Recorder:
    """Signal tap.

    ``kind`` is ``node`` (voltage of ``target`` in ``subsystem``), ``branch``
    (current of branch ``target``) or ``link`` (``quantity`` = current or
    voltage at end ``end`` of link ``target``).
    """

    name: str
    kind: str
    target: object
    subsystem: Optional[str] = None
    end: str = "a"
    quantity: str = "current"


@dataclass
class ConverterConfig:
    window: int = 101
    stride: int = 0          # 0: one sample per macro step
    rel_threshold: float = 1e-6
    max_order: Optional[int] = 4
    f_min: float = 0.1
    period: float = 0.02
    noise_std: float = 0.0


@dataclass
class Schedule:
    dt_micro: float
    dt_macro: float
    ratio: int
    t_end: float

    @classmethod
    def from_steps(cls, dt_micro: float, dt_macro: float, t_end: float) -> "Schedule":
        if not (dt_micro > 0 and dt_macro > 0):
            raise ScheduleError("step sizes must be positive")
        ratio = dt_macro / dt_micro
        k = int(round(ratio))
        if k < 1 or abs(ratio - k) > 1e-9 * k:
            raise ScheduleError(
                f"dt_macro = {dt_macro:g} is not an integer multiple of dt_micro = {dt_micro:g}")
        if not t_end > 0:
            raise ScheduleError("t_end must be positive")
        return cls(dt_micro, k * dt_micro, k, t_end)

    @property
    def n_macro(self) -> int:
        return int(round(self.t_end / self.dt_macro))

    def check_link(self, name: str, tau: float) -> None:
        if tau < self.dt_macro * (1 - 1e-12):
            raise ScheduleError(
                f"link {name!r}: travel time {tau:g} s is shorter than the exchange "
                f"interval {self.dt_macro:g} s; the subsystems cannot be decoupled")


@dataclass
class Scenario:
    subsystems: list
    links: list
    recorders: list = field(default_factory=list)
    t_end: float = 0.5
    interface: str = "esprit"
    converter: ConverterConfig = field(default_factory=ConverterConfig)
    reconstruction: str = "cubic"
    seed: int = 0
    init: str = "zero"

    def __post_init__(self):
        if self.interface not in INTERFACES:
            raise ScheduleError(f"unknown interface {self.interface!r}")
        if self.reconstruction not in RECONSTRUCTIONS:
            raise ScheduleError(f"unknown reconstruction {self.reconstruction!r}")
        if self.init not in ("zero", "steady"):
            raise ScheduleError(f"init must be 'zero' or 'steady', got {self.init!r}")

    def subsystem(self, name: str) -> Subsystem:
        for s in self.subsystems:
            if s.name == name:
                return s
        raise ScheduleError(f"unknown subsystem {name!r}")

    def schedule(self) -> Schedule:
        dts = [s.dt for s in self.subsystems]
        return Schedule.from_steps(min(dts), max(dts), self.t_end)


def _node_offsets(scenario: Scenario):
    offsets, count = {}, 1
    for s in scenario.subsystems:
        offsets[s.name] = count - 1
        count += s.network.node_count - 1
    return offsets, count


def merge_subsystems(scenario: Scenario, dt: Optional[float] = None) -> Scenario:
    """Fold every subsystem into one EMT network (the monolithic reference).

    Node ``n`` of subsystem ``S`` keeps its meaning via renumbering; branch
    names become ``S.name``. Links become internal to the merged network.
    """
    offsets, count = _node_offsets(scenario)
    merged = Network(count)

    def node(sub, n):
        return 0 if n == 0 else n + offsets[sub]

    for s in scenario.subsystems:
        for b in s.network.branches:
            merged.branches.append(replace(
                b, name=f"{s.name}.{b.name}",
                n_from=node(s.name, b.n_from), n_to=node(s.name, b.n_to)))
    dt = dt or min(s.dt for s in scenario.subsystems)
    mono = Subsystem("monolithic", merged, "emt", dt)
    links = [LinkSpec(l.name, l.z_c, l.tau, ("monolithic", node(*l.a)),
                      ("monolithic", node(*l.b))) for l in scenario.links]
    recorders = []
    for r in scenario.recorders:
        if r.kind == "node":
            recorders.append(replace(r, subsystem="monolithic",
                                     target=node(r.subsystem, int(r.target))))
        elif r.kind == "branch":
            recorders.append(replace(r, subsystem="monolithic",
                                     target=f"{r.subsystem}.{r.target}"))
        else:
            recorders.append(r)
    return replace(scenario, subsystems=[mono], links=links, recorders=recorders,
                   interface="passthrough")


class _Runner:
    """One solver plus its link ports."""

    def __init__(self, sub: Subsystem, envelope: bool, port_list):
        self.sub = sub
        self.envelope = envelope
        self.port_list = port_list  # [(link, end_key)]
        ports = [(link.ends[e].node, link.conductance) for link, e in port_list]
        if envelope:
            self.solver = SFEMTSolver(sub.network, sub.dt, sub.omega_s, ports)
        else:
            self.solver = EMTSolver(sub.network, sub.dt, ports)
        self.taps = []   # (recorder, getter)
        self.log = {}

    def advance(self, steps: int, t_avail: float):
        s = self.solver
        for _ in range(steps):
            t_next = (s.k + 1) * s.dt
            hist = [link.history_current(
                        e, t_next, s.t if link.far(e).subsystem == self.sub.name else t_avail)
                    for link, e in self.port_list]
            s.step([-h for h in hist])
            for (link, e), h in zip(self.port_list, hist):
                cur = link.record(e, s.k, s.v[link.ends[e].node], h)
                self._last[(id(link), e)] = (s.v[link.ends[e].node], cur)
            for rec, getter in self.taps:
                self.log[rec.name].append(getter())
            self.times.append(s.t)

    def prepare(self):
        s = self.solver
        self._last = {}
        for link, e in self.port_list:
            v = s.v[link.ends[e].node]
            buf = link.ends[e].buffer
            if buf.prehistory is not None:
                w0 = buf.prehistory(0.0)
                buf.push(0, w0)
                self._last[(id(link), e)] = (v, w0 - v / link.z_c)
            else:
                self._last[(id(link), e)] = (v, link.record(e, 0, v, 0.0))
        self.times = [0.0]
        for rec, getter in self.taps:
            self.log[rec.name] = [getter()]


class CosimRun:
    """Wires a scenario into solvers, links and recorders, then runs it."""

    def __init__(self, scenario: Scenario, interface: Optional[str] = None,
                 parallel: bool = False, quadrature=None):
        interface = interface or scenario.interface
        if interface not in INTERFACES:
            raise ScheduleError(f"unknown interface {interface!r}")
        self.requested = interface
        if interface == "monolithic":
            scenario = merge_subsystems(scenario)
            interface = "passthrough"
        self.scenario = scenario
        self.interface = interface
        self.parallel = parallel
        self.schedule = scenario.schedule()
        self._build(quadrature)

    def _envelope_side(self, sub: Subsystem) -> bool:
        if sub.kind != "sfemt":
            return False
        return self.interface != "passthrough" or self._quadrature is not None

    def _build(self, quadrature):
        sc, sched = self.scenario, self.schedule
        self._quadrature = quadrature
        names = {s.name for s in sc.subsystems}
        if len(names) != len(sc.subsystems):
            raise ScheduleError("duplicate subsystem names")
        env = {s.name: self._envelope_side(s) for s in sc.subsystems}
        port_lists = {s.name: [] for s in sc.subsystems}
        self.links = {}
        cc = sc.converter
        for spec in sc.links:
            for sub, n in (spec.a, spec.b):
                if sub not in names:
                    raise ScheduleError(f"link {spec.name!r}: unknown subsystem {sub!r}")
                if not 0 < n < sc.subsystem(sub).network.node_count:
                    raise ScheduleError(f"link {spec.name!r}: node {n} not in {sub!r}")
            if spec.a[0] != spec.b[0]:
                sched.check_link(spec.name, spec.tau)
            else:
                Schedule.from_steps(sc.subsystem(spec.a[0]).dt, sc.subsystem(spec.a[0]).dt,
                                    sc.t_end).check_link(spec.name, spec.tau)
            ends = []
            for sub, n in (spec.a, spec.b):
                s = sc.subsystem(sub)
                ends.append(LineEnd(sub, n, s.dt, env[sub], s.omega_s if env[sub] else 0.0))
            converter = None
            if ends[0].envelope != ends[1].envelope:
                real_dt = ends[0].dt if not ends[0].envelope else ends[1].dt
                omega = ends[0].omega_s or ends[1].omega_s
                mode = self.interface if self._quadrature is None else "passthrough"
                stride = cc.stride or max(1, int(round(sched.dt_macro / real_dt)))
                converter = BoundaryConverter(
                    mode=mode, omega_s=omega, period=cc.period, window=cc.window,
                    stride=stride,
                    esprit=EspritConfig(cc.rel_threshold, cc.max_order, cc.f_min),
                    quadrature=self._quadrature, noise_std=cc.noise_std, seed=sc.seed)
            link = TravelingWaveLink(spec.z_c, spec.tau, ends[0], ends[1], converter,
                                     sc.reconstruction, spec.name,
                                     extra_span=cc.period / 4 + sched.dt_macro)
            self.links[spec.name] = link
            port_lists[spec.a[0]].append((link, "a"))
            port_lists[spec.b[0]].append((link, "b"))
        self.runners = {s.name: _Runner(s, env[s.name], port_lists[s.name])
                        for s in sc.subsystems}
        if sc.init == "steady":
            self._initialize_steady()
        for rec in sc.recorders:
            self._attach(rec)

    def _initialize_steady(self):
        """Seed solver states and line pre-history from the phasor solution."""
        sc = self.scenario
        offsets, _ = _node_offsets(sc)
        merged = merge_subsystems(sc)
        lines = [(l.a[1], l.b[1], l.z_c, l.tau) for l in merged.links]
        ss = SteadyState(merged.subsystems[0].network, lines)
        if not ss.freqs:
            return
        b_off = 0
        for sub in sc.subsystems:
            r = self.runners[sub.name]
            omega = sub.omega_s if r.envelope else None
            nodes = [0] + [n + offsets[sub.name] for n in range(1, sub.network.node_count)]
            nb = len(sub.network.branches)
            r.solver.initialize(ss.node_voltages(0.0, omega)[nodes],
                                ss.branch_currents(0.0, omega)[b_off:b_off + nb])
            b_off += nb
        for li, link in enumerate(self.links.values()):
            for e, end in link.ends.items():
                omega = end.omega_s if end.envelope else None
                end.buffer.prehistory = (
                    lambda t, li=li, e=e, omega=omega: ss.wave(li, e, t, omega))

    def _attach(self, rec: Recorder):
        if rec.kind == "link":
            link = self.links.get(rec.target)
            if link is None:
                raise ScheduleError(f"recorder {rec.name!r}: unknown link {rec.target!r}")
            end = link.ends[rec.end]
            runner = self.runners[end.subsystem]
            idx = 1 if rec.quantity == "current" else 0
            key = (id(link), rec.end)
            runner.taps.append((rec, lambda r=runner, k=key, i=idx: r._last[k][i]))
            return
        runner = self.runners.get(rec.subsystem)
        if runner is None:
            raise ScheduleError(f"recorder {rec.name!r}: unknown subsystem {rec.subsystem!r}")
        s = runner.solver
        if rec.kind == "node":
            n = int(rec.target)
            if not 0 <= n < s.network.node_count:
                raise ScheduleError(f"recorder {rec.name!r}: node {n} out of range")
            runner.taps.append((rec, lambda s=s, n=n: s.v[n]))
        elif rec.kind == "branch":
            try:
                bi = s.network.branch_index(rec.target)
            except NetworkError as exc:
                raise ScheduleError(f"recorder {rec.name!r}: {exc}") from None
            runner.taps.append((rec, lambda s=s, bi=bi: s.i[bi]))
        else:
            raise ScheduleError(f"recorder {rec.name!r}: unknown kind {rec.kind!r}")

    def run(self) -> ResultSet:
        sched = self.schedule
        runners = list(self.runners.values())
        for r in runners:
            r.prepare()
        steps = {r.sub.name: int(round(sched.dt_macro / r.sub.dt)) for r in runners}
        pool = ThreadPoolExecutor(len(runners)) if self.parallel and len(runners) > 1 else None
        try:
            for kk in range(sched.n_macro):
                t_avail = kk * sched.dt_macro
                if pool is None:
                    for r in runners:
                        r.advance(steps[r.sub.name], t_avail)
                else:
                    futures = [pool.submit(r.advance, steps[r.sub.name], t_avail)
                               for r in runners]
                    for f in futures:
                        f.result()
        finally:
            if pool is not None:
                pool.shutdown()
        return self._collect()

    def _collect(self) -> ResultSet:
        rs = ResultSet(meta={
            "interface": self.requested,
            "dt_micro": repr(self.schedule.dt_micro),
            "dt_macro": repr(self.schedule.dt_macro),
            "t_end": repr(self.schedule.t_end),
            "reconstruction": self.scenario.reconstruction,
        })
        micro = self.schedule.dt_micro
        n_micro = int(round(self.schedule.t_end / micro))
        t_micro = micro * np.arange(n_micro + 1)
        for r in self.runners.values():
            t = np.array(r.times)
            for rec, _ in r.taps:
                vals = np.array(r.log[rec.name])
                if r.envelope:
                    omega = r.sub.omega_s
                    demod = np.array([
                        (interpolate_envelope(vals, r.sub.dt, tm, self.scenario.reconstruction)
                         * np.exp(1j * omega * tm)).real for tm in t_micro])
                    rs.add(rec.name, t_micro, demod)
                    rs.add(rec.name + "_env", t, vals.astype(complex))
                else:
                    rs.add(rec.name, t, np.real(vals).astype(float))
        return rs


def run(scenario: Scenario, interface: Optional[str] = None, **kw) -> ResultSet:
    """Run ``scenario`` with the given boundary interface.

    ``monolithic`` merges all subsystems into one EMT network at the
    smallest step (the accuracy reference); ``passthrough`` runs every
    subsystem as EMT and exchanges real values directly.
    """
    return CosimRun(scenario, interface, **kw).run()


def scenario_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]
