"""Plain-text scenario files.

A scenario file starts with a version line and continues with sections of
``key = value`` pairs; ``#`` starts a comment::

    sfcosim-scenario 1

    [run]
    t_end = 0.5
    interface = esprit

    [subsystem S1]
    kind = emt
    dt = 2e-05
    nodes = 4

    [branch S1 Rload]
    kind = R
    from = 3
    to = 0
    value = 300.0

    [branch S1 V]
    kind = V
    from = 1
    to = 0
    tones = 50.0 100000.0 0.1
    t_on = -inf

    [link L1]
    z_c = 300.0
    tau = 0.00061213
    a = S1 3
    b = S2 3

    [recorder v_bus]
    kind = node
    subsystem = S1
    target = 3

Several tones are separated by ``;`` as ``f amplitude phase`` triples.
Every problem is reported with its line number and field name through a
:class:`ScenarioError` subclass specific to the kind of problem.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .network import BRANCH_KINDS, DEFAULT_SOURCE_RESISTANCE, Network, NetworkError, Source, Tone
from .orchestrator import (INTERFACES, ConverterConfig, LinkSpec, Recorder, Scenario,
                           ScheduleError, Subsystem)
from .sfemt import OMEGA_50HZ
from .wavelink import RECONSTRUCTIONS

FORMAT_NAME = "sfcosim-scenario"
FORMAT_VERSION = 1


class ScenarioError(ValueError):
    """Diagnostic tied to a place in the scenario text."""

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"field {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


class ScenarioSyntaxError(ScenarioError):
    pass


class UnknownKeyError(ScenarioError):
    pass


class MissingKeyError(ScenarioError):
    pass


class InvalidValueError(ScenarioError):
    pass


class NegativeParameterError(InvalidValueError):
    pass


class DanglingReferenceError(ScenarioError):
    """A node, subsystem, branch or link that does not exist."""


class StepRatioError(ScenarioError):
    pass


class LinkTimingError(ScenarioError):
    pass


@dataclass
class _Entry:
    value: str
    line: int


@dataclass
class _Section:
    kind: str
    args: tuple
    line: int
    entries: dict = field(default_factory=dict)

    @property
    def title(self) -> str:
        return " ".join((self.kind,) + self.args)

    def has(self, key: str) -> bool:
        return key in self.entries

    def raw(self, key: str, default=None) -> Optional[str]:
        e = self.entries.get(key)
        if e is None:
            if default is None:
                raise MissingKeyError(f"[{self.title}] needs this field", self.line, key)
            return default
        return e.value

    def where(self, key: str) -> int:
        e = self.entries.get(key)
        return e.line if e is not None else self.line

    def number(self, key: str, default=None, positive=False, nonnegative=False) -> float:
        text = self.raw(key, None if default is None else repr(default))
        try:
            x = float(text)
        except ValueError:
            raise InvalidValueError(f"[{self.title}] expected a number, got {text!r}",
                                    self.where(key), key) from None
        if math.isnan(x):
            raise InvalidValueError(f"[{self.title}] NaN is not allowed", self.where(key), key)
        if positive and not x > 0:
            raise NegativeParameterError(f"[{self.title}] must be positive, got {text}",
                                         self.where(key), key)
        if nonnegative and x < 0:
            raise NegativeParameterError(f"[{self.title}] must not be negative, got {text}",
                                         self.where(key), key)
        return x

    def integer(self, key: str, default=None, minimum=None) -> int:
        text = self.raw(key, None if default is None else str(default))
        try:
            n = int(text)
        except ValueError:
            raise InvalidValueError(f"[{self.title}] expected an integer, got {text!r}",
                                    self.where(key), key) from None
        if minimum is not None and n < minimum:
            cls = NegativeParameterError if n < 0 else InvalidValueError
            raise cls(f"[{self.title}] must be at least {minimum}, got {n}",
                      self.where(key), key)
        return n

    def choice(self, key: str, options, default=None) -> str:
        text = self.raw(key, default)
        if text not in options:
            raise InvalidValueError(
                f"[{self.title}] expected one of {', '.join(options)}, got {text!r}",
                self.where(key), key)
        return text

    def check_keys(self, allowed) -> None:
        for key, e in self.entries.items():
            if key not in allowed:
                raise UnknownKeyError(f"[{self.title}] has no field named {key!r}", e.line, key)


_SECTION_ARGS = {"run": 0, "converter": 0, "subsystem": 1, "branch": 2, "link": 1,
                 "recorder": 1}

_ALLOWED = {
    "run": {"t_end", "interface", "reconstruction", "init", "seed"},
    "converter": {"window", "stride", "rel_threshold", "max_order", "f_min", "period",
                  "noise_std"},
    "subsystem": {"kind", "dt", "nodes", "omega_s"},
    "branch": {"kind", "from", "to", "value", "tones", "dc", "t_on", "r_internal"},
    "link": {"z_c", "tau", "a", "b"},
    "recorder": {"kind", "subsystem", "target", "end", "quantity"},
}


def _split_sections(text: str) -> list:
    sections = []
    header_seen = False
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not header_seen:
            parts = line.split()
            if len(parts) != 2 or parts[0] != FORMAT_NAME:
                raise ScenarioSyntaxError(
                    f"first line must be '{FORMAT_NAME} {FORMAT_VERSION}'", lineno)
            if parts[1] != str(FORMAT_VERSION):
                raise ScenarioSyntaxError(f"unsupported format version {parts[1]!r}", lineno)
            header_seen = True
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioSyntaxError(f"unterminated section header {line!r}", lineno)
            words = line[1:-1].split()
            if not words:
                raise ScenarioSyntaxError("empty section header", lineno)
            kind, args = words[0], tuple(words[1:])
            if kind not in _SECTION_ARGS:
                raise UnknownKeyError(f"unknown section [{kind}]", lineno)
            if len(args) != _SECTION_ARGS[kind]:
                raise ScenarioSyntaxError(
                    f"[{kind}] takes {_SECTION_ARGS[kind]} name(s), got {len(args)}", lineno)
            current = _Section(kind, args, lineno)
            sections.append(current)
            continue
        if "=" not in line:
            raise ScenarioSyntaxError(f"expected 'key = value', got {line!r}", lineno)
        if current is None:
            raise ScenarioSyntaxError("key outside of any section", lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        if key in current.entries:
            raise ScenarioSyntaxError(f"[{current.title}] repeats field {key!r}", lineno, key)
        current.entries[key] = _Entry(value, lineno)
    if not header_seen:
        raise ScenarioSyntaxError("empty scenario (missing version line)", 1)
    return sections


def _parse_tones(sec: _Section) -> tuple:
    text = sec.raw("tones", "")
    tones = []
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        parts = chunk.split()
        if len(parts) != 3:
            raise InvalidValueError(
                f"[{sec.title}] each tone is 'f amplitude phase', got {chunk!r}",
                sec.where("tones"), "tones")
        try:
            f, a, ph = (float(p) for p in parts)
        except ValueError:
            raise InvalidValueError(f"[{sec.title}] bad tone {chunk!r}",
                                    sec.where("tones"), "tones") from None
        if f < 0:
            raise NegativeParameterError(f"[{sec.title}] tone frequency must not be negative",
                                         sec.where("tones"), "tones")
        tones.append(Tone(f, a, ph))
    return tuple(tones)


def _node_ref(sec: _Section, key: str, subs: dict):
    parts = sec.raw(key).split()
    if len(parts) != 2:
        raise InvalidValueError(f"[{sec.title}] expected 'subsystem node'",
                                sec.where(key), key)
    name, node_text = parts
    if name not in subs:
        raise DanglingReferenceError(f"[{sec.title}] unknown subsystem {name!r}",
                                     sec.where(key), key)
    try:
        node = int(node_text)
    except ValueError:
        raise InvalidValueError(f"[{sec.title}] node must be an integer",
                                sec.where(key), key) from None
    count = subs[name].network.node_count
    if not 0 < node < count:
        raise DanglingReferenceError(
            f"[{sec.title}] node {node} does not exist in {name!r} (1..{count - 1})",
            sec.where(key), key)
    return name, node


def parse(text: str) -> Scenario:
    """Build a validated :class:`Scenario` from scenario-file text."""
    sections = _split_sections(text)
    for sec in sections:
        sec.check_keys(_ALLOWED[sec.kind])

    def single(kind):
        found = [s for s in sections if s.kind == kind]
        if len(found) > 1:
            raise ScenarioSyntaxError(f"section [{kind}] appears twice", found[1].line)
        return found[0] if found else _Section(kind, (), 1)

    def unique(kind):
        seen = {}
        for s in sections:
            if s.kind != kind:
                continue
            if s.args in seen:
                raise ScenarioSyntaxError(f"[{s.title}] defined twice", s.line)
            seen[s.args] = s
        return list(seen.values())

    run = single("run")
    t_end = run.number("t_end", positive=True)
    interface = run.choice("interface", INTERFACES[:3], "esprit")
    reconstruction = run.choice("reconstruction", RECONSTRUCTIONS, "cubic")
    init = run.choice("init", ("zero", "steady"), "zero")
    seed = run.integer("seed", 0, minimum=0)

    cs = single("converter")
    max_order_text = cs.raw("max_order", "4")
    if max_order_text == "none":
        max_order = None
    else:
        max_order = cs.integer("max_order", 4, minimum=0)
    converter = ConverterConfig(
        window=cs.integer("window", 101, minimum=3),
        stride=cs.integer("stride", 0, minimum=0),
        rel_threshold=cs.number("rel_threshold", 1e-6, positive=True),
        max_order=max_order,
        f_min=cs.number("f_min", 0.1, nonnegative=True),
        period=cs.number("period", 0.02, positive=True),
        noise_std=cs.number("noise_std", 0.0, nonnegative=True),
    )
    if converter.window % 2 == 0:
        raise InvalidValueError("[converter] window must be odd", cs.where("window"), "window")
    if not converter.rel_threshold < 1:
        raise InvalidValueError("[converter] rel_threshold must be below 1",
                                cs.where("rel_threshold"), "rel_threshold")

    subs = {}
    for sec in unique("subsystem"):
        name = sec.args[0]
        kind = sec.choice("kind", ("emt", "sfemt"))
        dt = sec.number("dt", positive=True)
        nodes = sec.integer("nodes", minimum=2)
        omega = sec.number("omega_s", OMEGA_50HZ, nonnegative=True)
        subs[name] = Subsystem(name, Network(nodes), kind, dt, omega)
    if not subs:
        raise MissingKeyError("scenario defines no [subsystem]", 1)

    for sec in unique("branch"):
        sub_name, name = sec.args
        if sub_name not in subs:
            raise DanglingReferenceError(f"[{sec.title}] unknown subsystem {sub_name!r}",
                                         sec.line)
        net = subs[sub_name].network
        kind = sec.choice("kind", BRANCH_KINDS)
        ends = []
        for key in ("from", "to"):
            n = sec.integer(key)
            if not 0 <= n < net.node_count:
                raise DanglingReferenceError(
                    f"[{sec.title}] node {n} does not exist in {sub_name!r} "
                    f"(0..{net.node_count - 1})", sec.where(key), key)
            ends.append(n)
        if ends[0] == ends[1]:
            raise InvalidValueError(f"[{sec.title}] both terminals on node {ends[0]}",
                                    sec.where("to"), "to")
        if kind in "RLC":
            for key in ("tones", "dc", "t_on", "r_internal"):
                if sec.has(key):
                    raise UnknownKeyError(f"[{sec.title}] {kind} branches take no {key!r}",
                                          sec.where(key), key)
            value = sec.number("value", positive=True)
            net.add(name, kind, ends[0], ends[1], value)
            continue
        if sec.has("value"):
            raise UnknownKeyError(f"[{sec.title}] sources take tones/dc, not 'value'",
                                  sec.where("value"), "value")
        source = Source(_parse_tones(sec), sec.number("dc", 0.0), sec.number("t_on", 0.0))
        kw = {}
        if kind == "V":
            kw["r_internal"] = sec.number("r_internal", DEFAULT_SOURCE_RESISTANCE,
                                          positive=True)
        elif sec.has("r_internal"):
            raise UnknownKeyError(f"[{sec.title}] current sources take no 'r_internal'",
                                  sec.where("r_internal"), "r_internal")
        net.add(name, kind, ends[0], ends[1], source=source, **kw)

    links = []
    for sec in unique("link"):
        a = _node_ref(sec, "a", subs)
        b = _node_ref(sec, "b", subs)
        links.append(LinkSpec(sec.args[0], sec.number("z_c", positive=True),
                              sec.number("tau", positive=True), a, b))

    recorders = []
    link_names = {l.name for l in links}
    for sec in unique("recorder"):
        name = sec.args[0]
        kind = sec.choice("kind", ("node", "branch", "link"))
        if kind == "link":
            target = sec.raw("target")
            if target not in link_names:
                raise DanglingReferenceError(f"[{sec.title}] unknown link {target!r}",
                                             sec.where("target"), "target")
            for key in ("subsystem",):
                if sec.has(key):
                    raise UnknownKeyError(f"[{sec.title}] link recorders take no {key!r}",
                                          sec.where(key), key)
            recorders.append(Recorder(name, "link", target, None,
                                      sec.choice("end", ("a", "b"), "a"),
                                      sec.choice("quantity", ("current", "voltage"),
                                                 "current")))
            continue
        for key in ("end", "quantity"):
            if sec.has(key):
                raise UnknownKeyError(f"[{sec.title}] {kind} recorders take no {key!r}",
                                      sec.where(key), key)
        sub_name = sec.raw("subsystem")
        if sub_name not in subs:
            raise DanglingReferenceError(f"[{sec.title}] unknown subsystem {sub_name!r}",
                                         sec.where("subsystem"), "subsystem")
        net = subs[sub_name].network
        if kind == "node":
            n = sec.integer("target")
            if not 0 <= n < net.node_count:
                raise DanglingReferenceError(
                    f"[{sec.title}] node {n} does not exist in {sub_name!r}",
                    sec.where("target"), "target")
            recorders.append(Recorder(name, "node", n, sub_name))
        else:
            target = sec.raw("target")
            try:
                net.branch_index(target)
            except NetworkError:
                raise DanglingReferenceError(
                    f"[{sec.title}] no branch {target!r} in {sub_name!r}",
                    sec.where("target"), "target") from None
            recorders.append(Recorder(name, "branch", target, sub_name))

    scenario = Scenario(list(subs.values()), links, recorders, t_end, interface, converter,
                        reconstruction, seed, init)
    _check_schedule(scenario, sections)
    return scenario


def _check_schedule(scenario: Scenario, sections) -> None:
    def line_of(kind, *args):
        for s in sections:
            if s.kind == kind and (not args or s.args == args):
                return s
        return None

    try:
        sched = scenario.schedule()
    except ScheduleError as exc:
        sec = line_of("subsystem")
        raise StepRatioError(str(exc), sec.where("dt") if sec else None, "dt") from None
    for sub in scenario.subsystems:
        ratio = sub.dt / sched.dt_micro
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            sec = line_of("subsystem", sub.name)
            raise StepRatioError(
                f"dt of {sub.name!r} is not an integer multiple of {sched.dt_micro:g}",
                sec.where("dt"), "dt")
    for link in scenario.links:
        dt_link = sched.dt_macro if link.a[0] != link.b[0] else scenario.subsystem(link.a[0]).dt
        if link.tau < dt_link * (1 - 1e-12):
            sec = line_of("link", link.name)
            raise LinkTimingError(
                f"[link {link.name}] travel time {link.tau:g} s is shorter than the "
                f"exchange interval {dt_link:g} s", sec.where("tau"), "tau")
    for sub in scenario.subsystems:
        ports = [n for l in scenario.links for s, n in (l.a, l.b) if s == sub.name]
        try:
            sub.network.validate(grounded=ports)
        except NetworkError as exc:
            sec = line_of("subsystem", sub.name)
            raise DanglingReferenceError(f"[subsystem {sub.name}] {exc}",
                                         sec.line if sec else None) from None


def _num(x: float) -> str:
    return repr(float(x))


def serialize(scenario: Scenario) -> str:
    """Canonical text form; ``parse(serialize(s))`` rebuilds ``s``."""
    out = [f"{FORMAT_NAME} {FORMAT_VERSION}", ""]

    def section(header, pairs):
        out.append(f"[{header}]")
        out.extend(f"{k} = {v}" for k, v in pairs)
        out.append("")

    sc, cc = scenario, scenario.converter
    section("run", [("t_end", _num(sc.t_end)), ("interface", sc.interface),
                    ("reconstruction", sc.reconstruction), ("init", sc.init),
                    ("seed", str(sc.seed))])
    section("converter", [
        ("window", str(cc.window)), ("stride", str(cc.stride)),
        ("rel_threshold", _num(cc.rel_threshold)),
        ("max_order", "none" if cc.max_order is None else str(cc.max_order)),
        ("f_min", _num(cc.f_min)), ("period", _num(cc.period)),
        ("noise_std", _num(cc.noise_std))])
    for sub in sc.subsystems:
        section(f"subsystem {sub.name}", [
            ("kind", sub.kind), ("dt", _num(sub.dt)),
            ("nodes", str(sub.network.node_count)), ("omega_s", _num(sub.omega_s))])
    for sub in sc.subsystems:
        for b in sub.network.branches:
            pairs = [("kind", b.kind), ("from", str(b.n_from)), ("to", str(b.n_to))]
            if b.kind in "RLC":
                pairs.append(("value", _num(b.value)))
            else:
                tones = "; ".join(f"{_num(t.f)} {_num(t.amplitude)} {_num(t.phase)}"
                                  for t in b.source.tones)
                pairs += [("tones", tones), ("dc", _num(b.source.dc)),
                          ("t_on", _num(b.source.t_on))]
                if b.kind == "V":
                    pairs.append(("r_internal", _num(b.r_internal)))
            section(f"branch {sub.name} {b.name}", pairs)
    for l in sc.links:
        section(f"link {l.name}", [
            ("z_c", _num(l.z_c)), ("tau", _num(l.tau)),
            ("a", f"{l.a[0]} {l.a[1]}"), ("b", f"{l.b[0]} {l.b[1]}")])
    for r in sc.recorders:
        if r.kind == "link":
            pairs = [("kind", "link"), ("target", r.target), ("end", r.end),
                     ("quantity", r.quantity)]
        else:
            pairs = [("kind", r.kind), ("subsystem", r.subsystem), ("target", str(r.target))]
        section(f"recorder {r.name}", pairs)
    return "\n".join(out).rstrip("\n") + "\n"


def load(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def save(scenario: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(scenario))
