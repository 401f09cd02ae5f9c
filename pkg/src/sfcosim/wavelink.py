"""Lossless Bergeron line linking two solvers, and real<->envelope conversion.

Each line end keeps a ring buffer of its outgoing wave quantity
``w = v/z_c + i`` (``i`` flowing from the node into the line). The far end
sees a Norton equivalent: shunt ``1/z_c`` plus the history current::

    i_h(t) = -(v_far(t - tau)/z_c + i_far(t - tau)) = -w_far(t - tau)

When one end lives in the shifted-frequency solver its buffer holds complex
envelopes. A delay ``tau`` of an analytic signal becomes
``W(t - tau) * exp(-j*omega_s*tau)`` on envelopes. Real samples crossing
into the envelope domain go through a :class:`BoundaryConverter`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .spectral import (EspritConfig, SampleWindow, SpectralError, SpectralEstimate, analyze,
                       synthesize_imaginary)

_SNAP = 1e-9


class LinkError(ValueError):
    pass


class InsufficientHistoryError(LinkError):
    pass


def _split_time(t: float, dt: float):
    """Grid index ``j`` and fraction so that ``t = (j + frac) * dt``."""
    x = t / dt
    j = math.floor(x)
    frac = x - j
    if frac > 1 - _SNAP:
        j, frac = j + 1, 0.0
    elif frac < _SNAP:
        frac = 0.0
    return j, frac


def _cubic(at, j: int, frac: float, newest: int, oldest: Optional[int] = None):
    """Four-point Lagrange value at ``j + frac``.

    The stencil ends at the upper bracketing entry ``j + 1`` (so it reads no
    later data than linear interpolation) and is moved up only as far as
    needed to start at ``oldest``.
    """
    j0 = j - 2
    if oldest is not None:
        j0 = max(j0, oldest)
    if j0 + 3 > newest:
        raise InsufficientHistoryError(f"too few entries around index {j + frac:.6g}")
    x = j + frac - j0
    out = 0
    for m in range(4):
        weight = 1.0
        for o in range(4):
            if o != m:
                weight *= (x - o) / (m - o)
        out = out + weight * at(j0 + m)
    return out


class WaveBuffer:
    """Uniform-grid ring buffer; entry ``k`` holds the value at ``k * dt``.

    Times before zero read as zero (quiescent start) unless ``prehistory``
    supplies them. Reading an entry that
    has not been written yet, or was already overwritten, raises
    :class:`InsufficientHistoryError`.
    """

    def __init__(self, dt: float, capacity: int, dtype=float):
        if not dt > 0:
            raise LinkError("buffer dt must be positive")
        self.dt = dt
        self.capacity = int(capacity)
        self.dtype = dtype
        self._data = np.zeros(self.capacity, dtype=dtype)
        self.latest = -1
        #: value source for t < 0 (None: quiescent, reads as zero)
        self.prehistory: Optional[Callable[[float], object]] = None

    @classmethod
    def from_array(cls, values, dt: float):
        values = np.asarray(values)
        buf = cls(dt, values.size, values.dtype)
        buf._data[:] = values
        buf.latest = values.size - 1
        return buf

    def push(self, k: int, value) -> None:
        if k != self.latest + 1:
            raise LinkError(f"buffer expects step {self.latest + 1}, got {k}")
        self._data[k % self.capacity] = value
        self.latest = k

    def at(self, j: int):
        if j < 0:
            if self.prehistory is not None:
                return self._data.dtype.type(self.prehistory(j * self.dt))
            return self._data.dtype.type(0)
        if j > self.latest:
            raise InsufficientHistoryError(
                f"entry {j} (t={j * self.dt:.9g}) not yet available; latest is {self.latest}")
        if j <= self.latest - self.capacity:
            raise InsufficientHistoryError(f"entry {j} already overwritten")
        return self._data[j % self.capacity]

    def slice(self, j_end: int, count: int, stride: int = 1) -> np.ndarray:
        """``count`` entries ending at ``j_end`` spaced by ``stride``, oldest first."""
        idx = j_end - stride * np.arange(count - 1, -1, -1)
        return np.array([self.at(int(j)) for j in idx], dtype=self.dtype)

    def interp(self, t: float, method: str = "linear", limit: Optional[int] = None):
        """Value at ``t`` from the grid entries.

        ``linear`` blends the two bracketing entries, ``zoh`` holds the older
        one and ``cubic`` fits the upper bracket plus the three entries
        before it. Nothing newer than ``limit`` (default: the newest entry)
        is read.
        """
        j, frac = _split_time(t, self.dt)
        if frac == 0.0 or method == "zoh":
            return self.at(j)
        if method == "linear":
            return (1 - frac) * self.at(j) + frac * self.at(j + 1)
        if method != "cubic":
            raise LinkError(f"unknown interpolation method {method!r}")
        newest = self.latest if limit is None else limit
        return _cubic(self.at, j, frac, newest)


def interpolate_envelope(values, dt_macro: float, t: float, method: str = "zoh",
                         t0: float = 0.0) -> complex:
    """Envelope at ``t`` from samples at ``t0 + k*dt_macro``.

    ``zoh`` holds the newest sample at or before ``t``; ``linear`` blends
    the two bracketing samples; ``cubic`` fits the upper bracket and the three
    samples before it. Carrier rotation is applied by the caller.
    """
    values = np.asarray(values, dtype=complex)
    j, frac = _split_time(t - t0, dt_macro)
    j = min(max(j, 0), values.size - 1)
    if method == "zoh" or frac == 0.0 or j + 1 >= values.size:
        return complex(values[j])
    if method == "linear":
        return complex((1 - frac) * values[j] + frac * values[j + 1])
    if method == "cubic" and values.size >= 4:
        return complex(_cubic(values.__getitem__, j, frac, values.size - 1, 0))
    if method == "cubic":
        return complex((1 - frac) * values[j] + frac * values[j + 1])
    raise LinkError(f"unknown interpolation method {method!r}")


def envelope_to_emt(X: complex, omega_s: float, t: float) -> float:
    return float(np.real(X * np.exp(1j * omega_s * t)))


CONVERTER_MODES = ("esprit", "delay", "passthrough")
RECONSTRUCTIONS = ("zoh", "linear", "cubic")


@dataclass
class BoundaryConverter:
    """Builds complex envelopes from a buffered real boundary signal.

    ``esprit`` estimates the sinusoidal content of a trailing window
    (``window`` samples spaced ``stride`` buffer steps apart) and evaluates
    the quadrature signal from it. ``delay`` uses ``x(t - T0/4)`` as the
    quadrature signal, which is exact only at the fundamental. ``passthrough``
    takes the quadrature signal from ``quadrature``, a callable supplied by
    a harness that knows the signal in closed form.
    """

    mode: str = "esprit"
    omega_s: float = 2 * math.pi * 50.0
    period: float = 0.02
    window: int = 101
    stride: int = 1
    esprit: EspritConfig = field(default_factory=lambda: EspritConfig(1e-8))
    quadrature: Optional[Callable[[float], float]] = None
    noise_std: float = 0.0
    seed: int = 0
    min_window: int = 21

    def __post_init__(self):
        if self.mode not in CONVERTER_MODES:
            raise LinkError(f"unknown converter mode {self.mode!r}")
        if self.window < 3 or self.window % 2 == 0:
            raise LinkError("converter window must be odd and >= 3")
        if self.stride < 1:
            raise LinkError("converter stride must be >= 1")
        if self.mode == "passthrough" and self.quadrature is None:
            raise LinkError("passthrough mode needs an exact quadrature callable")
        self._cache_key = None
        self._cache: Optional[SpectralEstimate] = None
        self._rng = np.random.default_rng(self.seed)

    def required_span(self) -> float:
        """History (seconds) the buffer must retain behind the newest sample."""
        if self.mode == "delay":
            return self.period / 4
        return 0.0

    def required_entries(self, dt: float) -> int:
        if self.mode == "esprit":
            return (self.window - 1) * self.stride + 1
        return int(math.ceil(self.required_span() / dt)) + 2

    def estimate(self, buffer: WaveBuffer, j_end: int) -> SpectralEstimate:
        """Spectral estimate of the window ending at buffer entry ``j_end``.

        Near start-up, without pre-history, only samples since ``t = 0`` are used
        (largest odd count that fits); shorter than ``min_window`` gives an
        empty estimate.
        """
        key = (id(buffer), j_end)
        if self._cache_key == key:
            return self._cache
        count = self.window
        if buffer.prehistory is None:
            count = min(count, j_end // self.stride + 1)
        if count % 2 == 0:
            count -= 1
        if count < self.min_window:
            est = SpectralEstimate([], 0, np.zeros(0), j_end * buffer.dt, 0.0)
        else:
            x = buffer.slice(j_end, count, self.stride)
            if self.noise_std:
                x = x + self._rng.normal(0.0, self.noise_std, x.size)
            win = SampleWindow(x, buffer.dt * self.stride, j_end * buffer.dt)
            try:
                est = analyze(win, self.esprit)
            except SpectralError:
                # degenerate window: keep the previous model, if any
                if self._cache is None:
                    raise
                est = self._cache
        self._cache_key, self._cache = key, est
        return est

    def quadrature_at(self, buffer: WaveBuffer, t: float, t_avail: float) -> float:
        if self.mode == "esprit":
            j_end, _ = _split_time(t_avail, buffer.dt)
            return synthesize_imaginary(self.estimate(buffer, j_end), t)
        if self.mode == "delay":
            return float(np.real(buffer.interp(t - self.period / 4)))
        return float(self.quadrature(t))

    def envelope(self, buffer: WaveBuffer, t: float, t_avail: Optional[float] = None) -> complex:
        """Envelope ``(x(t) + j*x_hat(t)) exp(-j*omega_s*t)``.

        ``t_avail`` bounds the data the estimator may look at (defaults to
        the newest buffer entry); ``t`` should not exceed it.
        """
        if t_avail is None:
            t_avail = buffer.latest * buffer.dt
        x = float(np.real(buffer.interp(t)))
        x_hat = self.quadrature_at(buffer, t, t_avail)
        return complex(x, x_hat) * np.exp(-1j * self.omega_s * t)


def emt_to_envelope(conv: BoundaryConverter, buffer: WaveBuffer, t: float,
                    t_avail: Optional[float] = None) -> complex:
    return conv.envelope(buffer, t, t_avail)


def analytic_record(x, dt: float, conv: BoundaryConverter, refresh: Optional[int] = None,
                    start: int = 0) -> np.ndarray:
    """Analytic signal ``x + j*x_hat`` for ``x[start:]`` built by ``conv``.

    In ``esprit`` mode the estimate is refreshed every ``refresh`` samples
    (default: the converter stride) from the window ending at the end of the
    current block, so each instant lies inside the window that produced it.
    """
    x = np.asarray(x, dtype=float)
    buf = WaveBuffer.from_array(x, dt)
    refresh = refresh or conv.stride
    out = np.empty(x.size - start, dtype=complex)
    for j in range(start, x.size):
        t = j * dt
        if conv.mode == "esprit":
            j_end = min(-(-j // refresh) * refresh, x.size - 1)
            x_hat = conv.quadrature_at(buf, t, j_end * dt)
        else:
            x_hat = conv.quadrature_at(buf, t, t)
        out[j - start] = complex(x[j], x_hat)
    return out


def negative_frequency_ratio(z) -> float:
    """Largest negative-frequency DFT bin over the largest positive one."""
    spec = np.abs(np.fft.fft(np.asarray(z, dtype=complex)))
    freqs = np.fft.fftfreq(spec.size)
    pos = spec[freqs > 0].max(initial=0.0)
    neg = spec[freqs < 0].max(initial=0.0)
    if pos == 0:
        return 0.0 if neg == 0 else math.inf
    return float(neg / pos)


@dataclass
class LineEnd:
    """Binding of one line end to a solver node.

    ``envelope`` ends exchange complex envelopes at carrier ``omega_s``.
    """

    subsystem: str
    node: int
    dt: float
    envelope: bool = False
    omega_s: float = 0.0
    buffer: Optional[WaveBuffer] = None


class TravelingWaveLink:
    """Single-phase lossless Bergeron line between two line ends."""

    def __init__(self, z_c: float, tau: float, end_a: LineEnd, end_b: LineEnd,
                 converter: Optional[BoundaryConverter] = None,
                 reconstruction: str = "cubic", name: str = "link",
                 extra_span: float = 0.0):
        if not z_c > 0:
            raise LinkError(f"z_c must be positive, got {z_c}")
        if not tau > 0:
            raise LinkError(f"tau must be positive, got {tau}")
        if reconstruction not in RECONSTRUCTIONS:
            raise LinkError(f"unknown reconstruction {reconstruction!r}")
        self.name = name
        self.z_c = float(z_c)
        self.tau = float(tau)
        self.ends = {"a": end_a, "b": end_b}
        self.converter = converter
        self.reconstruction = reconstruction
        mixed = end_a.envelope != end_b.envelope
        if mixed and converter is None:
            raise LinkError(f"link {name!r} joins real and envelope ends; converter needed")
        for key, end in self.ends.items():
            far = self.ends["b" if key == "a" else "a"]
            span = self.tau + max(end_a.dt, end_b.dt) + extra_span + 2 * far.dt
            entries = int(math.ceil(span / end.dt)) + 4
            if converter is not None and not end.envelope and mixed:
                entries += converter.required_entries(end.dt)
            end.buffer = WaveBuffer(end.dt, entries, complex if end.envelope else float)

    def far(self, end: str) -> LineEnd:
        return self.ends["b" if end == "a" else "a"]

    @property
    def conductance(self) -> float:
        return 1.0 / self.z_c

    def start(self) -> None:
        """Write the quiescent ``t = 0`` entry at both ends."""
        for end in self.ends.values():
            if end.buffer.latest < 0:
                end.buffer.push(0, 0.0)

    def history_current(self, end: str, t: float, t_avail: Optional[float] = None):
        """Norton history ``-w_far(t - tau)`` as seen from ``end`` at time ``t``.

        Real for an EMT end, a complex envelope for a shifted-frequency end.
        ``t_avail`` is the newest far-end time the caller may use (only
        needed when a converter sits between the ends).
        """
        own, far = self.ends[end], self.far(end)
        s = t - self.tau
        if s < 0 and far.buffer.prehistory is None:
            return 0j if own.envelope else 0.0
        if t_avail is not None:
            j, frac = _split_time(s, far.dt)
            hold = far.envelope and self.reconstruction == "zoh"
            newest = (j + (frac > 0 and not hold)) * far.dt
            if newest > t_avail + 1e-9 * far.dt:
                raise LinkError(
                    f"link {self.name!r}: end {end!r} at t={t:.9g} would read far-end "
                    f"data at {newest:.9g} > {t_avail:.9g}")
        if not own.envelope and not far.envelope:
            return -float(far.buffer.interp(s))
        limit = None if t_avail is None else _split_time(t_avail, far.dt)[0]
        if not own.envelope:
            w = far.buffer.interp(s, self.reconstruction, limit)
            return -float(np.real(w * np.exp(1j * far.omega_s * s)))
        if far.envelope:
            w = far.buffer.interp(s, self.reconstruction, limit)
            return -complex(w) * np.exp(-1j * own.omega_s * self.tau)
        w = self.converter.envelope(far.buffer, s, t_avail)
        return -w * np.exp(-1j * own.omega_s * self.tau)

    def record(self, end: str, k: int, v, i_h):
        """Store the end's outgoing wave after its solve at step ``k``.

        Returns the line current flowing from the node into the line.
        """
        current = v / self.z_c + i_h
        self.ends[end].buffer.push(k, v / self.z_c + current)
        return current


def history_current(link: TravelingWaveLink, end: str, t: float,
                    t_avail: Optional[float] = None):
    return link.history_current(end, t, t_avail)
