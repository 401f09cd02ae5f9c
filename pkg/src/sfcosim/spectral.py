"""Subspace spectral estimation and analytic-signal construction.

The pipeline turns a short record of real samples into a list of
sinusoidal components (frequency, amplitude, phase)::

    Hankel matrix -> SVD -> model order -> rotational-invariance poles
    -> least-squares phasors -> components

The components give the quadrature signal ``x_hat`` directly, so
``x + j*x_hat`` is an analytic signal with no negative-frequency content,
and multiplying by ``exp(-j*omega_s*t)`` yields the complex envelope used
by the shifted-frequency solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import hankel

#: Frequencies below this magnitude (Hz) are treated as a DC term.
F_MIN_DEFAULT = 0.1
#: Relative angular spacing below which two poles are considered the same.
POLE_MERGE_TOL = 1e-6
#: Poles whose magnitude changes by more than ``exp`` of this across half a
#: window are fast transients, not tones (and would wreck the phasor solve).
MAX_POLE_DAMPING = 20.0


class SpectralError(ValueError):
    """Raised for invalid windows or ill-posed estimation requests."""


@dataclass(frozen=True)
class SampleWindow:
    """An odd-length record of real samples at a fixed step.

    ``t_ref`` is the absolute time of the *last* sample.
    """

    samples: np.ndarray
    dt: float
    t_ref: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim != 1:
            raise SpectralError("window samples must be one-dimensional")
        if x.size < 3 or x.size % 2 == 0:
            raise SpectralError(
                f"window length must be odd and >= 3, got {x.size}")
        if not self.dt > 0:
            raise SpectralError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "samples", x)

    @property
    def n(self) -> int:
        return (self.samples.size - 1) // 2

    @property
    def span(self) -> float:
        return (self.samples.size - 1) * self.dt

    def times(self) -> np.ndarray:
        """Absolute sample instants, oldest first."""
        return self.t_ref - self.dt * np.arange(self.samples.size - 1, -1, -1)


@dataclass(frozen=True)
class SpectralComponent:
    f: float
    a: float
    phi: float

    def __post_init__(self):
        if self.f < 0 or self.a < 0:
            raise SpectralError(f"invalid component {self}")
        if not -math.pi < self.phi <= math.pi:
            raise SpectralError(f"phase {self.phi} outside (-pi, pi]")


@dataclass(frozen=True)
class SpectralEstimate:
    components: list
    order_m: int
    singular_values: np.ndarray
    t_ref: float = 0.0
    span: float = 0.0

    def frequencies(self) -> np.ndarray:
        return np.array([c.f for c in self.components])

    def amplitudes(self) -> np.ndarray:
        return np.array([c.a for c in self.components])

    def phases(self) -> np.ndarray:
        return np.array([c.phi for c in self.components])


@dataclass(frozen=True)
class AnalyticSample:
    value: complex
    t: float


@dataclass(frozen=True)
class EnvelopeSeries:
    values: np.ndarray
    dt: float
    t0: float = 0.0
    omega_s: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise SpectralError(f"dt must be positive, got {self.dt}")
        if self.omega_s < 0:
            raise SpectralError(f"omega_s must be >= 0, got {self.omega_s}")
        object.__setattr__(self, "values",
                           np.asarray(self.values, dtype=complex))

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)


@dataclass(frozen=True)
class EspritConfig:
    """Order selection and classification settings for :func:`analyze`.

    ``order`` forces the number of sinusoids (plus ``dc``) and bypasses the
    singular-value threshold.
    """

    rel_threshold: float = 1e-8
    max_order: Optional[int] = None
    f_min: float = F_MIN_DEFAULT
    order: Optional[int] = None
    dc: bool = False
    max_damping: float = MAX_POLE_DAMPING

    def __post_init__(self):
        if not 0 < self.rel_threshold < 1:
            raise SpectralError("rel_threshold must lie in (0, 1)")
        if self.max_order is not None and self.max_order < 0:
            raise SpectralError("max_order must be >= 0")
        if not self.max_damping > 0:
            raise SpectralError("max_damping must be positive")


def _wrap_phase(phi: float) -> float:
    phi = math.atan2(math.sin(phi), math.cos(phi))
    return math.pi if phi <= -math.pi else phi


def build_hankel(window: SampleWindow) -> np.ndarray:
    """Square Hankel matrix with ``H[r, c] = x[r + c]``, size ``n + 1``."""
    x = window.samples
    n = window.n
    return hankel(x[: n + 1], x[n:])


def singular_values(window: SampleWindow) -> np.ndarray:
    return np.linalg.svd(build_hankel(window), compute_uv=False)


def _dominant_count(sv: np.ndarray, rel_threshold: float) -> int:
    sv = np.asarray(sv, dtype=float)
    if sv.size == 0:
        raise SpectralError("empty singular value list")
    if np.any(np.diff(sv) > 1e-12 * max(sv[0], 1.0)):
        raise SpectralError("singular values must be nonincreasing")
    if sv[0] <= 0:
        return 0
    return int(np.count_nonzero(sv >= rel_threshold * sv[0]))


def estimate_order(singular_values: Sequence[float],
                   rel_threshold: float = 1e-8) -> int:
    """Number of real sinusoids implied by the dominant singular values.

    Each sinusoid contributes a pair of singular values; an odd count means
    a DC term is also present (see :func:`has_dc`).
    """
    if not 0 < rel_threshold < 1:
        raise SpectralError("rel_threshold must lie in (0, 1)")
    return _dominant_count(singular_values, rel_threshold) // 2


def has_dc(singular_values: Sequence[float], rel_threshold: float = 1e-8) -> bool:
    return _dominant_count(singular_values, rel_threshold) % 2 == 1


def estimate_poles(window: SampleWindow, m: int, dc: bool = False) -> np.ndarray:
    """Signal poles from the shift invariance of the dominant subspace.

    Returns ``2*m`` poles, plus one real pole when ``dc`` is set.
    """
    k = 2 * m + int(dc)
    if m < 0 or k < 1:
        raise SpectralError("need at least one pole (m >= 1 or dc)")
    if k > window.n:
        raise SpectralError(
            f"window too short: {k} poles requested with n = {window.n}")
    u, _, _ = np.linalg.svd(build_hankel(window))
    us = u[:, :k]
    # least-squares solution of us[:-1] @ psi = us[1:]
    psi = np.linalg.pinv(us[:-1]) @ us[1:]
    poles = np.linalg.eigvals(psi)
    # stable ordering: by frequency, then modulus
    order = np.lexsort((np.abs(poles), np.angle(poles)))
    return poles[order]


def poles_to_frequencies(poles: Sequence[complex], dt: float,
                         keep_negative: bool = False) -> np.ndarray:
    """``f = Im(ln z) / (2 pi dt)``; negative frequencies dropped by default."""
    if not dt > 0:
        raise SpectralError("dt must be positive")
    z = np.asarray(poles, dtype=complex)
    if np.any(z == 0):
        raise SpectralError("pole at zero has no frequency")
    f = np.angle(z) / (2 * np.pi * dt)
    return f if keep_negative else f[f >= 0]


def estimate_phasors(window: SampleWindow, poles: Sequence[complex]) -> np.ndarray:
    """Least-squares phasors, referenced to the window centre sample.

    Solves ``X = Z_L P Z_R`` for the diagonal ``P`` in the least-squares
    sense, with ``Z_L[r, i] = z_i**r`` and ``Z_R[i, c] = z_i**(c - n)``.
    """
    z = np.asarray(poles, dtype=complex)
    n = window.n
    if z.size > n:
        raise SpectralError(f"{z.size} poles exceed window half-length {n}")
    X = build_hankel(window)
    r = np.arange(n + 1)
    ZL = z[np.newaxis, :] ** r[:, np.newaxis]
    ZR = z[:, np.newaxis] ** (r - n)[np.newaxis, :]
    if (np.linalg.matrix_rank(ZL) < z.size
            or np.linalg.matrix_rank(ZR) < z.size):
        raise SpectralError("repeated poles make the phasor problem singular")
    left = np.linalg.solve(ZL.conj().T @ ZL, ZL.conj().T)
    right = np.linalg.solve((ZR @ ZR.conj().T).T, ZR.conj()).T
    return np.diag(left @ X @ right).copy()


def phasor_to_component(p: complex, f: float) -> SpectralComponent:
    if f < 0:
        raise SpectralError("component frequency must be nonnegative")
    if f == 0:
        return SpectralComponent(0.0, float(abs(p)),
                                 0.0 if p.real >= 0 else math.pi)
    return SpectralComponent(float(f), 2 * float(abs(p)),
                             _wrap_phase(float(np.angle(p))))


def _merge_poles(poles: np.ndarray) -> np.ndarray:
    kept = []
    for z in poles:
        if any(abs(np.angle(z / q)) < POLE_MERGE_TOL * max(abs(np.angle(q)), 1.0)
               and abs(abs(z) - abs(q)) < POLE_MERGE_TOL for q in kept):
            continue
        kept.append(z)
    return np.array(kept, dtype=complex)


def analyze(window: SampleWindow,
            config: EspritConfig = EspritConfig()) -> SpectralEstimate:
    """Estimate the sinusoidal content of ``window``.

    Phases are referenced to ``window.t_ref`` (the last sample), so a
    component contributes ``a*cos(2*pi*f*(t - t_ref) + phi)``.
    """
    sv = singular_values(window)
    if config.order is not None:
        m, dc = config.order, config.dc
    else:
        k = _dominant_count(sv, config.rel_threshold)
        m, dc = k // 2, bool(k % 2)
    if config.max_order is not None and m > config.max_order:
        m, dc = config.max_order, False
    while 2 * m + int(dc) > window.n:
        m -= 1
    if 2 * m + int(dc) == 0:
        return SpectralEstimate([], 0, sv, window.t_ref, window.span)

    poles = _merge_poles(estimate_poles(window, m, dc))
    decay = np.abs(np.log(np.abs(poles) + 1e-300)) * window.n
    poles = poles[decay <= config.max_damping]
    if poles.size == 0:
        return SpectralEstimate([], 0, sv, window.t_ref, window.span)
    phasors = estimate_phasors(window, poles)
    # move the phase reference from the window centre to the last sample
    phasors = phasors * poles ** window.n
    freqs = poles_to_frequencies(poles, window.dt, keep_negative=True)

    components = []
    dc_sum = 0j
    for f, p in zip(freqs, phasors):
        if abs(f) < config.f_min:
            dc_sum += p
        elif f > 0:
            components.append(phasor_to_component(p, f))
    if dc_sum != 0:
        components.append(phasor_to_component(complex(dc_sum.real, 0.0), 0.0))
    components.sort(key=lambda c: c.f)
    n_sin = sum(1 for c in components if c.f > 0)
    return SpectralEstimate(components, n_sin, sv, window.t_ref, window.span)


def _component_arrays(est: SpectralEstimate):
    comps = [c for c in est.components if c.f > 0]
    f = np.array([c.f for c in comps])
    a = np.array([c.a for c in comps])
    phi = np.array([c.phi for c in comps])
    return f, a, phi


def synthesize_imaginary(est: SpectralEstimate, t):
    """Quadrature signal ``sum a_i sin(2 pi f_i (t - t_ref) + phi_i)``.

    DC terms contribute nothing. ``t`` may be a scalar or an array.
    """
    f, a, phi = _component_arrays(est)
    tt = np.asarray(t, dtype=float) - est.t_ref
    out = np.sin(2 * np.pi * np.multiply.outer(tt, f) + phi) @ a
    return float(out) if np.ndim(t) == 0 else out


def synthesize_real(est: SpectralEstimate, t):
    """In-phase reconstruction of the modelled signal, DC included."""
    f, a, phi = _component_arrays(est)
    tt = np.asarray(t, dtype=float) - est.t_ref
    out = np.cos(2 * np.pi * np.multiply.outer(tt, f) + phi) @ a
    dc = sum(c.a * math.cos(c.phi) for c in est.components if c.f == 0)
    out = out + dc
    return float(out) if np.ndim(t) == 0 else out


def construct_analytic(x: float, x_hat: float, t: float) -> AnalyticSample:
    return AnalyticSample(complex(x, x_hat), float(t))


def shift_frequency(s: AnalyticSample, omega_s: float) -> complex:
    """Complex envelope ``s.value * exp(-j omega_s s.t)``."""
    return s.value * complex(math.cos(omega_s * s.t), -math.sin(omega_s * s.t))
