"""Recorded waveforms, CSV persistence and comparison metrics."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .spectral import EspritConfig, SampleWindow, analyze
from .wavelink import BoundaryConverter, analytic_record, negative_frequency_ratio


class ResultError(ValueError):
    pass


@dataclass
class ResultSet:
    series: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def add(self, name: str, t, values) -> None:
        t = np.asarray(t, dtype=float)
        values = np.asarray(values)
        if t.shape != values.shape:
            raise ResultError(f"{name}: {t.size} times for {values.size} values")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ResultError(f"{name}: time stamps must be strictly increasing")
        self.series[name] = (t, values)

    def __getitem__(self, name):
        try:
            return self.series[name]
        except KeyError:
            raise ResultError(f"no series named {name!r}") from None

    def __contains__(self, name):
        return name in self.series

    def names(self):
        return sorted(self.series)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_series(path, name: str, t, values) -> None:
    values = np.asarray(values)
    cplx = np.iscomplexobj(values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", f"{name}_re", f"{name}_im"] if cplx else ["t", name])
        for ti, v in zip(t, values):
            if cplx:
                w.writerow([_fmt(ti), _fmt(v.real), _fmt(v.imag)])
            else:
                w.writerow([_fmt(ti), _fmt(v)])


def write_results(rs: ResultSet, path) -> list:
    """One CSV per recorder in directory ``path``; returns the file paths."""
    os.makedirs(path, exist_ok=True)
    written = []
    for name in rs.names():
        t, v = rs[name]
        p = os.path.join(path, f"{name}.csv")
        write_series(p, name, t, v)
        written.append(p)
    with open(os.path.join(path, "meta.json"), "w") as fh:
        json.dump(rs.meta, fh, indent=2, sort_keys=True)
    return written


def read_csv(path) -> ResultSet:
    """Inverse of :func:`write_series`; complex columns are recombined."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "t":
        raise ResultError(f"{path}: missing 't' header")
    header = rows[0]
    data = np.array([[float(x) for x in r] for r in rows[1:]]).reshape(-1, len(header))
    rs = ResultSet(meta={"source": str(path)})
    t = data[:, 0]
    cols = header[1:]
    i = 0
    while i < len(cols):
        name = cols[i]
        if name.endswith("_re") and i + 1 < len(cols) and cols[i + 1] == name[:-3] + "_im":
            rs.add(name[:-3], t, data[:, i + 1] + 1j * data[:, i + 2])
            i += 2
        else:
            rs.add(name, t, data[:, i + 1])
            i += 1
    return rs


def _resample(t_src, v_src, t_dst):
    if np.iscomplexobj(v_src):
        return np.interp(t_dst, t_src, v_src.real) + 1j * np.interp(t_dst, t_src, v_src.imag)
    return np.interp(t_dst, t_src, v_src)


def compare(reference: ResultSet, test: ResultSet, name: str,
            test_name: Optional[str] = None, t_start: float = 0.0) -> dict:
    """Error metrics of ``test`` against ``reference`` on the reference time base.

    ``test`` is linearly interpolated onto the reference instants that lie
    inside both records (and at or after ``t_start``).
    """
    t_ref, v_ref = reference[name]
    t_test, v_test = test[test_name or name]
    if t_ref.size == 0 or t_test.size == 0:
        raise ResultError("empty series")
    mask = (t_ref >= max(t_test[0], t_start) - 1e-15) & (t_ref <= t_test[-1] + 1e-15)
    if not mask.any():
        raise ResultError("reference and test records do not overlap")
    ref = v_ref[mask]
    err = _resample(t_test, v_test, t_ref[mask]) - ref
    rmse = float(np.sqrt(np.mean(np.abs(err) ** 2)))
    rms = float(np.sqrt(np.mean(np.abs(ref) ** 2)))
    return {
        "rmse": rmse,
        "rmse_relative": rmse / rms if rms > 0 else (0.0 if rmse == 0 else math.inf),
        "max_abs_error": float(np.max(np.abs(err))),
        "samples": int(mask.sum()),
    }


@dataclass
class SpectrumReport:
    components: list
    negative_ratio: float
    mode: str

    def table(self) -> str:
        lines = [f"{'f_Hz':>14} {'amplitude':>14} {'phase_rad':>12}"]
        for c in self.components:
            lines.append(f"{c.f:14.6f} {c.a:14.6g} {c.phi:12.6f}")
        lines.append(f"negative/positive frequency content ({self.mode}): "
                     f"{self.negative_ratio:.3e}")
        return "\n".join(lines)


def spectrum_report(t, x, window: int = 101, mode: str = "esprit",
                    config: EspritConfig = EspritConfig(1e-8),
                    period: float = 0.02, taper: Optional[str] = "hann") -> SpectrumReport:
    """Component table of the trailing window plus one-sidedness of the
    analytic record built from ``x`` in ``mode`` (esprit or delay).

    The one-sidedness ratio is the largest negative-frequency DFT bin over
    the largest positive one; ``taper`` limits leakage when the record is
    not an integer number of periods.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.size < window:
        raise ResultError(f"record has {x.size} samples, window needs {window}")
    dt = float(np.median(np.diff(t)))
    est = analyze(SampleWindow(x[-window:], dt, t[-1]), config)
    if not est.components:
        return SpectrumReport([], 0.0, mode)
    conv = BoundaryConverter(mode=mode, period=period, window=window, esprit=config,
                             min_window=window)
    start = window - 1 if mode == "esprit" else int(math.ceil(period / 4 / dt))
    z = analytic_record(x, dt, conv, refresh=max(1, (window - 1) // 2), start=start)
    if taper == "hann":
        z = z * np.hanning(z.size)
    return SpectrumReport(est.components, negative_frequency_ratio(z), mode)
