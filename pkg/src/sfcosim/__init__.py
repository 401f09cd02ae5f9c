"""Multi-rate co-simulation of an EMT area and a shifted-frequency area.

The two areas exchange travelling waves over lossless lines. Real EMT
waveforms become complex envelopes through a subspace (ESPRIT) estimate of
their quadrature component.
"""
from .estimators import EspritSpectrum
from .network import Branch, Network, Source, Tone
from .orchestrator import (ConverterConfig, CosimRun, LinkSpec, Recorder, Scenario,
                           Subsystem, merge_subsystems, run)
from .results import ResultSet, compare, read_csv, spectrum_report, write_results
from .scenario_io import load, parse, save, serialize
from .spectral import EspritConfig, SampleWindow, analyze

__all__ = [
    "Branch", "ConverterConfig", "CosimRun", "EspritConfig", "EspritSpectrum", "LinkSpec",
    "Network", "Recorder", "ResultSet", "SampleWindow", "Scenario", "Source", "Subsystem",
    "Tone", "analyze", "compare", "load", "merge_subsystems", "parse", "read_csv", "run",
    "save", "serialize", "spectrum_report", "write_results",
]
