"""Diagnostics over frozen representations."""
from cife.probes.common import FittedProbe, ProbeSettings, extract_features, fit_probe
from cife.probes.divergence import a_distance
from cife.probes.adaptability import adaptability
from cife.probes.feature_probe import feature_probe
from cife.probes.sweep import lambda_c_sweep, read_sweep_csv, sweep_frame, write_sweep_csv

__all__ = [
    "FittedProbe",
    "ProbeSettings",
    "extract_features",
    "fit_probe",
    "a_distance",
    "adaptability",
    "feature_probe",
    "lambda_c_sweep",
    "read_sweep_csv",
    "sweep_frame",
    "write_sweep_csv",
]
