from .physics import (
    SpectrumCurve,
    divergence_field,
    energy_spectrum,
    mean_abs_divergence,
    shell_index,
    spatial_variance,
    spectrum_distance,
    tke,
)
from .report import MetricReport, evaluate, leadtime_curves
from .score import SCORERS, ScoreConfig, make_scorer, physics_score
from .statistical import gaussian_window, mse, rel_l2, rmse, ssim

__all__ = [
    "MetricReport", "SCORERS", "ScoreConfig", "SpectrumCurve", "divergence_field", "energy_spectrum",
    "evaluate", "gaussian_window", "leadtime_curves", "make_scorer", "mean_abs_divergence", "mse",
    "physics_score", "rel_l2", "rmse", "shell_index", "spatial_variance", "spectrum_distance", "ssim", "tke",
]
