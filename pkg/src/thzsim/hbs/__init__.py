"""Human-body shadowing: screens, edge diffraction, PO oracle and fading synthesis."""

from .diffraction import DiffractionPath, FieldResult, edge_field, edge_field_detail, find_stationary_points, nu_min
from .fading import FadingSeries, Spectrogram, doppler_spectrogram, fading_series, prediction_error
from .knife_edge import knife_edge_coeff, knife_edge_loss_db
from .po_oracle import OracleConvergenceError, po_field_oracle
from .screen import HumanFrame, ScreenError, ScreenSilhouette, build_screen, rect_screen

__all__ = [
    "DiffractionPath",
    "FadingSeries",
    "FieldResult",
    "HumanFrame",
    "OracleConvergenceError",
    "ScreenError",
    "ScreenSilhouette",
    "Spectrogram",
    "build_screen",
    "doppler_spectrogram",
    "edge_field",
    "edge_field_detail",
    "fading_series",
    "find_stationary_points",
    "knife_edge_coeff",
    "knife_edge_loss_db",
    "nu_min",
    "po_field_oracle",
    "prediction_error",
    "rect_screen",
]
