"""RGB-to-multispectral reconstruction and bilirubin regression toolkit."""
from .calibration import ChartLayout, ColorChart, TransformationMatrix, sample_chart, wiener_matrix, wiener_tm
from .errors import SpecCamError
from .evaluation import agreement_report, bland_altman, learning_curve, pearson, roc
from .phantom import CameraModel, PhantomSpec, generate_dataset, phantom_reflectance, synthetic_chart
from .reconstruction import aggregate_session, reconstruct_image, reconstruct_pixel
from .regression.models import ModelSpec, train
from .spectral import RgbImage, RgbTriple, Roi, SpectralCube, Spectrum, WavelengthGrid, default_grid

__version__ = "0.1.0"

__all__ = [
    "CameraModel",
    "ChartLayout",
    "ColorChart",
    "ModelSpec",
    "PhantomSpec",
    "RgbImage",
    "RgbTriple",
    "Roi",
    "SpecCamError",
    "SpectralCube",
    "Spectrum",
    "TransformationMatrix",
    "WavelengthGrid",
    "aggregate_session",
    "agreement_report",
    "bland_altman",
    "default_grid",
    "generate_dataset",
    "learning_curve",
    "pearson",
    "phantom_reflectance",
    "reconstruct_image",
    "reconstruct_pixel",
    "roc",
    "sample_chart",
    "synthetic_chart",
    "train",
    "wiener_matrix",
    "wiener_tm",
]
