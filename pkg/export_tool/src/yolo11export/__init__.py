"""Build YOLO11-architecture networks natively and export them as ONNX
files, model cards and keyed replay fixtures for the detection runtime."""

from .arch import SCALES, BuildSpec, build_graph
from .card import ModelCard, write_card
from .export import ExportResult, export, load_local_weights
from .fixtures import preprocess_image, synthetic_frames, tensor_key, write_fixture
from .onnx_writer import write_onnx
from .runtime import TorchModel

__version__ = "0.1.0"

__all__ = [
    "BuildSpec",
    "ExportResult",
    "ModelCard",
    "SCALES",
    "TorchModel",
    "__version__",
    "build_graph",
    "export",
    "load_local_weights",
    "preprocess_image",
    "synthetic_frames",
    "tensor_key",
    "write_card",
    "write_fixture",
    "write_onnx",
]
