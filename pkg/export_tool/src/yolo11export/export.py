"""One-stop export: ONNX file + model card + keyed replay fixture."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .arch import BuildSpec, build_graph
from .card import ModelCard, write_card
from .fixtures import preprocess_image, synthetic_frames, write_fixture
from .onnx_writer import write_onnx
from .runtime import TorchModel

log = logging.getLogger(__name__)

OPSET = 12


@dataclass(frozen=True)
class ExportResult:
    onnx_path: Path
    card_path: Path
    fixture_path: Path
    card: ModelCard


def load_local_weights(path: Union[str, Path]) -> dict:
    """A local state-dict file (name -> array) saved by torch or numpy."""
    import torch

    state = torch.load(path, map_location="cpu", weights_only=True)
    return {name: np.asarray(value, dtype=np.float32) for name, value in state.items()}


def export(
    out_dir: Union[str, Path],
    variant: str = "s",
    task: str = "detect",
    classes: int = 80,
    input_size: int = 640,
    seed: int = 0,
    sample_frames: Optional[Sequence[np.ndarray]] = None,
    weights: Optional[dict] = None,
) -> ExportResult:
    """Build the network, write ONNX + card, and record a keyed fixture.

    Without trained weights the network is random-initialized from the
    seed: shapes, parameter counts and the replay contract are exact; the
    detections themselves are untrained noise.
    """
    spec = BuildSpec(
        variant=variant, task=task, classes=classes, input_size=input_size, seed=seed
    )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    suffix = "-seg" if task == "segment" else ""
    stem = f"yolo11{variant}{suffix}"

    graph = build_graph(spec)
    if weights:
        for name, value in weights.items():
            if name not in graph.weights:
                raise KeyError(f"weight {name!r} not in the built graph")
            if tuple(value.shape) != graph.weights[name].shape:
                raise ValueError(
                    f"weight {name}: {value.shape} != {graph.weights[name].shape}"
                )
            graph.weights[name] = np.asarray(value, dtype=np.float32)

    onnx_path = out_dir / f"{stem}.onnx"
    write_onnx(graph, onnx_path)

    card = ModelCard(
        name=stem,
        variant=variant,
        task=task,
        parameters=graph.parameter_count(),
        file_size_bytes=onnx_path.stat().st_size,
        input_size=input_size,
        class_count=classes,
        opset=OPSET,
        seed=seed,
        pretrained=weights is not None,
    )
    card_path = out_dir / f"{stem}.card.json"
    write_card(card, card_path)

    if sample_frames is None:
        sample_frames = synthetic_frames(3, input_size, seed=seed)
    model = TorchModel(graph)
    entries = []
    for frame in sample_frames:
        tensor = preprocess_image(frame, input_size)
        outputs = model.forward(tensor)
        entries.append((tensor, outputs))
    fixture_path = out_dir / f"{stem}.replay.bin"
    write_fixture(fixture_path, entries, mode="keyed")

    log.info(
        "%s: %d parameters, %d bytes, %d fixture entries",
        stem, card.parameters, card.file_size_bytes, len(entries),
    )
    return ExportResult(
        onnx_path=onnx_path, card_path=card_path, fixture_path=fixture_path, card=card
    )
