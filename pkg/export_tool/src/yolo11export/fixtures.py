"""Replay-fixture recording and model-input preprocessing.

Writes the consumer's documented fixture format: a JSON header line
(format/version/mode/entries) followed by each entry's tensors as raw
little-endian float32 payloads. Keys are SHA-256 hex digests of the input
tensor's payload bytes. Preprocessing matches the consumer's model-input
contract: stretch resize to the square input, grayscale replicated to
3 channels, values scaled to [0, 1], NCHW float32.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import cv2
import numpy as np

REPLAY_FORMAT = "sonodet-replay"
REPLAY_VERSION = 1


def preprocess_image(pixels: np.ndarray, input_size: int) -> np.ndarray:
    """uint8 HxW[x3] image -> (1, 3, S, S) float32 in [0, 1]."""
    if pixels.ndim == 2:
        pixels = np.repeat(pixels[:, :, None], 3, axis=2)
    if pixels.shape[0] != input_size or pixels.shape[1] != input_size:
        pixels = cv2.resize(pixels, (input_size, input_size), interpolation=cv2.INTER_LINEAR)
    chw = pixels.astype(np.float32).transpose(2, 0, 1) / 255.0
    return np.ascontiguousarray(chw[None])


def tensor_payload(tensor: np.ndarray) -> bytes:
    return np.ascontiguousarray(tensor, dtype="<f4").tobytes()


def tensor_key(tensor: np.ndarray) -> str:
    return hashlib.sha256(tensor_payload(tensor)).hexdigest()


def write_fixture(
    path: Union[str, Path],
    entries: Sequence[Tuple[np.ndarray, Sequence[np.ndarray]]],
    mode: str = "keyed",
) -> None:
    """entries = [(input tensor, [output tensors]), ...]."""
    header_entries = []
    payload = bytearray()
    for inp, outs in entries:
        key = tensor_key(inp) if mode == "keyed" else None
        header_entries.append({"key": key, "shapes": [list(t.shape) for t in outs]})
        for t in outs:
            payload.extend(tensor_payload(t))
    header = {
        "format": REPLAY_FORMAT,
        "version": REPLAY_VERSION,
        "mode": mode,
        "entries": header_entries,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        fh.write(bytes(payload))


def synthetic_frames(n: int, size: int, seed: int = 0) -> List[np.ndarray]:
    """Seeded grayscale sample frames (speckle plus a bright blob)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    frames = []
    for k in range(n):
        base = rng.gamma(2.0, 20.0, size=(size // 4, size // 4))
        pixels = np.repeat(np.repeat(base, 4, axis=0), 4, axis=1)[:size, :size]
        pixels = np.clip(pixels, 0, 110)
        cx, cy = rng.uniform(size * 0.3, size * 0.7, size=2)
        r = rng.uniform(size * 0.08, size * 0.18)
        ys, xs = np.mgrid[0:size, 0:size]
        blob = ((xs - cx) ** 2 + (ys - cy) ** 2) <= r * r
        pixels[blob] = np.minimum(pixels[blob] + 130, 255)
        frames.append(pixels.astype(np.uint8))
    return frames


def load_frames(directory: Union[str, Path]) -> List[np.ndarray]:
    paths = sorted(
        p for p in Path(directory).iterdir()
        if p.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp")
    )
    if not paths:
        raise FileNotFoundError(f"no readable images in {directory}")
    frames = []
    for p in paths:
        data = cv2.imread(str(p), cv2.IMREAD_UNCHANGED)
        if data is None:
            raise IOError(f"cannot read {p}")
        if data.ndim == 3:
            data = cv2.cvtColor(data, cv2.COLOR_BGR2RGB)
        frames.append(data)
    return frames
