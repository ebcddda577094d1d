"""Model card: the exported model's identifying facts."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Union


@dataclass(frozen=True)
class ModelCard:
    name: str
    variant: str
    task: str
    parameters: int
    file_size_bytes: int
    input_size: int
    class_count: int
    opset: int
    seed: int
    pretrained: bool

    def __post_init__(self) -> None:
        if self.parameters <= 0:
            raise ValueError("parameters must be positive")
        if self.variant not in ("n", "s", "m", "l", "x"):
            raise ValueError(f"unknown variant {self.variant!r}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ModelCard":
        return ModelCard(**json.loads(text))


def write_card(card: ModelCard, path: Union[str, Path]) -> None:
    Path(path).write_text(card.to_json() + "\n", encoding="utf-8")
