from __future__ import annotations

import os
from dataclasses import dataclass, field


@dataclass(frozen=True)
class BridgeConfig:
    """Server configuration; the tokenizer id is derived from the checkpoint."""

    checkpoint: str
    device: str = "cpu"
    max_length: int = 1024
    batch_size: int = 8
    tokenizer_id: str = field(init=False)

    def __post_init__(self) -> None:
        if not self.checkpoint:
            raise ValueError("checkpoint must be a model id or a local path")
        if self.max_length < 8:
            raise ValueError(f"max_length must be >= 8, got {self.max_length}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        name = os.path.basename(os.path.normpath(self.checkpoint)) or self.checkpoint
        object.__setattr__(self, "tokenizer_id", f"hf:{name}")
