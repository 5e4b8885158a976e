"""Teacher-forced scoring against a loaded encoder-decoder checkpoint.

Token alignment
---------------
The target is encoded with its special tokens.  A leading BOS, when the
tokenizer emits one, is treated as conditioning context rather than a scored
position: the decoder input is the encoded target shifted right behind the
model's decoder start token, and the reported (token, logprob) pairs cover
every target position after BOS, ending with EOS.  Each logprob is the
log-softmax of the decoder logits at the gold token given all earlier target
positions, computed in a single forward pass with no sampling.

Sequences longer than the configured maximum are truncated from the right
and the response carries a ``truncated`` flag; left truncation is never
applied because the head of a source carries most of its content.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

from .config import BridgeConfig


@dataclass(frozen=True)
class ScoreResult:
    tokens: tuple[str, ...]
    logprobs: tuple[float, ...]
    truncated: bool


class ScoringModel:
    """Loads a checkpoint once and answers tokenize/score requests."""

    def __init__(self, config: BridgeConfig):
        self.config = config
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(config.checkpoint)
            self.model = AutoModelForSeq2SeqLM.from_pretrained(config.checkpoint)
        except Exception as exc:
            raise RuntimeError(
                f"cannot load checkpoint {config.checkpoint!r}: {exc}"
            ) from exc
        self.model.to(config.device)
        self.model.eval()
        torch.use_deterministic_algorithms(True)

    def tokenize(self, text: str) -> list[str]:
        return self.tokenizer.tokenize(text)

    def _encode(self, text: str) -> tuple[list[int], bool]:
        ids = self.tokenizer(text, add_special_tokens=True)["input_ids"]
        if len(ids) > self.config.max_length:
            # keep the head, keep EOS scorable
            eos = ids[-1]
            ids = ids[: self.config.max_length - 1] + [eos]
            return ids, True
        return ids, False

    @torch.inference_mode()
    def score(self, source: str, target: str) -> ScoreResult:
        src_ids, src_trunc = self._encode(source)
        tgt_ids, tgt_trunc = self._encode(target)

        # drop a leading BOS from the scored positions; it stays in the
        # decoder input as context
        bos = self.tokenizer.bos_token_id
        label_ids = tgt_ids[1:] if bos is not None and tgt_ids and tgt_ids[0] == bos else tgt_ids
        if not label_ids:
            raise ValueError("target encodes to no scorable tokens")
        context = tgt_ids[: len(tgt_ids) - len(label_ids)]

        start = self.model.config.decoder_start_token_id
        if start is None:
            start = self.tokenizer.eos_token_id
        decoder_input = [start] + context + label_ids[:-1]

        device = self.config.device
        logits = self.model(
            input_ids=torch.tensor([src_ids], device=device),
            attention_mask=torch.ones(1, len(src_ids), dtype=torch.long, device=device),
            decoder_input_ids=torch.tensor([decoder_input], device=device),
        ).logits[0]

        logprob_rows = torch.log_softmax(logits[len(context) :], dim=-1)
        gold = torch.tensor(label_ids, device=device)
        logprobs = logprob_rows.gather(1, gold.unsqueeze(1)).squeeze(1)

        tokens = self.tokenizer.convert_ids_to_tokens(label_ids)
        return ScoreResult(
            tokens=tuple(tokens),
            logprobs=tuple(float(lp) for lp in logprobs),
            truncated=src_trunc or tgt_trunc,
        )

    def health(self) -> dict:
        return {
            "status": "ok",
            "checkpoint": self.config.checkpoint,
            "tokenizer_id": self.config.tokenizer_id,
            "max_length": self.config.max_length,
            "batch_size": self.config.batch_size,
        }
