"""BEAC-Net and its ablated variants assembled from A-Net and C-Net parts."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import attribution as attr
from . import baselines
from .classification import classify, compress_content, init_cnet
from .ndkernel import Tensor, load_checkpoint, ops, save_checkpoint

VARIANTS = ("full", "c_stream", "e_stream", "unsup_e", "c_unsup_e", "attention")


@dataclass(frozen=True)
class ModelSpec:
    variant: str
    M: int
    D: int
    K: int
    L: int = 20
    hidden: int = 128
    keep: float = 0.75

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown model variant {self.variant!r}; expected one of {VARIANTS}")

    @property
    def has_anet(self) -> bool:
        return self.variant in ("full", "e_stream", "unsup_e", "c_unsup_e")

    @property
    def supervised(self) -> bool:
        """Whether the attribution loss takes part (tIoU gate active)."""
        return self.variant in ("full", "e_stream")

    @property
    def emotion_stream(self) -> bool:
        return self.variant != "c_stream"

    @property
    def content_stream(self) -> bool:
        return self.variant in ("full", "c_stream", "c_unsup_e", "attention")


class BEACNet:
    def __init__(self, spec: ModelSpec, seed: int = 0, dtype=np.float32):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self.params: dict[str, Tensor] = {}
        if spec.has_anet:
            self.params.update(attr.init_anet(rng, spec.M, spec.D, spec.hidden, dtype))
        if spec.variant == "attention":
            self.params.update(baselines.init_attention(rng, spec.D, dtype=dtype))
        self.params.update(init_cnet(rng, spec.M, spec.L, spec.D, spec.K,
                                     spec.emotion_stream, spec.content_stream, dtype))

    # parameter groups -------------------------------------------------
    def group(self, prefix: str) -> dict[str, Tensor]:
        return {k: v for k, v in self.params.items() if k.startswith(prefix + ".")}

    @property
    def anet_params(self) -> dict[str, Tensor]:
        return self.group("anet")

    @property
    def cnet_params(self) -> dict[str, Tensor]:
        return self.group("cnet")

    # forward pieces ---------------------------------------------------
    def alpha(self, frames: Tensor, train: bool = False, rng=None) -> Tensor:
        """Raw A-Net output (N, 2)."""
        return attr.anet_forward(self.params, frames, self.spec.keep, train, rng)

    def emotion_input(self, frames: Tensor, alpha: Tensor | None) -> Tensor | None:
        if not self.spec.emotion_stream:
            return None
        if self.spec.variant == "attention":
            pooled, _ = baselines.attention_forward(self.params, frames)
            N, _, D = frames.shape
            return ops.broadcast_to(ops.reshape(pooled, (N, 1, D)), (N, self.spec.L, D))
        return attr.sample_segment(frames, alpha, self.spec.L)

    def content_input(self, frames: Tensor) -> Tensor | None:
        if not self.spec.content_stream:
            return None
        return compress_content(frames, self.params["cnet.compress.W"], self.spec.L)

    def probs(self, frames: Tensor, alpha: Tensor | None, train: bool = False, rng=None) -> Tensor:
        """Class probabilities given (already clamped) alpha for the emotion stream."""
        return classify(self.emotion_input(frames, alpha), self.content_input(frames),
                        self.params, self.spec.keep, train, rng)

    def predict(self, frames: np.ndarray, batch_size: int = 256):
        """Inference: class probabilities and, if the model attributes, rounded spans.

        Returns ``(probs (N, K), spans (N, 2) int or None, alpha (N, 2) or None)``.
        """
        M = self.spec.M
        probs, spans, alphas = [], [], []
        for i in range(0, len(frames), batch_size):
            x = Tensor(np.asarray(frames[i : i + batch_size], dtype=self.dtype))
            alpha = None
            if self.spec.has_anet:
                raw = self.alpha(x).data.astype(np.float64)
                if not np.isfinite(raw).all():
                    raise FloatingPointError("A-Net produced non-finite alpha")
                a1, a2 = attr.clamp_alpha(raw[:, 0], raw[:, 1], M)
                ts, te = attr.round_span(*attr.span_from_alpha(a1, a2, M), M)
                spans.append(np.stack([ts, te], axis=1))
                alphas.append(np.stack([a1, a2], axis=1))
                r1, r2 = attr.alpha_from_span(ts, te, M)
                alpha = Tensor(np.stack([r1, r2], axis=1).astype(self.dtype))
            probs.append(self.probs(x, alpha).data)
        probs = np.concatenate(probs)
        if not spans:
            return probs, None, None
        return probs, np.concatenate(spans), np.concatenate(alphas)

    # persistence ------------------------------------------------------
    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        mismatched = [
            f"{k}: expected {self.params[k].shape}, got {state[k].shape}"
            for k in self.params if k in state and state[k].shape != self.params[k].shape
        ]
        missing = sorted(set(self.params) - set(state))
        extra = sorted(set(state) - set(self.params))
        if mismatched or missing or extra:
            raise ValueError(
                "checkpoint incompatible with model: "
                + "; ".join(mismatched + [f"missing {m}" for m in missing] + [f"unexpected {e}" for e in extra])
            )
        for k, v in state.items():
            self.params[k].data[...] = v

    def save(self, path, extra_meta: dict | None = None) -> None:
        meta = {"model": asdict(self.spec), **(extra_meta or {})}
        save_checkpoint(path, self.state_dict(), meta)

    @classmethod
    def load(cls, path) -> tuple["BEACNet", dict]:
        tensors, meta = load_checkpoint(path)
        spec = ModelSpec(**meta["model"])
        dtype = next(iter(tensors.values())).dtype
        model = cls(spec, dtype=dtype)
        model.load_state_dict(tensors)
        return model, meta
