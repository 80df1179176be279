"""Next-token predictors over the 451-token vocabulary.

Three implementations of one contract (context ids -> unnormalized score
vector): a decoder-only attention model trained here with Adam, a smoothed
n-gram table used as a deterministic oracle in tests, and a uniform
predictor for grammar-mask fuzzing. The attention model is desk-scale by
default; ModelConfig.large() matches a 6-layer/8-head/512-wide/2048-window
setup for anyone with the data and patience to use it.
"""

from __future__ import annotations

import copy
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import CheckpointError, ContextTooLong, DivergenceError
from .vocab import VOCAB_SIZE, vocab_hash


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 2
    heads: int = 4
    embed_dim: int = 128
    window: int = 512
    ff_dim: int = 512
    learning_rate: float = 1e-3
    batch_size: int = 8
    steps: int = 2000
    grad_clip: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.embed_dim % self.heads:
            raise ValueError(f"embed_dim {self.embed_dim} not divisible by heads {self.heads}")
        if min(self.layers, self.heads, self.embed_dim, self.window, self.ff_dim) <= 0:
            raise ValueError("model dimensions must be positive")

    @classmethod
    def large(cls, **overrides) -> "ModelConfig":
        """Full-scale setup: 6 layers, 8 heads, 512 embedding, 2048 window."""
        base = dict(layers=6, heads=8, embed_dim=512, window=2048, ff_dim=2048)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def tiny(cls, **overrides) -> "ModelConfig":
        """Under 10k parameters; used by the finite-difference gradient check."""
        base = dict(layers=1, heads=2, embed_dim=8, window=32, ff_dim=16)
        base.update(overrides)
        return cls(**base)


class CausalSelfAttention(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.heads = cfg.heads
        self.head_dim = cfg.embed_dim // cfg.heads
        self.qkv = nn.Linear(cfg.embed_dim, 3 * cfg.embed_dim)
        self.proj = nn.Linear(cfg.embed_dim, cfg.embed_dim)
        mask = torch.triu(torch.ones(cfg.window, cfg.window, dtype=torch.bool), diagonal=1)
        self.register_buffer("causal_mask", mask, persistent=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        B, T, C = x.shape
        q, k, v = self.qkv(x).split(C, dim=2)
        q = q.view(B, T, self.heads, self.head_dim).transpose(1, 2)
        k = k.view(B, T, self.heads, self.head_dim).transpose(1, 2)
        v = v.view(B, T, self.heads, self.head_dim).transpose(1, 2)
        att = (q @ k.transpose(-2, -1)) / math.sqrt(self.head_dim)
        att = att.masked_fill(self.causal_mask[:T, :T], float("-inf"))
        att = F.softmax(att, dim=-1)
        out = (att @ v).transpose(1, 2).reshape(B, T, C)
        return self.proj(out)


class Block(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.ln1 = nn.LayerNorm(cfg.embed_dim)
        self.attn = CausalSelfAttention(cfg)
        self.ln2 = nn.LayerNorm(cfg.embed_dim)
        self.mlp = nn.Sequential(
            nn.Linear(cfg.embed_dim, cfg.ff_dim),
            nn.GELU(),
            nn.Linear(cfg.ff_dim, cfg.embed_dim),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.ln1(x))
        return x + self.mlp(self.ln2(x))


class TransformerLM(nn.Module):
    """Decoder-only attention model with learned position embeddings and a
    zero-initialized output head, so the untrained model predicts the uniform
    distribution."""

    def __init__(self, cfg: ModelConfig, vocab_size: int = VOCAB_SIZE):
        super().__init__()
        self.cfg = cfg
        self.vocab_size = vocab_size
        self.token_emb = nn.Embedding(vocab_size, cfg.embed_dim)
        self.pos_emb = nn.Embedding(cfg.window, cfg.embed_dim)
        self.blocks = nn.ModuleList(Block(cfg) for _ in range(cfg.layers))
        self.ln_f = nn.LayerNorm(cfg.embed_dim)
        self.head = nn.Linear(cfg.embed_dim, vocab_size)
        self.apply(self._init_weights)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    @staticmethod
    def _init_weights(module: nn.Module) -> None:
        if isinstance(module, (nn.Linear, nn.Embedding)):
            nn.init.normal_(module.weight, mean=0.0, std=0.02)
            if isinstance(module, nn.Linear) and module.bias is not None:
                nn.init.zeros_(module.bias)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        B, T = ids.shape
        if T > self.cfg.window:
            raise ContextTooLong(f"context length {T} exceeds window {self.cfg.window}")
        pos = torch.arange(T, device=ids.device)
        x = self.token_emb(ids) + self.pos_emb(pos)[None]
        for block in self.blocks:
            x = block(x)
        return self.head(self.ln_f(x))

    def n_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())


def forward_scores(model: TransformerLM, context: Sequence[int]) -> np.ndarray:
    """Unnormalized log-probabilities for the next token after `context`."""
    if len(context) > model.cfg.window:
        raise ContextTooLong(f"context length {len(context)} exceeds window {model.cfg.window}")
    if not len(context):
        raise ValueError("context must contain at least one token")
    model.eval()
    with torch.no_grad():
        ids = torch.tensor([list(context)], dtype=torch.long)
        logits = model(ids)
    return logits[0, -1].double().numpy()


class SequencePredictor(Protocol):
    """Anything that scores the next token given a context."""

    window: int | None

    def predict(self, context: Sequence[int]) -> np.ndarray: ...


class TransformerPredictor:
    def __init__(self, model: TransformerLM):
        self.model = model
        self.window: int | None = model.cfg.window

    def predict(self, context: Sequence[int]) -> np.ndarray:
        return forward_scores(self.model, context)


class UniformPredictor:
    """Scores every token equally; generation driven by this exercises the
    grammar mask alone."""

    window: int | None = None

    def __init__(self, vocab_size: int = VOCAB_SIZE):
        self.vocab_size = vocab_size

    def predict(self, context: Sequence[int]) -> np.ndarray:
        return np.zeros(self.vocab_size, dtype=np.float64)


class NGramModel:
    """Order-n counts with add-alpha smoothing, backing off to shorter
    contexts (down to the unigram) when a context was never seen."""

    def __init__(self, order: int, alpha: float = 0.01, vocab_size: int = VOCAB_SIZE):
        if order < 1:
            raise ValueError("order must be >= 1")
        self.order = order
        self.alpha = alpha
        self.vocab_size = vocab_size
        self.window: int | None = None
        self.tables: list[dict[tuple[int, ...], Counter]] = [dict() for _ in range(order)]

    def fit(self, sequences: Iterable[Sequence[int]]) -> "NGramModel":
        for seq in sequences:
            for t, token in enumerate(seq):
                for k in range(self.order):
                    if t < k:
                        break
                    context = tuple(seq[t - k : t])
                    self.tables[k].setdefault(context, Counter())[token] += 1
        return self

    def predict(self, context: Sequence[int]) -> np.ndarray:
        counter: Counter | None = None
        for k in range(min(self.order - 1, len(context)), -1, -1):
            counter = self.tables[k].get(tuple(context[len(context) - k :]))
            if counter is not None:
                break
        counts = np.zeros(self.vocab_size, dtype=np.float64)
        if counter:
            for token, count in counter.items():
                counts[token] = count
        probs = (counts + self.alpha) / (counts.sum() + self.alpha * self.vocab_size)
        return np.log(probs)


# --- training ---


def _pad_batch(sequences: list[list[int]]) -> tuple[torch.Tensor, torch.Tensor]:
    """Inputs padded with 0 and shifted targets padded with -100 (ignored)."""
    longest = max(len(s) for s in sequences)
    x = torch.zeros(len(sequences), longest - 1, dtype=torch.long)
    y = torch.full((len(sequences), longest - 1), -100, dtype=torch.long)
    for i, seq in enumerate(sequences):
        x[i, : len(seq) - 1] = torch.tensor(seq[:-1], dtype=torch.long)
        y[i, : len(seq) - 1] = torch.tensor(seq[1:], dtype=torch.long)
    return x, y


def train(cfg: ModelConfig, sequences: Sequence[Sequence[int]]) -> tuple[TransformerLM, list[float]]:
    """Adam on next-token cross-entropy; returns the model and the per-step
    mean loss (nats/token). Raises DivergenceError if the loss goes
    non-finite."""
    if not sequences:
        raise ValueError("training set is empty")
    seqs = [list(s) for s in sequences]
    for s in seqs:
        if len(s) > cfg.window:
            raise ContextTooLong(f"training sequence of {len(s)} tokens exceeds window {cfg.window}")
        if len(s) < 2:
            raise ValueError("training sequences need at least 2 tokens")
    torch.manual_seed(cfg.seed)
    model = TransformerLM(cfg)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    sampler = torch.Generator().manual_seed(cfg.seed)
    losses: list[float] = []
    model.train()
    for step in range(cfg.steps):
        picks = torch.randint(len(seqs), (cfg.batch_size,), generator=sampler)
        x, y = _pad_batch([seqs[i] for i in picks])
        logits = model(x)
        loss = F.cross_entropy(logits.reshape(-1, model.vocab_size), y.reshape(-1), ignore_index=-100)
        if not torch.isfinite(loss):
            raise DivergenceError(f"loss became {loss.item()} at step {step}")
        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        if cfg.grad_clip > 0:
            nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
        optimizer.step()
        losses.append(float(loss.item()))
    return model, losses


def greedy_accuracy(model: TransformerLM, sequences: Sequence[Sequence[int]]) -> float:
    """Teacher-forced next-token argmax accuracy over all positions."""
    model.eval()
    correct = total = 0
    with torch.no_grad():
        for seq in sequences:
            ids = torch.tensor([list(seq)], dtype=torch.long)
            predictions = model(ids[:, :-1]).argmax(dim=-1)[0]
            targets = ids[0, 1:]
            correct += int((predictions == targets).sum())
            total += len(targets)
    return correct / max(total, 1)


def write_loss_csv(path: str | Path, losses: Sequence[float]) -> None:
    lines = ["step,loss"] + [f"{i},{loss:.6f}" for i, loss in enumerate(losses)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- gradient checking ---


def batch_loss(model: TransformerLM, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    logits = model(x)
    return F.cross_entropy(logits.reshape(-1, model.vocab_size), y.reshape(-1), ignore_index=-100)


def analytic_grads(model: TransformerLM, x: torch.Tensor, y: torch.Tensor) -> dict[str, torch.Tensor]:
    model.zero_grad(set_to_none=True)
    loss = batch_loss(model, x, y)
    loss.backward()
    return {name: p.grad.detach().clone() for name, p in model.named_parameters()}


def grad_check(
    model: TransformerLM,
    x: torch.Tensor,
    y: torch.Tensor,
    n_samples: int = 200,
    step: float = 1e-4,
    seed: int = 0,
    grads: dict[str, torch.Tensor] | None = None,
) -> float:
    """Max relative error between gradients and central finite differences
    over >= n_samples parameter coordinates sampled across every tensor.
    Runs in float64 on a copy of the model. Pass precomputed (possibly
    corrupted) grads to test the checker itself."""
    model = copy.deepcopy(model).double()
    if grads is None:
        grads = analytic_grads(model, x, y)
    else:
        grads = {name: g.double() for name, g in grads.items()}
    params = dict(model.named_parameters())
    total = sum(p.numel() for p in params.values())
    rng = np.random.default_rng(seed)
    coordinates: list[tuple[str, int]] = []
    for name, p in params.items():
        share = max(1, round(n_samples * p.numel() / total))
        picks = rng.choice(p.numel(), size=min(share, p.numel()), replace=False)
        coordinates.extend((name, int(i)) for i in picks)
    worst = 0.0
    with torch.no_grad():
        for name, index in coordinates:
            flat = params[name].view(-1)
            original = float(flat[index])
            flat[index] = original + step
            plus = float(batch_loss(model, x, y))
            flat[index] = original - step
            minus = float(batch_loss(model, x, y))
            flat[index] = original
            numeric = (plus - minus) / (2 * step)
            analytic = float(grads[name].view(-1)[index])
            scale = max(abs(numeric), abs(analytic))
            if scale < 1e-10:
                continue
            worst = max(worst, abs(numeric - analytic) / scale)
    return worst


# --- checkpoints ---

_CHECKPOINT_MAGIC = b"TSCK"


def save_checkpoint(path: str | Path, model: TransformerLM, losses: Sequence[float] | None = None) -> None:
    """Single file: magic, JSON header {config, vocab_hash, tensors}, then
    the tensors as raw little-endian float32 in header order."""
    tensors = {name: p.detach().to(torch.float32).numpy() for name, p in model.state_dict().items()}
    header = {
        "version": 1,
        "config": asdict(model.cfg),
        "vocab_hash": vocab_hash(),
        "final_loss": losses[-1] if losses else None,
        "tensors": [{"name": name, "shape": list(a.shape)} for name, a in tensors.items()],
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(len(blob).to_bytes(4, "little"))
        fh.write(blob)
        for array in tensors.values():
            fh.write(np.ascontiguousarray(array, dtype="<f4").tobytes())


def load_checkpoint(path: str | Path) -> TransformerLM:
    data = Path(path).read_bytes()
    if data[:4] != _CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    header_len = int.from_bytes(data[4:8], "little")
    try:
        header = json.loads(data[8 : 8 + header_len])
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt header") from exc
    if header.get("version") != 1:
        raise CheckpointError(f"{path}: unsupported version {header.get('version')!r}")
    if header.get("vocab_hash") != vocab_hash():
        raise CheckpointError(f"{path}: vocabulary hash mismatch")
    cfg = ModelConfig(**header["config"])
    model = TransformerLM(cfg)
    offset = 8 + header_len
    state = {}
    for meta in header["tensors"]:
        count = int(np.prod(meta["shape"])) if meta["shape"] else 1
        raw = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
        offset += count * 4
        state[meta["name"]] = torch.tensor(raw.copy(), dtype=torch.float32).reshape(meta["shape"])
    missing = set(model.state_dict()) - set(state)
    if missing:
        raise CheckpointError(f"{path}: missing tensors {sorted(missing)[:3]}")
    model.load_state_dict(state)
    return model
