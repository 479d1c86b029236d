"""Decoder-only transformer over a joint text + trajectory token vocabulary.

Sequences follow the translation format
    BOS [source] SEP TO_TRAJ|TO_TEXT [target] EOS
with loss on the target span only. Attention uses a prefix mask: source
positions see the whole source, target positions see the source plus earlier
targets. The trajectory span always starts with one duration token (32
log-spaced bins over [0.5 s, 60 s]) followed by codebook token ids.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn

from .checkpoint import read_checkpoint, write_checkpoint
from .dataset import (
    RESERVED_TEMPLATES,
    TEMPLATES,
    canonical_primitive_grid,
    gen_primitive,
    render_with_template,
    text_variants,
    translation_protocol,
    vocabulary_words,
)
from .errors import CheckpointError, ContextOverflow, TrainingDiverged, UnknownToken
from .geometry import Trajectory, resample
from .tokenizer import (
    TokenizerConfig,
    TokenizerNet,
    TrajTokenSeq,
    decode as tok_decode,
    tokenize,
    train_tokenizer,
)

PAD, BOS, EOS, SEP, TO_TRAJ, TO_TEXT = range(6)
SPECIAL_NAMES = ("<pad>", "<bos>", "<eos>", "<sep>", "<to_traj>", "<to_text>")


class Vocab:
    """Dense id space: specials, then words, then trajectory ids, then durations."""

    def __init__(
        self,
        words: Sequence[str],
        codebook_size: int,
        n_duration: int = 32,
        dur_lo: float = 0.5,
        dur_hi: float = 60.0,
    ):
        self.words = tuple(words)
        self.codebook_size = int(codebook_size)
        self.n_duration = int(n_duration)
        self.dur_lo = float(dur_lo)
        self.dur_hi = float(dur_hi)
        self._word_base = len(SPECIAL_NAMES)
        self._traj_base = self._word_base + len(self.words)
        self._dur_base = self._traj_base + self.codebook_size
        self.size = self._dur_base + self.n_duration
        self._word_index = {w: self._word_base + i for i, w in enumerate(self.words)}

    @classmethod
    def from_dataset(cls, codebook_size: int) -> "Vocab":
        return cls(vocabulary_words(), codebook_size)

    # -- text ----------------------------------------------------------------
    @staticmethod
    def normalize(text: str) -> list:
        return re.sub(r"[^a-z0-9\s]", " ", text.lower()).split()

    def encode_text(self, text: str) -> list:
        tokens = self.normalize(text)
        if not tokens:
            raise ValueError("empty text")
        unknown = sorted({w for w in tokens if w not in self._word_index})
        if unknown:
            raise UnknownToken(unknown)
        return [self._word_index[w] for w in tokens]

    def decode_text(self, ids: Sequence[int]) -> str:
        out = []
        for i in ids:
            if not self.is_word(i):
                raise ValueError(f"id {i} is not a word token")
            out.append(self.words[i - self._word_base])
        return " ".join(out)

    # -- trajectory ----------------------------------------------------------
    def traj_token(self, codebook_id: int) -> int:
        if not 0 <= codebook_id < self.codebook_size:
            raise ValueError(f"codebook id {codebook_id} out of range")
        return self._traj_base + codebook_id

    def codebook_id(self, token: int) -> int:
        if not self.is_traj(token):
            raise ValueError(f"id {token} is not a trajectory token")
        return token - self._traj_base

    # -- duration ------------------------------------------------------------
    def duration_token(self, seconds: float) -> int:
        d = min(max(float(seconds), self.dur_lo), self.dur_hi)
        frac = math.log(d / self.dur_lo) / math.log(self.dur_hi / self.dur_lo)
        idx = min(int(frac * self.n_duration), self.n_duration - 1)
        return self._dur_base + idx

    def duration_value(self, token: int) -> float:
        if not self.is_duration(token):
            raise ValueError(f"id {token} is not a duration token")
        idx = token - self._dur_base
        frac = (idx + 0.5) / self.n_duration
        return self.dur_lo * (self.dur_hi / self.dur_lo) ** frac

    # -- predicates ----------------------------------------------------------
    def is_word(self, i: int) -> bool:
        return self._word_base <= i < self._traj_base

    def is_traj(self, i: int) -> bool:
        return self._traj_base <= i < self._dur_base

    def is_duration(self, i: int) -> bool:
        return self._dur_base <= i < self.size

    def word_ids(self) -> list:
        return list(range(self._word_base, self._traj_base))

    def traj_ids(self) -> list:
        return list(range(self._traj_base, self._dur_base))

    def duration_ids(self) -> list:
        return list(range(self._dur_base, self.size))


@dataclass(frozen=True)
class GptConfig:
    layers: int = 4
    model_dim: int = 128
    heads: int = 4
    context: int = 128
    dropout: float = 0.0
    dtype: str = "float32"

    def __post_init__(self):
        if self.model_dim % self.heads != 0:
            raise ValueError("model_dim must be divisible by heads")
        if self.context < 128:
            raise ValueError("context must be at least 128")

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.heads

    def torch_dtype(self) -> torch.dtype:
        return {"float32": torch.float32, "float64": torch.float64}[self.dtype]


PAPER_PROFILE = GptConfig(layers=24, model_dim=256, heads=4, context=128)


@dataclass(frozen=True)
class SamplerParams:
    mode: str = "greedy"
    temperature: float = 1.0
    seed: int = 0
    max_new_tokens: int = 40
    top_k: int = 10
    top_p: float = 0.9

    def __post_init__(self):
        if self.mode not in ("greedy", "top_k", "nucleus"):
            raise ValueError(f"unknown sampling mode {self.mode!r}")
        if self.mode != "greedy" and not self.temperature > 0:
            raise ValueError("temperature must be positive for stochastic modes")


class _Block(nn.Module):
    def __init__(self, config: GptConfig):
        super().__init__()
        d = config.model_dim
        self.ln1 = nn.LayerNorm(d)
        self.qkv = nn.Linear(d, 3 * d)
        self.proj = nn.Linear(d, d)
        self.ln2 = nn.LayerNorm(d)
        self.mlp_in = nn.Linear(d, 4 * d)
        self.mlp_out = nn.Linear(4 * d, d)
        self.drop = nn.Dropout(config.dropout)
        self.heads = config.heads

    def forward(self, x: torch.Tensor, bias: torch.Tensor) -> torch.Tensor:
        b, t, d = x.shape
        h = self.heads
        q, k, v = self.qkv(self.ln1(x)).split(d, dim=2)
        q = q.view(b, t, h, d // h).transpose(1, 2)
        k = k.view(b, t, h, d // h).transpose(1, 2)
        v = v.view(b, t, h, d // h).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(d // h) + bias.unsqueeze(1)
        att = torch.softmax(scores, dim=-1)
        att = self.drop(att)
        y = (att @ v).transpose(1, 2).reshape(b, t, d)
        x = x + self.drop(self.proj(y))
        x = x + self.drop(self.mlp_out(torch.nn.functional.gelu(self.mlp_in(self.ln2(x)))))
        return x


class TransformerLM(nn.Module):
    def __init__(self, vocab: Vocab, config: GptConfig):
        super().__init__()
        self.vocab = vocab
        self.config = config
        d = config.model_dim
        self.tok_emb = nn.Embedding(vocab.size, d)
        self.pos_emb = nn.Embedding(config.context, d)
        self.blocks = nn.ModuleList(_Block(config) for _ in range(config.layers))
        self.ln_f = nn.LayerNorm(d)
        self.head = nn.Linear(d, vocab.size)
        self.drop = nn.Dropout(config.dropout)
        self.to(config.torch_dtype())

    def reset_parameters(self, generator: torch.Generator) -> None:
        with torch.no_grad():
            for name, p in self.named_parameters():
                if p.dim() >= 2:
                    std = 0.02
                    p.copy_(torch.randn(p.shape, generator=generator, dtype=torch.float64) * std)
                elif "weight" in name:  # layer norm gains
                    p.fill_(1.0)
                else:
                    p.zero_()

    def attention_bias(self, tokens: torch.Tensor, prefix_lens: torch.Tensor) -> torch.Tensor:
        """(B, T, T) additive mask: 0 where key j is visible to query i.

        Visible means j < prefix (source fully visible) or j <= i (causal),
        and the key is not PAD.
        """
        b, t = tokens.shape
        pos = torch.arange(t)
        causal = pos.unsqueeze(0) <= pos.unsqueeze(1)  # (T_query, T_key)
        allowed = causal.unsqueeze(0) | (pos.view(1, 1, t) < prefix_lens.view(b, 1, 1))
        allowed = allowed & (tokens != PAD).view(b, 1, t)
        bias = torch.zeros(b, t, t, dtype=self.config.torch_dtype())
        bias.masked_fill_(~allowed, float("-inf"))
        return bias

    def forward(self, tokens: torch.Tensor, prefix_lens: torch.Tensor) -> torch.Tensor:
        b, t = tokens.shape
        if t > self.config.context:
            raise ContextOverflow(f"sequence length {t} exceeds context {self.config.context}")
        bias = self.attention_bias(tokens, prefix_lens)
        x = self.tok_emb(tokens) + self.pos_emb(torch.arange(t)).unsqueeze(0)
        x = self.drop(x)
        for block in self.blocks:
            x = block(x, bias)
        return self.head(self.ln_f(x))


def build_gpt(vocab: Vocab, config: Optional[GptConfig] = None, seed: int = 0) -> TransformerLM:
    model = TransformerLM(vocab, config or GptConfig())
    model.reset_parameters(torch.Generator().manual_seed(int(seed)))
    return model


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------


def per_token_nll(model: TransformerLM, source: Sequence[int], target: Sequence[int]) -> torch.Tensor:
    """NLL of each target token given the source prefix and earlier targets."""
    if not target:
        raise ValueError("target span is empty")
    full = list(source) + list(target)
    if len(full) > model.config.context:
        raise ContextOverflow(
            f"sequence length {len(full)} exceeds context {model.config.context}"
        )
    tokens = torch.tensor([full], dtype=torch.long)
    prefix = torch.tensor([len(source)], dtype=torch.long)
    logits = model(tokens, prefix)[0]
    logp = torch.log_softmax(logits, dim=-1)
    out = []
    start = len(source)
    for i, tok in enumerate(target):
        out.append(-logp[start + i - 1, tok])
    return torch.stack(out)


def lm_loss(model: TransformerLM, source: Sequence[int], target: Sequence[int]) -> torch.Tensor:
    """Mean negative log-likelihood over the target span (Eq. objective)."""
    return per_token_nll(model, source, target).mean()


def batched_lm_loss(model: TransformerLM, pairs: Sequence[tuple]) -> torch.Tensor:
    """Mean NLL over all target tokens of a batch of (source, target) pairs."""
    tmax = max(len(s) + len(t) for s, t in pairs)
    if tmax > model.config.context:
        raise ContextOverflow(f"sequence length {tmax} exceeds context {model.config.context}")
    b = len(pairs)
    tokens = torch.full((b, tmax), PAD, dtype=torch.long)
    prefix = torch.zeros(b, dtype=torch.long)
    mask = torch.zeros(b, tmax, dtype=torch.bool)
    targets = torch.zeros(b, tmax, dtype=torch.long)
    for r, (s, t) in enumerate(pairs):
        full = list(s) + list(t)
        tokens[r, : len(full)] = torch.tensor(full, dtype=torch.long)
        prefix[r] = len(s)
        # position i predicts token i+1; mark predictor positions of the target span
        mask[r, len(s) - 1 : len(full) - 1] = True
        targets[r, len(s) - 1 : len(full) - 1] = torch.tensor(list(t), dtype=torch.long)
    logits = model(tokens, prefix)
    logp = torch.log_softmax(logits, dim=-1)
    picked = logp.gather(-1, targets.unsqueeze(-1)).squeeze(-1)
    return -(picked[mask]).mean()


# ---------------------------------------------------------------------------
# Sequence builders
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TokenizedPair:
    """Corpus item with both modalities already in vocab id space."""

    text_ids: tuple
    traj_ids: tuple  # trajectory tokens (vocab space), without the duration token
    dur_id: int

    def __post_init__(self):
        object.__setattr__(self, "text_ids", tuple(int(i) for i in self.text_ids))
        object.__setattr__(self, "traj_ids", tuple(int(i) for i in self.traj_ids))


def tokenize_pair(vocab: Vocab, tokenizer: TokenizerNet, text: str, traj: Trajectory) -> TokenizedPair:
    seq = tokenize(tokenizer, traj)
    return TokenizedPair(
        text_ids=tuple(vocab.encode_text(text)),
        traj_ids=tuple(vocab.traj_token(i) for i in seq.ids),
        dur_id=vocab.duration_token(seq.duration_s),
    )


def build_task(pair: TokenizedPair, task: str) -> tuple:
    """(source, target) id lists for one training task.

    Trajectory spans are laid out end-first. Trajectories of different kinds
    share long near-identity prefixes but end in kind-distinct states, so
    emitting the final token right after the duration token puts the
    discriminative decision where text conditioning is strongest.
    """
    text = list(pair.text_ids)
    traj = [pair.dur_id] + list(pair.traj_ids[::-1])
    if task == "text_lm":
        return [BOS], text + [EOS]
    if task == "traj_lm":
        return [BOS], traj + [EOS]
    if task == "text_to_traj":
        return [BOS] + text + [SEP, TO_TRAJ], traj + [EOS]
    if task == "traj_to_text":
        return [BOS] + traj + [SEP, TO_TEXT], text + [EOS]
    raise ValueError(f"unknown task {task!r}")


STAGE1_TASKS = ("text_lm", "traj_lm", "text_to_traj", "traj_to_text")
TRANSLATION_TASKS = ("text_to_traj", "traj_to_text")


def build_pretraining_corpus(
    vocab: Vocab,
    tokenizer: TokenizerNet,
    seed: int = 0,
    m_frames: int = 120,
    base_duration_s: float = 4.0,
) -> list:
    """Stage-1 corpus: the canonical primitive grid crossed with every
    non-reserved template, plus word-dropout variants of each description.
    The single static primitive is repeated so its kind is not drowned out."""
    rng = np.random.default_rng([int(seed), 77])
    corpus = []
    for p in canonical_primitive_grid():
        seq = tokenize(tokenizer, gen_primitive(p, m_frames, base_duration_s))
        traj_ids = tuple(vocab.traj_token(i) for i in seq.ids)
        dur_id = vocab.duration_token(seq.duration_s)
        reps = 4 if p.kind == "static" else 1
        for j in range(len(TEMPLATES[p.kind])):
            if j == RESERVED_TEMPLATES[p.kind]:
                continue
            base = render_with_template(p, j)
            for text in [base] + text_variants(base, 3, rng):
                text_ids = tuple(vocab.encode_text(text))
                for _ in range(reps):
                    corpus.append(
                        TokenizedPair(text_ids=text_ids, traj_ids=traj_ids, dur_id=dur_id)
                    )
    return corpus


def build_translation_corpus(
    vocab: Vocab,
    tokenizer: TokenizerNet,
    m_frames: int = 120,
    base_duration_s: float = 4.0,
) -> list:
    """The 16-pair fine-tuning corpus from the fixed translation protocol."""
    return [
        tokenize_pair(vocab, tokenizer, text, gen_primitive(p, m_frames, base_duration_s))
        for p, text, _ in translation_protocol()
    ]


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GptTrainConfig:
    steps: int = 2000
    lr: float = 1e-4
    batch_size: int = 8
    weight_decay: float = 0.0
    mixture: tuple = (0.25, 0.25, 0.25, 0.25)  # stage-1 task weights


@dataclass
class GptTrainResult:
    model: TransformerLM
    step_losses: list = field(default_factory=list)


def _train(
    model: TransformerLM,
    corpus: Sequence[TokenizedPair],
    tasks: Sequence[str],
    weights: Sequence[float],
    config: GptTrainConfig,
    seed: int,
) -> GptTrainResult:
    if not corpus:
        raise ValueError("corpus is empty")
    gen = torch.Generator().manual_seed(int(seed))
    opt = torch.optim.AdamW(model.parameters(), lr=config.lr, weight_decay=config.weight_decay)
    w = torch.tensor(list(weights), dtype=torch.float64)
    result = GptTrainResult(model=model)
    for step in range(config.steps):
        idx = torch.randint(0, len(corpus), (config.batch_size,), generator=gen)
        kinds = torch.multinomial(w, config.batch_size, replacement=True, generator=gen)
        batch = [build_task(corpus[i], tasks[k]) for i, k in zip(idx.tolist(), kinds.tolist())]
        loss = batched_lm_loss(model, batch)
        if not torch.isfinite(loss):
            raise TrainingDiverged(f"loss became {loss.item()} at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        result.step_losses.append(float(loss.item()))
    return result


# pinned desk-scale recipe: reaches exact recall of the 16-pair corpus and
# generalizes to held-out templates in a few CPU minutes
TOKENIZER_PIPELINE_CONFIG = TokenizerConfig(steps=500, lr=1e-3, data_init=True)
STAGE1_CONFIG = GptTrainConfig(
    steps=8000, lr=1e-3, weight_decay=0.1, mixture=(0.15, 0.15, 0.55, 0.15)
)
STAGE2_CONFIG = GptTrainConfig(steps=400, lr=5e-4)


def train_pipeline(
    seed: int = 0,
    tokenizer_config: Optional[TokenizerConfig] = None,
    gpt_config: Optional[GptConfig] = None,
    stage1: Optional[GptTrainConfig] = None,
    stage2: Optional[GptTrainConfig] = None,
) -> tuple:
    """Train tokenizer and both LM stages with the pinned recipe.

    Returns (tokenizer net, LM). The tokenizer trains on the canonical grid,
    stage 1 on the template-crossed pretraining corpus, stage 2 on the
    16-pair translation protocol.
    """
    tokenizer_config = tokenizer_config or TOKENIZER_PIPELINE_CONFIG
    trajs = [gen_primitive(p, tokenizer_config.frames, 4.0) for p in canonical_primitive_grid()]
    tok = train_tokenizer(trajs, tokenizer_config, seed=seed).net
    vocab = Vocab.from_dataset(tok.config.codebook_size)
    model = build_gpt(vocab, gpt_config or GptConfig(), seed=seed)
    pre = build_pretraining_corpus(vocab, tok, seed=seed, m_frames=tokenizer_config.frames)
    train_stage1(model, pre, stage1 or STAGE1_CONFIG, seed=seed)
    fine = build_translation_corpus(vocab, tok, m_frames=tokenizer_config.frames)
    finetune_translation(model, fine, stage2 or STAGE2_CONFIG, seed=seed + 1)
    return tok, model


def train_stage1(
    model: TransformerLM,
    corpus: Sequence[TokenizedPair],
    config: Optional[GptTrainConfig] = None,
    seed: int = 0,
) -> GptTrainResult:
    """Mixed-task pretraining: both single-modality continuations plus both
    translation directions, weighted by config.mixture."""
    config = config or GptTrainConfig()
    return _train(model, corpus, STAGE1_TASKS, config.mixture, config, seed)


def finetune_translation(
    model: TransformerLM,
    corpus: Sequence[TokenizedPair],
    config: Optional[GptTrainConfig] = None,
    seed: int = 0,
) -> GptTrainResult:
    """Supervised translation only, both directions with equal weight."""
    config = config or GptTrainConfig()
    return _train(model, corpus, TRANSLATION_TASKS, (0.5, 0.5), config, seed)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def _pick(logits: torch.Tensor, allowed: Sequence[int], sampler: SamplerParams, gen) -> int:
    allowed = list(allowed)
    sub = logits[allowed].to(torch.float64)
    if sampler.mode == "greedy":
        return allowed[int(np.argmax(sub.numpy()))]  # first index on ties
    probs = torch.softmax(sub / sampler.temperature, dim=-1)
    if sampler.mode == "top_k":
        k = min(sampler.top_k, probs.numel())
        keep = torch.topk(probs, k).indices
        filtered = torch.zeros_like(probs)
        filtered[keep] = probs[keep]
        probs = filtered / filtered.sum()
    elif sampler.mode == "nucleus":
        sorted_probs, order = torch.sort(probs, descending=True)
        keep_n = int(torch.searchsorted(torch.cumsum(sorted_probs, 0), sampler.top_p).item()) + 1
        keep = order[:keep_n]
        filtered = torch.zeros_like(probs)
        filtered[keep] = probs[keep]
        probs = filtered / filtered.sum()
    choice = int(torch.multinomial(probs, 1, generator=gen).item())
    return allowed[choice]


def _autoregress(
    model: TransformerLM,
    prefix: list,
    first_allowed: list,
    rest_allowed: list,
    sampler: SamplerParams,
) -> tuple:
    """Sample until EOS. The first token is constrained to first_allowed; later
    tokens to rest_allowed + EOS (EOS only after at least one content token).
    Returns (ids without EOS, truncated flag)."""
    gen = torch.Generator().manual_seed(int(sampler.seed))
    seq = list(prefix)
    out = []
    truncated = True
    with torch.no_grad():
        for step in range(sampler.max_new_tokens):
            tokens = torch.tensor([seq], dtype=torch.long)
            logits = model(tokens, torch.tensor([len(prefix)]))[0, -1]
            if step == 0:
                allowed = list(first_allowed)
            else:
                allowed = list(rest_allowed) + [EOS]
            tok = _pick(logits, allowed, sampler, gen)
            if tok == EOS:
                truncated = False
                break
            seq.append(tok)
            out.append(tok)
            if len(seq) >= model.config.context:
                break
    return out, truncated


@dataclass(frozen=True)
class GeneratedTrajectory:
    trajectory: Trajectory
    token_ids: tuple  # codebook ids
    duration_s: float
    truncated: bool


def generate_trajectory(
    model: TransformerLM,
    tokenizer: TokenizerNet,
    text: str,
    sampler: Optional[SamplerParams] = None,
) -> GeneratedTrajectory:
    """Text -> duration token -> trajectory tokens -> decoded Trajectory."""
    sampler = sampler or SamplerParams()
    vocab = model.vocab
    prefix = [BOS] + vocab.encode_text(text) + [SEP, TO_TRAJ]
    ids, truncated = _autoregress(
        model, prefix, vocab.duration_ids(), vocab.traj_ids(), sampler
    )
    if not ids or not vocab.is_duration(ids[0]):
        raise TrainingDiverged("sampler produced no duration token")
    duration = vocab.duration_value(ids[0])
    # the model emits trajectory tokens end-first; restore temporal order
    traj_tokens = [vocab.codebook_id(i) for i in ids[:0:-1]]
    if not traj_tokens:
        # EOS immediately after the duration token; fall back to one default code
        traj_tokens = [0]
    traj = tok_decode(tokenizer, traj_tokens, duration)
    return GeneratedTrajectory(
        trajectory=traj,
        token_ids=tuple(traj_tokens),
        duration_s=duration,
        truncated=truncated,
    )


def trajectory_to_text(
    model: TransformerLM,
    tokenizer: TokenizerNet,
    traj: Trajectory,
    sampler: Optional[SamplerParams] = None,
) -> str:
    """Trajectory -> token span -> sampled description words."""
    sampler = sampler or SamplerParams()
    vocab = model.vocab
    if len(traj) % tokenizer.config.downsample != 0:
        traj = resample(traj, tokenizer.config.frames)
    seq = tokenize(tokenizer, traj)
    prefix = (
        [BOS, vocab.duration_token(seq.duration_s)]
        + [vocab.traj_token(i) for i in reversed(seq.ids)]
        + [SEP, TO_TEXT]
    )
    ids, _ = _autoregress(model, prefix, vocab.word_ids(), vocab.word_ids(), sampler)
    return vocab.decode_text(ids)


# ---------------------------------------------------------------------------
# Checkpoint I/O
# ---------------------------------------------------------------------------

_CKPT_KIND = "cross-modal-lm"


def save_gpt(model: TransformerLM, path) -> None:
    arrays = {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()}
    v = model.vocab
    c = model.config
    config = {
        "vocab": {
            "words": list(v.words),
            "codebook_size": v.codebook_size,
            "n_duration": v.n_duration,
            "dur_lo": v.dur_lo,
            "dur_hi": v.dur_hi,
        },
        "gpt": {
            "layers": c.layers,
            "model_dim": c.model_dim,
            "heads": c.heads,
            "context": c.context,
            "dropout": c.dropout,
            "dtype": c.dtype,
        },
    }
    write_checkpoint(path, _CKPT_KIND, config, arrays)


def load_gpt(path) -> TransformerLM:
    kind, config, arrays = read_checkpoint(path)
    if kind != _CKPT_KIND:
        raise CheckpointError(f"expected {_CKPT_KIND} checkpoint, got {kind!r}")
    vocab = Vocab(**config["vocab"])
    model = TransformerLM(vocab, GptConfig(**config["gpt"]))
    model.load_state_dict({k: torch.from_numpy(v.copy()) for k, v in arrays.items()})
    return model
