"""Toy transformer encoder with a syntax-attention side branch.

The backbone runs unmasked; its layer-k hidden state feeds two masked
attention layers whose projected output is added back onto the final hidden
state. The [CLS] row of the fused state drives a sigmoid scoring head.
Gradients are exact (reverse-mode through the whole graph) and everything is
deterministic under a fixed seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import metrics
from .attention import (
    AttentionConfig,
    EncoderLayerParams,
    MultiHeadParams,
    SiaBlockParams,
    _encoder_layer,
    _sia_block,
)
from .autodiff import Tensor
from .conllu import DataError, DialogueExample, EvalCase
from .masks import (
    SPECIAL_MODES,
    AssembledSequence,
    AttentionMask,
    SpecialToken,
    assemble,
    sia_mask,
)

CHECKPOINT_FORMAT = "sia-checkpoint"
CHECKPOINT_VERSION = 1

PROB_CLAMP = 1e-12


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during training."""


class Vocab:
    """Whole-word vocabulary; ids 0..3 are [CLS], [EOU], [SEP], [UNK]."""

    CLS_ID, EOU_ID, SEP_ID, UNK_ID = 0, 1, 2, 3
    _SPECIALS = ("[CLS]", "[EOU]", "[SEP]", "[UNK]")

    def __init__(self, forms: list[str]):
        self.forms = list(forms)
        self._ids = {f: i + len(self._SPECIALS) for i, f in enumerate(self.forms)}

    @classmethod
    def build(cls, examples) -> "Vocab":
        """Collect word forms in first-occurrence order over a dialogue corpus."""
        seen: dict[str, None] = {}
        for ex in examples:
            for tree in (*ex.context, ex.response):
                for tok in tree.tokens:
                    seen.setdefault(tok.form, None)
        return cls(list(seen))

    def __len__(self) -> int:
        return len(self.forms) + len(self._SPECIALS)

    def id_of(self, form: str) -> int:
        return self._ids.get(form, self.UNK_ID)

    def special_id(self, kind: str) -> int:
        return {"CLS": self.CLS_ID, "EOU": self.EOU_ID, "SEP": self.SEP_ID}[kind]


@dataclass(frozen=True)
class ModelConfig:
    """Architecture plus mask settings (everything forward needs besides weights)."""

    dim: int = 16
    heads: int = 2
    layers: int = 2
    tap: int | None = None  # defaults to ceil(layers / 2)
    m: int = 4
    mask_mode: str = "additive"
    max_len: int = 128
    special_mode: str = "open"
    sia: bool = True  # False disables the fusion branch entirely

    def __post_init__(self):
        AttentionConfig(self.dim, self.heads, self.mask_mode)  # validates dim/heads/mode
        if self.layers < 1:
            raise ValueError("need at least one backbone layer")
        if not 1 <= self.tap_layer <= self.layers:
            raise ValueError(f"tap layer {self.tap_layer} outside 1..{self.layers}")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.max_len < 4:
            raise ValueError("max_len too small for [CLS] u [EOU] [SEP] r [SEP]")
        if self.special_mode not in SPECIAL_MODES:
            raise ValueError(f"special_mode must be one of {SPECIAL_MODES}")

    @property
    def tap_layer(self) -> int:
        return self.tap if self.tap is not None else math.ceil(self.layers / 2)

    def backbone_attention(self) -> AttentionConfig:
        return AttentionConfig(self.dim, self.heads, "none")

    def sia_attention(self) -> AttentionConfig:
        return AttentionConfig(self.dim, self.heads, self.mask_mode)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.5
    epochs: int = 100
    seed: int = 0
    neg_ratio: int = 0  # extra sampled negatives per positive example
    freeze_backbone: bool = False  # update only the syntax branch and the task head
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("learning rate must be >= 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.neg_ratio < 0:
            raise ValueError("neg_ratio must be >= 0")


class ModelParams:
    """All weight tensors plus the vocabulary and tap index."""

    def __init__(self, embed, pos, layers, sia, w_task, b_task, tap: int, vocab: Vocab):
        self.embed = embed
        self.pos = pos
        self.layers = layers  # list[EncoderLayerParams]
        self.sia = sia  # SiaBlockParams
        self.w_task = w_task
        self.b_task = b_task
        self.tap = tap
        self.vocab = vocab

    @classmethod
    def init(cls, vocab: Vocab, cfg: ModelConfig, rng: np.random.Generator) -> "ModelParams":
        """Seeded uniform(-0.1, 0.1) init; layer norms start at identity."""
        d, dh = cfg.dim, cfg.dim // cfg.heads

        def u(*shape):
            return rng.uniform(-0.1, 0.1, size=shape)

        def layer():
            mha = MultiHeadParams(
                wq=[u(d, dh) for _ in range(cfg.heads)],
                wk=[u(d, dh) for _ in range(cfg.heads)],
                wv=[u(d, dh) for _ in range(cfg.heads)],
                wo=u(d, d),
            )
            return EncoderLayerParams(mha=mha, ln_gain=np.ones(d), ln_bias=np.zeros(d))

        return cls(
            embed=u(len(vocab), d),
            pos=u(cfg.max_len, d),
            layers=[layer() for _ in range(cfg.layers)],
            sia=SiaBlockParams(layers=[layer(), layer()], out_proj=u(d, d)),
            w_task=u(d),
            b_task=np.zeros(()),
            tap=cfg.tap_layer,
            vocab=vocab,
        )

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        """Stable (name, array) listing used by updates, checkpoints, and grads."""
        out = [("embed", self.embed), ("pos", self.pos)]

        def mha_entries(prefix, mha):
            for h, (wq, wk, wv) in enumerate(zip(mha.wq, mha.wk, mha.wv)):
                out.extend([(f"{prefix}.h{h}.wq", wq), (f"{prefix}.h{h}.wk", wk), (f"{prefix}.h{h}.wv", wv)])
            out.append((f"{prefix}.wo", mha.wo))

        for l, layer in enumerate(self.layers):
            mha_entries(f"enc{l}", layer.mha)
            out.extend([(f"enc{l}.ln_gain", layer.ln_gain), (f"enc{l}.ln_bias", layer.ln_bias)])
        for l, layer in enumerate(self.sia.layers):
            mha_entries(f"sia{l}", layer.mha)
            out.extend([(f"sia{l}.ln_gain", layer.ln_gain), (f"sia{l}.ln_bias", layer.ln_bias)])
        out.append(("sia.out_proj", self.sia.out_proj))
        out.extend([("w_task", self.w_task), ("b_task", self.b_task)])
        return out

    def num_parameters(self) -> int:
        return sum(arr.size for _, arr in self.named_arrays())

    def map_arrays(self, fn) -> "ModelParams":
        """Structure-preserving transform of every weight tensor."""

        def mha(m):
            return MultiHeadParams(
                wq=[fn(w) for w in m.wq], wk=[fn(w) for w in m.wk], wv=[fn(w) for w in m.wv], wo=fn(m.wo)
            )

        def layer(l):
            return EncoderLayerParams(mha=mha(l.mha), ln_gain=fn(l.ln_gain), ln_bias=fn(l.ln_bias))

        return ModelParams(
            embed=fn(self.embed),
            pos=fn(self.pos),
            layers=[layer(l) for l in self.layers],
            sia=SiaBlockParams(layers=[layer(l) for l in self.sia.layers], out_proj=fn(self.sia.out_proj)),
            w_task=fn(self.w_task),
            b_task=fn(self.b_task),
            tap=self.tap,
            vocab=self.vocab,
        )

    def copy(self) -> "ModelParams":
        return self.map_arrays(np.copy)


# --- forward pass -----------------------------------------------------------


@dataclass
class ForwardStates:
    """Intermediate tensors of one scoring pass, for inspection and tests."""

    score: float
    h: np.ndarray  # final backbone hidden state
    h_tap: np.ndarray
    h_sia: np.ndarray | None
    h_prime: np.ndarray
    backbone_attn: list  # [layer][head] weight matrices
    sia_attn: list  # [sia layer][head] weight matrices
    seq: AssembledSequence
    mask: AttentionMask | None


def _position_ids(seq: AssembledSequence, vocab: Vocab) -> np.ndarray:
    ids = []
    for pos in seq.positions:
        if isinstance(pos, SpecialToken):
            ids.append(vocab.special_id(pos.kind))
        else:
            ids.append(vocab.id_of(seq.tree(pos.utterance).token(pos.index).form))
    return np.array(ids, dtype=np.intp)


def _forward_graph(example: DialogueExample, tp: ModelParams, cfg: ModelConfig):
    """Build the scoring graph; ``tp`` holds Tensor-wrapped parameters."""
    seq = assemble(example)
    if seq.n > cfg.max_len:
        raise DataError(f"assembled sequence length {seq.n} exceeds max_len {cfg.max_len}")
    ids = _position_ids(seq, tp.vocab)
    x = ad.gather_rows(tp.embed, ids) + ad.gather_rows(tp.pos, np.arange(seq.n))

    backbone_attn = []
    taps = []
    for layer in tp.layers:
        x, weights = _encoder_layer(x, layer, None, cfg.backbone_attention())
        backbone_attn.append(weights)
        taps.append(x)
    h = x
    h_tap = taps[tp.tap - 1]

    mask = None
    h_sia = None
    sia_attn: list = []
    if cfg.sia:
        mask = sia_mask(seq, cfg.m, cfg.special_mode)
        h_sia, sia_attn = _sia_block(h_tap, tp.sia, mask.cells, cfg.sia_attention())
        h_prime = h + h_sia
    else:
        h_prime = h

    t_cls = ad.gather_rows(h_prime, np.array([0]))
    logit = ad.tsum(t_cls * tp.w_task) + tp.b_task
    score = ad.sigmoid(logit)
    extras = {
        "seq": seq,
        "mask": mask,
        "h": h,
        "h_tap": h_tap,
        "h_sia": h_sia,
        "h_prime": h_prime,
        "backbone_attn": backbone_attn,
        "sia_attn": sia_attn,
    }
    return score, extras


def _tensorize(params: ModelParams) -> ModelParams:
    return params.map_arrays(Tensor)


def forward(example: DialogueExample, params: ModelParams, cfg: ModelConfig) -> float:
    """Matching score g(context, response) in (0, 1)."""
    score, _ = _forward_graph(example, _tensorize(params), cfg)
    value = float(score.value)
    if not np.isfinite(value):
        raise FloatingPointError("non-finite score")
    return value


def forward_states(example: DialogueExample, params: ModelParams, cfg: ModelConfig) -> ForwardStates:
    """Like :func:`forward` but returns hidden states and attention weights."""
    score, ex = _forward_graph(example, _tensorize(params), cfg)
    return ForwardStates(
        score=float(score.value),
        h=ex["h"].value,
        h_tap=ex["h_tap"].value,
        h_sia=None if ex["h_sia"] is None else ex["h_sia"].value,
        h_prime=ex["h_prime"].value,
        backbone_attn=[[w.value for w in layer] for layer in ex["backbone_attn"]],
        sia_attn=[[w.value for w in layer] for layer in ex["sia_attn"]],
        seq=ex["seq"],
        mask=ex["mask"],
    )


def _normalize_batch(batch) -> list[tuple[DialogueExample, int]]:
    pairs = []
    for item in batch:
        if isinstance(item, DialogueExample):
            pairs.append((item, item.label))
        else:
            ex, y = item
            if y not in (0, 1):
                raise DataError(f"label must be 0 or 1, got {y!r}")
            pairs.append((ex, y))
    if not pairs:
        raise DataError("empty batch")
    return pairs


def _example_loss(score: Tensor, y: int) -> Tensor:
    g = ad.clip(score, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return -ad.log(g) if y == 1 else -ad.log(1.0 - g)


def loss(batch, params: ModelParams, cfg: ModelConfig) -> float:
    """Mean binary cross-entropy over (example, label) pairs."""
    pairs = _normalize_batch(batch)
    tp = _tensorize(params)
    total = 0.0
    for ex, y in pairs:
        score, _ = _forward_graph(ex, tp, cfg)
        total += float(_example_loss(score, y).value)
    return total / len(pairs)


def _loss_and_gradients(batch, params: ModelParams, cfg: ModelConfig):
    pairs = _normalize_batch(batch)
    tp = _tensorize(params)
    total = 0.0
    for ex, y in pairs:
        score, _ = _forward_graph(ex, tp, cfg)
        term = _example_loss(score, y)
        ad.backward(term, seed=1.0 / len(pairs))
        total += float(term.value)
    grads = {}
    for (name, _), (_, tensor) in zip(params.named_arrays(), tp.named_arrays()):
        grads[name] = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.value)
    return total / len(pairs), grads


def gradients(batch, params: ModelParams, cfg: ModelConfig) -> dict[str, np.ndarray]:
    """Exact gradients of the mean batch loss for every named parameter."""
    _, grads = _loss_and_gradients(batch, params, cfg)
    return grads


# --- training ----------------------------------------------------------------


def augment_with_negatives(dataset, ratio: int, rng: np.random.Generator):
    """Pair each positive context with ``ratio`` responses sampled from other records."""
    if ratio < 1:
        return list(dataset)
    out = []
    for i, ex in enumerate(dataset):
        out.append(ex)
        if ex.label != 1 or len(dataset) < 2:
            continue
        for _ in range(ratio):
            j = int(rng.integers(0, len(dataset) - 1))
            if j >= i:
                j += 1
            out.append(DialogueExample(context=ex.context, response=dataset[j].response, label=0))
    return out


def train(dataset, cfg: TrainConfig):
    """Full-batch gradient descent; returns (params, per-epoch mean losses).

    Deterministic for a fixed seed. Raises TrainingDiverged on a non-finite
    loss or gradient.
    """
    dataset = list(dataset)
    if not dataset:
        raise DataError("training dataset is empty")
    rng = np.random.default_rng(cfg.seed)
    vocab = Vocab.build(dataset)
    params = ModelParams.init(vocab, cfg.model, rng)
    batch = augment_with_negatives(dataset, cfg.neg_ratio, rng)
    losses: list[float] = []
    frozen = ("embed", "pos", "enc") if cfg.freeze_backbone else ()
    for epoch in range(cfg.epochs):
        mean_loss, grads = _loss_and_gradients(batch, params, cfg.model)
        if not math.isfinite(mean_loss):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
        for name, arr in params.named_arrays():
            g = grads[name]
            if not np.all(np.isfinite(g)):
                raise TrainingDiverged(f"non-finite gradient for {name} at epoch {epoch}")
            if name.startswith(frozen):
                continue
            arr -= cfg.lr * g
        losses.append(mean_loss)
    return params, losses


def predict(example: DialogueExample, params: ModelParams, cfg: ModelConfig) -> int:
    return int(forward(example, params, cfg) >= 0.5)


def score_candidates(context, candidates, params: ModelParams, cfg: ModelConfig):
    """Rank candidate responses for a context, descending; ties keep input order."""
    context = tuple(context)
    candidates = list(candidates)
    if not candidates:
        raise DataError("candidate pool is empty")
    scored = []
    for i, cand in enumerate(candidates):
        ex = DialogueExample(context=context, response=cand, label=0)
        scored.append((i, forward(ex, params, cfg)))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored


def evaluate_cases(cases: list[EvalCase], params: ModelParams, cfg: ModelConfig) -> dict:
    """Score every case's pool and aggregate the ranking metrics report."""
    if not cases:
        raise DataError("evaluation set is empty")
    ranked = []
    for case in cases:
        order = score_candidates(case.context, case.candidates, params, cfg)
        ranked.append(metrics.RankedCase(tuple(case.labels[i] for i, _ in order)))
    try:
        return metrics.evaluation_report(ranked)
    except ValueError as exc:
        # metric preconditions (uniform pool size, >=1 positive) are data problems
        raise DataError(str(exc)) from None


# --- checkpoint io ------------------------------------------------------------


def _config_to_dict(cfg: ModelConfig) -> dict:
    return {
        "dim": cfg.dim,
        "heads": cfg.heads,
        "layers": cfg.layers,
        "tap": cfg.tap_layer,
        "m": cfg.m,
        "mask_mode": cfg.mask_mode,
        "max_len": cfg.max_len,
        "special_mode": cfg.special_mode,
        "sia": cfg.sia,
    }


def save_checkpoint(path: str, params: ModelParams, cfg: ModelConfig) -> None:
    """Write a versioned JSON checkpoint with shape headers per tensor."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model": _config_to_dict(cfg),
        "vocab": params.vocab.forms,
        "params": {
            name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in params.named_arrays()
        },
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f)
        f.write("\n")


def load_checkpoint(path: str) -> tuple[ModelParams, ModelConfig]:
    """Load a checkpoint, rejecting unknown versions and shape mismatches."""
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise DataError("not a model checkpoint file")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint version {payload.get('version')!r}")
    try:
        cfg = ModelConfig(**payload["model"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad checkpoint model config: {exc}") from None
    vocab = Vocab(list(payload.get("vocab", [])))
    rng = np.random.default_rng(0)
    params = ModelParams.init(vocab, cfg, rng)
    stored = payload.get("params")
    if not isinstance(stored, dict):
        raise DataError("checkpoint missing params table")
    expected = params.named_arrays()
    expected_names = [name for name, _ in expected]
    extra = set(stored) - set(expected_names)
    if extra:
        raise DataError(f"checkpoint has unexpected tensors: {sorted(extra)}")
    for name, arr in expected:
        if name not in stored:
            raise DataError(f"checkpoint missing tensor {name!r}")
        entry = stored[name]
        shape = tuple(entry.get("shape", ()))
        if shape != arr.shape:
            raise DataError(f"shape mismatch for {name!r}: checkpoint {shape}, model {arr.shape}")
        data = np.asarray(entry.get("data"), dtype=np.float64)
        if data.size != arr.size:
            raise DataError(f"data length mismatch for {name!r}")
        arr[...] = data.reshape(arr.shape)
    return params, cfg
