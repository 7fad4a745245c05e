"""Dialogue sequence assembly and syntax-driven attention masks.

The flattened layout is ``[CLS] u_1 [EOU] ... u_M [EOU] [SEP] r [SEP]``.
Rows of a mask are queries: ``cells[i, j] = True`` means key j may take part
in query i's attention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .conllu import DependencyTree, DialogueExample
from .trees import tree_stats

CLS = "CLS"
EOU = "EOU"
SEP = "SEP"

#: special-token policy: fully unmasked rows/columns, or diagonal-only (ablation)
SPECIAL_MODES = ("open", "diagonal")

MASK_KINDS = ("intra", "inter", "sia")


@dataclass(frozen=True)
class SpecialToken:
    kind: str  # CLS | EOU | SEP


@dataclass(frozen=True)
class WordRef:
    utterance: int  # 1-based; M+1 refers to the response
    index: int  # 1-based token index within the utterance


Position = SpecialToken | WordRef


@dataclass(frozen=True)
class AssembledSequence:
    """Flattened dialogue positions plus the trees they point back into."""

    positions: tuple[Position, ...]
    utterances: tuple[DependencyTree, ...]  # context utterances then response

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def num_context(self) -> int:
        return len(self.utterances) - 1

    def tree(self, utterance: int) -> DependencyTree:
        return self.utterances[utterance - 1]

    def labels(self) -> list[str]:
        """Human-readable per-position labels for dumps and heatmaps."""
        out = []
        for pos in self.positions:
            if isinstance(pos, SpecialToken):
                out.append(f"[{pos.kind}]")
            elif pos.utterance == len(self.utterances):
                out.append(f"r:{self.tree(pos.utterance).token(pos.index).form}")
            else:
                out.append(f"u{pos.utterance}:{self.tree(pos.utterance).token(pos.index).form}")
        return out


def assemble(example: DialogueExample) -> AssembledSequence:
    """Flatten a dialogue example into the [CLS] u_1 [EOU] ... [SEP] r [SEP] layout."""
    positions: list[Position] = [SpecialToken(CLS)]
    for u, tree in enumerate(example.context, start=1):
        positions.extend(WordRef(u, i) for i in range(1, len(tree) + 1))
        positions.append(SpecialToken(EOU))
    positions.append(SpecialToken(SEP))
    resp = len(example.context) + 1
    positions.extend(WordRef(resp, i) for i in range(1, len(example.response) + 1))
    positions.append(SpecialToken(SEP))
    return AssembledSequence(positions=tuple(positions), utterances=(*example.context, example.response))


class AttentionMask:
    """Square boolean attention scope over assembled sequence positions."""

    __slots__ = ("n", "cells", "kind", "m")

    def __init__(self, cells: np.ndarray, kind: str | None = None, m: int | None = None):
        cells = np.asarray(cells, dtype=bool)
        if cells.ndim != 2 or cells.shape[0] != cells.shape[1]:
            raise ValueError(f"mask must be square, got shape {cells.shape}")
        cells.setflags(write=False)
        self.n = cells.shape[0]
        self.cells = cells
        self.kind = kind
        self.m = m

    def __eq__(self, other) -> bool:
        if not isinstance(other, AttentionMask):
            return NotImplemented
        return self.kind == other.kind and self.m == other.m and np.array_equal(self.cells, other.cells)

    def __repr__(self) -> str:
        return f"AttentionMask(n={self.n}, kind={self.kind!r}, m={self.m}, ones={int(self.cells.sum())})"


def _check_special_mode(special_mode: str) -> None:
    if special_mode not in SPECIAL_MODES:
        raise ValueError(f"special_mode must be one of {SPECIAL_MODES}, got {special_mode!r}")


def _word_positions(seq: AssembledSequence) -> list[tuple[int, WordRef]]:
    return [(p, pos) for p, pos in enumerate(seq.positions) if isinstance(pos, WordRef)]


def _apply_specials(cells: np.ndarray, seq: AssembledSequence, special_mode: str) -> None:
    special = [p for p, pos in enumerate(seq.positions) if isinstance(pos, SpecialToken)]
    if special_mode == "open":
        cells[special, :] = True
        cells[:, special] = True
    else:
        cells[special, special] = True


def intra_mask(seq: AssembledSequence, special_mode: str = "open") -> AttentionMask:
    """Within-utterance scope: a word sees itself and its syntactic ancestors.

    Cross-utterance word cells are 0; this matrix is directional and in
    general not symmetric.
    """
    _check_special_mode(special_mode)
    cells = np.zeros((seq.n, seq.n), dtype=bool)
    stats = [tree_stats(t) for t in seq.utterances]
    index_of: dict[tuple[int, int], int] = {}
    for p, ref in _word_positions(seq):
        index_of[(ref.utterance, ref.index)] = p
    for p, ref in _word_positions(seq):
        cells[p, p] = True
        for a in stats[ref.utterance - 1].ancestors[ref.index - 1]:
            cells[p, index_of[(ref.utterance, a)]] = True
    _apply_specials(cells, seq, special_mode)
    return AttentionMask(cells, kind="intra")


def inter_mask(seq: AssembledSequence, m: int, special_mode: str = "open") -> AttentionMask:
    """Cross-sentence scope: word pair (i, j) is open iff depth_i + depth_j <= m.

    Applies to every word pair, same utterance or not. With root depth 1 the
    smallest pair sum is 2, so m = 1 blocks all word-word cells.
    """
    _check_special_mode(special_mode)
    if not isinstance(m, int) or isinstance(m, bool) or m < 1:
        raise ValueError(f"m must be an integer >= 1, got {m!r}")
    cells = np.zeros((seq.n, seq.n), dtype=bool)
    stats = [tree_stats(t) for t in seq.utterances]
    words = _word_positions(seq)
    if words:
        idx = np.array([p for p, _ in words])
        d = np.array([stats[ref.utterance - 1].depths[ref.index - 1] for _, ref in words])
        cells[np.ix_(idx, idx)] = d[:, None] + d[None, :] <= m
    _apply_specials(cells, seq, special_mode)
    return AttentionMask(cells, kind="inter", m=m)


def sia_mask(seq: AssembledSequence, m: int, special_mode: str = "open") -> AttentionMask:
    """Cellwise OR of the intra and inter masks; its diagonal is always open."""
    intra = intra_mask(seq, special_mode)
    inter = inter_mask(seq, m, special_mode)
    return AttentionMask(intra.cells | inter.cells, kind="sia", m=m)


def build_mask(seq: AssembledSequence, kind: str, m: int, special_mode: str = "open") -> AttentionMask:
    if kind == "intra":
        return intra_mask(seq, special_mode)
    if kind == "inter":
        return inter_mask(seq, m, special_mode)
    if kind == "sia":
        return sia_mask(seq, m, special_mode)
    raise ValueError(f"kind must be one of {MASK_KINDS}, got {kind!r}")


def expand_to_subwords(mask: AttentionMask, word_to_subwords: Sequence) -> AttentionMask:
    """Expand a word-level mask to subword positions.

    ``word_to_subwords`` maps each original position, in order, to its subword
    slots: either a count (int >= 1) or an explicit list of new indices. The
    groups must partition 0..total-1 contiguously and in order; each subword
    inherits its word's whole row and column.
    """
    if len(word_to_subwords) != mask.n:
        raise ValueError(f"partition has {len(word_to_subwords)} groups for a mask of size {mask.n}")
    sizes = []
    cursor = 0
    for g, entry in enumerate(word_to_subwords):
        if isinstance(entry, (int, np.integer)) and not isinstance(entry, bool):
            if entry < 1:
                raise ValueError(f"group {g}: subword count must be >= 1")
            size = int(entry)
        else:
            ids = list(entry)
            if not ids:
                raise ValueError(f"group {g}: empty subword group")
            if ids != list(range(cursor, cursor + len(ids))):
                raise ValueError(f"group {g}: non-contiguous or overlapping partition")
            size = len(ids)
        sizes.append(size)
        cursor += size
    rep = np.repeat(np.arange(mask.n), sizes)
    return AttentionMask(mask.cells[rep][:, rep], kind=mask.kind, m=mask.m)


# --- serialization + rendering ---------------------------------------------


def mask_to_json(mask: AttentionMask) -> dict:
    return {
        "n": mask.n,
        "rows": mask.cells.astype(int).tolist(),
        "kind": mask.kind,
        "m": mask.m,
    }


def mask_from_json(obj: dict) -> AttentionMask:
    for key in ("n", "rows", "kind", "m"):
        if key not in obj:
            raise ValueError(f"mask JSON missing field {key!r}")
    if obj["kind"] is not None and obj["kind"] not in MASK_KINDS:
        raise ValueError(f"mask kind must be one of {MASK_KINDS} or null")
    cells = np.asarray(obj["rows"], dtype=bool)
    mask = AttentionMask(cells, kind=obj["kind"], m=obj["m"])
    if mask.n != obj["n"]:
        raise ValueError(f"mask JSON declares n={obj['n']} but rows are {mask.n}x{mask.n}")
    return mask


ALLOWED_CELL = "█"  # █
BLOCKED_CELL = "·"  # ·


def render_mask_ascii(mask: AttentionMask, labels: Sequence[str] | None = None) -> str:
    """Terminal heatmap: one row per query, `█` allowed / `·` blocked.

    Columns follow row order; labels (defaulting to indices) are printed on
    the left.
    """
    if labels is None:
        labels = [str(i) for i in range(mask.n)]
    if len(labels) != mask.n:
        raise ValueError("labels length must equal mask size")
    width = max((len(l) for l in labels), default=0)
    header = f"# mask kind={mask.kind or '-'} m={mask.m if mask.m is not None else '-'} n={mask.n}"
    lines = [header]
    for i in range(mask.n):
        row = "".join(ALLOWED_CELL if c else BLOCKED_CELL for c in mask.cells[i])
        lines.append(f"{i:3d} {labels[i]:<{width}}  {row}")
    return "\n".join(lines) + "\n"
