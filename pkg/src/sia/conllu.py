"""CoNLL-U and dialogue-JSON ingestion: tokens, dependency trees, dialogue examples."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence


class DataError(ValueError):
    """Malformed input data (files, records, or structural invariants)."""


class ConlluError(DataError):
    """CoNLL-U syntax or tree violation; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


_CONLLU_COLUMNS = 10


@dataclass(frozen=True)
class Token:
    """One token of a dependency-parsed utterance.

    ``index`` is the 1-based position inside the utterance; ``head`` is 0 for a
    root and otherwise the 1-based index of the parent token.
    """

    index: int
    form: str
    head: int
    deprel: str = "_"

    def __post_init__(self):
        if self.index < 1:
            raise DataError(f"token index must be >= 1, got {self.index}")
        if self.head < 0:
            raise DataError(f"token head must be >= 0, got {self.head}")
        if self.head == self.index:
            raise DataError(f"self-loop: token {self.index} is its own head")
        if not self.form or "\t" in self.form or "\n" in self.form:
            raise DataError(f"token {self.index}: form must be nonempty without tab/newline")


@dataclass(frozen=True)
class DependencyTree:
    """An ordered utterance with head links; forests (several roots) are allowed."""

    tokens: tuple[Token, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        n = len(self.tokens)
        if n == 0:
            raise DataError("tree must contain at least one token")
        for pos, tok in enumerate(self.tokens, start=1):
            if tok.index != pos:
                raise DataError(f"token ids must be sequential; expected {pos}, got {tok.index}")
            if tok.head > n:
                raise DataError(f"token {pos}: head {tok.head} out of range (length {n})")
        cyclic = _find_cycle_token(self.tokens)
        if cyclic is not None:
            raise DataError(f"cyclic heads involving token {cyclic}")

    def __len__(self) -> int:
        return len(self.tokens)

    def token(self, index: int) -> Token:
        """Look up a token by its 1-based index."""
        if not 1 <= index <= len(self.tokens):
            raise IndexError(f"token index {index} out of range 1..{len(self.tokens)}")
        return self.tokens[index - 1]

    @property
    def forms(self) -> tuple[str, ...]:
        return tuple(t.form for t in self.tokens)


def _find_cycle_token(tokens: Sequence[Token]) -> int | None:
    """Return the 1-based index of a token on a head cycle, or None."""
    n = len(tokens)
    # 0 = unvisited, 1 = on current walk, 2 = known to reach a root
    state = [0] * (n + 1)
    for start in range(1, n + 1):
        walk = []
        i = start
        while i != 0 and state[i] == 0:
            state[i] = 1
            walk.append(i)
            i = tokens[i - 1].head
        if i != 0 and state[i] == 1:
            return i
        for j in walk:
            state[j] = 2
    return None


@dataclass(frozen=True)
class DialogueExample:
    """A context of M >= 1 utterances, one candidate response, and a 0/1 label."""

    context: tuple[DependencyTree, ...]
    response: DependencyTree
    label: int

    def __post_init__(self):
        object.__setattr__(self, "context", tuple(self.context))
        if len(self.context) < 1:
            raise DataError("context must contain at least one utterance")
        if self.label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class EvalCase:
    """A context plus a candidate pool with per-candidate binary labels."""

    context: tuple[DependencyTree, ...]
    candidates: tuple[DependencyTree, ...]
    labels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "context", tuple(self.context))
        object.__setattr__(self, "candidates", tuple(self.candidates))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.context) < 1:
            raise DataError("context must contain at least one utterance")
        if len(self.candidates) < 1:
            raise DataError("candidate pool must be nonempty")
        if len(self.labels) != len(self.candidates):
            raise DataError("labels and candidates must have equal length")
        if any(l not in (0, 1) for l in self.labels):
            raise DataError("candidate labels must be 0 or 1")


def parse_conllu(text: str) -> list[DependencyTree]:
    """Parse CoNLL-U text into one DependencyTree per sentence block.

    Multiword-token ranges (ids like ``1-2``) and empty nodes (``1.1``) are
    skipped; ``#`` comments are ignored. Violations raise ConlluError naming
    the offending line.
    """
    trees: list[DependencyTree] = []
    pending: list[tuple[int, list[str]]] = []  # (line number, columns)

    def flush():
        if pending:
            trees.append(_build_tree(pending))
            pending.clear()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != _CONLLU_COLUMNS:
            raise ConlluError(f"expected {_CONLLU_COLUMNS} tab-separated columns, got {len(cols)}", lineno)
        if "-" in cols[0] or "." in cols[0]:
            continue  # multiword range / empty node
        pending.append((lineno, cols))
    flush()
    return trees


def _build_tree(rows: list[tuple[int, list[str]]]) -> DependencyTree:
    tokens = []
    n = len(rows)
    for expected, (lineno, cols) in enumerate(rows, start=1):
        try:
            idx = int(cols[0])
        except ValueError:
            raise ConlluError(f"non-numeric token id {cols[0]!r}", lineno) from None
        if idx != expected:
            raise ConlluError(f"non-sequential token id: expected {expected}, got {idx}", lineno)
        try:
            head = int(cols[6])
        except ValueError:
            raise ConlluError(f"non-numeric HEAD {cols[6]!r}", lineno) from None
        if head < 0 or head > n:
            raise ConlluError(f"head {head} out of range for sentence of length {n}", lineno)
        if head == idx:
            raise ConlluError(f"self-loop at line {lineno}", lineno)
        if not cols[1]:
            raise ConlluError("empty FORM column", lineno)
        tokens.append(Token(index=idx, form=cols[1], head=head, deprel=cols[7]))
    cyclic = _find_cycle_token(tokens)
    if cyclic is not None:
        raise ConlluError(f"cyclic heads involving token {cyclic}", rows[cyclic - 1][0])
    return DependencyTree(tokens=tuple(tokens))


def serialize_conllu(trees: Iterable[DependencyTree]) -> str:
    """Render trees as CoNLL-U; unused columns are emitted as ``_``.

    ``parse_conllu(serialize_conllu(trees))`` reproduces the input
    field-for-field.
    """
    blocks = []
    for tree in trees:
        lines = [
            "\t".join([str(t.index), t.form, "_", "_", "_", "_", str(t.head), t.deprel, "_", "_"])
            for t in tree.tokens
        ]
        blocks.append("\n".join(lines))
    if not blocks:
        return ""
    return "\n\n".join(blocks) + "\n"


# ---------------------------------------------------------------------------
# Dialogue / evaluation JSON
#
# Dialogue file: [{"context": [Utterance, ...], "response": Utterance,
#                  "label": 0|1}, ...]
# Eval file:     [{"context": [Utterance, ...], "candidates": [Utterance, ...],
#                  "labels": [0|1, ...]}, ...]
# Utterance:     {"tokens": [{"form": str, "head": int, "deprel": str}, ...]}
# with implicit 1-based token indices.
# ---------------------------------------------------------------------------


def tree_to_dict(tree: DependencyTree) -> dict:
    return {"tokens": [{"form": t.form, "head": t.head, "deprel": t.deprel} for t in tree.tokens]}


def tree_from_dict(obj: object, where: str = "utterance") -> DependencyTree:
    if not isinstance(obj, dict) or "tokens" not in obj:
        raise DataError(f"{where}: expected an object with a 'tokens' field")
    raw = obj["tokens"]
    if not isinstance(raw, list) or not raw:
        raise DataError(f"{where}: 'tokens' must be a nonempty array")
    tokens = []
    for i, tok in enumerate(raw, start=1):
        if not isinstance(tok, dict) or "form" not in tok or "head" not in tok:
            raise DataError(f"{where}: token {i} must carry 'form' and 'head'")
        head = tok["head"]
        if not isinstance(head, int) or isinstance(head, bool):
            raise DataError(f"{where}: token {i} head must be an integer")
        try:
            tokens.append(Token(index=i, form=str(tok["form"]), head=head, deprel=str(tok.get("deprel", "_"))))
        except DataError as exc:
            raise DataError(f"{where}: {exc}") from None
    try:
        return DependencyTree(tokens=tuple(tokens))
    except DataError as exc:
        raise DataError(f"{where}: {exc}") from None


def load_dialogues(path: str) -> list[DialogueExample]:
    """Load and validate a dialogue JSON file; errors name the record index."""
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, list):
        raise DataError("dialogue file must contain a top-level array")
    examples = []
    for rec, obj in enumerate(data):
        where = f"record {rec}"
        if not isinstance(obj, dict):
            raise DataError(f"{where}: expected an object")
        missing = {"context", "response", "label"} - obj.keys()
        if missing:
            raise DataError(f"{where}: missing fields {sorted(missing)}")
        if not isinstance(obj["context"], list) or not obj["context"]:
            raise DataError(f"{where}: context must be a nonempty array")
        if obj["label"] not in (0, 1):
            raise DataError(f"{where}: label must be 0 or 1, got {obj['label']!r}")
        context = tuple(
            tree_from_dict(u, f"{where}, context utterance {j}") for j, u in enumerate(obj["context"])
        )
        response = tree_from_dict(obj["response"], f"{where}, response")
        examples.append(DialogueExample(context=context, response=response, label=obj["label"]))
    return examples


def save_dialogues(path: str, examples: Iterable[DialogueExample]) -> None:
    data = [
        {
            "context": [tree_to_dict(u) for u in ex.context],
            "response": tree_to_dict(ex.response),
            "label": ex.label,
        }
        for ex in examples
    ]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, ensure_ascii=False, indent=1)
        f.write("\n")


def load_eval_cases(path: str) -> list[EvalCase]:
    """Load and validate an evaluation JSON file (contexts with candidate pools)."""
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, list):
        raise DataError("eval file must contain a top-level array")
    cases = []
    for rec, obj in enumerate(data):
        where = f"record {rec}"
        if not isinstance(obj, dict):
            raise DataError(f"{where}: expected an object")
        missing = {"context", "candidates", "labels"} - obj.keys()
        if missing:
            raise DataError(f"{where}: missing fields {sorted(missing)}")
        if not isinstance(obj["context"], list) or not obj["context"]:
            raise DataError(f"{where}: context must be a nonempty array")
        if not isinstance(obj["candidates"], list) or not obj["candidates"]:
            raise DataError(f"{where}: candidates must be a nonempty array")
        if not isinstance(obj["labels"], list):
            raise DataError(f"{where}: labels must be an array")
        context = tuple(
            tree_from_dict(u, f"{where}, context utterance {j}") for j, u in enumerate(obj["context"])
        )
        candidates = tuple(
            tree_from_dict(u, f"{where}, candidate {j}") for j, u in enumerate(obj["candidates"])
        )
        try:
            cases.append(EvalCase(context=context, candidates=candidates, labels=tuple(obj["labels"])))
        except DataError as exc:
            raise DataError(f"{where}: {exc}") from None
    return cases


def save_eval_cases(path: str, cases: Iterable[EvalCase]) -> None:
    data = [
        {
            "context": [tree_to_dict(u) for u in case.context],
            "candidates": [tree_to_dict(u) for u in case.candidates],
            "labels": list(case.labels),
        }
        for case in cases
    ]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, ensure_ascii=False, indent=1)
        f.write("\n")
