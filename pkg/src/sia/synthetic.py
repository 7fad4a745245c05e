"""Seeded synthetic dialogues for smoke tests and the learnability checks.

Each context mentions one topic word at the root of its first utterance. The
matching response echoes that topic and carries an affirmative marker; a
distractor response uses a different topic and a dissent marker. The marker
pair keeps the classes separable for the desk-scale model while the echoed
keyword links response to context; topic words sit at utterance roots so the
depth-bounded cross-sentence mask exposes them to each other.
"""

from __future__ import annotations

import numpy as np

from .conllu import DependencyTree, DialogueExample, EvalCase, Token

TOPICS = ("pizza", "kernel", "tea", "violin", "hiking", "chess")
POS_MARKERS = ("yes", "sure", "okay")
NEG_MARKERS = ("no", "nah", "hmm")
FILLERS = ("well", "so", "the", "a", "now", "too", "very", "really")
DEPRELS = ("nsubj", "obj", "advmod", "det", "amod", "obl")


def _random_tree(rng: np.random.Generator, words: list[str], root_pos: int) -> DependencyTree:
    """Random acyclic utterance tree with the token at ``root_pos`` as its root."""
    n = len(words)
    tokens = []
    for i in range(1, n + 1):
        if i == root_pos:
            head = 0
        else:
            # attach to the root or any earlier non-root token: keeps links acyclic
            choices = [root_pos] + [j for j in range(1, i) if j != root_pos]
            head = int(choices[rng.integers(0, len(choices))])
        deprel = "root" if head == 0 else str(DEPRELS[rng.integers(0, len(DEPRELS))])
        tokens.append(Token(index=i, form=words[i - 1], head=head, deprel=deprel))
    return DependencyTree(tokens=tuple(tokens))


def _filler(rng: np.random.Generator) -> str:
    return str(FILLERS[rng.integers(0, len(FILLERS))])


def _context_utterance(rng: np.random.Generator, topic: str) -> DependencyTree:
    words = [topic] + [_filler(rng) for _ in range(int(rng.integers(1, 3)))]
    return _random_tree(rng, words, root_pos=1)


def _context(rng: np.random.Generator, topic: str) -> tuple[DependencyTree, ...]:
    utts = [_context_utterance(rng, topic)]
    if rng.random() < 0.5:
        utts.append(_context_utterance(rng, _filler(rng)))
    return tuple(utts)


def _other_topic(rng: np.random.Generator, topic: str) -> str:
    others = [t for t in TOPICS if t != topic]
    return str(others[rng.integers(0, len(others))])


def _response(rng: np.random.Generator, topic: str, positive: bool) -> DependencyTree:
    if positive:
        words = [topic, str(POS_MARKERS[rng.integers(0, len(POS_MARKERS))])]
    else:
        words = [_other_topic(rng, topic), str(NEG_MARKERS[rng.integers(0, len(NEG_MARKERS))])]
    if rng.random() < 0.5:
        words.append(_filler(rng))
    return _random_tree(rng, words, root_pos=1)


def keyword_dialogues(num_examples: int, seed: int = 0) -> list[DialogueExample]:
    """Labeled training examples, alternating matched (1) and mismatched (0) pairs."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(num_examples):
        topic = str(TOPICS[rng.integers(0, len(TOPICS))])
        positive = i % 2 == 0
        out.append(
            DialogueExample(
                context=_context(rng, topic),
                response=_response(rng, topic, positive),
                label=int(positive),
            )
        )
    return out


def keyword_eval_cases(num_cases: int, candidates: int = 2, seed: int = 1) -> list[EvalCase]:
    """Eval contexts with one matching response among ``candidates - 1`` distractors."""
    if candidates < 2:
        raise ValueError("need at least 2 candidates per case")
    rng = np.random.default_rng(seed)
    cases = []
    for _ in range(num_cases):
        topic = str(TOPICS[rng.integers(0, len(TOPICS))])
        context = _context(rng, topic)
        pool = [_response(rng, topic, True)]
        labels = [1]
        for _ in range(candidates - 1):
            pool.append(_response(rng, topic, False))
            labels.append(0)
        order = rng.permutation(len(pool))
        cases.append(
            EvalCase(
                context=context,
                candidates=tuple(pool[i] for i in order),
                labels=tuple(labels[i] for i in order),
            )
        )
    return cases
