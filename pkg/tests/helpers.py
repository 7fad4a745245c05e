"""Seeded random generators shared across the test modules."""

import numpy as np

from sia.conllu import DependencyTree, DialogueExample, Token

WORDS = (
    "the", "cat", "sat", "on", "mat", "dog", "ran", "fast", "ok", "sure",
    "maybe", "why", "not", "here", "there", "now",
)
RELS = ("nsubj", "obj", "det", "advmod", "root", "obl")


def rand_tree(rng: np.random.Generator, n: int) -> DependencyTree:
    """Random valid tree/forest: token 1 is a root, later tokens attach to 0 or earlier tokens."""
    tokens = []
    for i in range(1, n + 1):
        head = 0 if i == 1 else int(rng.integers(0, i))
        tokens.append(
            Token(
                index=i,
                form=str(WORDS[rng.integers(0, len(WORDS))]),
                head=head,
                deprel=str(RELS[rng.integers(0, len(RELS))]),
            )
        )
    return DependencyTree(tokens=tuple(tokens))


def rand_dialogue(rng: np.random.Generator, max_utts: int = 4, max_tokens: int = 12) -> DialogueExample:
    n_utts = int(rng.integers(1, max_utts + 1))
    context = tuple(rand_tree(rng, int(rng.integers(1, max_tokens + 1))) for _ in range(n_utts))
    response = rand_tree(rng, int(rng.integers(1, max_tokens + 1)))
    return DialogueExample(context=context, response=response, label=int(rng.integers(0, 2)))
