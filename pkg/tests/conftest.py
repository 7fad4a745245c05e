import pytest

from sia.conllu import DependencyTree, DialogueExample, Token


def tree(*entries) -> DependencyTree:
    """Build a tree from (form, head) or (form, head, deprel) tuples."""
    tokens = []
    for i, entry in enumerate(entries, start=1):
        form, head = entry[0], entry[1]
        deprel = entry[2] if len(entry) > 2 else "_"
        tokens.append(Token(index=i, form=form, head=head, deprel=deprel))
    return DependencyTree(tokens=tuple(tokens))


@pytest.fixture
def she_eats_apples() -> DependencyTree:
    return tree(("she", 2, "nsubj"), ("eats", 0, "root"), ("apples", 2, "obj"))


@pytest.fixture
def ok_tree() -> DependencyTree:
    return tree(("ok", 0, "root"))


@pytest.fixture
def simple_example(she_eats_apples, ok_tree) -> DialogueExample:
    return DialogueExample(context=(she_eats_apples,), response=ok_tree, label=1)


@pytest.fixture
def sit_down_ok() -> DialogueExample:
    # "sit down" (sit is root) answered by "ok"
    return DialogueExample(
        context=(tree(("sit", 0, "root"), ("down", 1, "advmod")),),
        response=tree(("ok", 0, "root")),
        label=1,
    )
