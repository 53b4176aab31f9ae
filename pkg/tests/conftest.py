from __future__ import annotations

import pytest

from algen.corpus import Instance, Pool, default_taxonomy


@pytest.fixture
def taxonomy():
    return default_taxonomy()


@pytest.fixture
def unlabeled_pool():
    return Pool(
        "U",
        [
            Instance(id="u1", text="feeling down lately"),
            Instance(id="u2", text="is this rash serious"),
            Instance(id="u3", text="child support payment question"),
        ],
    )


def make_unlabeled(texts: list[str], prefix: str = "u") -> Pool:
    return Pool("U", [Instance(id=f"{prefix}{i}", text=t) for i, t in enumerate(texts)])


def make_labeled(items: list[tuple[str, str]], prefix: str = "l") -> Pool:
    return Pool(
        "L",
        [Instance(id=f"{prefix}{i}", text=t, label=lab) for i, (t, lab) in enumerate(items)],
    )
