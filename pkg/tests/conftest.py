import json

import pytest

from genscore.backends import EOS, TableBackend
from genscore.data import SystemOutput, TextInstance

TWO_TOKEN_ENTRIES = {
    ("x", ()): {"a": 0.5, "b": 0.25, EOS: 0.25},
    ("x", ("a",)): {EOS: 0.25, "a": 0.25, "b": 0.5},
}


@pytest.fixture
def two_token_table():
    """p(a | BOS, "x") = 0.5 and p(EOS | a, "x") = 0.25."""
    return TableBackend(["a", "b"], TWO_TOKEN_ENTRIES)


@pytest.fixture
def two_token_table_file(tmp_path):
    entries = [
        {"source": src, "context": list(ctx), "dist": dist}
        for (src, ctx), dist in TWO_TOKEN_ENTRIES.items()
    ]
    path = tmp_path / "table.json"
    path.write_text(json.dumps({"vocabulary": ["a", "b"], "entries": entries}))
    return path


@pytest.fixture
def small_corpus():
    return [
        TextInstance(
            "i1",
            "x",
            references=("a b",),
            outputs=(
                SystemOutput("sysA", "a", {"Info": 4.0, "Flu": 3.0}),
                SystemOutput("sysB", "b", {"Info": 2.0}),
            ),
        ),
        TextInstance(
            "i2",
            "x",
            references=("b",),
            outputs=(
                SystemOutput("sysA", "a b", {"Info": 3.5}),
                SystemOutput("sysB", "a", {"Info": 1.0, "Flu": 2.0}),
            ),
        ),
    ]
