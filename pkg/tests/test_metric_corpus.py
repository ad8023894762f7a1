"""Hand-counted expectations for a small Solidity corpus."""

import json
import math
from pathlib import Path

import pytest

from verchain.lexer import extract_methods, tokenize
from verchain.metrics import halstead_counts, halstead_volume, maintainability_index, mccabe, sloc

ASSETS = Path(__file__).parent / "assets"
EXPECTED = {k: v for k, v in json.loads((ASSETS / "corpus_expected.json").read_text()).items()
            if not k.startswith("_")}


def load(name):
    return tokenize((ASSETS / "corpus" / name).read_text())


def test_corpus_has_twenty_files():
    assert len(EXPECTED) == 20
    assert sorted(EXPECTED) == sorted(p.name for p in (ASSETS / "corpus").glob("*.sol"))


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_counts_match_hand_values(name):
    exp, stream = EXPECTED[name], load(name)
    assert sloc(stream) == exp["sloc"]
    assert mccabe(stream) == exp["mccabe"]
    assert halstead_counts(stream) == (exp["N1"], exp["n1"], exp["N2"], exp["n2"])
    assert len(stream.comments) == exp["comments"]


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_volume_and_index_follow_counts(name):
    exp, stream = EXPECTED[name], load(name)
    length, vocab = exp["N1"] + exp["N2"], exp["n1"] + exp["n2"]
    hv = length * math.log2(vocab) if vocab else 0.0
    assert halstead_volume(stream) == pytest.approx(hv, abs=1e-9)
    mi = 171 - 5.2 * math.log(max(hv, 1)) - 0.23 * exp["mccabe"] - 16.2 * math.log(max(exp["sloc"], 1))
    assert maintainability_index(sloc(stream), mccabe(stream), halstead_volume(stream)) == pytest.approx(mi, abs=1e-9)


@pytest.mark.parametrize("name", sorted(k for k, v in EXPECTED.items() if "methods" in v))
def test_methods_match_hand_values(name):
    spans = extract_methods(load(name))
    assert [[s.name, sloc(s.body_tokens)] for s in spans] == EXPECTED[name]["methods"]
