import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from verchain.lexer import BraceImbalance, UnterminatedComment, UnterminatedString, extract_methods, render, tokenize
from verchain.metrics import (
    analyze,
    from_csv,
    halstead_counts,
    halstead_volume,
    maintainability_index,
    mccabe,
    sloc,
    to_csv,
)


def kinds(src):
    return [(t.kind, t.text) for t in tokenize(src).tokens]


# --- lexer

def test_tokenize_assignment():
    assert kinds("a = b + c;") == [("identifier", "a"), ("operator", "="), ("identifier", "b"),
                                    ("operator", "+"), ("identifier", "c"), ("punctuation", ";")]


def test_comment_markers_inside_strings_are_not_comments():
    stream = tokenize('string s = "http://x /* no */";')
    assert stream.comments == []
    assert ("literal", '"http://x /* no */"') in kinds('string s = "http://x /* no */";')


def test_comments_are_collected_with_lines():
    stream = tokenize("a; // TODO one\n/* two\n three */ b;")
    assert [(c.style, c.start_line, c.end_line) for c in stream.comments] == [("line", 1, 1), ("block", 2, 3)]
    assert "TODO one" in stream.comments[0].text


def test_sized_types_are_keywords():
    assert kinds("uint256 x; bytes32 y; int8 z;")[0] == ("keyword", "uint256")
    assert kinds("bytes32 y;")[0] == ("keyword", "bytes32")
    assert kinds("uint257 q;")[0] == ("identifier", "uint257")


def test_unterminated_constructs_become_diagnostics():
    assert isinstance(tokenize("a; /* open").diagnostics[0], UnterminatedComment)
    assert isinstance(tokenize('s = "open').diagnostics[0], UnterminatedString)


def test_pragma_value_is_single_literal():
    assert kinds("pragma solidity ^0.8.0;") == [("keyword", "pragma"), ("identifier", "solidity"),
                                                 ("literal", "^0.8.0"), ("punctuation", ";")]


# --- metrics examples

def test_assignment_halstead():
    stream = tokenize("a = b + c")
    assert halstead_counts(stream) == (2, 2, 3, 3)
    assert halstead_volume(stream) == pytest.approx(5 * math.log2(5), abs=1e-12)


def test_self_assignment_halstead():
    assert halstead_volume(tokenize("a = a")) == pytest.approx(3.0, abs=1e-12)


def test_sloc_ignores_comments_and_blank_lines():
    src = "// header\n\ncontract C {\n  /* block\n  */ uint x;\n}\n"
    assert sloc(tokenize(src)) == 3


def test_mccabe_counts_decisions():
    src = "if (a) { for (;;) {} } while (b) {} do {} while (c); x = y ? 1 : 2; try f() {} catch {}"
    assert mccabe(tokenize(src)) == 1 + 1 + 1 + 2 + 1 + 1 + 1


def test_else_if_counts_once():
    assert mccabe(tokenize("if (a) {} else if (b) {} else {}")) == 3


@pytest.mark.parametrize("s, cc, hv, expected", [
    (1, 1, 1.0, 170.77),
    (0, 1, 0.0, 170.77),
    (100, 10, 1000.0, 171 - 5.2 * math.log(1000) - 2.3 - 16.2 * math.log(100)),
])
def test_maintainability_examples(s, cc, hv, expected):
    assert maintainability_index(s, cc, hv) == pytest.approx(expected, abs=1e-9)


def test_mi_worked_value():
    assert maintainability_index(100, 10, 1000.0) == pytest.approx(58.176, abs=1e-3)


# --- methods

def test_extract_methods_names_and_bodies():
    src = """contract C {
    modifier onlyOwner() { require(msg.sender == owner); _; }
    function get() public view returns (uint) { return x; }
    function set(uint v) external;
    constructor() {}
}"""
    spans = extract_methods(tokenize(src))
    assert [(s.kind, s.name) for s in spans] == [("modifier", "onlyOwner"), ("function", "get"),
                                                 ("function", "set"), ("constructor", "constructor")]
    assert [t.text for t in spans[1].body_tokens.tokens] == ["return", "x", ";"]
    assert spans[2].body_tokens.tokens == []


def test_function_types_in_parameters_are_not_methods():
    src = "function apply(function (uint) external f) public { f(1); }"
    assert [s.name for s in extract_methods(tokenize(src))] == ["apply"]


def test_unclosed_body_raises():
    with pytest.raises(BraceImbalance):
        extract_methods(tokenize("function f() { if (x) {"))


def test_one_line_getter_at_method_level():
    rec, = analyze("contract C { function g() public view returns (uint) { return 1; } }", "method", "C.sol")
    assert rec.subject == "C.sol::g" and rec.sloc == 1 and rec.mccabe == 1


def test_empty_file_record():
    rec, = analyze("", "file")
    assert (rec.sloc, rec.mccabe, rec.halstead_volume) == (0, 1, 0.0)
    assert rec.maintainability_index == pytest.approx(170.77, abs=1e-9)


def test_csv_round_trip():
    records = analyze("contract C { function f() public { if (a) { b = c; } } }", "method", "x.sol")
    assert from_csv(to_csv(records)) == records


def test_unknown_level_rejected():
    with pytest.raises(ValueError):
        analyze("", "class")


# --- invariants

counts = st.integers(min_value=1, max_value=10_000)
vols = st.floats(min_value=1.0, max_value=1e7, allow_nan=False)


@given(counts, counts, st.integers(min_value=1, max_value=500), vols)
def test_mi_decreases_in_sloc(a, b, cc, hv):
    lo, hi = sorted((a, b))
    assert maintainability_index(hi, cc, hv) <= maintainability_index(lo, cc, hv)


@given(counts, st.integers(min_value=1, max_value=500), st.integers(min_value=1, max_value=500), vols)
def test_mi_decreases_in_complexity(s, a, b, hv):
    lo, hi = sorted((a, b))
    assert maintainability_index(s, hi, hv) <= maintainability_index(s, lo, hv)


@given(counts, st.integers(min_value=1, max_value=500), vols, vols)
def test_mi_decreases_in_volume(s, cc, a, b):
    lo, hi = sorted((a, b))
    assert maintainability_index(s, cc, hi) <= maintainability_index(s, cc, lo)


atoms = st.sampled_from([
    "uint x;", "x = y + 1;", "if (a) { b(); }", "// TODO later", "/* note */", '"str // x"',
    "function f() public { return; }", "a ? b : c;", "\n", "\n\n", "  ", "while (i < n) { i++; }",
    "modifier m() { _; }", "mapping(address => uint) m;", "0x1F;", "1e18;",
])
sources = st.lists(atoms, max_size=30).map(" ".join)


@settings(max_examples=200)
@given(sources)
def test_render_is_a_fixed_point(src):
    once = render(tokenize(src))
    assert render(tokenize(once)) == once


@settings(max_examples=200)
@given(sources)
def test_rendering_preserves_metrics(src):
    assert analyze(render(tokenize(src))) == analyze(src)


@settings(max_examples=200)
@given(sources)
def test_analysis_is_deterministic_and_sane(src):
    a, b = analyze(src), analyze(src)
    assert a == b
    rec = a[0]
    assert rec.sloc >= 0 and rec.mccabe >= 1 and rec.halstead_volume >= 0


@settings(max_examples=200)
@given(sources)
def test_method_sloc_bounded_by_file_sloc(src):
    stream = tokenize(src)
    spans = extract_methods(stream)
    body_lines = set()
    for span in spans:
        body_lines |= {t.line for t in span.body_tokens.tokens}
    assert len(body_lines) <= sloc(stream)
    assert sum(sloc(s.body_tokens) for s in spans) >= len(body_lines)
