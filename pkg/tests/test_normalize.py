from __future__ import annotations

from hypothesis import given, strategies as st

from passageguard import normalize


def test_ocr_spacing_example():
    result = normalize("O ctober  2007")
    assert result.normalized == "o ctober 2007"
    assert len(result.offset_map) == len(result.normalized)


def test_empty_input():
    result = normalize("")
    assert result.normalized == ""
    assert result.offset_map == ()


def test_case_fold_only():
    result = normalize("ABC")
    assert result.normalized == "abc"
    assert result.offset_map == (0, 1, 2)


def test_whitespace_runs_collapse_and_edges_drop():
    result = normalize("  le  ministre\tde \n la  ")
    assert result.normalized == "le ministre de la"


def test_compatibility_expansion_maps_to_source_char():
    result = normalize("ﬁle no")  # ligature expands to two characters
    assert result.normalized == "file no"
    assert result.offset_map[0] == 0 and result.offset_map[1] == 0


def test_fold_case_disabled():
    result = normalize("In  Person", fold_case=False)
    assert result.normalized == "In Person"


def test_original_span_recovers_source_slice():
    text = "The  Hearing,  IN PERSON"
    result = normalize(text)
    start = result.normalized.index("hearing")
    span = result.original_span(start, start + len("hearing"))
    assert text[span[0]:span[1]] == "Hearing"


text_strategy = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), max_size=80)


@given(text=text_strategy)
def test_offset_map_is_nondecreasing_and_in_range(text):
    result = normalize(text)
    assert len(result.offset_map) == len(result.normalized)
    previous = -1
    for offset in result.offset_map:
        assert 0 <= offset < len(text)
        assert offset >= previous
        previous = offset


@given(text=text_strategy)
def test_no_whitespace_runs_or_edges_remain(text):
    normalized = normalize(text).normalized
    assert "  " not in normalized
    assert normalized == normalized.strip()


@given(text=text_strategy, data=st.data())
def test_slice_normalizes_to_a_substring(text, data):
    # The aligner's substring-soundness guarantee rests on this.
    start = data.draw(st.integers(0, len(text)))
    end = data.draw(st.integers(start, len(text)))
    piece = normalize(text[start:end]).normalized
    assert piece in normalize(text).normalized
