import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from disfluency.corpus import (
    DisfluencySpan,
    MarkupError,
    Utterance,
    is_bio_consistent,
    make_token,
    parse_markup,
    render_markup,
)


class TestParse:
    def test_simple_repetition_with_interregnum(self):
        utt = parse_markup("[ it's + {uh} it's ] almost")
        assert [t.surface for t in utt.tokens] == ["it's", "uh", "it's", "almost"]
        assert len(utt.spans) == 1
        span = utt.spans[0]
        assert span.reparandum == (0, 1)
        assert span.interregnum == (1, 2)
        assert span.repair == (2, 3)
        assert utt.bio_labels() == ["B-RM", "O", "B-RP", "O"]

    def test_fluent_line(self):
        utt = parse_markup("hello world")
        assert utt.spans == []
        assert utt.bio_labels() == ["O", "O"]

    def test_nested_spans(self):
        utt = parse_markup("[ [ to + to try to ] + for two people ... ]")
        assert len(utt.spans) == 2
        outer, inner = utt.spans
        assert outer.nesting_depth == 0
        assert inner.nesting_depth == 1
        assert inner.reparandum == (0, 1)
        assert inner.repair == (1, 4)
        assert outer.reparandum == (0, 4)
        assert outer.repair == (4, 8)

    def test_restart_has_no_repair(self):
        utt = parse_markup("[ By + ] it was attached to")
        span = utt.spans[0]
        assert span.repair is None
        assert utt.bio_labels()[0] == "B-RM"

    def test_glued_brackets(self):
        utt = parse_markup("[ it's + {uh} it's] almost")
        assert [t.surface for t in utt.tokens] == ["it's", "uh", "it's", "almost"]

    def test_inline_pos(self):
        utt = parse_markup("the/DT cat/NN runs")
        assert [t.pos for t in utt.tokens] == ["DT", "NN", "UNK"]

    def test_identity_flags(self):
        utt = parse_markup("well uh the th- cat")
        flags = [(t.is_discourse_marker, t.is_filled_pause, t.is_fragment) for t in utt.tokens]
        assert flags[0] == (True, False, False)
        assert flags[1] == (False, True, False)
        assert flags[3] == (False, False, True)

    def test_multiword_marker_merge(self):
        from disfluency.corpus import DEFAULT_MERGE_TABLE

        utt = parse_markup("you know the cat", merge_table=DEFAULT_MERGE_TABLE)
        assert utt.tokens[0].surface == "you know"
        assert utt.tokens[0].is_discourse_marker


class TestParseErrors:
    def test_plus_outside_brackets_reports_offset(self):
        with pytest.raises(MarkupError) as err:
            parse_markup("a b + c")
        assert err.value.offset == 4

    def test_unbalanced_open(self):
        with pytest.raises(MarkupError, match="unbalanced"):
            parse_markup("[ a + b")

    def test_unbalanced_close(self):
        with pytest.raises(MarkupError, match="unbalanced"):
            parse_markup("a b ]")

    def test_missing_plus(self):
        with pytest.raises(MarkupError, match="without '\\+'"):
            parse_markup("[ a b ]")

    def test_empty_reparandum(self):
        with pytest.raises(MarkupError, match="empty reparandum"):
            parse_markup("[ + a ]")


class TestRender:
    def test_round_trip_simple(self):
        line = "[ it's + { uh } it's ] almost"
        utt = parse_markup(line)
        assert render_markup(utt) == line

    def test_round_trip_nested_restart(self):
        line = "[ [ a + ] + b ]"
        utt = parse_markup(line)
        again = parse_markup(render_markup(utt))
        assert again.spans == utt.spans
        assert [t.surface for t in again.tokens] == ["a", "b"]

    def test_render_with_pos(self):
        utt = parse_markup("the/DT cat/NN")
        assert render_markup(utt, with_pos=True) == "the/DT cat/NN"


WORDS = st.sampled_from(["a", "b", "cat", "dog", "uh", "it's", "to"])


@st.composite
def random_utterances(draw):
    """Utterances with random spans, nesting depth <= 2."""
    n_pre = draw(st.integers(0, 2))
    tokens = [make_token(draw(WORDS)) for _ in range(n_pre)]
    spans = []

    def build_span(depth):
        start = len(tokens)
        if depth < 2 and draw(st.booleans()) and draw(st.booleans()):
            build_span(depth + 1)
        else:
            for _ in range(draw(st.integers(1, 2))):
                tokens.append(make_token(draw(WORDS)))
        rm_end = len(tokens)
        ir = None
        if draw(st.booleans()):
            tokens.append(make_token("uh"))
            ir = (rm_end, rm_end + 1)
        rp_start = len(tokens)
        if draw(st.booleans()):
            for _ in range(draw(st.integers(1, 2))):
                tokens.append(make_token(draw(WORDS)))
        rp = (rp_start, len(tokens)) if len(tokens) > rp_start else None
        spans.append(DisfluencySpan((start, rm_end), ir, rp, nesting_depth=depth))

    for _ in range(draw(st.integers(1, 2))):
        build_span(0)
        for _ in range(draw(st.integers(0, 2))):
            tokens.append(make_token(draw(WORDS)))
    spans.sort(key=lambda s: (
        s.reparandum[0],
        -(s.repair or s.interregnum or s.reparandum)[1],
        -s.reparandum[1],
    ))
    return Utterance(id="h", tokens=tokens, spans=spans)


class TestProperties:
    @settings(max_examples=200, deadline=None)
    @given(random_utterances())
    def test_parse_render_identity(self, utt):
        rendered = render_markup(utt)
        reparsed = parse_markup(rendered)
        assert [t.surface for t in reparsed.tokens] == [t.surface for t in utt.tokens]
        assert reparsed.spans == utt.spans
        assert render_markup(reparsed) == rendered

    @settings(max_examples=200, deadline=None)
    @given(random_utterances())
    def test_labels_always_bio_consistent(self, utt):
        assert is_bio_consistent(utt.bio_labels())
