import pytest

from disfluency.corpus import categorize, is_repetition, length_bucket, parse_markup


def brute_force_repetition(span, utt):
    if span.repair is None:
        return False
    rm = [t.core.lower() for t in utt.tokens[slice(*span.reparandum)] if not t.is_fragment]
    rp = [t.core.lower() for t in utt.tokens[slice(*span.repair)] if not t.is_fragment]
    if not rm or len(rp) < len(rm):
        return False
    return all(a == b for a, b in zip(rm, rp))


class TestKinds:
    def test_restart(self):
        utt = parse_markup("[ By + ] it was attached")
        assert categorize(utt.spans[0], utt).kind == "restart"

    def test_repetition(self):
        utt = parse_markup("[ it's + {uh} it's ] almost")
        assert categorize(utt.spans[0], utt).kind == "repetition"

    def test_rephrase(self):
        utt = parse_markup("[ was it + {i mean} did you ] put")
        assert categorize(utt.spans[0], utt).kind == "rephrase"

    def test_repetition_ignores_fragment(self):
        utt = parse_markup("[ th- the + the ] cat")
        assert categorize(utt.spans[0], utt).kind == "repetition"

    def test_nested(self):
        utt = parse_markup("[ [ to + to try to ] + for two people ]")
        outer, inner = utt.spans
        assert categorize(inner, utt).kind == "repetition"  # 'to' == repair prefix
        assert categorize(outer, utt).kind == "nested"


class TestBuckets:
    @pytest.mark.parametrize("n,bucket", [(1, "1-2"), (2, "1-2"), (3, "3-5"), (4, "3-5"),
                                          (5, "3-5"), (6, "6-8"), (8, "6-8"), (9, "8+")])
    def test_boundaries(self, n, bucket):
        assert length_bucket(n) == bucket

    def test_four_token_reparandum(self):
        utt = parse_markup("[ a b c d + x ] y")
        assert categorize(utt.spans[0], utt).reparandum_length_bucket == "3-5"


class TestWordClass:
    def test_content_content(self):
        utt = parse_markup("[ the/DT cat/NN + the/DT dog/NN ] ran")
        assert categorize(utt.spans[0], utt).word_class == "content-content"

    def test_function_function(self):
        utt = parse_markup("[ in/IN + on/IN ] the table")
        assert categorize(utt.spans[0], utt).word_class == "function-function"

    def test_content_function(self):
        utt = parse_markup("[ cat/NN + the/DT ] thing")
        assert categorize(utt.spans[0], utt).word_class == "content-function"

    def test_auxiliary_verbs_are_function(self):
        utt = parse_markup("[ was/VBD + did/VBD ] you")
        assert categorize(utt.spans[0], utt).word_class == "function-function"


class TestRepetitionOracle:
    def test_agrees_with_brute_force_on_corpus(self):
        from disfluency.corpus import SynthConfig, synth_generate

        corpus = synth_generate(3, SynthConfig(n_sentences=300))
        checked = 0
        for utt in corpus.utterances:
            for span in utt.spans:
                expect = brute_force_repetition(span, utt)
                assert is_repetition(span, utt) == expect
                if expect:
                    assert categorize(span, utt).kind == "repetition"
                checked += 1
        assert checked > 50
