import numpy as np
import pytest

from disfluency.corpus import (
    SynthConfig,
    Utterance,
    is_bio_consistent,
    make_token,
    parse_markup,
    silver_remap,
    synth_generate,
)
from disfluency.features import fit_standardizer
from disfluency.predictor import Vocabs
from disfluency.tagger import FeatureProvider, FusionConfig, TaggerConfig, TaggerModel, evaluate, train_tagger


class EchoTagger:
    """Labels everything O; good enough for identity-correction tests."""

    def predict_labels(self, utt):
        return ["O"] * len(utt.tokens)


class TestIdentity:
    def test_no_corrections_is_identity(self):
        original = parse_markup("[ the + the ] cat sat", utt_id="u1")
        silver = silver_remap(original, list(original.tokens), EchoTagger())
        assert silver.bio_labels() == original.bio_labels()

    def test_empty_corrected_rejected(self):
        original = parse_markup("a b")
        with pytest.raises(ValueError, match="empty"):
            silver_remap(original, [], EchoTagger())


class FixedTagger:
    def __init__(self, labels):
        self.labels = labels

    def predict_labels(self, utt):
        return list(self.labels)


class TestSubstitution:
    def test_substituted_token_relabeled_neighbors_kept(self):
        # Original annotator saw "thus the cat sat down" and labeled nothing;
        # the corrected transcript restores the repetition "the the".
        original = parse_markup("thus the cat sat down", utt_id="u")
        corrected = [make_token(w) for w in ["the", "the", "cat", "sat", "down"]]
        tagger = FixedTagger(["B-RM", "O", "O", "O", "O"])
        silver = silver_remap(original, corrected, tagger)
        assert silver.bio_labels() == ["B-RM", "O", "O", "O", "O"]

    def test_result_projected_to_bio_consistent(self):
        original = parse_markup("a b c", utt_id="u")
        corrected = [make_token(w) for w in ["a", "x", "c"]]
        # The tagger proposes a dangling I- label; projection must repair it.
        tagger = FixedTagger(["O", "I-RM", "O"])
        silver = silver_remap(original, corrected, tagger)
        assert silver.bio_labels() == ["O", "B-RM", "O"]
        assert is_bio_consistent(silver.bio_labels())


def corrupt(utt, rng, vocab):
    """Produce the 'uncorrected' transcript: substitute ~15% of tokens and
    occasionally drop one. Labels stay with their positions, mimicking an
    annotator who labeled the true disfluency structure over a noisy
    transcription."""
    tokens = []
    labels = []
    gold = utt.bio_labels()
    for tok, lab in zip(utt.tokens, gold):
        roll = rng.random()
        if roll < 0.12:
            repl = make_token(vocab[int(rng.integers(len(vocab)))], tok.pos)
            tokens.append(repl)
            labels.append(lab)
        elif roll < 0.15 and len(utt.tokens) > 3:
            continue  # dropped token
        else:
            tokens.append(make_token(tok.surface, tok.pos))
            labels.append(lab)
    if not tokens:
        tokens = [make_token(utt.tokens[0].surface, utt.tokens[0].pos)]
        labels = [gold[0]]
    return Utterance(id=utt.id, tokens=tokens, spans=[], labels=labels)


class TestCorruptionQuality:
    def test_silver_recovers_gold_above_085_f1(self):
        corpus = synth_generate(31, SynthConfig(n_sentences=420))
        train, dev, eval_utts = corpus.split()
        rows = np.concatenate([corpus.cues[u.id] for u in train if u.is_fluent], axis=0)
        std = fit_standardizer(rows)
        model = TaggerModel(
            FusionConfig(features=("text",)),
            TaggerConfig(hidden=24, proj_dim=24, dropout=0.0, epochs=6, patience=2),
            Vocabs.from_utterances(train), corpus.embeddings, std,
        )
        provider = FeatureProvider(cues=corpus.cues)
        train_tagger(model, train, dev, provider, seed=11)

        rng = np.random.default_rng(99)
        vocab = sorted({t.surface for u in train for t in u.tokens})
        silver_all, gold_all = [], []
        for utt in eval_utts:
            original = corrupt(utt, rng, vocab)
            silver = silver_remap(original, list(utt.tokens), model)
            silver_all.append(silver.bio_labels())
            gold_all.append(utt.bio_labels())
        m = evaluate(silver_all, gold_all)
        assert m.f1 >= 0.85, f"silver F1 {m.f1:.3f}"
