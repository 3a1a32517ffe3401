import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from disfluency import nn
from disfluency.corpus import LABELS, SynthConfig, is_bio_consistent, synth_generate
from disfluency.features import fit_standardizer
from disfluency.predictor import PredictorConfig, Vocabs
from disfluency.tagger import (
    FeatureBundle,
    FeatureProvider,
    FusionConfig,
    Metrics,
    TaggerConfig,
    TaggerModel,
    evaluate,
    evaluate_sets,
    fuse_early,
    fuse_late,
    train_tagger,
    tune_alpha,
)

TINY_PRED = PredictorConfig(pos_dim=3, identity_dim=2, phone_dim=4, stress_dim=2,
                            word_hidden=4, phone_hidden=3, dropout=0.0)
TINY_TAG = TaggerConfig(hidden=5, proj_dim=6, dropout=0.0, epochs=2, patience=1)


def small_corpus(seed=21, n=120):
    corpus = synth_generate(seed, SynthConfig(n_sentences=n))
    train, dev, test = corpus.split()
    rows = np.concatenate([corpus.cues[u.id] for u in train if u.is_fluent], axis=0)
    std = fit_standardizer(rows)
    return corpus, train, dev, test, std


def make_model(corpus, train, std, fusion, tag_cfg=TINY_TAG):
    return TaggerModel(fusion, tag_cfg, Vocabs.from_utterances(train),
                       corpus.embeddings, std, predictor_config=TINY_PRED)


class TestFusionConfig:
    def test_single_requires_one_set(self):
        with pytest.raises(ValueError):
            FusionConfig(features=("text", "raw"), mode="single")

    def test_late_requires_text_and_prosody(self):
        with pytest.raises(ValueError):
            FusionConfig(features=("raw", "innovations"), mode="late")
        with pytest.raises(ValueError):
            FusionConfig(features=("text",), mode="late")

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            FusionConfig(features=("text", "raw"), mode="late", alpha=1.5)

    def test_valid_configs(self):
        FusionConfig(features=("text",), mode="single")
        FusionConfig(features=("text", "innovations"), mode="late", alpha=0.5)
        FusionConfig(features=("text", "raw", "innovations"), mode="early")


class TestFusePrimitives:
    def test_early_concat_dims(self):
        t = nn.Tensor(np.zeros((4, 100)))
        r = nn.Tensor(np.zeros((4, 21)))
        z = nn.Tensor(np.zeros((4, 21)))
        assert fuse_early([t, r]).shape == (4, 121)
        assert fuse_early([t, r, z]).shape == (4, 142)

    def test_early_single_identity(self):
        t = nn.Tensor(np.ones((3, 7)))
        assert fuse_early([t]) is t

    def test_early_length_mismatch(self):
        with pytest.raises(ValueError, match="lengths differ"):
            fuse_early([nn.Tensor(np.zeros((3, 2))), nn.Tensor(np.zeros((4, 2)))])

    def test_late_endpoints_exact(self):
        u_t = nn.Tensor(np.array([[1.0, 0.0]]))
        u_p = nn.Tensor(np.array([[0.0, 1.0]]))
        assert np.array_equal(fuse_late(u_t, u_p, 0.0).data, u_t.data)
        assert np.array_equal(fuse_late(u_t, u_p, 1.0).data, u_p.data)
        assert np.allclose(fuse_late(u_t, u_p, 0.5).data, [[0.5, 0.5]])

    def test_late_alpha_out_of_range(self):
        u = nn.Tensor(np.zeros((1, 2)))
        with pytest.raises(ValueError):
            fuse_late(u, u, -0.1)


class TestEvaluate:
    def test_hand_count(self):
        m = evaluate_sets({2, 3}, {1, 2})
        assert (m.precision, m.recall, m.f1) == (0.5, 0.5, 0.5)

    def test_perfect(self):
        m = evaluate_sets({1, 2}, {1, 2})
        assert m.f1 == 1.0

    def test_empty_conventions(self):
        assert evaluate_sets(set(), set()).f1 == 1.0
        assert evaluate_sets({1}, set()).f1 == 0.0
        assert evaluate_sets(set(), {1}).f1 == 0.0

    def test_label_sequences(self):
        pred = [["O", "B-RM", "I-RM", "O"]]
        gold = [["O", "O", "B-RM", "O"]]
        m = evaluate(pred, gold)
        assert m.precision == 0.5 and m.recall == 1.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            evaluate([["O", "O"]], [["O"]])

    @settings(max_examples=100, deadline=None)
    @given(st.sets(st.integers(0, 8)), st.sets(st.integers(0, 8)))
    def test_swap_symmetric_iff_p_equals_r(self, a, b):
        m1 = evaluate_sets(a, b)
        m2 = evaluate_sets(b, a)
        assert m1.f1 == pytest.approx(m2.f1)
        assert m1.precision == pytest.approx(m2.recall)


@pytest.fixture(scope="module")
def text_model():
    corpus, train, dev, _, std = small_corpus()
    model = make_model(corpus, train, std, FusionConfig(features=("text",)))
    provider = FeatureProvider(cues=corpus.cues)
    train_tagger(model, train[:60], dev[:20], provider, seed=3)
    return corpus, model, provider


class TestDecode:

    def test_decode_is_bio_consistent(self, text_model):
        corpus, model, provider = text_model
        for utt in corpus.utterances[:80]:
            assert is_bio_consistent(model.decode(utt, FeatureBundle()))

    def test_decode_matches_brute_force(self, text_model):
        corpus, model, provider = text_model
        trans = model.store.params["crf.trans"]
        start = model.store.params["crf.start"]
        stop = model.store.params["crf.stop"]
        checked = 0
        for utt in corpus.utterances:
            if len(utt.tokens) > 4:
                continue
            e = model.emissions(utt, FeatureBundle(), model.store.tensors()).data
            best_score, best_path = -np.inf, None
            for path in itertools.product(range(len(LABELS)), repeat=e.shape[0]):
                s = start[path[0]] + stop[path[-1]] + sum(e[t, j] for t, j in enumerate(path))
                s += sum(trans[a, b] for a, b in zip(path, path[1:]))
                if s > best_score:
                    best_score, best_path = s, list(path)
            assert model.decode(utt, FeatureBundle()) == [LABELS[i] for i in best_path]
            checked += 1
            if checked >= 3:
                break
        assert checked >= 1

    def test_determinism_same_seed(self):
        corpus, train, dev, _, std = small_corpus(seed=4, n=60)
        provider = FeatureProvider(cues=corpus.cues)
        scores = []
        for _ in range(2):
            model = make_model(corpus, train, std, FusionConfig(features=("text",)))
            result = train_tagger(model, train[:40], dev[:15], provider, seed=9)
            scores.append(result.dev_f1)
        assert scores[0] == scores[1]


class TestJointLoss:
    def test_gradient_check_text_only(self):
        corpus, train, _, _, std = small_corpus(seed=5, n=40)
        model = make_model(corpus, train, std, FusionConfig(features=("text",)))
        model.initialize(seed=0)
        utt = next(u for u in train if len(u.tokens) <= 5)
        bundle = FeatureBundle()

        def loss_fn(ts):
            return model.loss(utt, bundle, ts)

        report = nn.gradient_check(loss_fn, model.store, tolerance=1e-4)
        assert report.passed, report.summary()

    def test_gradient_check_late_fusion_joint(self):
        corpus, train, _, _, std = small_corpus(seed=6, n=40)
        fusion = FusionConfig(features=("text", "innovations"), mode="late",
                              alpha=0.5, training="joint")
        model = make_model(corpus, train, std, fusion)
        model.initialize(seed=0)
        utt = next(u for u in train if u.is_fluent and len(u.tokens) <= 5)
        bundle = FeatureProvider(cues=corpus.cues).bundle(utt, fusion)

        def loss_fn(ts):
            return model.loss(utt, bundle, ts)

        report = nn.gradient_check(loss_fn, model.store, tolerance=1e-4)
        assert report.passed, report.summary()

    def test_prosody_term_only_on_fluent(self):
        corpus, train, _, _, std = small_corpus(seed=7, n=60)
        fusion = FusionConfig(features=("innovations",), mode="single", training="joint")
        model = make_model(corpus, train, std, fusion)
        model.initialize(seed=0)
        provider = FeatureProvider(cues=corpus.cues)
        fluent = next(u for u in train if u.is_fluent)
        disfl = next(u for u in train if not u.is_fluent)
        ts = model.store.tensors()
        loss_f = model.loss(fluent, provider.bundle(fluent, fusion), ts)
        crf_only = nn.crf_nll(
            model.emissions(fluent, provider.bundle(fluent, fusion), ts),
            ts["crf.trans"], ts["crf.start"], ts["crf.stop"],
            [0] * len(fluent.tokens),
        )
        pros = model.predictor.nll(fluent, corpus.cues[fluent.id], ts)
        assert loss_f.item() == pytest.approx(crf_only.item() + pros.item(), rel=1e-9)
        ts2 = model.store.tensors()
        loss_d = model.loss(disfl, provider.bundle(disfl, fusion), ts2)
        gold = disfl.bio_labels()
        from disfluency.corpus import LABEL_TO_ID
        crf_d = nn.crf_nll(
            model.emissions(disfl, provider.bundle(disfl, fusion), ts2),
            ts2["crf.trans"], ts2["crf.start"], ts2["crf.stop"],
            [LABEL_TO_ID[g] for g in gold],
        )
        assert loss_d.item() == pytest.approx(crf_d.item(), rel=1e-9)


class TestDisjoint:
    def test_disjoint_without_predictor_errors(self):
        corpus, train, _, _, std = small_corpus(seed=8, n=40)
        fusion = FusionConfig(features=("innovations",), mode="single", training="disjoint")
        provider = FeatureProvider(cues=corpus.cues)  # no frozen predictor
        with pytest.raises(ValueError, match="pretrained prosody"):
            provider.bundle(train[0], fusion)

    def test_disjoint_with_frozen_predictor(self):
        from disfluency.predictor import ProsodyPredictor, train_prosody

        corpus, train, dev, _, std = small_corpus(seed=9, n=80)
        pred = ProsodyPredictor(TINY_PRED, Vocabs.from_utterances(train),
                                corpus.embeddings, std)
        store = nn.ParameterStore()
        pred.register(store, np.random.default_rng(0))
        fusion = FusionConfig(features=("innovations",), mode="single", training="disjoint")
        provider = FeatureProvider(cues=corpus.cues, frozen_predictor=(pred, store))
        model = make_model(corpus, train, std, fusion)
        result = train_tagger(model, train[:30], dev[:10], provider, seed=1)
        assert len(result.dev_f1) >= 1


class TestAlphaInvariance:
    def test_alpha_zero_matches_text_branch_bitwise(self):
        corpus, train, dev, _, std = small_corpus(seed=10, n=60)
        fusion = FusionConfig(features=("text", "raw"), mode="late", alpha=0.5)
        model = make_model(corpus, train, std, fusion)
        provider = FeatureProvider(cues=corpus.cues)
        train_tagger(model, train[:30], dev[:10], provider, seed=2)

        # alpha=0 must zero out the prosody branch exactly: emissions equal
        # those computed from the text branch alone with the same weights.
        for utt in dev[:5]:
            bundle = provider.bundle(utt, fusion)
            ts = model.store.tensors()
            e_alpha0 = model.emissions(utt, bundle, ts, alpha=0.0).data
            u_text = nn.bilstm(model.embedder.forward(utt, ts), ts, "text_enc")
            u_text = nn.add(nn.matmul(u_text, ts["text.proj.w"]), ts["text.proj.b"])
            e_text = nn.add(nn.matmul(u_text, ts["emit.w"]), ts["emit.b"]).data
            assert np.array_equal(e_alpha0, e_text)


class TestTuneAlpha:
    def test_singleton_grid(self):
        corpus, train, dev, _, std = small_corpus(seed=11, n=60)
        fusion = FusionConfig(features=("text", "raw"), mode="late")
        model = make_model(corpus, train, std, fusion)
        provider = FeatureProvider(cues=corpus.cues)
        train_tagger(model, train[:30], dev[:10], provider, seed=4)
        best, scores = tune_alpha([model], dev[:10], provider, grid=[0.5])
        assert best == 0.5 and set(scores) == {0.5}

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            tune_alpha([], [], FeatureProvider(), grid=[])

    def test_tie_breaks_toward_smaller_alpha(self):
        corpus, train, dev, _, std = small_corpus(seed=12, n=60)
        fusion = FusionConfig(features=("text", "raw"), mode="late")
        model = make_model(corpus, train, std, fusion)
        provider = FeatureProvider(cues=corpus.cues)
        model.initialize(seed=0)
        # Untouched random model: scores may tie across alphas; the returned
        # alpha must never exceed an equally scoring smaller one.
        best, scores = tune_alpha([model], dev[:8], provider, grid=[0.3, 0.7])
        top = max(scores.values())
        assert best == min(a for a, s in scores.items() if s == top)


class TestPersistence:
    def test_save_load_round_trip(self, tmp_path):
        corpus, train, dev, _, std = small_corpus(seed=13, n=60)
        fusion = FusionConfig(features=("text", "innovations"), mode="late", training="joint")
        model = make_model(corpus, train, std, fusion)
        provider = FeatureProvider(cues=corpus.cues)
        train_tagger(model, train[:25], dev[:10], provider, seed=5)
        path = tmp_path / "tagger.npz"
        model.save(path)
        loaded = TaggerModel.load(path)
        for name in model.store.params:
            assert np.array_equal(loaded.store.params[name], model.store.params[name])
        for utt in dev[:5]:
            bundle = provider.bundle(utt, fusion)
            assert loaded.decode(utt, bundle) == model.decode(utt, bundle)
