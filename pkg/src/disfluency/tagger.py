"""BiLSTM-CRF disfluency tagger with early/late multimodal fusion.

Feature sets: `text` (word/POS/identity embeddings), `raw` (standardized
cue vectors) and `innovations` (z-scores from the prosody predictor).
Early fusion concatenates feature sets at the encoder input. Late fusion
runs a text branch and a prosody branch, projects both to a shared width
and linearly interpolates the states before the CRF emission layer.

With joint training the prosody predictor's parameters sit in the same
store as the tagger's and the total loss adds the cue NLL (fluent
utterances only, weighted). Disjoint training instead consumes frozen
innovation features computed by a separately trained predictor.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import nn
from .corpus.types import LABEL_TO_ID, LABELS, REPARANDUM_LABELS, Utterance
from .features import CueStandardizer
from .predictor import PredictorConfig, ProsodyPredictor, TokenEmbedder, Vocabs

FEATURE_SETS = ("text", "raw", "innovations")
N_LABELS = len(LABELS)


@dataclass
class FusionConfig:
    features: tuple[str, ...] = ("text",)
    mode: str = "single"
    alpha: float = 0.5
    training: str = "joint"
    prosody_loss_weight: float = 1.0

    def __post_init__(self):
        self.features = tuple(self.features)
        self.validate()

    def validate(self) -> None:
        unknown = set(self.features) - set(FEATURE_SETS)
        if unknown or not self.features:
            raise ValueError(f"features must be a nonempty subset of {FEATURE_SETS}")
        if len(set(self.features)) != len(self.features):
            raise ValueError("duplicate feature sets")
        if self.mode not in ("single", "early", "late"):
            raise ValueError(f"unknown fusion mode {self.mode!r}")
        if self.mode == "single" and len(self.features) != 1:
            raise ValueError("single mode requires exactly one feature set")
        if self.mode == "early" and len(self.features) < 2:
            raise ValueError("early fusion requires at least two feature sets")
        if self.mode == "late":
            if "text" not in self.features:
                raise ValueError("late fusion requires a text branch")
            if not (set(self.features) & {"raw", "innovations"}):
                raise ValueError("late fusion requires a prosody branch")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.training not in ("joint", "disjoint"):
            raise ValueError(f"unknown training regime {self.training!r}")
        if self.prosody_loss_weight < 0:
            raise ValueError("prosody_loss_weight must be >= 0")

    @property
    def uses_innovations(self) -> bool:
        return "innovations" in self.features

    @property
    def joint(self) -> bool:
        return self.uses_innovations and self.training == "joint"


@dataclass
class TaggerConfig:
    hidden: int = 128
    proj_dim: int = 128
    dropout: float = 0.3
    learning_rate: float = 1e-3
    epochs: int = 20
    patience: int = 3

    def to_dict(self) -> dict:
        return dict(self.__dict__)


# -- fusion primitives -------------------------------------------------------

def fuse_early(parts: list[nn.Tensor]) -> nn.Tensor:
    if not parts:
        raise ValueError("nothing to fuse")
    lengths = {p.data.shape[0] for p in parts}
    if len(lengths) != 1:
        raise ValueError(f"per-token feature lengths differ: {sorted(lengths)}")
    return parts[0] if len(parts) == 1 else nn.concat(parts, axis=1)


def fuse_late(u_text: nn.Tensor, u_prosody: nn.Tensor, alpha: float) -> nn.Tensor:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if u_text.data.shape != u_prosody.data.shape:
        raise ValueError(f"branch shapes differ: {u_text.data.shape} vs {u_prosody.data.shape}")
    return nn.add(nn.scale(u_prosody, alpha), nn.scale(u_text, 1.0 - alpha))


# -- evaluation ---------------------------------------------------------------

@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    true_positive: int = 0
    n_predicted: int = 0
    n_gold: int = 0


def evaluate_sets(pred: set, gold: set) -> Metrics:
    tp = len(pred & gold)
    if not pred and not gold:
        return Metrics(1.0, 1.0, 1.0, 0, 0, 0)
    p = tp / len(pred) if pred else 0.0
    r = tp / len(gold) if gold else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return Metrics(p, r, f1, tp, len(pred), len(gold))


def reparandum_set(labels: list[str], key=None):
    return {(key, i) if key is not None else i
            for i, lab in enumerate(labels) if lab in REPARANDUM_LABELS}


def evaluate(predictions: list[list[str]], gold: list[list[str]]) -> Metrics:
    """Corpus-level reparandum-token precision/recall/F1."""
    if len(predictions) != len(gold):
        raise ValueError(f"{len(predictions)} predictions for {len(gold)} gold sequences")
    pred_set, gold_set = set(), set()
    for k, (p_labels, g_labels) in enumerate(zip(predictions, gold)):
        if len(p_labels) != len(g_labels):
            raise ValueError(f"sequence {k}: {len(p_labels)} predicted labels for {len(g_labels)} tokens")
        pred_set |= reparandum_set(p_labels, key=k)
        gold_set |= reparandum_set(g_labels, key=k)
    return evaluate_sets(pred_set, gold_set)


# -- CRF scaffolding ----------------------------------------------------------

def _legal_transitions() -> np.ndarray:
    legal = np.ones((N_LABELS, N_LABELS), dtype=bool)
    for j, lab in enumerate(LABELS):
        if lab.startswith("I-"):
            kind = lab[2:]
            for i, prev in enumerate(LABELS):
                if prev not in (f"B-{kind}", f"I-{kind}"):
                    legal[i, j] = False
    return legal


def _legal_starts() -> np.ndarray:
    return np.array([not lab.startswith("I-") for lab in LABELS])


# -- feature plumbing ----------------------------------------------------------

@dataclass
class FeatureBundle:
    """Per-utterance acoustic inputs; text comes from the utterance itself."""
    cues: np.ndarray | None = None          # (T, 21) raw cue vectors
    innovations: np.ndarray | None = None   # (T, 21) frozen z-scores


class FeatureProvider:
    """Builds FeatureBundles from cue tables and, for disjoint training,
    a frozen prosody predictor or a precomputed innovations table."""

    def __init__(self, cues: dict[str, np.ndarray] | None = None,
                 frozen_predictor: tuple[ProsodyPredictor, nn.ParameterStore] | None = None,
                 innovations: dict[str, np.ndarray] | None = None):
        self.cues = cues or {}
        self.frozen = frozen_predictor
        self.innovations = dict(innovations) if innovations else {}

    def bundle(self, utt: Utterance, fusion: FusionConfig) -> FeatureBundle:
        needs_cues = "raw" in fusion.features or fusion.uses_innovations
        cue_mat = self.cues.get(utt.id) if needs_cues else None
        if needs_cues and cue_mat is None:
            raise KeyError(f"no cue vectors for utterance {utt.id}")
        innov = None
        if fusion.uses_innovations and fusion.training == "disjoint":
            innov = self.innovations.get(utt.id)
            if innov is None:
                if self.frozen is None:
                    raise ValueError(
                        "disjoint training needs a pretrained prosody model "
                        "or precomputed innovation features"
                    )
                predictor, store = self.frozen
                innov = predictor.innovations(utt, cue_mat, store)
                self.innovations[utt.id] = innov
        return FeatureBundle(cues=cue_mat, innovations=innov)


# -- the model ------------------------------------------------------------------

class TaggerModel:
    def __init__(self, fusion: FusionConfig, config: TaggerConfig, vocabs: Vocabs,
                 embeddings: dict[str, np.ndarray], standardizer: CueStandardizer | None,
                 predictor_config: PredictorConfig | None = None):
        fusion.validate()
        needs_std = "raw" in fusion.features or fusion.uses_innovations
        if needs_std and standardizer is None:
            raise ValueError("prosody features need a fitted cue standardizer")
        self.fusion = fusion
        self.config = config
        self.vocabs = vocabs
        self.standardizer = standardizer
        self.embeddings = embeddings
        self.store = nn.ParameterStore()
        self.embedder = None
        if "text" in fusion.features:
            self.embedder = TokenEmbedder(
                embeddings, vocabs.pos,
                predictor_config.pos_dim if predictor_config else 16,
                predictor_config.identity_dim if predictor_config else 8,
                prefix="text.",
            )
        self.predictor = None
        self.predictor_config = predictor_config
        if fusion.joint:
            self.predictor = ProsodyPredictor(
                predictor_config or PredictorConfig(), vocabs, embeddings,
                standardizer, prefix="prosody.",
            )

    # -- params -------------------------------------------------------------

    def initialize(self, seed: int) -> None:
        rng = np.random.default_rng(seed)
        cfg = self.config
        if self.embedder is not None:
            self.embedder.register(self.store, rng)
        if self.predictor is not None:
            self.predictor.register(self.store, rng)
        if self.fusion.mode == "late":
            nn.add_lstm(self.store, rng, "text_enc", self.embedder.out_dim, cfg.hidden)
            self.store.add("text.proj.w", nn.init_linear(rng, 2 * cfg.hidden, cfg.proj_dim))
            self.store.add("text.proj.b", np.zeros(cfg.proj_dim))
            pros_dim = 21 * len([f for f in self.fusion.features if f != "text"])
            nn.add_lstm(self.store, rng, "pros_enc", pros_dim, cfg.hidden)
            self.store.add("pros.proj.w", nn.init_linear(rng, 2 * cfg.hidden, cfg.proj_dim))
            self.store.add("pros.proj.b", np.zeros(cfg.proj_dim))
            emit_in = cfg.proj_dim
        else:
            in_dim = 0
            if "text" in self.fusion.features:
                in_dim += self.embedder.out_dim
            in_dim += 21 * len([f for f in self.fusion.features if f != "text"])
            nn.add_lstm(self.store, rng, "enc", in_dim, cfg.hidden)
            emit_in = 2 * cfg.hidden
        self.store.add("emit.w", nn.init_linear(rng, emit_in, N_LABELS))
        self.store.add("emit.b", np.zeros(N_LABELS))
        trans = np.zeros((N_LABELS, N_LABELS))
        trans[~_legal_transitions()] = nn.NEG_INF
        self.store.add("crf.trans", trans)
        start = np.zeros(N_LABELS)
        start[~_legal_starts()] = nn.NEG_INF
        self.store.add("crf.start", start)
        self.store.add("crf.stop", np.zeros(N_LABELS))

    # -- forward ---------------------------------------------------------------

    def _prosody_parts(self, utt: Utterance, bundle: FeatureBundle, ts: dict,
                       rng, train: bool) -> list[nn.Tensor]:
        parts = []
        for name in self.fusion.features:
            if name == "raw":
                parts.append(nn.Tensor(self.standardizer.apply(bundle.cues)))
            elif name == "innovations":
                if self.fusion.training == "joint":
                    parts.append(self.predictor.innovations_tensor(
                        utt, bundle.cues, ts, rng, train))
                else:
                    if bundle.innovations is None:
                        raise ValueError("disjoint mode requires frozen innovation features")
                    parts.append(nn.Tensor(bundle.innovations))
        return parts

    def emissions(self, utt: Utterance, bundle: FeatureBundle, ts: dict,
                  rng=None, train: bool = False, alpha: float | None = None) -> nn.Tensor:
        cfg = self.config
        drop = lambda t: nn.dropout(t, cfg.dropout, rng, train)  # noqa: E731
        if self.fusion.mode == "late":
            u_text = nn.bilstm(drop(self.embedder.forward(utt, ts)), ts, "text_enc")
            u_text = nn.add(nn.matmul(drop(u_text), ts["text.proj.w"]), ts["text.proj.b"])
            pros_in = fuse_early(self._prosody_parts(utt, bundle, ts, rng, train))
            u_pros = nn.bilstm(drop(pros_in), ts, "pros_enc")
            u_pros = nn.add(nn.matmul(drop(u_pros), ts["pros.proj.w"]), ts["pros.proj.b"])
            fused = fuse_late(u_text, u_pros, self.fusion.alpha if alpha is None else alpha)
        else:
            parts = []
            if "text" in self.fusion.features:
                parts.append(self.embedder.forward(utt, ts))
            parts.extend(self._prosody_parts(utt, bundle, ts, rng, train))
            states = nn.bilstm(drop(fuse_early(parts)), ts, "enc")
            fused = drop(states)
        return nn.add(nn.matmul(fused, ts["emit.w"]), ts["emit.b"])

    def loss(self, utt: Utterance, bundle: FeatureBundle, ts: dict,
             rng=None, train: bool = False) -> nn.Tensor:
        gold = [LABEL_TO_ID[lab] for lab in utt.bio_labels()]
        e = self.emissions(utt, bundle, ts, rng, train)
        total = nn.crf_nll(e, ts["crf.trans"], ts["crf.start"], ts["crf.stop"], gold)
        if self.fusion.joint and self.fusion.prosody_loss_weight > 0 and utt.is_fluent:
            pros = self.predictor.nll(utt, bundle.cues, ts, rng, train)
            total = nn.add(total, nn.scale(pros, self.fusion.prosody_loss_weight))
        return total

    # -- inference ----------------------------------------------------------------

    def decode(self, utt: Utterance, bundle: FeatureBundle,
               alpha: float | None = None) -> list[str]:
        ts = self.store.tensors()
        e = self.emissions(utt, bundle, ts, alpha=alpha)
        path = nn.crf_viterbi(e.data, self.store.params["crf.trans"],
                              self.store.params["crf.start"], self.store.params["crf.stop"])
        return [LABELS[i] for i in path]

    def predict_labels(self, utt: Utterance) -> list[str]:
        """Text-only decoding hook (used by the silver-annotation remapper)."""
        if self.fusion.features != ("text",):
            raise ValueError("predict_labels without features requires a text-only model")
        return self.decode(utt, FeatureBundle())

    def decode_corpus(self, utts: list[Utterance], provider: FeatureProvider,
                      alpha: float | None = None) -> list[list[str]]:
        return [self.decode(u, provider.bundle(u, self.fusion), alpha=alpha) for u in utts]

    # -- persistence -----------------------------------------------------------------

    def save(self, path) -> None:
        config = {
            "kind": "tagger",
            "fusion": {**asdict(self.fusion), "features": list(self.fusion.features)},
            "config": self.config.to_dict(),
            "predictor_config": self.predictor_config.to_dict() if self.predictor_config else None,
            "pos": self.vocabs.pos,
            "phones": self.vocabs.phones,
            "words": sorted(self.embeddings),
        }
        constants = {"word_matrix": np.stack([self.embeddings[w] for w in sorted(self.embeddings)])}
        if self.standardizer is not None:
            constants.update({f"standardizer.{k}": v
                              for k, v in self.standardizer.to_arrays().items()})
        self.store.save(path, config=config, constants=constants)

    @classmethod
    def load(cls, path) -> "TaggerModel":
        store, config, constants = nn.ParameterStore.load(path)
        if config.get("kind") != "tagger":
            raise ValueError(f"{path}: not a tagger model file")
        words = sorted(config["words"])
        matrix = constants["word_matrix"]
        embeddings = {w: matrix[i] for i, w in enumerate(words)}
        std = None
        if any(k.startswith("standardizer.") for k in constants):
            std = CueStandardizer.from_arrays({
                k.split(".", 1)[1]: v for k, v in constants.items()
                if k.startswith("standardizer.")
            })
        fusion_dict = dict(config["fusion"])
        fusion_dict["features"] = tuple(fusion_dict["features"])
        pc = config.get("predictor_config")
        model = cls(
            fusion=FusionConfig(**fusion_dict),
            config=TaggerConfig(**config["config"]),
            vocabs=Vocabs(pos=config["pos"], phones=config["phones"]),
            embeddings=embeddings,
            standardizer=std,
            predictor_config=PredictorConfig(**pc) if pc else None,
        )
        model.store = store
        return model


# -- training -----------------------------------------------------------------------

@dataclass
class TrainResult:
    dev_f1: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_dev_f1: float = 0.0


def dev_f1(model: TaggerModel, utts: list[Utterance], provider: FeatureProvider) -> float:
    preds = model.decode_corpus(utts, provider)
    return evaluate(preds, [u.bio_labels() for u in utts]).f1


def train_tagger(model: TaggerModel, train_utts: list[Utterance],
                 dev_utts: list[Utterance], provider: FeatureProvider,
                 seed: int) -> TrainResult:
    cfg = model.config
    model.initialize(seed)
    rng = np.random.default_rng(seed + 1)
    result = TrainResult()
    best = (-1.0, model.store.copy_values(), -1)
    since_best = 0
    for epoch in range(cfg.epochs):
        for j in rng.permutation(len(train_utts)):
            utt = train_utts[j]
            bundle = provider.bundle(utt, model.fusion)
            ts = model.store.tensors()
            loss = model.loss(utt, bundle, ts, rng, train=True)
            loss.backward()
            model.store.adam_step(nn.grads_of(ts), lr=cfg.learning_rate)
        score = dev_f1(model, dev_utts, provider)
        result.dev_f1.append(score)
        if score > best[0]:
            best = (score, model.store.copy_values(), epoch)
            since_best = 0
        else:
            since_best += 1
            if since_best > cfg.patience:
                break
    model.store.load_values(best[1])
    result.best_epoch, result.best_dev_f1 = best[2], best[0]
    return result


def write_predictions(utts: list[Utterance], predictions: list[list[str]], path) -> None:
    from pathlib import Path

    lines = []
    for utt, pred in zip(utts, predictions):
        gold = utt.bio_labels()
        for i, (g, p) in enumerate(zip(gold, pred)):
            lines.append(f"{utt.id}\t{i}\t{g}\t{p}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_predictions(path) -> tuple[dict[str, list[str]], dict[str, list[str]]]:
    """Returns (gold, predicted) label sequences keyed by utterance id."""
    gold: dict[str, list[tuple[int, str]]] = {}
    pred: dict[str, list[tuple[int, str]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields")
            utt_id, idx, g, p = parts
            gold.setdefault(utt_id, []).append((int(idx), g))
            pred.setdefault(utt_id, []).append((int(idx), p))
    out_gold = {k: [lab for _, lab in sorted(v)] for k, v in gold.items()}
    out_pred = {k: [lab for _, lab in sorted(v)] for k, v in pred.items()}
    return out_gold, out_pred


def tune_alpha(models: list[TaggerModel], dev_utts: list[Utterance],
               provider: FeatureProvider, grid: list[float] | None = None) -> tuple[float, dict[float, float]]:
    """Pick the interpolation weight maximizing mean dev F1; ties go to the
    smaller alpha. Returns (best_alpha, {alpha: mean_f1})."""
    if grid is None:
        grid = [round(0.1 * k, 1) for k in range(1, 10)]
    if not grid:
        raise ValueError("empty alpha grid")
    if any(m.fusion.mode != "late" for m in models):
        raise ValueError("alpha tuning applies to late-fusion models only")
    gold = [u.bio_labels() for u in dev_utts]
    scores: dict[float, float] = {}
    for alpha in grid:
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha grid value {alpha} outside [0, 1]")
        vals = [evaluate(m.decode_corpus(dev_utts, provider, alpha=alpha), gold).f1
                for m in models]
        scores[alpha] = float(np.mean(vals))
    best = min(sorted(scores), key=lambda a: (-scores[a], a))
    return best, scores
