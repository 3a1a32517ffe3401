"""Text-conditioned prediction of prosodic cue distributions.

Two stacked bidirectional LSTMs encode each utterance: a word-level pass
over word/POS/identity embeddings, then a phone-level pass over the whole
utterance's phone string, where every phone input carries the phone
embedding, a stress embedding and the word-level state of its token. The
summary state of token i concatenates the forward state at its last phone
with the backward state at its first phone.

Per cue, two linear heads on that summary give a mean (softplus for pause
and duration, tanh for the standardized cues) and a softplus variance.
Innovations are the variance-normalized residuals of the observed cues
against those predictions; a token whose prosody the text cannot explain
gets large-magnitude entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .corpus.lexicon import UNK_PRONUNCIATION
from .corpus.types import STRESSES, UNK_PHONE, Utterance
from .features import N_CUES, CueStandardizer

SOFTPLUS_CUES = slice(0, 2)  # pause, duration
TANH_CUES = slice(2, N_CUES)


@dataclass
class PredictorConfig:
    pos_dim: int = 16
    identity_dim: int = 8
    phone_dim: int = 32
    stress_dim: int = 4
    word_hidden: int = 128
    phone_hidden: int = 64
    dropout: float = 0.3
    learning_rate: float = 1e-3
    epochs: int = 20
    patience: int = 3

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Vocabs:
    pos: list[str]
    phones: list[str]

    @classmethod
    def from_utterances(cls, utts: list[Utterance]) -> "Vocabs":
        pos = {"UNK"}
        phones = {UNK_PHONE}
        for utt in utts:
            for tok in utt.tokens:
                pos.add(tok.pos)
                phones.update(p for p, _ in tok.phones)
        return cls(pos=sorted(pos), phones=sorted(phones))


def read_embeddings(path: str | Path) -> dict[str, np.ndarray]:
    emb: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            vec = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise ValueError(f"{path}:{lineno}: embedding dim {vec.size} != {dim}")
            emb[parts[0]] = vec
    if not emb:
        raise ValueError(f"{path}: no embeddings found")
    return emb


def write_embeddings(emb: dict[str, np.ndarray], path: str | Path) -> None:
    lines = [w + " " + " ".join(f"{v:.6f}" for v in vec) for w, vec in sorted(emb.items())]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class TokenEmbedder:
    """Word/POS/identity input rows shared by the predictor and the tagger's
    text branch. Word vectors come from the pretrained file and stay fixed;
    out-of-vocabulary words share one trained vector."""

    def __init__(self, embeddings: dict[str, np.ndarray], pos_vocab: list[str],
                 pos_dim: int, identity_dim: int, prefix: str = ""):
        self.prefix = prefix
        self.pos_dim = pos_dim
        self.identity_dim = identity_dim
        self.pos_index = {p: i for i, p in enumerate(pos_vocab)}
        self.word_index = {w: i for i, w in enumerate(sorted(embeddings))}
        self.word_matrix = np.stack([embeddings[w] for w in sorted(embeddings)]) \
            if embeddings else np.zeros((0, 1))
        self.word_dim = self.word_matrix.shape[1]

    @property
    def out_dim(self) -> int:
        return self.word_dim + self.pos_dim + self.identity_dim

    def register(self, store: nn.ParameterStore, rng: np.random.Generator) -> None:
        p = self.prefix
        store.add(f"{p}word.unk", rng.uniform(-0.1, 0.1, self.word_dim))
        store.add(f"{p}pos.emb", rng.uniform(-0.1, 0.1, (len(self.pos_index), self.pos_dim)))
        store.add(f"{p}ident.w", rng.uniform(-0.5, 0.5, (3, self.identity_dim)))

    def forward(self, utt: Utterance, ts: dict) -> nn.Tensor:
        p = self.prefix
        T = len(utt.tokens)
        known = np.zeros((T, self.word_dim))
        oov = np.zeros((T, 1))
        for i, tok in enumerate(utt.tokens):
            idx = self.word_index.get(tok.core.lower())
            if idx is None:
                oov[i, 0] = 1.0
            else:
                known[i] = self.word_matrix[idx]
        word = nn.add(nn.Tensor(known),
                      nn.matmul(nn.Tensor(oov), _as_row(ts[f"{p}word.unk"])))
        pos_idx = [self.pos_index.get(t.pos, self.pos_index["UNK"]) for t in utt.tokens]
        pos = nn.rows(ts[f"{p}pos.emb"], pos_idx)
        flags = np.array(
            [[t.is_filled_pause, t.is_discourse_marker, t.is_fragment] for t in utt.tokens],
            dtype=np.float64,
        )
        ident = nn.matmul(nn.Tensor(flags), ts[f"{p}ident.w"])
        return nn.concat([word, pos, ident], axis=1)


class ProsodyPredictor:
    """Owns no ParameterStore by default; register() adds parameters under a
    prefix so the predictor can live inside a larger jointly trained model."""

    def __init__(self, config: PredictorConfig, vocabs: Vocabs,
                 embeddings: dict[str, np.ndarray], standardizer: CueStandardizer,
                 prefix: str = ""):
        self.config = config
        self.vocabs = vocabs
        self.standardizer = standardizer
        self.prefix = prefix
        self.embedder = TokenEmbedder(embeddings, vocabs.pos, config.pos_dim,
                                      config.identity_dim, prefix=prefix)
        self.phone_index = {p: i for i, p in enumerate(vocabs.phones)}
        self.stress_index = {s: i for i, s in enumerate(STRESSES)}

    @property
    def word_index(self):
        return self.embedder.word_index

    @property
    def word_matrix(self):
        return self.embedder.word_matrix

    @property
    def word_dim(self):
        return self.embedder.word_dim

    # -- parameters ---------------------------------------------------------

    def register(self, store: nn.ParameterStore, rng: np.random.Generator) -> None:
        cfg, p = self.config, self.prefix
        self.embedder.register(store, rng)
        store.add(f"{p}phone.emb", rng.uniform(-0.1, 0.1, (len(self.vocabs.phones), cfg.phone_dim)))
        store.add(f"{p}stress.emb", rng.uniform(-0.1, 0.1, (len(STRESSES), cfg.stress_dim)))
        word_in = self.embedder.out_dim
        nn.add_lstm(store, rng, f"{p}wenc", word_in, cfg.word_hidden)
        phone_in = cfg.phone_dim + cfg.stress_dim + 2 * cfg.word_hidden
        nn.add_lstm(store, rng, f"{p}penc", phone_in, cfg.phone_hidden)
        h_dim = 2 * cfg.phone_hidden
        store.add(f"{p}head.mu.w", nn.init_linear(rng, h_dim, N_CUES))
        store.add(f"{p}head.mu.b", np.zeros(N_CUES))
        store.add(f"{p}head.var.w", nn.init_linear(rng, h_dim, N_CUES))
        store.add(f"{p}head.var.b", np.zeros(N_CUES))

    def token_inputs(self, utt: Utterance, ts: dict) -> nn.Tensor:
        return self.embedder.forward(utt, ts)

    # -- encoding -----------------------------------------------------------

    def encode(self, utt: Utterance, ts: dict,
               rng: np.random.Generator | None = None, train: bool = False) -> nn.Tensor:
        cfg, p = self.config, self.prefix
        T = len(utt.tokens)
        x = self.token_inputs(utt, ts)
        if train:
            x = nn.dropout(x, cfg.dropout, rng, train)
        g = nn.bilstm(x, ts, f"{p}wenc")

        phone_idx: list[int] = []
        stress_idx: list[int] = []
        owner: list[int] = []
        first_phone = [0] * T
        last_phone = [0] * T
        for i, tok in enumerate(utt.tokens):
            phones = tok.phones or UNK_PRONUNCIATION
            first_phone[i] = len(phone_idx)
            for label, stress in phones:
                phone_idx.append(self.phone_index.get(label, self.phone_index[UNK_PHONE]))
                stress_idx.append(self.stress_index[stress])
                owner.append(i)
            last_phone[i] = len(phone_idx) - 1
        P = len(phone_idx)

        spread = np.zeros((P, T))
        spread[np.arange(P), owner] = 1.0
        r = nn.concat(
            [nn.rows(ts[f"{p}phone.emb"], phone_idx),
             nn.rows(ts[f"{p}stress.emb"], stress_idx),
             nn.matmul(nn.Tensor(spread), g)],
            axis=1,
        )
        states = nn.bilstm(r, ts, f"{p}penc")

        take_last = np.zeros((T, P))
        take_last[np.arange(T), last_phone] = 1.0
        take_first = np.zeros((T, P))
        take_first[np.arange(T), first_phone] = 1.0
        hdim = cfg.phone_hidden
        fwd = nn.cols(nn.matmul(nn.Tensor(take_last), states), 0, hdim)
        bwd = nn.cols(nn.matmul(nn.Tensor(take_first), states), hdim, 2 * hdim)
        h = nn.concat([fwd, bwd], axis=1)
        if train:
            h = nn.dropout(h, cfg.dropout, rng, train)
        return h

    def heads(self, h: nn.Tensor, ts: dict) -> tuple[nn.Tensor, nn.Tensor]:
        p = self.prefix
        mu_pre = nn.add(nn.matmul(h, ts[f"{p}head.mu.w"]), ts[f"{p}head.mu.b"])
        mu = nn.concat(
            [nn.softplus(nn.cols(mu_pre, 0, 2)), nn.tanh(nn.cols(mu_pre, 2, N_CUES))],
            axis=1,
        )
        var = nn.softplus(nn.add(nn.matmul(h, ts[f"{p}head.var.w"]), ts[f"{p}head.var.b"]))
        return mu, var

    def predict_distributions(self, utt: Utterance, ts: dict) -> tuple[np.ndarray, np.ndarray]:
        mu, var = self.heads(self.encode(utt, ts), ts)
        return mu.data.copy(), var.data.copy()

    # -- losses and innovations ----------------------------------------------

    def nll(self, utt: Utterance, cues: np.ndarray, ts: dict,
            rng: np.random.Generator | None = None, train: bool = False) -> nn.Tensor:
        mu, var = self.heads(self.encode(utt, ts, rng, train), ts)
        return nn.gaussian_nll(self.standardizer.apply(cues), mu, var)

    def innovations_tensor(self, utt: Utterance, cues: np.ndarray, ts: dict,
                           rng=None, train: bool = False) -> nn.Tensor:
        mu, var = self.heads(self.encode(utt, ts, rng, train), ts)
        resid = nn.sub(nn.Tensor(self.standardizer.apply(cues)), mu)
        return nn.div(resid, nn.sqrt(var))

    def innovations(self, utt: Utterance, cues: np.ndarray, store: nn.ParameterStore) -> np.ndarray:
        z = self.innovations_tensor(utt, cues, store.tensors())
        return np.round(z.data, 6)

    # -- persistence ----------------------------------------------------------

    def save(self, store: nn.ParameterStore, path: str | Path) -> None:
        config = {
            "kind": "prosody_predictor",
            "config": self.config.to_dict(),
            "pos": self.vocabs.pos,
            "phones": self.vocabs.phones,
            "words": sorted(self.word_index),
            "prefix": self.prefix,
        }
        constants = {"word_matrix": self.word_matrix, **{
            f"standardizer.{k}": v for k, v in self.standardizer.to_arrays().items()
        }}
        store.save(path, config=config, constants=constants)

    @classmethod
    def load(cls, path: str | Path) -> tuple["ProsodyPredictor", nn.ParameterStore]:
        store, config, constants = nn.ParameterStore.load(path)
        if config.get("kind") != "prosody_predictor":
            raise ValueError(f"{path}: not a prosody predictor model")
        std = CueStandardizer.from_arrays({
            k.split(".", 1)[1]: v for k, v in constants.items() if k.startswith("standardizer.")
        })
        words = config["words"]
        matrix = constants["word_matrix"]
        embeddings = {w: matrix[i] for i, w in enumerate(sorted(words))}
        predictor = cls(
            config=PredictorConfig(**config["config"]),
            vocabs=Vocabs(pos=config["pos"], phones=config["phones"]),
            embeddings=embeddings,
            standardizer=std,
            prefix=config.get("prefix", ""),
        )
        return predictor, store


def _as_row(t: nn.Tensor) -> nn.Tensor:
    out = nn.Tensor(t.data.reshape(1, -1), parents=(t,))
    out._backward = lambda g: t._accum(g.reshape(t.data.shape))
    return out


@dataclass
class TrainHistory:
    train_nll: list[float] = field(default_factory=list)
    dev_nll: list[float] = field(default_factory=list)
    best_epoch: int = -1


def mean_nll(predictor: ProsodyPredictor, store: nn.ParameterStore,
             utts: list[Utterance], cues: dict[str, np.ndarray]) -> float:
    total, count = 0.0, 0
    ts = store.tensors()
    for utt in utts:
        total += predictor.nll(utt, cues[utt.id], ts).item()
        count += len(utt.tokens) * N_CUES
    return total / max(count, 1)


def train_prosody(predictor: ProsodyPredictor, store: nn.ParameterStore,
                  train_utts: list[Utterance], dev_utts: list[Utterance],
                  cues: dict[str, np.ndarray], seed: int) -> TrainHistory:
    """Fit the Gaussian heads on fluent utterances only."""
    cfg = predictor.config
    fluent_train = [u for u in train_utts if u.is_fluent]
    fluent_dev = [u for u in dev_utts if u.is_fluent]
    if not fluent_train:
        raise ValueError("no fluent utterances to train the prosody predictor on")
    rng = np.random.default_rng(seed)
    history = TrainHistory()
    best = (float("inf"), store.copy_values(), -1)
    since_best = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(fluent_train))
        running = 0.0
        for j in order:
            utt = fluent_train[j]
            ts = store.tensors()
            loss = predictor.nll(utt, cues[utt.id], ts, rng, train=True)
            loss.backward()
            store.adam_step(nn.grads_of(ts), lr=cfg.learning_rate)
            running += loss.item()
        history.train_nll.append(running / len(fluent_train))
        dev = mean_nll(predictor, store, fluent_dev or fluent_train, cues)
        history.dev_nll.append(dev)
        if dev < best[0]:
            best = (dev, store.copy_values(), epoch)
            since_best = 0
        else:
            since_best += 1
            if since_best > cfg.patience:
                break
    store.load_values(best[1])
    history.best_epoch = best[2]
    return history
