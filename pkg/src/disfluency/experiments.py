"""End-to-end wiring: corpus loading, the multi-seed protocol and manifests.

Every training command reports the mean and best dev/test F1 over its seed
list, and every command writes a flat key=value manifest holding the
effective config, the seed list, sha256 hashes of the inputs and the final
metrics, so a run is reproducible from the manifest alone.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from . import nn
from .corpus.io import apply_alignments, read_alignments, read_transcripts, write_alignments, write_transcripts
from .corpus.lexicon import load_lexicon, save_lexicon
from .corpus.synth import SynthCorpus
from .corpus.types import Utterance
from .features import CueStandardizer, fit_standardizer, read_cues, write_cues
from .predictor import (
    PredictorConfig,
    ProsodyPredictor,
    TrainHistory,
    Vocabs,
    read_embeddings,
    train_prosody,
    write_embeddings,
)
from .tagger import (
    FeatureProvider,
    FusionConfig,
    TaggerConfig,
    TaggerModel,
    evaluate,
    train_tagger,
)

CORPUS_FILES = {
    "transcripts": "transcripts.tsv",
    "alignments": "alignments.tsv",
    "cues": "cues.tsv",
    "lexicon": "lexicon.txt",
    "embeddings": "embeddings.txt",
}


@dataclass
class DataBundle:
    train: list[Utterance]
    dev: list[Utterance]
    test: list[Utterance]
    cues: dict[str, np.ndarray]
    embeddings: dict[str, np.ndarray]
    standardizer: CueStandardizer
    vocabs: Vocabs
    source_hashes: dict[str, str] = field(default_factory=dict)

    @property
    def all_utterances(self) -> list[Utterance]:
        return self.train + self.dev + self.test


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def split_utterances(utts: list[Utterance], dev_frac: float, test_frac: float):
    n = len(utts)
    n_test = int(n * test_frac)
    n_dev = int(n * dev_frac)
    return (
        utts[: n - n_dev - n_test],
        utts[n - n_dev - n_test : n - n_test],
        utts[n - n_test :],
    )


def _fit_standardizer_on_fluent(train: list[Utterance], cues) -> CueStandardizer:
    rows = [cues[u.id] for u in train if u.is_fluent and u.id in cues]
    if not rows:
        raise ValueError("no fluent training utterances with cue vectors")
    return fit_standardizer(np.concatenate(rows, axis=0))


def write_corpus_dir(corpus: SynthCorpus, outdir: str | Path) -> dict[str, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {k: outdir / v for k, v in CORPUS_FILES.items()}
    write_transcripts(corpus.utterances, paths["transcripts"], with_pos=True)
    write_alignments(corpus.utterances, paths["alignments"])
    write_cues(corpus.cues, paths["cues"])
    save_lexicon(corpus.lexicon.entries(), paths["lexicon"])
    write_embeddings(corpus.embeddings, paths["embeddings"])
    return paths


def load_corpus_dir(path: str | Path, dev_frac: float = 0.15,
                    test_frac: float = 0.15) -> DataBundle:
    path = Path(path)
    paths = {k: path / v for k, v in CORPUS_FILES.items()}
    for name, p in paths.items():
        if not p.exists():
            raise FileNotFoundError(f"missing corpus file: {p}")
    utts = read_transcripts(paths["transcripts"])
    apply_alignments(utts, read_alignments(paths["alignments"]))
    lexicon = load_lexicon(paths["lexicon"])
    for utt in utts:
        lexicon.apply(utt.tokens)
    cues = read_cues(paths["cues"])
    embeddings = read_embeddings(paths["embeddings"])
    train, dev, test = split_utterances(utts, dev_frac, test_frac)
    return DataBundle(
        train=train, dev=dev, test=test,
        cues=cues, embeddings=embeddings,
        standardizer=_fit_standardizer_on_fluent(train, cues),
        vocabs=Vocabs.from_utterances(train),
        source_hashes={k: sha256_file(p) for k, p in paths.items()},
    )


def bundle_from_synth(corpus: SynthCorpus, dev_frac: float = 0.15,
                      test_frac: float = 0.15) -> DataBundle:
    train, dev, test = split_utterances(corpus.utterances, dev_frac, test_frac)
    return DataBundle(
        train=train, dev=dev, test=test,
        cues=corpus.cues, embeddings=corpus.embeddings,
        standardizer=_fit_standardizer_on_fluent(train, corpus.cues),
        vocabs=Vocabs.from_utterances(train),
    )


# -- prosody pretraining -------------------------------------------------------

def pretrain_prosody(bundle: DataBundle, config: PredictorConfig,
                     seed: int) -> tuple[ProsodyPredictor, nn.ParameterStore, TrainHistory]:
    predictor = ProsodyPredictor(config, bundle.vocabs, bundle.embeddings,
                                 bundle.standardizer)
    store = nn.ParameterStore()
    predictor.register(store, np.random.default_rng(seed))
    history = train_prosody(predictor, store, bundle.train, bundle.dev,
                            bundle.cues, seed=seed)
    return predictor, store, history


def compute_innovations(predictor: ProsodyPredictor, store: nn.ParameterStore,
                        utts: list[Utterance], cues) -> dict[str, np.ndarray]:
    return {u.id: predictor.innovations(u, cues[u.id], store) for u in utts}


# -- the 10-seed protocol --------------------------------------------------------

@dataclass
class SeedRun:
    seed: int
    dev_f1: float
    test_f1: float
    best_epoch: int


@dataclass
class SeedSummary:
    runs: list[SeedRun]

    def _vals(self, attr: str) -> list[float]:
        return [getattr(r, attr) for r in self.runs]

    @property
    def mean_dev(self) -> float:
        return float(np.mean(self._vals("dev_f1")))

    @property
    def best_dev(self) -> float:
        return float(np.max(self._vals("dev_f1")))

    @property
    def mean_test(self) -> float:
        return float(np.mean(self._vals("test_f1")))

    @property
    def best_test(self) -> float:
        return float(np.max(self._vals("test_f1")))


def make_provider(bundle: DataBundle, fusion: FusionConfig,
                  frozen: tuple[ProsodyPredictor, nn.ParameterStore] | None = None,
                  innovations: dict[str, np.ndarray] | None = None) -> FeatureProvider:
    return FeatureProvider(cues=bundle.cues, frozen_predictor=frozen,
                           innovations=innovations)


def train_single_seed(bundle: DataBundle, fusion: FusionConfig,
                      tagger_cfg: TaggerConfig, predictor_cfg: PredictorConfig,
                      seed: int, provider: FeatureProvider | None = None
                      ) -> tuple[TaggerModel, SeedRun]:
    model = TaggerModel(fusion, tagger_cfg, bundle.vocabs, bundle.embeddings,
                        bundle.standardizer, predictor_config=predictor_cfg)
    provider = provider or make_provider(bundle, fusion)
    result = train_tagger(model, bundle.train, bundle.dev, provider, seed=seed)
    test_preds = model.decode_corpus(bundle.test, provider)
    test_f1 = evaluate(test_preds, [u.bio_labels() for u in bundle.test]).f1
    return model, SeedRun(seed=seed, dev_f1=result.best_dev_f1,
                          test_f1=test_f1, best_epoch=result.best_epoch)


def _seed_task(args):
    bundle, fusion, tagger_cfg, predictor_cfg, seed, innovations = args
    provider = make_provider(bundle, fusion, innovations=innovations)
    _, run = train_single_seed(bundle, fusion, tagger_cfg, predictor_cfg, seed,
                               provider=provider)
    return run


def run_seeds(bundle: DataBundle, fusion: FusionConfig, tagger_cfg: TaggerConfig,
              predictor_cfg: PredictorConfig, seeds: list[int],
              frozen: tuple[ProsodyPredictor, nn.ParameterStore] | None = None,
              jobs: int = 1) -> SeedSummary:
    """Train one model per seed and summarize mean/best F1.

    For disjoint configs the frozen predictor's innovations are computed
    once up front so every seed (and every worker) sees identical features.
    """
    innovations = None
    if fusion.uses_innovations and fusion.training == "disjoint":
        if frozen is None:
            raise ValueError("disjoint training requires a pretrained prosody model")
        innovations = compute_innovations(frozen[0], frozen[1],
                                          bundle.all_utterances, bundle.cues)
    tasks = [(bundle, fusion, tagger_cfg, predictor_cfg, s, innovations) for s in seeds]
    if jobs > 1 and len(seeds) > 1:
        with get_context("spawn").Pool(min(jobs, len(seeds))) as pool:
            runs = pool.map(_seed_task, tasks)
    else:
        runs = [_seed_task(t) for t in tasks]
    return SeedSummary(runs=sorted(runs, key=lambda r: r.seed))


# -- manifests ---------------------------------------------------------------------

def flatten_manifest(values: dict) -> list[str]:
    lines = []
    for key in sorted(values):
        val = values[key]
        if isinstance(val, float):
            val = f"{val:.6f}"
        elif isinstance(val, (list, tuple)):
            val = ",".join(str(v) for v in val)
        lines.append(f"{key}={val}")
    return lines


def write_manifest(path: str | Path, values: dict) -> None:
    Path(path).write_text("\n".join(flatten_manifest(values)) + "\n", encoding="utf-8")


def seed_summary_manifest(summary: SeedSummary) -> dict:
    out = {
        "metrics.dev.mean_f1": summary.mean_dev,
        "metrics.dev.best_f1": summary.best_dev,
        "metrics.test.mean_f1": summary.mean_test,
        "metrics.test.best_f1": summary.best_test,
        "seeds": [r.seed for r in summary.runs],
    }
    for run in summary.runs:
        out[f"seed.{run.seed}.dev_f1"] = run.dev_f1
        out[f"seed.{run.seed}.test_f1"] = run.test_f1
        out[f"seed.{run.seed}.best_epoch"] = run.best_epoch
    return out
