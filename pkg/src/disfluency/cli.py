"""Command-line pipeline driver.

Commands compose through TSV files: `synth` (or external data) produces a
corpus directory, `features` turns audio/frames into cue vectors,
`train-prosody` fits the cue predictor, `innovate` emits z-score features,
`train-tagger` runs the multi-seed tagger protocol, `tune-alpha` picks the
late-fusion interpolation weight, `eval` scores a prediction file and
`analyze` writes the diagnostic reports. Every command writes a manifest
capturing its effective config, seeds and input hashes.
"""

from __future__ import annotations

import argparse
import sys
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from .analysis import breakdown, innovation_histogram, model_diff, render_breakdown, write_histogram
from .config import ConfigError, Settings, load_config, parse_seed_list
from .corpus.io import apply_alignments, read_alignments, read_transcripts
from .corpus.synth import SynthConfig, synth_generate
from .corpus.types import Utterance
from .dsp import compute_frame_features, read_frame_features, read_wav
from .experiments import (
    compute_innovations,
    load_corpus_dir,
    make_provider,
    pretrain_prosody,
    run_seeds,
    seed_summary_manifest,
    sha256_file,
    write_corpus_dir,
    write_manifest,
)
from .features import assemble_cues, read_cues, write_cues
from .predictor import PredictorConfig, ProsodyPredictor
from .tagger import (
    FusionConfig,
    TaggerConfig,
    TaggerModel,
    evaluate,
    read_predictions,
    tune_alpha,
    write_predictions,
)


def _settings(args: argparse.Namespace, prefix: str) -> Settings:
    file_values = load_config(args.config) if getattr(args, "config", None) else {}
    overrides = {
        f"{prefix}.{k}": v
        for k, v in vars(args).items()
        if k not in ("command", "config", "func") and v is not None
    }
    return Settings(file_values, overrides)


def _require_exists(*paths: Path) -> None:
    for p in paths:
        if p is not None and not Path(p).exists():
            raise FileNotFoundError(f"input not found: {p}")


# -- synth ---------------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = _settings(args, "synth")
    seed = cfg.get("synth.seed", 0, int)
    out = cfg.get_path("synth.out", required=True)
    synth_cfg = SynthConfig(
        n_sentences=cfg.get("synth.sentences", 1000, int),
        disfluency_rate=cfg.get("synth.disfluency_rate", 0.45, float),
        delta=cfg.get("synth.delta", 2.0, float),
        fluent_repetition_rate=cfg.get("synth.fluent_repetition_rate", 0.12, float),
        filled_pause_rate=cfg.get("synth.filled_pause_rate", 0.08, float),
        interregnum_rate=cfg.get("synth.interregnum_rate", 0.25, float),
        embedding_dim=cfg.get("synth.embedding_dim", 16, int),
        population_seed=cfg.get("synth.population_seed", 20240601, int),
    )
    corpus = synth_generate(seed, synth_cfg)
    paths = write_corpus_dir(corpus, out)
    manifest = dict(cfg.effective)
    manifest["command"] = "synth"
    manifest["outputs.n_utterances"] = len(corpus.utterances)
    for name, p in paths.items():
        manifest[f"hash.{name}"] = sha256_file(p)
    write_manifest(Path(out) / "synth.manifest", manifest)
    print(f"wrote {len(corpus.utterances)} utterances to {out}")
    return 0


# -- features ---------------------------------------------------------------------

def _features_one(task):
    utt, audio_dir, frames_dir = task
    if audio_dir is not None:
        frames = compute_frame_features(read_wav(Path(audio_dir) / f"{utt.id}.wav"))
    else:
        frames = read_frame_features(Path(frames_dir) / f"{utt.id}.tsv")
    cues, clamped = assemble_cues(utt, frames)
    return utt.id, cues, clamped


def cmd_features(args) -> int:
    cfg = _settings(args, "features")
    transcripts = cfg.get_path("features.transcripts", required=True)
    alignments = cfg.get_path("features.alignments", required=True)
    audio_dir = cfg.get_path("features.audio_dir")
    frames_dir = cfg.get_path("features.frames_dir")
    out = cfg.get_path("features.out", required=True)
    jobs = cfg.get("features.jobs", 1, int)
    if (audio_dir is None) == (frames_dir is None):
        raise ConfigError("exactly one of --audio-dir / --frames-dir is required")
    _require_exists(transcripts, alignments, audio_dir or frames_dir)

    utts = read_transcripts(transcripts)
    apply_alignments(utts, read_alignments(alignments))
    tasks = [(u, audio_dir, frames_dir) for u in utts]
    if jobs > 1:
        with get_context("spawn").Pool(jobs) as pool:
            results = pool.map(_features_one, tasks)
    else:
        results = [_features_one(t) for t in tasks]
    cues = {utt_id: mat for utt_id, mat, _ in results}
    clamped = sum(c for _, _, c in results)
    if clamped:
        print(f"warning: clamped {clamped} negative pauses to 0", file=sys.stderr)
    write_cues(cues, out)
    manifest = dict(cfg.effective)
    manifest.update({
        "command": "features",
        "hash.transcripts": sha256_file(transcripts),
        "hash.alignments": sha256_file(alignments),
        "hash.out": sha256_file(out),
        "outputs.clamped_pauses": clamped,
    })
    write_manifest(Path(str(out) + ".manifest"), manifest)
    print(f"wrote cue vectors for {len(cues)} utterances to {out}")
    return 0


# -- shared model-config plumbing ----------------------------------------------------

def _predictor_config(cfg: Settings) -> PredictorConfig:
    return PredictorConfig(
        pos_dim=cfg.get("prosody.pos_dim", 16, int),
        identity_dim=cfg.get("prosody.identity_dim", 8, int),
        phone_dim=cfg.get("prosody.phone_dim", 32, int),
        stress_dim=cfg.get("prosody.stress_dim", 4, int),
        word_hidden=cfg.get("prosody.word_hidden", 128, int),
        phone_hidden=cfg.get("prosody.phone_hidden", 64, int),
        dropout=cfg.get("prosody.dropout", 0.3, float),
        learning_rate=cfg.get("prosody.learning_rate", 1e-3, float),
        epochs=cfg.get("prosody.epochs", 20, int),
        patience=cfg.get("prosody.patience", 3, int),
    )


def _tagger_config(cfg: Settings) -> TaggerConfig:
    return TaggerConfig(
        hidden=cfg.get("tagger.hidden", 128, int),
        proj_dim=cfg.get("tagger.proj_dim", 128, int),
        dropout=cfg.get("tagger.dropout", 0.3, float),
        learning_rate=cfg.get("tagger.learning_rate", 1e-3, float),
        epochs=cfg.get("tagger.epochs", 20, int),
        patience=cfg.get("tagger.patience", 3, int),
    )


def _load_bundle(cfg: Settings, section: str):
    corpus_dir = cfg.get_path(f"{section}.corpus", required=True)
    _require_exists(corpus_dir)
    return load_corpus_dir(
        corpus_dir,
        dev_frac=cfg.get(f"{section}.dev_frac", 0.15, float),
        test_frac=cfg.get(f"{section}.test_frac", 0.15, float),
    )


# -- train-prosody ----------------------------------------------------------------------

def cmd_train_prosody(args) -> int:
    cfg = _settings(args, "prosody")
    bundle = _load_bundle(cfg, "prosody")
    out = cfg.get_path("prosody.out", required=True)
    seed = cfg.get("prosody.seed", 0, int)
    predictor, store, history = pretrain_prosody(bundle, _predictor_config(cfg), seed)
    predictor.save(store, out)
    manifest = dict(cfg.effective)
    manifest.update({
        "command": "train-prosody",
        "metrics.dev_nll.best": min(history.dev_nll),
        "metrics.dev_nll.final": history.dev_nll[-1],
        "metrics.best_epoch": history.best_epoch,
        "hash.model": sha256_file(out),
        **{f"hash.{k}": v for k, v in bundle.source_hashes.items()},
    })
    write_manifest(Path(str(out) + ".manifest"), manifest)
    print(f"prosody model saved to {out} (best dev NLL {min(history.dev_nll):.4f})")
    return 0


# -- innovate ------------------------------------------------------------------------------

def cmd_innovate(args) -> int:
    cfg = _settings(args, "innovate")
    model_path = cfg.get_path("innovate.model", required=True)
    out = cfg.get_path("innovate.out", required=True)
    _require_exists(model_path)
    bundle = _load_bundle(cfg, "innovate")
    predictor, store = ProsodyPredictor.load(model_path)
    innovations = compute_innovations(predictor, store, bundle.all_utterances, bundle.cues)
    write_cues(innovations, out)
    manifest = dict(cfg.effective)
    manifest.update({
        "command": "innovate",
        "hash.model": sha256_file(model_path),
        "hash.out": sha256_file(out),
        **{f"hash.{k}": v for k, v in bundle.source_hashes.items()},
    })
    write_manifest(Path(str(out) + ".manifest"), manifest)
    print(f"wrote innovations for {len(innovations)} utterances to {out}")
    return 0


# -- train-tagger ----------------------------------------------------------------------------

def cmd_train_tagger(args) -> int:
    cfg = _settings(args, "tagger")
    bundle = _load_bundle(cfg, "tagger")
    out_dir = cfg.get_path("tagger.out", required=True)
    out_dir.mkdir(parents=True, exist_ok=True)
    fusion = FusionConfig(
        features=tuple(cfg.get("tagger.features", ["text"], list)),
        mode=cfg.get("tagger.mode", "single"),
        alpha=cfg.get("tagger.alpha", 0.5, float),
        training=cfg.get("tagger.training", "joint"),
        prosody_loss_weight=cfg.get("tagger.prosody_loss_weight", 1.0, float),
    )
    seeds = parse_seed_list(cfg.get("tagger.seeds", "10"))
    jobs = cfg.get("tagger.jobs", 1, int)
    predictor_cfg = _predictor_config(cfg)
    tagger_cfg = _tagger_config(cfg)

    frozen = None
    prosody_model = cfg.get_path("tagger.prosody_model")
    if fusion.uses_innovations and fusion.training == "disjoint":
        if prosody_model is None:
            raise ConfigError("disjoint training requires --prosody-model")
        _require_exists(prosody_model)
        frozen = ProsodyPredictor.load(prosody_model)

    summary = run_seeds(bundle, fusion, tagger_cfg, predictor_cfg, seeds,
                        frozen=frozen, jobs=jobs)

    # Re-train the best seed's model in-process to persist model + predictions.
    best_run = max(summary.runs, key=lambda r: (r.dev_f1, -r.seed))
    provider = make_provider(bundle, fusion, frozen=frozen)
    from .experiments import train_single_seed

    model, _ = train_single_seed(bundle, fusion, tagger_cfg, predictor_cfg,
                                 best_run.seed, provider=provider)
    model_path = out_dir / f"tagger-seed{best_run.seed}.npz"
    model.save(model_path)
    for split_name, utts in (("dev", bundle.dev), ("test", bundle.test)):
        preds = model.decode_corpus(utts, provider)
        write_predictions(utts, preds, out_dir / f"predictions-{split_name}.tsv")

    manifest = dict(cfg.effective)
    manifest.update(seed_summary_manifest(summary))
    manifest.update({
        "command": "train-tagger",
        "best_seed": best_run.seed,
        "alpha": fusion.alpha,
        "hash.model": sha256_file(model_path),
        **{f"hash.{k}": v for k, v in bundle.source_hashes.items()},
    })
    write_manifest(out_dir / "train-tagger.manifest", manifest)
    print(f"dev F1 mean={summary.mean_dev:.4f} best={summary.best_dev:.4f}  "
          f"test F1 mean={summary.mean_test:.4f} best={summary.best_test:.4f}")
    return 0


# -- tune-alpha ------------------------------------------------------------------------

def cmd_tune_alpha(args) -> int:
    cfg = _settings(args, "alpha")
    bundle = _load_bundle(cfg, "alpha")
    model_paths = [Path(p) for p in cfg.get("alpha.models", None, list) or []]
    if not model_paths:
        raise ConfigError("tune-alpha needs at least one --models path")
    _require_exists(*model_paths)
    grid = [float(x) for x in cfg.get("alpha.grid", [f"{0.1 * k:.1f}" for k in range(1, 10)], list)]
    models = [TaggerModel.load(p) for p in model_paths]
    provider = make_provider(bundle, models[0].fusion)
    best, scores = tune_alpha(models, bundle.dev, provider, grid=grid)
    out = cfg.get_path("alpha.out")
    manifest = dict(cfg.effective)
    manifest.update({
        "command": "tune-alpha",
        "alpha.best": best,
        **{f"alpha.f1.{a}": f for a, f in scores.items()},
        **{f"hash.model.{i}": sha256_file(p) for i, p in enumerate(model_paths)},
        **{f"hash.{k}": v for k, v in bundle.source_hashes.items()},
    })
    if out is not None:
        write_manifest(out, manifest)
    print(f"best alpha: {best}")
    for a in sorted(scores):
        print(f"  alpha={a:.1f} dev_f1={scores[a]:.4f}")
    return 0


# -- eval -----------------------------------------------------------------------------------

def cmd_eval(args) -> int:
    cfg = _settings(args, "eval")
    pred_path = cfg.get_path("eval.predictions", required=True)
    _require_exists(pred_path)
    gold, pred = read_predictions(pred_path)
    ids = sorted(gold)
    metrics = evaluate([pred[i] for i in ids], [gold[i] for i in ids])
    print(f"P={metrics.precision:.4f} R={metrics.recall:.4f} F1={metrics.f1:.4f}")
    return 0


# -- analyze -----------------------------------------------------------------------------------

HISTOGRAM_CUES = {"pause": 0, "duration": 1, "log_energy_total": 5}


def cmd_analyze(args) -> int:
    cfg = _settings(args, "analyze")
    bundle_dir = cfg.get_path("analyze.corpus", required=True)
    pred_path = cfg.get_path("analyze.predictions", required=True)
    out_dir = cfg.get_path("analyze.out", required=True)
    _require_exists(bundle_dir, pred_path)
    out_dir.mkdir(parents=True, exist_ok=True)

    utts = read_transcripts(Path(bundle_dir) / "transcripts.tsv")
    by_id: dict[str, Utterance] = {u.id: u for u in utts}
    gold, pred = read_predictions(pred_path)
    covered = [by_id[i] for i in sorted(gold) if i in by_id]
    preds = [pred[u.id] for u in covered]

    report = breakdown(preds, covered)
    (out_dir / "breakdown.txt").write_text(render_breakdown(report) + "\n", encoding="utf-8")

    manifest = dict(cfg.effective)
    manifest.update({
        "command": "analyze",
        "hash.predictions": sha256_file(pred_path),
        "fluent_repetition_fp_rate": report.fluent_repetition_fp_rate or 0.0,
    })

    innovations_path = cfg.get_path("analyze.innovations")
    if innovations_path is not None:
        _require_exists(innovations_path)
        innovations = read_cues(innovations_path)
        with_z = [u for u in covered if u.id in innovations]
        for name, cue in HISTOGRAM_CUES.items():
            hist = innovation_histogram(innovations, with_z, cue)
            write_histogram(hist, out_dir / f"hist_{name}.tsv")
            manifest[f"hist.{name}.pre_ip_mean"] = hist.pre_ip_mean
            manifest[f"hist.{name}.fluent_mean"] = hist.fluent_mean

    pred_b_path = cfg.get_path("analyze.predictions_b")
    if pred_b_path is not None:
        _require_exists(pred_b_path)
        _, pred_b = read_predictions(pred_b_path)
        diff = model_diff({u.id: pred[u.id] for u in covered},
                          {u.id: pred_b[u.id] for u in covered}, covered)
        lines = [f"a_better\t{uid}\t{diff.details[uid][0]}\t{diff.details[uid][1]}"
                 for uid in diff.a_better]
        lines += [f"b_better\t{uid}\t{diff.details[uid][0]}\t{diff.details[uid][1]}"
                  for uid in diff.b_better]
        (out_dir / "model_diff.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        manifest["diff.a_better"] = len(diff.a_better)
        manifest["diff.b_better"] = len(diff.b_better)

    write_manifest(out_dir / "analyze.manifest", manifest)
    print(f"analysis written to {out_dir}")
    return 0


# -- parser -------------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="disfl",
        description="Disfluency detection pipeline: synthesis, features, "
                    "prosody prediction, tagging and analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="flat key=value config file")
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "generate a deterministic synthetic corpus")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output corpus directory")
    p.add_argument("--sentences", type=int, help="number of utterances")
    p.add_argument("--disfluency-rate", dest="disfluency_rate", type=float)
    p.add_argument("--delta", type=float, help="pre-interruption cue shift in sigmas")

    p = add("features", cmd_features, "compute per-word cue vectors")
    p.add_argument("--transcripts")
    p.add_argument("--alignments")
    p.add_argument("--audio-dir", dest="audio_dir", help="directory of <utt_id>.wav files")
    p.add_argument("--frames-dir", dest="frames_dir", help="directory of <utt_id>.tsv frame files")
    p.add_argument("--out", help="output cue TSV")
    p.add_argument("--jobs", type=int)

    p = add("train-prosody", cmd_train_prosody, "train the prosodic cue predictor")
    p.add_argument("--corpus", help="corpus directory")
    p.add_argument("--out", help="output model file")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--word-hidden", dest="word_hidden", type=int)
    p.add_argument("--phone-hidden", dest="phone_hidden", type=int)
    p.add_argument("--dropout", type=float)

    p = add("innovate", cmd_innovate, "emit innovation z-scores for a corpus")
    p.add_argument("--model", help="trained prosody model")
    p.add_argument("--corpus")
    p.add_argument("--out", help="output innovations TSV")

    p = add("train-tagger", cmd_train_tagger, "train disfluency taggers over seeds")
    p.add_argument("--corpus")
    p.add_argument("--out", help="output directory")
    p.add_argument("--features", help="comma list from text,raw,innovations")
    p.add_argument("--mode", choices=["single", "early", "late"])
    p.add_argument("--training", choices=["joint", "disjoint"])
    p.add_argument("--alpha", type=float)
    p.add_argument("--prosody-loss-weight", dest="prosody_loss_weight", type=float)
    p.add_argument("--seeds", help="count ('10') or comma list ('3,5,8')")
    p.add_argument("--prosody-model", dest="prosody_model",
                   help="frozen prosody model (disjoint training)")
    p.add_argument("--hidden", type=int)
    p.add_argument("--proj-dim", dest="proj_dim", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--jobs", type=int)

    p = add("tune-alpha", cmd_tune_alpha, "grid-search the late-fusion weight")
    p.add_argument("--corpus")
    p.add_argument("--models", help="comma list of trained late-fusion models")
    p.add_argument("--grid", help="comma list of alpha values")
    p.add_argument("--out", help="manifest output path")

    p = add("eval", cmd_eval, "score a prediction file")
    p.add_argument("--predictions", help="TSV utt_id token_index gold pred")

    p = add("analyze", cmd_analyze, "category breakdowns, histograms, model diff")
    p.add_argument("--corpus")
    p.add_argument("--predictions")
    p.add_argument("--predictions-b", dest="predictions_b")
    p.add_argument("--innovations")
    p.add_argument("--out")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
