"""Command-line pipeline: codebook, train, predict, eval, synth, dump-model.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
Configuration comes from defaults, then an optional flat key=value config
file, then command-line flags (highest precedence).  The seed is mandatory
for every randomized command; nothing ever seeds from the clock.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from contextlib import contextmanager
from dataclasses import dataclass

from . import __version__
from .atoms import INIT_METHODS, mine_atoms, response_matrix
from .encode import encode_video, format_representation
from .errors import CrowdAtomsError, DataError, NumericError
from .evaluate import LabeledScore, report, roc_auc, roc_csv
from .ingest import (
    CHANNELS,
    ClipInfo,
    build_codebook,
    check_frames_in_range,
    format_float,
    index_descriptors,
    load_descriptors,
    load_manifest,
    quantize_clip,
    read_codebook_file,
    segment_clip,
    write_codebook_file,
)
from .model_io import Model, ModelConfig, load_model, model_to_text, save_model, write_atomic
from .phrases import mine_phrases
from .rng import derive_seed
from .similarity import compute_normalizers
from .svm import SvmParams, train_multiclass
from .synth import LAYOUTS, SynthSpec, generate

DEFAULTS = {
    "k": 3,
    "codebook_size": 64,
    "atoms": 8,
    "top": None,  # resolved to ceil(train videos / 2)
    "window": 1,
    "max_units": 3,
    "budget": 10,
    "epsilon": 0.1,
    "c_reg": 1.0,
    "seed": None,
    "max_iters": 20,
    "svm_tol": 1e-6,
    "svm_max_passes": 10_000,
    "l2": 0,
    "normal_label": "normal",
    "init": "kmeans",
}

_INT_KEYS = {"k", "codebook_size", "atoms", "top", "window", "max_units", "budget",
             "seed", "max_iters", "svm_max_passes", "l2"}
_FLOAT_KEYS = {"epsilon", "c_reg", "svm_tol"}


@dataclass
class PipelineConfig:
    k: int
    codebook_size: int
    atoms: int
    top: int | None
    window: int
    max_units: int
    budget: int
    epsilon: float
    c_reg: float
    seed: int
    max_iters: int
    svm_tol: float
    svm_max_passes: int
    l2: int
    normal_label: str
    init: str


def _read_config_file(path: str) -> dict:
    values = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if not sep or key not in DEFAULTS:
                raise DataError(f"{path}:{lineno}: unknown config key {key!r}")
            try:
                if key in _INT_KEYS:
                    values[key] = int(value)
                elif key in _FLOAT_KEYS:
                    values[key] = float(value)
                else:
                    values[key] = value
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad value for {key}") from exc
    return values


def resolve_config(args: argparse.Namespace, require_seed: bool) -> PipelineConfig:
    """defaults < config file < explicit CLI flags."""
    values = dict(DEFAULTS)
    if getattr(args, "config", None):
        values.update(_read_config_file(args.config))
    for key in DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if require_seed and values["seed"] is None:
        raise UsageError("a seed is required (--seed or config file); no clock seeding")
    if values["seed"] is None:
        values["seed"] = 0
    cfg = PipelineConfig(**values)
    for name in ("k", "codebook_size", "atoms", "max_units", "budget", "max_iters"):
        if getattr(cfg, name) < 1:
            raise UsageError(f"{name} must be >= 1")
    if cfg.top is not None and cfg.top < 1:
        raise UsageError("top must be >= 1")
    if cfg.window < 0:
        raise UsageError("window must be >= 0")
    if cfg.epsilon < 0:
        raise UsageError("epsilon must be >= 0")
    if cfg.c_reg <= 0:
        raise UsageError("c-reg must be > 0")
    if cfg.init not in INIT_METHODS:
        raise UsageError(f"init must be one of {INIT_METHODS}")
    return cfg


class UsageError(Exception):
    pass


@contextmanager
def _stage(name: str):
    """Tag pipeline errors with the stage that raised them."""
    try:
        yield
    except DataError as exc:
        raise DataError(f"stage {name}: {exc}") from exc
    except NumericError as exc:
        raise NumericError(f"stage {name}: {exc}") from exc


def _select_clips(clips: list[ClipInfo], split: str | None) -> list[ClipInfo]:
    if split is None:
        return clips
    if split == "train":
        # rows without a split column count as training data
        return [c for c in clips if c.split in (None, "train")]
    return [c for c in clips if c.split == split]


def _codebook_path(directory: str, channel: str) -> str:
    return os.path.join(directory, f"codebook_{channel}.txt")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_codebook(args: argparse.Namespace) -> int:
    cfg = resolve_config(args, require_seed=True)
    with _stage("descriptors"):
        records = load_descriptors(args.descriptors)
    if args.manifest:
        with _stage("manifest"):
            clips = load_manifest(args.manifest)
            check_frames_in_range(records, clips)
            selected = {c.video_id for c in _select_clips(clips, args.split)}
            records = [r for r in records if r.video_id in selected]
    os.makedirs(args.out, exist_ok=True)
    with _stage("codebook"):
        for channel in CHANNELS:
            seed = derive_seed(cfg.seed, f"codebook:{channel}")
            cb = build_codebook(records, channel, cfg.codebook_size, seed)
            write_codebook_file(cb, _codebook_path(args.out, channel))
    print(f"wrote 4 codebooks (K={cfg.codebook_size}) to {args.out}")
    return 0


def _quantize_all(clips, records, codebooks, k):
    """Segment and quantize every clip; returns id -> SegmentHistogram list."""
    index = index_descriptors(records)
    out = {}
    for clip in clips:
        segments = segment_clip(clip.clip_length, k, clip.video_id)
        out[clip.video_id] = quantize_clip(segments, index.get(clip.video_id, {}), codebooks)
    return out


def cmd_train(args: argparse.Namespace) -> int:
    cfg = resolve_config(args, require_seed=True)
    with _stage("manifest"):
        clips = load_manifest(args.manifest)
        train_clips = _select_clips(clips, "train")
        if not train_clips:
            raise DataError("no training clips in manifest")
    with _stage("descriptors"):
        records = load_descriptors(args.descriptors)
        check_frames_in_range(records, clips)
        train_ids = {c.video_id for c in train_clips}
        records = [r for r in records if r.video_id in train_ids]
    with _stage("codebooks"):
        codebooks = {}
        for channel in CHANNELS:
            path = _codebook_path(args.codebooks, channel)
            if not os.path.exists(path):
                raise DataError(f"missing codebook file {path}")
            codebooks[channel] = read_codebook_file(path)
    with _stage("quantize"):
        by_video = _quantize_all(train_clips, records, codebooks, cfg.k)
        all_segments = [h for clip in train_clips for h in by_video[clip.video_id]]
    with _stage("normalizers"):
        norms = compute_normalizers(all_segments, seed=derive_seed(cfg.seed, "normalizers"))
    with _stage("atoms"):
        svm_params = SvmParams(
            c_reg=cfg.c_reg, tol=cfg.svm_tol, max_passes=cfg.svm_max_passes,
            seed=derive_seed(cfg.seed, "atoms"),
        )
        atom_set, mining_report = mine_atoms(
            all_segments, cfg.atoms, norms, svm_params,
            max_iters=cfg.max_iters, seed=derive_seed(cfg.seed, "init"), init=cfg.init,
        )
    with _stage("phrases"):
        matrices = {c.video_id: response_matrix(atom_set, by_video[c.video_id])
                    for c in train_clips}
        labels = {c.video_id: c.label for c in train_clips}
        top = cfg.top if cfg.top is not None else math.ceil(len(train_clips) / 2)
        if top > len(train_clips):
            raise DataError(f"top-set size {top} exceeds {len(train_clips)} training videos")
        mined = mine_phrases(
            atom_set, matrices, labels,
            per_class_budget=cfg.budget, max_units=cfg.max_units,
            t=top, window=cfg.window, n_anchors=cfg.k,
        )
    with _stage("encode"):
        phrase_list = [p for p, _ in mined]
        reps = {
            c.video_id: encode_video(by_video[c.video_id], atom_set, phrase_list, l2=bool(cfg.l2))
            for c in train_clips
        }
    with _stage("classifier"):
        data = [(reps[c.video_id].vector, c.label) for c in train_clips]
        bundle = train_multiclass(
            data, c_reg=cfg.c_reg, tol=cfg.svm_tol, max_passes=cfg.svm_max_passes,
            seed=derive_seed(cfg.seed, "classifier"),
        )
    with _stage("save"):
        model = Model(
            config=ModelConfig(
                k=cfg.k, codebook_size=cfg.codebook_size, atoms=cfg.atoms, top=top,
                window=cfg.window, max_units=cfg.max_units, budget=cfg.budget,
                epsilon=cfg.epsilon, c_reg=cfg.c_reg, seed=cfg.seed, l2=cfg.l2,
                normal_label=cfg.normal_label,
            ),
            codebooks=codebooks,
            norms=norms,
            atom_set=atom_set,
            phrases=[(p, s.dis) for p, s in mined],
            classifiers=bundle,
        )
        save_model(model, args.out)
        report_path = args.report or args.out + ".report"
        write_atomic(report_path, "".join(f"{i}\t{c}\n" for i, c in mining_report))
    print(
        f"trained model: {atom_set.num_atoms} atoms, {len(mined)} phrases, "
        f"{len(bundle.classes)} classes -> {args.out}"
    )
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    with _stage("model"):
        model = load_model(args.model)
    with _stage("manifest"):
        clips = load_manifest(args.manifest)
        clips = _select_clips(clips, args.split)
    with _stage("descriptors"):
        records = load_descriptors(args.descriptors)
        selected = {c.video_id for c in clips}
        records = [r for r in records if r.video_id in selected]
        check_frames_in_range(records, clips)
    normal = args.normal_label if args.normal_label is not None else model.config.normal_label
    lines = []
    repr_lines = []
    with _stage("predict"):
        by_video = _quantize_all(clips, records, model.codebooks, model.config.k)
        phrase_list = [p for p, _ in model.phrases]
        for clip in clips:
            rep = encode_video(
                by_video[clip.video_id], model.atom_set, phrase_list,
                l2=bool(model.config.l2),
            )
            scores = model.classifiers.scores(rep.vector)
            predicted = model.classifiers.classes[int(scores.argmax())]
            anomaly_idx = [i for i, c in enumerate(model.classifiers.classes) if c != normal]
            anomaly = float(scores[anomaly_idx].max()) if anomaly_idx else float(scores.max())
            truth = 0 if clip.label == normal else 1
            per_class = ";".join(
                f"{c}:{format_float(s)}"
                for c, s in zip(model.classifiers.classes, scores)
            )
            lines.append(
                f"{clip.video_id}\t{format_float(anomaly)}\t{truth}\t{predicted}\t{per_class}"
            )
            if args.repr_out:
                repr_lines.append(format_representation(rep))
    write_atomic(args.out, "".join(line + "\n" for line in lines))
    if args.repr_out:
        write_atomic(args.repr_out, "".join(line + "\n" for line in repr_lines))
    print(f"scored {len(lines)} clips -> {args.out}")
    return 0


def _read_scores_file(path: str) -> list[LabeledScore]:
    scores = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read scores file {path}: {exc}") from exc
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 3:
                raise DataError(f"{path}:{lineno}: expected id<TAB>score<TAB>truth")
            try:
                scores.append(LabeledScore(parts[0], float(parts[1]), int(parts[2])))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad score or truth value") from exc
    return scores


def cmd_eval(args: argparse.Namespace) -> int:
    with _stage("scores"):
        scores = _read_scores_file(args.scores)
    with _stage("roc"):
        result = roc_auc(scores)
    text = report(result, baselines=args.baselines)
    print(text)
    if args.out:
        write_atomic(args.out, text + "\n")
    if args.roc_out:
        write_atomic(args.roc_out, roc_csv(result) + "\n")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SynthSpec(
        n_classes=args.classes,
        clips_per_class=args.clips,
        k=args.k if args.k is not None else DEFAULTS["k"],
        seed=args.seed,
        halfzone=args.halfzone,
        desc_per_zone=args.desc_per_zone,
        dim=args.dim,
        feature_noise=args.feature_noise,
        label_noise=args.label_noise,
        train_fraction=args.train_fraction,
        layout=args.layout,
    )
    result = generate(spec)
    write_atomic(args.out_descriptors, "".join(line + "\n" for line in result.descriptor_lines))
    write_atomic(args.out_manifest, "".join(line + "\n" for line in result.manifest_lines))
    print(f"{spec.n_classes} classes x {spec.clips_per_class} clips, "
          f"clip length {result.clip_length}, {result.n_slots} motif slots")
    for cls in result.classes:
        print(f"  {cls}: motifs {','.join(map(str, result.sequences[cls]))}")
    return 0


def cmd_dump_model(args: argparse.Namespace) -> int:
    with _stage("model"):
        model = load_model(args.model)
    cfg = model.config
    print(f"model: {args.model}")
    print(f"  k={cfg.k} K={cfg.codebook_size} atoms={cfg.atoms} top={cfg.top} "
          f"window={cfg.window} max_units={cfg.max_units} budget={cfg.budget}")
    print(f"  epsilon={cfg.epsilon} c_reg={cfg.c_reg} seed={cfg.seed} l2={cfg.l2} "
          f"normal_label={cfg.normal_label}")
    print(f"  normalizers: " + " ".join(
        f"{ch}={model.norms.m[ch]:.6g}" for ch in CHANNELS
    ) + (" (approximate)" if model.norms.approx else ""))
    print(f"  atoms: {model.atom_set.num_atoms}, classifier dim "
          f"{len(model.atom_set.atoms[0].classifier.w) if model.atom_set.atoms else 0}")
    print(f"  classes: {','.join(model.classifiers.classes)}")
    print("phrases:")
    for phrase, dis_value in model.phrases:
        print(f"{phrase.class_hint}\t{format_float(dis_value)}\t{phrase.encode()}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--k", type=int, help=f"segments per clip (default {DEFAULTS['k']})")
    p.add_argument("--codebook-size", dest="codebook_size", type=int,
                   help=f"codebook size per channel (default {DEFAULTS['codebook_size']})")
    p.add_argument("--atoms", type=int, help=f"atom count (default {DEFAULTS['atoms']})")
    p.add_argument("--top", type=int,
                   help="top-set size for phrase scoring (default: half the training videos)")
    p.add_argument("--window", type=int,
                   help=f"temporal window per phrase unit (default {DEFAULTS['window']})")
    p.add_argument("--max-units", dest="max_units", type=int,
                   help=f"max units per phrase (default {DEFAULTS['max_units']})")
    p.add_argument("--budget", type=int,
                   help=f"mined phrases per class (default {DEFAULTS['budget']})")
    p.add_argument("--epsilon", type=float,
                   help=f"epsilon tube half-width (default {DEFAULTS['epsilon']})")
    p.add_argument("--c-reg", dest="c_reg", type=float,
                   help=f"slack trade-off constant (default {DEFAULTS['c_reg']})")
    p.add_argument("--seed", type=int, help="root seed (mandatory; no clock seeding)")
    p.add_argument("--max-iters", dest="max_iters", type=int,
                   help=f"atom mining iteration cap (default {DEFAULTS['max_iters']})")
    p.add_argument("--svm-tol", dest="svm_tol", type=float,
                   help=f"SVM solver tolerance (default {DEFAULTS['svm_tol']})")
    p.add_argument("--svm-max-passes", dest="svm_max_passes", type=int,
                   help=f"SVM solver update budget (default {DEFAULTS['svm_max_passes']})")
    p.add_argument("--l2", type=int, choices=(0, 1),
                   help="l2-normalize video vectors after pooling (default 0)")
    p.add_argument("--normal-label", dest="normal_label",
                   help=f"class treated as non-anomalous (default {DEFAULTS['normal_label']!r})")
    p.add_argument("--init", choices=INIT_METHODS,
                   help=f"atom-cluster initialization (default {DEFAULTS['init']})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdatoms",
        description="Motion-atom / motion-phrase pipeline for crowd event "
                    "recognition and anomaly scoring.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("codebook", help="build the 4 per-channel codebooks")
    p.add_argument("--descriptors", required=True, help="descriptor file")
    p.add_argument("--manifest", help="optional manifest to restrict videos")
    p.add_argument("--split", default="train", help="split to keep when a manifest is given")
    p.add_argument("--out", required=True, help="output directory for codebook files")
    _add_config_flags(p)
    p.set_defaults(func=cmd_codebook)

    p = sub.add_parser("train", help="run the full training pipeline")
    p.add_argument("--descriptors", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--codebooks", required=True, help="directory with codebook_<CH>.txt files")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--report", help="mining report path (default: <out>.report)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score clips with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--descriptors", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default=None, help="restrict to one manifest split")
    p.add_argument("--out", required=True, help="scores file to write")
    p.add_argument("--repr-out", dest="repr_out", help="also dump encoded video vectors")
    p.add_argument("--normal-label", dest="normal_label",
                   help="override the model's non-anomalous class")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="ROC/AUC report from a scores file")
    p.add_argument("--scores", required=True, help="id<TAB>score<TAB>truth file")
    p.add_argument("--out", help="write the report here as well as stdout")
    p.add_argument("--roc-out", dest="roc_out", help="write fpr,tpr CSV")
    p.add_argument("--baselines", action="store_true",
                   help="include literature reference rows in the table")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate synthetic descriptors + manifest")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--clips", type=int, required=True, help="clips per class")
    p.add_argument("--k", type=int, help=f"segments per clip (default {DEFAULTS['k']})")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--halfzone", type=int, default=8, help="frames per half-zone")
    p.add_argument("--desc-per-zone", dest="desc_per_zone", type=int, default=6)
    p.add_argument("--dim", type=int, default=8, help="descriptor dimension")
    p.add_argument("--feature-noise", dest="feature_noise", type=float, default=0.05)
    p.add_argument("--label-noise", dest="label_noise", type=float, default=0.0)
    p.add_argument("--train-fraction", dest="train_fraction", type=float, default=0.5)
    p.add_argument("--layout", choices=LAYOUTS, default="block-rotations")
    p.add_argument("--out-descriptors", dest="out_descriptors", required=True)
    p.add_argument("--out-manifest", dest="out_manifest", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("dump-model", help="print a model summary and phrase dump")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_dump_model)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except CrowdAtomsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
