"""Versioned text model file: config, codebooks, normalizers, atoms,
phrases, and the final one-vs-rest classifiers.

Floats are serialized with their shortest round-trip representation and
every section has a fixed ordering, so save -> load -> save is
byte-identical and a reloaded model reproduces all predictions exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
import os
import tempfile

import numpy as np

from .atoms import AtomSet, MotionAtom
from .errors import DataError
from .ingest import CHANNELS, Codebook, format_float
from .phrases import MotionPhrase, PhraseUnit
from .similarity import ChannelNormalizers
from .svm import MulticlassModel, SvmModel

HEADER = "CROWDATOMS MODEL v1"

_CONFIG_FIELDS = (
    ("k", int),
    ("codebook_size", int),
    ("atoms", int),
    ("top", int),
    ("window", int),
    ("max_units", int),
    ("budget", int),
    ("epsilon", float),
    ("c_reg", float),
    ("seed", int),
    ("l2", int),
    ("normal_label", str),
)


@dataclass
class ModelConfig:
    k: int
    codebook_size: int
    atoms: int
    top: int
    window: int
    max_units: int
    budget: int
    epsilon: float
    c_reg: float
    seed: int
    l2: int = 0
    normal_label: str = "normal"


@dataclass
class Model:
    config: ModelConfig
    codebooks: dict[str, Codebook]
    norms: ChannelNormalizers
    atom_set: AtomSet
    phrases: list[tuple[MotionPhrase, float]]  # (phrase, dis at mining time)
    classifiers: MulticlassModel


def write_atomic(path: str, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _svm_lines(model: SvmModel) -> list[str]:
    return [
        f"SVM v1 {model.mode} {len(model.w)} {format_float(model.epsilon)} "
        f"{format_float(model.c_reg)}",
        ",".join(format_float(v) for v in model.w),
        format_float(model.b),
    ]


def model_to_text(model: Model) -> str:
    lines = [HEADER]

    lines.append("SECTION config")
    cfg = model.config
    for name, kind in _CONFIG_FIELDS:
        value = getattr(cfg, name)
        lines.append(f"{name}={format_float(value) if kind is float else value}")
    lines.append("END")

    lines.append("SECTION codebooks")
    for channel in CHANNELS:
        cb = model.codebooks[channel]
        lines.append(f"CODEBOOK v1 {cb.channel} {cb.size} {cb.dim}")
        for row in cb.centroids:
            lines.append(",".join(format_float(v) for v in row))
    lines.append("END")

    lines.append("SECTION normalizers")
    lines.append(f"approx={1 if model.norms.approx else 0}")
    for channel in CHANNELS:
        lines.append(f"{channel}={format_float(model.norms.m[channel])}")
    lines.append("END")

    lines.append("SECTION atoms")
    lines.append(f"count={model.atom_set.num_atoms}")
    for atom in model.atom_set.atoms:
        lines.append(f"ATOM {atom.atom_id}")
        lines.extend(_svm_lines(atom.classifier))
    lines.append("END")

    lines.append("SECTION phrases")
    lines.append(f"count={len(model.phrases)}")
    for phrase, dis_value in model.phrases:
        units = ";".join(f"{u.atom_id}:{u.anchor}:{u.window}" for u in phrase.units)
        lines.append(f"PHRASE {phrase.class_hint} {format_float(dis_value)} {units}")
    lines.append("END")

    lines.append("SECTION classifiers")
    lines.append(f"count={len(model.classifiers.classes)}")
    for cls, clf in zip(model.classifiers.classes, model.classifiers.models):
        lines.append(f"CLASS {cls}")
        lines.extend(_svm_lines(clf))
    lines.append("END")

    return "\n".join(lines) + "\n"


def save_model(model: Model, path: str) -> None:
    write_atomic(path, model_to_text(model))


class _Reader:
    """Line cursor that reports 1-based line numbers in parse errors."""

    def __init__(self, lines: list[str]):
        self.lines = lines
        self.pos = 0

    def error(self, message: str) -> DataError:
        return DataError(f"model parse error at line {self.pos}: {message}")

    def next(self) -> str:
        if self.pos >= len(self.lines):
            self.pos += 1
            raise self.error("unexpected end of file")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def expect(self, literal: str) -> None:
        line = self.next()
        if line != literal:
            raise self.error(f"expected {literal!r}, got {line!r}")


def _parse_count(reader: _Reader) -> int:
    line = reader.next()
    if not line.startswith("count="):
        raise reader.error("expected count=...")
    try:
        return int(line.partition("=")[2])
    except ValueError:
        raise reader.error("bad count") from None


def _parse_floats(reader: _Reader, text: str, expected: int | None = None) -> np.ndarray:
    try:
        values = np.array([float(v) for v in text.split(",")], dtype=np.float64)
    except ValueError:
        raise reader.error("bad float list") from None
    if expected is not None and values.size != expected:
        raise reader.error(f"expected {expected} values, got {values.size}")
    return values


def _read_svm(reader: _Reader) -> SvmModel:
    head = reader.next().split(" ")
    if len(head) != 6 or head[0] != "SVM" or head[1] != "v1":
        raise reader.error("bad SVM header")
    mode = head[2]
    if mode not in ("regression", "classification"):
        raise reader.error(f"unknown SVM mode {mode!r}")
    try:
        dim = int(head[3])
        epsilon = float(head[4])
        c_reg = float(head[5])
    except ValueError:
        raise reader.error("bad SVM header numbers") from None
    w = _parse_floats(reader, reader.next(), dim)
    try:
        b = float(reader.next())
    except ValueError:
        raise reader.error("bad SVM bias") from None
    return SvmModel(w=w, b=b, epsilon=epsilon, c_reg=c_reg, mode=mode)


def load_model(path: str) -> Model:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from exc
    reader = _Reader(lines)
    reader.expect(HEADER)

    reader.expect("SECTION config")
    values: dict[str, object] = {}
    for name, kind in _CONFIG_FIELDS:
        line = reader.next()
        key, sep, raw = line.partition("=")
        if not sep or key != name:
            raise reader.error(f"expected {name}=...")
        try:
            values[name] = kind(raw)
        except ValueError:
            raise reader.error(f"bad value for {name}") from None
    reader.expect("END")
    config = ModelConfig(**values)  # type: ignore[arg-type]

    reader.expect("SECTION codebooks")
    codebooks: dict[str, Codebook] = {}
    for channel in CHANNELS:
        head = reader.next().split(" ")
        if (
            len(head) != 5
            or head[0] != "CODEBOOK"
            or head[1] != "v1"
            or head[2] != channel
        ):
            raise reader.error(f"expected CODEBOOK v1 {channel} header")
        try:
            size, dim = int(head[3]), int(head[4])
        except ValueError:
            raise reader.error("bad codebook size/dim") from None
        rows = [_parse_floats(reader, reader.next(), dim) for _ in range(size)]
        codebooks[channel] = Codebook(channel, np.stack(rows))
    reader.expect("END")

    reader.expect("SECTION normalizers")
    line = reader.next()
    if not line.startswith("approx="):
        raise reader.error("expected approx flag")
    norms = ChannelNormalizers(approx=line.partition("=")[2] == "1")
    for channel in CHANNELS:
        key, sep, raw = reader.next().partition("=")
        if not sep or key != channel:
            raise reader.error(f"expected normalizer for {channel}")
        try:
            norms.m[channel] = float(raw)
        except ValueError:
            raise reader.error("bad normalizer value") from None
    reader.expect("END")

    reader.expect("SECTION atoms")
    count = _parse_count(reader)
    atoms = []
    for atom_id in range(count):
        if reader.next() != f"ATOM {atom_id}":
            raise reader.error(f"expected ATOM {atom_id}")
        atoms.append(MotionAtom(atom_id, _read_svm(reader)))
    reader.expect("END")
    atom_set = AtomSet(atoms=atoms, norms=norms)

    reader.expect("SECTION phrases")
    count = _parse_count(reader)
    phrases: list[tuple[MotionPhrase, float]] = []
    for _ in range(count):
        parts = reader.next().split(" ")
        if len(parts) != 4 or parts[0] != "PHRASE":
            raise reader.error("bad PHRASE line")
        cls = parts[1]
        try:
            dis_value = float(parts[2])
        except ValueError:
            raise reader.error("bad phrase score") from None
        units = []
        for chunk in parts[3].split(";"):
            fields = chunk.split(":")
            if len(fields) != 3:
                raise reader.error("bad phrase unit")
            try:
                units.append(PhraseUnit(int(fields[0]), int(fields[1]), int(fields[2])))
            except ValueError:
                raise reader.error("bad phrase unit numbers") from None
        phrases.append((MotionPhrase(tuple(units), class_hint=cls), dis_value))
    reader.expect("END")

    reader.expect("SECTION classifiers")
    count = _parse_count(reader)
    classes = []
    models = []
    for _ in range(count):
        head = reader.next()
        if not head.startswith("CLASS "):
            raise reader.error("expected CLASS line")
        classes.append(head[len("CLASS ") :])
        models.append(_read_svm(reader))
    reader.expect("END")
    classifiers = MulticlassModel(classes=classes, models=models)

    return Model(
        config=config,
        codebooks=codebooks,
        norms=norms,
        atom_set=atom_set,
        phrases=phrases,
        classifiers=classifiers,
    )
