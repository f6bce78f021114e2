import numpy as np
import pytest

from crowdatoms.atoms import AtomSet, MotionAtom
from crowdatoms.errors import DataError
from crowdatoms.ingest import CHANNELS, Codebook
from crowdatoms.model_io import (
    Model,
    ModelConfig,
    load_model,
    model_to_text,
    save_model,
)
from crowdatoms.phrases import MotionPhrase, PhraseUnit
from crowdatoms.similarity import ChannelNormalizers
from crowdatoms.svm import MulticlassModel, SvmModel


def toy_model(rng):
    dim = 3
    codebooks = {
        ch: Codebook(ch, rng.standard_normal((2, dim))) for ch in CHANNELS
    }
    norms = ChannelNormalizers(
        m={ch: float(rng.random()) + 0.1 for ch in CHANNELS}, approx=False
    )
    def clf(d):
        return SvmModel(w=rng.standard_normal(d), b=float(rng.standard_normal()),
                        epsilon=0.0, c_reg=1.0, mode="classification")
    atom_set = AtomSet([MotionAtom(i, clf(8)) for i in range(2)], norms)
    phrases = [
        (MotionPhrase((PhraseUnit(0, 0, 1),), class_hint="walk"), 0.75),
        (MotionPhrase((PhraseUnit(0, 0, 1), PhraseUnit(1, 2, 1)), class_hint="run"),
         1.921739201),
    ]
    classifiers = MulticlassModel(classes=["run", "walk"], models=[clf(4), clf(4)])
    config = ModelConfig(k=3, codebook_size=2, atoms=2, top=5, window=1, max_units=3,
                         budget=10, epsilon=0.1, c_reg=1.0, seed=42)
    return Model(config, codebooks, norms, atom_set, phrases, classifiers)


class TestRoundTrip:
    def test_save_load_save_byte_identical(self, tmp_path):
        model = toy_model(np.random.default_rng(0))
        p1, p2 = str(tmp_path / "m1.txt"), str(tmp_path / "m2.txt")
        save_model(model, p1)
        again = load_model(p1)
        save_model(again, p2)
        assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_all_fields_preserved_exactly(self, tmp_path):
        model = toy_model(np.random.default_rng(1))
        path = str(tmp_path / "m.txt")
        save_model(model, path)
        again = load_model(path)
        assert again.config == model.config
        for ch in CHANNELS:
            np.testing.assert_array_equal(
                again.codebooks[ch].centroids, model.codebooks[ch].centroids
            )
            assert again.norms.m[ch] == model.norms.m[ch]
        for a, b in zip(again.atom_set.atoms, model.atom_set.atoms):
            np.testing.assert_array_equal(a.classifier.w, b.classifier.w)
            assert a.classifier.b == b.classifier.b
        assert [(p.key(), p.class_hint, d) for p, d in again.phrases] == [
            (p.key(), p.class_hint, d) for p, d in model.phrases
        ]
        assert again.classifiers.classes == model.classifiers.classes
        for a, b in zip(again.classifiers.models, model.classifiers.models):
            np.testing.assert_array_equal(a.w, b.w)
            assert a.b == b.b

    def test_negative_zero_survives(self, tmp_path):
        model = toy_model(np.random.default_rng(2))
        model.classifiers.models[0].b = -0.0
        path = str(tmp_path / "m.txt")
        save_model(model, path)
        text1 = open(path).read()
        save_model(load_model(path), path)
        assert open(path).read() == text1


class TestParseErrors:
    def test_corrupt_line_reports_line_number(self, tmp_path):
        model = toy_model(np.random.default_rng(3))
        path = str(tmp_path / "m.txt")
        save_model(model, path)
        lines = open(path).read().splitlines()
        lines[6] = "garbage"
        (tmp_path / "bad.txt").write_text("\n".join(lines) + "\n")
        with pytest.raises(DataError, match=r"model parse error at line 7"):
            load_model(str(tmp_path / "bad.txt"))

    def test_missing_header(self, tmp_path):
        (tmp_path / "bad.txt").write_text("not a model\n")
        with pytest.raises(DataError, match="model parse error at line 1"):
            load_model(str(tmp_path / "bad.txt"))

    def test_truncated_file(self, tmp_path):
        model = toy_model(np.random.default_rng(4))
        path = str(tmp_path / "m.txt")
        save_model(model, path)
        text = open(path).read().splitlines()[:10]
        (tmp_path / "bad.txt").write_text("\n".join(text) + "\n")
        with pytest.raises(DataError, match="model parse error"):
            load_model(str(tmp_path / "bad.txt"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="cannot read model file"):
            load_model(str(tmp_path / "absent.txt"))


def test_text_layout_has_expected_sections():
    text = model_to_text(toy_model(np.random.default_rng(5)))
    for section in ("config", "codebooks", "normalizers", "atoms", "phrases",
                    "classifiers"):
        assert f"SECTION {section}" in text
    assert text.startswith("CROWDATOMS MODEL v1\n")
    assert "SVM v1 classification" in text
