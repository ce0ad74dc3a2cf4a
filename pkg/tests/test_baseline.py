import numpy as np
import pytest
import torch
import torch.nn.functional as F

from iconannot.baseline import (
    NUM_OUTPUTS,
    OTHER_INDEX,
    Candidate,
    ClassifierConfig,
    ClassifierTrainSettings,
    IconClassifier,
    batch_inputs,
    candidate_label,
    classifier_checkpoint,
    classify,
    load_classifier,
    predict_sample,
    propose_candidates,
    train_classifier,
)
from iconannot.checkpoint import save_checkpoint
from iconannot.corpus import ALL_CLASSES, BoundingBox, IconAnnotation, IconClass, UISample, VHNode
from iconannot.detector import TrainingDiverged

from oracles import central_diff_check

SMALL = ClassifierConfig(crop_size=33, encoder_widths=(4, 4, 8, 8), text_dim=8)


def _sample(n_leaves=5, seed=0):
    rng = np.random.default_rng(seed)
    px = rng.integers(0, 255, (64, 128, 3), dtype=np.uint8)
    leaves = tuple(VHNode("ImageView", f"a:id/n{i}", BoundingBox(0.15 * i, 0.1, 0.15 * i + 0.1, 0.4)) for i in range(n_leaves))
    anns = (IconAnnotation(leaves[0].bounds, IconClass.MENU),) if leaves else ()
    return UISample("s", px, leaves, anns)


def _model(cfg=SMALL, seed=0):
    torch.manual_seed(seed)
    return IconClassifier(cfg).eval()


class TestCandidates:
    def test_one_per_leaf(self):
        cands = propose_candidates(_sample(5), 33)
        assert len(cands) == 5
        assert all(c.crop.shape == (33, 33, 3) for c in cands)
        assert all(((0 <= c.location) & (c.location <= 1)).all() for c in cands)

    def test_full_screen_leaf_is_downscaled_screenshot(self):
        s = _sample(0)
        s = UISample("f", s.pixels, (VHNode("Frame", None, BoundingBox(0, 0, 1, 1)),), ())
        (c,) = propose_candidates(s, 32)
        from PIL import Image

        expected = np.asarray(Image.fromarray(s.pixels).resize((32, 32), Image.BILINEAR))
        assert np.array_equal(c.crop, expected)

    def test_unsynced_icon_has_no_candidate(self):
        s = _sample(3)
        lost = IconAnnotation(BoundingBox(0.8, 0.7, 0.9, 0.9), IconClass.SHARE, vh_matched=False)
        s = UISample("u", s.pixels, s.vh_leaves, s.annotations + (lost,))
        assert all(candidate_label(c.node, s.annotations) is not IconClass.SHARE for c in propose_candidates(s, 33))

    def test_subpixel_leaf_skipped(self):
        s = _sample(0)
        tiny = VHNode("X", None, BoundingBox(0.5, 0.5, 0.5 + 1e-9, 0.5 + 1e-9))
        s = UISample("t", s.pixels, (tiny,), ())
        # a sliver still covers the pixel it falls in, so only exact zero-width crops are skipped
        assert len(propose_candidates(s, 33)) == 1


class TestLabels:
    def test_inside_and_iou(self):
        a = [IconAnnotation(BoundingBox(0.1, 0.1, 0.3, 0.3), IconClass.MENU)]
        assert candidate_label(VHNode("X", None, BoundingBox(0.1, 0.1, 0.3, 0.3)), a) is IconClass.MENU
        assert candidate_label(VHNode("X", None, BoundingBox(0.1, 0.1, 0.5, 0.5)), a) is IconClass.OTHER
        assert candidate_label(VHNode("X", None, BoundingBox(0.6, 0.6, 0.8, 0.8)), a) is IconClass.OTHER


class TestClassifier:
    def test_head_widths(self):
        m = _model()
        assert m.image_fc[0].out_features == 1024 and m.image_fc[2].out_features == 128
        assert m.joint.out_features == 128 and m.classifier.out_features == NUM_OUTPUTS == 30
        assert m.joint.in_features == 128 + 8 + 4
        m_img = _model(ClassifierConfig(crop_size=33, encoder_widths=(4, 4, 8, 8), text_dim=8, use_text=False, use_location=False))
        assert m_img.joint.in_features == 128

    def test_softmax_sums_to_one(self):
        probs = classify(propose_candidates(_sample(), 33, None), _model(ClassifierConfig(crop_size=33, encoder_widths=(4, 4, 8, 8))))
        assert probs.shape == (5, 30)
        assert np.all(probs > 0)
        np.testing.assert_allclose(probs.sum(1), 1.0, atol=1e-6)

    def test_identical_candidates(self):
        from iconannot.textproc import HashedTextEncoder

        c = propose_candidates(_sample(1), 33, HashedTextEncoder(8))[0]
        probs = classify([c, c], _model())
        assert np.array_equal(probs[0], probs[1])

    def test_permutation_equivariant(self):
        from iconannot.textproc import HashedTextEncoder

        cands = propose_candidates(_sample(5), 33, HashedTextEncoder(8))
        m = _model()
        a = classify(cands, m)
        perm = [3, 0, 4, 1, 2]
        b = classify([cands[i] for i in perm], m)
        np.testing.assert_allclose(a[perm], b, atol=1e-6)

    def test_gradient_finite_difference(self):
        from iconannot.textproc import HashedTextEncoder

        m = _model().double()
        cands = propose_candidates(_sample(3), 33, HashedTextEncoder(8))
        crops, text, loc = batch_inputs(cands, torch.float64)
        labels = torch.tensor([IconClass.MENU.index, OTHER_INDEX, IconClass.STAR.index])

        def fn():
            return F.cross_entropy(m(crops, text, loc), labels)

        params = [m.joint.weight, m.joint.bias, m.classifier.weight, m.image_fc[2].weight]
        assert central_diff_check(fn, params, n_probe=60) < 1e-4


class _Fixed(IconClassifier):
    def __init__(self, probs):
        super().__init__(SMALL)
        self.probs = torch.tensor(probs, dtype=torch.float32)

    def forward(self, crops, text, location):
        return torch.log(self.probs[: crops.shape[0]])


class TestPredict:
    def test_all_other(self):
        p = np.full((5, 30), 0.01)
        p[:, OTHER_INDEX] = 1 - 0.01 * 29
        assert predict_sample(_sample(5), _Fixed(p)) == []

    def test_menu_point_nine(self):
        p = np.full((1, 30), 0.1 / 29)
        p[0, IconClass.MENU.index] = 0.9
        (d,) = predict_sample(_sample(1), _Fixed(p))
        assert d.label is IconClass.MENU and d.score == pytest.approx(0.9, abs=1e-6)

    def test_score_cutoff(self):
        p = np.full((1, 30), 0.5 / 29)
        p[0, IconClass.MENU.index] = 0.5
        assert predict_sample(_sample(1), _Fixed(p), score_cutoff=0.6) == []

    def test_never_more_than_leaves(self):
        s = _sample(4)
        m = _model()
        for k in range(3):
            torch.manual_seed(k)
            m = IconClassifier(SMALL).eval()
            assert len(predict_sample(s, m)) <= len(s.vh_leaves)


class TestTraining:
    def test_deterministic_and_checkpoint(self, tmp_path):
        samples = [_sample(4, seed=i) for i in range(2)]
        st = ClassifierTrainSettings(epochs=2, batch_size=4)
        cfg = ClassifierConfig(**{**SMALL.to_json(), "encoder_widths": (4, 4, 8, 8), "sampling": True})
        a = train_classifier(samples, cfg, st, seed=3)
        b = train_classifier(samples, cfg, st, seed=3, out_dir=tmp_path)
        assert a.log == b.log
        back = load_classifier(tmp_path / "checkpoint.npz")
        from iconannot.textproc import HashedTextEncoder

        cands = propose_candidates(samples[0], 33, HashedTextEncoder(8))
        np.testing.assert_array_equal(classify(cands, back), classify(cands, b.model))

    def test_checkpoint_roundtrip(self, tmp_path):
        from iconannot.textproc import HashedTextEncoder

        m = _model()
        save_checkpoint(tmp_path / "c.npz", classifier_checkpoint(m, "baseline-vh"))
        back = load_classifier(tmp_path / "c.npz")
        cands = propose_candidates(_sample(), 33, HashedTextEncoder(8))
        np.testing.assert_array_equal(classify(cands, m), classify(cands, back))

    def test_divergence(self, monkeypatch):
        import iconannot.baseline as B

        monkeypatch.setattr(B.F, "cross_entropy", lambda *a, **k: torch.tensor(float("inf"), requires_grad=True))
        with pytest.raises(TrainingDiverged):
            train_classifier([_sample(2)], SMALL, ClassifierTrainSettings(epochs=1, batch_size=2))

    def test_sampling_fills_missing_rids(self):
        px = np.zeros((64, 128, 3), np.uint8)
        box_a, box_b = BoundingBox(0.1, 0.1, 0.2, 0.3), BoundingBox(0.5, 0.1, 0.6, 0.3)
        s = UISample(
            "x", px,
            (VHNode("ImageView", "a:id/share_btn", box_a), VHNode("ImageView", None, box_b)),
            (IconAnnotation(box_a, IconClass.SHARE, True), IconAnnotation(box_b, IconClass.SHARE, True)),
        )
        cfg = ClassifierConfig(**{**SMALL.to_json(), "encoder_widths": (4, 4, 8, 8), "sampling": True})
        res = train_classifier([s], cfg, ClassifierTrainSettings(epochs=1, batch_size=2))
        assert res.log[0]["sampled"] == 1
        assert res.rid_dictionary[IconClass.SHARE]["share_btn"] == 1
        off = train_classifier([s], SMALL, ClassifierTrainSettings(epochs=1, batch_size=2))
        assert off.log[0]["sampled"] == 0 and off.rid_dictionary is None
