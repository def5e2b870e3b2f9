import numpy as np
import pytest

from glasstrace.annotations import AnnotatedPoint, RelativeTuple
from glasstrace.ldgt import LayeredDepthMap
from glasstrace.metrics import (
    ALIGNMENTS,
    STRATEGIES,
    AlignmentError,
    MetricsError,
    MultiLayer,
    SingleLayer,
    align,
    depth_metrics,
    evaluate,
    select_reference,
    silog_loss,
    snap_layers,
    tuple_accuracy,
)
from glasstrace.rng import make_rng


def P(x, y, layer=1):
    return AnnotatedPoint(float(x), float(y), layer)


def pair(a, b, layer=1):
    return RelativeTuple("pair", (P(*a, layer), P(*b, layer)))


def ldm_from(depth_lists, max_layers=4):
    """Hand-build a LayeredDepthMap from a nested per-pixel list of lists."""
    h = len(depth_lists)
    w = len(depth_lists[0])
    counts = np.zeros((h, w), dtype=np.uint8)
    depths = np.full((h, w, max_layers), np.nan, dtype=np.float32)
    for y in range(h):
        for x in range(w):
            vals = depth_lists[y][x]
            counts[y, x] = len(vals)
            depths[y, x, :len(vals)] = vals
    return LayeredDepthMap(counts, depths)


class TestTupleAccuracy:
    GT = np.arange(1, 26, dtype=float).reshape(5, 5)

    def gt_pairs(self, n, rng):
        out = []
        while len(out) < n:
            x1, y1, x2, y2 = rng.integers(0, 5, 4)
            a, b = self.GT[y1, x1], self.GT[y2, x2]
            if a == b:
                continue
            pts = ((x1, y1), (x2, y2)) if a < b else ((x2, y2), (x1, y1))
            out.append(pair(*pts))
        return out

    def test_perfect_prediction(self):
        rng = make_rng(0, "pairs")
        res = tuple_accuracy(SingleLayer(self.GT), self.gt_pairs(100, rng))
        assert res["cells"]["pair"]["All"]["correct"] == 100

    def test_reversed_prediction(self):
        rng = make_rng(1, "pairs")
        res = tuple_accuracy(SingleLayer(-self.GT), self.gt_pairs(100, rng))
        assert res["cells"]["pair"]["All"]["correct"] == 0

    def test_ties_incorrect(self):
        res = tuple_accuracy(SingleLayer(np.full((5, 5), 2.0)),
                             [pair((0, 0), (1, 1)), pair((2, 2), (3, 3)),
                              pair((4, 4), (0, 3))])
        assert res["cells"]["pair"]["All"] == {"correct": 0, "count": 3}

    def test_monotone_map_invariance(self):
        rng = make_rng(2, "pairs")
        tuples = self.gt_pairs(200, rng)
        pred = rng.uniform(0.5, 9.0, size=(5, 5))
        a = tuple_accuracy(SingleLayer(pred), tuples)
        b = tuple_accuracy(SingleLayer(np.exp(pred) + 3.0), tuples)
        assert a["cells"] == b["cells"]

    def test_single_layer_skips_other_layers(self):
        t_l2 = RelativeTuple("pair", (P(0, 0, 2), P(1, 1, 2)))
        res = tuple_accuracy(SingleLayer(self.GT), [pair((0, 0), (1, 1)), t_l2])
        assert res["skipped"] == 1
        assert res["cells"]["pair"]["All"]["count"] == 1

    def test_multilayer_lookup(self):
        gt = ldm_from([[[1.0, 1.2, 3.0], [2.0]]])
        pred = MultiLayer(gt)
        t = RelativeTuple("triplet", (P(0, 0, 1), P(0, 0, 2), P(0, 0, 3)))
        res = tuple_accuracy(pred, [t])
        assert res["cells"]["triplet"]["All"] == {"correct": 1, "count": 1}
        # layer id beyond the pixel's layer count -> recorded error
        bad = RelativeTuple("pair", (P(1, 0, 1), P(1, 0, 2)))
        res = tuple_accuracy(pred, [bad])
        assert res["errors"] and "layer count" in res["errors"][0]
        assert "pair" not in res["cells"]

    def test_out_of_bounds_point(self):
        res = tuple_accuracy(SingleLayer(self.GT), [pair((0, 0), (7, 7))])
        assert res["errors"] and "bounds" in res["errors"][0]

    def test_round_half_to_even(self):
        pred = np.array([[1.0, 2.0, 3.0]])
        # x = 0.5 rounds to pixel 0, x = 1.5 rounds to pixel 2
        t = RelativeTuple("pair", (P(0.5, 0.0), P(1.5, 0.0)))
        res = tuple_accuracy(SingleLayer(pred), [t])
        assert res["cells"]["pair"]["All"]["correct"] == 1

    def test_random_prediction_chance_level(self):
        rng = make_rng(3, "mc")
        gt = rng.uniform(1, 10, size=(64, 64))
        pred = rng.uniform(1, 10, size=(64, 64))
        tuples = []
        while len(tuples) < 10_000:
            x1, y1, x2, y2 = rng.integers(0, 64, 4)
            if (x1, y1) == (x2, y2):
                continue
            a, b = gt[y1, x1], gt[y2, x2]
            pts = ((x1, y1), (x2, y2)) if a < b else ((x2, y2), (x1, y1))
            tuples.append(pair(*pts))
        res = tuple_accuracy(SingleLayer(pred), tuples)
        cell = res["cells"]["pair"]["All"]
        assert abs(cell["correct"] / cell["count"] - 0.5) < 0.02

    def test_subset_accounting(self):
        gt = ldm_from([[[1.0, 2.0], [1.5, 2.5]]])
        tuples = [RelativeTuple("pair", (P(0, 0, 1), P(0, 0, 2))),
                  RelativeTuple("pair", (P(0, 0, 1), P(1, 0, 1))),
                  RelativeTuple("pair", (P(0, 0, 2), P(1, 0, 2)))]
        res = tuple_accuracy(MultiLayer(gt), tuples)
        per = res["cells"]["pair"]
        assert per["All"]["count"] == (per["Mixed"]["count"]
                                       + per["Layer-1"]["count"]
                                       + per["Layer-2"]["count"])


class TestDepthMetrics:
    def test_identity(self):
        gt = np.linspace(1, 10, 100).reshape(10, 10)
        assert depth_metrics(gt, gt, np.ones_like(gt, bool)) == (0.0, 0.0, 1.0, 1.0)

    def test_constant_ratio(self):
        gt = np.linspace(1, 10, 100).reshape(10, 10)
        absrel, rms, d1, d2 = depth_metrics(1.2 * gt, gt, np.ones_like(gt, bool))
        assert absrel == pytest.approx(0.2, abs=1e-12)
        assert d1 == 1.0 and d2 == 1.0

    def test_clip_applied(self):
        pred = np.full((2, 2), 40.0)
        gt = np.full((2, 2), 40.0)
        absrel, rms, _, _ = depth_metrics(pred, gt, np.ones((2, 2), bool))
        assert absrel == 0.0 and rms == 0.0
        # clip floors tiny gt too
        absrel, *_ = depth_metrics(np.full((2, 2), 0.001),
                                   np.full((2, 2), 1e-9), np.ones((2, 2), bool))
        assert absrel == 0.0

    def test_delta_monotonicity(self):
        rng = make_rng(0, "dm")
        for _ in range(20):
            gt = rng.uniform(0.5, 20, size=(8, 8))
            pred = gt * rng.uniform(0.3, 3.0, size=(8, 8))
            _, _, d1, d2 = depth_metrics(pred, gt, np.ones((8, 8), bool))
            assert d2 >= d1

    def test_empty_mask(self):
        with pytest.raises(MetricsError, match="empty"):
            depth_metrics(np.ones((2, 2)), np.ones((2, 2)), np.zeros((2, 2), bool))

    def test_masked_only(self):
        gt = np.ones((2, 2))
        pred = np.array([[1.0, 99.0], [1.0, 99.0]])
        mask = np.array([[True, False], [True, False]])
        assert depth_metrics(pred, gt, mask)[0] == 0.0


class TestAlignment:
    GT = make_rng(0, "align").uniform(1.0, 8.0, size=(16, 16))
    MASK = np.ones((16, 16), bool)

    def test_metric_identity(self):
        pred = 2 * self.GT
        assert align(pred, self.GT, self.MASK, "metric") is pred

    def test_affine_exact(self):
        pred = 2.0 * self.GT + 1.0
        out = align(pred, self.GT, self.MASK, "affine")
        absrel, *_ = depth_metrics(out, self.GT, self.MASK)
        assert absrel <= 1e-9

    def test_disparity_exact(self):
        pred = 1.0 / (3.0 / self.GT)  # disparity scaled by 3
        out = align(pred, self.GT, self.MASK, "disparity")
        absrel, *_ = depth_metrics(out, self.GT, self.MASK)
        assert absrel <= 1e-9

    def test_scale_then_shift_exact_scale(self):
        out = align(3.0 * self.GT, self.GT, self.MASK, "scale_shift")
        absrel, *_ = depth_metrics(out, self.GT, self.MASK)
        assert absrel <= 1e-9

    def test_degenerate_constant_prediction(self):
        with pytest.raises(AlignmentError):
            align(np.ones((16, 16)), self.GT, self.MASK, "affine")
        with pytest.raises(AlignmentError):
            align(np.ones((16, 16)), self.GT, self.MASK, "disparity")

    def test_unknown_mode(self):
        with pytest.raises(ValueError, match="unknown alignment"):
            align(self.GT, self.GT, self.MASK, "bogus")


class TestReferenceSelection:
    GT = ldm_from([[[1.0, 1.2, 3.0], [2.0], []]])

    def test_first_last(self):
        first, valid = select_reference(self.GT, np.zeros((1, 3)), "first")
        last, _ = select_reference(self.GT, np.zeros((1, 3)), "last")
        assert first[0, 0] == pytest.approx(1.0)
        assert last[0, 0] == pytest.approx(3.0)
        assert first[0, 1] == last[0, 1] == pytest.approx(2.0)
        assert list(valid[0]) == [True, True, False]

    def test_adapted_nearest(self):
        pred = np.array([[2.9, 5.0, 1.0]])
        ref, valid = select_reference(self.GT, pred, "adapted")
        assert ref[0, 0] == pytest.approx(3.0)
        assert ref[0, 1] == pytest.approx(2.0)
        assert not valid[0, 2]

    def test_adapted_dominates_pixelwise(self):
        rng = make_rng(1, "adapt")
        for _ in range(20):
            lists = [[sorted(rng.uniform(0.5, 10, rng.integers(1, 5)))
                      for _ in range(6)] for _ in range(4)]
            gt = ldm_from([[list(v) for v in row] for row in lists])
            pred = rng.uniform(0.5, 10, size=(4, 6))
            a, valid = select_reference(gt, pred, "adapted")
            f, _ = select_reference(gt, pred, "first")
            l, _ = select_reference(gt, pred, "last")
            da = np.abs(pred - a)[valid]
            assert (da <= np.abs(pred - f)[valid] + 1e-12).all()
            assert (da <= np.abs(pred - l)[valid] + 1e-12).all()


class TestSnap:
    def test_inheritance_oracle(self):
        gt = ldm_from([[[1.0, 1.2, 3.0], [2.0], []]])
        snapped = snap_layers(gt, 5)
        assert snapped.depths[0, 0].tolist() == pytest.approx(
            [1.0, 1.2, 3.0, 3.0, 3.0])
        assert snapped.depths[0, 1].tolist() == pytest.approx([2.0] * 5)
        assert np.isnan(snapped.depths[0, 2]).all()
        assert snapped.counts[0, 2] == 0

    def test_idempotent(self):
        gt = ldm_from([[[1.0, 1.2, 3.0], [2.0], []]])
        once = snap_layers(gt, 5)
        twice = snap_layers(once, 5)
        assert np.array_equal(once.depths, twice.depths, equal_nan=True)
        assert (once.counts == twice.counts).all()


class TestSilog:
    GT = make_rng(0, "silog").uniform(0.5, 9.0, size=(12, 12))
    MASK = np.ones((12, 12), bool)

    def test_identity_zero(self):
        assert silog_loss(self.GT, self.GT, self.MASK) == pytest.approx(0.0, abs=1e-12)

    def test_pure_scale_invariance(self):
        assert silog_loss(2.7 * self.GT, self.GT, self.MASK,
                          lam=1.0) == pytest.approx(0.0, abs=1e-7)

    def test_constant_ratio_closed_form(self):
        for c in (0.5, 2.0, 5.0):
            expect = np.sqrt(0.15) * abs(np.log(c))
            assert silog_loss(c * self.GT, self.GT, self.MASK) == pytest.approx(
                expect, abs=1e-9)

    def test_domain_error(self):
        with pytest.raises(MetricsError, match="positive"):
            silog_loss(-self.GT, self.GT, self.MASK)


class TestEvaluate:
    def slab_gt(self):
        # half the pixels see the slab stack, half only the wall; depths
        # vary slightly per pixel so alignments stay well-posed
        lists = [[[1.0 + 0.02 * y, 1.2 + 0.02 * y, 3.0 + 0.03 * x] if x < 4
                  else [3.0 + 0.03 * x + 0.01 * y] for x in range(8)]
                 for y in range(6)]
        gt = ldm_from(lists)
        trans = np.zeros((6, 8), bool)
        trans[:, :4] = True
        return gt, trans

    def gt_tuples(self, gt):
        out = []
        for y in range(gt.counts.shape[0]):
            for x in range(gt.counts.shape[1]):
                n = int(gt.counts[y, x])
                for a in range(1, n):
                    out.append(RelativeTuple(
                        "pair", (P(x, y, a), P(x, y, a + 1))))
        return out

    def test_perfect_multilayer(self):
        gt, trans = self.slab_gt()
        report = evaluate(MultiLayer(gt), gt, trans, self.gt_tuples(gt))
        assert report.errors == []
        for per_subset in report.tuple_cells.values():
            for cell in per_subset.values():
                assert cell["correct"] == cell["count"]
        for key, cell in report.depth_cells.items():
            assert cell["AbsRel"] == pytest.approx(0.0, abs=1e-9), key
            assert cell["delta1"] == 1.0 and cell["delta2"] == 1.0

    def test_single_layer_first_vs_last(self):
        gt, trans = self.slab_gt()
        pred = SingleLayer(np.array(gt.layer(1), dtype=float))
        report = evaluate(pred, gt, trans, [],
                          alignments=("metric",))
        assert report.depth_cells["trans/first/metric"]["AbsRel"] == pytest.approx(0.0)
        assert report.depth_cells["trans/last/metric"]["AbsRel"] > 0.1

    def test_grid_coverage_and_stable_json(self):
        gt, trans = self.slab_gt()
        rng = make_rng(5, "noise")
        pred = SingleLayer(np.array(gt.layer(1)) * rng.uniform(0.9, 1.1, (6, 8)))
        report = evaluate(pred, gt, trans, self.gt_tuples(gt))
        assert set(report.depth_cells) == {
            f"{m}/{s}/{a}" for m in ("all", "trans")
            for s in STRATEGIES for a in ALIGNMENTS}
        assert report.serialize() == report.serialize()
        assert b'"clip":[0.001,30]' in report.serialize()
