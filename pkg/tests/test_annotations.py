import itertools

import numpy as np
import pytest

from glasstrace.annotations import (
    AnnotatedPoint,
    AnnotationSet,
    MonotonicLine,
    ReferenceGroup,
    RelativeTuple,
    classify_subsets,
    enumerate_chains,
    parse_annotations,
    parse_tuples,
    partial_order,
    sample_tuples,
    serialize_annotations,
    serialize_tuples,
    validate,
)
from glasstrace.canonjson import FieldError
from glasstrace.rng import make_rng


def P(x, y, layer=1):
    return AnnotatedPoint(float(x), float(y), layer)


def aset(lines=(), groups=(), w=100, h=80):
    return AnnotationSet("img", w, h, tuple(lines), tuple(groups))


class TestValidate:
    def test_well_formed_line(self):
        s = aset([MonotonicLine("l1", (P(1, 1), P(2, 2)))])
        assert validate(s) == []

    def test_single_point_line(self):
        s = aset([MonotonicLine("l1", (P(1, 1),))])
        assert any(">=2 points" in v for v in validate(s))

    def test_out_of_bounds(self):
        s = aset([MonotonicLine("l1", (P(100, 1), P(2, 2)))], w=100)
        assert any("outside image bounds" in v for v in validate(s))

    def test_layer_range(self):
        for bad in (0, 8):
            s = aset([MonotonicLine("l1", (P(1, 1, bad), P(2, 2)))])
            assert any("layer" in v for v in validate(s))

    def test_duplicate_ids(self):
        s = aset([MonotonicLine("a", (P(1, 1), P(2, 2)))],
                 [ReferenceGroup("a", P(5, 5), front=(P(6, 6),))])
        assert any("duplicate annotation id" in v for v in validate(s))

    def test_duplicate_point_in_line(self):
        s = aset([MonotonicLine("l1", (P(1, 1), P(2, 2)), front=(P(1, 1),))])
        assert any("appears twice" in v for v in validate(s))

    def test_empty_group(self):
        s = aset([], [ReferenceGroup("g", P(5, 5))])
        assert any("front or behind" in v for v in validate(s))

    def test_ref_in_front_set(self):
        s = aset([], [ReferenceGroup("g", P(5, 5), front=(P(5, 5),))])
        assert any("reference also listed" in v for v in validate(s))

    def test_cycle_through_shared_points(self):
        a, b = P(1, 1), P(2, 2)
        s = aset([MonotonicLine("l1", (a, b)), MonotonicLine("l2", (b, a))])
        assert any("cycle" in v for v in validate(s))


class TestPartialOrder:
    def test_three_point_line_closure(self):
        p1, p2, p3 = P(1, 1), P(2, 2), P(3, 3)
        rel = partial_order(aset([MonotonicLine("l", (p1, p2, p3))]))
        assert rel == {(p1, p2), (p1, p3), (p2, p3)}

    def test_group_relations(self):
        f1, f2, r, b = P(1, 1), P(2, 2), P(3, 3), P(4, 4)
        rel = partial_order(aset([], [ReferenceGroup("g", r, (f1, f2), (b,))]))
        assert rel == {(f1, r), (f2, r), (r, b), (f1, b), (f2, b)}
        assert (f1, f2) not in rel and (f2, f1) not in rel

    def test_no_cross_annotation_relations(self):
        rel = partial_order(aset([MonotonicLine("a", (P(1, 1), P(2, 2))),
                                  MonotonicLine("b", (P(5, 5), P(6, 6)))]))
        assert len(rel) == 2

    def test_closure_through_shared_point(self):
        a, s, b = P(1, 1), P(2, 2), P(3, 3)
        rel = partial_order(aset([MonotonicLine("l1", (a, s)),
                                  MonotonicLine("l2", (s, b))]))
        assert (a, b) in rel

    def test_front_points_of_line_unordered(self):
        f1, f2 = P(0, 0), P(9, 9)
        line = MonotonicLine("l", (P(1, 1), P(2, 2)), front=(f1, f2))
        rel = partial_order(aset([line]))
        assert (f1, f2) not in rel and (f2, f1) not in rel
        # but front precedes behind, transitively
        assert all((f, p) in rel for f in (f1, f2)
                   for p in (P(1, 1), P(2, 2)))


FOUR_POINT_LINE = aset([MonotonicLine("l", (P(1, 1), P(2, 2), P(3, 3), P(4, 4)))])


class TestSampling:
    def test_four_point_line_chain_counts(self):
        assert len(enumerate_chains(FOUR_POINT_LINE, 2)) == 6
        assert len(enumerate_chains(FOUR_POINT_LINE, 3)) == 4
        assert len(enumerate_chains(FOUR_POINT_LINE, 4)) == 1

    def test_two_point_line_single_pair(self):
        s = aset([MonotonicLine("l", (P(1, 1), P(2, 2)))])
        tuples, exhausted = sample_tuples(s, {"pairs": 1}, seed=0)
        assert len(tuples) == 1
        assert tuples[0].points == (P(1, 1), P(2, 2))
        assert not exhausted["pair"]

    def test_exhaustion_flag(self):
        tuples, exhausted = sample_tuples(FOUR_POINT_LINE,
                                          {"quadruplets": 10}, seed=0)
        assert len(tuples) == 1
        assert exhausted["quadruplet"]

    def test_deterministic(self):
        counts = {"pairs": 3, "triplets": 2, "quadruplets": 1}
        a, _ = sample_tuples(FOUR_POINT_LINE, counts, seed=7)
        b, _ = sample_tuples(FOUR_POINT_LINE, counts, seed=7)
        assert a == b
        c, _ = sample_tuples(aset([MonotonicLine(
            "l", tuple(P(i, i) for i in range(1, 7)))]), counts, seed=8)
        assert [t.points for t in a] != [t.points for t in c]

    def test_tuples_are_chains(self):
        s = aset([MonotonicLine("l", (P(1, 1), P(2, 2), P(3, 3)),
                                front=(P(0, 0),), behind=(P(9, 9),))])
        rel = partial_order(s)
        tuples, _ = sample_tuples(s, {"pairs": 99, "triplets": 99,
                                      "quadruplets": 99}, seed=1)
        for t in tuples:
            for a, b in zip(t.points, t.points[1:]):
                assert (a, b) in rel

    def _random_set(self, rng):
        n = int(rng.integers(2, 9))
        pts = [P(float(x), float(y), int(l)) for x, y, l in
               zip(rng.uniform(0, 99, n), rng.uniform(0, 79, n),
                   rng.integers(1, 8, n))]
        split = sorted(rng.choice(n + 1, size=2))
        line_pts = pts[:max(2, split[0])]
        rest = pts[len(line_pts):]
        k = len(rest) // 2
        lines = [MonotonicLine("l", tuple(line_pts),
                               front=tuple(rest[:k]), behind=tuple(rest[k:]))]
        return aset(lines)

    def test_sampler_matches_brute_force(self):
        """Enumerable chains equal brute-force k-permutation filtering."""
        for seed in range(200):
            rng = make_rng(seed, "annsets")
            s = self._random_set(rng)
            assert validate(s) == []
            rel = partial_order(s)
            pts = sorted(set(p for pair in rel for p in pair),
                         key=lambda p: (p.x, p.y, p.layer))
            for k in (2, 3, 4):
                brute = {perm for perm in itertools.permutations(pts, k)
                         if all((a, b) in rel for a, b in zip(perm, perm[1:]))}
                assert set(enumerate_chains(s, k)) == brute


class TestClassify:
    def test_single_layer(self):
        t = RelativeTuple("pair", (P(1, 1, 1), P(2, 2, 1)))
        assert classify_subsets(t) == ("All", "Layer-1")

    def test_mixed(self):
        t = RelativeTuple("triplet", (P(1, 1, 1), P(2, 2, 3), P(3, 3, 3)))
        assert classify_subsets(t) == ("All", "Mixed")

    def test_layer_three_quadruplet(self):
        t = RelativeTuple("quadruplet", tuple(P(i, i, 3) for i in range(4)))
        assert classify_subsets(t) == ("All", "Layer-3")

    def test_partition(self):
        rng = make_rng(0, "cls")
        for _ in range(100):
            k = int(rng.integers(2, 5))
            pts = tuple(P(i, i, int(rng.integers(1, 8))) for i in range(k))
            tags = classify_subsets(RelativeTuple("pair", pts))
            assert tags[0] == "All"
            assert len(tags) == 2  # exactly one of Mixed / Layer-i


class TestSerialization:
    FIXTURE = aset(
        [MonotonicLine("l1", (P(1.5, 2.5), P(3, 4, 2)),
                       front=(P(0.25, 0.75),), behind=(P(9, 9, 3),))],
        [ReferenceGroup("g1", P(50, 40, 2), front=(P(10, 10),),
                        behind=(P(60, 60, 4),))])

    def test_round_trip(self):
        data = serialize_annotations(self.FIXTURE)
        assert serialize_annotations(parse_annotations(data)) == data
        assert parse_annotations(data) == self.FIXTURE

    def test_unknown_field(self):
        import json

        doc = json.loads(serialize_annotations(self.FIXTURE))
        doc["lines"][0]["color"] = "red"
        from glasstrace.annotations import annotations_from_json

        with pytest.raises(FieldError, match="color"):
            annotations_from_json(doc)

    def test_tuples_jsonl_round_trip(self):
        tuples, _ = sample_tuples(self.FIXTURE,
                                  {"pairs": 5, "triplets": 3}, seed=0)
        data = serialize_tuples("img", tuples)
        parsed = parse_tuples(data)
        assert [t for _, t in parsed] == [
            RelativeTuple(t.kind, t.points, (), t.tags) for t in tuples]
        assert all(i == "img" for i, _ in parsed)
        assert serialize_tuples("img", [t for _, t in parsed]) == data

    def test_unknown_kind(self):
        bad = (b'{"image_id":"img","kind":"quintuple","points":[],"tags":[]}\n')
        with pytest.raises(FieldError, match="unknown kind"):
            parse_tuples(bad)

    def test_wrong_point_count(self):
        pt = b'{"layer":1,"x":1,"y":1}'
        bad = (b'{"image_id":"img","kind":"pair","points":[' + pt + b"," + pt
               + b"," + pt + b'],"tags":[]}\n')
        with pytest.raises(FieldError, match="requires 2 points"):
            parse_tuples(bad)
