"""Acceptance suite: one criterion per test, one printed PASS/FAIL line each.

Run with plain pytest; the summary lines bypass output capture so they
are visible in any run mode.
"""

import itertools
import json
import os
import time

import numpy as np
import pytest

from glasstrace.annotations import (
    AnnotatedPoint,
    AnnotationSet,
    MonotonicLine,
    ReferenceGroup,
    RelativeTuple,
    enumerate_chains,
    partial_order,
    validate,
)
from glasstrace.cli import main as cli_main
from glasstrace.generate import GeneratorConfig, generate_scene
from glasstrace.geometry import CameraModel, vec3
from glasstrace.ldgt import LayeredDepthMap
from glasstrace.metrics import (
    ALIGNMENTS,
    CLIP_DEFAULT,
    MultiLayer,
    SingleLayer,
    align,
    depth_metrics,
    evaluate,
    silog_loss,
    snap_layers,
    tuple_accuracy,
)
from glasstrace.render import RenderConfig, _camera_rays, render_layers
from glasstrace.rng import make_rng
from glasstrace.scene import (
    IDENTITY,
    Box,
    EnvironmentLight,
    ObjectSpec,
    Part,
    RoomQuad,
    SceneSpec,
    Transmissive,
)


def announce(capsys, name, ok, detail=""):
    with capsys.disabled():
        print(f"{name}: {'PASS' if ok else 'FAIL'}"
              + (f" ({detail})" if detail else ""))
    assert ok, f"{name} failed: {detail}"


def P(x, y, layer=1):
    return AnnotatedPoint(float(x), float(y), layer)


def slab_scene(tilt=0.0, wall_z=3.0, cam_hw=(64, 64), fov=np.pi / 4):
    h, w = cam_hw
    camera = CameraModel(vec3(0, 0, 0), vec3(1, 0, 0), vec3(0, 1, 0),
                         vec3(0, 0, 1), fov, h, w)
    slab = ObjectSpec("slab", "pane", IDENTITY, (
        Part("pane", Box(vec3(-4, -4, 1.0), vec3(4, 4, 1.2)),
             Transmissive(1.5, (1, 1, 1), "glass")),))
    half = 12.0
    wall = RoomQuad("wall",
                    (-half * np.cos(tilt), -half, wall_z - half * np.sin(tilt)),
                    (2 * half * np.cos(tilt), 0.0, 2 * half * np.sin(tilt)),
                    (0.0, 2 * half, 0.0), (0.5, 0.5, 0.5))
    return SceneSpec((slab,), (EnvironmentLight((0.1, 0.1, 0.1)),), camera,
                     (wall,), 0, "fixture")


def test_a01_slab_oracle(capsys):
    t0 = time.time()
    scene = slab_scene()
    ldm, mask = render_layers(scene, RenderConfig())
    h, w = ldm.counts.shape
    cy, cx = h // 2, w // 2
    depths = ldm.depths[cy, cx, :3]
    ok = (ldm.counts[cy, cx] == 3
          and np.allclose(depths, [1.0, 1.2, 3.0], atol=1e-4)
          and bool(mask[cy, cx])
          and mask.all())  # the slab covers the whole frustum here
    announce(capsys, "A1 slab oracle", ok,
             f"center depths {depths.tolist()}, {time.time() - t0:.1f}s")


def test_a02_refraction_distortion_oracle(capsys):
    t0 = time.time()
    tilt = np.pi / 4
    scene = slab_scene(tilt=tilt, fov=np.pi / 5)
    ldm, _ = render_layers(scene, RenderConfig())
    cam = scene.camera
    h, w = cam.height, cam.width
    _, D = _camera_rays(cam, np.full((h * w, 2), 0.5))
    rng = make_rng(0, "a2")
    ior, z0, z1, zw = 1.5, 1.0, 1.2, 3.0
    checked = 0
    worst = 0.0
    while checked < 100:
        px = int(rng.integers(0, w))
        py = int(rng.integers(0, h))
        if ldm.counts[py, px] != 3:
            continue
        d = D[py * w + px]
        cos_i = d[2]
        sin_i = np.sqrt(max(1.0 - cos_i ** 2, 0.0))
        if sin_i < 1e-9:
            continue
        sin_t = sin_i / ior
        cos_t = np.sqrt(1.0 - sin_t ** 2)
        lat = np.array([d[0], d[1], 0.0]) / sin_i
        r = lat * sin_t + np.array([0.0, 0.0, 1.0]) * cos_t
        entry = d * (z0 / d[2])
        exit_p = entry + r * ((z1 - z0) / r[2])
        tan_w = np.tan(tilt)
        s = (zw + tan_w * exit_p[0] - exit_p[2]) / (d[2] - tan_w * d[0])
        expect = exit_p[2] + s * d[2]
        worst = max(worst, abs(float(ldm.depths[py, px, 2]) - expect))
        checked += 1
    announce(capsys, "A2 refraction-distortion oracle", worst < 1e-3,
             f"max |depth error| {worst:.2e} over 100 pixels, "
             f"{time.time() - t0:.1f}s")


def test_a03_straight_through_equivalence(capsys):
    t0 = time.time()
    from glasstrace.tracecore import compile_scene

    worst = 0.0
    for seed in (2, 8):
        scene = generate_scene(GeneratorConfig(resolution=(48, 64)), seed)
        cs = compile_scene(scene)
        cs.mat_ior[:] = 1.0
        ldm, _ = render_layers(cs, RenderConfig(max_layers=16))
        objs = []
        for o in scene.objects:
            parts = tuple(p for p in o.parts
                          if not isinstance(p.material, Transmissive))
            if parts:
                objs.append(ObjectSpec(o.id, o.family, o.transform, parts))
        bare = SceneSpec(tuple(objs), scene.lights, scene.camera, scene.room,
                         scene.seed, scene.config_hash)
        ldm_bare, _ = render_layers(bare, RenderConfig())
        diff = np.abs(ldm.last_layer() - ldm_bare.layer(1))
        worst = max(worst, float(np.nanmax(diff)))
    announce(capsys, "A3 straight-through equivalence", worst <= 1e-6,
             f"max |depth diff| {worst:.2e}, {time.time() - t0:.1f}s")


def test_a04_determinism_and_budget(capsys, tmp_path):
    t0 = time.time()
    outputs = {}
    for workers in (1, 8):
        d = tmp_path / f"w{workers}"
        assert cli_main(["generate", "--count", "50", "--seed", "100",
                         "--out", str(d)]) == 0
        assert cli_main(["render", "--manifest", str(d / "manifest.json"),
                         "--resolution", "240", "320", "--spp", "1",
                         "--workers", str(workers)]) == 0
        outputs[workers] = {
            name: open(d / name, "rb").read()
            for name in sorted(os.listdir(d)) if not name.endswith(".tmp")}
    elapsed = time.time() - t0
    identical = outputs[1] == outputs[8]
    # the wall-clock budget is stated for 8 cores; pro-rate when fewer
    cores = os.cpu_count() or 1
    budget = 600.0 * max(1.0, 8.0 / cores)
    ok = identical and elapsed < budget
    announce(capsys, "A4 determinism + budget", ok,
             f"byte-identical={identical}, {elapsed:.0f}s elapsed "
             f"(budget {budget:.0f}s on {cores} cores, 600s on 8)")


def _random_annotation_set(rng):
    n = int(rng.integers(2, 9))
    pts = [P(float(x), float(y), int(l)) for x, y, l in
           zip(rng.uniform(0, 63, n), rng.uniform(0, 47, n),
               rng.integers(1, 8, n))]
    n_line = max(2, int(rng.integers(2, n + 1)))
    rest = pts[n_line:]
    k = len(rest) // 2
    if rest and rng.uniform() < 0.5:
        # group sharing its reference with the line's first point, so the
        # closure must connect the two annotations
        return AnnotationSet("img", 64, 48,
                             (MonotonicLine("l", tuple(pts[:n_line])),),
                             (ReferenceGroup("g", pts[0], tuple(rest[:k]),
                                             tuple(rest[k:])),))
    return AnnotationSet("img", 64, 48,
                         (MonotonicLine("l", tuple(pts[:n_line]),
                                        front=tuple(rest[:k]),
                                        behind=tuple(rest[k:])),), ())


def test_a05_tuple_sampler_oracle(capsys):
    t0 = time.time()
    line4 = AnnotationSet("img", 64, 48, (MonotonicLine(
        "l", tuple(P(i + 1, i + 1) for i in range(4))),), ())
    counts = tuple(len(enumerate_chains(line4, k)) for k in (2, 3, 4))
    ok = counts == (6, 4, 1)
    for seed in range(200):
        rng = make_rng(seed, "a5")
        s = _random_annotation_set(rng)
        if validate(s):
            ok = False
            break
        rel = partial_order(s)
        pts = sorted({p for pair in rel for p in pair},
                     key=lambda p: (p.x, p.y, p.layer))
        for k in (2, 3, 4):
            brute = {perm for perm in itertools.permutations(pts, k)
                     if all((a, b) in rel for a, b in zip(perm, perm[1:]))}
            if set(enumerate_chains(s, k)) != brute:
                ok = False
    announce(capsys, "A5 tuple sampler oracle", ok,
             f"4-point line {counts}, 200 random sets vs brute force, "
             f"{time.time() - t0:.1f}s")


def _gt_layer_tuples(gt):
    # only strictly-increasing runs are valid ordinal ground truth;
    # refracted paths can bend back toward the camera, so later layers
    # are not guaranteed deeper
    out = []
    h, w = gt.counts.shape
    for y in range(0, h, 3):
        for x in range(0, w, 3):
            n = int(gt.counts[y, x])
            d = gt.depths[y, x]
            for a in range(1, n):
                if d[a - 1] < d[a]:
                    out.append(RelativeTuple(
                        "pair", (P(x, y, a), P(x, y, a + 1))))
            if n >= 3 and d[0] < d[1] < d[2]:
                out.append(RelativeTuple(
                    "triplet", (P(x, y, 1), P(x, y, 2), P(x, y, 3))))
            if n >= 4 and d[0] < d[1] < d[2] < d[3]:
                out.append(RelativeTuple("quadruplet", tuple(
                    P(x, y, i) for i in range(1, 5))))
    return out


def test_a06_evaluator_consistency(capsys):
    t0 = time.time()
    scene = generate_scene(GeneratorConfig(resolution=(48, 64),
                                           p_transparent=0.8), 6)
    gt, mask = render_layers(scene, RenderConfig())
    tuples = _gt_layer_tuples(gt)
    assert tuples, "fixture produced no tuples"
    report = evaluate(MultiLayer(gt), gt, mask, tuples)
    ok = not report.errors
    for per_subset in report.tuple_cells.values():
        for cell in per_subset.values():
            ok = ok and cell["correct"] == cell["count"]
    for key, cell in report.depth_cells.items():
        ok = ok and abs(cell["AbsRel"]) < 1e-9 \
            and cell["delta1"] == 1.0 and cell["delta2"] == 1.0
    reversed_pred = MultiLayer(LayeredDepthMap(
        gt.counts.copy(), np.asarray(35.0 - gt.depths, dtype=np.float32)))
    rev = tuple_accuracy(reversed_pred, [t for t in tuples if t.kind == "pair"])
    ok = ok and rev["cells"]["pair"]["All"]["correct"] == 0
    announce(capsys, "A6 evaluator consistency", ok,
             f"{len(tuples)} tuples, {len(report.depth_cells)} grid cells, "
             f"{time.time() - t0:.1f}s")


def test_a07_adapted_dominance(capsys):
    t0 = time.time()
    cfg = GeneratorConfig(resolution=(96, 128), p_transparent=0.8,
                          camera_weights=(1.0, 3.0))
    images = 0
    seed = 0
    ok = True
    details = []
    while images < 20 and seed < 200:
        scene = generate_scene(cfg, seed)
        seed += 1
        gt, mask = render_layers(scene, RenderConfig())
        if mask.sum() < 50:
            continue
        rng = make_rng(seed, "a7-noise")
        noise = rng.uniform(0.8, 1.2, size=gt.counts.shape)
        pred = SingleLayer(np.asarray(gt.layer(1), dtype=float) * noise)
        report = evaluate(pred, gt, mask, [], alignments=("metric",))
        a = report.depth_cells["trans/adapted/metric"]["AbsRel"]
        f = report.depth_cells["trans/first/metric"]["AbsRel"]
        l = report.depth_cells["trans/last/metric"]["AbsRel"]
        if not (a <= f + 1e-12 and a <= l + 1e-12):
            ok = False
            details.append(f"seed {seed - 1}: adapted {a:.4f} first {f:.4f} "
                           f"last {l:.4f}")
        images += 1
    ok = ok and images == 20
    announce(capsys, "A7 adapted dominance", ok,
             f"{images} images, {time.time() - t0:.1f}s"
             + ("; " + "; ".join(details) if details else ""))


def test_a08_metric_closed_forms(capsys):
    t0 = time.time()
    rng = make_rng(0, "a8")
    gt = rng.uniform(1.0, 8.0, size=(32, 32))
    mask = np.ones((32, 32), bool)
    absrel, _, d1, _ = depth_metrics(1.2 * gt, gt, mask)
    ok = abs(absrel - 0.2) <= 1e-9 and d1 == 1.0
    aligned = align(2.0 * gt + 1.0, gt, mask, "affine")
    ok = ok and depth_metrics(aligned, gt, mask)[0] <= 1e-9
    for c in (0.5, 3.0):
        expect = np.sqrt(0.15) * abs(np.log(c))
        ok = ok and abs(silog_loss(c * gt, gt, mask) - expect) <= 1e-9
    ok = ok and CLIP_DEFAULT == (0.001, 30.0)
    announce(capsys, "A8 metric closed forms", ok, f"{time.time() - t0:.1f}s")


def test_a09_snap_oracle(capsys):
    t0 = time.time()
    counts = np.array([[3]], dtype=np.uint8)
    depths = np.full((1, 1, 3), np.nan, dtype=np.float32)
    depths[0, 0] = [1.0, 1.2, 3.0]
    snapped = snap_layers(LayeredDepthMap(counts, depths), 5)
    ok = snapped.depths[0, 0].tolist() == pytest.approx([1.0, 1.2, 3.0, 3.0, 3.0])
    again = snap_layers(snapped, 5)
    ok = ok and np.array_equal(snapped.depths, again.depths, equal_nan=True)
    announce(capsys, "A9 snap oracle", bool(ok), f"{time.time() - t0:.1f}s")


def test_a10_random_prediction_baseline(capsys):
    t0 = time.time()
    rng = make_rng(1, "a10")
    gt = rng.uniform(1.0, 10.0, size=(64, 64))
    pred = SingleLayer(rng.uniform(1.0, 10.0, size=(64, 64)))
    tuples = []
    while len(tuples) < 10_000:
        x1, y1, x2, y2 = rng.integers(0, 64, 4)
        if (x1, y1) == (x2, y2):
            continue
        if gt[y1, x1] < gt[y2, x2]:
            tuples.append(RelativeTuple("pair", (P(x1, y1), P(x2, y2))))
        elif gt[y1, x1] > gt[y2, x2]:
            tuples.append(RelativeTuple("pair", (P(x2, y2), P(x1, y1))))
    cell = tuple_accuracy(pred, tuples)["cells"]["pair"]["All"]
    acc = cell["correct"] / cell["count"]
    announce(capsys, "A10 random-prediction baseline", abs(acc - 0.5) < 0.02,
             f"accuracy {acc:.4f} on {cell['count']} pairs, "
             f"{time.time() - t0:.1f}s")


UI_FIXTURE = os.path.join(os.path.dirname(__file__), "..", "frontend",
                          "fixtures", "ui_export.json")


@pytest.mark.skipif(not os.path.exists(UI_FIXTURE),
                    reason="UI export fixture not present")
def test_a11_ui_round_trip(capsys, tmp_path):
    """Primary-side half of A11: the UI export validates and samples
    identically to a hand-written equivalent annotation file."""
    t0 = time.time()
    from glasstrace.annotations import parse_annotations

    with open(UI_FIXTURE, "rb") as f:
        data = f.read()
    aset = parse_annotations(data)
    violations = validate(aset)

    hand = {
        "image_id": aset.image_id,
        "width": aset.width,
        "height": aset.height,
        "lines": [{"id": l.id,
                   "points": [{"x": p.x, "y": p.y, "layer": p.layer}
                              for p in l.points],
                   "front": [{"x": p.x, "y": p.y, "layer": p.layer}
                             for p in l.front],
                   "behind": [{"x": p.x, "y": p.y, "layer": p.layer}
                              for p in l.behind]} for l in aset.lines],
        "groups": [{"id": g.id,
                    "ref": {"x": g.ref.x, "y": g.ref.y, "layer": g.ref.layer},
                    "front": [{"x": p.x, "y": p.y, "layer": p.layer}
                              for p in g.front],
                    "behind": [{"x": p.x, "y": p.y, "layer": p.layer}
                               for p in g.behind]} for g in aset.groups],
    }
    results = []
    for name, payload in (("ui", data), ("hand", json.dumps(hand).encode())):
        d = tmp_path / name
        d.mkdir()
        (d / "a.json").write_bytes(payload)
        out = tmp_path / f"{name}_out"
        assert cli_main(["sample", "--annotations", str(d), "--out", str(out),
                         "--pairs", "4", "--triplets", "2", "--seed", "11"]) == 0
        results.append((out / f"{aset.image_id}.tuples.jsonl").read_bytes())
    ok = violations == [] and results[0] == results[1] and len(results[0]) > 0
    announce(capsys, "A11 UI round trip (primary side)", ok,
             f"violations={violations}, {time.time() - t0:.1f}s")
