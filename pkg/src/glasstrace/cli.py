"""Command-line entry points for dataset-scale runs.

Subcommands: generate, render, sample, eval, stats, snap.  Machine
output is JSON on stdout; progress and warnings go to stderr.  All file
writes are atomic (temp file + rename) so an interrupted run never
leaves partial artifacts.  Exit codes: 0 success, 1 partial failure,
2 invalid invocation.
"""

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import canonjson
from .annotations import parse_annotations, parse_tuples, sample_tuples, \
    serialize_tuples, validate
from .canonjson import FieldError
from .generate import GenerationError, GeneratorConfig, config_hash, generate_scene
from .ldgt import LdgtError, pack_ldgt, read_ldgt
from .metrics import ALIGNMENTS, CLIP_DEFAULT, STRATEGIES, MultiLayer, \
    SingleLayer, evaluate, snap_layers
from .render import RenderConfig, render_layers, render_rgb, write_png
from .scene import parse_scene, serialize_scene

MANIFEST_VERSION = 1
EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2


def log(msg):
    print(msg, file=sys.stderr, flush=True)


def emit(obj):
    sys.stdout.buffer.write(canonjson.dumps(obj))
    sys.stdout.flush()


def atomic_write(path, data: bytes):
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# manifest


def manifest_path(out_dir):
    return os.path.join(out_dir, "manifest.json")


def load_manifest(path):
    with open(path, "rb") as f:
        doc = canonjson.loads(f.read())
    if doc.get("version") != MANIFEST_VERSION:
        raise FieldError("$.version", f"unsupported manifest version "
                         f"{doc.get('version')!r}")
    return doc


def save_manifest(out_dir, manifest):
    atomic_write(manifest_path(out_dir), canonjson.dumps(manifest))


# ---------------------------------------------------------------------------
# generate


def cmd_generate(args):
    if args.count < 1:
        log("error: --count must be >= 1")
        return EXIT_USAGE
    try:
        if args.config:
            with open(args.config, "rb") as f:
                cfg = GeneratorConfig.from_json(canonjson.loads(f.read()))
        else:
            cfg = GeneratorConfig()
    except (OSError, ValueError) as e:
        log(f"error: invalid generator config: {e}")
        return EXIT_USAGE
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as e:
        log(f"error: cannot create output dir: {e}")
        return EXIT_USAGE

    n_val = int(round(args.count * cfg.val_fraction))
    records = []
    failed = []
    for i in range(args.count):
        seed = args.seed + i
        scene_id = f"scene_{seed}"
        rel = f"{scene_id}.json"
        path = os.path.join(args.out, rel)
        split = "val" if i >= args.count - n_val else "train"
        if not (args.resume and os.path.exists(path)):
            try:
                scene = generate_scene(cfg, seed)
            except GenerationError as e:
                log(f"warning: {scene_id}: {e}")
                failed.append(scene_id)
                continue
            atomic_write(path, serialize_scene(scene))
            log(f"generated {rel}")
        records.append({"scene_id": scene_id, "seed": seed,
                        "scene_path": rel, "split": split})

    manifest = {"version": MANIFEST_VERSION, "config_hash": config_hash(cfg),
                "records": records}
    save_manifest(args.out, manifest)
    emit({"manifest": manifest_path(args.out), "scenes": len(records),
          "failed": failed})
    return EXIT_PARTIAL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# render


def _render_one(task):
    """Render both passes for one scene; runs in a worker process."""
    scene_path, rgb_path, ldgt_path, cfg_kwargs = task
    with open(scene_path, "rb") as f:
        scene = parse_scene(f.read())
    cfg = RenderConfig(**cfg_kwargs)
    ldm, mask = render_layers(scene, cfg)
    img = render_rgb(scene, cfg)
    atomic_write(ldgt_path, pack_ldgt(ldm, mask))
    tmp = f"{rgb_path}.tmp"
    write_png(img, tmp)
    os.replace(tmp, rgb_path)


def cmd_render(args):
    try:
        manifest = load_manifest(args.manifest)
    except (OSError, ValueError) as e:
        log(f"error: cannot read manifest: {e}")
        return EXIT_USAGE
    root = os.path.dirname(os.path.abspath(args.manifest))
    cfg_kwargs = {"spp": args.spp, "max_layers": args.max_layers,
                  "seed": args.render_seed}
    if args.resolution:
        cfg_kwargs["resolution"] = tuple(args.resolution)

    tasks = []
    for rec in manifest["records"]:
        rec.setdefault("rgb_path", f"{rec['scene_id']}.png")
        rec.setdefault("ldgt_path", f"{rec['scene_id']}.ldgt")
        rgb = os.path.join(root, rec["rgb_path"])
        ldgt = os.path.join(root, rec["ldgt_path"])
        if args.resume and os.path.exists(rgb) and os.path.exists(ldgt):
            continue
        tasks.append((rec["scene_id"],
                      (os.path.join(root, rec["scene_path"]), rgb, ldgt,
                       cfg_kwargs)))

    failed = []
    workers = args.workers or os.cpu_count() or 1
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {sid: pool.submit(_render_one, t) for sid, t in tasks}
        for sid, fut in futures.items():
            err = fut.exception()
            if err is not None:
                log(f"warning: {sid}: {err}")
                failed.append(sid)
            else:
                log(f"rendered {sid}")
    else:
        for sid, t in tasks:
            try:
                _render_one(t)
                log(f"rendered {sid}")
            except Exception as e:
                log(f"warning: {sid}: {e}")
                failed.append(sid)

    save_manifest(root, manifest)
    emit({"rendered": len(tasks) - len(failed), "failed": failed,
          "skipped": len(manifest["records"]) - len(tasks)})
    return EXIT_PARTIAL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# sample


def cmd_sample(args):
    counts = {"pairs": args.pairs, "triplets": args.triplets,
              "quadruplets": args.quadruplets}
    os.makedirs(args.out, exist_ok=True)
    names = sorted(n for n in os.listdir(args.annotations) if n.endswith(".json"))
    totals = {"pair": 0, "triplet": 0, "quadruplet": 0}
    subset_counts = {}
    skipped = []
    images = []
    for name in names:
        path = os.path.join(args.annotations, name)
        try:
            with open(path, "rb") as f:
                aset = parse_annotations(f.read())
            violations = validate(aset)
            if violations:
                raise ValueError("; ".join(violations))
        except (OSError, ValueError) as e:
            log(f"warning: {name}: {e}")
            skipped.append({"file": name, "error": str(e)})
            continue
        tuples, exhausted = sample_tuples(aset, counts, args.seed)
        out_name = f"{aset.image_id}.tuples.jsonl"
        atomic_write(os.path.join(args.out, out_name),
                     serialize_tuples(aset.image_id, tuples))
        for t in tuples:
            totals[t.kind] += 1
            for tag in t.tags:
                subset_counts[tag] = subset_counts.get(tag, 0) + 1
        images.append({"image_id": aset.image_id, "file": out_name,
                       "tuples": len(tuples),
                       "exhausted": sorted(k for k, v in exhausted.items() if v)})
    emit({"totals": totals, "subsets": subset_counts, "images": images,
          "skipped": skipped})
    return EXIT_PARTIAL if skipped else EXIT_OK


# ---------------------------------------------------------------------------
# eval


def _merge_reports(reports):
    """Order-independent reduction over per-image reports (sums, not means)."""
    tuple_cells = {}
    depth_sums = {}
    errors = []
    skipped = 0
    for rep in reports:
        skipped += rep.tuple_skipped
        errors.extend(rep.errors)
        for kind, per_subset in rep.tuple_cells.items():
            for sub, cell in per_subset.items():
                agg = tuple_cells.setdefault(kind, {}).setdefault(
                    sub, {"correct": 0, "count": 0})
                agg["correct"] += cell["correct"]
                agg["count"] += cell["count"]
        for key, cell in rep.depth_cells.items():
            n = cell["pixels"]
            agg = depth_sums.setdefault(key, {"abs": 0.0, "sq": 0.0,
                                              "d1": 0.0, "d2": 0.0, "n": 0})
            agg["abs"] += cell["AbsRel"] * n
            agg["sq"] += cell["RMS"] ** 2 * n
            agg["d1"] += cell["delta1"] * n
            agg["d2"] += cell["delta2"] * n
            agg["n"] += n
    from .metrics import EvalReport

    merged = EvalReport(tuple_cells=tuple_cells, tuple_skipped=skipped,
                        errors=errors)
    for key, s in depth_sums.items():
        n = s["n"]
        merged.depth_cells[key] = {
            "AbsRel": s["abs"] / n, "RMS": float(np.sqrt(s["sq"] / n)),
            "delta1": s["d1"] / n, "delta2": s["d2"] / n, "pixels": n}
    return merged


def _image_ids(directory):
    return sorted(n[:-5] for n in os.listdir(directory) if n.endswith(".ldgt"))


def cmd_eval(args):
    strategies = args.strategy or list(STRATEGIES)
    alignments = args.alignment or list(ALIGNMENTS)
    clip = tuple(args.clip)
    if not os.path.isdir(args.gt) or not os.path.isdir(args.pred):
        log("error: --gt and --pred must be directories of .ldgt files")
        return EXIT_USAGE

    reports = []
    unevaluated = []
    for image_id in _image_ids(args.gt):
        gt_path = os.path.join(args.gt, f"{image_id}.ldgt")
        pred_path = os.path.join(args.pred, f"{image_id}.ldgt")
        if not os.path.exists(pred_path):
            log(f"warning: {image_id}: missing prediction")
            unevaluated.append(image_id)
            continue
        try:
            gt, mask = read_ldgt(gt_path)
            pred_ldm, _ = read_ldgt(pred_path)
        except LdgtError as e:
            log(f"warning: {image_id}: {e}")
            unevaluated.append(image_id)
            continue
        if mask is None:
            mask = np.zeros(gt.counts.shape, dtype=bool)
        if pred_ldm.max_layers == 1:
            pred = SingleLayer(pred_ldm.layer(1))
        else:
            pred = MultiLayer(pred_ldm)
        tuples = []
        if args.tuples:
            tpath = os.path.join(args.tuples, f"{image_id}.tuples.jsonl")
            if os.path.exists(tpath):
                with open(tpath, "rb") as f:
                    tuples = [t for _, t in parse_tuples(f.read())]
        if args.mask == "trans" and not mask.any():
            log(f"warning: {image_id}: empty trans mask")
        reports.append(evaluate(
            pred, gt, mask, tuples, strategies=strategies,
            alignments=alignments, clip=clip,
            provenance={"image_id": image_id,
                        "gt_sha256": file_sha256(gt_path),
                        "pred_sha256": file_sha256(pred_path)}))

    merged = _merge_reports(reports)
    merged.clip = clip
    merged.provenance = {"images": len(reports), "unevaluated": unevaluated}
    if args.mask != "both":
        merged.depth_cells = {k: v for k, v in merged.depth_cells.items()
                              if k.startswith(f"{args.mask}/")}
    data = merged.serialize()
    if args.out:
        atomic_write(args.out, data)
        emit({"report": args.out, "images": len(reports),
              "unevaluated": unevaluated})
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return EXIT_PARTIAL if unevaluated else EXIT_OK


# ---------------------------------------------------------------------------
# stats


def cmd_stats(args):
    try:
        manifest = load_manifest(args.manifest)
    except (OSError, ValueError) as e:
        log(f"error: cannot read manifest: {e}")
        return EXIT_USAGE
    root = os.path.dirname(os.path.abspath(args.manifest))
    splits = {}
    missing = []
    trans_fracs = []
    hist = {}
    for rec in manifest["records"]:
        splits[rec["split"]] = splits.get(rec["split"], 0) + 1
        ldgt_rel = rec.get("ldgt_path")
        path = os.path.join(root, ldgt_rel) if ldgt_rel else None
        if not path or not os.path.exists(path):
            missing.append(rec["scene_id"])
            continue
        ldm, mask = read_ldgt(path)
        if mask is not None:
            trans_fracs.append(float(mask.mean()))
        counts, freq = np.unique(ldm.counts, return_counts=True)
        for c, n in zip(counts, freq):
            hist[int(c)] = hist.get(int(c), 0) + int(n)
    emit({
        "images": len(manifest["records"]),
        "splits": splits,
        "mean_trans_fraction": (float(np.mean(trans_fracs))
                                if trans_fracs else 0.0),
        "layer_histogram": {str(k): v for k, v in sorted(hist.items())},
        "missing": missing,
    })
    return EXIT_PARTIAL if missing else EXIT_OK


# ---------------------------------------------------------------------------
# snap


def cmd_snap(args):
    if args.target < 1:
        log("error: --target must be >= 1")
        return EXIT_USAGE
    try:
        ldm, mask = read_ldgt(args.input)
    except (OSError, LdgtError) as e:
        log(f"error: {e}")
        return EXIT_USAGE
    snapped = snap_layers(ldm, args.target)
    atomic_write(args.out, pack_ldgt(snapped, mask))
    emit({"out": args.out, "target": args.target,
          "height": snapped.height, "width": snapped.width})
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser():
    ap = argparse.ArgumentParser(prog="glasstrace",
                                 description="transparent-scene depth toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate procedural scenes")
    g.add_argument("--config", help="generator config JSON")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=0, help="base seed")
    g.add_argument("--out", required=True)
    g.add_argument("--resume", action="store_true")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("render", help="render RGB + layered depth")
    r.add_argument("--manifest", required=True)
    r.add_argument("--spp", type=int, default=4)
    r.add_argument("--max-layers", type=int, default=8)
    r.add_argument("--resolution", type=int, nargs=2, metavar=("H", "W"))
    r.add_argument("--render-seed", type=int, default=0)
    r.add_argument("--workers", type=int, default=0,
                   help="0 = logical core count")
    r.add_argument("--resume", action="store_true")
    r.set_defaults(func=cmd_render)

    s = sub.add_parser("sample", help="sample relative-depth tuples")
    s.add_argument("--annotations", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--pairs", type=int, default=0)
    s.add_argument("--triplets", type=int, default=0)
    s.add_argument("--quadruplets", type=int, default=0)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("eval", help="evaluate predictions")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--tuples", help="dir of .tuples.jsonl files")
    e.add_argument("--mask", choices=["all", "trans", "both"], default="both")
    e.add_argument("--strategy", action="append", choices=list(STRATEGIES))
    e.add_argument("--alignment", action="append", choices=list(ALIGNMENTS))
    e.add_argument("--clip", type=float, nargs=2, default=list(CLIP_DEFAULT))
    e.add_argument("--out", help="write report here instead of stdout")
    e.set_defaults(func=cmd_eval)

    st = sub.add_parser("stats", help="dataset statistics")
    st.add_argument("--manifest", required=True)
    st.set_defaults(func=cmd_stats)

    sn = sub.add_parser("snap", help="snapped layered depth")
    sn.add_argument("--input", required=True)
    sn.add_argument("--out", required=True)
    sn.add_argument("--target", type=int, required=True)
    sn.set_defaults(func=cmd_snap)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
