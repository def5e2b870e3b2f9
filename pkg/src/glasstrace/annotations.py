"""Relative-depth annotations: monotonic lines, reference groups, tuples.

An annotation encodes a strict partial order over image points.  A
monotonic line orders its vertices front-to-back, with optional extra
points in front of / behind the whole line; a reference group orders
front/behind points around a single reference point.  Annotations are
independent unless they literally share a point (same x, y and layer),
in which case the order is transitively closed through the shared point.

Relative-depth tuples (pairs/triplets/quadruplets) are chains in that
partial order, sampled uniformly without replacement.
"""

from dataclasses import dataclass

from . import canonjson
from .canonjson import FieldError, check_keys
from .rng import make_rng

MAX_LAYER_ID = 7
KIND_SIZES = {"pair": 2, "triplet": 3, "quadruplet": 4}
COUNT_KEYS = {"pair": "pairs", "triplet": "triplets", "quadruplet": "quadruplets"}


@dataclass(frozen=True)
class AnnotatedPoint:
    x: float
    y: float
    layer: int


@dataclass(frozen=True)
class MonotonicLine:
    id: str
    points: tuple   # ordered by strictly increasing depth
    front: tuple = ()
    behind: tuple = ()


@dataclass(frozen=True)
class ReferenceGroup:
    id: str
    ref: AnnotatedPoint
    front: tuple = ()
    behind: tuple = ()


@dataclass(frozen=True)
class AnnotationSet:
    image_id: str
    width: int
    height: int
    lines: tuple = ()
    groups: tuple = ()


@dataclass(frozen=True)
class RelativeTuple:
    kind: str        # pair | triplet | quadruplet
    points: tuple    # earlier = strictly smaller depth
    source: tuple = ()   # contributing annotation ids
    tags: tuple = ()     # subset tags, computed


# ---------------------------------------------------------------------------
# validation


def _all_points(aset: AnnotationSet):
    for line in aset.lines:
        yield from line.points
        yield from line.front
        yield from line.behind
    for grp in aset.groups:
        yield grp.ref
        yield from grp.front
        yield from grp.behind


def validate(aset: AnnotationSet):
    """All invariant violations in the set; empty means well-formed."""
    out = []
    ids = []
    for ann in list(aset.lines) + list(aset.groups):
        ids.append(ann.id)
    for i in sorted({x for x in ids if ids.count(x) > 1}):
        out.append(f"id {i!r}: duplicate annotation id")

    for p in _all_points(aset):
        if not (0 <= p.x < aset.width and 0 <= p.y < aset.height):
            out.append(f"point ({p.x}, {p.y}): outside image bounds "
                       f"{aset.width}x{aset.height}")
        if not (1 <= p.layer <= MAX_LAYER_ID):
            out.append(f"point ({p.x}, {p.y}): layer {p.layer} outside "
                       f"1..{MAX_LAYER_ID}")

    for line in aset.lines:
        if len(line.points) < 2:
            out.append(f"line {line.id!r}: requires >=2 points")
        seen = set()
        for p in list(line.points) + list(line.front) + list(line.behind):
            if p in seen:
                out.append(f"line {line.id!r}: point ({p.x}, {p.y}, {p.layer}) "
                           "appears twice")
            seen.add(p)

    for grp in aset.groups:
        if not grp.front and not grp.behind:
            out.append(f"group {grp.id!r}: needs at least one front or behind point")
        seen = set()
        for p in list(grp.front) + list(grp.behind):
            if p == grp.ref:
                out.append(f"group {grp.id!r}: reference also listed as "
                           "front/behind")
            if p in seen:
                out.append(f"group {grp.id!r}: point ({p.x}, {p.y}, {p.layer}) "
                           "appears twice")
            seen.add(p)

    if not out and _has_cycle(_base_edges(aset)):
        out.append("annotation set: depth order contains a cycle")
    return out


def _base_edges(aset: AnnotationSet):
    """Direct (non-closed) a-before-b edges implied by each annotation."""
    edges = set()
    for line in aset.lines:
        for a, b in zip(line.points, line.points[1:]):
            edges.add((a, b))
        for f in line.front:
            for p in line.points:
                edges.add((f, p))
        for p in line.points:
            for b in line.behind:
                edges.add((p, b))
        for f in line.front:
            for b in line.behind:
                edges.add((f, b))
    for grp in aset.groups:
        for f in grp.front:
            edges.add((f, grp.ref))
            for b in grp.behind:
                edges.add((f, b))
        for b in grp.behind:
            edges.add((grp.ref, b))
    return edges


def _has_cycle(edges):
    succ = {}
    for a, b in edges:
        succ.setdefault(a, []).append(b)
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {}

    def visit(u):
        color[u] = GRAY
        for v in succ.get(u, ()):
            c = color.get(v, WHITE)
            if c == GRAY:
                return True
            if c == WHITE and visit(v):
                return True
        color[u] = BLACK
        return False

    return any(color.get(u, WHITE) == WHITE and visit(u) for u in list(succ))


def partial_order(aset: AnnotationSet):
    """Transitive closure of the annotation order as a set of (a, b) pairs.

    Shared points (identical x, y, layer) connect annotations; otherwise
    annotations stay unrelated.
    """
    edges = _base_edges(aset)
    succ = {}
    for a, b in edges:
        succ.setdefault(a, set()).add(b)
    # closure by repeated squaring over the (small) point graph
    changed = True
    while changed:
        changed = False
        for a, bs in succ.items():
            add = set()
            for b in bs:
                add |= succ.get(b, set())
            if not add <= bs:
                bs |= add
                changed = True
    return {(a, b) for a, bs in succ.items() for b in bs}


# ---------------------------------------------------------------------------
# tuple sampling


def _point_key(p):
    return (p.x, p.y, p.layer)


def enumerate_chains(aset: AnnotationSet, length: int):
    """All strictly-ordered chains of the given length, canonically sorted."""
    order = partial_order(aset)
    succ = {}
    for a, b in order:
        succ.setdefault(a, []).append(b)
    for a in succ:
        succ[a].sort(key=_point_key)
    starts = sorted(succ, key=_point_key)

    chains = []

    def extend(chain):
        if len(chain) == length:
            chains.append(tuple(chain))
            return
        for nxt in succ.get(chain[-1], ()):
            chain.append(nxt)
            extend(chain)
            chain.pop()

    for s in starts:
        extend([s])
    return chains


def _source_ids(aset: AnnotationSet, chain):
    pts = set(chain)
    ids = []
    for line in aset.lines:
        if pts & set(list(line.points) + list(line.front) + list(line.behind)):
            ids.append(line.id)
    for grp in aset.groups:
        if pts & set([grp.ref] + list(grp.front) + list(grp.behind)):
            ids.append(grp.id)
    return tuple(ids)


def classify_subsets(t: RelativeTuple):
    """Subset tags: always All; Mixed xor Layer-i."""
    layers = {p.layer for p in t.points}
    if len(layers) == 1:
        return ("All", f"Layer-{layers.pop()}")
    return ("All", "Mixed")


def sample_tuples(aset: AnnotationSet, counts: dict, seed: int):
    """Uniform seeded chain sampling without replacement.

    counts maps {"pairs": n, "triplets": n, "quadruplets": n} (missing
    keys mean zero).  Returns (tuples, exhausted) where exhausted flags
    the kinds with fewer available chains than requested.
    """
    out = []
    exhausted = {}
    for kind, size in KIND_SIZES.items():
        want = int(counts.get(COUNT_KEYS[kind], 0))
        if want < 0:
            raise ValueError(f"negative tuple count for {kind}")
        if want == 0:
            continue
        chains = enumerate_chains(aset, size)
        exhausted[kind] = len(chains) < want
        take = min(want, len(chains))
        rng = make_rng(seed, f"tuples-{aset.image_id}-{kind}")
        idx = sorted(rng.choice(len(chains), size=take, replace=False)) if take else []
        for i in idx:
            chain = chains[i]
            t = RelativeTuple(kind, chain, _source_ids(aset, chain))
            out.append(RelativeTuple(kind, chain, t.source, classify_subsets(t)))
    return out, exhausted


# ---------------------------------------------------------------------------
# serialization


def _point_json(p: AnnotatedPoint):
    return {"x": p.x, "y": p.y, "layer": p.layer}


def annotations_to_json(aset: AnnotationSet) -> dict:
    return {
        "image_id": aset.image_id,
        "width": aset.width,
        "height": aset.height,
        "lines": [{"id": l.id,
                   "points": [_point_json(p) for p in l.points],
                   "front": [_point_json(p) for p in l.front],
                   "behind": [_point_json(p) for p in l.behind]}
                  for l in aset.lines],
        "groups": [{"id": g.id,
                    "ref": _point_json(g.ref),
                    "front": [_point_json(p) for p in g.front],
                    "behind": [_point_json(p) for p in g.behind]}
                   for g in aset.groups],
    }


def serialize_annotations(aset: AnnotationSet) -> bytes:
    return canonjson.dumps(annotations_to_json(aset))


def _parse_point(obj, path):
    check_keys(obj, path, required=("x", "y", "layer"))
    if not isinstance(obj["layer"], int) or isinstance(obj["layer"], bool):
        raise FieldError(f"{path}.layer", "must be an integer")
    for k in ("x", "y"):
        if not isinstance(obj[k], (int, float)) or isinstance(obj[k], bool):
            raise FieldError(f"{path}.{k}", "must be a number")
    return AnnotatedPoint(float(obj["x"]), float(obj["y"]), obj["layer"])


def _parse_points(arr, path):
    if not isinstance(arr, list):
        raise FieldError(path, "must be an array")
    return tuple(_parse_point(p, f"{path}[{i}]") for i, p in enumerate(arr))


def annotations_from_json(doc: dict) -> AnnotationSet:
    check_keys(doc, "$", required=("image_id", "width", "height", "lines", "groups"))
    if not isinstance(doc["image_id"], str):
        raise FieldError("$.image_id", "must be a string")
    for k in ("width", "height"):
        if not isinstance(doc[k], int) or isinstance(doc[k], bool) or doc[k] < 1:
            raise FieldError(f"$.{k}", "must be a positive integer")
    lines = []
    for i, obj in enumerate(doc["lines"]):
        path = f"$.lines[{i}]"
        check_keys(obj, path, required=("id", "points", "front", "behind"))
        lines.append(MonotonicLine(obj["id"],
                                   _parse_points(obj["points"], f"{path}.points"),
                                   _parse_points(obj["front"], f"{path}.front"),
                                   _parse_points(obj["behind"], f"{path}.behind")))
    groups = []
    for i, obj in enumerate(doc["groups"]):
        path = f"$.groups[{i}]"
        check_keys(obj, path, required=("id", "ref", "front", "behind"))
        groups.append(ReferenceGroup(obj["id"],
                                     _parse_point(obj["ref"], f"{path}.ref"),
                                     _parse_points(obj["front"], f"{path}.front"),
                                     _parse_points(obj["behind"], f"{path}.behind")))
    return AnnotationSet(doc["image_id"], doc["width"], doc["height"],
                         tuple(lines), tuple(groups))


def parse_annotations(data) -> AnnotationSet:
    return annotations_from_json(canonjson.loads(data))


def tuple_to_json(image_id: str, t: RelativeTuple) -> dict:
    return {"image_id": image_id, "kind": t.kind,
            "points": [_point_json(p) for p in t.points],
            "tags": list(t.tags)}


def serialize_tuples(image_id: str, tuples) -> bytes:
    """JSON-Lines: one canonical-JSON tuple per line."""
    return b"".join(canonjson.dumps(tuple_to_json(image_id, t)) for t in tuples)


def parse_tuples(data: bytes):
    """Parse tuples JSONL; returns a list of (image_id, RelativeTuple)."""
    out = []
    for i, line in enumerate(data.splitlines()):
        if not line.strip():
            continue
        doc = canonjson.loads(line)
        path = f"line {i + 1}"
        check_keys(doc, path, required=("image_id", "kind", "points", "tags"))
        kind = doc["kind"]
        if kind not in KIND_SIZES:
            raise FieldError(f"{path}.kind", f"unknown kind {kind!r}")
        pts = _parse_points(doc["points"], f"{path}.points")
        if len(pts) != KIND_SIZES[kind]:
            raise FieldError(f"{path}.points",
                             f"{kind} requires {KIND_SIZES[kind]} points, got {len(pts)}")
        if not isinstance(doc["tags"], list):
            raise FieldError(f"{path}.tags", "must be an array")
        out.append((doc["image_id"],
                    RelativeTuple(kind, pts, (), tuple(doc["tags"]))))
    return out
