"""Scene description: materials, shapes, lights, room shell, serialization.

A SceneSpec is plain data (tuples, not arrays) so it hashes, compares and
serializes deterministically.  Shapes live in object-local coordinates; a
rigid transform (y-rotation + translation + uniform scale) places each
object in the room.  `lathe` is the parametric constructor for watertight
solids of revolution (vessels, bottles); it lowers to a triangle mesh when
the scene is compiled for tracing.
"""

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from . import canonjson
from .canonjson import FieldError, check_keys
from .geometry import Box, CameraModel, Quad, Sphere, TriangleMesh

IOR_TABLE = {"glass": 1.50, "plastic": 1.46, "water": 1.33, "ice": 1.31}


# ---------------------------------------------------------------------------
# materials


@dataclass(frozen=True)
class Diffuse:
    albedo: tuple  # rgb in [0,1]


@dataclass(frozen=True)
class Transmissive:
    ior: float
    tint: tuple
    substance: str  # glass | plastic | water | ice

    def __post_init__(self):
        if not (1.01 <= self.ior <= 2.5):
            raise ValueError(f"ior out of range: {self.ior}")


# ---------------------------------------------------------------------------
# shapes


@dataclass(frozen=True)
class Lathe:
    """Closed profile (r, y) revolved around the local y axis.

    The profile must start and end on the axis (r == 0) so the resulting
    mesh is watertight.
    """

    profile: tuple  # ((r, y), ...)
    segments: int

    def __post_init__(self):
        if len(self.profile) < 3:
            raise ValueError("lathe profile needs >= 3 points")
        if self.profile[0][0] != 0.0 or self.profile[-1][0] != 0.0:
            raise ValueError("lathe profile must start and end on the axis")
        if self.segments < 3:
            raise ValueError("lathe needs >= 3 segments")


def lathe_mesh(lathe: Lathe) -> TriangleMesh:
    prof = lathe.profile
    s = lathe.segments
    angles = 2.0 * math.pi * np.arange(s) / s
    ca, sa = np.cos(angles), np.sin(angles)
    verts = [np.array([0.0, prof[0][1], 0.0])]
    ring_of = {}
    for j in range(1, len(prof) - 1):
        r, y = prof[j]
        ring_of[j] = len(verts)
        for i in range(s):
            verts.append(np.array([r * ca[i], y, r * sa[i]]))
    top = len(verts)
    verts.append(np.array([0.0, prof[-1][1], 0.0]))

    faces = []
    first = ring_of[1]
    for i in range(s):
        faces.append([0, first + i, first + (i + 1) % s])
    for j in range(1, len(prof) - 2):
        a, b = ring_of[j], ring_of[j + 1]
        for i in range(s):
            i2 = (i + 1) % s
            faces.append([a + i, b + i, b + i2])
            faces.append([a + i, b + i2, a + i2])
    last = ring_of[len(prof) - 2]
    for i in range(s):
        faces.append([top, last + (i + 1) % s, last + i])
    return TriangleMesh(np.stack(verts), np.array(faces, dtype=np.int64))


@dataclass(frozen=True)
class Transform:
    rotation_y: float
    translation: tuple
    scale: float

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("transform scale must be > 0")

    def matrix(self):
        c, s = math.cos(self.rotation_y), math.sin(self.rotation_y)
        rot = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
        return rot * self.scale, np.array(self.translation, dtype=float)


IDENTITY = Transform(0.0, (0.0, 0.0, 0.0), 1.0)


def shape_is_watertight(shape) -> bool:
    """Only closed volumes may carry transmissive materials."""
    return isinstance(shape, (Sphere, Box, Lathe))


@dataclass(frozen=True)
class Part:
    name: str
    shape: object  # Sphere | Quad | Box | Lathe
    material: object  # Diffuse | Transmissive

    def __post_init__(self):
        if isinstance(self.material, Transmissive) and not shape_is_watertight(self.shape):
            raise ValueError(f"part {self.name!r}: transmissive material on open surface")


@dataclass(frozen=True)
class ObjectSpec:
    id: str
    family: str
    transform: Transform
    parts: tuple

    def __post_init__(self):
        if not self.parts:
            raise ValueError("object needs at least one part")


# ---------------------------------------------------------------------------
# lights


@dataclass(frozen=True)
class PointLight:
    position: tuple
    intensity: tuple


@dataclass(frozen=True)
class AreaLight:
    corner: tuple
    edge_u: tuple
    edge_v: tuple
    emission: tuple


@dataclass(frozen=True)
class DiscoEmitter:
    position: tuple
    color: tuple  # saturated hue: max component 1.0
    power: float


@dataclass(frozen=True)
class DiscoLight:
    position: tuple
    emitters: tuple  # of DiscoEmitter


@dataclass(frozen=True)
class EnvironmentLight:
    sky: tuple


@dataclass(frozen=True)
class RoomQuad:
    name: str
    corner: tuple
    edge_u: tuple
    edge_v: tuple
    albedo: tuple


@dataclass(frozen=True)
class SceneSpec:
    objects: tuple
    lights: tuple
    camera: CameraModel
    room: tuple  # of RoomQuad
    seed: int
    config_hash: str

    def __post_init__(self):
        if not self.lights:
            raise ValueError("scene needs at least one light")


# ---------------------------------------------------------------------------
# serialization


def _v(t):
    return [float(x) for x in t]


def _shape_json(shape):
    if isinstance(shape, Sphere):
        return {"kind": "sphere", "center": _v(shape.center), "radius": float(shape.radius)}
    if isinstance(shape, Quad):
        return {"kind": "quad", "corner": _v(shape.corner), "edge_u": _v(shape.edge_u),
                "edge_v": _v(shape.edge_v)}
    if isinstance(shape, Box):
        return {"kind": "box", "min": _v(shape.bmin), "max": _v(shape.bmax)}
    if isinstance(shape, Lathe):
        return {"kind": "lathe", "profile": [[float(r), float(y)] for r, y in shape.profile],
                "segments": int(shape.segments)}
    raise canonjson.CanonError(f"unserializable shape {type(shape).__name__}")


def _material_json(mat):
    if isinstance(mat, Diffuse):
        return {"kind": "diffuse", "albedo": _v(mat.albedo)}
    return {"kind": "transmissive", "ior": float(mat.ior), "tint": _v(mat.tint),
            "substance": mat.substance}


def _light_json(light):
    if isinstance(light, PointLight):
        return {"kind": "point", "position": _v(light.position), "intensity": _v(light.intensity)}
    if isinstance(light, AreaLight):
        return {"kind": "area", "corner": _v(light.corner), "edge_u": _v(light.edge_u),
                "edge_v": _v(light.edge_v), "emission": _v(light.emission)}
    if isinstance(light, DiscoLight):
        return {"kind": "disco", "position": _v(light.position),
                "emitters": [{"position": _v(e.position), "color": _v(e.color),
                              "power": float(e.power)} for e in light.emitters]}
    return {"kind": "environment", "sky": _v(light.sky)}


def scene_to_json(spec: SceneSpec) -> dict:
    return {
        "camera": {
            "position": _v(spec.camera.position), "right": _v(spec.camera.right),
            "up": _v(spec.camera.up), "forward": _v(spec.camera.forward),
            "fov_y": float(spec.camera.fov_y),
            "height": spec.camera.height, "width": spec.camera.width,
        },
        "lights": [_light_json(l) for l in spec.lights],
        "objects": [
            {
                "id": o.id, "family": o.family,
                "transform": {"rotation_y": float(o.transform.rotation_y),
                              "translation": _v(o.transform.translation),
                              "scale": float(o.transform.scale)},
                "parts": [{"name": p.name, "shape": _shape_json(p.shape),
                           "material": _material_json(p.material)} for p in o.parts],
            }
            for o in spec.objects
        ],
        "room": [{"name": q.name, "corner": _v(q.corner), "edge_u": _v(q.edge_u),
                  "edge_v": _v(q.edge_v), "albedo": _v(q.albedo)} for q in spec.room],
        "provenance": {"seed": int(spec.seed), "config_hash": spec.config_hash},
    }


def serialize_scene(spec: SceneSpec) -> bytes:
    return canonjson.dumps(scene_to_json(spec))


def _t3(obj, path):
    if not (isinstance(obj, list) and len(obj) == 3):
        raise FieldError(path, "expected 3-vector")
    return tuple(float(x) for x in obj)


def _parse_shape(obj, path):
    check_keys(obj, path, ["kind"], ["center", "radius", "corner", "edge_u", "edge_v",
                                     "min", "max", "profile", "segments"])
    kind = obj["kind"]
    if kind == "sphere":
        check_keys(obj, path, ["kind", "center", "radius"])
        return Sphere(np.array(_t3(obj["center"], path + ".center")), float(obj["radius"]))
    if kind == "quad":
        check_keys(obj, path, ["kind", "corner", "edge_u", "edge_v"])
        return Quad(np.array(_t3(obj["corner"], path + ".corner")),
                    np.array(_t3(obj["edge_u"], path + ".edge_u")),
                    np.array(_t3(obj["edge_v"], path + ".edge_v")))
    if kind == "box":
        check_keys(obj, path, ["kind", "min", "max"])
        return Box(np.array(_t3(obj["min"], path + ".min")),
                   np.array(_t3(obj["max"], path + ".max")))
    if kind == "lathe":
        check_keys(obj, path, ["kind", "profile", "segments"])
        return Lathe(tuple((float(r), float(y)) for r, y in obj["profile"]),
                     int(obj["segments"]))
    raise FieldError(path + ".kind", f"unknown shape kind {kind!r}")


def _parse_material(obj, path):
    kind = obj.get("kind")
    if kind == "diffuse":
        check_keys(obj, path, ["kind", "albedo"])
        return Diffuse(_t3(obj["albedo"], path + ".albedo"))
    if kind == "transmissive":
        check_keys(obj, path, ["kind", "ior", "tint", "substance"])
        return Transmissive(float(obj["ior"]), _t3(obj["tint"], path + ".tint"),
                            str(obj["substance"]))
    raise FieldError(path + ".kind", f"unknown material kind {kind!r}")


def _parse_light(obj, path):
    kind = obj.get("kind")
    if kind == "point":
        check_keys(obj, path, ["kind", "position", "intensity"])
        return PointLight(_t3(obj["position"], path), _t3(obj["intensity"], path))
    if kind == "area":
        check_keys(obj, path, ["kind", "corner", "edge_u", "edge_v", "emission"])
        return AreaLight(_t3(obj["corner"], path), _t3(obj["edge_u"], path),
                         _t3(obj["edge_v"], path), _t3(obj["emission"], path))
    if kind == "disco":
        check_keys(obj, path, ["kind", "position", "emitters"])
        emitters = []
        for i, e in enumerate(obj["emitters"]):
            epath = f"{path}.emitters[{i}]"
            check_keys(e, epath, ["position", "color", "power"])
            emitters.append(DiscoEmitter(_t3(e["position"], epath), _t3(e["color"], epath),
                                         float(e["power"])))
        return DiscoLight(_t3(obj["position"], path), tuple(emitters))
    if kind == "environment":
        check_keys(obj, path, ["kind", "sky"])
        return EnvironmentLight(_t3(obj["sky"], path))
    raise FieldError(path + ".kind", f"unknown light kind {kind!r}")


def scene_from_json(doc: dict) -> SceneSpec:
    check_keys(doc, "scene", ["camera", "lights", "objects", "room", "provenance"])
    c = check_keys(doc["camera"], "camera",
                   ["position", "right", "up", "forward", "fov_y", "height", "width"])
    camera = CameraModel(np.array(_t3(c["position"], "camera.position")),
                         np.array(_t3(c["right"], "camera.right")),
                         np.array(_t3(c["up"], "camera.up")),
                         np.array(_t3(c["forward"], "camera.forward")),
                         float(c["fov_y"]), int(c["height"]), int(c["width"]))
    lights = tuple(_parse_light(l, f"lights[{i}]") for i, l in enumerate(doc["lights"]))
    objects = []
    for i, o in enumerate(doc["objects"]):
        path = f"objects[{i}]"
        check_keys(o, path, ["id", "family", "transform", "parts"])
        tr = check_keys(o["transform"], path + ".transform",
                        ["rotation_y", "translation", "scale"])
        transform = Transform(float(tr["rotation_y"]),
                              _t3(tr["translation"], path + ".transform.translation"),
                              float(tr["scale"]))
        parts = []
        for j, p in enumerate(o["parts"]):
            ppath = f"{path}.parts[{j}]"
            check_keys(p, ppath, ["name", "shape", "material"])
            parts.append(Part(str(p["name"]), _parse_shape(p["shape"], ppath + ".shape"),
                              _parse_material(p["material"], ppath + ".material")))
        objects.append(ObjectSpec(str(o["id"]), str(o["family"]), transform, tuple(parts)))
    room = []
    for i, q in enumerate(doc["room"]):
        path = f"room[{i}]"
        check_keys(q, path, ["name", "corner", "edge_u", "edge_v", "albedo"])
        room.append(RoomQuad(str(q["name"]), _t3(q["corner"], path), _t3(q["edge_u"], path),
                             _t3(q["edge_v"], path), _t3(q["albedo"], path)))
    prov = check_keys(doc["provenance"], "provenance", ["seed", "config_hash"])
    return SceneSpec(tuple(objects), lights, camera, tuple(room),
                     int(prov["seed"]), str(prov["config_hash"]))


def parse_scene(data) -> SceneSpec:
    return scene_from_json(canonjson.loads(data))


def scene_hash(spec: SceneSpec) -> str:
    return hashlib.sha256(serialize_scene(spec)).hexdigest()
