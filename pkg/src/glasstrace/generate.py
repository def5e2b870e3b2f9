"""Seed-driven procedural generation of rooms with transparent objects.

Every scene is a pure function of (config, seed): all randomness comes from
Philox streams keyed by (seed, subsystem tag), so regenerating a seed gives
byte-identical scene JSON on any platform.
"""

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from . import canonjson
from .canonjson import check_keys
from .geometry import Box, Sphere, look_at
from .rng import make_rng
from .scene import (
    IOR_TABLE,
    Diffuse,
    DiscoEmitter,
    DiscoLight,
    EnvironmentLight,
    Lathe,
    ObjectSpec,
    Part,
    PointLight,
    RoomQuad,
    SceneSpec,
    Transform,
    Transmissive,
    shape_is_watertight,
)

SUBSTANCES = ("glass", "plastic", "water", "ice")


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 0
    room_min: tuple = (4.5, 2.6, 4.5)   # width, height, depth (m)
    room_max: tuple = (8.0, 3.4, 8.0)
    object_count: tuple = (6, 12)
    p_transparent: float = 0.4
    lighting_weights: tuple = (1.0, 1.0, 1.0)  # standard, disco, bright
    camera_weights: tuple = (1.0, 2.0)         # room-scale, close-up
    max_retries: int = 64
    resolution: tuple = (240, 320)             # (H, W)
    val_fraction: float = 0.1

    def __post_init__(self):
        if not (0.0 <= self.p_transparent <= 1.0):
            raise ValueError("p_transparent must be in [0,1]")
        if any(w < 0 for w in self.lighting_weights) or sum(self.lighting_weights) == 0:
            raise ValueError("lighting weights must be non-negative, not all zero")
        if any(w < 0 for w in self.camera_weights) or sum(self.camera_weights) == 0:
            raise ValueError("camera weights must be non-negative, not all zero")
        if self.object_count[0] > self.object_count[1] or self.object_count[0] < 0:
            raise ValueError("object_count range is empty")

    def to_json(self):
        return {
            "seed": self.seed,
            "room_min": list(map(float, self.room_min)),
            "room_max": list(map(float, self.room_max)),
            "object_count": list(map(int, self.object_count)),
            "p_transparent": float(self.p_transparent),
            "lighting_weights": list(map(float, self.lighting_weights)),
            "camera_weights": list(map(float, self.camera_weights)),
            "max_retries": int(self.max_retries),
            "resolution": list(map(int, self.resolution)),
            "val_fraction": float(self.val_fraction),
        }

    @classmethod
    def from_json(cls, doc):
        fields = ["seed", "room_min", "room_max", "object_count", "p_transparent",
                  "lighting_weights", "camera_weights", "max_retries", "resolution",
                  "val_fraction"]
        check_keys(doc, "config", [], fields)
        base = cls().to_json()
        base.update(doc)
        return cls(seed=int(base["seed"]),
                   room_min=tuple(base["room_min"]), room_max=tuple(base["room_max"]),
                   object_count=tuple(base["object_count"]),
                   p_transparent=float(base["p_transparent"]),
                   lighting_weights=tuple(base["lighting_weights"]),
                   camera_weights=tuple(base["camera_weights"]),
                   max_retries=int(base["max_retries"]),
                   resolution=tuple(base["resolution"]),
                   val_fraction=float(base["val_fraction"]))


def config_hash(config: GeneratorConfig) -> str:
    return hashlib.sha256(canonjson.dumps(config.to_json())).hexdigest()


# ---------------------------------------------------------------------------
# object catalog: builders return (parts, flat_top, closeup_ok) in local
# coordinates with the object resting on y=0, centered on the y axis.

_PLACEHOLDER = Diffuse((0.5, 0.5, 0.5))


def _box(cx, cz, w, h, d, y0=0.0):
    return Box(np.array([cx - w / 2, y0, cz - d / 2]),
               np.array([cx + w / 2, y0 + h, cz + d / 2]))


def _pane(rng):
    w = rng.uniform(0.8, 1.6)
    h = rng.uniform(1.0, 2.0)
    t = rng.uniform(0.02, 0.05)
    return [Part("pane", _box(0, 0, w, h, t), _PLACEHOLDER)], False, False


def _door(rng):
    w = rng.uniform(0.7, 1.0)
    h = rng.uniform(1.8, 2.2)
    post = rng.uniform(0.05, 0.09)
    parts = [
        Part("panel", _box(0, 0, w, h, 0.04), _PLACEHOLDER),
        Part("post_l", _box(-(w + post) / 2, 0, post, h + post, post), _PLACEHOLDER),
        Part("post_r", _box((w + post) / 2, 0, post, h + post, post), _PLACEHOLDER),
        Part("lintel", _box(0, 0, w, post, post, y0=h), _PLACEHOLDER),
    ]
    return parts, False, False


def _table(rng):
    w = rng.uniform(0.7, 1.4)
    d = rng.uniform(0.5, 0.9)
    h = rng.uniform(0.6, 0.8)
    top_t = rng.uniform(0.03, 0.06)
    leg = rng.uniform(0.04, 0.07)
    lx, lz = w / 2 - leg, d / 2 - leg
    parts = [Part("top", _box(0, 0, w, top_t, d, y0=h - top_t), _PLACEHOLDER)]
    for i, (sx, sz) in enumerate([(-1, -1), (-1, 1), (1, -1), (1, 1)]):
        parts.append(Part(f"leg{i}", _box(sx * lx, sz * lz, leg, h - top_t, leg),
                          _PLACEHOLDER))
    return parts, True, False


def _open_box(rng):
    w = rng.uniform(0.3, 0.6)
    d = rng.uniform(0.25, 0.5)
    h = rng.uniform(0.2, 0.4)
    t = rng.uniform(0.01, 0.025)
    parts = [
        Part("bottom", _box(0, 0, w, t, d), _PLACEHOLDER),
        Part("wall_xn", _box(-(w - t) / 2, 0, t, h, d), _PLACEHOLDER),
        Part("wall_xp", _box((w - t) / 2, 0, t, h, d), _PLACEHOLDER),
        Part("wall_zn", _box(0, -(d - t) / 2, w - 2 * t, h, t), _PLACEHOLDER),
        Part("wall_zp", _box(0, (d - t) / 2, w - 2 * t, h, t), _PLACEHOLDER),
    ]
    return parts, False, True


def _shelf(rng):
    w = rng.uniform(0.6, 1.2)
    d = rng.uniform(0.25, 0.45)
    h = rng.uniform(0.8, 1.6)
    t = rng.uniform(0.02, 0.04)
    parts = [
        Part("side_l", _box(-(w - t) / 2, 0, t, h, d), _PLACEHOLDER),
        Part("side_r", _box((w - t) / 2, 0, t, h, d), _PLACEHOLDER),
    ]
    for i, frac in enumerate((0.0, 0.5, 1.0)):
        parts.append(Part(f"board{i}", _box(0, 0, w - 2 * t, t, d, y0=frac * (h - t)),
                          _PLACEHOLDER))
    return parts, True, False


def _tumbler(rng):
    r = rng.uniform(0.035, 0.06)
    h = rng.uniform(0.09, 0.16)
    wall = rng.uniform(0.004, 0.008)
    base = rng.uniform(0.008, 0.015)
    profile = ((0.0, 0.0), (r, 0.0), (r, h), (r - wall, h), (r - wall, base), (0.0, base))
    seg = int(rng.integers(14, 22))
    return [Part("body", Lathe(profile, seg), _PLACEHOLDER)], False, True


def _bottle(rng):
    r = rng.uniform(0.035, 0.055)
    h = rng.uniform(0.2, 0.32)
    rn = rng.uniform(0.012, 0.02)
    profile = ((0.0, 0.0), (r, 0.0), (r, 0.55 * h), (rn, 0.75 * h), (rn, h), (0.0, h))
    seg = int(rng.integers(14, 22))
    return [Part("body", Lathe(profile, seg), _PLACEHOLDER)], False, True


def _bowl(rng):
    r = rng.uniform(0.08, 0.15)
    h = rng.uniform(0.05, 0.09)
    wall = rng.uniform(0.006, 0.012)
    profile = ((0.0, 0.0), (0.5 * r, 0.0), (r, h), (r - wall, h),
               (0.45 * r, wall), (0.0, wall))
    seg = int(rng.integers(14, 22))
    return [Part("body", Lathe(profile, seg), _PLACEHOLDER)], False, True


def _vase(rng):
    r = rng.uniform(0.05, 0.09)
    h = rng.uniform(0.15, 0.3)
    profile = ((0.0, 0.0), (0.7 * r, 0.0), (r, 0.35 * h), (0.55 * r, 0.75 * h),
               (0.65 * r, h), (0.0, h))
    seg = int(rng.integers(14, 22))
    return [Part("body", Lathe(profile, seg), _PLACEHOLDER)], False, True


def _ball(rng):
    r = rng.uniform(0.05, 0.15)
    return [Part("ball", Sphere(np.array([0.0, r, 0.0]), r), _PLACEHOLDER)], False, True


def _slab(rng):
    w = rng.uniform(0.3, 0.8)
    d = rng.uniform(0.3, 0.8)
    h = rng.uniform(0.1, 0.5)
    return [Part("block", _box(0, 0, w, h, d), _PLACEHOLDER)], True, True


CATALOG = (
    ("pane", _pane), ("door", _door), ("table", _table), ("open_box", _open_box),
    ("shelf", _shelf), ("tumbler", _tumbler), ("bottle", _bottle), ("bowl", _bowl),
    ("vase", _vase), ("ball", _ball), ("slab", _slab),
)


# ---------------------------------------------------------------------------


def assign_materials(parts, p_transparent, rng):
    """Independently make each watertight part transmissive with p_transparent."""
    out = []
    for part in parts:
        eligible = shape_is_watertight(part.shape)
        if eligible and rng.uniform() < p_transparent:
            substance = SUBSTANCES[int(rng.integers(0, len(SUBSTANCES)))]
            tint = tuple(1.0 - rng.uniform(0.0, 0.15, 3))
            mat = Transmissive(IOR_TABLE[substance], tint, substance)
        else:
            mat = Diffuse(tuple(rng.uniform(0.15, 0.9, 3)))
        out.append(Part(part.name, part.shape, mat))
    return out


def _weighted_choice(rng, weights):
    w = np.asarray(weights, dtype=float)
    return int(rng.choice(len(w), p=w / w.sum()))


def _hue_rgb(h):
    """Fully saturated hue -> rgb with max component 1.0."""
    x = 1.0 - abs((h * 6.0) % 2.0 - 1.0)
    k = int(h * 6.0) % 6
    table = [(1, x, 0), (x, 1, 0), (0, 1, x), (0, x, 1), (x, 0, 1), (1, 0, x)]
    return table[k]


def gen_lighting(rng, weights, room_dims):
    w, h, d = room_dims
    style = _weighted_choice(rng, weights)
    lights = []
    if style == 0:  # standard indoor
        n = int(rng.integers(1, 4))
        for _ in range(n):
            pos = (rng.uniform(-w / 2 + 0.3, w / 2 - 0.3),
                   rng.uniform(0.7 * h, h - 0.1),
                   rng.uniform(-d / 2 + 0.3, d / 2 - 0.3))
            power = rng.uniform(6.0, 18.0)
            warm = rng.uniform(0.85, 1.0)
            lights.append(PointLight(pos, (power, power * warm, power * warm * 0.9)))
        lights.append(EnvironmentLight(tuple(rng.uniform(0.05, 0.2) * np.ones(3))))
    elif style == 1:  # disco
        n = int(rng.integers(3, 9))
        emitters = []
        for _ in range(n):
            pos = (rng.uniform(-w / 2 + 0.3, w / 2 - 0.3),
                   rng.uniform(0.5 * h, h - 0.1),
                   rng.uniform(-d / 2 + 0.3, d / 2 - 0.3))
            hue = rng.uniform()
            sat = rng.uniform(0.7, 1.0)
            base = np.array(_hue_rgb(hue))
            color = tuple(base * sat + (1.0 - sat))  # max 1.0, min 1-sat <= 0.3
            emitters.append(DiscoEmitter(pos, color, float(rng.uniform(5.0, 16.0))))
        center = tuple(np.mean([e.position for e in emitters], axis=0))
        lights.append(DiscoLight(center, tuple(emitters)))
        lights.append(EnvironmentLight(tuple(rng.uniform(0.02, 0.08) * np.ones(3))))
    else:  # bright environment
        sky = rng.uniform(0.6, 1.1)
        tintb = rng.uniform(0.9, 1.05)
        lights.append(EnvironmentLight((sky, sky, sky * tintb)))
        if rng.uniform() < 0.5:
            pos = (rng.uniform(-w / 4, w / 4), h - 0.2, rng.uniform(-d / 4, d / 4))
            power = rng.uniform(4.0, 10.0)
            lights.append(PointLight(pos, (power, power, power)))
    return lights


# ---------------------------------------------------------------------------
# placement


def _local_aabb(parts):
    lo = np.full(3, np.inf)
    hi = np.full(3, -np.inf)
    for p in parts:
        if isinstance(p.shape, Lathe):
            rmax = max(r for r, _ in p.shape.profile)
            ys = [y for _, y in p.shape.profile]
            a, b = np.array([-rmax, min(ys), -rmax]), np.array([rmax, max(ys), rmax])
        else:
            a, b = p.shape.aabb()
        lo = np.minimum(lo, a)
        hi = np.maximum(hi, b)
    return lo, hi


def _world_aabb(lo, hi, transform: Transform):
    corners = np.array([[x, y, z] for x in (lo[0], hi[0])
                        for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
    rot, tr = transform.matrix()
    pts = corners @ rot.T + tr
    return pts.min(axis=0), pts.max(axis=0)


def _overlaps(a, b):
    return bool(np.all(a[0] < b[1] - 1e-9) and np.all(b[0] < a[1] - 1e-9))


@dataclass
class _Placed:
    aabb: tuple
    flat_top: bool
    closeup_ok: bool
    index: int = 0


def _place_objects(rng, config, room_dims, seed):
    w, h, d = room_dims
    count = int(rng.integers(config.object_count[0], config.object_count[1] + 1))
    objects = []
    placed = []
    for i in range(count):
        fam_idx = int(rng.integers(0, len(CATALOG)))
        family, builder = CATALOG[fam_idx]
        parts, flat_top, closeup_ok = builder(rng)
        lo, hi = _local_aabb(parts)
        ok = False
        for _ in range(config.max_retries):
            rot = float(rng.uniform(0.0, 2.0 * math.pi))
            supports = [p for p in placed if p.flat_top]
            base_y = 0.0
            if supports and rng.uniform() < 0.3 and (hi - lo).max() < 0.6:
                sup = supports[int(rng.integers(0, len(supports)))]
                base_y = float(sup.aabb[1][1])
                cx_range = (sup.aabb[0][0], sup.aabb[1][0])
                cz_range = (sup.aabb[0][2], sup.aabb[1][2])
            else:
                cx_range = (-w / 2 + 0.1, w / 2 - 0.1)
                cz_range = (-d / 2 + 0.1, d / 2 - 0.1)
            cx = float(rng.uniform(*cx_range))
            cz = float(rng.uniform(*cz_range))
            tf = Transform(rot, (cx, base_y + 1e-4, cz), 1.0)
            wlo, whi = _world_aabb(lo, hi, tf)
            room_lo = np.array([-w / 2, -1e-3, -d / 2])
            room_hi = np.array([w / 2, h, d / 2])
            if np.any(wlo < room_lo) or np.any(whi > room_hi):
                continue
            if any(_overlaps((wlo, whi), p.aabb) for p in placed):
                continue
            parts_m = assign_materials(parts, config.p_transparent, rng)
            objects.append(ObjectSpec(f"obj_{i:03d}", family, tf, tuple(parts_m)))
            placed.append(_Placed((wlo, whi), flat_top, closeup_ok, i))
            ok = True
            break
        if not ok:
            raise GenerationError(
                f"could not place object {i} ({family}) after "
                f"{config.max_retries} retries (seed {seed})")
    return objects, placed


# ---------------------------------------------------------------------------
# camera


def _room_exit_distance(origin, direction, room_dims, margin=0.15):
    """Distance from an interior point to the (shrunken) room boundary."""
    w, h, d = room_dims
    lo = np.array([-w / 2 + margin, margin, -d / 2 + margin])
    hi = np.array([w / 2 - margin, h - margin, d / 2 - margin])
    t_exit = np.inf
    for ax in range(3):
        if direction[ax] > 1e-12:
            t_exit = min(t_exit, (hi[ax] - origin[ax]) / direction[ax])
        elif direction[ax] < -1e-12:
            t_exit = min(t_exit, (lo[ax] - origin[ax]) / direction[ax])
    return t_exit


def gen_camera(rng, config, room_dims, placed, resolution):
    w, h, d = room_dims
    H, W = resolution
    fov = math.radians(float(rng.uniform(40.0, 70.0)))
    mode = _weighted_choice(rng, config.camera_weights)
    targets = [p for p in placed if p.closeup_ok]
    if mode == 1 and targets:
        tgt = targets[int(rng.integers(0, len(targets)))]
        lo, hi = tgt.aabb
        center = (np.asarray(lo) + np.asarray(hi)) / 2.0
        radius = float(np.linalg.norm(np.asarray(hi) - np.asarray(lo)) / 2.0)
        for attempt in range(48):
            az = rng.uniform(0.0, 2.0 * math.pi)
            el = rng.uniform(math.radians(-5.0), math.radians(40.0))
            direction = np.array([math.cos(el) * math.cos(az), math.sin(el),
                                  math.cos(el) * math.sin(az)])
            dmax = _room_exit_distance(center, direction, room_dims)
            if dmax >= 2.0 * radius:
                break
        else:
            direction = -center + np.array([0.0, h / 2, 0.0])
            direction = direction / max(np.linalg.norm(direction), 1e-9)
            dmax = _room_exit_distance(center, direction, room_dims)
        dist = float(rng.uniform(2.0 * radius, min(6.0 * radius, max(dmax, 2.0 * radius))))
        pos = center + direction * dist
        pos[1] = min(max(pos[1], 0.15), h - 0.15)
        return look_at(pos, center, fov, H, W)
    # room-scale: near a wall looking inward
    wall = int(rng.integers(0, 4))
    u = float(rng.uniform(-0.35, 0.35))
    inset = float(rng.uniform(0.2, 0.6))
    if wall == 0:
        pos = np.array([-w / 2 + inset, 0.0, u * d])
    elif wall == 1:
        pos = np.array([w / 2 - inset, 0.0, u * d])
    elif wall == 2:
        pos = np.array([u * w, 0.0, -d / 2 + inset])
    else:
        pos = np.array([u * w, 0.0, d / 2 - inset])
    pos[1] = float(rng.uniform(1.2, h - 0.3))
    target = np.array([float(rng.uniform(-0.5, 0.5)),
                       float(rng.uniform(0.9, 1.6)),
                       float(rng.uniform(-0.5, 0.5))])
    return look_at(pos, target, fov, H, W)


# ---------------------------------------------------------------------------


def _room_shell(rng, room_dims):
    w, h, d = room_dims
    floor_albedo = tuple(rng.uniform(0.3, 0.7, 3))
    wall_albedo = tuple(rng.uniform(0.4, 0.85, 3))
    ceil_albedo = tuple(rng.uniform(0.7, 0.95, 3))
    x0, x1, z0, z1 = -w / 2, w / 2, -d / 2, d / 2
    return (
        RoomQuad("floor", (x0, 0.0, z0), (w, 0.0, 0.0), (0.0, 0.0, d), floor_albedo),
        RoomQuad("ceiling", (x0, h, z0), (w, 0.0, 0.0), (0.0, 0.0, d), ceil_albedo),
        RoomQuad("wall_xn", (x0, 0.0, z0), (0.0, 0.0, d), (0.0, h, 0.0), wall_albedo),
        RoomQuad("wall_xp", (x1, 0.0, z0), (0.0, 0.0, d), (0.0, h, 0.0), wall_albedo),
        RoomQuad("wall_zn", (x0, 0.0, z0), (w, 0.0, 0.0), (0.0, h, 0.0), wall_albedo),
        RoomQuad("wall_zp", (x0, 0.0, z1), (w, 0.0, 0.0), (0.0, h, 0.0), wall_albedo),
    )


def generate_scene(config: GeneratorConfig, seed: int) -> SceneSpec:
    room_rng = make_rng(seed, "room")
    room_dims = tuple(room_rng.uniform(config.room_min[i], config.room_max[i])
                      for i in range(3))
    room = _room_shell(room_rng, room_dims)
    objects, placed = _place_objects(make_rng(seed, "objects"), config, room_dims, seed)
    lights = gen_lighting(make_rng(seed, "lights"), config.lighting_weights, room_dims)
    camera = gen_camera(make_rng(seed, "camera"), config, room_dims, placed,
                        config.resolution)
    return SceneSpec(tuple(objects), tuple(lights), camera, room,
                     int(seed), config_hash(config))
