"""Vector math, camera model, primitives, BVH and the interface optics.

Everything here is immutable after construction and safe to share across
threads.  Directions handed to the optics functions must be unit length;
normals are oriented against the incident ray by the intersection routines.
"""

from dataclasses import dataclass, field

import numpy as np

INTERSECT_EPS = 1e-4  # minimum ray parameter; suppresses self-intersection
UNIT_TOL = 1e-6


def vec3(x, y, z):
    return np.array([float(x), float(y), float(z)])


def normalize(v):
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return v / n


# ---------------------------------------------------------------------------
# camera


@dataclass(frozen=True)
class CameraModel:
    position: np.ndarray
    right: np.ndarray
    up: np.ndarray
    forward: np.ndarray
    fov_y: float  # vertical field of view, radians
    height: int
    width: int

    def __post_init__(self):
        if not (0.0 < self.fov_y < np.pi):
            raise ValueError(f"fov_y out of (0, pi): {self.fov_y}")
        if self.height < 1 or self.width < 1:
            raise ValueError("resolution must be >= 1x1")
        basis = np.stack([self.right, self.up, self.forward])
        if not np.allclose(basis @ basis.T, np.eye(3), atol=1e-6):
            raise ValueError("camera basis is not orthonormal")
        if np.dot(np.cross(self.right, self.up), self.forward) < 0:
            raise ValueError("camera basis is not right-handed")


def look_at(position, target, fov_y, height, width, world_up=(0.0, 1.0, 0.0)):
    forward = normalize(np.asarray(target, dtype=float) - np.asarray(position, dtype=float))
    world_up = np.asarray(world_up, dtype=float)
    if abs(np.dot(forward, normalize(world_up))) > 0.999:
        world_up = np.array([0.0, 0.0, 1.0])
    right = normalize(np.cross(world_up, forward))
    up = np.cross(forward, right)
    return CameraModel(np.asarray(position, dtype=float), right, up, forward,
                       float(fov_y), int(height), int(width))


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    media: tuple = (1.0,)  # refractive-index stack, bottom = air

    def __post_init__(self):
        if len(self.media) == 0:
            raise ValueError("medium stack must not be empty")


def camera_ray(camera: CameraModel, px: int, py: int, jitter=(0.5, 0.5)) -> Ray:
    """Ray through pixel (px, py) offset by a sub-pixel jitter in [0,1)^2."""
    if not (0 <= px < camera.width and 0 <= py < camera.height):
        raise ValueError(f"pixel ({px}, {py}) outside {camera.width}x{camera.height}")
    half_h = np.tan(camera.fov_y / 2.0)
    half_w = half_h * camera.width / camera.height
    sx = ((px + jitter[0]) / camera.width * 2.0 - 1.0) * half_w
    sy = (1.0 - (py + jitter[1]) / camera.height * 2.0) * half_h
    d = normalize(camera.forward + sx * camera.right + sy * camera.up)
    return Ray(camera.position, d)


# ---------------------------------------------------------------------------
# primitives


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("sphere radius must be > 0")

    def aabb(self):
        r = self.radius
        return self.center - r, self.center + r

    def hit(self, o, d, t_min):
        oc = o - self.center
        b = np.dot(oc, d)
        c = np.dot(oc, oc) - self.radius * self.radius
        disc = b * b - c
        if disc < 0:
            return None
        s = np.sqrt(disc)
        for t in (-b - s, -b + s):
            if t > t_min:
                p = o + t * d
                return t, (p - self.center) / self.radius
        return None


@dataclass(frozen=True)
class Quad:
    corner: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray

    def aabb(self):
        pts = np.stack([self.corner, self.corner + self.edge_u,
                        self.corner + self.edge_v,
                        self.corner + self.edge_u + self.edge_v])
        return pts.min(axis=0), pts.max(axis=0)

    def hit(self, o, d, t_min):
        n = np.cross(self.edge_u, self.edge_v)
        denom = np.dot(d, n)
        if abs(denom) < 1e-12:
            return None
        t = np.dot(self.corner - o, n) / denom
        if t <= t_min:
            return None
        rel = o + t * d - self.corner
        uu = np.dot(self.edge_u, self.edge_u)
        vv = np.dot(self.edge_v, self.edge_v)
        uv = np.dot(self.edge_u, self.edge_v)
        ru = np.dot(rel, self.edge_u)
        rv = np.dot(rel, self.edge_v)
        det = uu * vv - uv * uv
        a = (ru * vv - rv * uv) / det
        b = (rv * uu - ru * uv) / det
        if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
            return None
        return t, n / np.linalg.norm(n)


@dataclass(frozen=True)
class Box:
    bmin: np.ndarray
    bmax: np.ndarray

    def __post_init__(self):
        if not np.all(self.bmin < self.bmax):
            raise ValueError("box min must be < max componentwise")

    def aabb(self):
        return self.bmin, self.bmax

    def hit(self, o, d, t_min):
        t0 = np.empty(3)
        t1 = np.empty(3)
        for ax in range(3):
            if d[ax] == 0.0:
                if not (self.bmin[ax] <= o[ax] <= self.bmax[ax]):
                    return None
                t0[ax], t1[ax] = -np.inf, np.inf
            else:
                a = (self.bmin[ax] - o[ax]) / d[ax]
                b = (self.bmax[ax] - o[ax]) / d[ax]
                t0[ax], t1[ax] = min(a, b), max(a, b)
        t_enter = t0.max()
        t_exit = t1.min()
        if t_exit < t_enter:
            return None
        if t_enter > t_min and np.isfinite(t_enter):
            ax = int(np.argmax(t0))
            n = np.zeros(3)
            n[ax] = -np.sign(d[ax])  # entering face, outward
            return t_enter, n
        if t_exit > t_min and np.isfinite(t_exit):
            ax = int(np.argmin(t1))
            n = np.zeros(3)
            n[ax] = np.sign(d[ax])  # exiting face, outward
            return t_exit, n
        return None


def triangle_hit(o, d, v0, v1, v2, t_min):
    """Moller-Trumbore; returns (t, outward geometric normal) or None."""
    e1 = v1 - v0
    e2 = v2 - v0
    pvec = np.cross(d, e2)
    det = np.dot(e1, pvec)
    if abs(det) < 1e-14:
        return None
    inv_det = 1.0 / det
    tvec = o - v0
    u = np.dot(tvec, pvec) * inv_det
    if u < 0.0 or u > 1.0:
        return None
    qvec = np.cross(tvec, e1)
    v = np.dot(d, qvec) * inv_det
    if v < 0.0 or u + v > 1.0:
        return None
    t = np.dot(e2, qvec) * inv_det
    if t <= t_min:
        return None
    n = np.cross(e1, e2)
    return t, n / np.linalg.norm(n)


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (N, 3)
    faces: np.ndarray     # (M, 3) int, counter-clockwise seen from outside

    def __post_init__(self):
        if len(self.faces) and self.faces.max() >= len(self.vertices):
            raise ValueError("face index out of range")

    def aabb(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def hit(self, o, d, t_min):
        best = None
        for f in self.faces:
            h = triangle_hit(o, d, self.vertices[f[0]], self.vertices[f[1]],
                             self.vertices[f[2]], t_min)
            if h is not None and (best is None or h[0] < best[0]):
                best = h
        return best


@dataclass(frozen=True)
class HitRecord:
    t: float
    point: np.ndarray
    normal: np.ndarray  # oriented against the incoming ray
    material_id: int
    entering: bool
    prim_index: int


def _make_record(ray, t, outward_n, material_id, prim_index):
    entering = bool(np.dot(outward_n, ray.direction) < 0.0)
    normal = outward_n if entering else -outward_n
    return HitRecord(float(t), ray.origin + t * ray.direction, normal,
                     material_id, entering, prim_index)


def intersect_brute(ray: Ray, primitives, material_ids=None):
    best = None
    for i, prim in enumerate(primitives):
        h = prim.hit(ray.origin, ray.direction, INTERSECT_EPS)
        if h is not None and (best is None or h[0] < best[0]):
            best = (h[0], h[1], i)
    if best is None:
        return None
    t, n, i = best
    mid = material_ids[i] if material_ids is not None else i
    return _make_record(ray, t, n, mid, i)


# ---------------------------------------------------------------------------
# BVH


@dataclass
class Bvh:
    primitives: list
    material_ids: list
    node_min: np.ndarray = field(repr=False, default=None)
    node_max: np.ndarray = field(repr=False, default=None)
    node_left: np.ndarray = field(repr=False, default=None)   # child or ~start
    node_right: np.ndarray = field(repr=False, default=None)  # child or count
    order: np.ndarray = field(repr=False, default=None)


MAX_LEAF = 4


def build_bvh(primitives, material_ids=None) -> Bvh:
    if not primitives:
        raise ValueError("cannot build BVH over empty primitive list")
    if material_ids is None:
        material_ids = list(range(len(primitives)))
    lo = np.stack([p.aabb()[0] for p in primitives])
    hi = np.stack([p.aabb()[1] for p in primitives])
    centers = (lo + hi) / 2.0
    order = np.arange(len(primitives))

    node_min, node_max, node_left, node_right = [], [], [], []

    def build(start, end, depth):
        idx = len(node_min)
        sel = order[start:end]
        node_min.append(lo[sel].min(axis=0))
        node_max.append(hi[sel].max(axis=0))
        node_left.append(0)
        node_right.append(0)
        n = end - start
        if n <= MAX_LEAF or depth > 48:
            node_left[idx] = ~start
            node_right[idx] = n
            return idx
        axis = int(np.argmax(node_max[idx] - node_min[idx]))
        keys = centers[sel, axis]
        # stable tie-break on primitive index keeps builds deterministic,
        # and median halving terminates even with identical bounds
        order[start:end] = sel[np.lexsort((sel, keys))]
        mid = n // 2
        left = build(start, start + mid, depth + 1)
        right = build(start + mid, end, depth + 1)
        node_left[idx] = left
        node_right[idx] = right
        return idx

    build(0, len(primitives), 0)
    return Bvh(list(primitives), list(material_ids),
               np.stack(node_min), np.stack(node_max),
               np.array(node_left), np.array(node_right), order)


def intersect(ray: Ray, bvh: Bvh):
    """Nearest hit with t > INTERSECT_EPS through the BVH, or None."""
    o, d = ray.origin, ray.direction
    with np.errstate(divide="ignore"):
        inv = 1.0 / d
    best_t = np.inf
    best = None
    stack = [0]
    nmin, nmax = bvh.node_min, bvh.node_max
    while stack:
        node = stack.pop()
        t0 = (nmin[node] - o) * inv
        t1 = (nmax[node] - o) * inv
        near = np.minimum(t0, t1)
        far = np.maximum(t0, t1)
        t_enter = max(near.max(), INTERSECT_EPS)
        t_exit = far.min()
        if np.isnan(t_enter) or np.isnan(t_exit):
            t_enter, t_exit = INTERSECT_EPS, np.inf  # on-slab origin, be safe
        if t_enter > t_exit or t_enter > best_t:
            continue
        left = bvh.node_left[node]
        if left < 0:  # leaf
            start = ~left
            for k in range(start, start + bvh.node_right[node]):
                pi = int(bvh.order[k])
                h = bvh.primitives[pi].hit(o, d, INTERSECT_EPS)
                if h is not None and h[0] < best_t:
                    best_t = h[0]
                    best = (h[0], h[1], pi)
        else:
            stack.append(int(bvh.node_right[node]))
            stack.append(int(left))
    if best is None:
        return None
    t, n, pi = best
    return _make_record(ray, t, n, bvh.material_ids[pi], pi)


# ---------------------------------------------------------------------------
# interface optics


def refract_dir(incident, normal, eta_ratio):
    """Snell refraction; None on total internal reflection.

    eta_ratio = n_from / n_to; normal must oppose the incident direction.
    """
    cos_i = -np.dot(normal, incident)
    k = 1.0 - eta_ratio * eta_ratio * (1.0 - cos_i * cos_i)
    if k < 0.0:
        return None
    t = eta_ratio * incident + (eta_ratio * cos_i - np.sqrt(k)) * normal
    return t / np.linalg.norm(t)


def reflect_dir(incident, normal):
    return incident - 2.0 * np.dot(incident, normal) * normal


def fresnel_reflectance(cos_i, n1, n2):
    """Schlick approximation of the Fresnel reflection coefficient."""
    r0 = ((n1 - n2) / (n1 + n2)) ** 2
    return r0 + (1.0 - r0) * (1.0 - cos_i) ** 5
