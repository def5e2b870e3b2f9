"""Scene compilation and batched ray intersection for the render passes.

The compiled scene flattens every object into world-space triangles and
spheres, grouped per object so a cheap ray/AABB test culls most triangle
work.  All intersection math mirrors the scalar routines in geometry.py.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import INTERSECT_EPS, Box, Quad, Sphere, TriangleMesh
from .scene import (
    AreaLight,
    Diffuse,
    DiscoLight,
    EnvironmentLight,
    Lathe,
    PointLight,
    SceneSpec,
    lathe_mesh,
)

KIND_DIFFUSE = 0
KIND_TRANSMISSIVE = 1

# unit box faces as triangles, outward winding
_BOX_FACES = [
    # (axis, side): four corner permutations per face
    ((0, 0), [(0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)]),
    ((0, 1), [(1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)]),
    ((1, 0), [(0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)]),
    ((1, 1), [(0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)]),
    ((2, 0), [(0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)]),
    ((2, 1), [(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)]),
]


def _box_tris(bmin, bmax):
    tris = []
    for _, quad in _BOX_FACES:
        pts = [np.where(np.array(c, dtype=bool), bmax, bmin) for c in quad]
        tris.append((pts[0], pts[1], pts[2]))
        tris.append((pts[0], pts[2], pts[3]))
    return tris


@dataclass
class TriGroup:
    v0: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    normal: np.ndarray  # unit geometric normals, outward
    mat: np.ndarray     # material index per triangle
    lo: np.ndarray
    hi: np.ndarray


@dataclass
class CompiledScene:
    groups: list
    sphere_c: np.ndarray
    sphere_r: np.ndarray
    sphere_mat: np.ndarray
    mat_kind: np.ndarray  # KIND_* per material
    mat_rgb: np.ndarray   # albedo (diffuse) or tint (transmissive)
    mat_ior: np.ndarray
    point_pos: np.ndarray  # compiled point-style lights
    point_rgb: np.ndarray
    env_rgb: np.ndarray
    camera: object


def _make_group(tris, mats):
    v0 = np.stack([t[0] for t in tris])
    v1 = np.stack([t[1] for t in tris])
    v2 = np.stack([t[2] for t in tris])
    e1, e2 = v1 - v0, v2 - v0
    n = np.cross(e1, e2)
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    pts = np.concatenate([v0, v1, v2])
    return TriGroup(v0, e1, e2, n, np.asarray(mats, dtype=np.int64),
                    pts.min(axis=0), pts.max(axis=0))


def compile_scene(spec: SceneSpec) -> CompiledScene:
    mat_kind, mat_rgb, mat_ior = [], [], []

    def add_material(material):
        idx = len(mat_kind)
        if isinstance(material, Diffuse):
            mat_kind.append(KIND_DIFFUSE)
            mat_rgb.append(material.albedo)
            mat_ior.append(1.0)
        else:
            mat_kind.append(KIND_TRANSMISSIVE)
            mat_rgb.append(material.tint)
            mat_ior.append(material.ior)
        return idx

    groups = []
    sphere_c, sphere_r, sphere_mat = [], [], []

    room_tris, room_mats = [], []
    for q in spec.room:
        m = add_material(Diffuse(q.albedo))
        c = np.array(q.corner)
        u = np.array(q.edge_u)
        v = np.array(q.edge_v)
        room_tris += [(c, c + u, c + u + v), (c, c + u + v, c + v)]
        room_mats += [m, m]
    if room_tris:
        groups.append(_make_group(room_tris, room_mats))

    for obj in spec.objects:
        rot, tr = obj.transform.matrix()
        tris, mats = [], []
        for part in obj.parts:
            m = add_material(part.material)
            shape = part.shape
            if isinstance(shape, Sphere):
                sphere_c.append(rot @ shape.center + tr)
                sphere_r.append(shape.radius * obj.transform.scale)
                sphere_mat.append(m)
                continue
            if isinstance(shape, Box):
                local = _box_tris(shape.bmin, shape.bmax)
            elif isinstance(shape, Quad):
                c, u, v = shape.corner, shape.edge_u, shape.edge_v
                local = [(c, c + u, c + u + v), (c, c + u + v, c + v)]
            elif isinstance(shape, Lathe):
                mesh = lathe_mesh(shape)
                verts = mesh.vertices
                local = [(verts[f[0]], verts[f[1]], verts[f[2]]) for f in mesh.faces]
            elif isinstance(shape, TriangleMesh):
                local = [(shape.vertices[f[0]], shape.vertices[f[1]],
                          shape.vertices[f[2]]) for f in shape.faces]
            else:
                raise TypeError(f"unsupported shape {type(shape).__name__}")
            tris += [tuple(rot @ p + tr for p in t) for t in local]
            mats += [m] * len(local)
        if tris:
            groups.append(_make_group(tris, mats))

    point_pos, point_rgb = [], []
    env = np.zeros(3)
    for light in spec.lights:
        if isinstance(light, PointLight):
            point_pos.append(light.position)
            point_rgb.append(light.intensity)
        elif isinstance(light, AreaLight):
            u, v = np.array(light.edge_u), np.array(light.edge_v)
            area = np.linalg.norm(np.cross(u, v))
            center = np.array(light.corner) + 0.5 * u + 0.5 * v
            point_pos.append(center)
            point_rgb.append(np.array(light.emission) * area)
        elif isinstance(light, DiscoLight):
            for e in light.emitters:
                point_pos.append(e.position)
                point_rgb.append(np.array(e.color) * e.power)
        elif isinstance(light, EnvironmentLight):
            env = env + np.array(light.sky)

    def arr(x, shape):
        return np.array(x, dtype=float).reshape(shape)

    return CompiledScene(
        groups,
        arr(sphere_c, (-1, 3)), np.array(sphere_r, dtype=float),
        np.array(sphere_mat, dtype=np.int64),
        np.array(mat_kind, dtype=np.int64), arr(mat_rgb, (-1, 3)),
        np.array(mat_ior, dtype=float),
        arr(point_pos, (-1, 3)), arr(point_rgb, (-1, 3)),
        env, spec.camera,
    )


# ---------------------------------------------------------------------------
# batched intersection

_CHUNK_ELEMS = 2_000_000  # rays x triangles per vectorized block


def _aabb_mask(O, D, lo, hi, t_best):
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / D
        t0 = (lo[None] - O) * inv
        t1 = (hi[None] - O) * inv
    near = np.fmin(t0, t1)
    far = np.fmax(t0, t1)
    near = np.where(np.isnan(near), -np.inf, near)
    far = np.where(np.isnan(far), np.inf, far)
    t_enter = np.maximum(near.max(axis=1), INTERSECT_EPS)
    t_exit = far.min(axis=1)
    return (t_enter <= t_exit) & (t_enter <= t_best)


def _tri_chunk(O, D, g: TriGroup):
    """Nearest triangle hit within one group for a chunk of rays."""
    with np.errstate(divide="ignore", invalid="ignore"):
        pvec = np.cross(D[:, None, :], g.e2[None, :, :])
        det = np.einsum("snk,nk->sn", pvec, g.e1)
        inv_det = 1.0 / det
        tvec = O[:, None, :] - g.v0[None, :, :]
        u = np.einsum("snk,snk->sn", tvec, pvec) * inv_det
        qvec = np.cross(tvec, g.e1[None, :, :])
        v = np.einsum("sk,snk->sn", D, qvec) * inv_det
        tt = np.einsum("nk,snk->sn", g.e2, qvec) * inv_det
        ok = ((np.abs(det) > 1e-14) & (u >= 0.0) & (u <= 1.0) & (v >= 0.0)
              & (u + v <= 1.0) & (tt > INTERSECT_EPS))
    tt = np.where(ok, tt, np.inf)
    j = np.argmin(tt, axis=1)
    tb = tt[np.arange(len(O)), j]
    return tb, g.mat[j], g.normal[j]


def intersect_batch(cs: CompiledScene, O, D):
    """Nearest hits for a batch of rays.

    Returns (t, mat, normal): t inf and mat -1 where the ray escapes;
    normal is the unoriented outward geometric normal.
    """
    k = len(O)
    t = np.full(k, np.inf)
    mat = np.full(k, -1, dtype=np.int64)
    normal = np.zeros((k, 3))

    if len(cs.sphere_r):
        oc = O[:, None, :] - cs.sphere_c[None, :, :]
        b = np.einsum("smk,sk->sm", oc, D)
        c = np.einsum("smk,smk->sm", oc, oc) - cs.sphere_r[None, :] ** 2
        disc = b * b - c
        valid = disc >= 0.0
        root = np.sqrt(np.where(valid, disc, 0.0))
        t0 = -b - root
        t1 = -b + root
        ts = np.where(t0 > INTERSECT_EPS, t0, t1)
        ts = np.where(valid & (ts > INTERSECT_EPS), ts, np.inf)
        j = np.argmin(ts, axis=1)
        rows = np.arange(k)
        tb = ts[rows, j]
        better = tb < t
        t[better] = tb[better]
        mat[better] = cs.sphere_mat[j[better]]
        p = O[better] + tb[better, None] * D[better]
        normal[better] = (p - cs.sphere_c[j[better]]) / cs.sphere_r[j[better], None]

    for g in cs.groups:
        sel = np.nonzero(_aabb_mask(O, D, g.lo, g.hi, t))[0]
        if not len(sel):
            continue
        n = len(g.mat)
        step = max(1, _CHUNK_ELEMS // max(n, 1))
        for s0 in range(0, len(sel), step):
            ss = sel[s0:s0 + step]
            tb, mj, nj = _tri_chunk(O[ss], D[ss], g)
            better = tb < t[ss]
            idx = ss[better]
            t[idx] = tb[better]
            mat[idx] = mj[better]
            normal[idx] = nj[better]
    return t, mat, normal


def occluded(cs: CompiledScene, O, D, max_t):
    """True where any diffuse surface blocks the segment (0, max_t)."""
    blocked = np.zeros(len(O), dtype=bool)
    if len(cs.sphere_r):
        diffuse = cs.mat_kind[cs.sphere_mat] == KIND_DIFFUSE
        if diffuse.any():
            c = cs.sphere_c[diffuse]
            r = cs.sphere_r[diffuse]
            oc = O[:, None, :] - c[None, :, :]
            b = np.einsum("smk,sk->sm", oc, D)
            cc = np.einsum("smk,smk->sm", oc, oc) - r[None, :] ** 2
            disc = b * b - cc
            valid = disc >= 0.0
            root = np.sqrt(np.where(valid, disc, 0.0))
            t0 = -b - root
            t1 = -b + root
            ts = np.where(t0 > INTERSECT_EPS, t0, t1)
            hit = valid & (ts > INTERSECT_EPS) & (ts < max_t[:, None])
            blocked |= hit.any(axis=1)
    O32 = np.asarray(O, dtype=np.float32)
    D32 = np.asarray(D, dtype=np.float32)
    t32 = np.asarray(max_t, dtype=np.float32)
    for g in cs.groups:
        # cached float32 copy of the group's diffuse triangles: shadow
        # occlusion is a boolean any-hit, single precision is plenty
        cache = getattr(g, "shadow_tris", None)
        if cache is None:
            dmask = cs.mat_kind[g.mat] == KIND_DIFFUSE
            cache = (g.v0[dmask].astype(np.float32),
                     g.e1[dmask].astype(np.float32),
                     g.e2[dmask].astype(np.float32)) if dmask.any() else ()
            g.shadow_tris = cache
        if not cache:
            continue
        live = np.nonzero(~blocked)[0]
        if not len(live):
            break
        sel = live[_aabb_mask(O[live], D[live], g.lo, g.hi, max_t[live])]
        if not len(sel):
            continue
        v0, e1, e2 = cache
        n = len(v0)
        step = max(1, _CHUNK_ELEMS // max(n, 1))
        for s0 in range(0, len(sel), step):
            ss = sel[s0:s0 + step]
            Oc, Dc = O32[ss], D32[ss]
            with np.errstate(divide="ignore", invalid="ignore"):
                pvec = np.cross(Dc[:, None, :], e2[None, :, :])
                det = np.einsum("snk,nk->sn", pvec, e1)
                inv_det = 1.0 / det
                tvec = Oc[:, None, :] - v0[None, :, :]
                u = np.einsum("snk,snk->sn", tvec, pvec) * inv_det
                qvec = np.cross(tvec, e1[None, :, :])
                v = np.einsum("sk,snk->sn", Dc, qvec) * inv_det
                tt = np.einsum("nk,snk->sn", e2, qvec) * inv_det
                ok = ((np.abs(det) > 1e-14) & (u >= 0.0) & (u <= 1.0) & (v >= 0.0)
                      & (u + v <= 1.0) & (tt > INTERSECT_EPS)
                      & (tt < t32[ss, None]))
            blocked[ss] |= ok.any(axis=1)
    return blocked
