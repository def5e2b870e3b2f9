"""The two render passes: layered-depth ground truth and the RGB image.

The ground-truth pass shoots one deterministic pixel-center ray per pixel
and records a depth at every transmissive interface crossing plus the
opaque terminal surface.  Depth is always the camera-space z of the hit
point, so refraction-bent rays write distorted background depth exactly as
seen through the transparent object.  Total internal reflection continues
the ray without logging a layer (no medium transition happened).

The RGB pass is Whitted-style: diffuse surfaces get direct lighting with
shadow rays, transmissive surfaces split into reflection and refraction by
Schlick's Fresnel weight.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geometry import CameraModel, Ray, camera_ray
from .ldgt import LayeredDepthMap
from .rng import make_rng
from .tracecore import KIND_TRANSMISSIVE, CompiledScene, compile_scene, intersect_batch, occluded

ENTER = 1
EXIT = 2
OPAQUE = 3
_KIND_NAMES = {ENTER: "enter-transmissive", EXIT: "exit-transmissive",
               OPAQUE: "opaque-terminal"}

_STACK_DEPTH = 12
_IOR_TOL = 1e-9


@dataclass(frozen=True)
class RenderConfig:
    resolution: tuple = None  # (H, W) override; default: scene camera
    spp: int = 4
    max_bounces: int = 24
    max_layers: int = 8
    tile_rows: int = 64
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.spp < 1 or self.max_layers < 1 or self.tile_rows < 1:
            raise ValueError("spp, max_layers and tile_rows must be >= 1")


@dataclass(frozen=True)
class LayerHit:
    layer: int       # 1-based
    depth: float     # camera-space z, meters
    material_id: int
    kind: str        # enter-transmissive | exit-transmissive | opaque-terminal


def _as_compiled(scene):
    return scene if isinstance(scene, CompiledScene) else compile_scene(scene)


def _camera_rays(camera: CameraModel, jitter):
    h, w = camera.height, camera.width
    half_h = np.tan(camera.fov_y / 2.0)
    half_w = half_h * w / h
    px = np.tile(np.arange(w), h)
    py = np.repeat(np.arange(h), w)
    sx = ((px + jitter[:, 0]) / w * 2.0 - 1.0) * half_w
    sy = (1.0 - (py + jitter[:, 1]) / h * 2.0) * half_h
    d = (camera.forward[None, :] + sx[:, None] * camera.right[None, :]
         + sy[:, None] * camera.up[None, :])
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    o = np.broadcast_to(camera.position, d.shape).copy()
    return o, d


def _refract_batch(D, N_opp, eta):
    """Vectorized Snell; returns (directions, tir_mask)."""
    cos_i = -np.einsum("ij,ij->i", D, N_opp)
    k = 1.0 - eta * eta * (1.0 - cos_i * cos_i)
    tir = k < 0.0
    root = np.sqrt(np.where(tir, 0.0, k))
    T = eta[:, None] * D + (eta * cos_i - root)[:, None] * N_opp
    norm = np.linalg.norm(T, axis=1, keepdims=True)
    T = T / np.where(norm == 0.0, 1.0, norm)
    return T, tir


def _reflect_batch(D, N_opp):
    return D - 2.0 * np.einsum("ij,ij->i", D, N_opp)[:, None] * N_opp


def _resolve_transition(cs, stacks, ptr, mat, entering):
    """Media on either side of a transmissive interface, pre-commit.

    Returns (n1, n2, pop_slot) where pop_slot[i] is the stack slot removed
    when an exiting ray commits, or -1 (enter / no matching entry).
    """
    k = len(mat)
    rows = np.arange(k)
    n1 = stacks[rows, ptr]
    ior = cs.mat_ior[mat]
    n2 = np.where(entering, ior, n1)
    pop_slot = np.full(k, -1, dtype=np.int64)
    exiting = np.nonzero(~entering)[0]
    if len(exiting):
        depth_idx = np.arange(_STACK_DEPTH)[None, :]
        sub_stacks = stacks[exiting]
        sub_ptr = ptr[exiting]
        match = (np.abs(sub_stacks - ior[exiting, None]) < _IOR_TOL) \
            & (depth_idx >= 1) & (depth_idx <= sub_ptr[:, None])
        has = match.any(axis=1)
        slot = np.where(has, _STACK_DEPTH - 1 - np.argmax(match[:, ::-1], axis=1), -1)
        pop_slot[exiting] = slot
        # medium after removing the matched entry: unchanged top unless the
        # top itself was matched; no match leaves the stack alone (eta = 1)
        top_popped = has & (slot == sub_ptr)
        below = sub_stacks[np.arange(len(exiting)), np.maximum(sub_ptr - 1, 0)]
        n2[exiting] = np.where(top_popped, below, n1[exiting])
    return n1, n2, pop_slot


def _commit_transition(stacks, ptr, mat_ior, idx, entering, pop_slot):
    """Apply stack pushes/pops for rays idx that crossed an interface."""
    ent = idx[entering[idx]]
    if len(ent):
        new_ptr = np.minimum(ptr[ent] + 1, _STACK_DEPTH - 1)
        stacks[ent, new_ptr] = mat_ior[ent]
        ptr[ent] = new_ptr
    ext = idx[~entering[idx]]
    for i in ext:
        s = pop_slot[i]
        if s < 0:
            continue
        p = ptr[i]
        if s < p:  # remove an inner entry, shift the ones above down
            stacks[i, s:p] = stacks[i, s + 1:p + 1]
        ptr[i] = p - 1


def trace_layer_arrays(cs: CompiledScene, O, D, max_layers, camera, max_bounces,
                       media=None):
    """Batched layer tracing; returns (counts, depths, kinds, mats)."""
    k = len(O)
    counts = np.zeros(k, dtype=np.uint8)
    depths = np.full((k, max_layers), np.nan, dtype=np.float32)
    kinds = np.zeros((k, max_layers), dtype=np.uint8)
    mats = np.full((k, max_layers), -1, dtype=np.int64)
    stacks = np.ones((k, _STACK_DEPTH))
    ptr = np.zeros(k, dtype=np.int64)
    if media is not None:
        for j, n in enumerate(media[:_STACK_DEPTH]):
            stacks[:, j] = n
        ptr[:] = min(len(media), _STACK_DEPTH) - 1
    O = np.array(O, dtype=float)
    D = np.array(D, dtype=float)
    alive = np.ones(k, dtype=bool)

    for _ in range(max_bounces):
        idx = np.nonzero(alive)[0]
        if not len(idx):
            break
        t, mat, n_out = intersect_batch(cs, O[idx], D[idx])
        miss = mat < 0
        alive[idx[miss]] = False
        hit = np.nonzero(~miss)[0]
        if not len(hit):
            break
        hidx = idx[hit]
        th, mh = t[hit], mat[hit]
        P = O[hidx] + th[:, None] * D[hidx]
        z = (P - camera.position[None, :]) @ camera.forward

        trans = cs.mat_kind[mh] == KIND_TRANSMISSIVE
        facing = np.einsum("ij,ij->i", D[hidx], n_out[hit]) < 0.0
        n_opp = np.where(facing[:, None], n_out[hit], -n_out[hit])

        # opaque terminal: record and stop
        op = np.nonzero(~trans)[0]
        if len(op):
            gi = hidx[op]
            slot = counts[gi]
            depths[gi, slot] = z[op]
            kinds[gi, slot] = OPAQUE
            mats[gi, slot] = mh[op]
            counts[gi] += 1
            alive[gi] = False

        tr = np.nonzero(trans)[0]
        if len(tr):
            gi = hidx[tr]
            entering_all = np.zeros(k, dtype=bool)
            entering_all[gi] = facing[tr]
            n1, n2, pop_slot = _resolve_transition(
                cs, stacks[gi], ptr[gi], mh[tr], facing[tr])
            eta = n1 / n2
            newD, tir = _refract_batch(D[gi], n_opp[tr], eta)
            refl = _reflect_batch(D[gi], n_opp[tr])
            newD[tir] = refl[tir]

            crossed = ~tir
            ci = gi[crossed]
            if len(ci):
                pop_all = np.full(k, -1, dtype=np.int64)
                pop_all[gi] = pop_slot
                _commit_transition(stacks, ptr,
                                   _scatter(k, gi, cs.mat_ior[mh[tr]]),
                                   ci, entering_all, pop_all)
                slot = counts[ci]
                depths[ci, slot] = z[tr][crossed]
                kinds[ci, slot] = np.where(facing[tr][crossed], ENTER, EXIT)
                mats[ci, slot] = mh[tr][crossed]
                counts[ci] += 1
                done = ci[counts[ci] >= max_layers]
                alive[done] = False

            O[gi] = P[tr]
            D[gi] = newD
    return counts, depths, kinds, mats


def _scatter(k, idx, vals):
    out = np.zeros(k)
    out[idx] = vals
    return out


def trace_layers(ray: Ray, scene, max_layers=8, camera=None, max_bounces=24):
    """Layer hits along one primary ray, in traversal order."""
    cs = _as_compiled(scene)
    cam = camera if camera is not None else cs.camera
    counts, depths, kinds, mats = trace_layer_arrays(
        cs, ray.origin[None, :], ray.direction[None, :], max_layers, cam,
        max_bounces, media=ray.media)
    out = []
    for i in range(int(counts[0])):
        out.append(LayerHit(i + 1, float(depths[0, i]), int(mats[0, i]),
                            _KIND_NAMES[int(kinds[0, i])]))
    return out


def _row_bands(h, tile_rows):
    return [(r, min(r + tile_rows, h)) for r in range(0, h, tile_rows)]


def render_layers(scene, cfg: RenderConfig):
    """Ground-truth pass: (LayeredDepthMap, trans_mask) at pixel centers."""
    cs = _as_compiled(scene)
    cam = _override_camera(cs.camera, cfg.resolution)
    h, w = cam.height, cam.width
    jitter = np.full((h * w, 2), 0.5)
    O, D = _camera_rays(cam, jitter)
    counts = np.zeros(h * w, dtype=np.uint8)
    depths = np.full((h * w, cfg.max_layers), np.nan, dtype=np.float32)
    first_kind = np.zeros(h * w, dtype=np.uint8)

    def run_band(band):
        a, b = band
        sl = slice(a * w, b * w)
        c, d, kk, _ = trace_layer_arrays(cs, O[sl], D[sl], cfg.max_layers, cam,
                                         cfg.max_bounces)
        counts[sl] = c
        depths[sl] = d
        first_kind[sl] = kk[:, 0]

    bands = _row_bands(h, cfg.tile_rows)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            list(ex.map(run_band, bands))
    else:
        for band in bands:
            run_band(band)

    ldm = LayeredDepthMap(counts.reshape(h, w), depths.reshape(h, w, cfg.max_layers))
    trans_mask = (first_kind == ENTER).reshape(h, w)
    return ldm, trans_mask


def _override_camera(cam, resolution):
    if resolution is None or (cam.height, cam.width) == tuple(resolution):
        return cam
    return CameraModel(cam.position, cam.right, cam.up, cam.forward, cam.fov_y,
                       int(resolution[0]), int(resolution[1]))


# ---------------------------------------------------------------------------
# RGB pass

_WEIGHT_CUTOFF = 1e-3


def _shade_sample(cs, O, D, max_bounces):
    k = len(O)
    radiance = np.zeros((k, 3))
    stacks0 = np.ones((k, _STACK_DEPTH))
    ptr0 = np.zeros(k, dtype=np.int64)
    queue = [(np.arange(k), O, D, np.ones((k, 3)), stacks0, ptr0, 0)]
    while queue:
        pix, O_, D_, W_, stacks, ptr, depth = queue.pop()
        t, mat, n_out = intersect_batch(cs, O_, D_)
        miss = mat < 0
        if miss.any():
            radiance[pix[miss]] += W_[miss] * cs.env_rgb[None, :]
        hit = np.nonzero(~miss)[0]
        if not len(hit):
            continue
        th, mh = t[hit], mat[hit]
        P = O_[hit] + th[:, None] * D_[hit]
        facing = np.einsum("ij,ij->i", D_[hit], n_out[hit]) < 0.0
        N = np.where(facing[:, None], n_out[hit], -n_out[hit])
        trans = cs.mat_kind[mh] == KIND_TRANSMISSIVE

        dif = np.nonzero(~trans)[0]
        if len(dif):
            albedo = cs.mat_rgb[mh[dif]]
            Pd, Nd = P[dif], N[dif]
            total = albedo * cs.env_rgb[None, :]  # ambient sky term
            for li in range(len(cs.point_rgb)):
                lvec = cs.point_pos[li][None, :] - Pd
                dist = np.linalg.norm(lvec, axis=1)
                ldir = lvec / dist[:, None]
                ndotl = np.einsum("ij,ij->i", Nd, ldir)
                lit = ndotl > 0.0
                if not lit.any():
                    continue
                vis = ~occluded(cs, Pd[lit] + 1e-5 * ldir[lit], ldir[lit],
                                dist[lit] - 1e-4)
                contrib = np.zeros((len(Pd), 3))
                sub = np.nonzero(lit)[0][vis]
                contrib[sub] = (albedo[sub] * cs.point_rgb[li][None, :]
                                * ndotl[sub][:, None] / (dist[sub] ** 2)[:, None])
                total += contrib
            radiance[pix[hit[dif]]] += W_[hit[dif]] * total

        tr = np.nonzero(trans)[0]
        if len(tr) and depth < max_bounces:
            ht = hit[tr]
            sub_stacks = stacks[ht].copy()
            sub_ptr = ptr[ht].copy()
            n1, n2, pop_slot = _resolve_transition(cs, sub_stacks, sub_ptr,
                                                   mh[tr], facing[tr])
            eta = n1 / n2
            cos_i = -np.einsum("ij,ij->i", D_[ht], N[tr])
            r0 = ((n1 - n2) / (n1 + n2)) ** 2
            R = r0 + (1.0 - r0) * (1.0 - cos_i) ** 5
            T_dir, tir = _refract_batch(D_[ht], N[tr], eta)
            R = np.where(tir, 1.0, R)
            refl_dir = _reflect_batch(D_[ht], N[tr])
            w_here = W_[ht]

            w_refl = w_here * R[:, None]
            go = w_refl.max(axis=1) > _WEIGHT_CUTOFF
            if go.any():
                queue.append((pix[ht[go]], P[tr][go] + 1e-5 * refl_dir[go],
                              refl_dir[go], w_refl[go],
                              sub_stacks[go].copy(), sub_ptr[go].copy(), depth + 1))

            tint = cs.mat_rgb[mh[tr]]
            w_refr = w_here * (1.0 - R)[:, None] * tint
            go = (~tir) & (w_refr.max(axis=1) > _WEIGHT_CUTOFF)
            if go.any():
                st = sub_stacks[go].copy()
                pt = sub_ptr[go].copy()
                k2 = len(st)
                ent = facing[tr][go]
                ior2 = cs.mat_ior[mh[tr][go]]
                _commit_transition(st, pt, _scatter_local(k2, ior2),
                                   np.arange(k2), ent, pop_slot[go])
                queue.append((pix[ht[go]], P[tr][go] + 1e-5 * T_dir[go],
                              T_dir[go], w_refr[go], st, pt, depth + 1))
    return radiance


def _scatter_local(k, vals):
    out = np.zeros(k)
    out[:] = vals
    return out


def tonemap(radiance):
    """Reinhard + sRGB encode to uint8."""
    c = radiance / (1.0 + radiance)
    srgb = np.where(c <= 0.0031308, 12.92 * c, 1.055 * np.power(c, 1.0 / 2.4) - 0.055)
    return np.clip(np.round(srgb * 255.0), 0, 255).astype(np.uint8)


def render_rgb(scene, cfg: RenderConfig):
    """Whitted beauty pass; returns an (H, W, 3) uint8 image."""
    cs = _as_compiled(scene)
    cam = _override_camera(cs.camera, cfg.resolution)
    h, w = cam.height, cam.width
    accum = np.zeros((h * w, 3))
    for s in range(cfg.spp):
        rng = make_rng(cfg.seed, f"jitter-{s}")
        jitter = rng.uniform(0.0, 1.0, size=(h * w, 2))
        O, D = _camera_rays(cam, jitter)
        bands = _row_bands(h, cfg.tile_rows)

        def run_band(band):
            a, b = band
            sl = slice(a * w, b * w)
            accum[sl] += _shade_sample(cs, O[sl], D[sl], cfg.max_bounces)

        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
                list(ex.map(run_band, bands))
        else:
            for band in bands:
                run_band(band)
    return tonemap(accum / cfg.spp).reshape(h, w, 3)


def write_png(image, path):
    from PIL import Image

    Image.fromarray(image, mode="RGB").save(path, format="PNG")
