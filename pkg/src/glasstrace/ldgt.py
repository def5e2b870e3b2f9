"""LDGT binary container for layered depth maps and the transparency mask.

Layout (little-endian): magic "LDGT" | version u32=1 | width u32 | height
u32 | max_layers u32 | flags u32 (bit 0: mask present) | reserved u32 |
per-pixel layer counts u8 row-major | depths f32, pixel-major, exactly
count entries per pixel | optional mask u8 row-major.
"""

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"LDGT"
VERSION = 1
HEADER = struct.Struct("<4s6I")


class LdgtError(IOError):
    pass


@dataclass
class LayeredDepthMap:
    counts: np.ndarray  # (H, W) uint8
    depths: np.ndarray  # (H, W, max_layers) float32, NaN where absent

    def __post_init__(self):
        if self.counts.shape != self.depths.shape[:2]:
            raise ValueError("counts/depths shape mismatch")
        if self.counts.max(initial=0) > self.max_layers:
            raise ValueError("layer count exceeds max_layers")

    @property
    def height(self):
        return self.counts.shape[0]

    @property
    def width(self):
        return self.counts.shape[1]

    @property
    def max_layers(self):
        return self.depths.shape[2]

    def layer(self, i):
        """Depth map of 1-based layer i (NaN where the pixel has fewer layers)."""
        if not (1 <= i <= self.max_layers):
            raise ValueError(f"layer {i} out of 1..{self.max_layers}")
        return self.depths[:, :, i - 1]

    def last_layer(self):
        """Depth of the final recorded layer per pixel (NaN for empty pixels)."""
        idx = np.maximum(self.counts.astype(np.int64) - 1, 0)
        out = np.take_along_axis(self.depths, idx[:, :, None], axis=2)[:, :, 0]
        return np.where(self.counts > 0, out, np.nan)


def pack_ldgt(ldm: LayeredDepthMap, mask=None) -> bytes:
    h, w, ml = ldm.height, ldm.width, ldm.max_layers
    flags = 1 if mask is not None else 0
    parts = [HEADER.pack(MAGIC, VERSION, w, h, ml, flags, 0)]
    counts = np.ascontiguousarray(ldm.counts, dtype=np.uint8)
    parts.append(counts.tobytes())
    flat = ldm.depths.reshape(-1, ml).astype("<f4")
    keep = np.arange(ml)[None, :] < counts.reshape(-1, 1)
    parts.append(flat[keep].tobytes())
    if mask is not None:
        parts.append(np.ascontiguousarray(mask, dtype=np.uint8).tobytes())
    return b"".join(parts)


def unpack_ldgt(data: bytes):
    if len(data) < HEADER.size:
        raise LdgtError("truncated header")
    magic, version, w, h, ml, flags, _ = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise LdgtError(f"bad magic {magic!r}")
    if version != VERSION:
        raise LdgtError(f"unsupported version {version}")
    off = HEADER.size
    npix = h * w
    if len(data) < off + npix:
        raise LdgtError("truncated layer counts")
    counts = np.frombuffer(data, dtype=np.uint8, count=npix, offset=off).reshape(h, w)
    if counts.max(initial=0) > ml:
        raise LdgtError("layer count exceeds max_layers")
    off += npix
    ndepth = int(counts.sum(dtype=np.int64))
    if len(data) < off + 4 * ndepth:
        raise LdgtError("truncated depth payload")
    vals = np.frombuffer(data, dtype="<f4", count=ndepth, offset=off)
    off += 4 * ndepth
    depths = np.full((npix, ml), np.nan, dtype=np.float32)
    keep = np.arange(ml)[None, :] < counts.reshape(-1, 1)
    depths[keep] = vals
    mask = None
    if flags & 1:
        if len(data) < off + npix:
            raise LdgtError("truncated mask")
        mask = np.frombuffer(data, dtype=np.uint8, count=npix, offset=off)
        mask = mask.reshape(h, w).astype(bool)
        off += npix
    if off != len(data):
        raise LdgtError(f"{len(data) - off} trailing bytes")
    return LayeredDepthMap(counts.copy(), depths.reshape(h, w, ml)), mask


def write_ldgt(ldm: LayeredDepthMap, mask, path):
    with open(path, "wb") as f:
        f.write(pack_ldgt(ldm, mask))


def read_ldgt(path):
    with open(path, "rb") as f:
        return unpack_ldgt(f.read())
