"""Binary and text formats: tensors, PGM/PPM images, dataset manifests.

Tensor files are little-endian and platform independent:

    bytes 0-7   magic "MSFTENS1"
    byte  8     dtype code (0 = 32-bit float, little endian)
    byte  9     rank r
    then        r unsigned 32-bit dims, little endian
    then        row-major float payload

Manifests are UTF-8 text with one record per line, tab separated:
``relative/path<TAB>class name<TAB>optional sample id``. Lines starting
with '#' and blank lines are ignored.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CacheInvalidError, FormatError, ManifestError
from .featmap import ExtractorSpec, Image, ScaleSet, extract, warp
from .pipeline import Dataset
from .spp import PyramidSpec, spp_pool

MAGIC = b"MSFTENS1"
DTYPE_F32 = 0
_HEADER_FIXED = len(MAGIC) + 2  # magic + dtype + rank


def write_tensor(path, dims, values) -> None:
    """Write a float32 tensor; the write is atomic (temp file then rename)."""
    path = Path(path)
    dims = tuple(int(d) for d in dims)
    if len(dims) > 255 or any(d < 1 for d in dims):
        raise ValueError(f"dims must be 1..255 positive sizes, got {dims}")
    vals = np.ascontiguousarray(values, dtype=np.float32).reshape(-1)
    count = int(np.prod(dims))
    if vals.size != count:
        raise ValueError(f"got {vals.size} values for dims {dims} (need {count})")
    if not np.isfinite(vals).all():
        raise ValueError("tensor values must be finite")
    header = MAGIC + bytes((DTYPE_F32, len(dims)))
    header += b"".join(struct.pack("<I", d) for d in dims)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    tmp.write_bytes(header + vals.astype("<f4").tobytes())
    os.replace(tmp, path)


def read_tensor(path):
    """Read a tensor file, returning (dims, float32 array shaped to dims).

    Raises FormatError with the byte offset of the problem for a wrong magic,
    unknown dtype, truncated header or payload, trailing bytes, or any
    non-finite value.
    """
    blob = Path(path).read_bytes()
    if blob[: len(MAGIC)] != MAGIC:
        raise FormatError(f"bad magic {blob[:len(MAGIC)]!r}", offset=0)
    if len(blob) < _HEADER_FIXED:
        raise FormatError("truncated header", offset=len(blob))
    dtype_code = blob[len(MAGIC)]
    rank = blob[len(MAGIC) + 1]
    if dtype_code != DTYPE_F32:
        raise FormatError(f"unsupported dtype code {dtype_code}", offset=len(MAGIC))
    dims_end = _HEADER_FIXED + 4 * rank
    if len(blob) < dims_end:
        raise FormatError("truncated dims", offset=len(blob))
    dims = struct.unpack(f"<{rank}I", blob[_HEADER_FIXED:dims_end])
    count = int(np.prod(dims)) if rank else 1
    total = dims_end + 4 * count
    if len(blob) < total:
        raise FormatError("truncated payload", offset=len(blob))
    if len(blob) > total:
        raise FormatError("trailing bytes after payload", offset=total)
    vals = np.frombuffer(blob, dtype="<f4", offset=dims_end, count=count).astype(np.float32)
    finite = np.isfinite(vals)
    if not finite.all():
        bad = int(np.flatnonzero(~finite)[0])
        raise FormatError("non-finite value in payload", offset=dims_end + 4 * bad)
    return dims, vals.reshape(dims)


def _pnm_header(blob: bytes, path) -> tuple[int, int, int, int, int]:
    """Parse a P5/P6 header; returns (channels, width, height, maxval, payload offset)."""
    magic = blob[:2]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise FormatError(f"{path}: not a binary PGM/PPM file", offset=0)
    fields = []
    pos = 2
    while len(fields) < 3:
        if pos >= len(blob):
            raise FormatError(f"{path}: truncated header", offset=pos)
        c = blob[pos : pos + 1]
        if c == b"#":
            while pos < len(blob) and blob[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        elif c.isdigit():
            start = pos
            while pos < len(blob) and blob[pos : pos + 1].isdigit():
                pos += 1
            fields.append(int(blob[start:pos]))
        else:
            raise FormatError(f"{path}: unexpected byte {c!r} in header", offset=pos)
    if pos >= len(blob) or not blob[pos : pos + 1].isspace():
        raise FormatError(f"{path}: missing whitespace before pixel data", offset=pos)
    pos += 1
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError(f"{path}: bad dimensions {width}x{height}")
    if not (0 < maxval <= 255):
        raise FormatError(f"{path}: only 8-bit images supported, maxval {maxval}")
    return channels, width, height, maxval, pos


def image_from_bytes(blob: bytes, path="<bytes>") -> Image:
    """Decode a binary PGM (P5) or PPM (P6) image with values scaled to [0, 1]."""
    channels, width, height, maxval, pos = _pnm_header(blob, path)
    need = width * height * channels
    raw = np.frombuffer(blob, dtype=np.uint8, offset=pos, count=-1)
    if raw.size < need:
        raise FormatError(f"{path}: truncated pixel data", offset=pos + raw.size)
    pixels = raw[:need].astype(np.float64) / maxval
    if channels == 1:
        data = pixels.reshape(1, height, width)
    else:
        # PPM interleaves RGB per pixel; store channel-major
        data = pixels.reshape(height, width, 3).transpose(2, 0, 1)
    return Image(data)


def read_image(path) -> Image:
    return image_from_bytes(Path(path).read_bytes(), path=str(path))


def write_image(path, image: Image) -> None:
    """Write a P5 (1 channel) or P6 (3 channel) binary image, 8-bit."""
    path = Path(path)
    magic = b"P5" if image.channels == 1 else b"P6"
    header = b"%s\n%d %d\n255\n" % (magic, image.width, image.height)
    pixels = np.round(image.data * 255.0).astype(np.uint8)
    if image.channels == 3:
        pixels = pixels.transpose(1, 2, 0)
    path.write_bytes(header + pixels.tobytes())


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    label: str
    sample_id: str | None
    line: int


def read_manifest(path) -> list[ManifestEntry]:
    """Parse a manifest and verify every referenced file exists."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    entries = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = raw.split("\t")
        if len(parts) not in (2, 3):
            raise ManifestError(
                f"expected 'path<TAB>class[<TAB>id]', got {len(parts)} fields", line=ln
            )
        rel, label = parts[0].strip(), parts[1].strip()
        if not rel or not label:
            raise ManifestError("empty path or class name", line=ln)
        target = path.parent / rel
        if not target.is_file():
            raise ManifestError(f"missing file {rel}", line=ln)
        sample_id = parts[2].strip() if len(parts) == 3 else None
        entries.append(ManifestEntry(path=target, label=label, sample_id=sample_id, line=ln))
    if not entries:
        raise ManifestError(f"manifest {path} has no records")
    return entries


def _cache_key(img_bytes: bytes, side: int, extractor: ExtractorSpec, pyramid: PyramidSpec) -> str:
    h = hashlib.sha256()
    h.update(img_bytes)
    levels = ",".join(str(n) for n in pyramid.levels)
    h.update(f"|side={side}|{extractor.signature()}|levels={levels}".encode())
    return h.hexdigest()


def load_dataset(
    manifest_path,
    scales: ScaleSet,
    extractor: ExtractorSpec,
    pyramid: PyramidSpec,
    cache_dir=None,
    stats: dict | None = None,
) -> Dataset:
    """Warp, extract, and pool every manifest image at every scale.

    Descriptors are quantized to float32 (the cache dtype) so a warm-cache
    rerun reproduces a cold run bit for bit. With ``cache_dir`` set, each
    descriptor is stored as a rank-1 tensor file keyed by the content hash
    of (image bytes, scale, extractor, pyramid); a cached file with the
    wrong shape raises CacheInvalidError. ``stats``, when given, receives
    ``extract_calls`` and ``cache_hits`` counters.
    """
    entries = read_manifest(manifest_path)
    if cache_dir is not None:
        cache_dir = Path(cache_dir)
        cache_dir.mkdir(parents=True, exist_ok=True)
    if stats is not None:
        stats.setdefault("extract_calls", 0)
        stats.setdefault("cache_hits", 0)

    classes = tuple(sorted({e.label for e in entries}))
    class_index = {name: k for k, name in enumerate(classes)}
    labels = np.array([class_index[e.label] for e in entries], dtype=np.intp)

    columns: list[list[np.ndarray]] = [[] for _ in scales.sides]
    for entry in entries:
        try:
            img_bytes = entry.path.read_bytes()
            image = image_from_bytes(img_bytes, path=str(entry.path))
        except (OSError, FormatError, ValueError) as exc:
            raise ManifestError(f"unreadable image {entry.path.name}: {exc}", line=entry.line) from exc
        for si, side in enumerate(scales.sides):
            cached = None
            cache_file = None
            if cache_dir is not None:
                cache_file = cache_dir / f"{_cache_key(img_bytes, side, extractor, pyramid)}.tens"
                if cache_file.is_file():
                    dims, vals = read_tensor(cache_file)
                    if len(dims) != 1:
                        raise CacheInvalidError(
                            f"{cache_file.name}: expected rank 1, got dims {dims}"
                        )
                    cached = vals
                    if stats is not None:
                        stats["cache_hits"] += 1
            if cached is None:
                fmap = extract(warp(image, side), extractor)
                desc = spp_pool(fmap, pyramid, scale=side)
                cached = desc.values.astype(np.float32)
                if stats is not None:
                    stats["extract_calls"] += 1
                if cache_file is not None:
                    write_tensor(cache_file, (cached.size,), cached)
            if columns[si] and cached.size != columns[si][0].size:
                raise CacheInvalidError(
                    f"descriptor length {cached.size} for {entry.path.name} at scale {side} "
                    f"does not match {columns[si][0].size}"
                )
            columns[si].append(cached)

    blocks = tuple(np.vstack(col) for col in columns)
    return Dataset(classes=classes, labels=labels, scales=scales.sides, blocks=blocks)
