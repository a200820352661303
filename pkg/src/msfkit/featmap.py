"""Images, feature maps, multi-scale warping, and a seeded feature extractor.

The extractor is a small stack of convolution layers whose filters are drawn
from a seeded zero-mean generator, with a rectifier after every convolution
and optional non-overlapping max pooling. It needs no training and is a pure
function of (image, spec): identical inputs give bit-identical feature maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

#: luma weights applied when a 3-channel image feeds a 1-channel extractor
GRAY_WEIGHTS = (0.299, 0.587, 0.114)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Image:
    """Pixel grid with values in [0, 1], stored channel-major (C, H, W)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if arr.ndim != 3 or arr.shape[0] not in (1, 3):
            raise ValueError(f"image data must have shape (1|3, H, W), got {arr.shape}")
        if arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ValueError("image must have at least one pixel")
        if not np.isfinite(arr).all():
            raise ValueError("image values must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("image values must lie in [0, 1]")
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class ScaleSet:
    """Strictly increasing square target sides, each at least 32 pixels."""

    sides: tuple[int, ...]

    def __post_init__(self):
        sides = tuple(int(s) for s in self.sides)
        if not sides:
            raise ValueError("scale set must not be empty")
        if any(s < 32 for s in sides):
            raise ValueError(f"every scale side must be >= 32, got {sides}")
        if any(b <= a for a, b in zip(sides, sides[1:])):
            raise ValueError(f"scale sides must be strictly increasing, got {sides}")
        object.__setattr__(self, "sides", sides)

    def __iter__(self):
        return iter(self.sides)

    def __len__(self):
        return len(self.sides)


@dataclass(frozen=True)
class FeatureMap:
    """C channels of a square a x a activation grid, channel-major (C, a, a)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ValueError(f"feature map must have shape (C, a, a), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("feature map must be non-empty")
        if not np.isfinite(arr).all():
            raise ValueError("feature map values must be finite")
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def side(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class LayerSpec:
    """One extractor layer: `filters` filters of size `size`, convolution
    stride `stride`, then non-overlapping max pooling of size `pool`
    (pool=1 means no pooling)."""

    filters: int
    size: int
    stride: int = 1
    pool: int = 1

    def __post_init__(self):
        if self.filters < 1 or self.size < 1 or self.stride < 1 or self.pool < 1:
            raise ValueError(f"layer fields must be positive, got {self}")


@dataclass(frozen=True)
class ExtractorSpec:
    """Configuration of the seeded random convolution stack.

    Filters are drawn once per call from ``numpy.random.default_rng(seed)``
    in layer order, scaled by 1/sqrt(fan_in) so activations stay bounded.
    No bias terms are used, so an all-zero image maps to an all-zero output.
    """

    seed: int
    layers: tuple[LayerSpec, ...]
    in_channels: int = 1

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("extractor needs at least one layer")
        if any(not isinstance(l, LayerSpec) for l in layers):
            raise ValueError("layers must be LayerSpec instances")
        if self.in_channels not in (1, 3):
            raise ValueError(f"in_channels must be 1 or 3, got {self.in_channels}")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "layers", layers)

    def signature(self) -> str:
        """Canonical string naming this configuration (used for cache keys)."""
        layers = ",".join(
            f"{l.filters}:{l.size}:{l.stride}:{l.pool}" for l in self.layers
        )
        return f"seed={self.seed};in={self.in_channels};layers={layers}"


def warp(image: Image, side: int) -> Image:
    """Resample an image to side x side with corner-aligned bilinear interpolation.

    Corner input pixels map exactly to corner output pixels, and every output
    value is a convex combination of inputs, so the [0, 1] range is preserved.
    """
    if side < 2:
        raise ValueError(f"warp target side must be >= 2, got {side}")
    src = image.data
    _, h, w = src.shape
    ys = np.linspace(0.0, h - 1.0, side)
    xs = np.linspace(0.0, w - 1.0, side)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[None, :, None]
    fx = (xs - x0)[None, None, :]

    rows0 = src[:, y0, :]
    rows1 = src[:, y1, :]
    a00 = rows0[:, :, x0]
    a01 = rows0[:, :, x1]
    a10 = rows1[:, :, x0]
    a11 = rows1[:, :, x1]
    out = (
        a00 * (1.0 - fy) * (1.0 - fx)
        + a01 * (1.0 - fy) * fx
        + a10 * fy * (1.0 - fx)
        + a11 * fy * fx
    )
    np.clip(out, 0.0, 1.0, out=out)
    return Image(out)


def _adapt_channels(data: np.ndarray, want: int) -> np.ndarray:
    have = data.shape[0]
    if have == want:
        return data
    if have == 3 and want == 1:
        gray = np.tensordot(np.asarray(GRAY_WEIGHTS), data, axes=(0, 0))
        return gray[None, :, :]
    # mono input to a 3-channel stack: replicate the channel
    return np.broadcast_to(data, (want,) + data.shape[1:]).copy()


def layer_filters(spec: ExtractorSpec) -> list[np.ndarray]:
    """Draw the filter bank for every layer, fixed entirely by spec.seed.

    Filters come in +/- pairs: wherever one response is negative its mirror
    is positive, so a nonzero signal always survives the rectifier no matter
    how the draw comes out (an unlucky bank of same-sign filters would
    otherwise zero out smooth images entirely).
    """
    rng = np.random.default_rng(spec.seed)
    banks = []
    in_c = spec.in_channels
    for layer in spec.layers:
        fan_in = in_c * layer.size * layer.size
        half = (layer.filters + 1) // 2
        base = rng.standard_normal((half, in_c, layer.size, layer.size)) * fan_in**-0.5
        w = np.empty((layer.filters, in_c, layer.size, layer.size))
        w[0::2] = base
        w[1::2] = -base[: layer.filters // 2]
        banks.append(w)
        in_c = layer.filters
    return banks


def _conv_valid(x: np.ndarray, w: np.ndarray, stride: int) -> np.ndarray:
    k = w.shape[-1]
    win = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    return np.einsum("chwij,fcij->fhw", win, w, optimize=True)


def _max_pool(x: np.ndarray, p: int) -> np.ndarray:
    c, h, w = x.shape
    hp, wp = h // p, w // p
    return x[:, : hp * p, : wp * p].reshape(c, hp, p, wp, p).max(axis=(2, 4))


def output_side(spec: ExtractorSpec, side: int) -> int:
    """Side of the feature map produced from a side x side input.

    Raises ValueError naming the first layer the input is too small for.
    """
    for idx, layer in enumerate(spec.layers):
        if side < layer.size:
            raise ValueError(
                f"layer {idx}: input side {side} smaller than filter size {layer.size}"
            )
        side = (side - layer.size) // layer.stride + 1
        if layer.pool > 1:
            if side < layer.pool:
                raise ValueError(
                    f"layer {idx}: side {side} smaller than pool size {layer.pool}"
                )
            side //= layer.pool
    return side


def extract(image: Image, spec: ExtractorSpec) -> FeatureMap:
    """Run the seeded convolution stack over an image.

    Each layer applies a valid (no padding) strided convolution without bias,
    a rectifier, and then non-overlapping max pooling when the layer asks for
    it. A 3-channel image feeding a 1-channel spec is first converted to gray
    with the fixed :data:`GRAY_WEIGHTS`.
    """
    x = _adapt_channels(image.data, spec.in_channels)
    for idx, (layer, w) in enumerate(zip(spec.layers, layer_filters(spec))):
        if x.shape[1] < layer.size:
            raise ValueError(
                f"layer {idx}: input side {x.shape[1]} smaller than filter size {layer.size}"
            )
        x = _conv_valid(x, w, layer.stride)
        np.maximum(x, 0.0, out=x)
        if layer.pool > 1:
            if x.shape[1] < layer.pool:
                raise ValueError(
                    f"layer {idx}: side {x.shape[1]} smaller than pool size {layer.pool}"
                )
            x = _max_pool(x, layer.pool)
    return FeatureMap(x)
