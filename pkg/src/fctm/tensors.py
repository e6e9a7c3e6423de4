"""Feature tensor containers and the FCFT on-disk feature file format.

FCFT layout (all integers little-endian)::

    magic   b"FCFT"
    version u16 (= 1)
    T       u32          number of feature sets (timesteps)
    N       u16          number of layers per set
    N x (C u32, H u32, W u32)
    payload T*N layers, each C*H*W float32 little-endian, row-major C->H->W
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    BadMagic,
    EmptySequence,
    NonFiniteValue,
    ShapeMismatch,
    TruncatedFile,
    UnsupportedVersion,
)

FCFT_MAGIC = b"FCFT"
FCFT_VERSION = 1

_HEADER = struct.Struct("<4sHIH")
_DIMS = struct.Struct("<III")

Shape = tuple[int, int, int]


def _frozen_array(data, dtype, what: str) -> np.ndarray:
    arr = np.array(data, dtype=dtype, order="C", copy=True)
    if arr.ndim != 3:
        raise ShapeMismatch(f"{what} must be 3-D (C, H, W), got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise NonFiniteValue(f"{what} contains NaN or Inf")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FeatureLayer:
    """One C x H x W feature map, stored as a read-only float32 array."""

    data: np.ndarray
    dtype = np.float32

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen_array(self.data, self.dtype, type(self).__name__))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> Shape:
        return tuple(int(d) for d in self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    def __repr__(self):
        return f"{type(self).__name__}(shape={self.shape})"


class ReducedFeature(FeatureLayer):
    """The single tensor z produced by the reduction transform.

    z only exists inside the codec, so it keeps float64 precision; the
    restored feature layers are float32 again.
    """

    dtype = np.float64


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """All layers emitted at the split point for one timestep."""

    layers: tuple[FeatureLayer, ...]

    def __post_init__(self):
        layers = tuple(
            l if isinstance(l, FeatureLayer) else FeatureLayer(l) for l in self.layers
        )
        if not layers:
            raise ShapeMismatch("a FeatureSet needs at least one layer")
        object.__setattr__(self, "layers", layers)

    @classmethod
    def from_arrays(cls, arrays: Iterable) -> "FeatureSet":
        return cls(tuple(FeatureLayer(a) for a in arrays))

    @property
    def shapes(self) -> list[Shape]:
        return [l.shape for l in self.layers]

    @property
    def size(self) -> int:
        return sum(l.size for l in self.layers)

    def __len__(self):
        return len(self.layers)

    def __iter__(self) -> Iterator[FeatureLayer]:
        return iter(self.layers)

    def __getitem__(self, i) -> FeatureLayer:
        return self.layers[i]


@dataclass(frozen=True, eq=False)
class FeatureSequence:
    """Time-ordered feature sets sharing one layer-shape signature.

    An empty sequence is representable (so that callers get a precise error
    from the operation that cannot handle it) but cannot be saved or encoded.
    """

    sets: tuple[FeatureSet, ...]

    def __post_init__(self):
        sets = tuple(s if isinstance(s, FeatureSet) else FeatureSet(tuple(s)) for s in self.sets)
        if sets:
            ref = sets[0].shapes
            for t, s in enumerate(sets[1:], start=1):
                if s.shapes != ref:
                    raise ShapeMismatch(
                        f"set {t} has layer shapes {s.shapes}, expected {ref}"
                    )
        object.__setattr__(self, "sets", sets)

    @classmethod
    def from_arrays(cls, sets: Iterable[Iterable]) -> "FeatureSequence":
        return cls(tuple(FeatureSet.from_arrays(s) for s in sets))

    def __len__(self):
        return len(self.sets)

    def __iter__(self) -> Iterator[FeatureSet]:
        return iter(self.sets)

    def __getitem__(self, i) -> FeatureSet:
        return self.sets[i]

    @property
    def element_count(self) -> int:
        return sum(s.size for s in self.sets)


def shape_signature(seq: FeatureSequence) -> list[Shape]:
    """Per-layer (C, H, W) of the sequence; empty list for an empty sequence."""
    if not seq.sets:
        return []
    return seq.sets[0].shapes


def encode_feature_sequence(seq: FeatureSequence) -> bytes:
    if not seq.sets:
        raise EmptySequence("cannot serialize a sequence with no feature sets")
    shapes = shape_signature(seq)
    parts = [_HEADER.pack(FCFT_MAGIC, FCFT_VERSION, len(seq), len(shapes))]
    parts.extend(_DIMS.pack(*s) for s in shapes)
    for fset in seq:
        for layer in fset:
            parts.append(layer.data.astype("<f4", copy=False).tobytes())
    return b"".join(parts)


def decode_feature_sequence(buf: bytes) -> FeatureSequence:
    if len(buf) < 4:
        raise TruncatedFile("file shorter than the FCFT magic")
    if buf[:4] != FCFT_MAGIC:
        raise BadMagic(f"expected magic {FCFT_MAGIC!r}, found {bytes(buf[:4])!r}")
    if len(buf) < _HEADER.size:
        raise TruncatedFile("FCFT header is truncated")
    _, version, n_sets, n_layers = _HEADER.unpack_from(buf, 0)
    if version != FCFT_VERSION:
        raise UnsupportedVersion(f"FCFT version {version} is not supported")
    if n_sets == 0:
        raise EmptySequence("FCFT file declares zero feature sets")
    if n_layers == 0:
        raise ShapeMismatch("FCFT file declares zero layers per set")
    off = _HEADER.size
    if len(buf) < off + n_layers * _DIMS.size:
        raise TruncatedFile("FCFT shape table is truncated")
    shapes = []
    for _ in range(n_layers):
        shapes.append(_DIMS.unpack_from(buf, off))
        off += _DIMS.size
    per_set = sum(c * h * w for c, h, w in shapes)
    expected = off + 4 * per_set * n_sets
    if len(buf) != expected:
        raise ShapeMismatch(
            f"declared shapes need {expected - off} payload bytes, file has {len(buf) - off}"
        )
    flat = np.frombuffer(buf, dtype="<f4", offset=off)
    if not np.isfinite(flat).all():
        raise NonFiniteValue("FCFT payload contains NaN or Inf")
    sets = []
    pos = 0
    for _ in range(n_sets):
        layers = []
        for c, h, w in shapes:
            n = c * h * w
            layers.append(FeatureLayer(flat[pos:pos + n].reshape(c, h, w)))
            pos += n
        sets.append(FeatureSet(tuple(layers)))
    return FeatureSequence(tuple(sets))


def load_feature_sequence(path: str | os.PathLike) -> FeatureSequence:
    with open(path, "rb") as f:
        return decode_feature_sequence(f.read())


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    """Write via a temporary sibling file and rename, so readers never see a torn file."""
    path = os.fspath(path)
    tmp = f"{path}.tmp-{os.getpid()}"
    try:
        with open(tmp, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def save_feature_sequence(seq: FeatureSequence, path: str | os.PathLike) -> None:
    atomic_write_bytes(path, encode_feature_sequence(seq))


def stack_layers(sets: Sequence[FeatureSet], layer: int) -> np.ndarray:
    """(T, C, H, W) view of one layer across time, for vectorized tools."""
    return np.stack([s.layers[layer].data for s in sets])
