'''
Module: formats.py
Description: On-disk formats; .gts frame sequences, trajectory text files, calibration net container

Usage:
[Errors]
- UnreadableInput: missing, truncated or malformed input file
- FrameMismatch: estimated and ground-truth trajectories cover different frames

[.gts sequences]
- GtsHeader / PayloadKind: 'GTS1', version, W, H, count, kind, pitch, frame rate (little-endian)
- GtsWriter: streaming writer; the frame count is patched on close
- GtsReader: header + random access / iteration over (timestamp, payload)
- write_gts() / read_gts(): whole-sequence helpers
- concat_gts(): merge sequences, re-basing timestamps at the frame rate

[Trajectories]
- write_trajectory() / read_trajectory(): 'frame_id t tx ty tz qx qy qz qw' lines

[Calibration net]
- write_net() / read_net(): 'TNET', version, layer sizes, float32 weights and biases per layer
'''
# Import packages
from __future__ import annotations
import enum
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, Mapping, Optional, Sequence, Union

import numpy as np

from ..errors import TacSlamError
from ..geometry import TransformSE3
from ..sim.calibration import CalibrationNet
from ..surface import SensorSpec

log = logging.getLogger(__name__)

PathLike = Union[str, Path]


class UnreadableInput(TacSlamError):
    """Raised for missing, truncated or malformed input files."""


class FrameMismatch(TacSlamError):
    """Raised when two trajectories to compare do not cover the same frames."""


# ---------- .gts ----------

GTS_MAGIC = b"GTS1"
GTS_VERSION = 1
_GTS_HEADER = struct.Struct("<4sIIIIIdd")
_TIMESTAMP = struct.Struct("<d")
_COUNT_OFFSET = 16                      # magic + version + width + height
UNIT_TOL = 1e-3


class PayloadKind(enum.IntEnum):
    NORMALS = 0
    RGB = 1

    @property
    def dtype(self) -> np.dtype:
        return np.dtype("<f4") if self is PayloadKind.NORMALS else np.dtype("u1")


@dataclass(frozen=True)
class GtsHeader:
    width: int
    height: int
    count: int
    kind: PayloadKind
    pitch: float
    frame_rate: float
    version: int = GTS_VERSION

    @property
    def frame_bytes(self) -> int:
        return self.width * self.height * 3 * self.kind.dtype.itemsize

    @property
    def record_bytes(self) -> int:
        return _TIMESTAMP.size + self.frame_bytes

    def pack(self) -> bytes:
        return _GTS_HEADER.pack(GTS_MAGIC, self.version, self.width, self.height, self.count,
                                int(self.kind), self.pitch, self.frame_rate)

    @classmethod
    def unpack(cls, data: bytes, path: PathLike = "<bytes>") -> "GtsHeader":
        if len(data) < _GTS_HEADER.size:
            raise UnreadableInput(f"{path}: truncated header", path=str(path), reason="truncated header")
        magic, version, w, h, count, kind, pitch, rate = _GTS_HEADER.unpack(data[:_GTS_HEADER.size])
        if magic != GTS_MAGIC:
            raise UnreadableInput(f"{path}: not a .gts file (magic {magic!r})", path=str(path), reason="bad magic")
        if version != GTS_VERSION:
            raise UnreadableInput(f"{path}: unsupported .gts version {version}", path=str(path), reason="version")
        if kind not in (0, 1) or w == 0 or h == 0 or not (pitch > 0 and rate > 0):
            raise UnreadableInput(f"{path}: invalid header fields", path=str(path), reason="header")
        return cls(w, h, count, PayloadKind(kind), pitch, rate, version)

    @classmethod
    def for_spec(cls, spec: SensorSpec, kind: PayloadKind, count: int = 0) -> "GtsHeader":
        return cls(spec.width, spec.height, count, kind, spec.pitch, spec.frame_rate)

    def sensor(self, base: Optional[SensorSpec] = None) -> SensorSpec:
        """Sensor geometry from the header; non-geometric fields come from base."""
        base = base or SensorSpec()
        return SensorSpec(self.width, self.height, self.pitch, base.max_indentation, self.frame_rate)


def _check_payload(payload: np.ndarray, header: GtsHeader) -> np.ndarray:
    shape = (header.height, header.width, 3)
    if payload.shape != shape:
        raise ValueError(f"payload shape {payload.shape} does not match header {shape}")
    if header.kind is PayloadKind.NORMALS:
        out = np.ascontiguousarray(payload, dtype="<f4")
        norms = np.linalg.norm(out.astype(float), axis=-1)
        if np.any(np.abs(norms - 1.0) > UNIT_TOL):
            raise ValueError("normal payload is not unit length within 1e-3")
        return out
    if payload.dtype != np.uint8:
        raise ValueError(f"RGB payload must be uint8, got {payload.dtype}")
    return np.ascontiguousarray(payload)


class GtsWriter:
    '''
    GtsWriter: context manager writing frames one at a time

    Parameters:
    path (str | Path): output file
    header (GtsHeader): geometry and payload kind; its count is ignored and patched on close
    '''
    def __init__(self, path: PathLike, header: GtsHeader):
        self.path = Path(path)
        self.header = header
        self.count = 0
        self._fh: Optional[BinaryIO] = None

    def __enter__(self) -> "GtsWriter":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "wb")
        self._fh.write(GtsHeader(self.header.width, self.header.height, 0, self.header.kind,
                                 self.header.pitch, self.header.frame_rate).pack())
        return self

    def write(self, timestamp: float, payload: np.ndarray) -> None:
        data = _check_payload(np.asarray(payload), self.header)
        self._fh.write(_TIMESTAMP.pack(float(timestamp)))
        self._fh.write(data.tobytes(order="C"))
        self.count += 1

    def close(self) -> None:
        if self._fh is None:
            return
        self._fh.seek(_COUNT_OFFSET)
        self._fh.write(struct.pack("<I", self.count))
        self._fh.close()
        self._fh = None
        log.info("wrote %s (%d frames)", self.path, self.count)

    def __exit__(self, *exc) -> None:
        self.close()


class GtsReader:
    '''
    GtsReader: validated header + lazy frame access

    Parameters:
    path (str | Path): .gts file; the declared frame count must match the file length
    '''
    def __init__(self, path: PathLike):
        self.path = Path(path)
        try:
            self._data = self.path.read_bytes()
        except OSError as e:
            raise UnreadableInput(f"{path}: {e.strerror or e}", path=str(path), reason="io") from e
        self.header = GtsHeader.unpack(self._data, self.path)
        expected = _GTS_HEADER.size + self.header.count * self.header.record_bytes
        if len(self._data) != expected:
            raise UnreadableInput(f"{path}: header declares {self.header.count} frames "
                                  f"({expected} bytes) but the file has {len(self._data)} bytes",
                                  path=str(path), reason="frame count mismatch")

    def __len__(self) -> int:
        return self.header.count

    def frame(self, i: int) -> tuple[float, np.ndarray]:
        if not 0 <= i < len(self):
            raise IndexError(i)
        h = self.header
        start = _GTS_HEADER.size + i * h.record_bytes
        (t,) = _TIMESTAMP.unpack_from(self._data, start)
        payload = np.frombuffer(self._data, dtype=h.kind.dtype, count=h.height * h.width * 3,
                                offset=start + _TIMESTAMP.size).reshape(h.height, h.width, 3)
        return t, payload.copy()

    def __iter__(self) -> Iterator[tuple[float, np.ndarray]]:
        for i in range(len(self)):
            yield self.frame(i)


def write_gts(path: PathLike, header: GtsHeader, frames: Iterable[tuple[float, np.ndarray]]) -> Path:
    with GtsWriter(path, header) as w:
        for t, payload in frames:
            w.write(t, payload)
    return Path(path)


def read_gts(path: PathLike) -> tuple[GtsHeader, list[tuple[float, np.ndarray]]]:
    reader = GtsReader(path)
    return reader.header, list(reader)


def concat_gts(inputs: Sequence[PathLike], out: PathLike) -> GtsHeader:
    '''
    concat_gts(): merge sequences with identical geometry; frame k gets timestamp k / frame_rate

    Parameters:
    inputs (sequence of str | Path): .gts files in playback order
    out (str | Path): merged output
    '''
    if not inputs:
        raise ValueError("concat needs at least one input")
    readers = [GtsReader(p) for p in inputs]
    first = readers[0].header
    for r in readers[1:]:
        h = r.header
        if (h.width, h.height, h.kind, h.pitch, h.frame_rate) != (first.width, first.height, first.kind,
                                                                  first.pitch, first.frame_rate):
            raise UnreadableInput(f"{r.path}: geometry or payload kind differs from {readers[0].path}",
                                  path=str(r.path), reason="incompatible")

    def _frames():
        k = 0
        for r in readers:
            for _, payload in r:
                yield k / first.frame_rate, payload
                k += 1

    write_gts(out, first, _frames())
    return GtsReader(out).header


# ---------- Trajectories ----------

def write_trajectory(path: PathLike, poses: Mapping[int, TransformSE3], timestamps: Mapping[int, float],
                     comment: Optional[str] = None) -> Path:
    '''
    write_trajectory(): one line per frame id in ascending order (mm, unit quaternion xyzw)
    '''
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# frame_id timestamp tx ty tz qx qy qz qw"]
    if comment:
        lines.append(f"# {comment}")
    for f in sorted(poses):
        T = poses[f]
        vals = (*T.translation, *T.as_quaternion())
        lines.append(f"{f} {timestamps[f]:.17g} " + " ".join(f"{x:.17g}" for x in vals))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_trajectory(path: PathLike) -> tuple[dict[int, TransformSE3], dict[int, float]]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise UnreadableInput(f"{path}: {e.strerror or e}", path=str(path), reason="io") from e
    poses, stamps = {}, {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if len(tok) != 9:
                raise ValueError(f"expected 9 fields, got {len(tok)}")
            f = int(tok[0])
            vals = [float(x) for x in tok[1:]]
        except ValueError as e:
            raise UnreadableInput(f"{path}:{n}: {e}", path=str(path), reason="syntax") from e
        q = np.array(vals[4:8])
        if abs(np.linalg.norm(q) - 1.0) > 1e-6:
            raise UnreadableInput(f"{path}:{n}: quaternion is not unit length", path=str(path), reason="quaternion")
        poses[f] = TransformSE3.from_quaternion(vals[1:4], q)
        stamps[f] = vals[0]
    return poses, stamps


# ---------- Calibration net ----------

NET_MAGIC = b"TNET"
NET_VERSION = 1


def write_net(net: CalibrationNet, path: PathLike) -> Path:
    '''
    write_net(): 'TNET', u32 version, u32 n_sizes, u32 sizes[n], then per layer W (fan_in x fan_out, row-major)
    and b as little-endian float32
    '''
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sizes = net.layer_sizes
    with open(path, "wb") as fh:
        fh.write(NET_MAGIC)
        fh.write(struct.pack(f"<II{len(sizes)}I", NET_VERSION, len(sizes), *sizes))
        for w, b in zip(net.weights, net.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f4").tobytes())
    log.info("wrote calibration net %s (layers %s)", path, sizes)
    return path


def read_net(path: PathLike) -> CalibrationNet:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise UnreadableInput(f"{path}: {e.strerror or e}", path=str(path), reason="io") from e
    if data[:4] != NET_MAGIC or len(data) < 12:
        raise UnreadableInput(f"{path}: not a calibration net file", path=str(path), reason="bad magic")
    version, n = struct.unpack_from("<II", data, 4)
    if version != NET_VERSION:
        raise UnreadableInput(f"{path}: unsupported net version {version}", path=str(path), reason="version")
    offset = 12 + 4 * n
    if n < 2 or len(data) < offset:
        raise UnreadableInput(f"{path}: truncated layer table", path=str(path), reason="truncated")
    sizes = struct.unpack_from(f"<{n}I", data, 12)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        need = 4 * (fan_in * fan_out + fan_out)
        if len(data) < offset + need:
            raise UnreadableInput(f"{path}: truncated weights", path=str(path), reason="truncated")
        weights.append(np.frombuffer(data, "<f4", fan_in * fan_out, offset).reshape(fan_in, fan_out).astype(np.float32))
        offset += 4 * fan_in * fan_out
        biases.append(np.frombuffer(data, "<f4", fan_out, offset).astype(np.float32))
        offset += 4 * fan_out
    if offset != len(data):
        raise UnreadableInput(f"{path}: {len(data) - offset} trailing bytes", path=str(path), reason="trailing")
    return CalibrationNet(weights, biases)
