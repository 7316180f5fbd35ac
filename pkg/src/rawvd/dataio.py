"""File formats: 16-bit PGM/PPM frames, Middlebury .flo flows, dataset manifests.

Raw frames are stored as binary PGM ("P5", maxval 65535, big-endian); RGB
frames as binary PPM ("P6"). A dataset directory holds one ``dataset.json``
plus frame files; frames in the same subdirectory form one sequence (frames
directly under the root form the sequence ``"."``).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath

import numpy as np

from .frames import CfaPattern, RawFrame, RgbFrame, VideoSequence

FLO_MAGIC = b"PIEH"


def _read_pnm_header(f) -> tuple[bytes, int, int, int]:
    magic = f.read(2)
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"unsupported PNM magic {magic!r}")
    fields = []
    while len(fields) < 3:
        line = f.readline()
        if not line:
            raise ValueError("truncated PNM header")
        line = line.split(b"#", 1)[0]
        fields.extend(line.split())
    width, height, maxval = (int(v) for v in fields[:3])
    if width <= 0 or height <= 0:
        raise ValueError(f"invalid PNM dimensions {width}x{height}")
    if maxval not in (255, 65535):
        raise ValueError(f"unsupported PNM maxval {maxval}")
    return magic, width, height, maxval


def _read_pnm(path) -> tuple[np.ndarray, int]:
    with open(path, "rb") as f:
        magic, width, height, maxval = _read_pnm_header(f)
        channels = 1 if magic == b"P5" else 3
        dtype = np.dtype(">u2") if maxval == 65535 else np.dtype("u1")
        count = width * height * channels
        data = np.frombuffer(f.read(count * dtype.itemsize), dtype=dtype)
    if data.size != count:
        raise ValueError(f"truncated PNM payload in {path}")
    shape = (height, width) if channels == 1 else (height, width, 3)
    return data.reshape(shape).astype(np.uint16 if maxval == 65535 else np.uint8), maxval


def _write_pnm(path, codes: np.ndarray, magic: bytes, maxval: int) -> None:
    channels = 1 if magic == b"P5" else 3
    h, w = codes.shape[:2]
    dtype = np.dtype(">u2") if maxval == 65535 else np.dtype("u1")
    with open(path, "wb") as f:
        f.write(magic + b"\n%d %d\n%d\n" % (w, h, maxval))
        f.write(np.ascontiguousarray(codes.reshape(h, w * channels), dtype=dtype).tobytes())


def read_pgm16(path) -> np.ndarray:
    """Read a 16-bit grayscale PGM as a uint16 array."""
    codes, maxval = _read_pnm(path)
    if codes.ndim != 2:
        raise ValueError(f"{path} is not a grayscale PGM")
    if maxval != 65535:
        raise ValueError(f"{path}: expected 16-bit PGM, got maxval {maxval}")
    return codes


def write_pgm16(path, codes: np.ndarray) -> None:
    codes = np.asarray(codes)
    if codes.ndim != 2:
        raise ValueError(f"expected 2-D code grid, got shape {codes.shape}")
    _write_pnm(path, codes, b"P5", 65535)


def read_ppm(path) -> tuple[np.ndarray, int]:
    """Read a binary PPM; returns (array, maxval). 8- and 16-bit supported."""
    data, maxval = _read_pnm(path)
    if data.ndim != 3:
        raise ValueError(f"{path} is not a color PPM")
    return data, maxval


def write_ppm16(path, codes: np.ndarray) -> None:
    codes = np.asarray(codes)
    if codes.ndim != 3 or codes.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) code grid, got shape {codes.shape}")
    _write_pnm(path, codes, b"P6", 65535)


def write_ppm8(path, codes: np.ndarray) -> None:
    codes = np.asarray(codes)
    if codes.ndim != 3 or codes.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) code grid, got shape {codes.shape}")
    _write_pnm(path, codes, b"P6", 255)


def save_raw_frame(path, frame: RawFrame) -> None:
    """Write a raw frame as 16-bit PGM using the frame's black/white levels.

    Values are mapped through the level affine without clamping to [0, 1],
    so out-of-nominal-range noise survives as long as it fits the level
    headroom; codes are clipped to the 16-bit container.
    """
    span = frame.white_level - frame.black_level
    codes = np.rint(frame.data * span + frame.black_level)
    write_pgm16(path, np.clip(codes, 0, 65535).astype(np.uint16))


def load_raw_frame(path, cfa: CfaPattern, black_level: int,
                   white_level: int) -> RawFrame:
    """Inverse of :func:`save_raw_frame` (affine level map, no clamping)."""
    codes = read_pgm16(path).astype(np.float64)
    data = (codes - black_level) / (white_level - black_level)
    return RawFrame(data, cfa, black_level, white_level)


def save_rgb_frame(path, frame: RgbFrame) -> None:
    codes = np.rint(np.clip(frame.data, 0.0, 1.0) * 65535.0)
    write_ppm16(path, codes.astype(np.uint16))


def load_rgb_frame(path) -> RgbFrame:
    codes, maxval = read_ppm(path)
    return RgbFrame(codes.astype(np.float64) / maxval)


def read_flo(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a Middlebury .flo file; returns (u, v) float64 grids."""
    with open(path, "rb") as f:
        if f.read(4) != FLO_MAGIC:
            raise ValueError(f"{path} is not a .flo file")
        width, height = struct.unpack("<ii", f.read(8))
        data = np.frombuffer(f.read(width * height * 8), dtype="<f4")
    if data.size != width * height * 2:
        raise ValueError(f"truncated .flo payload in {path}")
    uv = data.reshape(height, width, 2)
    return uv[:, :, 0].astype(np.float64), uv[:, :, 1].astype(np.float64)


def write_flo(path, u: np.ndarray, v: np.ndarray) -> None:
    u = np.asarray(u, dtype=np.float32)
    v = np.asarray(v, dtype=np.float32)
    if u.shape != v.shape or u.ndim != 2:
        raise ValueError("u and v must be equal-shaped 2-D grids")
    h, w = u.shape
    with open(path, "wb") as f:
        f.write(FLO_MAGIC)
        f.write(struct.pack("<ii", w, h))
        f.write(np.ascontiguousarray(np.stack([u, v], axis=-1), dtype="<f4").tobytes())


def write_mask_pgm(path, mask: np.ndarray) -> None:
    """Write a binary mask as 8-bit PGM with values 0/255."""
    mask = np.asarray(mask)
    codes = np.where(mask != 0, 255, 0).astype(np.uint8)
    _write_pnm(path, codes, b"P5", 255)


def read_mask_pgm(path) -> np.ndarray:
    codes, _ = _read_pnm(path)
    if codes.ndim != 2:
        raise ValueError(f"{path} is not a grayscale PGM")
    return (codes > 127).astype(np.uint8)


@dataclass
class DatasetDescriptor:
    """Contents of ``dataset.json`` describing a raw dataset directory."""

    root: Path
    cfa: CfaPattern
    black_level: int
    white_level: int
    width: int
    height: int
    frame_rate: float
    frames: list[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "cfa": self.cfa.value,
            "black_level": self.black_level,
            "white_level": self.white_level,
            "width": self.width,
            "height": self.height,
            "frame_rate": self.frame_rate,
            "frames": list(self.frames),
        }

    def validate(self) -> None:
        """Check every listed frame exists and decodes to the declared size."""
        for rel in self.frames:
            path = self.root / rel
            if not path.is_file():
                raise FileNotFoundError(f"missing frame file: {path}")
            codes = read_pgm16(path)
            if codes.shape != (self.height, self.width):
                raise ValueError(
                    f"{path}: got {codes.shape[1]}x{codes.shape[0]}, "
                    f"declared {self.width}x{self.height}"
                )


def load_descriptor(root) -> DatasetDescriptor:
    root = Path(root)
    with open(root / "dataset.json") as f:
        d = json.load(f)
    return DatasetDescriptor(
        root=root,
        cfa=CfaPattern(d["cfa"]),
        black_level=int(d["black_level"]),
        white_level=int(d["white_level"]),
        width=int(d["width"]),
        height=int(d["height"]),
        frame_rate=float(d["frame_rate"]),
        frames=[str(p) for p in d["frames"]],
    )


def save_descriptor(desc: DatasetDescriptor) -> None:
    with open(desc.root / "dataset.json", "w") as f:
        json.dump(desc.to_json_dict(), f, indent=2)
        f.write("\n")


def sequence_id_of(rel_path: str) -> str:
    return str(PurePosixPath(rel_path).parent)


def load_dataset(root) -> list[VideoSequence]:
    """Load a raw dataset as sequences grouped by subdirectory.

    Sequences appear in first-listed order; frames keep their listed order.
    """
    desc = load_descriptor(root)
    groups: dict[str, list] = {}
    for rel in desc.frames:
        groups.setdefault(sequence_id_of(rel), []).append(rel)
    sequences = []
    for seq_id, rels in groups.items():
        frames = [
            load_raw_frame(desc.root / rel, desc.cfa, desc.black_level, desc.white_level)
            for rel in rels
        ]
        sequences.append(VideoSequence(frames, desc.frame_rate, seq_id))
    return sequences


def save_dataset(root, sequences: list[VideoSequence], *,
                 frame_name: str = "frame_{:05d}.pgm") -> DatasetDescriptor:
    """Write raw sequences plus ``dataset.json`` under ``root``."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    if not sequences or not all(len(s) for s in sequences):
        raise ValueError("cannot save an empty dataset")
    first = sequences[0].frames[0]
    rels = []
    for seq in sequences:
        seq_dir = root if seq.id in ("", ".") else root / seq.id
        seq_dir.mkdir(parents=True, exist_ok=True)
        for i, frame in enumerate(seq.frames):
            rel = frame_name.format(i) if seq.id in ("", ".") \
                else str(PurePosixPath(seq.id) / frame_name.format(i))
            save_raw_frame(root / rel, frame)
            rels.append(rel)
    desc = DatasetDescriptor(
        root=root,
        cfa=first.cfa,
        black_level=first.black_level,
        white_level=first.white_level,
        width=first.width,
        height=first.height,
        frame_rate=sequences[0].frame_rate,
        frames=rels,
    )
    save_descriptor(desc)
    return desc
