"""Image tensors and their two on-disk forms: raw float32 tensors and 8-bit PPM/PGM."""

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from core.exceptions import InvalidInput

RAW_VERSION = 1
PPM_SUFFIXES = ('.ppm', '.pgm', '.pnm')
_HEADER_LEN = struct.Struct('<I')


@dataclass(frozen=True, eq=False)
class ImageTensor:
    """H x W x C pixels; decoded images lie in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.array(self.pixels, dtype=float)
        if pixels.ndim != 3:
            raise InvalidInput(f"image must have shape (H, W, C), got {pixels.shape}")
        if not np.isfinite(pixels).all():
            raise InvalidInput("image contains non-finite values")
        pixels.setflags(write=False)
        object.__setattr__(self, 'pixels', pixels)

    @property
    def shape(self):
        return self.pixels.shape


def write_raw(image, path, seed=None, **extra):
    """Lossless float32 storage: <u32 header length><JSON header><little-endian float32 data>."""
    header = {'shape': list(image.shape), 'seed': seed, 'version': RAW_VERSION, **extra}
    blob = json.dumps(header, sort_keys=True).encode('utf-8')
    data = np.ascontiguousarray(image.pixels, dtype='<f4').tobytes()
    path = Path(path)
    path.write_bytes(_HEADER_LEN.pack(len(blob)) + blob + data)
    return path


def read_raw(path):
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise InvalidInput(f"cannot read image {path}: {e}") from e

    if len(raw) < _HEADER_LEN.size:
        raise InvalidInput(f"{path} is too short to be a raw image")
    (size,) = _HEADER_LEN.unpack_from(raw)
    start = _HEADER_LEN.size
    try:
        header = json.loads(raw[start:start + size].decode('utf-8'))
        shape = tuple(int(d) for d in header['shape'])
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as e:
        raise InvalidInput(f"{path} has a malformed header") from e
    if header.get('version') != RAW_VERSION:
        raise InvalidInput(f"{path} has unsupported version {header.get('version')!r}")

    data = raw[start + size:]
    expected = int(np.prod(shape)) * 4
    if len(data) != expected:
        raise InvalidInput(f"{path} is truncated: {len(data)} data bytes, expected {expected}")
    pixels = np.frombuffer(data, dtype='<f4').astype(float).reshape(shape)
    return ImageTensor(pixels), header


def write_ppm(image, path):
    """8-bit interchange copy (PGM when the image has one channel)."""
    levels = np.clip(np.rint(image.pixels * 255.0), 0, 255).astype(np.uint8)
    if levels.shape[2] == 1:
        levels = levels[:, :, 0]
    elif levels.shape[2] != 3:
        raise InvalidInput("PPM/PGM holds 1 or 3 channels")
    Image.fromarray(levels).save(path, format='PPM')
    return Path(path)


def read_ppm(path):
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode not in ('L', 'RGB'):
                img = img.convert('RGB')
            levels = np.asarray(img, dtype=float)
    except (OSError, ValueError, SyntaxError, UnidentifiedImageError) as e:
        raise InvalidInput(f"cannot read image {path}: {e}") from e
    if levels.ndim == 2:
        levels = levels[:, :, None]
    return ImageTensor(levels / 255.0)


def write_image(image, path, seed=None, **extra):
    if Path(path).suffix.lower() in PPM_SUFFIXES:
        return write_ppm(image, path)
    return write_raw(image, path, seed=seed, **extra)


def read_image(path):
    """Returns (image, header); PPM/PGM files have an empty header."""
    if Path(path).suffix.lower() in PPM_SUFFIXES:
        return read_ppm(path), {}
    return read_raw(path)
