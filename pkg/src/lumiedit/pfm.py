"""Portable FloatMap reader/writer.

PFM stores raw IEEE-754 float32 scanlines. Header: "PF" for 3-channel color,
"Pf" for grayscale, then width/height, then a scale whose sign encodes byte
order (negative = little-endian). Scanlines run bottom-to-top.
"""

import numpy as np


def read_pfm(path) -> np.ndarray:
    """Load a PFM file as float32, shape (h, w) or (h, w, 3), top row first."""
    with open(path, "rb") as f:
        header = f.readline().rstrip()
        if header == b"PF":
            channels = 3
        elif header == b"Pf":
            channels = 1
        else:
            raise ValueError(f"not a PFM file: bad magic {header!r}")

        dims = f.readline()
        # some writers put comments between header tokens; tolerate blank/comment lines
        while dims.startswith(b"#"):
            dims = f.readline()
        try:
            width, height = map(int, dims.split())
        except ValueError:
            raise ValueError(f"malformed PFM dimensions line {dims!r}")

        scale = float(f.readline().rstrip())
        if scale == 0:
            raise ValueError("PFM scale must be nonzero")
        endian = "<" if scale < 0 else ">"

        count = width * height * channels
        data = np.frombuffer(f.read(count * 4), dtype=endian + "f4")
        if data.size != count:
            raise ValueError(f"PFM payload truncated: expected {count} floats, got {data.size}")

    shape = (height, width, 3) if channels == 3 else (height, width)
    img = data.reshape(shape)
    # stored bottom-to-top
    img = np.ascontiguousarray(img[::-1])
    if abs(scale) != 1.0:
        img = img * abs(scale)
    return img.astype(np.float32, copy=False)


def encode_pfm(img: np.ndarray) -> bytes:
    """Encode float32 data (h, w) or (h, w, 1|3) as little-endian PFM bytes."""
    img = np.asarray(img)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim == 2:
        magic = b"Pf"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"PF"
    else:
        raise ValueError(f"unsupported raster shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("refusing to write non-finite values to PFM")

    h, w = img.shape[:2]
    payload = np.ascontiguousarray(img[::-1], dtype="<f4")
    return magic + b"\n" + f"{w} {h}\n".encode() + b"-1.0\n" + payload.tobytes()


def write_pfm(path, img: np.ndarray) -> None:
    """Write float32 data (h, w) or (h, w, 1|3) as little-endian PFM."""
    data = encode_pfm(img)
    with open(path, "wb") as f:
        f.write(data)
