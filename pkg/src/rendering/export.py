"""Writing render buffers to disk: PNG previews, PFM floats and raw feature maps."""

import json
import logging
from pathlib import Path

import matplotlib.image as mpimg
import numpy as np

from common.errors import FormatError

logger = logging.getLogger(__name__)


def to_uint8(image):
    """Quantise values in ``[0, 1]`` to 8 bits with rounding."""
    return np.rint(np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def write_png(path, image):
    """Save a ``(H, W)`` or ``(H, W, 3)`` image in ``[0, 1]`` as an 8-bit PNG."""
    data = to_uint8(image)
    if data.ndim == 2:
        data = np.repeat(data[..., None], 3, axis=-1)
    mpimg.imsave(str(path), data)


def write_pfm(path, image):
    """Save a float image as little-endian PFM (``Pf`` greyscale or ``PF`` colour)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        kind = b"Pf"
    elif image.ndim == 3 and image.shape[2] == 3:
        kind = b"PF"
    else:
        raise FormatError(f"PFM needs an (H, W) or (H, W, 3) image, got {image.shape}")
    height, width = image.shape[:2]
    with open(path, "wb") as handle:
        handle.write(kind + b"\n")
        handle.write(f"{width} {height}\n".encode("ascii"))
        handle.write(b"-1.0\n")
        handle.write(np.ascontiguousarray(image[::-1], dtype="<f4").tobytes())


def read_pfm(path):
    """Read a PFM file written by :func:`write_pfm` (either endianness)."""
    with open(path, "rb") as handle:
        kind = handle.readline().strip()
        if kind not in (b"PF", b"Pf"):
            raise FormatError(f"{path} is not a PFM file")
        try:
            width, height = (int(v) for v in handle.readline().split())
            scale = float(handle.readline())
        except ValueError as exc:
            raise FormatError(f"{path} has a malformed PFM header") from exc
        dtype = "<f4" if scale < 0 else ">f4"
        channels = 3 if kind == b"PF" else 1
        data = np.frombuffer(handle.read(), dtype=dtype)
    if data.size != width * height * channels:
        raise FormatError(f"{path} holds {data.size} values, expected {width * height * channels}")
    shape = (height, width, 3) if channels == 3 else (height, width)
    return data.reshape(shape)[::-1].astype(np.float32)


def depth_to_gray(depth, valid, near, far):
    """Normalise depth to ``[0, 1]`` between ``near`` (white) and ``far`` (black).

    Invalid pixels are black.
    """
    span = max(far - near, 1e-12)
    gray = 1.0 - np.clip((np.asarray(depth) - near) / span, 0.0, 1.0)
    return np.where(valid, gray, 0.0)


def write_features(directory, feature, stem="features"):
    """Write a feature map as raw little-endian float32 plus a JSON shape sidecar."""
    directory = Path(directory)
    feature = np.asarray(feature)
    bin_path = directory / f"{stem}.bin"
    bin_path.write_bytes(np.ascontiguousarray(feature, dtype="<f4").tobytes())
    meta = {"dtype": "float32", "byte_order": "little", "shape": list(feature.shape), "layout": "HWC"}
    (directory / f"{stem}.json").write_text(json.dumps(meta, indent=2))
    return bin_path


def read_features(directory, stem="features"):
    directory = Path(directory)
    meta = json.loads((directory / f"{stem}.json").read_text())
    data = np.frombuffer((directory / f"{stem}.bin").read_bytes(), dtype="<f4")
    return data.reshape(meta["shape"])


def export_buffers(buffers, directory, depth_near, depth_far):
    """Write every buffer of a render into ``directory``.

    Returns:
        List of the file names written.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    depth = np.where(buffers.valid, buffers.depth, 0.0)
    write_png(directory / "color.png", buffers.color)
    write_pfm(directory / "color.pfm", buffers.color)
    write_png(directory / "opacity.png", buffers.opacity)
    write_pfm(directory / "opacity.pfm", buffers.opacity)
    write_pfm(directory / "depth.pfm", depth)
    write_png(directory / "depth.png", depth_to_gray(buffers.depth, buffers.valid, depth_near, depth_far))
    written = ["color.png", "color.pfm", "opacity.png", "opacity.pfm", "depth.pfm", "depth.png"]
    if buffers.feature.shape[-1] > 0:
        write_features(directory, buffers.feature)
        written += ["features.bin", "features.json"]
    logger.info("Saved %d render buffers to %s", len(written), directory)
    return written
