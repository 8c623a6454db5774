"""Network parameter files.

Layout (all integers little-endian)::

    b"SDFNET\\x00\\x01"   8-byte magic
    uint32              format version (1)
    uint32              header length in bytes
    JSON header         architecture + ordered [name, shape] list
    float32 data        every parameter, C order, in header order
"""

import json
import logging
import struct
from pathlib import Path

import numpy as np

from common.errors import FormatError
from field.layers import AffineLayer, FilmSirenLayer
from field.mapping import MAPPING_DEPTH, MappingNetwork
from field.network import FieldArchitecture, FieldNetwork

logger = logging.getLogger(__name__)

MAGIC = b"SDFNET\x00\x01"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sII")


def save_network(net, path):
    """Write ``net`` to ``path`` in the binary network format."""
    path = Path(path)
    params = net.parameters()
    header = {
        "architecture": {
            "z_dim": net.architecture.z_dim,
            "mapping_width": net.architecture.mapping_width,
            "width": net.architecture.width,
            "depth": net.architecture.depth,
            "feature_dim": net.architecture.feature_dim,
            "omega0": net.architecture.omega0,
            "leaky_slope": net.mapping.slope,
        },
        "parameters": [[name, list(array.shape)] for name, array in params.items()],
    }
    header_bytes = json.dumps(header).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as handle:
        handle.write(_PREFIX.pack(MAGIC, FORMAT_VERSION, len(header_bytes)))
        handle.write(header_bytes)
        for array in params.values():
            handle.write(np.ascontiguousarray(array, dtype="<f4").tobytes())
    logger.info("Saved network with %d parameter arrays to %s", len(params), path)


def load_network(path):
    """Read a network written by :func:`save_network`.

    Raises:
        FormatError: On a bad magic, unknown version, or truncated data.
        OSError: If the file cannot be read.
    """
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _PREFIX.size:
        raise FormatError(f"{path} is too short to be a network file")
    magic, version, header_len = _PREFIX.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError(f"{path} is not a network file (bad magic)")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path} has unsupported format version {version}")
    start = _PREFIX.size
    try:
        header = json.loads(blob[start:start + header_len].decode("utf-8"))
        arch_fields = dict(header["architecture"])
        slope = float(arch_fields.pop("leaky_slope"))
        arch = FieldArchitecture(**arch_fields)
        entries = [(str(name), tuple(int(d) for d in shape)) for name, shape in header["parameters"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{path} has an unreadable header: {exc}") from exc

    offset = start + header_len
    arrays = {}
    for name, shape in entries:
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + 4 * count
        if end > len(blob):
            raise FormatError(f"{path} is truncated inside parameter '{name}'")
        arrays[name] = np.frombuffer(blob, dtype="<f4", count=count, offset=offset).astype(np.float64).reshape(shape)
        offset = end
    if offset != len(blob):
        raise FormatError(f"{path} has {len(blob) - offset} trailing bytes")

    try:
        mapping = MappingNetwork(
            [AffineLayer(arrays[f"mapping.hidden.{i}.weight"], arrays[f"mapping.hidden.{i}.bias"]) for i in range(MAPPING_DEPTH)],
            AffineLayer(arrays["mapping.head.weight"], arrays["mapping.head.bias"]),
            arch.film_widths,
            slope,
        )
        trunk = [FilmSirenLayer(arrays[f"trunk.{i}.weight"], arrays[f"trunk.{i}.bias"]) for i in range(arch.depth)]
        net = FieldNetwork(
            arch,
            mapping,
            trunk,
            AffineLayer(arrays["sdf_head.weight"], arrays["sdf_head.bias"]),
            FilmSirenLayer(arrays["color_film.weight"], arrays["color_film.bias"]),
            AffineLayer(arrays["color_head.weight"], arrays["color_head.bias"]),
        )
    except KeyError as exc:
        raise FormatError(f"{path} is missing parameter {exc}") from exc
    logger.info("Loaded network (%d trunk layers, width %d) from %s", arch.depth, arch.width, path)
    return net
