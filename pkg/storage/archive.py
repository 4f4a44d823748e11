"""
Named-tensor archive.

Flat container file. Per entry, in order:
    name length   uint32 little-endian
    name          UTF-8 bytes
    rank          uint32 little-endian
    dims          uint64 little-endian, one per axis
    payload       float32 little-endian, row-major

There is no header or entry count; entries run to end of file. Saving casts
to float32, so float32 tensors round-trip bit-exactly.
"""

import os
import struct
from typing import Dict, Mapping

import numpy as np

from errors import IngestionError, OutputError

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_PAYLOAD = np.dtype("<f4")


def encode_archive(tensors: Mapping[str, np.ndarray]) -> bytes:
    """Serialise named tensors in insertion order."""
    chunks = []
    for name, tensor in tensors.items():
        raw_name = name.encode("utf-8")
        # asarray keeps rank-0 tensors rank 0
        array = np.asarray(tensor, dtype=_PAYLOAD)
        chunks.append(_U32.pack(len(raw_name)))
        chunks.append(raw_name)
        chunks.append(_U32.pack(array.ndim))
        chunks.extend(_U64.pack(dim) for dim in array.shape)
        chunks.append(array.tobytes(order="C"))
    return b"".join(chunks)


def decode_archive(blob: bytes, source: str = "<bytes>") -> Dict[str, np.ndarray]:
    """Parse archive bytes into an ordered name -> float32 tensor mapping."""
    tensors: Dict[str, np.ndarray] = {}
    view = memoryview(blob)
    offset = 0

    def take(n: int) -> memoryview:
        nonlocal offset
        if offset + n > len(view):
            raise IngestionError(f"{source}: archive truncated at byte {offset}")
        chunk = view[offset:offset + n]
        offset += n
        return chunk

    while offset < len(view):
        (name_len,) = _U32.unpack(take(_U32.size))
        try:
            name = bytes(take(name_len)).decode("utf-8")
        except UnicodeDecodeError as e:
            raise IngestionError(f"{source}: entry name is not UTF-8 ({e})")
        (rank,) = _U32.unpack(take(_U32.size))
        shape = tuple(_U64.unpack(take(_U64.size))[0] for _ in range(rank))
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        payload = take(count * _PAYLOAD.itemsize)
        if name in tensors:
            raise IngestionError(f"{source}: duplicate archive entry '{name}'")
        tensors[name] = np.frombuffer(payload, dtype=_PAYLOAD).reshape(shape).astype(np.float32)
    return tensors


def save_archive(path: str, tensors: Mapping[str, np.ndarray]) -> None:
    """Write an archive, creating parent directories."""
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "wb") as f:
            f.write(encode_archive(tensors))
    except OSError as e:
        raise OutputError(f"cannot write archive {path}: {e}")


def load_archive(path: str) -> Dict[str, np.ndarray]:
    """
    Read an archive from disk.

    Args:
        path: Archive file written by ``save_archive``

    Returns:
        Ordered name -> float32 tensor mapping

    Raises:
        IngestionError: unreadable, truncated or malformed file
    """
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise IngestionError(f"cannot read archive {path}: {e}")
    return decode_archive(blob, source=path)
