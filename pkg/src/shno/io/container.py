"""Sectioned binary container for datasets, checkpoints and forecasts.

Layout (little-endian)::

    b"SHNC"  u32 version  u32 section_count  u64 body_length
    body: section_count x section
        u32 name_length  name (UTF-8)
        u8  dtype tag
        u32 rank  rank x u64 dims
        raw data, C order
    u32 CRC32 of every preceding byte

Text sections are stored with the ``str`` tag as UTF-8 bytes of rank 1.
"""

from __future__ import annotations

import logging
import struct
import zlib
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from enum import StrEnum
from pathlib import Path

import numpy as np

from shno.errors import (
    BadMagicError,
    ChecksumError,
    ContainerError,
    DuplicateSectionError,
    NonFiniteError,
    TruncatedFileError,
    UnknownDtypeError,
)
from shno.utils.paths import atomic_write_bytes

logger = logging.getLogger(__name__)

MAGIC = b"SHNC"
VERSION = 1
_HEADER = struct.Struct("<4sIIQ")
_CRC = struct.Struct("<I")

SectionValue = np.ndarray | str


class DType(StrEnum):
    F32 = "f32"
    F64 = "f64"
    C128 = "c128"
    U8 = "u8"
    STR = "str"


_TAGS: dict[DType, int] = {DType.F32: 1, DType.F64: 2, DType.C128: 3, DType.U8: 4, DType.STR: 5}
_BY_TAG = {tag: dtype for dtype, tag in _TAGS.items()}
_NUMPY: dict[DType, np.dtype] = {
    DType.F32: np.dtype("<f4"),
    DType.F64: np.dtype("<f8"),
    DType.C128: np.dtype("<c16"),
    DType.U8: np.dtype("u1"),
    DType.STR: np.dtype("u1"),
}


@dataclass(frozen=True)
class SectionInfo:
    name: str
    dtype: DType
    shape: tuple[int, ...]
    offset: int
    nbytes: int


def _dtype_of(name: str, value: np.ndarray) -> DType:
    kind = value.dtype
    if kind == np.float32:
        return DType.F32
    if kind == np.float64:
        return DType.F64
    if kind == np.complex128:
        return DType.C128
    if kind == np.uint8:
        return DType.U8
    raise UnknownDtypeError(f"section {name!r}: dtype {kind} has no container tag")


def _encode_section(name: str, value: SectionValue) -> bytes:
    if isinstance(value, str):
        dtype = DType.STR
        array = np.frombuffer(value.encode("utf-8"), dtype=np.uint8)
    else:
        array = np.asarray(value)
        dtype = _dtype_of(name, array)
        if dtype in (DType.F32, DType.F64, DType.C128) and not np.all(np.isfinite(array)):
            raise NonFiniteError(f"section {name!r} holds non-finite values", stage="container")
    raw_name = name.encode("utf-8")
    parts = [
        struct.pack("<I", len(raw_name)),
        raw_name,
        struct.pack("<BI", _TAGS[dtype], array.ndim),
        struct.pack(f"<{array.ndim}Q", *array.shape),
        np.ascontiguousarray(array, dtype=_NUMPY[dtype]).tobytes(),
    ]
    return b"".join(parts)


def encode_container(sections: Mapping[str, SectionValue] | Iterable[tuple[str, SectionValue]]) -> bytes:
    """Serialize sections in the given order; names must be unique."""
    items = list(sections.items()) if isinstance(sections, Mapping) else list(sections)
    seen: set[str] = set()
    for name, _ in items:
        if name in seen:
            raise DuplicateSectionError(f"section {name!r} appears twice")
        seen.add(name)
    body = b"".join(_encode_section(name, value) for name, value in items)
    head = _HEADER.pack(MAGIC, VERSION, len(items), len(body))
    payload = head + body
    return payload + _CRC.pack(zlib.crc32(payload))


def _verify(data: bytes) -> tuple[int, memoryview]:
    """Check magic, length and checksum; return the section count and the body."""
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise BadMagicError(f"not a shno container (magic {bytes(data[:4])!r})")
    if len(data) < _HEADER.size:
        raise TruncatedFileError(f"container header needs {_HEADER.size} bytes, file has {len(data)}")
    _, version, count, body_len = _HEADER.unpack_from(data)
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    expected = _HEADER.size + body_len + _CRC.size
    if len(data) < expected:
        raise TruncatedFileError(f"container declares {expected} bytes, file has {len(data)}")
    if len(data) > expected:
        raise ContainerError(f"{len(data) - expected} trailing bytes after the checksum")
    (stored,) = _CRC.unpack_from(data, expected - _CRC.size)
    actual = zlib.crc32(data[: expected - _CRC.size])
    if stored != actual:
        raise ChecksumError(f"CRC32 mismatch: stored {stored:#010x}, computed {actual:#010x}")
    return count, memoryview(data)[_HEADER.size : _HEADER.size + body_len]


def _index(count: int, body: memoryview) -> list[SectionInfo]:
    infos: list[SectionInfo] = []
    pos = 0

    def take(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(body):
            raise TruncatedFileError(f"section table runs past the end of the body at byte {pos}")
        chunk = body[pos : pos + n]
        pos += n
        return chunk

    names: set[str] = set()
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = bytes(take(name_len)).decode("utf-8")
        tag, rank = struct.unpack("<BI", take(5))
        if tag not in _BY_TAG:
            raise UnknownDtypeError(f"section {name!r}: unknown dtype tag {tag}")
        dtype = _BY_TAG[tag]
        shape = struct.unpack(f"<{rank}Q", take(8 * rank))
        nbytes = int(np.prod(shape, dtype=np.int64)) * _NUMPY[dtype].itemsize
        if name in names:
            raise DuplicateSectionError(f"section {name!r} appears twice")
        names.add(name)
        infos.append(SectionInfo(name, dtype, tuple(int(d) for d in shape), pos, nbytes))
        take(nbytes)
    if pos != len(body):
        raise ContainerError(f"{len(body) - pos} unaccounted bytes in the container body")
    return infos


def _decode(info: SectionInfo, body: memoryview) -> SectionValue:
    raw = body[info.offset : info.offset + info.nbytes]
    if info.dtype == DType.STR:
        return bytes(raw).decode("utf-8")
    array = np.frombuffer(raw, dtype=_NUMPY[info.dtype]).reshape(info.shape)
    return array.astype(array.dtype.newbyteorder("="), copy=True)


def decode_container(data: bytes, names: Iterable[str] | None = None) -> dict[str, SectionValue]:
    """Parse a container; with ``names`` only those sections are materialized."""
    count, body = _verify(data)
    infos = {info.name: info for info in _index(count, body)}
    wanted = list(infos) if names is None else list(names)
    missing = [n for n in wanted if n not in infos]
    if missing:
        raise KeyError(f"container has no section(s) {missing}; available: {sorted(infos)}")
    return {name: _decode(infos[name], body) for name in wanted}


def write_container(
    path: Path,
    sections: Mapping[str, SectionValue] | Iterable[tuple[str, SectionValue]],
) -> Path:
    """Write atomically (temporary file + rename)."""
    payload = encode_container(sections)
    atomic_write_bytes(path, payload)
    logger.debug(f"Wrote {len(payload)} bytes to {path}")
    return Path(path)


def _read_bytes(path: Path) -> bytes:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"container not found: {path}")
    return path.read_bytes()


def read_container(path: Path, names: Iterable[str] | None = None) -> dict[str, SectionValue]:
    return decode_container(_read_bytes(path), names)


def list_sections(path: Path) -> list[SectionInfo]:
    """Names, dtypes and shapes of every section, after verifying the checksum."""
    count, body = _verify(_read_bytes(path))
    return _index(count, body)
