"""Binary checkpoint container: named float64 arrays behind a magic header.

Layout (little-endian): 8-byte magic "GAITEVO1", uint32 array count, then
per array a uint16 name length, the UTF-8 name, a uint8 rank, uint64
dimensions, and the raw float64 data in C order.  Round-trips are bitwise
exact.  Generator states are packed into float64 words (each holding one
32-bit chunk) so they live in the same container.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"GAITEVO1"


class CheckpointError(RuntimeError):
    pass


def save_arrays(path: str | Path, arrays: dict[str, np.ndarray]) -> None:
    path = Path(path)
    chunks: list[bytes] = [MAGIC, struct.pack("<I", len(arrays))]
    for name, arr in arrays.items():
        data = np.ascontiguousarray(arr, dtype="<f8")
        name_b = name.encode("utf-8")
        if len(name_b) > 0xFFFF:
            raise CheckpointError(f"array name too long: {name!r}")
        chunks.append(struct.pack("<H", len(name_b)))
        chunks.append(name_b)
        chunks.append(struct.pack("<B", data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}Q", *data.shape))
        chunks.append(data.tobytes())
    path.write_bytes(b"".join(chunks))


def load_arrays(path: str | Path) -> dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"not a checkpoint (bad magic {raw[:8]!r})")
    at = 8
    (count,) = struct.unpack_from("<I", raw, at)
    at += 4
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", raw, at)
        at += 2
        name = raw[at:at + nlen].decode("utf-8")
        at += nlen
        (ndim,) = struct.unpack_from("<B", raw, at)
        at += 1
        shape = struct.unpack_from(f"<{ndim}Q", raw, at)
        at += 8 * ndim
        n = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(raw, dtype="<f8", count=n, offset=at).reshape(shape)
        at += 8 * n
        out[name] = arr.copy()
    if at != len(raw):
        raise CheckpointError("trailing bytes after last array")
    return out


def encode_rng(gen: np.random.Generator) -> np.ndarray:
    """PCG64 state as ten float64 words (4+4 state/inc chunks + extras)."""
    st = gen.bit_generator.state
    if st["bit_generator"] != "PCG64":
        raise CheckpointError("only PCG64 generators are checkpointed")
    words = []
    for key in ("state", "inc"):
        v = st["state"][key]
        for _ in range(4):
            words.append(float(v & 0xFFFFFFFF))
            v >>= 32
    words.append(float(st["has_uint32"]))
    words.append(float(st["uinteger"]))
    return np.asarray(words)


def decode_rng(words: np.ndarray) -> np.random.Generator:
    words = [int(w) for w in np.asarray(words).ravel()]
    if len(words) != 10:
        raise CheckpointError("rng state must be 10 words")

    def join(ws):
        v = 0
        for i, w in enumerate(ws):
            v |= w << (32 * i)
        return v

    gen = np.random.Generator(np.random.PCG64())
    gen.bit_generator.state = {
        "bit_generator": "PCG64",
        "state": {"state": join(words[0:4]), "inc": join(words[4:8])},
        "has_uint32": words[8],
        "uinteger": words[9],
    }
    return gen
