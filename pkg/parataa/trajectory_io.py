"""Binary trajectory files

Layout (little-endian): magic b"PTAA", version u32, T u32, d u32,
schedule fingerprint u64, seed u64, then x_0..x_T and xi_0..xi_T as float64.
"""
import hashlib
import struct
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import TrajectoryFileError
from .schedule import CoefficientTable
from .triangular import TrajectoryState, state_from

MAGIC = b"PTAA"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sIIIQQ")


def schedule_fingerprint(coeffs: CoefficientTable) -> int:
    digest = hashlib.blake2b(digest_size=8)
    digest.update(struct.pack("<I", coeffs.T))
    digest.update(np.asarray(coeffs.schedule.betas, dtype="<f8").tobytes())
    digest.update(struct.pack("<d", coeffs.eta))
    return int.from_bytes(digest.digest(), "little")


def save_trajectory(state: TrajectoryState, coeffs: CoefficientTable, path) -> None:
    seed = state.seed if state.seed is not None else 0
    header = HEADER.pack(MAGIC, FORMAT_VERSION, state.T, state.d,
                         schedule_fingerprint(coeffs), seed & 0xFFFFFFFFFFFFFFFF)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(state.x, dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(state.xi, dtype="<f8").tobytes())


def load_trajectory(path, coeffs: Optional[CoefficientTable] = None) -> TrajectoryState:
    """Read a trajectory; with ``coeffs`` the stored schedule fingerprint must match."""
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise TrajectoryFileError(f"cannot read {path}: {e}", "path") from e
    if len(data) < HEADER.size:
        raise TrajectoryFileError(
            f"truncated: {len(data)} bytes, header needs {HEADER.size}", "header")
    magic, version, T, d, fingerprint, seed = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise TrajectoryFileError(f"expected {MAGIC!r}, found {magic!r}", "magic")
    if version != FORMAT_VERSION:
        raise TrajectoryFileError(
            f"unsupported format version {version} (expected {FORMAT_VERSION})", "version")
    if coeffs is not None and fingerprint != schedule_fingerprint(coeffs):
        raise TrajectoryFileError(
            f"schedule fingerprint {fingerprint:#018x} does not match the run "
            f"({schedule_fingerprint(coeffs):#018x}, T={coeffs.T}, eta={coeffs.eta})",
            "fingerprint")

    block = (T + 1) * d * 8
    offset = HEADER.size
    arrays = []
    for name in ("x", "xi"):
        if len(data) < offset + block:
            raise TrajectoryFileError(
                f"truncated: {len(data) - offset} of {block} bytes present", name)
        arrays.append(np.frombuffer(data, dtype="<f8", count=(T + 1) * d,
                                    offset=offset).reshape(T + 1, d).astype(np.float64))
        offset += block
    if len(data) != offset:
        raise TrajectoryFileError(f"{len(data) - offset} unexpected trailing bytes", "length")
    return state_from(arrays[0], arrays[1], seed=seed)
