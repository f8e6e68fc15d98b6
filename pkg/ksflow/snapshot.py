# Copyright (C) 2025-2026 The ksflow developers
#
# This file is part of ksflow
#
# It is subject to the license terms in the LICENSE file found in the top-level
# directory of this distribution.
#
# No part of ksflow, including this file, may be copied, modified,
# propagated, or distributed except according to the terms contained in the
# LICENSE file.

import logging
import struct
from typing import Dict, Optional, Tuple

import numpy as np

from ksflow.constants import (
    SNAPSHOT_FORMAT_VERSION,
    SNAPSHOT_LAYOUT_GENERAL,
    SNAPSHOT_LAYOUT_SYMMETRIC,
    SNAPSHOT_MAGIC,
)
from ksflow.errors import IntegrityError
from ksflow.grid import Grid
from ksflow.operators import FiniteRankOperator
from ksflow.utils import format_float, sha256_hex

logger = logging.getLogger(__name__)

MANIFEST_KEYS = (
    "format_version",
    "grid",
    "rank",
    "time",
    "seed",
    "config_hash",
    "layout",
    "self_adjoint",
    "nonneg",
    "checksum",
)

# little-endian complex pair of 64-bit floats
COMPLEX_FORMAT = "<dd"
COMPLEX_SIZE = struct.calcsize(COMPLEX_FORMAT)


def _orbitals_per_term(layout: str) -> int:
    if layout == SNAPSHOT_LAYOUT_SYMMETRIC:
        return 1
    if layout == SNAPSHOT_LAYOUT_GENERAL:
        return 2
    raise IntegrityError(f"unknown payload layout {layout!r}")


def payload_length(grid: Grid, rank: int, layout: str = SNAPSHOT_LAYOUT_SYMMETRIC) -> int:
    """rank x (2 + 2 n^d) x 8 bytes for one orbital per term."""
    points = grid.n**grid.d
    return rank * (2 + 2 * _orbitals_per_term(layout) * points) * 8


class SnapshotFile:
    """Operator snapshot: text manifest followed by a binary payload.

    The payload stores each term as its coefficient followed by its
    orbital(s), every value a little-endian (re, im) pair of 64-bit floats,
    orbitals in row-major grid order. The symmetric layout stores one
    orbital per term (l = r), the general layout the left then the right
    orbital.

    Attributes
    ----------
    manifest : dict
        key -> text value, rendered in MANIFEST_KEYS order
    payload : bytes
        the raw terms
    """

    def __init__(self, manifest: Dict[str, str], payload: bytes) -> None:
        self.manifest = dict(manifest)
        self.payload = bytes(payload)

    @classmethod
    def from_operator(
        cls, kappa: FiniteRankOperator, t: float, seed: Optional[int] = None, config_hash: str = ""
    ) -> "SnapshotFile":
        symmetric = kappa.has_symmetric_terms()
        layout = SNAPSHOT_LAYOUT_SYMMETRIC if symmetric else SNAPSHOT_LAYOUT_GENERAL
        chunks = []
        for i in range(kappa.rank):
            c = kappa.coeffs[i]
            chunks.append(struct.pack(COMPLEX_FORMAT, c.real, c.imag))
            chunks.append(np.ascontiguousarray(kappa.left[i]).astype("<c16").tobytes())
            if not symmetric:
                chunks.append(np.ascontiguousarray(kappa.right[i]).astype("<c16").tobytes())
        payload = b"".join(chunks)
        manifest = {
            "format_version": str(SNAPSHOT_FORMAT_VERSION),
            "grid": kappa.grid.descriptor(),
            "rank": str(kappa.rank),
            "time": format_float(t),
            "seed": "" if seed is None else str(int(seed)),
            "config_hash": config_hash,
            "layout": layout,
            "self_adjoint": str(kappa.self_adjoint).lower(),
            "nonneg": str(kappa.nonneg).lower(),
            "checksum": sha256_hex(payload),
        }
        return cls(manifest, payload)

    @classmethod
    def from_bytes(cls, data: bytes) -> "SnapshotFile":
        """Parses and validates a snapshot.

        Raises
        ------
        IntegrityError
            on a bad magic, malformed manifest, wrong payload length or
            checksum mismatch
        """
        if not data.startswith(SNAPSHOT_MAGIC):
            raise IntegrityError("not a ksflow snapshot (bad magic)")
        end = data.find(b"\n\n", len(SNAPSHOT_MAGIC) - 1)
        if end < 0:
            raise IntegrityError("snapshot manifest is not terminated")
        header = data[len(SNAPSHOT_MAGIC) : end + 1].decode("ascii", errors="replace")
        payload = data[end + 2 :]

        manifest = {}
        for line in header.splitlines():
            if not line.strip():
                continue
            key, sep, value = line.partition(" = ")
            if not sep:
                raise IntegrityError(f"malformed manifest line {line!r}")
            manifest[key] = value
        missing = [key for key in MANIFEST_KEYS if key not in manifest]
        if missing:
            raise IntegrityError(f"manifest misses {missing}")
        if manifest["format_version"] != str(SNAPSHOT_FORMAT_VERSION):
            raise IntegrityError(f"unsupported format version {manifest['format_version']}")

        snapshot = cls(manifest, payload)
        try:
            grid, rank = snapshot.grid, snapshot.rank
        except ValueError as err:
            raise IntegrityError(f"malformed manifest: {err}")
        expected = payload_length(grid, rank, manifest["layout"])
        if len(payload) != expected:
            raise IntegrityError(f"payload has {len(payload)} bytes, expected {expected}")
        checksum = sha256_hex(payload)
        if checksum != manifest["checksum"]:
            raise IntegrityError(
                f"checksum mismatch: manifest {manifest['checksum']}, payload {checksum}"
            )
        return snapshot

    @property
    def grid(self) -> Grid:
        return Grid.from_descriptor(self.manifest["grid"])

    @property
    def rank(self) -> int:
        return int(self.manifest["rank"])

    @property
    def time(self) -> float:
        return float(self.manifest["time"])

    @property
    def seed(self) -> Optional[int]:
        value = self.manifest.get("seed", "")
        return int(value) if value else None

    def to_bytes(self) -> bytes:
        lines = "".join(f"{key} = {self.manifest[key]}\n" for key in MANIFEST_KEYS)
        return SNAPSHOT_MAGIC + lines.encode("ascii") + b"\n" + self.payload

    def to_operator(self) -> FiniteRankOperator:
        grid, rank = self.grid, self.rank
        per_term = _orbitals_per_term(self.manifest["layout"])
        points = grid.n**grid.d
        values = np.frombuffer(self.payload, dtype="<c16").reshape(rank, 1 + per_term * points)
        coeffs = values[:, 0]
        left = values[:, 1 : 1 + points].reshape((rank,) + grid.shape)
        right = left if per_term == 1 else values[:, 1 + points :].reshape((rank,) + grid.shape)
        return FiniteRankOperator(
            grid,
            coeffs,
            left,
            right,
            self_adjoint=self.manifest["self_adjoint"] == "true",
            nonneg=self.manifest["nonneg"] == "true",
        )

    def __str__(self) -> str:
        return str(self.manifest)

    def __repr__(self) -> str:
        return self.__str__()


def write_snapshot(
    path: str, kappa: FiniteRankOperator, t: float, seed: Optional[int] = None, config_hash: str = ""
) -> SnapshotFile:
    snapshot = SnapshotFile.from_operator(kappa, t, seed, config_hash)
    with open(path, "wb") as handle:
        handle.write(snapshot.to_bytes())
    logger.debug("snapshot t=%s written to %s", snapshot.manifest["time"], path)
    return snapshot


def read_snapshot(path: str) -> Tuple[FiniteRankOperator, SnapshotFile]:
    with open(path, "rb") as handle:
        snapshot = SnapshotFile.from_bytes(handle.read())
    return snapshot.to_operator(), snapshot
