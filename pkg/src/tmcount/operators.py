"""Block-tridiagonal operator systems.

A system holds the coefficient blocks of the three-term recursion

    C_k u_{k-1} + A_k u_k + B_k u_{k+1} = E u_k,

with n blocks of size m x m each.  Systems are immutable; every
operation in this package treats them as read-only input.  Validation
returns a report instead of raising, so callers can collect all
problems of an ingested file at once.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import lapack

#: reciprocal-condition threshold below which a coupling block is
#: reported as numerically singular
RCOND_THRESHOLD = 1e-12


class ValidationError(ValueError):
    """A system (or system file) failed structural validation."""


def _freeze(block: np.ndarray) -> np.ndarray:
    out = np.array(block, dtype=complex, order="C")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class BlockTridiagonalSystem:
    """Coefficient blocks of a length-n, width-m three-term recursion.

    Attributes
    ----------
    m, n : int
        Declared block size and number of blocks.
    A, B, C : tuple of ndarray
        Diagonal, forward and backward coupling blocks.  ``C[0]`` and
        ``B[n-1]`` are the ring-closure blocks that only enter the
        periodic operators, never the open-chain recursion itself.
    """

    m: int
    n: int
    A: tuple
    B: tuple
    C: tuple

    def __post_init__(self):
        object.__setattr__(self, "A", tuple(_freeze(a) for a in self.A))
        object.__setattr__(self, "B", tuple(_freeze(b) for b in self.B))
        object.__setattr__(self, "C", tuple(_freeze(c) for c in self.C))

    @classmethod
    def from_blocks(cls, A: Sequence, B: Sequence, C: Sequence) -> "BlockTridiagonalSystem":
        """Build a system, inferring m and n from the first A block."""
        A = [np.atleast_2d(np.asarray(a, dtype=complex)) for a in A]
        B = [np.atleast_2d(np.asarray(b, dtype=complex)) for b in B]
        C = [np.atleast_2d(np.asarray(c, dtype=complex)) for c in C]
        if not A:
            raise ValidationError("system needs at least one diagonal block")
        return cls(m=A[0].shape[0], n=len(A), A=tuple(A), B=tuple(B), C=tuple(C))


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of validate_system; empty issues means the system is usable."""

    issues: tuple

    @property
    def ok(self) -> bool:
        return not self.issues

    def raise_if_failed(self):
        if self.issues:
            raise ValidationError("; ".join(self.issues))


def _block_rcond(block: np.ndarray) -> float:
    """LU-based reciprocal condition estimate in the 1-norm."""
    anorm = np.linalg.norm(block, 1)
    if anorm == 0.0 or not np.isfinite(anorm):
        return 0.0
    lu, piv, info = lapack.zgetrf(block)
    if info > 0:
        return 0.0
    rcond, _ = lapack.zgecon(lu, anorm, norm="1")
    return float(rcond)


def validate_system(sys: BlockTridiagonalSystem,
                    rcond_threshold: float = RCOND_THRESHOLD) -> ValidationReport:
    """Check shapes, finiteness and coupling-block invertibility.

    Returns a report listing every problem found.  A system is accepted
    by the rest of the package exactly when the report is empty.
    """
    issues = []
    m, n = sys.m, sys.n
    if n < 3:
        issues.append(f"n must be at least 3, got {n}")
    if m < 1:
        issues.append(f"m must be at least 1, got {m}")
    for name, blocks in (("A", sys.A), ("B", sys.B), ("C", sys.C)):
        if len(blocks) != n:
            issues.append(f"{name} has {len(blocks)} blocks, expected {n}")
        for k, blk in enumerate(blocks):
            if blk.shape != (m, m):
                issues.append(f"{name}[{k}] has shape {blk.shape}, expected ({m}, {m})")
                continue
            if not np.all(np.isfinite(blk)):
                issues.append(f"{name}[{k}] contains non-finite entries")
    if not issues:
        for name, blocks in (("B", sys.B), ("C", sys.C)):
            for k, blk in enumerate(blocks):
                rc = _block_rcond(blk)
                if rc < rcond_threshold:
                    issues.append(
                        f"{name}[{k}] is numerically singular (rcond {rc:.2e})")
    return ValidationReport(issues=tuple(issues))


@dataclass(frozen=True)
class HermitianTag:
    """Whether a system defines a Hermitian ring operator."""

    is_hermitian: bool

    def __bool__(self) -> bool:
        return self.is_hermitian


def hermitian_check(sys: BlockTridiagonalSystem, tol: float = 1e-10) -> HermitianTag:
    """Tag the system Hermitian or not, entrywise within tol.

    Requires A_k Hermitian, each backward block the adjoint of the
    previous forward block, and the ring-closure block C_1 equal to the
    adjoint of B_n; that closure is what makes the unit-weight ring
    operator Hermitian.
    """
    def _same(x, y):
        return np.max(np.abs(x - y)) <= tol

    ok = all(_same(a, a.conj().T) for a in sys.A)
    ok = ok and all(_same(sys.C[k], sys.B[k - 1].conj().T)
                    for k in range(1, sys.n))
    ok = ok and _same(sys.C[0], sys.B[sys.n - 1].conj().T)
    return HermitianTag(is_hermitian=bool(ok))


# ---------------------------------------------------------------------------
# JSON serialization
#
# Schema: {"m": int, "n": int, "A": [block, ...], "B": [...], "C": [...]}
# where each block is an m x m row-major array of [re, im] pairs.  An
# optional "meta" object carries provenance (used by the disorder
# generator) and is ignored on load.
# ---------------------------------------------------------------------------

def _block_to_json(block: np.ndarray):
    return [[[float(x.real), float(x.imag)] for x in row] for row in block]


def _block_from_json(entry, m: int, ctx: str, issues: list) -> np.ndarray:
    arr = np.zeros((m, m), dtype=complex)
    if not isinstance(entry, list) or len(entry) != m:
        issues.append(f"{ctx}: expected {m} rows")
        return arr
    for i, row in enumerate(entry):
        if not isinstance(row, list) or len(row) != m:
            issues.append(f"{ctx} row {i}: expected {m} entries")
            return arr
        for j, pair in enumerate(row):
            if (not isinstance(pair, list) or len(pair) != 2
                    or not all(isinstance(v, (int, float)) for v in pair)):
                issues.append(f"{ctx} entry ({i},{j}): expected [re, im]")
                return arr
            arr[i, j] = complex(pair[0], pair[1])
    return arr


def save_system(sys: BlockTridiagonalSystem, path, meta: dict | None = None):
    """Write a system to a JSON file in the documented schema.

    The float representation round-trips bit exactly through
    load_system.  ``meta`` is stored verbatim under the "meta" key.
    """
    doc = {
        "m": sys.m,
        "n": sys.n,
        "A": [_block_to_json(a) for a in sys.A],
        "B": [_block_to_json(b) for b in sys.B],
        "C": [_block_to_json(c) for c in sys.C],
    }
    if meta is not None:
        doc["meta"] = meta
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _reject_constant(_):
    raise ValidationError("non-finite numbers are not allowed in system files")


def load_system(path) -> BlockTridiagonalSystem:
    """Read a system file, validating schema and contents.

    Raises ValidationError with a description of every problem found,
    including the offending block indices.
    """
    try:
        with open(path) as fh:
            doc = json.load(fh, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: top level must be an object")
    issues: list = []
    m = doc.get("m")
    n = doc.get("n")
    if not isinstance(m, int) or m < 1:
        issues.append('"m" must be a positive integer')
        m = 1
    if not isinstance(n, int) or n < 1:
        issues.append('"n" must be a positive integer')
        n = 1
    blocks = {}
    for name in ("A", "B", "C"):
        seq = doc.get(name)
        if not isinstance(seq, list) or len(seq) != n:
            issues.append(f'"{name}" must be a list of {n} blocks')
            seq = [None] * n
        blocks[name] = [
            _block_from_json(entry, m, f"{name}[{k}]", issues)
            for k, entry in enumerate(seq)
        ]
    if issues:
        raise ValidationError(f"{path}: " + "; ".join(issues))
    sys = BlockTridiagonalSystem(m=m, n=n, A=tuple(blocks["A"]),
                                 B=tuple(blocks["B"]), C=tuple(blocks["C"]))
    report = validate_system(sys)
    if not report.ok:
        raise ValidationError(f"{path}: " + "; ".join(report.issues))
    return sys


def load_meta(path) -> dict | None:
    """Return the optional "meta" object of a system file, if present."""
    with open(path) as fh:
        doc = json.load(fh)
    meta = doc.get("meta")
    return meta if isinstance(meta, dict) else None
