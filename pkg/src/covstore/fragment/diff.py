"""Align two block-hash lists into equality / modified / inserted / deleted operations."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class DiffStatus(str, enum.Enum):
    EQUALITY = "equality"
    MODIFIED = "modified"
    INSERTED = "inserted"
    DELETED = "deleted"


@dataclass(frozen=True)
class DiffOp:
    status: DiffStatus
    # index into the old list; for inserts, the old entry the new hashes follow (-1 = list head)
    position: int
    new_hashes: tuple = field(default=())


def _lcs_pairs(a: list, b: list) -> list[tuple[int, int]]:
    """Index pairs of one longest common subsequence of ``a`` and ``b``."""
    n, m = len(a), len(b)
    lo = 0
    while lo < n and lo < m and a[lo] == b[lo]:
        lo += 1
    hi_a, hi_b = n, m
    while hi_a > lo and hi_b > lo and a[hi_a - 1] == b[hi_b - 1]:
        hi_a -= 1
        hi_b -= 1
    core_a, core_b = a[lo:hi_a], b[lo:hi_b]
    rows, cols = len(core_a), len(core_b)
    table = [[0] * (cols + 1) for _ in range(rows + 1)]
    for i in range(rows - 1, -1, -1):
        row, below = table[i], table[i + 1]
        for j in range(cols - 1, -1, -1):
            row[j] = below[j + 1] + 1 if core_a[i] == core_b[j] else max(below[j], row[j + 1])
    pairs = [(i, i) for i in range(lo)]
    i = j = 0
    while i < rows and j < cols:
        if core_a[i] == core_b[j]:
            pairs.append((lo + i, lo + j))
            i += 1
            j += 1
        elif table[i + 1][j] >= table[i][j + 1]:
            i += 1
        else:
            j += 1
    pairs.extend((hi_a + d, hi_b + d) for d in range(n - hi_a))
    return pairs


def diff_hashes(old: list[str], new: list[str]) -> list[DiffOp]:
    """Edit script turning ``old`` into ``new``.

    Between two matched entries, old and new leftovers are paired up as
    modifications; any surplus becomes deletions or one insertion run.
    """
    ops: list[DiffOp] = []
    prev_i, prev_j = -1, -1
    for i, j in _lcs_pairs(old, new) + [(len(old), len(new))]:
        gap_old = list(range(prev_i + 1, i))
        gap_new = new[prev_j + 1:j]
        paired = min(len(gap_old), len(gap_new))
        for d in range(paired):
            ops.append(DiffOp(DiffStatus.MODIFIED, gap_old[d], (gap_new[d],)))
        for pos in gap_old[paired:]:
            ops.append(DiffOp(DiffStatus.DELETED, pos))
        if len(gap_new) > paired:
            anchor = gap_old[paired - 1] if paired else prev_i
            ops.append(DiffOp(DiffStatus.INSERTED, anchor, tuple(gap_new[paired:])))
        if i < len(old):
            ops.append(DiffOp(DiffStatus.EQUALITY, i))
        prev_i, prev_j = i, j
    return ops


def apply_diff(old: list[str], ops: list[DiffOp]) -> list[str]:
    replaced = {}
    dropped = set()
    after: dict[int, list] = {}
    for op in ops:
        if op.status is DiffStatus.MODIFIED:
            replaced[op.position] = op.new_hashes[0]
        elif op.status is DiffStatus.DELETED:
            dropped.add(op.position)
        elif op.status is DiffStatus.INSERTED:
            after.setdefault(op.position, []).extend(op.new_hashes)
    out = list(after.get(-1, ()))
    for i, h in enumerate(old):
        if i not in dropped:
            out.append(replaced.get(i, h))
        out.extend(after.get(i, ()))
    return out
