"""Minimum-edit-distance token alignment.

Costs: match 0, substitute 1, insert 1, delete 1. Ties break in the fixed
order match > substitute > delete > insert so alignments are deterministic.
Ops are relative to transforming `original` into `corrected`: delete drops
an original token, insert adds a corrected one.
"""

from __future__ import annotations

from dataclasses import dataclass

MATCH, SUBSTITUTE, DELETE, INSERT = "match", "substitute", "delete", "insert"


@dataclass(frozen=True)
class AlignOp:
    op: str
    orig_index: int | None  # None for insert
    corr_index: int | None  # None for delete


def align_tokens(original: list[str], corrected: list[str]) -> list[AlignOp]:
    if not original or not corrected:
        raise ValueError("align_tokens requires nonempty token lists")
    n, m = len(original), len(corrected)
    cost = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        cost[i][0] = i
    for j in range(1, m + 1):
        cost[0][j] = j
    for i in range(1, n + 1):
        oi = original[i - 1]
        for j in range(1, m + 1):
            diag = cost[i - 1][j - 1] + (0 if oi == corrected[j - 1] else 1)
            cost[i][j] = min(diag, cost[i - 1][j] + 1, cost[i][j - 1] + 1)

    ops: list[AlignOp] = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and original[i - 1] == corrected[j - 1] \
                and cost[i][j] == cost[i - 1][j - 1]:
            ops.append(AlignOp(MATCH, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and cost[i][j] == cost[i - 1][j - 1] + 1:
            ops.append(AlignOp(SUBSTITUTE, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and cost[i][j] == cost[i - 1][j] + 1:
            ops.append(AlignOp(DELETE, i - 1, None))
            i -= 1
        else:
            ops.append(AlignOp(INSERT, None, j - 1))
            j -= 1
    ops.reverse()
    return ops


def alignment_cost(ops: list[AlignOp]) -> int:
    return sum(1 for op in ops if op.op != MATCH)
