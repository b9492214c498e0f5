"""Confidence-weighted branch pacing.

Each branch is entitled to a share ``C_x / sum(C)`` of the ``M`` drafted
tokens.  The deficit ``M * C_x / sum(C) - T_x`` measures how far a branch
lags behind that share; the next draft token goes to the branch with the
largest deficit, i.e. the most under-served claimant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

_TIE_EPS = 1e-9


@dataclass(frozen=True)
class PacerState:
    total_tokens: int
    confidences: tuple[float, ...]
    lengths: tuple[int, ...]

    def __post_init__(self):
        if len(self.confidences) != len(self.lengths):
            raise ValueError("confidences and lengths differ in length")
        if any(c <= 0 for c in self.confidences):
            raise ValueError("branch confidences must be positive")

    @classmethod
    def from_tree(cls, tree) -> "PacerState":
        return cls(tree.n_drafted,
                   tuple(b.cumulative_confidence for b in tree.branches),
                   tuple(b.length for b in tree.branches))


def deficit(x: int, state: PacerState) -> float:
    total = sum(state.confidences)
    return state.total_tokens * state.confidences[x] / total - state.lengths[x]


def select_branch(state: PacerState, candidates: Sequence[int] | None = None) -> int:
    """Index of the branch with maximum deficit.

    Deficits within a relative 1e-9 of the maximum count as tied; ties go to
    the higher confidence, then the lower index.  ``candidates`` restricts the
    choice (e.g. to branches not yet closed by EOS).
    """
    if not state.confidences:
        raise ValueError("no branches to select from")
    if candidates is None:
        candidates = range(len(state.confidences))
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidate branches")
    f = {x: deficit(x, state) for x in candidates}
    best = max(f.values())
    tol = _TIE_EPS * max(1.0, abs(best))
    tied = [x for x in candidates if f[x] >= best - tol]
    return min(tied, key=lambda x: (-state.confidences[x], x))
