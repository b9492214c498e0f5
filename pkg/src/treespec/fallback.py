"""Self-adaptive verification threshold."""

from __future__ import annotations

from dataclasses import dataclass, field

DEFAULT_ALPHA = 0.01
ALPHA_MIN = 1e-8


@dataclass
class FallbackController:
    """Holds the threshold ``alpha`` and the verification history.

    Drafting falls back to verification once the tree-cumulative confidence
    drops strictly below ``alpha`` (or an EOS is drafted).  After every
    verification ``alpha`` halves if the best branch was fully correct, and is
    divided by ``T_c ** ((n_all - n_correct) / n_all)`` otherwise.
    """

    alpha: float = DEFAULT_ALPHA
    alpha_min: float = ALPHA_MIN
    history: list = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha!r}")

    def should_fallback(self, tree_confidence: float, eos_drafted: bool = False) -> bool:
        return eos_drafted or tree_confidence < self.alpha

    def update_threshold(self, n_all: int, n_correct: int, tree_confidence: float) -> float:
        if n_all < 1:
            raise ValueError("n_all must be >= 1")
        if not 0 <= n_correct <= n_all:
            raise ValueError(f"n_correct={n_correct} outside [0, n_all={n_all}]")
        if not 0.0 < tree_confidence <= 1.0:
            raise ValueError(f"tree confidence {tree_confidence!r} outside (0, 1]")
        if n_correct == n_all:
            alpha = self.alpha * 0.5
        else:
            alpha = self.alpha / tree_confidence ** ((n_all - n_correct) / n_all)
        self.alpha = min(1.0, max(self.alpha_min, alpha))
        self.history.append((n_all, n_correct, tree_confidence))
        return self.alpha


def should_fallback(tree_confidence: float, ctrl: FallbackController,
                    eos_drafted: bool = False) -> bool:
    return ctrl.should_fallback(tree_confidence, eos_drafted)


def update_threshold(ctrl: FallbackController, n_all: int, n_correct: int,
                     tree_confidence: float) -> float:
    return ctrl.update_threshold(n_all, n_correct, tree_confidence)
