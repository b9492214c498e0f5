from __future__ import annotations

from dataclasses import dataclass, field

from .fallback import DEFAULT_ALPHA
from .pipeline import CostModel


@dataclass
class EngineConfig:
    branch_threshold: float = 0.3
    max_branches: int = 8
    max_draft_tokens: int = 64
    initial_alpha: float = DEFAULT_ALPHA
    max_output_tokens: int = 64
    cost: CostModel = field(default_factory=CostModel)
    speculative: bool = True
    pipeline_mode: str = "gated"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.branch_threshold < 1.0:
            raise ValueError("branch_threshold must lie in (0, 1)")
        if self.max_branches < 1:
            raise ValueError("max_branches must be >= 1")
        if self.max_draft_tokens < 1:
            raise ValueError("max_draft_tokens must be >= 1")
        if not 0.0 < self.initial_alpha <= 1.0:
            raise ValueError("initial_alpha must lie in (0, 1]")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")
        if self.pipeline_mode not in ("gated", "naive"):
            raise ValueError("pipeline_mode must be 'gated' or 'naive'")
