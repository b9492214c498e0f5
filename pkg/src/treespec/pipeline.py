"""Discrete-event model of the draft/target compute and weight-loading pipeline.

Memory model
------------
The draft model is always resident.  Of the target weights, a *resident
share* ``rho = (memory_upper_bound - draft_footprint) / target_footprint``
(clamped to [0, 1]) fits in memory next to it and is kept there between
passes.  The rest must be streamed from disk for every target pass; streamed
chunks are consumed and dropped, so they never count against the bound.

Per verification cycle the lanes behave as follows:

* ``target_load`` (resident share): runs in the background whenever the
  resident share is not fully loaded -- at start-up, and after each pass if
  ``resident_evict_fraction`` > 0.  It overlaps drafting and stops exactly
  at the memory bound.
* on fallback the streamed share (``(1 - rho) * target_load_total``) is
  loaded only after the resident load has finished, then
  ``target_compute`` runs.
* ``speculative_draft`` steps may run after a fallback only while the
  resident load is still in progress.

Compute lanes (draft, speculative, target) share one accelerator and never
overlap in the gated mode.  The ``naive`` mode lets speculative drafting run
through the whole verification and charges the measured contention
multipliers instead.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

LANES = ("draft_compute", "speculative_draft", "target_load", "target_compute")

_EPS = 1e-9


@dataclass
class CostModel:
    """Abstract time and memory units.

    Defaults: one draft step costs 1; a target token without speculation
    costs ``5 + 0.5 * 450 = 230`` (the 230x draft/target speed gap), of which
    97.8% is weight loading.
    """

    draft_token_compute: float = 1.0
    target_pass_compute: float = 5.0
    target_load_total: float = 450.0
    memory_upper_bound: float = 75.0
    draft_footprint: float = 25.0
    target_footprint: float = 100.0
    resident_evict_fraction: float = 0.0
    row_surcharge: float = 0.0
    contention_compute: float = 2.25
    contention_load: float = 1.07

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or math.isnan(v) or v < 0:
                raise ValueError(f"{f.name} must be a non-negative number, got {v!r}")
        if self.draft_footprint > self.memory_upper_bound:
            raise ValueError("draft model does not fit under memory_upper_bound")
        if self.target_footprint <= 0:
            raise ValueError("target_footprint must be positive")
        if self.resident_evict_fraction > 1:
            raise ValueError("resident_evict_fraction must lie in [0, 1]")
        if self.contention_compute < 1 or self.contention_load < 1:
            raise ValueError("contention multipliers must be >= 1")

    @property
    def target_load_resident_fraction(self) -> float:
        share = (self.memory_upper_bound - self.draft_footprint) / self.target_footprint
        return min(1.0, max(0.0, share))

    @property
    def resident_load_time(self) -> float:
        return self.target_load_resident_fraction * self.target_load_total

    @property
    def streamed_load_time(self) -> float:
        return (1.0 - self.target_load_resident_fraction) * self.target_load_total

    @property
    def target_token_time(self) -> float:
        """Steady-state time of one plain target decoding step."""
        refill = self.resident_evict_fraction * self.resident_load_time
        return self.target_pass_compute + self.streamed_load_time + refill

    def with_resident_fraction(self, fraction: float) -> "CostModel":
        """Copy with the memory bound set so the resident share equals ``fraction``."""
        if not 0.0 <= fraction <= 1.0:
            raise ValueError("fraction must lie in [0, 1]")
        d = asdict(self)
        d["memory_upper_bound"] = self.draft_footprint + fraction * self.target_footprint
        return CostModel(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "CostModel":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown cost-model keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "CostModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class TimelineEvent:
    start: float
    end: float
    lane: str
    payload: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"start": self.start, "end": self.end, "lane": self.lane,
                "payload": self.payload}


@dataclass
class Timeline:
    events: list[TimelineEvent] = field(default_factory=list)
    memory: list[tuple[float, float]] = field(default_factory=list)
    total_time: float = 0.0

    def lane(self, name: str) -> list[TimelineEvent]:
        return [e for e in self.events if e.lane == name]

    def count(self, name: str) -> int:
        return sum(1 for e in self.events if e.lane == name)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_dict(), sort_keys=True) + "\n" for e in self.events)

    def write_jsonl(self, path) -> None:
        Path(path).write_text(self.to_jsonl())


class PipelineSimulator:
    """Online scheduler; feed it draft/fallback/speculative/verify steps in order."""

    def __init__(self, cost: CostModel, mode: str = "gated"):
        if mode not in ("gated", "naive"):
            raise ValueError("mode must be 'gated' or 'naive'")
        self.cost = cost
        self.mode = mode
        self.timeline = Timeline()
        self.compute_free = 0.0
        self.io_free = 0.0
        self.resident = 0.0  # fraction of the resident share present at io_free
        self.in_fallback = False
        self._plan: dict | None = None
        self._spec_used = 0
        self.timeline.memory.append((0.0, cost.draft_footprint))
        self._load_resident(0.0, cost.target_load_resident_fraction, "resident")

    # -- helpers -------------------------------------------------------------

    def _add(self, start, end, lane, **payload):
        self.timeline.events.append(TimelineEvent(start, end, lane, payload))

    def _memory_at_resident(self, resident: float) -> float:
        return self.cost.draft_footprint + resident * self.cost.target_footprint

    def _load_resident(self, start: float, target_fraction: float, phase: str):
        missing = target_fraction - self.resident
        if missing <= _EPS:
            return
        end = start + missing * self.cost.target_load_total
        self._add(start, end, "target_load", phase=phase, fraction=missing)
        self.timeline.memory.append((start, self._memory_at_resident(self.resident)))
        self.resident = target_fraction
        self.timeline.memory.append((end, self._memory_at_resident(self.resident)))
        self.io_free = end

    @property
    def total_time(self) -> float:
        return self.compute_free

    # -- steps ---------------------------------------------------------------

    def draft(self, **payload) -> None:
        if self.in_fallback:
            raise ValueError("draft step between fallback and verification")
        start = self.compute_free
        self.compute_free = start + self.cost.draft_token_compute
        self._add(start, self.compute_free, "draft_compute", **payload)

    def fallback(self, rows: int = 1) -> None:
        if self.in_fallback:
            raise ValueError("fallback while a verification is already pending")
        c = self.cost
        t_f = self.compute_free
        load_mult = c.contention_load if self.mode == "naive" else 1.0
        comp_mult = c.contention_compute if self.mode == "naive" else 1.0
        stream_start = max(t_f, self.io_free)
        stream_end = stream_start + c.streamed_load_time * load_mult
        compute_time = (c.target_pass_compute + c.row_surcharge * max(rows - 1, 0)) * comp_mult
        compute_end = stream_end + compute_time
        window_end = compute_end if self.mode == "naive" else max(t_f, self.io_free)
        self._plan = {"t_f": t_f, "stream_start": stream_start, "stream_end": stream_end,
                      "compute_end": compute_end, "window_end": window_end}
        self._spec_used = 0
        self.in_fallback = True

    def speculative_capacity(self) -> int:
        """Speculative draft steps that still fit into the current window."""
        if not self.in_fallback:
            return 0
        d = self.cost.draft_token_compute
        span = self._plan["window_end"] - self._plan["t_f"]
        if d <= 0:
            return 0
        return max(0, int(math.floor(span / d + _EPS)) - self._spec_used)

    def speculative(self, **payload) -> None:
        if not self.in_fallback:
            raise ValueError("speculative step outside a fallback")
        if self.speculative_capacity() < 1:
            raise ValueError("speculative step does not fit into the loading window")
        d = self.cost.draft_token_compute
        start = self._plan["t_f"] + self._spec_used * d
        self._spec_used += 1
        self._add(start, start + d, "speculative_draft", **payload)

    def verify(self, rows: int = 1, **payload) -> None:
        if not self.in_fallback:
            raise ValueError("verification without a preceding fallback")
        # row count may only be known now; recompute the compute interval
        plan = self._plan
        c = self.cost
        comp_mult = c.contention_compute if self.mode == "naive" else 1.0
        compute_time = (c.target_pass_compute + c.row_surcharge * max(rows - 1, 0)) * comp_mult
        if plan["stream_end"] > plan["stream_start"]:
            self._add(plan["stream_start"], plan["stream_end"], "target_load", phase="streamed",
                      fraction=1.0 - c.target_load_resident_fraction)
        start = plan["stream_end"]
        if self.mode == "gated":
            spec_end = plan["t_f"] + self._spec_used * c.draft_token_compute
            start = max(start, spec_end)
        end = start + compute_time
        self._add(start, end, "target_compute", rows=rows, **payload)
        self.compute_free = end
        if self.mode == "naive":
            spec_end = plan["t_f"] + self._spec_used * c.draft_token_compute
            self.compute_free = max(end, spec_end)
        self.io_free = max(self.io_free, plan["stream_end"])
        self.in_fallback = False
        self._plan = None
        evict = c.resident_evict_fraction * c.target_load_resident_fraction
        if evict > _EPS:
            self.timeline.memory.append((end, self._memory_at_resident(self.resident)))
            self.resident -= evict
            self.timeline.memory.append((end, self._memory_at_resident(self.resident)))
            self._load_resident(max(end, self.io_free), c.target_load_resident_fraction, "refill")

    def finish(self) -> Timeline:
        self.timeline.total_time = self.compute_free
        return self.timeline


def simulate_run(trace, cost: CostModel, mode: str = "gated",
                 speculative: bool = True) -> Timeline:
    """Replay an engine trace and return its timeline.

    With ``speculative=False`` the speculative steps are taken out of the
    loading window: usable ones are re-run as ordinary draft steps right after
    the verification, unusable ones are dropped.
    """
    sim = PipelineSimulator(cost, mode)
    deferred = []
    for ev in trace:
        kind = ev.get("event")
        if kind == "draft":
            sim.draft(branch=ev.get("branch"))
        elif kind == "fallback":
            sim.fallback(rows=ev.get("rows", 1))
        elif kind == "speculative":
            if speculative:
                sim.speculative(usable=ev.get("usable", False))
            elif ev.get("usable", False):
                deferred.append(ev)
        elif kind == "verify":
            sim.verify(rows=ev.get("rows", 1))
            for _ in deferred:
                sim.draft(branch=None, deferred=True)
            deferred = []
    if sim.in_fallback:
        raise ValueError("trace ends with a fallback that was never verified")
    return sim.finish()


def check_timeline(timeline: Timeline, cost: CostModel) -> list[str]:
    """Invariant violations of a gated-mode timeline (empty list if none)."""
    problems = []
    compute = sorted(timeline.lane("target_compute"), key=lambda e: e.start)
    drafts = timeline.lane("draft_compute") + timeline.lane("speculative_draft")
    for d in drafts:
        for t in compute:
            if d.start < t.end - _EPS and t.start < d.end - _EPS:
                problems.append(f"{d.lane} [{d.start}, {d.end}] overlaps target compute "
                                f"[{t.start}, {t.end}]")
    resident_loads = [e for e in timeline.lane("target_load")
                      if e.payload.get("phase") in ("resident", "refill")]
    for s in timeline.lane("speculative_draft"):
        if not any(l.start - _EPS <= s.start and s.end <= l.end + _EPS for l in resident_loads):
            problems.append(f"speculative step [{s.start}, {s.end}] outside resident loading")
    for t, mem in timeline.memory:
        if mem > cost.memory_upper_bound + _EPS:
            problems.append(f"memory {mem} exceeds bound at t={t}")
    # draft/speculative steps never overlap each other either
    spans = sorted((e.start, e.end) for e in drafts)
    for (s0, e0), (s1, _) in zip(spans, spans[1:]):
        if s1 < e0 - _EPS:
            problems.append(f"draft steps overlap at t={s1}")
    return problems


def speculative_tokens_usable(report, speculative: list[int], branch: int | None = None) -> list[int]:
    """Speculative tokens survive only if the branch they extend was fully correct."""
    b = report.best if branch is None else branch
    if report.branches[b].first_error is None:
        return list(speculative)
    return []
