"""Frequency-based partition of batch events into focus and context.

The infrequent share of a batch's unique events (ratio kappa) forms the
focus; the rest is the context. Focus masking zeroes focus events to produce
the context view X_c; context masking zeroes everything else to produce the
focus view X_f. The two views always add back up to the original batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .embeddings import SequenceBatch
from .errors import ConfigError

DEFAULT_KAPPAS = (0.05, 0.1, 0.15, 0.2, 0.3)

SCHEMES = ("none", "random", "frequency")


@dataclass
class MaskConfig:
    scheme: str = "frequency"
    kappas: tuple = DEFAULT_KAPPAS
    kappa_mode: str = "sampled"  # "sampled" or "fixed:<value>"
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown masking scheme {self.scheme!r}")
        self.kappas = tuple(float(k) for k in self.kappas)
        if not self.kappas:
            raise ConfigError("kappa set must be non-empty")
        for k in self.kappas:
            if not 0.0 < k < 1.0:
                raise ConfigError(f"kappa {k} outside (0, 1)")
        if self.kappa_mode != "sampled":
            value = self.fixed_kappa()
            if not 0.0 < value < 1.0:
                raise ConfigError(f"fixed kappa {value} outside (0, 1)")

    def fixed_kappa(self) -> float:
        if self.kappa_mode == "sampled":
            raise ConfigError("kappa_mode is 'sampled'; no fixed value")
        text = self.kappa_mode.removeprefix("fixed:")
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"bad kappa_mode {self.kappa_mode!r}") from exc

    def inference_kappas(self) -> tuple:
        """Kappas averaged over at inference: the whole set, or the fixed one."""
        if self.kappa_mode == "sampled":
            return self.kappas
        return (self.fixed_kappa(),)


@dataclass
class MaskPlan:
    focus_events: frozenset
    focus_positions: np.ndarray  # N x L bool, True = focus event at a real position
    kappa_used: Optional[float]
    scheme: str = "frequency"


def batch_event_frequencies(batch: SequenceBatch) -> dict[int, int]:
    """Occurrence count per event id over all real positions of the batch."""
    ids, counts = np.unique(batch.event_grid[batch.pad_mask], return_counts=True)
    return {int(i): int(c) for i, c in zip(ids, counts)}


def focus_size(kappa: float, n_unique: int) -> int:
    """ceil(kappa * U) with protection against float fuzz (0.15*20 -> 3)."""
    return int(math.ceil(round(kappa * n_unique, 9)))


def select_focus(counts: dict[int, int], kappa: float, scheme: str,
                 rng: Optional[np.random.Generator] = None) -> frozenset:
    """Pick the focus event set from a frequency table.

    frequency: the ceil(kappa*U) rarest events, ties broken by ascending id;
    random: the same number of events drawn uniformly without replacement;
    none: every unique event (degenerate, pairs with global reconstruction).
    """
    if not counts:
        raise ValueError("empty frequency table")
    if scheme == "none":
        return frozenset(counts)
    if not 0.0 < kappa < 1.0:
        raise ConfigError(f"kappa {kappa} outside (0, 1)")
    size = focus_size(kappa, len(counts))
    if scheme == "frequency":
        ranked = sorted(counts, key=lambda eid: (counts[eid], eid))
        return frozenset(ranked[:size])
    if scheme == "random":
        if rng is None:
            raise ValueError("random scheme needs an rng")
        ids = np.array(sorted(counts))
        chosen = rng.choice(ids, size=size, replace=False)
        return frozenset(int(e) for e in chosen)
    raise ConfigError(f"unknown masking scheme {scheme!r}")


def sample_kappa(config: MaskConfig, rng: np.random.Generator) -> float:
    """Uniform draw from the kappa set; one draw per training batch."""
    return config.kappas[int(rng.integers(len(config.kappas)))]


def build_plan(batch: SequenceBatch, config: MaskConfig,
               rng: Optional[np.random.Generator] = None,
               kappa: Optional[float] = None) -> MaskPlan:
    """Training-time plan: frequencies are computed at the batch level."""
    counts = batch_event_frequencies(batch)
    if config.scheme == "none":
        return MaskPlan(
            focus_events=frozenset(counts),
            focus_positions=batch.pad_mask.copy(),
            kappa_used=None,
            scheme="none",
        )
    if kappa is None:
        kappa = config.fixed_kappa() if config.kappa_mode != "sampled" else sample_kappa(config, rng)
    focus = select_focus(counts, kappa, config.scheme, rng)
    return MaskPlan(
        focus_events=focus,
        focus_positions=_positions(batch, focus),
        kappa_used=kappa,
        scheme=config.scheme,
    )


def _positions(batch: SequenceBatch, focus: frozenset) -> np.ndarray:
    if not focus:
        return np.zeros_like(batch.pad_mask)
    member = np.isin(batch.event_grid, np.array(sorted(focus), dtype=np.int64))
    return member & batch.pad_mask


def apply_focus_mask(X: np.ndarray, plan: MaskPlan) -> np.ndarray:
    """Zero the focus rows: the context view X_c fed to the encoder-only net."""
    return np.where(plan.focus_positions[:, :, None], 0.0, X)


def apply_context_mask(X: np.ndarray, plan: MaskPlan) -> np.ndarray:
    """Zero everything except the focus rows: the target view X_f."""
    return np.where(plan.focus_positions[:, :, None], X, 0.0)


def inference_plans(batch: SequenceBatch, frozen_counts: dict[int, int],
                    config: MaskConfig, seed: int = 0) -> list[MaskPlan]:
    """Per-sequence plans for scoring, one per ensemble kappa.

    Event rarity is taken from the frequency table frozen over the training
    set, so scores do not depend on how the test data is batched. Events the
    table has never seen count as frequency zero and are therefore always in
    focus. The random scheme draws per (seed, sequence, kappa) and stays
    deterministic.
    """
    if config.scheme == "none":
        return [MaskPlan(frozenset(), batch.pad_mask.copy(), None, "none")]
    plans = []
    row_uniques = [np.unique(batch.event_grid[i][batch.pad_mask[i]]) for i in range(batch.n)]
    for k_index, kappa in enumerate(config.inference_kappas()):
        positions = np.zeros_like(batch.pad_mask)
        focus_all: set = set()
        for i, uniques in enumerate(row_uniques):
            if uniques.size == 0:
                continue
            counts = {int(e): frozen_counts.get(int(e), 0) for e in uniques}
            if config.scheme == "frequency":
                focus = select_focus(counts, kappa, "frequency")
            else:
                row_rng = np.random.default_rng(np.random.SeedSequence((seed, i, k_index)))
                focus = select_focus(counts, kappa, "random", row_rng)
            focus_all |= focus
            member = np.isin(batch.event_grid[i], np.array(sorted(focus), dtype=np.int64))
            positions[i] = member & batch.pad_mask[i]
        plans.append(MaskPlan(frozenset(focus_all), positions, kappa, config.scheme))
    return plans


def count_events(sequences: Sequence) -> dict[int, int]:
    """Frequency table over whole sequences (used to freeze training counts)."""
    counts: dict[int, int] = {}
    for seq in sequences:
        for eid in seq.event_ids:
            counts[eid] = counts.get(eid, 0) + 1
    return counts
