"""Grouping parsed records into labeled event sequences and splitting them.

Supports the two grouping modes used for the public corpora: session keys
(HDFS block ids) and fixed-size entry windows (BGL/Spirit), with optional
removal of consecutive duplicate events beforehand.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .corpus import ANOMALOUS, NORMAL, LogRecord
from .errors import ConfigError, DataError

MIN_SEQUENCE_LEN = 2


@dataclass
class EventSequence:
    seq_id: str
    event_ids: list[int]
    label: int
    origin: str = "entry_window"  # "session" or "entry_window"
    window_size: Optional[int] = None
    start_line: Optional[int] = None
    end_line: Optional[int] = None

    def __len__(self) -> int:
        return len(self.event_ids)


@dataclass
class SplitDataset:
    train: list[EventSequence]
    test: list[EventSequence]
    strategy: str
    seed: int


def dedup_consecutive(event_ids: Sequence[int]) -> list[int]:
    """Collapse runs of equal adjacent ids; idempotent, order preserving."""
    out: list[int] = []
    for eid in event_ids:
        if not out or out[-1] != eid:
            out.append(eid)
    return out


def dedup_records(records: Sequence[LogRecord]) -> list[LogRecord]:
    """Collapse runs of records with equal event ids.

    The first record of a run is kept; if any record in the run is anomalous
    the kept record is marked anomalous, so window labels never lose an
    anomaly to deduplication.
    """
    out: list[LogRecord] = []
    for rec in records:
        if out and out[-1].event_id == rec.event_id:
            if rec.label == ANOMALOUS and out[-1].label != ANOMALOUS:
                kept = out[-1]
                out[-1] = LogRecord(
                    line_no=kept.line_no,
                    label=ANOMALOUS,
                    event_id=kept.event_id,
                    template_text=kept.template_text,
                    params=kept.params,
                    session_key=kept.session_key,
                )
            continue
        out.append(rec)
    return out


def group_by_session(
    records: Iterable[LogRecord],
    session_labels: dict[str, int],
    session_regex=None,
) -> tuple[list[EventSequence], int]:
    """One sequence per session key, events in line order.

    Records without a key are dropped and counted. A key missing from the
    label file is fatal: the file is the ground truth.
    """
    groups: dict[str, list[LogRecord]] = {}
    order: list[str] = []
    dropped = 0
    for rec in records:
        key = rec.session_key
        if key is None and session_regex is not None:
            for candidate in [*rec.params, rec.template_text]:
                match = session_regex.search(candidate)
                if match:
                    key = match.group(1) if match.groups() else match.group(0)
                    break
        if key is None:
            dropped += 1
            continue
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(rec)
    sequences = []
    for key in order:
        if key not in session_labels:
            raise DataError(f"session key {key!r} missing from the label file")
        members = groups[key]
        if len(members) < MIN_SEQUENCE_LEN:
            dropped += len(members)
            continue
        sequences.append(
            EventSequence(
                seq_id=key,
                event_ids=[r.event_id for r in members],
                label=session_labels[key],
                origin="session",
                window_size=None,
                start_line=members[0].line_no,
                end_line=members[-1].line_no,
            )
        )
    return sequences, dropped


def group_fixed_window(records: Sequence[LogRecord], window: int) -> list[EventSequence]:
    """Consecutive non-overlapping chunks of `window` records.

    The final partial chunk is kept only if it has at least two events. A
    window is anomalous iff any member record is.
    """
    if window < MIN_SEQUENCE_LEN:
        raise ConfigError(f"window size must be >= {MIN_SEQUENCE_LEN}, got {window}")
    sequences = []
    for index, start in enumerate(range(0, len(records), window)):
        chunk = records[start : start + window]
        if len(chunk) < MIN_SEQUENCE_LEN:
            break
        label = ANOMALOUS if any(r.label == ANOMALOUS for r in chunk) else NORMAL
        sequences.append(
            EventSequence(
                seq_id=f"w{index:06d}",
                event_ids=[r.event_id for r in chunk],
                label=label,
                origin="entry_window",
                window_size=window,
                start_line=chunk[0].line_no,
                end_line=chunk[-1].line_no,
            )
        )
    return sequences


def split(
    sequences: Sequence[EventSequence],
    strategy: str,
    ratio: float = 0.8,
    seed: int = 0,
) -> SplitDataset:
    """80/20 partition of sequences into train and test.

    chronological: the cut sits at the `ratio` point of the underlying
    message count; a sequence straddling the boundary goes to train.
    random: seeded uniform shuffle, train size rounded to nearest (ties up).
    """
    if not sequences:
        raise DataError("cannot split an empty sequence list")
    if not 0.0 < ratio < 1.0:
        raise ConfigError("split ratio must be in (0, 1)")
    if strategy == "chronological":
        total = sum(len(s) for s in sequences)
        boundary = ratio * total
        train, test = [], []
        cum = 0
        for seq in sequences:
            (train if cum < boundary else test).append(seq)
            cum += len(seq)
        return SplitDataset(train=train, test=test, strategy=strategy, seed=seed)
    if strategy == "random":
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(sequences))
        n_train = int(np.floor(len(sequences) * ratio + 0.5))
        train = [sequences[i] for i in order[:n_train]]
        test = [sequences[i] for i in order[n_train:]]
        return SplitDataset(train=train, test=test, strategy=strategy, seed=seed)
    raise ConfigError(f"unknown split strategy {strategy!r}")


def filter_training_normals(train: Sequence[EventSequence]) -> tuple[list[EventSequence], int]:
    """Keep only normal sequences; returns (normals, discarded_count)."""
    normals = [s for s in train if s.label == NORMAL]
    if not normals:
        raise DataError("training split contains no normal sequences")
    return normals, len(train) - len(normals)


DATASET_VERSION = "dataset v1"


def write_dataset(path, sequences: Iterable[EventSequence], meta: Optional[dict] = None) -> None:
    """One sequence per line: seq_id TAB label TAB space-separated event ids."""
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as handle:
            handle.write(f"# {DATASET_VERSION}\n")
            for key in sorted(meta or {}):
                handle.write(f"# {key}={meta[key]}\n")
            for seq in sequences:
                ids = " ".join(str(e) for e in seq.event_ids)
                handle.write(f"{seq.seq_id}\t{seq.label}\t{ids}\n")
    except OSError as exc:
        raise DataError(f"cannot write dataset {path}: {exc}") from exc


def read_dataset(path) -> tuple[list[EventSequence], dict[str, str]]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    meta: dict[str, str] = {}
    sequences: list[EventSequence] = []
    with path.open("r", encoding="utf-8") as handle:
        first = handle.readline().strip()
        if first != f"# {DATASET_VERSION}":
            raise DataError(f"unrecognized dataset header {first!r} in {path}")
        for line in handle:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("# "):
                key, _, value = line[2:].partition("=")
                meta[key] = value
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"malformed dataset row: {line!r}")
            seq_id, label, ids = parts
            window = int(meta["window"]) if meta.get("window", "").isdigit() else None
            if window == 0:
                window = None
            sequences.append(
                EventSequence(
                    seq_id=seq_id,
                    event_ids=[int(tok) for tok in ids.split()],
                    label=int(label),
                    origin="entry_window" if window else "session",
                    window_size=window,
                )
            )
    return sequences, meta
