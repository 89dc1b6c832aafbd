"""Fixed semantic vectors for event templates and dense batch assembly.

Each template is tokenized and embedded as the mean of its token vectors.
Token vectors are unit-variance pseudorandom draws keyed by a stable hash of
(token, seed), so the embedding is identical across processes and platforms
without any downloaded model. An external word-vector file can override the
hashed vectors token by token.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError
from .sequences import EventSequence

PAD_ID = 0

_ALNUM_RUN = re.compile(r"[A-Za-z0-9]+")
_CAMEL_SPLIT = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|\d+")


def tokenize_template(template_text: str) -> list[str]:
    """Lowercased word tokens of a template.

    Splits on non-alphanumeric characters and camelCase boundaries, drops
    pure numbers (and with them the "<*>" wildcard). A template with no
    surviving tokens yields the single token "empty".
    """
    tokens: list[str] = []
    for run in _ALNUM_RUN.findall(template_text):
        for piece in _CAMEL_SPLIT.findall(run):
            if piece.isdigit():
                continue
            tokens.append(piece.lower())
    return tokens or ["empty"]


def _alpha_code(value: int) -> str:
    """Letters-only base-26 rendering, so synthetic ids survive tokenization."""
    if value < 0:
        raise ValueError("event id must be non-negative")
    digits = []
    while True:
        digits.append(chr(ord('a') + value % 26))
        value //= 26
        if value == 0:
            break
    return "".join(reversed(digits))


def synthetic_template(event_id: int) -> str:
    """Canonical template text for corpora that only carry event ids."""
    return "ev" + _alpha_code(event_id)


def hashed_token_vector(token: str, dim: int, token_seed: int) -> np.ndarray:
    digest = hashlib.blake2b(f"{token_seed}\x1f{token}".encode("utf-8"), digest_size=8).digest()
    gen = np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))
    return gen.standard_normal(dim)


def load_word_vectors(path, dim: int) -> dict[str, np.ndarray]:
    """Read a text word-vector file: "token v1 ... v<dim>" per line."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"word-vector file not found: {path}")
    vectors: dict[str, np.ndarray] = {}
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise DataError(
                    f"word-vector file {path} line {line_no}: expected {dim + 1} fields, got {len(parts)}"
                )
            try:
                vectors[parts[0]] = np.array([float(v) for v in parts[1:]], dtype=np.float64)
            except ValueError as exc:
                raise DataError(f"word-vector file {path} line {line_no}: {exc}") from exc
    return vectors


class EmbeddingTable:
    """event_id -> fixed vector, derived from template text.

    The pad id 0 always maps to the zero vector. Ids never registered are
    embedded on demand from their synthetic template, so sequences containing
    events unseen at build time still produce well-defined batches.
    """

    def __init__(self, dim: int = 32, token_seed: int = 0, word_vectors: Optional[dict] = None):
        if dim < 1:
            raise ValueError("embedding dim must be >= 1")
        self.dim = dim
        self.token_seed = token_seed
        self.word_vectors = word_vectors
        self.source = "external_file" if word_vectors else "hashed"
        self.templates: dict[int, str] = {}
        self._event_vectors: dict[int, np.ndarray] = {PAD_ID: np.zeros(dim)}
        self._token_cache: dict[str, np.ndarray] = {}

    def token_vector(self, token: str) -> np.ndarray:
        vec = self._token_cache.get(token)
        if vec is None:
            if self.word_vectors is not None and token in self.word_vectors:
                vec = self.word_vectors[token]
                if vec.shape != (self.dim,):
                    raise DataError(f"word vector for {token!r} has wrong width")
            else:
                vec = hashed_token_vector(token, self.dim, self.token_seed)
            self._token_cache[token] = vec
        return vec

    def template_vector(self, template_text: str) -> np.ndarray:
        tokens = tokenize_template(template_text)
        out = np.zeros(self.dim)
        for token in tokens:
            out += self.token_vector(token)
        return out / len(tokens)

    def register(self, event_id: int, template_text: str) -> None:
        if event_id == PAD_ID:
            raise ValueError("event id 0 is reserved for padding")
        self.templates[event_id] = template_text
        self._event_vectors[event_id] = self.template_vector(template_text)

    def vector(self, event_id: int) -> np.ndarray:
        vec = self._event_vectors.get(event_id)
        if vec is None:
            template = synthetic_template(event_id)
            self.templates[event_id] = template
            vec = self.template_vector(template)
            self._event_vectors[event_id] = vec
        return vec

    @classmethod
    def from_templates(cls, templates: dict[int, str], dim: int = 32, token_seed: int = 0,
                       word_vectors: Optional[dict] = None) -> "EmbeddingTable":
        table = cls(dim=dim, token_seed=token_seed, word_vectors=word_vectors)
        for event_id, text in templates.items():
            table.register(event_id, text)
        return table


@dataclass
class SequenceBatch:
    X: np.ndarray  # N x L x d, float64, zero rows at pad positions
    event_grid: np.ndarray  # N x L, int64, 0 at pad positions
    pad_mask: np.ndarray  # N x L, bool, True = real event
    seq_ids: list[str]
    labels: np.ndarray  # N, int64 (0 normal / 1 anomalous)
    truncated: int = 0
    lengths: np.ndarray = field(default=None)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def max_len(self) -> int:
        return self.X.shape[1]


def build_batch(sequences: Sequence[EventSequence], table: EmbeddingTable, max_len: int = 256) -> SequenceBatch:
    """Assemble a right-padded numeric batch from event sequences.

    Sequences longer than max_len are truncated to their first max_len events
    and counted in the batch's `truncated` field.
    """
    if not sequences:
        raise DataError("cannot build a batch from zero sequences")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    truncated = 0
    ids_rows: list[list[int]] = []
    for seq in sequences:
        ids = seq.event_ids
        if len(ids) > max_len:
            ids = ids[:max_len]
            truncated += 1
        ids_rows.append(ids)
    n = len(ids_rows)
    width = max(len(row) for row in ids_rows)
    event_grid = np.zeros((n, width), dtype=np.int64)
    pad_mask = np.zeros((n, width), dtype=bool)
    X = np.zeros((n, width, table.dim), dtype=np.float64)
    lengths = np.zeros(n, dtype=np.int64)
    for i, row in enumerate(ids_rows):
        lengths[i] = len(row)
        for t, eid in enumerate(row):
            if eid == PAD_ID:
                raise DataError(f"sequence {sequences[i].seq_id!r} contains the reserved pad id 0")
            event_grid[i, t] = eid
            pad_mask[i, t] = True
            X[i, t, :] = table.vector(eid)
    labels = np.array([seq.label for seq in sequences], dtype=np.int64)
    return SequenceBatch(
        X=X,
        event_grid=event_grid,
        pad_mask=pad_mask,
        seq_ids=[seq.seq_id for seq in sequences],
        labels=labels,
        truncated=truncated,
        lengths=lengths,
    )
