"""Raw-log ingestion and fixed-depth template mining.

Templates are mined with a Drain-style fixed-depth parse tree: a line is
routed by its token count and leading tokens, then matched against the
templates stored in the reached leaf by token similarity. Variable parts are
replaced by the wildcard ``<*>``, either up front by the pre-masking regexes
or during mining when two lines disagree at a position.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Optional

from .errors import ConfigError, DataError

NORMAL = 0
ANOMALOUS = 1

WILDCARD = "<*>"

# Applied per whitespace token, first full match wins. Order matters: the
# more specific shapes (block ids, addresses, paths) must win over the plain
# number rule.
PRE_MASK_PATTERNS = (
    re.compile(r"blk_-?\d+"),
    re.compile(r"(?:\d{1,3}\.){3}\d{1,3}(?::\d+)?"),
    re.compile(r"(?:/[^/\s]+)+/?"),
    re.compile(r"0[xX][0-9a-fA-F]+"),
    re.compile(r"(?=[0-9a-fA-F]*\d)[0-9a-fA-F]{8,}"),
    re.compile(r"[+-]?\d+(?:\.\d+)?"),
)

_DIGIT_RE = re.compile(r"\d")


@dataclass
class FormatProfile:
    """How to read one log-file flavor.

    label_rule:
        "dash"  -- first whitespace token equal to "-" marks a normal line,
                   anything else marks it anomalous (BGL/Spirit style);
        "none"  -- lines carry no label (HDFS style, labels come from a
                   session label file).
    content_start:
        index of the first whitespace token that belongs to the message body.
    session_regex:
        optional pattern whose first match (group 1 if present) yields the
        session key of a line.
    session_label_file:
        path of the session key -> label CSV, required when label_rule is
        "none" and session grouping is intended.
    """

    label_rule: str = "dash"
    content_start: int = 0
    session_regex: Optional[str] = None
    session_label_file: Optional[str] = None

    def __post_init__(self):
        if self.label_rule not in ("dash", "none"):
            raise ConfigError(f"unknown label_rule {self.label_rule!r}")
        if self.content_start < 0:
            raise ConfigError("content_start must be >= 0")
        self._session_re = re.compile(self.session_regex) if self.session_regex else None


class RawLine(NamedTuple):
    line_no: int
    label: int
    session_key: Optional[str]
    content: str


@dataclass
class IngestReport:
    total: int = 0
    skipped: int = 0


@dataclass
class LogRecord:
    line_no: int
    label: int
    event_id: int
    template_text: str
    params: list[str] = field(default_factory=list)
    session_key: Optional[str] = None


def iter_raw_lines(path, profile: FormatProfile, report: Optional[IngestReport] = None) -> Iterator[RawLine]:
    """Yield (line_no, label, session_key, content) for every line of a file.

    Malformed lines (too short for the profile) are kept with label=normal
    and the raw line as content, and counted in the report.
    """
    path = Path(path)
    try:
        handle = path.open("r", encoding="utf-8", errors="replace")
    except OSError as exc:
        raise DataError(f"cannot read log file {path}: {exc}") from exc
    with handle:
        for line_no, raw in enumerate(handle):
            raw = raw.rstrip("\n")
            if report is not None:
                report.total += 1
            tokens = raw.split()
            if len(tokens) <= profile.content_start:
                if report is not None:
                    report.skipped += 1
                yield RawLine(line_no, NORMAL, _session_key(profile, raw), raw)
                continue
            if profile.label_rule == "dash":
                label = NORMAL if tokens[0] == "-" else ANOMALOUS
            else:
                label = NORMAL
            content = " ".join(tokens[profile.content_start:])
            yield RawLine(line_no, label, _session_key(profile, raw), content)


def load_raw_lines(path, profile: FormatProfile) -> tuple[list[RawLine], IngestReport]:
    """Eager variant of iter_raw_lines, returning all lines plus the report."""
    if profile.label_rule == "none" and profile.session_label_file:
        label_path = Path(profile.session_label_file)
        if not label_path.exists():
            raise DataError(f"session label file not found: {label_path}")
    report = IngestReport()
    lines = list(iter_raw_lines(path, profile, report))
    return lines, report


def _session_key(profile: FormatProfile, raw: str) -> Optional[str]:
    if profile._session_re is None:
        return None
    match = profile._session_re.search(raw)
    if match is None:
        return None
    return match.group(1) if match.groups() else match.group(0)


def load_session_labels(path) -> dict[str, int]:
    """Read a session label CSV (key,label with Normal/Anomaly or 0/1)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"session label file not found: {path}")
    labels: dict[str, int] = {}
    with path.open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition(",")
            key = key.strip()
            value = value.strip().lower()
            if key.lower() in ("blockid", "block_id", "session", "key"):
                continue
            if value in ("normal", "0", "success"):
                labels[key] = NORMAL
            elif value in ("anomaly", "anomalous", "1", "fail"):
                labels[key] = ANOMALOUS
            else:
                raise DataError(f"unrecognized session label {value!r} for key {key!r}")
    return labels


def mask_token(token: str) -> str:
    for pattern in PRE_MASK_PATTERNS:
        if pattern.fullmatch(token):
            return WILDCARD
    return token


class _TreeNode:
    __slots__ = ("children", "cluster_ids")

    def __init__(self):
        self.children: dict = {}
        self.cluster_ids: list[int] = []


class TemplateCatalog:
    """Mined templates plus the fixed-depth routing tree that found them.

    Mining is stateful and order dependent; once frozen the catalog only
    answers read-only matches and can be shared freely.
    """

    VERSION = "template-catalog v1"

    def __init__(self, depth: int = 4, sim_threshold: float = 0.4, max_children: int = 100):
        if depth < 2:
            raise ConfigError("tree depth must be >= 2")
        if not 0.0 < sim_threshold < 1.0:
            raise ConfigError("sim_threshold must be in (0, 1)")
        if max_children < 1:
            raise ConfigError("max_children must be >= 1")
        self.depth = depth
        self.sim_threshold = sim_threshold
        self.max_children = max_children
        self.templates: dict[int, list[str]] = {}
        self.frozen = False
        self.meta: dict[str, str] = {}
        self._root = _TreeNode()

    def __len__(self) -> int:
        return len(self.templates)

    def template_text(self, event_id: int) -> str:
        return " ".join(self.templates[event_id])

    @staticmethod
    def similarity(a: list[str], b: list[str]) -> float:
        """Fraction of positions that agree; a wildcard agrees with anything."""
        if len(a) != len(b):
            return 0.0
        if not a:
            return 1.0
        same = sum(1 for x, y in zip(a, b) if x == y or x == WILDCARD or y == WILDCARD)
        return same / len(a)

    @staticmethod
    def _routing_token(token: str) -> str:
        if token == WILDCARD or _DIGIT_RE.search(token):
            return WILDCARD
        return token

    def _route(self, tokens: list[str], create: bool) -> Optional[_TreeNode]:
        node = self._root
        keys = [len(tokens)]
        keys += [self._routing_token(t) for t in tokens[: self.depth - 2]]
        for key in keys:
            child = node.children.get(key)
            if child is None:
                if not create:
                    return None
                # Cap the fan-out of internal nodes; overflow routes to the
                # wildcard child instead of growing new branches.
                if key != WILDCARD and len(node.children) >= self.max_children:
                    key = WILDCARD
                    child = node.children.get(key)
                if child is None:
                    child = _TreeNode()
                    node.children[key] = child
            node = child
        return node

    def _best_match(self, leaf: Optional[_TreeNode], tokens: list[str]) -> tuple[Optional[int], float]:
        if leaf is None:
            return None, 0.0
        best_id, best_sim = None, 0.0
        for cid in leaf.cluster_ids:
            sim = self.similarity(self.templates[cid], tokens)
            if sim > best_sim:
                best_id, best_sim = cid, sim
        return best_id, best_sim

    def parse(self, content: str) -> tuple[int, str, list[str]]:
        """Mine one line: return (event_id, template_text, params).

        Always returns an id; an unmatched line creates a new template.
        """
        if self.frozen:
            raise DataError("catalog is frozen; use match() for read-only lookup")
        original = content.split()
        if not original:
            original = ["<empty>"]
        masked = [mask_token(t) for t in original]
        leaf = self._route(masked, create=True)
        cid, sim = self._best_match(leaf, masked)
        if cid is not None and sim >= self.sim_threshold:
            template = self.templates[cid]
            for i, token in enumerate(masked):
                if template[i] != token and template[i] != WILDCARD:
                    template[i] = WILDCARD
        else:
            cid = len(self.templates) + 1
            self.templates[cid] = list(masked)
            leaf.cluster_ids.append(cid)
            template = self.templates[cid]
        params = [original[i] for i, t in enumerate(template) if t == WILDCARD]
        return cid, " ".join(template), params

    def match(self, content: str) -> Optional[tuple[int, str, list[str]]]:
        """Read-only lookup against the existing templates (no mining)."""
        original = content.split()
        if not original:
            original = ["<empty>"]
        masked = [mask_token(t) for t in original]
        leaf = self._route(masked, create=False)
        cid, sim = self._best_match(leaf, masked)
        if cid is None or sim < self.sim_threshold:
            return None
        template = self.templates[cid]
        params = [original[i] for i, t in enumerate(template) if t == WILDCARD]
        return cid, " ".join(template), params

    def finalize(self) -> None:
        self.frozen = True

    def save(self, path, extra_meta: Optional[dict] = None) -> None:
        """Write the versioned, line-oriented catalog file."""
        path = Path(path)
        meta = dict(self.meta)
        if extra_meta:
            meta.update({str(k): str(v) for k, v in extra_meta.items()})
        try:
            with path.open("w", encoding="utf-8") as handle:
                handle.write(f"# {self.VERSION}\n")
                handle.write(f"# depth={self.depth}\n")
                handle.write(f"# sim_threshold={self.sim_threshold!r}\n")
                handle.write(f"# max_children={self.max_children}\n")
                for key in sorted(meta):
                    handle.write(f"# {key}={meta[key]}\n")
                for cid in sorted(self.templates):
                    handle.write(f"{cid}\t{self.template_text(cid)}\n")
        except OSError as exc:
            raise DataError(f"cannot write catalog {path}: {exc}") from exc

    @classmethod
    def load(cls, path) -> "TemplateCatalog":
        path = Path(path)
        if not path.exists():
            raise DataError(f"catalog file not found: {path}")
        depth, sim_threshold, max_children = 4, 0.4, 100
        meta: dict[str, str] = {}
        body: list[tuple[int, str]] = []
        with path.open("r", encoding="utf-8") as handle:
            first = handle.readline().strip()
            if first != f"# {cls.VERSION}":
                raise DataError(f"unrecognized catalog header {first!r} in {path}")
            for line in handle:
                line = line.rstrip("\n")
                if not line:
                    continue
                if line.startswith("# "):
                    key, _, value = line[2:].partition("=")
                    if key == "depth":
                        depth = int(value)
                    elif key == "sim_threshold":
                        sim_threshold = float(value)
                    elif key == "max_children":
                        max_children = int(value)
                    else:
                        meta[key] = value
                    continue
                cid_text, _, template = line.partition("\t")
                body.append((int(cid_text), template))
        catalog = cls(depth=depth, sim_threshold=sim_threshold, max_children=max_children)
        catalog.meta = meta
        for cid, template in sorted(body):
            tokens = template.split()
            catalog.templates[cid] = tokens
            leaf = catalog._route(tokens, create=True)
            leaf.cluster_ids.append(cid)
        catalog.finalize()
        return catalog


def parse_stream(lines: Iterable[RawLine], catalog: TemplateCatalog) -> Iterator[LogRecord]:
    """Mine templates over a raw-line stream, yielding one record per line."""
    for line in lines:
        event_id, template, params = catalog.parse(line.content)
        yield LogRecord(
            line_no=line.line_no,
            label=line.label,
            event_id=event_id,
            template_text=template,
            params=params,
            session_key=line.session_key,
        )


PARSED_TSV_VERSION = "parsed-log v1"


def write_parsed_tsv(path, records: Iterable[LogRecord], extra_meta: Optional[dict] = None) -> None:
    """TSV output: line_no, label(0/1), event_id, session_key."""
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as handle:
            handle.write(f"# {PARSED_TSV_VERSION}\n")
            for key in sorted(extra_meta or {}):
                handle.write(f"# {key}={extra_meta[key]}\n")
            for rec in records:
                session = rec.session_key or ""
                handle.write(f"{rec.line_no}\t{rec.label}\t{rec.event_id}\t{session}\n")
    except OSError as exc:
        raise DataError(f"cannot write parsed log {path}: {exc}") from exc


def read_parsed_tsv(path, catalog: Optional[TemplateCatalog] = None) -> list[LogRecord]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"parsed log file not found: {path}")
    records = []
    with path.open("r", encoding="utf-8") as handle:
        first = handle.readline().strip()
        if first != f"# {PARSED_TSV_VERSION}":
            raise DataError(f"unrecognized parsed-log header {first!r} in {path}")
        for line in handle:
            line = line.rstrip("\n")
            if not line or line.startswith("# "):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise DataError(f"malformed parsed-log row: {line!r}")
            line_no, label, event_id, session = parts
            eid = int(event_id)
            template = catalog.template_text(eid) if catalog is not None and eid in getattr(catalog, "templates", {}) else ""
            records.append(
                LogRecord(
                    line_no=int(line_no),
                    label=int(label),
                    event_id=eid,
                    template_text=template,
                    session_key=session or None,
                )
            )
    return records
