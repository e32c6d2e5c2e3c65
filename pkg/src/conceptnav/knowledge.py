"""Commonsense knowledge store: snapshot ingest, queries, optional remote client.

The canonical source of facts is an offline snapshot (UTF-8 text, one
``start<TAB>relation<TAB>end`` triple per line). A small client for a
ConceptNet-style HTTP API is provided for refreshing snapshots, but it is
off by default and never used by the navigation pipeline itself.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

DEFAULT_RELATIONS = (
    "AtLocation",
    "LocatedNear",
    "UsedFor",
    "PartOf",
    "HasA",
    "IsA",
    "MadeOf",
    "RelatedTo",
)

_WS = re.compile(r"\s+")


class MalformedLineError(ValueError):
    """A snapshot line that does not parse as a triple (strict mode only)."""

    def __init__(self, path, line_no, line):
        super().__init__(f"{path}:{line_no}: malformed triple line: {line!r}")
        self.line_no = line_no


class NetworkError(RuntimeError):
    """Remote knowledge API unreachable (after retries) or disabled."""


def normalize_label(label: str) -> str:
    """Lowercase, trim, collapse whitespace, underscores -> spaces."""
    return _WS.sub(" ", label.replace("_", " ").strip().lower())


@dataclass(frozen=True, order=True)
class KnowledgeTriple:
    """One (start, relation, end) fact."""

    start: str
    relation: str
    end: str

    def __post_init__(self):
        if not self.start or not self.end or not self.relation:
            raise ValueError("triple labels must be non-empty")
        if self.start == self.end:
            raise ValueError(f"degenerate triple: {self.start!r} -> {self.end!r}")

    def other(self, label: str) -> str:
        """The endpoint that is not `label` (end wins if both match)."""
        return self.start if self.end == label else self.end


@dataclass
class KnowledgeStore:
    """Immutable-after-ingest triple store indexed by both endpoints."""

    relation_set: tuple[str, ...]
    triples: frozenset[KnowledgeTriple] = field(default_factory=frozenset)
    index: dict[str, frozenset[KnowledgeTriple]] = field(default_factory=dict)
    skipped: int = 0

    def __len__(self):
        return len(self.triples)

    def __eq__(self, other):
        if not isinstance(other, KnowledgeStore):
            return NotImplemented
        return (
            self.relation_set == other.relation_set
            and self.triples == other.triples
        )

    def incident(self, label: str) -> frozenset[KnowledgeTriple]:
        """All triples touching `label` as start or end."""
        return self.index.get(normalize_label(label), frozenset())

    def linked(self, a: str, b: str) -> bool:
        """True iff some stored triple connects labels `a` and `b`."""
        a, b = normalize_label(a), normalize_label(b)
        for t in self.index.get(a, ()):  # smaller of the two would be nicer; fine
            if t.start == b or t.end == b:
                return True
        return False

    def relation_counts(self) -> dict[str, int]:
        counts = {r: 0 for r in self.relation_set}
        for t in self.triples:
            counts[t.relation] += 1
        return counts


def _build_store(triples: Iterable[KnowledgeTriple], relation_set, skipped=0):
    tset = frozenset(triples)
    index: dict[str, set[KnowledgeTriple]] = {}
    for t in tset:
        index.setdefault(t.start, set()).add(t)
        index.setdefault(t.end, set()).add(t)
    return KnowledgeStore(
        relation_set=tuple(relation_set),
        triples=tset,
        index={k: frozenset(v) for k, v in index.items()},
        skipped=skipped,
    )


def parse_triple_line(line: str, relation_set) -> KnowledgeTriple | None:
    """Parse one TAB-separated line; None if its relation is filtered out.

    Raises ValueError on structurally bad lines.
    """
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 3:
        raise ValueError(f"expected 3 tab-separated fields, got {len(parts)}")
    start, relation, end = parts
    start = normalize_label(start)
    end = normalize_label(end)
    relation = relation.strip()
    if not start or not end or not relation:
        raise ValueError("empty field")
    if relation not in relation_set:
        return None
    if start == end:
        raise ValueError(f"start equals end: {start!r}")
    return KnowledgeTriple(start, relation, end)


def ingest_snapshot(path, relation_set=DEFAULT_RELATIONS, strict=False) -> KnowledgeStore:
    """Load a snapshot file into a KnowledgeStore.

    Lines whose relation is outside `relation_set` are silently dropped
    (they are well-formed, just filtered). Malformed lines raise
    MalformedLineError in strict mode and are counted in `store.skipped`
    otherwise. Blank lines are ignored.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"snapshot not found: {path}")
    triples: list[KnowledgeTriple] = []
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                triple = parse_triple_line(line, relation_set)
            except ValueError:
                if strict:
                    raise MalformedLineError(path, line_no, line.rstrip("\n"))
                skipped += 1
                continue
            if triple is not None:
                triples.append(triple)
    return _build_store(triples, relation_set, skipped=skipped)


def query_by_objects(store: KnowledgeStore, objects) -> list[KnowledgeTriple]:
    """Triples whose start or end is one of `objects`, sorted for determinism."""
    hits: set[KnowledgeTriple] = set()
    for obj in objects:
        hits.update(store.incident(obj))
    return sorted(hits)


def _default_transport(url: str, params: dict, timeout: float):
    import requests

    resp = requests.get(url, params=params, timeout=timeout)
    resp.raise_for_status()
    return resp.json()


def _parse_remote_edges(payload: dict, relation_set) -> list[KnowledgeTriple]:
    triples = []
    for edge in payload.get("edges", []):
        try:
            start = normalize_label(edge["start"]["label"])
            end = normalize_label(edge["end"]["label"])
            relation = edge["rel"]["label"]
        except (KeyError, TypeError):
            continue  # skip unparseable records
        if relation not in relation_set or not start or not end or start == end:
            continue
        triples.append(KnowledgeTriple(start, relation, end))
    return triples


def _cache_file(cache_dir: Path, concept: str, relation: str) -> Path:
    safe = concept.replace(" ", "_")
    return cache_dir / f"{safe}__{relation}.json"


def fetch_remote(
    concepts,
    relation_set=DEFAULT_RELATIONS,
    endpoint="https://api.conceptnet.io/query",
    cache_dir="kb_cache",
    *,
    allow_network=False,
    transport: Callable | None = None,
    max_retries=3,
    backoff=0.5,
    timeout=10.0,
) -> list[KnowledgeTriple]:
    """Fetch triples for each (concept, relation) pair from a remote API.

    Responses are cached on disk as one JSON document per pair; cached
    pairs are served without touching the network, byte-identically.
    `transport(url, params, timeout) -> payload dict` is injectable for
    testing; the default uses requests. Network use requires
    `allow_network=True`.
    """
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    transport = transport or _default_transport

    out: list[KnowledgeTriple] = []
    seen: set[KnowledgeTriple] = set()
    for concept in sorted(normalize_label(c) for c in concepts):
        for relation in relation_set:
            cache_path = _cache_file(cache_dir, concept, relation)
            if cache_path.exists():
                payload = json.loads(cache_path.read_text(encoding="utf-8"))
            else:
                if not allow_network:
                    raise NetworkError(
                        f"no cache for ({concept!r}, {relation!r}) and network disabled"
                    )
                payload = _fetch_with_retries(
                    transport, endpoint, concept, relation, max_retries, backoff, timeout
                )
                # atomic write: temp file in the same dir, then rename
                fd, tmp = tempfile.mkstemp(dir=cache_dir, suffix=".tmp")
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    json.dump(payload, fh, sort_keys=True)
                os.replace(tmp, cache_path)
            for triple in _parse_remote_edges(payload, relation_set):
                if triple not in seen:
                    seen.add(triple)
                    out.append(triple)
    return out


def _fetch_with_retries(transport, endpoint, concept, relation, max_retries, backoff, timeout):
    params = {"node": f"/c/en/{concept.replace(' ', '_')}", "rel": f"/r/{relation}"}
    last_err = None
    for attempt in range(max_retries):
        try:
            return transport(endpoint, params, timeout)
        except Exception as err:  # noqa: BLE001 - any transport failure retries
            last_err = err
            if attempt + 1 < max_retries:
                time.sleep(backoff * (2**attempt))
    raise NetworkError(
        f"remote knowledge API unreachable after {max_retries} attempts: {last_err}"
    )
