"""Local image corpus backing column population.

Columns are filled either randomly or from a spoken request such as
"show me pictures of dogs". Images live on disk under a corpus root next
to a ``manifest.json`` (a JSON array of ``{"path": ..., "tags": [...]}``);
the hub only ever reads the manifest, the display clients fetch pixels
over HTTP at ``/img/<path>``.
"""

from __future__ import annotations

import itertools
import json
import random
import re
import struct
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence, Set

MANIFEST_NAME = "manifest.json"
DEFAULT_QUERY_LIMIT = 12  # visible cards per column x 3


class CorpusUnavailable(Exception):
    """Raised when the manifest is missing or cannot be loaded whole."""


class UnparseableUtterance(Exception):
    """Raised when no usable topic can be extracted from a transcript."""


@dataclass(frozen=True)
class CorpusEntry:
    path: str
    tags: frozenset[str]


@dataclass(frozen=True)
class CorpusManifest:
    entries: tuple[CorpusEntry, ...]
    version: int = 1

    def __post_init__(self) -> None:
        paths = [e.path for e in self.entries]
        if len(set(paths)) != len(paths):
            raise CorpusUnavailable("duplicate paths in manifest")
        for e in self.entries:
            if not e.tags:
                raise CorpusUnavailable(f"entry {e.path!r} has no tags")


@dataclass
class ImageCard:
    """One image instance on the wall.

    ``image_id`` is unique per instance (two cards may share a
    ``source_ref`` when the corpus is smaller than a fill request).
    """

    image_id: str
    source_ref: str
    tags: Set[str]
    scale: float = 1.0
    selected_by: Optional[str] = None

    SCALE_MIN = 0.25
    SCALE_MAX = 4.0

    def clamped(self, scale: float) -> float:
        return min(max(scale, self.SCALE_MIN), self.SCALE_MAX)


@dataclass(frozen=True)
class Query:
    topic: str
    limit: int = DEFAULT_QUERY_LIMIT

    def __post_init__(self) -> None:
        if not self.topic:
            raise UnparseableUtterance("empty topic")


_QUERY_RE = re.compile(
    r"^(?:show\s+me\s+)?(?:pic(?:ture)?s?|photos?|images?)\s+of\s*(?P<topic>.*)$"
)


def parse_query(transcript: str, limit: int = DEFAULT_QUERY_LIMIT) -> Query:
    """Extract the requested topic from a voice transcript.

    Accepted forms: "show me pictures of X", "pictures of X", or a bare
    noun phrase. Case and punctuation are ignored. A request prefix with
    nothing after "of" is rejected rather than treated as a noun phrase.
    """
    text = re.sub(r"[^a-z0-9\s]+", "", transcript.lower())
    text = re.sub(r"\s+", " ", text).strip()
    if not text:
        raise UnparseableUtterance(f"no topic in {transcript!r}")
    m = _QUERY_RE.match(text)
    topic = m.group("topic").strip() if m else text
    if not topic:
        raise UnparseableUtterance(f"no topic in {transcript!r}")
    return Query(topic=topic, limit=limit)


def topic_matches(topic: str, tags: Iterable[str]) -> bool:
    """Substring tag match, both directions ("dog" matches tag "dogs")."""
    return any(topic in t or t in topic for t in tags)


def load_manifest(root: Path | str) -> CorpusManifest:
    """Read ``manifest.json`` under ``root``; all-or-nothing."""
    path = Path(root) / MANIFEST_NAME
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise CorpusUnavailable(f"no manifest at {path}") from e
    except (OSError, json.JSONDecodeError) as e:
        raise CorpusUnavailable(f"unreadable manifest at {path}: {e}") from e
    if not isinstance(raw, list):
        raise CorpusUnavailable("manifest must be a JSON array")
    entries = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict) or "path" not in item or "tags" not in item:
            raise CorpusUnavailable(f"manifest entry {i} malformed")
        tags = frozenset(str(t).lower() for t in item["tags"])
        entries.append(CorpusEntry(path=str(item["path"]), tags=tags))
    return CorpusManifest(entries=tuple(entries))


class ContentProvider:
    """Deterministic card source over a loaded manifest.

    Every output is a pure function of (manifest, seed, request); repeated
    identical requests shuffle identically, which keeps recorded runs
    replayable.
    """

    def __init__(
        self,
        manifest: CorpusManifest,
        seed: int = 0,
        id_factory: Optional[Callable[[], str]] = None,
    ) -> None:
        if not manifest.entries:
            raise CorpusUnavailable("empty corpus")
        self.manifest = manifest
        self.seed = seed
        counter = itertools.count()
        self._id_factory = id_factory or (lambda: f"c{next(counter)}")

    def _mint(self, entries: Sequence[CorpusEntry]) -> List[ImageCard]:
        return [
            ImageCard(image_id=self._id_factory(), source_ref=e.path, tags=set(e.tags))
            for e in entries
        ]

    def fetch(self, query: Query) -> List[ImageCard]:
        """Cards matching the query topic, seeded-shuffled, up to its limit."""
        matching = [e for e in self.manifest.entries if topic_matches(query.topic, e.tags)]
        rng = random.Random(f"{self.seed}:fetch:{query.topic}")
        rng.shuffle(matching)
        return self._mint(matching[: query.limit])

    def random_fill(
        self, n: int, seed: int | str, exclude_tags: Iterable[str] = ()
    ) -> List[ImageCard]:
        """``n`` cards, without replacement while the corpus allows it.

        ``exclude_tags`` keeps named content out of the draw (used to stage
        game rounds whose answer image must not be pre-placed).
        """
        if n < 0:
            raise ValueError("n must be >= 0")
        banned = frozenset(exclude_tags)
        entries = [e for e in self.manifest.entries if not (e.tags & banned)]
        if not entries:
            raise CorpusUnavailable("no corpus entries left after exclusions")
        rng = random.Random(f"{self.seed}:fill:{seed}")
        if n <= len(entries):
            picked = rng.sample(entries, n)
        else:
            picked = rng.choices(entries, k=n)
        return self._mint(picked)

    def entries_tagged(self, tags: Iterable[str]) -> List[CorpusEntry]:
        wanted = frozenset(tags)
        return [e for e in self.manifest.entries if e.tags & wanted]


# --- demo corpus -------------------------------------------------------------

DEMO_TOPICS = (
    "avocado", "tomato", "lemon", "bread", "cheese", "basil",
    "dogs", "cats", "mountains", "boats", "flowers", "bicycles",
)


def _solid_png(rgb: tuple[int, int, int], size: int = 96) -> bytes:
    """Minimal single-color PNG, stdlib only."""
    def chunk(tag: bytes, data: bytes) -> bytes:
        return (
            struct.pack(">I", len(data))
            + tag
            + data
            + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)
        )

    row = b"\x00" + bytes(rgb) * size
    ihdr = struct.pack(">IIBBBBB", size, size, 8, 2, 0, 0, 0)
    idat = zlib.compress(row * size)
    return (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", ihdr)
        + chunk(b"IDAT", idat)
        + chunk(b"IEND", b"")
    )


def make_demo_corpus(
    root: Path | str,
    topics: Sequence[str] = DEMO_TOPICS,
    per_topic: int = 4,
    write_images: bool = True,
) -> CorpusManifest:
    """Generate a small tagged corpus of solid-color images plus manifest."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    items = []
    for ti, topic in enumerate(topics):
        for i in range(per_topic):
            rel = f"{topic}/{topic}_{i}.png"
            if write_images:
                img = root / rel
                img.parent.mkdir(parents=True, exist_ok=True)
                rgb = ((ti * 47 + i * 13) % 256, (ti * 91) % 256, (i * 67 + 40) % 256)
                img.write_bytes(_solid_png(rgb))
            items.append({"path": rel, "tags": [topic]})
    (root / MANIFEST_NAME).write_text(json.dumps(items, indent=1), encoding="utf-8")
    return load_manifest(root)
