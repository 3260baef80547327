"""Corpus ingestion: load raw posts, apply cleaning rules, emit canonical records.

Cleaning rewrites, in order: curly apostrophes normalized, user mentions
anonymized to the literal token ``@username``, emoji code points swapped for a
bundled textual descriptor, whitespace collapsed. Posts containing links are
rejected outright; posts with five or fewer whitespace tokens after rewriting
are rejected as too short.
"""

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Iterator, Optional

from .util import AuditError

URL_RE = re.compile(r"(?i)\b(?:https?://|www\.)\S+")
MENTION_RE = re.compile(r"@\w+")
MIN_TOKENS = 6  # posts with <= 5 tokens are dropped


class CorpusError(AuditError):
    pass


class DuplicateIdError(CorpusError):
    def __init__(self, post_id: str, lineno: int):
        super().__init__(f"duplicate post id {post_id!r} at line {lineno}")
        self.post_id = post_id


@dataclass(frozen=True)
class RawPost:
    id: str
    text: str
    latitude: Optional[float] = None
    longitude: Optional[float] = None
    timestamp: Optional[str] = None


@dataclass(frozen=True)
class CleanPost:
    id: str
    text: str
    token_count: int
    latitude: Optional[float] = None
    longitude: Optional[float] = None
    timestamp: Optional[str] = None


@dataclass(frozen=True)
class Rejected:
    id: str
    reason: str  # "too_short" | "contains_link"


@dataclass(frozen=True)
class CleanConfig:
    min_tokens: int = MIN_TOKENS
    emoji_table: Optional[dict[str, str]] = None  # char -> descriptor slug


def _load_emoji_table() -> dict[str, str]:
    table: dict[str, str] = {}
    data = resources.files("dialect_audit.data").joinpath("emoji_names.tsv")
    for line in data.read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        cp, slug = line.split("\t")
        table[chr(int(cp, 16))] = slug
    # zero-width joiner and variation selectors are dropped, not described
    for cp in (0x200D, 0xFE0E, 0xFE0F):
        table[chr(cp)] = ""
    return table


_EMOJI_TABLE: Optional[dict[str, str]] = None


def emoji_table() -> dict[str, str]:
    global _EMOJI_TABLE
    if _EMOJI_TABLE is None:
        _EMOJI_TABLE = _load_emoji_table()
    return _EMOJI_TABLE


def _rewrite_emoji(text: str, table: dict[str, str]) -> str:
    if not any(ch in table for ch in text):
        return text
    out = []
    for ch in text:
        if ch in table:
            slug = table[ch]
            out.append(f" :{slug}: " if slug else " ")
        else:
            out.append(ch)
    return "".join(out)


def tokenize(text: str) -> list[str]:
    """Whitespace tokenization; the length rule counts these tokens."""
    return text.split()


def clean(post: RawPost, cfg: CleanConfig | None = None) -> CleanPost | Rejected:
    """Apply the cleaning rules to one post.

    Link-bearing posts are rejected before any rewriting (the corpus excludes
    them rather than stripping the URL); the short-post check runs on the
    rewritten text so the mention placeholder and emoji descriptors count.
    """
    cfg = cfg or CleanConfig()
    if URL_RE.search(post.text):
        return Rejected(post.id, "contains_link")
    text = post.text.replace("’", "'").replace("‘", "'")
    text = MENTION_RE.sub("@username", text)
    text = _rewrite_emoji(text, cfg.emoji_table or emoji_table())
    text = " ".join(text.split())
    tokens = tokenize(text)
    if len(tokens) < cfg.min_tokens:
        return Rejected(post.id, "too_short")
    return CleanPost(
        id=post.id,
        text=text,
        token_count=len(tokens),
        latitude=post.latitude,
        longitude=post.longitude,
        timestamp=post.timestamp,
    )


def _parse_raw(rec: dict, lineno: int) -> RawPost:
    if "id" not in rec or rec["id"] in (None, ""):
        raise CorpusError(f"line {lineno}: record missing id")
    if "text" not in rec or not isinstance(rec["text"], str):
        raise CorpusError(f"line {lineno}: record missing text")
    lat = rec.get("lat")
    lon = rec.get("lon")
    if lat is not None and not (-90.0 <= float(lat) <= 90.0):
        raise CorpusError(f"line {lineno}: latitude {lat} out of range")
    if lon is not None and not (-180.0 <= float(lon) <= 180.0):
        raise CorpusError(f"line {lineno}: longitude {lon} out of range")
    return RawPost(
        id=str(rec["id"]),
        text=rec["text"],
        latitude=None if lat is None else float(lat),
        longitude=None if lon is None else float(lon),
        timestamp=rec.get("ts"),
    )


def load_corpus(
    path: str | Path,
    on_malformed: Optional[Callable[[int, str], None]] = None,
) -> Iterator[RawPost]:
    """Yield raw posts in file order.

    Malformed lines raise CorpusError unless an ``on_malformed(lineno, reason)``
    collector is supplied, in which case they are reported and skipped.
    Duplicate ids always raise.
    """
    seen: set[str] = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                if not isinstance(rec, dict):
                    raise CorpusError(f"line {lineno}: record is not an object")
                post = _parse_raw(rec, lineno)
            except DuplicateIdError:
                raise
            except CorpusError as e:
                if on_malformed is None:
                    raise
                on_malformed(lineno, str(e))
                continue
            except (json.JSONDecodeError, ValueError, TypeError) as e:
                if on_malformed is None:
                    raise CorpusError(f"line {lineno}: {e}") from e
                on_malformed(lineno, f"line {lineno}: {e}")
                continue
            if post.id in seen:
                raise DuplicateIdError(post.id, lineno)
            seen.add(post.id)
            yield post


def clean_post_to_record(post: CleanPost) -> dict:
    rec: dict = {"id": post.id, "text": post.text, "token_count": post.token_count}
    if post.latitude is not None:
        rec["lat"] = post.latitude
    if post.longitude is not None:
        rec["lon"] = post.longitude
    if post.timestamp is not None:
        rec["ts"] = post.timestamp
    return rec


def record_to_clean_post(rec: dict) -> CleanPost:
    return CleanPost(
        id=str(rec["id"]),
        text=rec["text"],
        token_count=int(rec["token_count"]),
        latitude=rec.get("lat"),
        longitude=rec.get("lon"),
        timestamp=rec.get("ts"),
    )
