"""Emotion label taxonomy: fine-grained framework labels onto eight primaries.

The mapping lives in a tab-separated data file so it can be audited and
overridden per run; the file hash travels into report headers.
"""

import importlib.resources
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .util import AuditError, sha256_file

PRIMARY_EMOTIONS = frozenset(
    {"love", "joy", "surprise", "anger", "sadness", "fear", "disgust", "neutral"}
)

# published label sets used for totality validation
GOEMOTIONS_27 = frozenset({
    "admiration", "amusement", "anger", "annoyance", "approval", "caring",
    "confusion", "curiosity", "desire", "disappointment", "disapproval",
    "disgust", "embarrassment", "excitement", "fear", "gratitude", "grief",
    "joy", "love", "nervousness", "optimism", "pride", "realization",
    "relief", "remorse", "sadness", "surprise",
})
PLUTCHIK_8 = frozenset({
    "anger", "anticipation", "disgust", "fear", "joy", "sadness",
    "surprise", "trust",
})
_FRAMEWORK_LABEL_SETS = {
    "goemotions": GOEMOTIONS_27,
    "plutchik": PLUTCHIK_8,
    "primary": PRIMARY_EMOTIONS,
}


class TaxonomyError(AuditError):
    pass


@dataclass(frozen=True)
class TaxonomyMap:
    entries: dict  # source label -> primary
    frameworks: dict  # source label -> tuple of framework tags
    source_hash: str

    def __len__(self) -> int:
        return len(self.entries)


def map_label(label: str, tax: TaxonomyMap) -> str:
    key = label.strip().lower()
    if key not in tax.entries:
        raise TaxonomyError(f"unknown emotion label {key!r}")
    return tax.entries[key]


def default_taxonomy_path() -> Path:
    ref = importlib.resources.files("dialect_audit").joinpath(
        "data/emotion_taxonomy.tsv")
    return Path(str(ref))


def load_taxonomy(path: Optional[Path] = None) -> TaxonomyMap:
    """Parse and validate a taxonomy file.

    A source label may appear only once; framework totality is enforced for
    the frameworks whose published label sets are known. An empty file yields
    an empty (valid) map.
    """
    p = Path(path) if path is not None else default_taxonomy_path()
    entries: dict = {}
    frameworks: dict = {}
    with open(p, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise TaxonomyError(
                    f"{p.name}:{lineno}: expected 3 tab-separated fields, "
                    f"got {len(parts)}")
            label, primary, fw_field = (x.strip().lower() for x in parts)
            if primary not in PRIMARY_EMOTIONS:
                raise TaxonomyError(
                    f"{p.name}:{lineno}: unknown primary {primary!r} for "
                    f"label {label!r}")
            if label in entries:
                raise TaxonomyError(
                    f"{p.name}:{lineno}: duplicate source label {label!r}")
            tags = tuple(t.strip() for t in fw_field.split(",") if t.strip())
            if not tags:
                raise TaxonomyError(
                    f"{p.name}:{lineno}: label {label!r} declares no framework")
            entries[label] = primary
            frameworks[label] = tags
    declared = {t for tags in frameworks.values() for t in tags}
    for fw in sorted(declared):
        expected = _FRAMEWORK_LABEL_SETS.get(fw)
        if expected is None:
            continue  # unknown frameworks are not checkable
        missing = expected - set(entries)
        if missing:
            raise TaxonomyError(
                f"{p.name}: framework {fw!r} missing labels: "
                f"{', '.join(sorted(missing))}")
    return TaxonomyMap(entries=entries, frameworks=frameworks,
                       source_hash=sha256_file(p))
