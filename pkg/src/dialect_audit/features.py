"""Rule-based detectors for the dialect feature registry.

Each detector returns a raw match count over one annotated document; density
normalization happens downstream so the detectors stay integer-exact. Matching
is case-insensitive and token-anchored, with edge punctuation stripped before
lexical comparison.
"""

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional

from .tagging import POSSESSIVES, AnnotatedDoc, Token
from .util import AuditError

EXTERNAL_PREFIX = "ext:"


class FeatureError(AuditError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    post_id: str
    counts: dict  # feature name -> non-negative int
    token_count: int


_ABBREVIATIONS = {"iont", "iono", "ioneem", "sumn", "talmbout"}
_AINT = {"ain't", "aint", "yeen"}
_SLANG = {"jawn", "finna", "doe", "nawl", "nun", "sholl", "tryna", "cuh"}
_N_USE_RE = re.compile(r"(?i)^(?:nigga(?:s)?|n\*gga(?:s)?)$")
_ASS_COMPOUND_RE = re.compile(r"^[\w'*]+-ass$")
_SUBJ_3SG = {"he", "she", "it"}
_COPULA_SUBJECTS = {"he", "she", "they", "we", "you", "i", "it"}
_HABITUAL_BLOCKERS = {"to", "will", "would", "can", "could", "should", "must",
                      "might", "may", "gonna"}
# Standard English allows these after a third-singular subject, so a bare
# match would be noise rather than nonstandard agreement. Negated/contracted
# auxiliaries stay OUT of this set except the ain't family, which the aint
# detector owns.
_AGREEMENT_NEUTRAL = {
    "be", "am", "is", "are", "was", "were", "been", "being", "can", "could",
    "will", "would", "shall", "should", "may", "might", "must", "ain't",
    "aint", "yeen", "gonna", "gon", "wanna", "gotta", "lemme", "gimme",
    "imma", "ima", "let's", "cant", "wont", "didnt", "doesnt", "isnt",
    "wasnt", "couldnt", "shouldnt", "wouldnt",
}
_PLURAL_IRREGULAR = {"people", "men", "women", "children", "folks", "police"}
# Pseudo-auxiliary aspect markers: untagged by the lexicon (the copula
# detector needs them in noun position) but never subjects themselves.
_ASPECT_MARKERS = {"finna", "tryna", "boutta", "bouta"}

_EMOJI_TOKEN_RE = re.compile(r"^:[a-z0-9_'-]+:$")


def core(token: Token) -> str:
    """Lower-cased token with edge punctuation stripped (emoji slugs kept whole)."""
    if _EMOJI_TOKEN_RE.match(token.lower):
        return token.lower
    return token.lower.strip("!?.,;:\"()[]{}<>~*^")


def _count_abbreviations(doc: AnnotatedDoc) -> int:
    cores = [core(t) for t in doc.tokens]
    n = sum(1 for c in cores if c in _ABBREVIATIONS)
    n += sum(1 for a, b in zip(cores, cores[1:]) if a == "talm" and b == "bout")
    return n


def _count_aint(doc: AnnotatedDoc) -> int:
    return sum(1 for t in doc.tokens if core(t) in _AINT)


def _count_ass_camo(doc: AnnotatedDoc) -> int:
    # Reading of the dependency pattern: the pseudo-pronoun use is "ass" with
    # a possessive attached to it; the intensifier use is a hyphenated
    # "<word>-ass" compound modifying what follows.
    n = 0
    for t in doc.tokens:
        c = core(t)
        if c == "ass":
            prev = doc.tokens[t.index - 1] if t.index > 0 else None
            if prev is not None and (
                (prev.dep == "POSS" and prev.head == t.index)
                or core(prev) in POSSESSIVES
            ):
                n += 1
        elif _ASS_COMPOUND_RE.match(c):
            n += 1
    return n


def _count_completive_done(doc: AnnotatedDoc) -> int:
    n = 0
    for t in doc.tokens[:-1]:
        if core(t) == "done" and doc.tokens[t.index + 1].pos == "VERB_PAST":
            n += 1
    return n


def _count_continuative_steady(doc: AnnotatedDoc) -> int:
    n = 0
    for t in doc.tokens[:-1]:
        if core(t) == "steady" and doc.tokens[t.index + 1].pos != "NOUN":
            n += 1
    return n


_COPULA_CONTINUATIONS = {"NOUN", "ADJ", "VERB_GER"}


def _count_copula_deletion(doc: AnnotatedDoc) -> int:
    n = 0
    for t in doc.tokens[:-1]:
        if core(t) not in _COPULA_SUBJECTS:
            continue
        nxt = doc.tokens[t.index + 1]
        if nxt.pos in _COPULA_CONTINUATIONS:
            n += 1
        elif nxt.pos == "DET" and t.index + 2 < len(doc.tokens) \
                and doc.tokens[t.index + 2].pos == "NOUN":
            n += 1
    return n


def _count_habitual_be(doc: AnnotatedDoc) -> int:
    n = 0
    for t in doc.tokens:
        if core(t) != "be" or t.index == 0:
            continue
        prev = doc.tokens[t.index - 1]
        if prev.pos not in ("PRON", "NOUN"):
            continue
        window = doc.tokens[max(0, t.index - 2):t.index]
        if any(core(w) in _HABITUAL_BLOCKERS for w in window):
            continue
        n += 1
    return n


def _count_n_use(doc: AnnotatedDoc) -> int:
    return sum(1 for t in doc.tokens if _N_USE_RE.match(core(t)))


def _count_slang(doc: AnnotatedDoc) -> int:
    return sum(1 for t in doc.tokens if core(t) in _SLANG)


def _is_singular_noun_subject(t: Token) -> bool:
    c = core(t)
    return (t.pos == "NOUN" and not c.endswith("s")
            and c not in _PLURAL_IRREGULAR and c not in _ASPECT_MARKERS
            and not c.startswith(("@", "#", ":")))


def _count_subj_verb_agreement(doc: AnnotatedDoc) -> int:
    n = 0
    for t in doc.tokens[:-1]:
        c = core(t)
        if not (c in _SUBJ_3SG or _is_singular_noun_subject(t)):
            continue
        nxt = doc.tokens[t.index + 1]
        nc = core(nxt)
        if nc in ("don't", "dont"):
            n += 1
        elif nxt.pos == "VERB" and not nc.endswith("s") \
                and nc not in _AGREEMENT_NEUTRAL and "'" not in nc:
            n += 1
    return n


DETECTORS: dict[str, Callable[[AnnotatedDoc], int]] = {
    "abbreviations": _count_abbreviations,
    "aint": _count_aint,
    "ass_camo": _count_ass_camo,
    "completive_done": _count_completive_done,
    "continuative_steady": _count_continuative_steady,
    "copula_deletion": _count_copula_deletion,
    "habitual_be": _count_habitual_be,
    "n_use": _count_n_use,
    "slang": _count_slang,
    "subj_verb_agreement": _count_subj_verb_agreement,
}

BUILTIN_FEATURES: tuple[str, ...] = tuple(sorted(DETECTORS))


def detect_all(doc: AnnotatedDoc, enabled: Optional[Iterable[str]] = None) -> FeatureVector:
    """Run every enabled built-in detector over one document."""
    names = sorted(enabled) if enabled is not None else list(BUILTIN_FEATURES)
    if not names:
        raise FeatureError("enabled feature set is empty")
    counts = {}
    for name in names:
        if name not in DETECTORS:
            raise FeatureError(f"unknown feature {name!r}")
        counts[name] = DETECTORS[name](doc)
    return FeatureVector(post_id=doc.post_id, counts=counts,
                         token_count=len(doc.tokens))


def import_external_scores(
    path: str | Path,
    known_ids: Optional[set[str]] = None,
) -> dict[tuple[str, str], float]:
    """Load pre-computed scores: tab-separated ``post_id  feature  value``.

    Feature names must carry the ``ext:`` prefix; values are stored verbatim
    and participate in normalization alongside detector densities.
    """
    out: dict[tuple[str, str], float] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FeatureError(f"line {lineno}: expected 3 tab-separated fields")
            post_id, feature, value = parts
            if not feature.startswith(EXTERNAL_PREFIX):
                raise FeatureError(
                    f"line {lineno}: external feature {feature!r} must be "
                    f"prefixed {EXTERNAL_PREFIX!r}")
            if known_ids is not None and post_id not in known_ids:
                raise FeatureError(f"line {lineno}: unknown post id {post_id!r}")
            try:
                out[(post_id, feature)] = float(value)
            except ValueError as e:
                raise FeatureError(f"line {lineno}: non-numeric value {value!r}") from e
    return out
