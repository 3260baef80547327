"""Per-token annotations for the feature detectors.

The internal tagger is a closed-class lexicon plus suffix heuristics; it only
needs the coarse distinctions the detectors consume, and staying self-contained
avoids leaning on parsers known to degrade on nonstandard orthography.
Dependency relations are limited to the shallow local rules the ass-camouflage
detector needs (possessive adjacency, hyphenated compounds); richer parses can
be supplied through the import path.
"""

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .ingest import CleanPost, tokenize
from .util import AuditError

TAGGER_VERSION = "heuristic-1"

POS_TAGS = {"NOUN", "PRON", "VERB", "VERB_PAST", "VERB_GER", "ADJ", "ADV",
            "DET", "ADP", "PUNCT", "NUM", "OTHER"}
DEP_RELS = {"POSS", "DOBJ", "COMPOUND", "AMOD", "PUNCT_REL", "OTHER"}


class AnnotationError(AuditError):
    pass


@dataclass(frozen=True)
class Token:
    index: int
    surface: str
    lower: str
    pos: str
    dep: Optional[str] = None
    head: Optional[int] = None


@dataclass(frozen=True)
class AnnotatedDoc:
    post_id: str
    tokens: tuple[Token, ...]
    source: str = "internal"  # internal | imported


# ---------------------------------------------------------------------------
# Lexicons. Single-tag by design: the detectors tolerate coarse errors but two
# of them key on the exact tag of the token after a subject pronoun, so the
# entries below are chosen to keep those patterns honest.
# ---------------------------------------------------------------------------

PRONOUNS = {
    "i", "you", "he", "she", "it", "we", "they", "me", "him", "us", "them",
    "this", "that", "these", "those", "who", "what", "somebody", "someone",
    "nobody", "everybody", "anybody", "yall", "y'all",
}
POSSESSIVES = {"my", "your", "his", "her", "its", "our", "their", "ur", "yo"}
DETERMINERS = {"a", "an", "the", "some", "any", "no", "every", "each",
               "another", "da", "dis", "dat"}
ADPOSITIONS = {
    "in", "on", "at", "to", "from", "with", "for", "of", "by", "about",
    "into", "over", "under", "out", "off", "up", "down", "after", "before",
    "through", "between", "around", "near", "without", "against", "till",
    "until", "since", "like",
}
ADVERBS = {
    "not", "never", "always", "really", "very", "too", "so", "just",
    "already", "still", "steady", "now", "then", "here", "there", "today",
    "tomorrow", "tonight", "yesterday", "soon", "again", "maybe", "often",
    "sometimes", "usually", "even", "only", "also", "back", "away", "outside",
    "inside", "everywhere", "anymore", "fr", "rn", "lowkey", "highkey",
    "hella", "deadass", "sholl", "doe", "tho", "though", "forever", "ever",
    "online", "together", "somewhere", "instead", "downtown",
}
ADJECTIVES = {
    "nice", "good", "bad", "happy", "sad", "mad", "angry", "glad", "cool",
    "cold", "hot", "warm", "tired", "crazy", "real", "fake", "new", "old",
    "big", "small", "little", "lil", "pretty", "ugly", "fine", "funny",
    "weird", "wild", "dumb", "smart", "stupid", "lazy", "busy", "free",
    "rich", "broke", "hungry", "thirsty", "sick", "drunk", "high", "low",
    "fast", "slow", "hard", "soft", "easy", "late", "early", "young",
    "silly", "lit", "salty", "petty", "bold", "proud", "scared", "afraid",
    "ready", "sorry", "sure", "true", "wrong", "right", "okay", "ok",
    "dead", "alive", "strong", "weak", "poor", "loud", "quiet", "clean",
    "dirty", "sweet", "fresh", "grown", "whole", "same", "different",
    "last", "next", "best", "worst", "better", "worse", "long", "short",
    "full", "empty", "cute", "fly",
}
# Base, auxiliary, and modal verbs. Pronoun+copula and pronoun+modal
# contractions sit here too: the verb half is what the detectors care about.
VERBS = {
    "be", "am", "is", "are", "was", "were", "been", "being", "do", "does",
    "have", "has", "can", "could", "will", "would", "shall", "should", "may",
    "might", "must", "go", "goes", "get", "gets", "know", "think", "want",
    "need", "like", "love", "hate", "say", "says", "see", "look", "make",
    "take", "come", "feel", "let", "put", "keep", "give", "tell", "call",
    "try", "ask", "work", "play", "run", "move", "live", "stay", "talk",
    "walk", "eat", "drink", "sleep", "sit", "stand", "leave", "stop",
    "start", "help", "wait", "watch", "listen", "believe", "remember",
    "forget", "miss", "mean", "care", "happen", "turn", "show", "hear",
    "win", "lose", "pay", "buy", "sell", "send", "spend", "bring", "catch",
    "teach", "fight", "hold", "wear", "drive", "ride", "sing", "dance",
    "laugh", "cry", "smile", "act", "bet", "hit", "cut", "quit", "front",
    "trip", "chill", "hang", "pull", "post", "text", "hate", "swear",
    "gonna", "gon", "gotta", "wanna", "lemme", "gimme", "imma", "ima",
    "ain't", "aint", "yeen", "don't", "dont", "can't", "cant", "won't",
    "wont", "didn't", "didnt", "doesn't", "doesnt", "isn't", "isnt",
    "wasn't", "wasnt", "couldn't", "shouldn't", "wouldn't", "i'm", "i'll",
    "i'd", "i've", "you're", "you'll", "you've", "he's", "he'll", "she's",
    "she'll", "it's", "it'll", "we're", "we'll", "we've", "they're",
    "they'll", "they've", "that's", "there's", "what's", "who's", "let's",
}
IRREGULAR_PAST = {
    "did", "done", "went", "gone", "got", "gotten", "said", "told", "took",
    "taken", "came", "saw", "seen", "made", "found", "knew", "known",
    "thought", "ate", "lost", "won", "bought", "brought", "sold", "paid",
    "meant", "kept", "felt", "heard", "held", "ran", "sat", "stood", "woke",
    "broke", "chose", "spoke", "stole", "threw", "wrote", "drove", "rode",
    "flew", "grew", "drew", "gave", "forgot", "began", "sang", "drank",
    "swam", "fell", "left", "met", "sent", "spent", "built", "caught",
    "taught", "fought", "slept", "led", "fed", "bled", "shot", "had",
    "wore", "stuck", "hid", "beat", "bit", "blew", "froze", "rose", "woken",
}
# Dropped-g gerund spellings resolved by suffix; these two appear as single
# tokens often enough to pin in the lexicon.
GERUNDS = {"talmbout", "tryna"}
# No conjunction tag in the coarse set; route them to OTHER rather than the
# NOUN default so subject-position patterns cannot key on them.
CONJUNCTIONS = {"and", "or", "but", "nor", "cause", "cuz", "cus", "bc", "plus",
                "if", "when", "while", "because"}

_ING_EXCEPTIONS = {
    "thing", "king", "ring", "bring", "sing", "sting", "swing", "spring",
    "string", "wing", "nothing", "something", "anything", "everything",
    "morning", "evening", "during", "ding",
}
_ED_EXCEPTIONS = {"bed", "red", "need", "weed", "feed", "speed", "indeed",
                  "hundred", "shed", "sacred", "naked", "wicked"}
_LY_EXCEPTIONS = {"family", "belly", "jelly", "bully", "rally", "ally",
                  "lily", "holy", "ugly", "silly", "early"}
_IN_EXCEPTIONS = {"cousin", "basin", "cabin", "satin", "latin", "margin",
                  "dolphin", "pumpkin", "napkin", "violin", "within", "begin",
                  "again"}

_PUNCT_RE = re.compile(r"^[^\w\s]+$")
_NUM_RE = re.compile(r"^\d+(?:[.,:x/-]\d+)*(?:st|nd|rd|th|s|k|am|pm)?$")
_EMOJI_TOKEN_RE = re.compile(r"^:[a-z0-9_'-]+:$")
_HYPHEN_COMPOUND_RE = re.compile(r"^[\w'*]+-[\w'*]+$")

_LEXICON: dict[str, str] = {}
for _w in PRONOUNS:
    _LEXICON[_w] = "PRON"
for _w in POSSESSIVES:
    _LEXICON.setdefault(_w, "PRON")
for _w in DETERMINERS:
    _LEXICON[_w] = "DET"
for _w in ADPOSITIONS:
    _LEXICON[_w] = "ADP"
for _w in ADVERBS:
    _LEXICON[_w] = "ADV"
for _w in ADJECTIVES:
    _LEXICON[_w] = "ADJ"
for _w in VERBS:
    _LEXICON[_w] = "VERB"
for _w in IRREGULAR_PAST:
    _LEXICON[_w] = "VERB_PAST"
for _w in GERUNDS:
    _LEXICON[_w] = "VERB_GER"
for _w in CONJUNCTIONS:
    _LEXICON[_w] = "OTHER"


def tag_word(lower: str) -> str:
    """Coarse tag for one lower-cased token."""
    if _PUNCT_RE.match(lower):
        return "PUNCT"
    if _NUM_RE.match(lower):
        return "NUM"
    if _EMOJI_TOKEN_RE.match(lower) or lower.startswith("#"):
        return "OTHER"
    if lower in _LEXICON:
        return _LEXICON[lower]
    bare = lower.rstrip("!?.,;:")
    if bare != lower and bare in _LEXICON:
        return _LEXICON[bare]
    if len(lower) > 4 and lower.endswith("ing") and lower not in _ING_EXCEPTIONS:
        return "VERB_GER"
    if len(lower) > 4 and (lower.endswith("in") or lower.endswith("in'")) \
            and lower.rstrip("'") not in _IN_EXCEPTIONS:
        return "VERB_GER"
    if len(lower) > 3 and lower.endswith("ed") and lower not in _ED_EXCEPTIONS:
        return "VERB_PAST"
    if len(lower) > 4 and lower.endswith("ly") and lower not in _LY_EXCEPTIONS:
        return "ADV"
    return "NOUN"


def annotate(post: CleanPost) -> AnnotatedDoc:
    """Tag every whitespace token of a cleaned post; deterministic per version."""
    surfaces = tokenize(post.text)
    tokens: list[Token] = []
    lowers = [s.lower() for s in surfaces]
    tags = [tag_word(lw) for lw in lowers]
    for i, surface in enumerate(surfaces):
        dep = None
        head = None
        nxt = i + 1 if i + 1 < len(surfaces) else None
        if lowers[i] in POSSESSIVES and nxt is not None and tags[nxt] == "NOUN":
            dep, head = "POSS", nxt
        elif _HYPHEN_COMPOUND_RE.match(lowers[i]):
            dep = "COMPOUND"
            head = nxt
        tokens.append(Token(i, surface, lowers[i], tags[i], dep, head))
    return AnnotatedDoc(post_id=post.id, tokens=tuple(tokens), source="internal")


# ---------------------------------------------------------------------------
# Column import/export: one block per post, "#id <post_id>" header, then
# tab-separated "index surface pos dep head" lines; blank line ends a block.
# Absent dep/head are written as "_".
# ---------------------------------------------------------------------------

def export_annotations(docs: list[AnnotatedDoc], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for doc in docs:
            f.write(f"#id {doc.post_id}\n")
            for t in doc.tokens:
                dep = t.dep if t.dep is not None else "_"
                head = str(t.head) if t.head is not None else "_"
                f.write(f"{t.index}\t{t.surface}\t{t.pos}\t{dep}\t{head}\n")
            f.write("\n")


def _parse_block(post_id: str, lines: list[str], start_line: int) -> AnnotatedDoc:
    tokens = []
    for off, line in enumerate(lines):
        parts = line.split("\t")
        if len(parts) != 5:
            raise AnnotationError(
                f"line {start_line + off}: expected 5 tab-separated fields")
        idx_s, surface, pos, dep, head = parts
        idx = int(idx_s)
        if idx != len(tokens):
            raise AnnotationError(
                f"doc {post_id}: token indices not contiguous at {idx}")
        if pos not in POS_TAGS:
            raise AnnotationError(f"doc {post_id}: unknown pos tag {pos!r}")
        dep_v = None if dep == "_" else dep
        if dep_v is not None and dep_v not in DEP_RELS:
            raise AnnotationError(f"doc {post_id}: unknown dep {dep!r}")
        head_v = None if head == "_" else int(head)
        tokens.append(Token(idx, surface, surface.lower(), pos, dep_v, head_v))
    for t in tokens:
        if t.head is not None and (t.head == t.index or not 0 <= t.head < len(tokens)):
            raise AnnotationError(f"doc {post_id}: bad head {t.head} on token {t.index}")
    return AnnotatedDoc(post_id=post_id, tokens=tuple(tokens), source="imported")


def import_annotations(
    path: str | Path,
    corpus_token_counts: dict[str, int],
    diagnostics: Optional[list[str]] = None,
) -> dict[str, AnnotatedDoc]:
    """Load externally produced annotations keyed by post id.

    Docs whose token count disagrees with the corpus are rejected with a
    diagnostic; unknown post ids are a hard error.
    """
    out: dict[str, AnnotatedDoc] = {}
    cur_id: Optional[str] = None
    cur_lines: list[str] = []
    cur_start = 0

    def flush() -> None:
        nonlocal cur_id, cur_lines
        if cur_id is None:
            return
        if cur_id not in corpus_token_counts:
            raise AnnotationError(f"unknown post id {cur_id!r} in annotation file")
        doc = _parse_block(cur_id, cur_lines, cur_start)
        expected = corpus_token_counts[cur_id]
        if len(doc.tokens) != expected:
            msg = (f"doc {cur_id}: token count {len(doc.tokens)} does not match "
                   f"corpus token_count {expected}; rejected")
            if diagnostics is None:
                raise AnnotationError(msg)
            diagnostics.append(msg)
        else:
            out[cur_id] = doc
        cur_id, cur_lines = None, []

    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            if line.startswith("#id "):
                flush()
                cur_id = line[4:].strip()
                cur_lines = []
                cur_start = lineno + 1
            elif line.strip() == "":
                flush()
            else:
                if cur_id is None:
                    raise AnnotationError(f"line {lineno}: token line outside a block")
                cur_lines.append(line)
    flush()
    return out
