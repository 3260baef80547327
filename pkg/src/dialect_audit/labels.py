"""Human annotations, model predictions, silver labels, and lexicon scoring.

Silver labels are community-informed: on high-density posts only ingroup
annotators are eligible, elsewhere everyone is. Presence is a two-clause
rule (two slight ratings, or one strong), and tied intensity modes at the
opposing extremes collapse to slight presence.
"""

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .tagging import AnnotatedDoc
from .taxonomy import PRIMARY_EMOTIONS, TaxonomyMap, map_label
from .util import AuditError, read_jsonl

GROUPS = ("ingroup", "outgroup")
PROMPT_SCHEMAS = ("zero", "few", "cot", "none")
INTENSITIES = (1, 2, 3)
DEFAULT_SCORE_THRESHOLD = 0.05  # boundary inclusive
ANNOTATABLE = tuple(sorted(PRIMARY_EMOTIONS - {"neutral"}))

# NRC distribution files carry sentiment polarity rows alongside the
# emotion rows; polarity is not an emotion and is skipped at load
_POLARITY_ROWS = {"positive", "negative"}


class LabelError(AuditError):
    pass


@dataclass(frozen=True)
class Annotation:
    post_id: str
    annotator_id: str
    group: str  # ingroup | outgroup
    emotion: str  # non-neutral primary
    intensity: int  # 1 none, 2 slight, 3 strong


@dataclass(frozen=True)
class SilverLabel:
    post_id: str
    emotion: str
    present: bool
    intensity_mode: float  # in [1, 3]
    eligible_group: str  # ingroup_only | all
    n_annotators: int


@dataclass(frozen=True)
class Prediction:
    post_id: str
    model_id: str
    prompt_schema: str
    scores: Optional[dict] = None  # emotion -> [0,1]
    labels: Optional[frozenset] = None  # hard label set
    refusal: bool = False


@dataclass
class SilverResult:
    labels: list
    excluded_posts: list  # high-stratum posts with no ingroup annotation
    # (post, emotion) markers whose tied modes span both extremes,
    # counted over all annotators and again over the eligible set only
    extreme_pre_gating: dict = field(default_factory=dict)
    extreme_post_gating: dict = field(default_factory=dict)
    extreme_posts_pre: int = 0
    extreme_posts_post: int = 0


def load_annotations(path: Path) -> list:
    out = []
    seen = set()
    for lineno, rec in read_jsonl(path):
        try:
            post_id = str(rec["post_id"])
            annotator_id = str(rec["annotator_id"])
            group = rec["group"]
            labels = rec["labels"]
        except (KeyError, TypeError) as e:
            raise LabelError(f"{Path(path).name}:{lineno}: missing field {e}")
        if group not in GROUPS:
            raise LabelError(f"{Path(path).name}:{lineno}: bad group {group!r}")
        if not isinstance(labels, dict) or not labels:
            raise LabelError(f"{Path(path).name}:{lineno}: labels must be a "
                             "non-empty object")
        for emotion, intensity in labels.items():
            emotion = str(emotion).lower()
            if emotion not in ANNOTATABLE:
                raise LabelError(f"{Path(path).name}:{lineno}: emotion "
                                 f"{emotion!r} is not an annotatable primary")
            if not isinstance(intensity, int) or intensity not in INTENSITIES:
                raise LabelError(f"{Path(path).name}:{lineno}: intensity for "
                                 f"{emotion!r} must be one of 1, 2, 3")
            key = (post_id, annotator_id, emotion)
            if key in seen:
                raise LabelError(f"{Path(path).name}:{lineno}: duplicate "
                                 f"annotation for {key}")
            seen.add(key)
            out.append(Annotation(post_id=post_id, annotator_id=annotator_id,
                                  group=group, emotion=emotion,
                                  intensity=intensity))
    return out


def load_predictions(path: Path) -> list:
    out = []
    seen = set()
    for lineno, rec in read_jsonl(path):
        where = f"{Path(path).name}:{lineno}"
        try:
            post_id = str(rec["post_id"])
            model_id = str(rec["model_id"])
            schema = rec["prompt_schema"]
        except (KeyError, TypeError) as e:
            raise LabelError(f"{where}: missing field {e}")
        if schema not in PROMPT_SCHEMAS:
            raise LabelError(f"{where}: bad prompt_schema {schema!r}")
        refusal = bool(rec.get("refusal", False))
        scores = rec.get("scores")
        labels = rec.get("labels")
        if refusal:
            if scores or labels:
                raise LabelError(f"{where}: refusal with non-empty output")
            scores, labels = None, None
        else:
            if (scores is None) == (labels is None):
                raise LabelError(f"{where}: exactly one of scores or labels "
                                 "required")
            if scores is not None:
                if not isinstance(scores, dict):
                    raise LabelError(f"{where}: scores must be an object")
                clean = {}
                for emotion, v in scores.items():
                    emotion = str(emotion).lower()
                    if emotion not in PRIMARY_EMOTIONS:
                        raise LabelError(f"{where}: unknown emotion "
                                         f"{emotion!r} in scores")
                    v = float(v)
                    if not 0.0 <= v <= 1.0:
                        raise LabelError(f"{where}: score for {emotion!r} "
                                         f"outside [0,1]: {v}")
                    clean[emotion] = v
                scores = clean
            else:
                if not isinstance(labels, list):
                    raise LabelError(f"{where}: labels must be a list")
                for emotion in labels:
                    if str(emotion).lower() not in PRIMARY_EMOTIONS:
                        raise LabelError(f"{where}: unknown emotion "
                                         f"{emotion!r} in labels")
                labels = frozenset(str(e).lower() for e in labels)
        key = (post_id, model_id, schema)
        if key in seen:
            raise LabelError(f"{where}: duplicate prediction for {key}")
        seen.add(key)
        out.append(Prediction(post_id=post_id, model_id=model_id,
                              prompt_schema=schema, scores=scores,
                              labels=labels, refusal=refusal))
    return out


def presence(intensities: Sequence[int]) -> bool:
    """True iff at least two slight (2) ratings or any strong (3) rating."""
    vals = list(intensities)
    if not vals:
        raise LabelError("presence requires at least one eligible annotation")
    for v in vals:
        if v not in INTENSITIES:
            raise LabelError(f"intensity {v!r} outside {{1,2,3}}")
    return vals.count(2) >= 2 or 3 in vals


def _mode_stat(vals: Sequence[int]) -> tuple[float, bool]:
    """(mode statistic, extreme-disagreement flag).

    Single mode passes through; tied modes average; a tie spanning both
    extremes (1 and 3 both modal) is the extreme-disagreement case and maps
    to slight presence.
    """
    counts = Counter(vals)
    top = max(counts.values())
    modes = sorted(v for v, n in counts.items() if n == top)
    extreme = 1 in modes and 3 in modes
    if len(modes) == 1:
        return float(modes[0]), False
    if modes == [1, 3]:
        return 2.0, True
    return sum(modes) / len(modes), extreme


def silver(annotations: Iterable[Annotation],
           strata: Mapping[str, str]) -> SilverResult:
    """Per (post, emotion) silver labels with group gating on the high stratum."""
    by_post_emotion: dict = defaultdict(list)
    for a in annotations:
        by_post_emotion[(a.post_id, a.emotion)].append(a)

    result = SilverResult(labels=[], excluded_posts=[])
    extreme_pre: Counter = Counter()
    extreme_post: Counter = Counter()
    posts_pre, posts_post = set(), set()
    excluded = set()

    for (post_id, emotion), anns in sorted(by_post_emotion.items()):
        if post_id not in strata:
            raise LabelError(f"post {post_id!r} has annotations but no "
                             "density stratum")
        high = strata[post_id] == "high"
        _, extreme_all = _mode_stat([a.intensity for a in anns])
        if extreme_all:
            extreme_pre[emotion] += 1
            posts_pre.add(post_id)
        eligible = [a for a in anns if a.group == "ingroup"] if high else anns
        if not eligible:
            excluded.add(post_id)
            continue
        mode, extreme_gated = _mode_stat([a.intensity for a in eligible])
        if extreme_gated:
            extreme_post[emotion] += 1
            posts_post.add(post_id)
        result.labels.append(SilverLabel(
            post_id=post_id, emotion=emotion,
            present=presence([a.intensity for a in eligible]),
            intensity_mode=mode,
            eligible_group="ingroup_only" if high else "all",
            n_annotators=len({a.annotator_id for a in eligible}),
        ))
    result.excluded_posts = sorted(excluded)
    result.extreme_pre_gating = dict(sorted(extreme_pre.items()))
    result.extreme_post_gating = dict(sorted(extreme_post.items()))
    result.extreme_posts_pre = len(posts_pre)
    result.extreme_posts_post = len(posts_post)
    return result


def threshold_predictions(pred: Prediction,
                          t: float = DEFAULT_SCORE_THRESHOLD) -> frozenset:
    """Soft scores -> emotions at or above t; hard labels pass through."""
    if pred.refusal:
        return frozenset()
    if pred.labels is not None:
        return pred.labels
    if pred.scores is None:
        raise LabelError(f"prediction for {pred.post_id!r} has no output")
    return frozenset(e for e, v in pred.scores.items() if v >= t)


def load_lexicon(path: Path) -> dict:
    """NRC-style `word<TAB>emotion<TAB>flag` file -> word -> set of emotions."""
    lex: dict = defaultdict(set)
    p = Path(path)
    with open(p, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise LabelError(f"{p.name}:{lineno}: expected 3 fields, "
                                 f"got {len(parts)}")
            word, emotion, flag = parts
            emotion = emotion.strip().lower()
            if emotion in _POLARITY_ROWS:
                continue
            if flag.strip() not in ("0", "1"):
                raise LabelError(f"{p.name}:{lineno}: flag must be 0 or 1")
            if flag.strip() == "1":
                lex[word.strip().lower()].add(emotion)
    return dict(lex)


def nrc_score(doc: AnnotatedDoc, lexicon: Mapping[str, set],
              tax: TaxonomyMap) -> Prediction:
    """Token-count-normalized lexicon hit rate per primary emotion."""
    from .features import core  # shared edge-punctuation stripper

    n = len(doc.tokens)
    if n == 0:
        raise LabelError(f"document {doc.post_id!r} has no tokens")
    hits: Counter = Counter()
    for tok in doc.tokens:
        word = core(tok).lower()
        sources = lexicon.get(word)
        if not sources:
            continue
        primaries = {map_label(s, tax) for s in sources}
        for p in primaries:
            hits[p] += 1  # once per primary per token
    scores = {e: hits.get(e, 0) / n for e in ANNOTATABLE}
    return Prediction(post_id=doc.post_id, model_id="nrc",
                      prompt_schema="none", scores=scores)
