"""Corpus-level normalization of feature vectors and the scalar density score.

Raw statistic per detector feature is count divided by token count, so a match
in a short post weighs more than the same match in a long one; external
(``ext:``) features pass through verbatim. Min-max normalization maps each
feature into [0,1] over the corpus, and the score is the arithmetic mean over
the enabled features. Posts at or above the threshold land in the high
stratum.
"""

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .features import EXTERNAL_PREFIX, FeatureVector
from .util import AuditError

DEFAULT_THRESHOLD = 0.07  # boundary inclusive: score == threshold -> high


class DensityError(AuditError):
    pass


@dataclass(frozen=True)
class NormalizationStats:
    bounds: dict  # feature -> (min, max) raw density over the corpus
    features: tuple[str, ...]  # enabled set, sorted

    def as_record(self) -> dict:
        return {
            "features": list(self.features),
            "bounds": {f: [lo, hi] for f, (lo, hi) in sorted(self.bounds.items())},
        }

    @classmethod
    def from_record(cls, rec: dict) -> "NormalizationStats":
        bounds = {f: (float(lo), float(hi)) for f, (lo, hi) in rec["bounds"].items()}
        return cls(bounds=bounds, features=tuple(rec["features"]))


@dataclass(frozen=True)
class DdmScore:
    post_id: str
    normalized: dict  # feature -> value in [0,1]
    ddm: float
    stratum: str  # "high" | "low"


def raw_density(vector: FeatureVector, feature: str,
                external: Optional[Mapping[tuple[str, str], float]] = None) -> float:
    if feature.startswith(EXTERNAL_PREFIX):
        if external is None:
            return 0.0
        # absent external score participates as 0.0 rather than dropping the
        # feature, keeping the mean's denominator stable across posts
        return external.get((vector.post_id, feature), 0.0)
    if feature not in vector.counts:
        raise DensityError(f"feature {feature!r} missing from vector for "
                           f"post {vector.post_id!r}")
    if vector.token_count <= 0:
        raise DensityError(f"post {vector.post_id!r} has non-positive token count")
    return vector.counts[feature] / vector.token_count


def fit_normalizer(
    vectors: Iterable[FeatureVector],
    external: Optional[Mapping[tuple[str, str], float]] = None,
    extra_features: Iterable[str] = (),
) -> NormalizationStats:
    """Per-feature min/max of raw densities over the corpus."""
    vectors = list(vectors)
    if not vectors:
        raise DensityError("cannot fit normalizer on an empty corpus")
    features = set(vectors[0].counts)
    for v in vectors:
        features &= set(v.counts)
    features |= set(extra_features)
    if external:
        features |= {f for (_pid, f) in external}
    ordered = tuple(sorted(features))
    bounds = {}
    for f in ordered:
        vals = [raw_density(v, f, external) for v in vectors]
        bounds[f] = (min(vals), max(vals))
    return NormalizationStats(bounds=bounds, features=ordered)


def score(
    vector: FeatureVector,
    stats: NormalizationStats,
    threshold: float = DEFAULT_THRESHOLD,
    external: Optional[Mapping[tuple[str, str], float]] = None,
) -> DdmScore:
    """Normalize one vector against fitted stats and average to the scalar."""
    extra = set(vector.counts) - set(stats.features)
    if extra:
        raise DensityError(f"vector for post {vector.post_id!r} carries "
                           f"features absent from stats: {sorted(extra)}")
    normalized = {}
    for f in stats.features:
        if f not in stats.bounds:
            raise DensityError(f"feature {f!r} missing from normalization stats")
        lo, hi = stats.bounds[f]
        d = raw_density(vector, f, external)
        if hi == lo:
            normalized[f] = 0.0  # zero-variance features carry no signal
        else:
            normalized[f] = min(1.0, max(0.0, (d - lo) / (hi - lo)))
    ddm = sum(normalized.values()) / len(normalized)
    stratum = "high" if ddm >= threshold else "low"
    return DdmScore(post_id=vector.post_id, normalized=normalized,
                    ddm=ddm, stratum=stratum)


def score_corpus(
    vectors: Iterable[FeatureVector],
    threshold: float = DEFAULT_THRESHOLD,
    external: Optional[Mapping[tuple[str, str], float]] = None,
    stats: Optional[NormalizationStats] = None,
) -> tuple[list[DdmScore], NormalizationStats]:
    vectors = list(vectors)
    if stats is None:
        stats = fit_normalizer(vectors, external)
    scores = [score(v, stats, threshold, external) for v in vectors]
    return scores, stats


def ddm_demographic_check(
    ddm_by_post: Mapping[str, float],
    demo_by_post: Mapping[str, Mapping[str, float]],
    fields: Iterable[str] = ("pct_black", "pct_white"),
) -> dict:
    """Pearson correlation of per-post density against neighborhood racial
    percentages, for posts that were geo-joined."""
    from .stats import pearson  # local import to avoid a cycle

    joined = sorted(set(ddm_by_post) & set(demo_by_post))
    if len(joined) < 3:
        raise DensityError(f"need at least 3 geo-joined posts, have {len(joined)}")
    out = {}
    x = [ddm_by_post[p] for p in joined]
    for fieldname in fields:
        y = [float(demo_by_post[p][fieldname]) for p in joined]
        try:
            r, p = pearson(x, y)
            out[fieldname] = {"r": r, "p": p, "n": len(joined)}
        except AuditError as e:
            out[fieldname] = {"error": str(e), "n": len(joined)}
    return out
