"""Evaluation and bias statistics.

Confusion metrics and disparity ratios between density strata, chance-
corrected pairwise agreement, distribution similarity, group-difference
tests, and per-feature least-squares regressions. Undefined quotients are
flagged values, never NaN or infinity, so every number survives
serialization.
"""

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .labels import (Annotation, Prediction, DEFAULT_SCORE_THRESHOLD,
                     threshold_predictions)
from .special import f_sf, t_two_sided_p
from .util import AuditError

SIGNIFICANCE_LEVEL = 0.05
PPL_PREFIX = "ext:ppl"  # perplexity-based columns never enter regressions


class StatsError(AuditError):
    pass


# ---------------------------------------------------------------- rates

@dataclass(frozen=True)
class Rate:
    """A quotient that knows when it is undefined instead of dividing by 0."""
    numerator: float
    denominator: float

    @property
    def undefined(self) -> bool:
        return self.denominator == 0

    @property
    def value(self) -> Optional[float]:
        if self.undefined:
            return None
        return self.numerator / self.denominator

    def as_record(self) -> dict:
        return {"value": self.value, "undefined": self.undefined,
                "numerator": self.numerator, "denominator": self.denominator}


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def precision(self) -> Rate:
        return Rate(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> Rate:
        return Rate(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> Rate:
        p, r = self.precision.value, self.recall.value
        if p is None or r is None:
            return Rate(0.0, 0.0)
        return Rate(2.0 * p * r, p + r)

    @property
    def fpr(self) -> Rate:
        return Rate(self.fp, self.fp + self.tn)

    @property
    def fnr(self) -> Rate:
        return Rate(self.fn, self.fn + self.tp)


def prediction_sets(preds: Iterable[Prediction],
                    t: float = DEFAULT_SCORE_THRESHOLD) -> dict:
    """post_id -> thresholded emotion set, refusals dropped."""
    out = {}
    for p in preds:
        if p.refusal:
            continue
        out[p.post_id] = threshold_predictions(p, t)
    return out


def refusal_rate(preds: Sequence[Prediction]) -> float:
    preds = list(preds)
    if not preds:
        raise StatsError("refusal rate of an empty prediction set")
    return sum(1 for p in preds if p.refusal) / len(preds)


def confusion(preds: Iterable[Prediction], silver_labels: Iterable,
              t: float = DEFAULT_SCORE_THRESHOLD,
              include_posts: Optional[set] = None) -> dict:
    """Per-emotion confusion counts of thresholded predictions vs silver."""
    predicted = prediction_sets(preds, t)
    counts: dict = defaultdict(lambda: [0, 0, 0, 0])  # tp fp tn fn
    matched = False
    for s in silver_labels:
        if include_posts is not None and s.post_id not in include_posts:
            continue
        if s.post_id not in predicted:
            continue
        matched = True
        said = s.emotion in predicted[s.post_id]
        if said and s.present:
            counts[s.emotion][0] += 1
        elif said and not s.present:
            counts[s.emotion][1] += 1
        elif not said and not s.present:
            counts[s.emotion][2] += 1
        else:
            counts[s.emotion][3] += 1
    if not matched:
        raise StatsError("no overlap between prediction and silver post ids")
    return {e: ConfusionCounts(tp=c[0], fp=c[1], tn=c[2], fn=c[3])
            for e, c in sorted(counts.items())}


# ------------------------------------------------------------- disparity

@dataclass(frozen=True)
class DisparityCell:
    emotion: str
    high: ConfusionCounts
    low: ConfusionCounts

    def _ratio(self, hi: Rate, lo: Rate) -> dict:
        rec = {"value": None, "undefined": True, "numerator": hi.value}
        if hi.value is not None and lo.value not in (None, 0):
            rec = {"value": hi.value / lo.value, "undefined": False,
                   "numerator": hi.value}
        return rec

    def as_record(self) -> dict:
        return {
            "emotion": self.emotion,
            "fpr_high": self.high.fpr.as_record(),
            "fpr_low": self.low.fpr.as_record(),
            "dfpr": self._ratio(self.high.fpr, self.low.fpr),
            "fnr_high": self.high.fnr.as_record(),
            "fnr_low": self.low.fnr.as_record(),
            "dfnr": self._ratio(self.high.fnr, self.low.fnr),
        }


def disparity(preds: Iterable[Prediction], silver_labels: Iterable,
              strata: Mapping[str, str],
              t: float = DEFAULT_SCORE_THRESHOLD) -> dict:
    """Per-emotion false-rate ratios of the high stratum over the low."""
    silver_labels = list(silver_labels)
    preds = list(preds)
    high_posts = {p for p, s in strata.items() if s == "high"}
    low_posts = {p for p, s in strata.items() if s == "low"}
    try:
        per_high = confusion(preds, silver_labels, t, include_posts=high_posts)
        per_low = confusion(preds, silver_labels, t, include_posts=low_posts)
    except StatsError:
        raise StatsError("a density stratum has no scored decisions")
    cells = {}
    for e in sorted(set(per_high) | set(per_low)):
        if e not in per_high or e not in per_low:
            raise StatsError(f"emotion {e!r} missing from one stratum")
        cells[e] = DisparityCell(emotion=e, high=per_high[e], low=per_low[e])
    return cells


def disparity_means(cells: Mapping[str, DisparityCell]) -> dict:
    """Mean defined rates and ratios across emotions."""
    acc: dict = defaultdict(list)
    for c in cells.values():
        rec = c.as_record()
        for k in ("fpr_high", "fpr_low", "fnr_high", "fnr_low",
                  "dfpr", "dfnr"):
            v = rec[k]["value"]
            if v is not None:
                acc[k].append(v)
    return {k: (sum(v) / len(v) if v else None) for k, v in sorted(acc.items())}


# --------------------------------------------------------------- kappa

def kappa(a: Sequence[int], b: Sequence[int]) -> float:
    """Cohen's kappa over two aligned binary label vectors."""
    if len(a) != len(b):
        raise StatsError(f"label vectors differ in length ({len(a)} vs {len(b)})")
    n = len(a)
    if n < 2:
        raise StatsError(f"kappa needs at least 2 shared items, got {n}")
    a = [1 if x else 0 for x in a]
    b = [1 if x else 0 for x in b]
    p_o = sum(1 for x, y in zip(a, b) if x == y) / n
    pa1 = sum(a) / n
    pb1 = sum(b) / n
    p_e = pa1 * pb1 + (1 - pa1) * (1 - pb1)
    if p_e == 1.0:
        return 1.0  # both raters constant and identical
    return (p_o - p_e) / (1.0 - p_e)


def kappa_weighted(a: Sequence[int], b: Sequence[int],
                   categories: Sequence[int] = (1, 2, 3)) -> float:
    """Linear-weighted kappa over ordinal categories."""
    if len(a) != len(b):
        raise StatsError(f"label vectors differ in length ({len(a)} vs {len(b)})")
    n = len(a)
    if n < 2:
        raise StatsError(f"kappa needs at least 2 shared items, got {n}")
    cats = list(categories)
    idx = {c: i for i, c in enumerate(cats)}
    k = len(cats)
    for v in list(a) + list(b):
        if v not in idx:
            raise StatsError(f"label {v!r} outside categories {cats}")
    obs = [[0.0] * k for _ in range(k)]
    for x, y in zip(a, b):
        obs[idx[x]][idx[y]] += 1
    row = [sum(obs[i]) for i in range(k)]
    col = [sum(obs[i][j] for i in range(k)) for j in range(k)]
    w = [[1.0 - abs(i - j) / (k - 1) for j in range(k)] for i in range(k)]
    po = sum(w[i][j] * obs[i][j] for i in range(k) for j in range(k)) / n
    pe = sum(w[i][j] * row[i] * col[j] for i in range(k)
             for j in range(k)) / (n * n)
    if pe == 1.0:
        return 1.0
    return (po - pe) / (1.0 - pe)


# ----------------------------------------------------- agreement matrix

PAIRINGS = ("in_in", "in_out", "out_out", "model_in", "model_out")


@dataclass
class AgreementMatrix:
    cells: dict = field(default_factory=dict)  # (pairing, emotion) -> mean kappa
    pairs: dict = field(default_factory=dict)  # (pairing, emotion) -> pair details

    def as_record(self) -> dict:
        out: dict = {}
        for (pairing, emotion), v in sorted(self.cells.items()):
            out.setdefault(pairing, {})[emotion] = {
                "mean_kappa": v,
                "n_pairs": len(self.pairs[(pairing, emotion)]),
                "pairs": self.pairs[(pairing, emotion)],
            }
        return out


def _human_binary(annotations: Iterable[Annotation]) -> tuple[dict, dict]:
    """(annotator -> emotion -> post -> 0/1 presence, annotator -> group)."""
    votes: dict = defaultdict(dict)
    groups: dict = {}
    for a in annotations:
        votes[(a.annotator_id, a.emotion)][a.post_id] = 1 if a.intensity >= 2 else 0
        prev = groups.setdefault(a.annotator_id, a.group)
        if prev != a.group:
            raise StatsError(f"annotator {a.annotator_id!r} appears in two groups")
    return votes, groups


def agreement_matrix(annotations: Iterable[Annotation],
                     model_sets: Mapping[str, Mapping[str, frozenset]],
                     emotions: Sequence[str],
                     min_overlap: int = 2) -> AgreementMatrix:
    """Mean pairwise kappa per pairing cell; models are paired against each
    human annotator. Pairs below the overlap floor are excluded, empty cells
    stay absent."""
    annotations = list(annotations)
    votes, groups = _human_binary(annotations)
    annotators = sorted(groups)
    out = AgreementMatrix()
    acc: dict = defaultdict(list)

    def record(pairing: str, emotion: str, name_a: str, name_b: str,
               la: dict, lb: dict) -> None:
        shared = sorted(set(la) & set(lb))
        if len(shared) < min_overlap:
            return
        k = kappa([la[p] for p in shared], [lb[p] for p in shared])
        acc[(pairing, emotion)].append(
            {"a": name_a, "b": name_b, "n": len(shared), "kappa": k})

    for emotion in emotions:
        for i, x in enumerate(annotators):
            for y in annotators[i + 1:]:
                la = votes.get((x, emotion), {})
                lb = votes.get((y, emotion), {})
                gx, gy = groups[x], groups[y]
                if gx == gy:
                    pairing = "in_in" if gx == "ingroup" else "out_out"
                else:
                    pairing = "in_out"
                record(pairing, emotion, x, y, la, lb)
        for model_id, per_post in sorted(model_sets.items()):
            mlabels = {post: (1 if emotion in s else 0)
                       for post, s in per_post.items()}
            for x in annotators:
                la = votes.get((x, emotion), {})
                pairing = ("model_in" if groups[x] == "ingroup"
                           else "model_out")
                record(pairing, emotion, model_id, x, mlabels, la)

    for key, details in acc.items():
        out.cells[key] = sum(d["kappa"] for d in details) / len(details)
        out.pairs[key] = details
    return out


# ------------------------------------------------- distribution similarity

def jsd(p: Sequence[float], q: Sequence[float]) -> float:
    """Base-2 Jensen-Shannon divergence of two re-normalized vectors."""
    if len(p) != len(q):
        raise StatsError(f"distributions differ in length ({len(p)} vs {len(q)})")
    if any(x < 0 for x in p) or any(x < 0 for x in q):
        raise StatsError("distributions must be non-negative")
    sp, sq = sum(p), sum(q)
    if sp == 0 or sq == 0:
        raise StatsError("all-zero distribution")
    p = [x / sp for x in p]
    q = [x / sq for x in q]

    def kl(a: list, m: list) -> float:
        return sum(x * math.log2(x / y) for x, y in zip(a, m) if x > 0)

    m = [(x + y) / 2 for x, y in zip(p, q)]
    return 0.5 * kl(p, m) + 0.5 * kl(q, m)


def sample_representativeness(sample_preds: Sequence[Prediction],
                              full_preds: Sequence[Prediction],
                              emotions: Sequence[str],
                              t: float = DEFAULT_SCORE_THRESHOLD) -> dict:
    """Similarity of a model's behavior on a sample vs the full corpus:
    divergence and correlation of emotion frequencies plus the refusal-rate
    difference."""

    def freqs(preds: Sequence[Prediction]) -> list:
        sets = prediction_sets(preds, t)
        if not sets:
            raise StatsError("no usable predictions (all refusals or empty)")
        return [sum(1 for s in sets.values() if e in s) / len(sets)
                for e in emotions]

    fs, ff = freqs(sample_preds), freqs(full_preds)
    try:
        r, _ = pearson(fs, ff)
    except StatsError:
        r = None  # degenerate constant vector
    return {
        "jsd": jsd(fs, ff),
        "pearson_r": r,
        "delta_refusal": refusal_rate(sample_preds) - refusal_rate(full_preds),
    }


# ------------------------------------------------------- group tests

def anova_group_test(values: Sequence[float],
                     groups: Sequence[str]) -> tuple[float, float]:
    """One-way ANOVA for exactly two groups: F with (1, n-2) df and its p."""
    if len(values) != len(groups):
        raise StatsError("values and group assignment differ in length")
    by_group: dict = defaultdict(list)
    for v, g in zip(values, groups):
        by_group[g].append(float(v))
    if len(by_group) != 2:
        raise StatsError(f"need exactly 2 groups, got {len(by_group)}")
    (ga, va), (gb, vb) = sorted(by_group.items())
    if not va or not vb:
        raise StatsError("a group is empty")
    n = len(va) + len(vb)
    if n < 3:
        raise StatsError("need at least 3 observations")
    grand = (sum(va) + sum(vb)) / n
    ma, mb = sum(va) / len(va), sum(vb) / len(vb)
    ssb = len(va) * (ma - grand) ** 2 + len(vb) * (mb - grand) ** 2
    ssw = sum((x - ma) ** 2 for x in va) + sum((x - mb) ** 2 for x in vb)
    if ssw == 0:
        raise StatsError("zero within-group variance")
    f = (ssb / 1.0) / (ssw / (n - 2))
    return f, f_sf(f, 1, n - 2)


def pearson(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Sample correlation with a two-sided t-test p-value."""
    if len(x) != len(y):
        raise StatsError("series differ in length")
    n = len(x)
    if n < 3:
        raise StatsError(f"need at least 3 points, got {n}")
    mx = sum(x) / n
    my = sum(y) / n
    dx = [v - mx for v in x]
    dy = [v - my for v in y]
    sxx = sum(v * v for v in dx)
    syy = sum(v * v for v in dy)
    if sxx == 0 or syy == 0:
        raise StatsError("constant series")
    r = sum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return r, t_two_sided_p(t, n - 2)


# ------------------------------------------------------- regression

@dataclass(frozen=True)
class CoefStat:
    name: str
    beta: float
    std_err: float
    t_stat: Optional[float]  # None when the fit is exact
    p_value: float

    @property
    def significant(self) -> bool:
        return self.p_value < SIGNIFICANCE_LEVEL

    def as_record(self) -> dict:
        return {"name": self.name, "beta": self.beta, "std_err": self.std_err,
                "t_stat": self.t_stat, "p_value": self.p_value,
                "significant": self.significant}


@dataclass(frozen=True)
class RegressionResult:
    intercept: CoefStat
    coefficients: tuple
    r_squared: float
    n: int
    excluded: tuple

    def significant_coefficients(self) -> list:
        return [c for c in self.coefficients if c.significant]

    def as_record(self) -> dict:
        return {"intercept": self.intercept.as_record(),
                "coefficients": [c.as_record() for c in self.coefficients],
                "r_squared": self.r_squared, "n": self.n,
                "excluded": list(self.excluded)}


def _dependent_columns(design: np.ndarray, names: Sequence[str]) -> list:
    """Greedy scan: columns that fail to raise the running rank."""
    bad = []
    kept = np.empty((design.shape[0], 0))
    for j in range(design.shape[1]):
        trial = np.column_stack([kept, design[:, j]])
        if np.linalg.matrix_rank(trial) > kept.shape[1]:
            kept = trial
        else:
            bad.append(names[j])
    return bad


def regress(y: Sequence[float], features: Mapping[str, Sequence[float]],
            jitter_seed: Optional[int] = None) -> RegressionResult:
    """OLS of y on the feature columns with per-coefficient t-tests.

    Perplexity-derived external columns are dropped up front. The optional
    jitter perturbs predictors by 1e-8 under a fixed seed; default is the
    deterministic un-jittered fit.
    """
    excluded = tuple(sorted(k for k in features if k.startswith(PPL_PREFIX)))
    names = sorted(k for k in features if not k.startswith(PPL_PREFIX))
    if not names:
        raise StatsError("no usable feature columns")
    n = len(y)
    for k in names:
        if len(features[k]) != n:
            raise StatsError(f"feature {k!r} length mismatch")
    k_feat = len(names)
    if n <= k_feat + 1:
        raise StatsError(f"need more than {k_feat + 1} observations, got {n}")

    yv = np.asarray(y, dtype=float)
    X = np.column_stack([np.asarray(features[k], dtype=float) for k in names])
    if jitter_seed is not None:
        rng = np.random.default_rng(jitter_seed)
        X = X + rng.standard_normal(X.shape) * 1e-8
    design = np.column_stack([np.ones(n), X])
    col_names = ["intercept"] + names

    if np.linalg.matrix_rank(design) < design.shape[1]:
        bad = _dependent_columns(design, col_names)
        raise StatsError("rank-deficient design; dependent columns: "
                         + ", ".join(bad))

    beta, _, _, _ = np.linalg.lstsq(design, yv, rcond=None)
    resid = yv - design @ beta
    rss = float(resid @ resid)
    tss = float(((yv - yv.mean()) ** 2).sum())
    if tss == 0:
        raise StatsError("constant response")
    dof = n - design.shape[1]
    sigma2 = rss / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    ses = np.sqrt(np.maximum(np.diag(cov), 0.0))

    stats = []
    for j, name in enumerate(col_names):
        b = float(beta[j])
        se = float(ses[j])
        if se == 0.0:
            t_stat = None
            p = 0.0 if b != 0.0 else 1.0
        else:
            t_stat = b / se
            p = t_two_sided_p(t_stat, dof)
        stats.append(CoefStat(name=name, beta=b, std_err=se,
                              t_stat=t_stat, p_value=p))
    return RegressionResult(intercept=stats[0], coefficients=tuple(stats[1:]),
                            r_squared=1.0 - rss / tss, n=n, excluded=excluded)


def feature_influence_summary(results: Iterable[tuple]) -> dict:
    """Mean significant coefficient per (emotion, feature) over a collection
    of (run key, emotion, RegressionResult) entries, plus the per-feature
    mean absolute significant coefficient."""
    cells: dict = defaultdict(list)
    per_feature: dict = defaultdict(list)
    for _key, emotion, res in results:
        for c in res.significant_coefficients():
            cells[(emotion, c.name)].append(c.beta)
            per_feature[c.name].append(abs(c.beta))
    return {
        "cells": {f"{e}/{f}": sum(v) / len(v)
                  for (e, f), v in sorted(cells.items())},
        "abs_mean": {f: sum(v) / len(v)
                     for f, v in sorted(per_feature.items())},
    }
