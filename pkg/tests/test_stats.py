import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dialect_audit.labels import Annotation, Prediction, SilverLabel
from dialect_audit.special import f_sf
from dialect_audit.stats import (
    CoefStat,
    ConfusionCounts,
    Rate,
    RegressionResult,
    StatsError,
    agreement_matrix,
    anova_group_test,
    confusion,
    disparity,
    disparity_means,
    feature_influence_summary,
    jsd,
    kappa,
    kappa_weighted,
    pearson,
    prediction_sets,
    refusal_rate,
    regress,
    sample_representativeness,
)

import oracles

SEED = 20240812


# --------------------------------------------------------------- rates

def test_rate_defined_and_undefined():
    r = Rate(3, 4)
    assert r.value == 0.75 and not r.undefined
    u = Rate(0, 0)
    assert u.value is None and u.undefined
    assert u.as_record() == {"value": None, "undefined": True,
                             "numerator": 0, "denominator": 0}


def test_confusion_counts_worked_example():
    c = ConfusionCounts(tp=3, fp=1, tn=1, fn=2)
    assert c.precision.value == pytest.approx(0.75)
    assert c.recall.value == pytest.approx(0.6)
    assert c.f1.value == pytest.approx(2 / 3, abs=1e-4)
    assert c.fpr.value == pytest.approx(0.5)
    assert c.fnr.value == pytest.approx(0.4)


def test_confusion_counts_undefined_quotients():
    c = ConfusionCounts(tp=0, fp=0, tn=5, fn=0)
    assert c.precision.undefined
    assert c.recall.undefined
    assert c.f1.undefined
    assert c.fpr.value == 0.0


# --------------------------------------------------- confusion from data

def silver_row(post, emotion, present):
    return SilverLabel(post_id=post, emotion=emotion, present=present,
                       intensity_mode=2.0, eligible_group="all", n_annotators=2)


def label_pred(post, emotions):
    return Prediction(post_id=post, model_id="m", prompt_schema="zero",
                      labels=frozenset(emotions))


def test_confusion_reproduces_worked_example():
    silver = [silver_row(f"s{i}", "anger", i <= 5) for i in range(1, 8)]
    preds = ([label_pred(f"s{i}", ["anger"]) for i in (1, 2, 3, 6)]
             + [label_pred(f"s{i}", []) for i in (4, 5, 7)])
    c = confusion(preds, silver)["anger"]
    assert (c.tp, c.fp, c.tn, c.fn) == (3, 1, 1, 2)
    assert c.precision.value == pytest.approx(0.75)
    assert c.recall.value == pytest.approx(0.6)
    assert c.f1.value == pytest.approx(0.6667, abs=1e-4)


def test_confusion_randomized_matches_scan():
    rng = random.Random(SEED)
    emos = ("anger", "joy", "sadness")
    for _ in range(100):
        n = rng.randint(3, 40)
        silver, rows = [], []
        for i in range(n):
            for e in emos:
                present = rng.random() < 0.4
                silver.append(silver_row(f"p{i}", e, present))
                rows.append((f"p{i}", e, present))
        preds = [label_pred(f"p{i}", [e for e in emos if rng.random() < 0.5])
                 for i in range(n)]
        got = confusion(preds, silver)
        want = oracles.confusion_scan(
            {p.post_id: p.labels for p in preds}, rows)
        for e in emos:
            w = want.get(e, {"tp": 0, "fp": 0, "tn": 0, "fn": 0})
            g = got[e]
            assert (g.tp, g.fp, g.tn, g.fn) == (w["tp"], w["fp"], w["tn"], w["fn"])


def test_confusion_ignores_refused_posts():
    silver = [silver_row("a", "anger", True), silver_row("b", "anger", True)]
    preds = [label_pred("a", ["anger"]),
             Prediction(post_id="b", model_id="m", prompt_schema="zero",
                        refusal=True)]
    c = confusion(preds, silver)["anger"]
    assert c.total == 1  # the refused post contributes no decision
    assert refusal_rate(preds) == 0.5
    assert prediction_sets(preds) == {"a": frozenset({"anger"})}


def test_confusion_requires_overlap():
    silver = [silver_row("a", "anger", True)]
    with pytest.raises(StatsError, match="no overlap"):
        confusion([label_pred("zzz", ["anger"])], silver)


def test_refusal_rate_empty_error():
    with pytest.raises(StatsError):
        refusal_rate([])


# ------------------------------------------------------------ disparity

def engineered_fixture():
    """High-stratum FPR 0.6 (3 fp / 2 tn), low-stratum FPR 0.25 (1 fp / 3 tn)."""
    strata = {f"h{i}": "high" for i in range(5)}
    strata.update({f"l{i}": "low" for i in range(4)})
    silver = [silver_row(p, "anger", False) for p in strata]
    # one true-positive pair per stratum keeps recall defined
    strata["h_tp"] = "high"
    strata["l_tp"] = "low"
    silver += [silver_row("h_tp", "anger", True),
               silver_row("l_tp", "anger", True)]
    preds = [label_pred(p, ["anger"])
             for p in ("h0", "h1", "h2", "l0", "h_tp", "l_tp")]
    preds += [label_pred(p, []) for p in ("h3", "h4", "l1", "l2", "l3")]
    return preds, silver, strata


def test_disparity_engineered_ratio_exact():
    preds, silver, strata = engineered_fixture()
    cells = disparity(preds, silver, strata)
    rec = cells["anger"].as_record()
    assert rec["fpr_high"]["value"] == 0.6
    assert rec["fpr_low"]["value"] == 0.25
    assert rec["dfpr"]["value"] == 2.4  # exactly, not approximately
    assert rec["dfpr"]["undefined"] is False


def test_disparity_ratio_equals_independent_quotient():
    rng = random.Random(SEED + 1)
    for _ in range(100):
        fp_h, tn_h = rng.randint(1, 9), rng.randint(1, 9)
        fp_l, tn_l = rng.randint(1, 9), rng.randint(1, 9)
        cell_rec = make_cell(fp_h, tn_h, fp_l, tn_l)
        want = (fp_h / (fp_h + tn_h)) / (fp_l / (fp_l + tn_l))
        assert cell_rec["dfpr"]["value"] == pytest.approx(want, abs=1e-12)


def make_cell(fp_h, tn_h, fp_l, tn_l):
    from dialect_audit.stats import DisparityCell
    cell = DisparityCell(
        emotion="anger",
        high=ConfusionCounts(tp=1, fp=fp_h, tn=tn_h, fn=1),
        low=ConfusionCounts(tp=1, fp=fp_l, tn=tn_l, fn=1))
    return cell.as_record()


def test_disparity_undefined_when_low_rate_zero():
    rec = make_cell(2, 3, 0, 5)
    assert rec["fpr_low"]["value"] == 0.0
    assert rec["dfpr"]["undefined"] is True
    assert rec["dfpr"]["value"] is None
    assert rec["dfpr"]["numerator"] == pytest.approx(0.4)


def test_disparity_empty_stratum_is_error():
    preds, silver, strata = engineered_fixture()
    only_high = {p: s for p, s in strata.items() if s == "high"}
    only_high["l0"] = "low"  # stratum exists but no predictions overlap it
    preds = [p for p in preds if not p.post_id.startswith("l")]
    with pytest.raises(StatsError, match="stratum has no scored decisions"):
        disparity(preds, silver, only_high)


def test_disparity_emotion_in_one_stratum_is_error():
    strata = {"h0": "high", "h1": "high", "l0": "low", "l1": "low"}
    silver = [silver_row("h0", "anger", False), silver_row("l0", "anger", True),
              silver_row("h1", "joy", False)]
    preds = [label_pred(p, ["anger"]) for p in strata]
    with pytest.raises(StatsError, match="'joy' missing from one stratum"):
        disparity(preds, silver, strata)


def test_disparity_means_skips_undefined():
    from dialect_audit.stats import DisparityCell
    defined = DisparityCell("anger",
                            high=ConfusionCounts(tp=1, fp=3, tn=2, fn=1),
                            low=ConfusionCounts(tp=1, fp=1, tn=3, fn=1))
    undef = DisparityCell("joy",
                          high=ConfusionCounts(tp=1, fp=2, tn=3, fn=1),
                          low=ConfusionCounts(tp=1, fp=0, tn=5, fn=1))
    means = disparity_means({"anger": defined, "joy": undef})
    assert means["dfpr"] == 2.4  # joy's undefined ratio is skipped
    assert means["fpr_high"] == pytest.approx((0.6 + 0.4) / 2)


# ---------------------------------------------------------------- kappa

def test_kappa_worked_examples():
    assert kappa([1, 1, 0, 0], [1, 1, 0, 0]) == 1.0
    assert kappa([1, 1, 0, 0], [1, 0, 0, 1]) == 0.0
    assert kappa([1, 1, 1], [1, 1, 1]) == 1.0  # identical constants
    assert kappa([1, 1, 1], [0, 0, 0]) == 0.0  # opposite constants


def test_kappa_validation():
    with pytest.raises(StatsError, match="differ in length"):
        kappa([1, 0], [1])
    with pytest.raises(StatsError, match="at least 2"):
        kappa([1], [1])


def test_kappa_randomized_matches_oracle():
    rng = random.Random(SEED + 2)
    for _ in range(150):
        n = rng.randint(2, 30)
        a = [rng.randint(0, 1) for _ in range(n)]
        b = [rng.randint(0, 1) for _ in range(n)]
        assert kappa(a, b) == pytest.approx(oracles.kappa_oracle(a, b),
                                            abs=1e-12)


def test_kappa_symmetric():
    rng = random.Random(SEED + 3)
    for _ in range(50):
        n = rng.randint(2, 20)
        a = [rng.randint(0, 1) for _ in range(n)]
        b = [rng.randint(0, 1) for _ in range(n)]
        assert kappa(a, b) == pytest.approx(kappa(b, a), abs=1e-12)


def test_kappa_weighted_cases():
    assert kappa_weighted([1, 2, 3, 2], [1, 2, 3, 2]) == 1.0
    assert kappa_weighted([1, 2, 3], [3, 2, 1]) == pytest.approx(-0.5)
    with pytest.raises(StatsError, match="outside categories"):
        kappa_weighted([1, 9], [1, 2])


# ------------------------------------------------------------ agreement

def ann(post, annotator, group, emotion, intensity):
    return Annotation(post_id=post, annotator_id=annotator, group=group,
                      emotion=emotion, intensity=intensity)


def agreement_fixture():
    anns = []
    # two ingroup annotators agreeing perfectly over 4 posts, both classes
    pattern = [3, 1, 3, 1]
    for i, v in enumerate(pattern):
        anns.append(ann(f"p{i}", "a1", "ingroup", "anger", v))
        anns.append(ann(f"p{i}", "a2", "ingroup", "anger", v))
    # one outgroup annotator disagreeing everywhere
    for i, v in enumerate(pattern):
        anns.append(ann(f"p{i}", "b1", "outgroup", "anger", 4 - v))
    return anns


def test_agreement_matrix_pairings_and_values():
    anns = agreement_fixture()
    models = {"m/zero": {f"p{i}": frozenset({"anger"}) if v >= 2 else frozenset()
                         for i, v in enumerate([3, 1, 3, 1])}}
    mat = agreement_matrix(anns, models, emotions=("anger",))
    rec = mat.as_record()
    assert rec["in_in"]["anger"]["mean_kappa"] == 1.0
    assert rec["in_in"]["anger"]["n_pairs"] == 1
    assert rec["in_out"]["anger"]["mean_kappa"] == pytest.approx(-1.0)
    assert rec["model_in"]["anger"]["mean_kappa"] == 1.0
    assert rec["model_out"]["anger"]["mean_kappa"] == pytest.approx(-1.0)
    assert "out_out" not in rec  # only one outgroup annotator: empty cell


def test_agreement_binarizes_at_slight():
    # intensity 2 counts as presence when binarized
    anns = [ann("p0", "a1", "ingroup", "joy", 2),
            ann("p0", "a2", "ingroup", "joy", 3),
            ann("p1", "a1", "ingroup", "joy", 1),
            ann("p1", "a2", "ingroup", "joy", 1)]
    mat = agreement_matrix(anns, {}, emotions=("joy",))
    assert mat.cells[("in_in", "joy")] == 1.0


def test_agreement_overlap_floor():
    anns = [ann("p0", "a1", "ingroup", "joy", 2),
            ann("p0", "a2", "ingroup", "joy", 2)]  # single shared post
    mat = agreement_matrix(anns, {}, emotions=("joy",))
    assert mat.cells == {}


def test_agreement_annotator_in_two_groups_rejected():
    anns = [ann("p0", "a1", "ingroup", "joy", 2),
            ann("p1", "a1", "outgroup", "joy", 2)]
    with pytest.raises(StatsError, match="two groups"):
        agreement_matrix(anns, {}, emotions=("joy",))


# ----------------------------------------------------------------- jsd

def test_jsd_basic_values():
    assert jsd([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert jsd([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)
    assert jsd([2, 2, 0], [1, 1, 0]) == 0.0  # renormalization first


def test_jsd_matches_entropy_identity():
    rng = random.Random(SEED + 4)
    for _ in range(100):
        k = rng.randint(2, 8)
        p = [rng.random() for _ in range(k)]
        q = [rng.random() for _ in range(k)]
        assert jsd(p, q) == pytest.approx(oracles.jsd_oracle(p, q), abs=1e-12)


def test_jsd_validation():
    with pytest.raises(StatsError, match="length"):
        jsd([1, 0], [1, 0, 0])
    with pytest.raises(StatsError, match="non-negative"):
        jsd([1, -1], [1, 0])
    with pytest.raises(StatsError, match="all-zero"):
        jsd([0, 0], [1, 0])


@given(st.lists(st.floats(min_value=0, max_value=100, allow_nan=False),
                min_size=2, max_size=8).filter(lambda v: sum(v) > 0),
       st.data())
def test_jsd_properties(p, data):
    q = data.draw(st.lists(st.floats(min_value=0, max_value=100,
                                     allow_nan=False),
                           min_size=len(p), max_size=len(p))
                  .filter(lambda v: sum(v) > 0))
    d = jsd(p, q)
    assert 0.0 <= d <= 1.0 + 1e-12
    assert jsd(q, p) == pytest.approx(d, abs=1e-12)
    assert jsd(p, p) == pytest.approx(0.0, abs=1e-12)


# -------------------------------------------------- representativeness

def test_representativeness_identity():
    preds = [label_pred("a", ["anger"]), label_pred("b", ["anger", "joy"]),
             label_pred("c", ["joy"]), label_pred("d", [])]
    out = sample_representativeness(preds, list(preds),
                                    emotions=("anger", "joy", "sadness"))
    assert out["jsd"] == 0.0
    assert out["pearson_r"] == pytest.approx(1.0)
    assert out["delta_refusal"] == 0.0


def test_representativeness_degenerate_constant_vector():
    preds = [label_pred("a", ["anger", "joy"]), label_pred("b", ["anger", "joy"])]
    out = sample_representativeness(preds, list(preds),
                                    emotions=("anger", "joy"))
    assert out["pearson_r"] is None
    assert out["jsd"] == 0.0


def test_representativeness_refusal_delta():
    full = [label_pred("a", ["anger"]), label_pred("b", ["joy"]),
            Prediction(post_id="c", model_id="m", prompt_schema="zero",
                       refusal=True), label_pred("d", [])]
    sample = [p for p in full if not p.refusal]
    out = sample_representativeness(sample, full, emotions=("anger", "joy"))
    assert out["delta_refusal"] == pytest.approx(-0.25)


# ----------------------------------------------------------------- anova

def test_anova_hand_case():
    values = [1, 1, 1, 0, 0, 0, 0, 1]
    groups = ["a"] * 4 + ["b"] * 4
    f, p = anova_group_test(values, groups)
    assert f == pytest.approx(2.0)
    assert p == pytest.approx(f_sf(2.0, 1, 6), abs=1e-12)


def test_anova_equal_means():
    f, p = anova_group_test([1, 0, 1, 0], ["a", "a", "b", "b"])
    assert f == 0.0
    assert p == 1.0


def test_anova_validation():
    with pytest.raises(StatsError, match="exactly 2 groups"):
        anova_group_test([1, 2, 3], ["a", "b", "c"])
    with pytest.raises(StatsError, match="zero within-group"):
        anova_group_test([1, 1, 0, 0], ["a", "a", "b", "b"])
    with pytest.raises(StatsError, match="at least 3"):
        anova_group_test([1, 0], ["a", "b"])


def test_anova_randomized_matches_oracle():
    rng = random.Random(SEED + 5)
    checked = 0
    while checked < 120:
        n = rng.randint(4, 30)
        values = [rng.random() for _ in range(n)]
        groups = ["a", "b"] + [rng.choice("ab") for _ in range(n - 2)]
        f, p = anova_group_test(values, groups)
        want = oracles.anova_oracle(values, groups)
        assert f == pytest.approx(want, rel=1e-9, abs=1e-12)
        assert 0.0 <= p <= 1.0
        checked += 1


# --------------------------------------------------------------- pearson

def test_pearson_exact_lines():
    x = [1.0, 2.0, 3.0, 4.0]
    r, p = pearson(x, [2 * v + 1 for v in x])
    assert (r, p) == (1.0, 0.0)
    r, p = pearson(x, [-v for v in x])
    assert (r, p) == (-1.0, 0.0)


def test_pearson_validation():
    with pytest.raises(StatsError, match="at least 3"):
        pearson([1, 2], [1, 2])
    with pytest.raises(StatsError, match="constant"):
        pearson([1, 1, 1], [1, 2, 3])


def test_pearson_r_randomized_matches_oracle():
    rng = random.Random(SEED + 6)
    for _ in range(150):
        n = rng.randint(3, 30)
        x = [rng.random() for _ in range(n)]
        y = [rng.random() for _ in range(n)]
        r, p = pearson(x, y)
        assert r == pytest.approx(oracles.pearson_r_oracle(x, y), abs=1e-12)
        assert 0.0 <= p <= 1.0


def test_pearson_p_matches_permutation_oracle():
    rng = np.random.default_rng(SEED + 7)
    data_rng = random.Random(SEED + 8)
    for _ in range(100):
        # t-based p tracks the exact permutation test once n is moderate;
        # below ~14 observations the approximation drifts past 0.02
        n = data_rng.randint(15, 25)
        x = [data_rng.random() for _ in range(n)]
        y = [data_rng.random() for _ in range(n)]
        _, p = pearson(x, y)
        p_perm = oracles.pearson_perm_p(x, y, rng)
        assert p == pytest.approx(p_perm, abs=0.02)


# ------------------------------------------------------------ regression

def test_regress_exact_recovery():
    a = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 1.5, 2.5]
    b = [1.0, 0.0, 2.0, 1.0, 3.0, 0.5, 2.5, 1.5, 0.25, 3.5]
    y = [3.0 + 2.0 * ai - bi for ai, bi in zip(a, b)]
    res = regress(y, {"a": a, "b": b})
    assert res.intercept.beta == pytest.approx(3.0, abs=1e-9)
    coefs = {c.name: c for c in res.coefficients}
    assert coefs["a"].beta == pytest.approx(2.0, abs=1e-9)
    assert coefs["b"].beta == pytest.approx(-1.0, abs=1e-9)
    assert res.r_squared == pytest.approx(1.0, abs=1e-12)
    # near-zero residual noise from the solver, so p collapses to ~0
    assert coefs["a"].p_value < 1e-50
    assert coefs["a"].significant
    assert res.n == 10 and res.excluded == ()


def test_regress_randomized_matches_normal_equations():
    rng = np.random.default_rng(SEED + 9)
    for _ in range(120):
        n = int(rng.integers(8, 40))
        k = int(rng.integers(1, 4))
        X = rng.standard_normal((n, k))
        beta_true = rng.standard_normal(k + 1)
        y = beta_true[0] + X @ beta_true[1:] + rng.standard_normal(n) * 0.3
        feats = {f"f{j}": X[:, j].tolist() for j in range(k)}
        res = regress(y.tolist(), feats)
        want_beta, want_r2 = oracles.ols_oracle(y.tolist(),
                                                [X[:, j] for j in range(k)])
        assert res.intercept.beta == pytest.approx(want_beta[0], abs=1e-6)
        for j, c in enumerate(res.coefficients):
            assert c.beta == pytest.approx(want_beta[j + 1], abs=1e-6)
        assert res.r_squared == pytest.approx(want_r2, abs=1e-9)
        # residuals orthogonal to the design
        resid = np.asarray(y) - (res.intercept.beta + X @ np.array(
            [c.beta for c in res.coefficients]))
        assert abs(float(resid.sum())) < 1e-8 * n
        assert np.all(np.abs(X.T @ resid) < 1e-7 * n)


def test_regress_rank_deficiency_names_columns():
    a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    with pytest.raises(StatsError, match="rank-deficient.*b"):
        regress([1, 2, 1, 2, 1, 2], {"a": a, "b": [2 * v for v in a]})


def test_regress_jitter_resolves_dependence_deterministically():
    a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]
    y = [1, 2, 1, 2, 1, 2, 1, 2]
    r1 = regress(y, {"a": a, "b": list(a)}, jitter_seed=7)
    r2 = regress(y, {"a": a, "b": list(a)}, jitter_seed=7)
    assert r1 == r2
    assert len(r1.coefficients) == 2


def test_regress_excludes_perplexity_columns():
    a = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
    res = regress([1.0, 2.0, 2.5, 4.2, 4.1, 6.0],
                  {"a": a, "ext:ppl_diff": [9, 9, 9, 9, 9, 9]})
    assert res.excluded == ("ext:ppl_diff",)
    assert [c.name for c in res.coefficients] == ["a"]


def test_regress_validation():
    with pytest.raises(StatsError, match="more than"):
        regress([1, 2, 3], {"a": [1, 2, 3], "b": [3, 2, 1]})
    with pytest.raises(StatsError, match="constant response"):
        regress([2, 2, 2, 2], {"a": [1, 2, 3, 4]})
    with pytest.raises(StatsError, match="no usable feature"):
        regress([1, 2, 3], {"ext:ppl_x": [1, 2, 3]})
    with pytest.raises(StatsError, match="length mismatch"):
        regress([1, 2, 3, 4], {"a": [1, 2, 3]})


def test_feature_influence_summary():
    def coef(name, beta, p):
        return CoefStat(name=name, beta=beta, std_err=0.1,
                        t_stat=beta / 0.1, p_value=p)

    res = RegressionResult(
        intercept=coef("intercept", 0.5, 0.9),
        coefficients=(coef("aint", 0.29, 0.01), coef("slang", 0.4, 0.5)),
        r_squared=0.5, n=10, excluded=())
    out = feature_influence_summary([("run1", "anger", res),
                                     ("run2", "anger", res)])
    assert out["cells"] == {"anger/aint": pytest.approx(0.29)}
    assert out["abs_mean"] == {"aint": pytest.approx(0.29)}
    assert feature_influence_summary([]) == {"cells": {}, "abs_mean": {}}
