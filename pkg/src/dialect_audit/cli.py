"""Staged pipeline command line.

Each subcommand reads the upstream stage's artifacts from the output
directory and writes its own; `report` bundles every table into CSV plus a
nested JSON document and renders the SVG charts. All outputs are
deterministic for a fixed config, inputs, and seed.
"""

import argparse
import json
import os
import sys
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from . import density
from . import geo as geolib
from . import stats as statslib
from .features import BUILTIN_FEATURES, detect_all, import_external_scores
from .ingest import (CleanConfig, Rejected, clean, clean_post_to_record,
                     load_corpus, record_to_clean_post)
from .labels import (ANNOTATABLE, load_annotations, load_lexicon,
                     load_predictions, nrc_score, silver)
from .report import (render_agreement_chart, render_disparity_chart,
                     write_table)
from .tagging import (TAGGER_VERSION, annotate, export_annotations,
                      import_annotations)
from .taxonomy import load_taxonomy
from .util import (AuditError, dump_json, read_jsonl, sha256_file,
                   sha256_text, write_jsonl)

OUTPUT_DIR_ENV = "DIALECT_AUDIT_OUTDIR"

STAGES = ("clean", "annotate", "ddm", "silver", "audit", "agree", "regress",
          "geo", "report")


class ConfigError(AuditError):
    pass


class MissingArtifactError(AuditError):
    """An upstream artifact is absent; message names the producing stage."""


@dataclass
class RunConfig:
    corpus: Path
    output_dir: Path
    config_hash: str
    annotations: Optional[Path] = None
    predictions: tuple = ()
    taxonomy: Optional[Path] = None  # None -> bundled default
    lexicon: Optional[Path] = None
    tracts: Optional[Path] = None
    demographics: Optional[Path] = None
    neighborhoods: Optional[Path] = None
    external_scores: Optional[Path] = None
    ddm_threshold: float = density.DEFAULT_THRESHOLD
    score_threshold: float = 0.05
    features: tuple = BUILTIN_FEATURES
    seed: int = 0
    min_neighborhood_posts: int = geolib.DEFAULT_MIN_NEIGHBORHOOD_POSTS
    min_tokens: int = 6
    jitter_seed: Optional[int] = None
    strict: bool = False


_INPUT_KEYS = ("corpus", "annotations", "predictions", "taxonomy", "lexicon",
               "tracts", "demographics", "neighborhoods", "external_scores")
_PARAM_KEYS = ("ddm_threshold", "score_threshold", "features", "seed",
               "min_neighborhood_posts", "min_tokens", "jitter_seed",
               "output_dir")


def _read_config_file(path: Path) -> tuple[dict, dict]:
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}")
    unknown = set(doc) - {"inputs", "params"}
    if unknown:
        raise ConfigError(f"{path}: unknown sections {sorted(unknown)}")
    inputs = doc.get("inputs", {})
    params = doc.get("params", {})
    bad = set(inputs) - set(_INPUT_KEYS)
    if bad:
        raise ConfigError(f"{path}: unknown input keys {sorted(bad)}")
    bad = set(params) - set(_PARAM_KEYS)
    if bad:
        raise ConfigError(f"{path}: unknown param keys {sorted(bad)}")
    return inputs, params


def build_config(args: argparse.Namespace) -> RunConfig:
    inputs: dict = {}
    params: dict = {}
    base = Path(".")
    if args.config:
        cfg_path = Path(args.config)
        inputs, params = _read_config_file(cfg_path)
        base = cfg_path.parent

    def flag(name, default=None):
        v = getattr(args, name, None)
        return v if v is not None else default

    # flags take precedence over the config file
    raw_inputs = {k: inputs.get(k) for k in _INPUT_KEYS}
    for k in _INPUT_KEYS:
        v = flag(k)
        if v:
            raw_inputs[k] = v
    if not raw_inputs.get("corpus"):
        raise ConfigError("a corpus path is required (flag or config file)")

    preds = raw_inputs.get("predictions") or ()
    if isinstance(preds, (str, Path)):
        preds = [preds]

    def resolve(v):
        p = Path(v)
        return p if p.is_absolute() else base / p

    hash_doc = {
        "inputs": {k: ([str(x) for x in raw_inputs[k]]
                       if k == "predictions" and raw_inputs[k] else
                       (str(raw_inputs[k]) if raw_inputs[k] else None))
                   for k in _INPUT_KEYS},
        "params": {},
    }

    merged: dict = dict(params)
    for k in ("ddm_threshold", "score_threshold", "seed",
              "min_neighborhood_posts", "min_tokens", "jitter_seed"):
        v = flag(k)
        if v is not None:
            merged[k] = v
    if flag("features"):
        merged["features"] = [f.strip() for f in args.features.split(",")
                              if f.strip()]
    for k in sorted(set(merged) - {"output_dir"}):
        hash_doc["params"][k] = merged[k]
    config_hash = sha256_text(json.dumps(hash_doc, sort_keys=True))

    out = merged.get("output_dir", "out")
    env_out = os.environ.get(OUTPUT_DIR_ENV)
    if env_out:
        out = env_out
    if flag("out"):
        out = args.out
    out_path = Path(out)
    if not out_path.is_absolute() and not env_out and not flag("out"):
        out_path = base / out_path

    features = tuple(merged.get("features", BUILTIN_FEATURES))
    unknown_features = set(features) - set(BUILTIN_FEATURES)
    if unknown_features:
        raise ConfigError(f"unknown features: {sorted(unknown_features)}")
    if not features:
        raise ConfigError("enabled feature set is empty")

    cfg = RunConfig(
        corpus=resolve(raw_inputs["corpus"]),
        output_dir=out_path,
        config_hash=config_hash,
        annotations=resolve(raw_inputs["annotations"])
        if raw_inputs.get("annotations") else None,
        predictions=tuple(resolve(p) for p in preds),
        taxonomy=resolve(raw_inputs["taxonomy"])
        if raw_inputs.get("taxonomy") else None,
        lexicon=resolve(raw_inputs["lexicon"])
        if raw_inputs.get("lexicon") else None,
        tracts=resolve(raw_inputs["tracts"])
        if raw_inputs.get("tracts") else None,
        demographics=resolve(raw_inputs["demographics"])
        if raw_inputs.get("demographics") else None,
        neighborhoods=resolve(raw_inputs["neighborhoods"])
        if raw_inputs.get("neighborhoods") else None,
        external_scores=resolve(raw_inputs["external_scores"])
        if raw_inputs.get("external_scores") else None,
        ddm_threshold=float(merged.get("ddm_threshold",
                                       density.DEFAULT_THRESHOLD)),
        score_threshold=float(merged.get("score_threshold", 0.05)),
        features=features,
        seed=int(merged.get("seed", 0)),
        min_neighborhood_posts=int(merged.get(
            "min_neighborhood_posts", geolib.DEFAULT_MIN_NEIGHBORHOOD_POSTS)),
        min_tokens=int(merged.get("min_tokens", 6)),
        jitter_seed=(int(merged["jitter_seed"])
                     if merged.get("jitter_seed") is not None else None),
        strict=bool(getattr(args, "strict", False)),
    )
    for t, name in ((cfg.ddm_threshold, "ddm_threshold"),
                    (cfg.score_threshold, "score_threshold")):
        if not 0.0 <= t <= 1.0:
            raise ConfigError(f"{name} must be in [0,1], got {t}")
    for p in (cfg.corpus, cfg.annotations, cfg.taxonomy, cfg.lexicon,
              cfg.tracts, cfg.demographics, cfg.neighborhoods,
              cfg.external_scores, *cfg.predictions):
        if p is not None and not Path(p).exists():
            raise FileNotFoundError(f"configured input does not exist: {p}")
    return cfg


# ------------------------------------------------------------ plumbing

def _artifact(cfg: RunConfig, name: str, producer: str) -> Path:
    p = cfg.output_dir / name
    if not p.exists():
        raise MissingArtifactError(
            f"missing artifact {name}; run the `{producer}` subcommand first")
    return p


def _meta(cfg: RunConfig) -> dict:
    tax = load_taxonomy(cfg.taxonomy)
    return {
        "config_hash": cfg.config_hash,
        "corpus_sha256": sha256_file(cfg.corpus),
        "taxonomy_sha256": tax.source_hash,
        "tagger_version": TAGGER_VERSION,
        "ddm_threshold": cfg.ddm_threshold,
        "score_threshold": cfg.score_threshold,
        "features": list(cfg.features),
        "seed": cfg.seed,
    }


def _meta_line(meta: dict) -> str:
    return (f"config={meta['config_hash'][:12]} "
            f"corpus={meta['corpus_sha256'][:12]} "
            f"taxonomy={meta['taxonomy_sha256'][:12]} "
            f"tagger={meta['tagger_version']} "
            f"ddm_threshold={meta['ddm_threshold']:g} "
            f"score_threshold={meta['score_threshold']:g}")


def _read_clean_posts(cfg: RunConfig) -> list:
    path = _artifact(cfg, "clean_posts.jsonl", "clean")
    return [record_to_clean_post(rec) for _ln, rec in read_jsonl(path)]


def _read_docs(cfg: RunConfig, posts: list) -> tuple[dict, list]:
    path = _artifact(cfg, "annotations_pos.txt", "annotate")
    diags: list = []
    docs = import_annotations(path, {p.id: p.token_count for p in posts},
                              diagnostics=diags)
    return docs, diags


def _read_ddm(cfg: RunConfig) -> tuple[dict, dict, dict]:
    """(post -> ddm, post -> stratum, post -> normalized feature map)."""
    path = _artifact(cfg, "ddm_scores.jsonl", "ddm")
    ddm, strata, normalized = {}, {}, {}
    for _ln, rec in read_jsonl(path):
        pid = rec["post_id"]
        ddm[pid] = float(rec["ddm"])
        strata[pid] = rec["stratum"]
        normalized[pid] = {k: float(v) for k, v in rec["normalized"].items()}
    return ddm, strata, normalized


def _read_silver(cfg: RunConfig) -> list:
    from .labels import SilverLabel
    path = _artifact(cfg, "silver_labels.jsonl", "silver")
    out = []
    for _ln, rec in read_jsonl(path):
        out.append(SilverLabel(
            post_id=rec["post_id"], emotion=rec["emotion"],
            present=bool(rec["present"]),
            intensity_mode=float(rec["intensity_mode"]),
            eligible_group=rec["eligible_group"],
            n_annotators=int(rec["n_annotators"])))
    return out


def _nrc_predictions(cfg: RunConfig) -> list:
    posts = _read_clean_posts(cfg)
    docs, _diags = _read_docs(cfg, posts)
    tax = load_taxonomy(cfg.taxonomy)
    lexicon = load_lexicon(cfg.lexicon)
    return [nrc_score(docs[p.id], lexicon, tax)
            for p in sorted(posts, key=lambda p: p.id) if p.id in docs]


def _prediction_groups(cfg: RunConfig) -> dict:
    """(model_id/prompt_schema) string -> list of Prediction."""
    groups: dict = {}
    for path in cfg.predictions:
        for pred in load_predictions(path):
            key = f"{pred.model_id}/{pred.prompt_schema}"
            groups.setdefault(key, []).append(pred)
    if cfg.lexicon is not None:
        for pred in _nrc_predictions(cfg):
            groups.setdefault("nrc/none", []).append(pred)
    for key in groups:
        groups[key].sort(key=lambda p: p.post_id)
    return dict(sorted(groups.items()))


# -------------------------------------------------------------- stages

def stage_clean(cfg: RunConfig) -> list:
    malformed: list = []
    posts, rejects = [], []
    for raw in load_corpus(cfg.corpus, on_malformed=lambda ln, msg:
                           malformed.append({"line": ln, "reason": msg})):
        res = clean(raw, CleanConfig(min_tokens=cfg.min_tokens))
        if isinstance(res, Rejected):
            rejects.append(res)
        else:
            posts.append(res)
    posts.sort(key=lambda p: p.id)
    rejects.sort(key=lambda r: r.id)
    write_jsonl(cfg.output_dir / "clean_posts.jsonl",
                [clean_post_to_record(p) for p in posts])
    write_jsonl(cfg.output_dir / "rejected.jsonl",
                [{"id": r.id, "reason": r.reason} for r in rejects])
    summary = {
        "config_hash": cfg.config_hash,
        "corpus_sha256": sha256_file(cfg.corpus),
        "n_clean": len(posts),
        "n_rejected": len(rejects),
        "n_malformed": len(malformed),
        "reject_reasons": dict(sorted(Counter(r.reason
                                              for r in rejects).items())),
        "malformed_lines": malformed,
    }
    dump_json(cfg.output_dir / "clean_summary.json", summary)
    return [f"malformed corpus line {m['line']}: {m['reason']}"
            for m in malformed]


def stage_annotate(cfg: RunConfig) -> list:
    posts = _read_clean_posts(cfg)
    docs = [annotate(p) for p in posts]
    export_annotations(docs, cfg.output_dir / "annotations_pos.txt")
    return []


def stage_ddm(cfg: RunConfig) -> list:
    posts = _read_clean_posts(cfg)
    docs, diags = _read_docs(cfg, posts)
    missing = sorted(p.id for p in posts if p.id not in docs)
    if missing:
        raise AuditError(f"posts lack annotations: {missing}")
    vectors = [detect_all(docs[p.id], cfg.features)
               for p in sorted(posts, key=lambda p: p.id)]
    external = None
    if cfg.external_scores is not None:
        external = import_external_scores(cfg.external_scores,
                                          {p.id for p in posts})
    norm = density.fit_normalizer(vectors, external)
    records = []
    for v in vectors:
        s = density.score(v, norm, cfg.ddm_threshold, external)
        records.append({"post_id": s.post_id, "ddm": s.ddm,
                        "stratum": s.stratum, "normalized": s.normalized})
    write_jsonl(cfg.output_dir / "ddm_scores.jsonl", records)
    sidecar = norm.as_record()
    sidecar["threshold"] = cfg.ddm_threshold
    sidecar["config_hash"] = cfg.config_hash
    dump_json(cfg.output_dir / "normalization_stats.json", sidecar)
    return diags


def stage_silver(cfg: RunConfig) -> list:
    if cfg.annotations is None:
        raise ConfigError("silver requires an annotations input")
    anns = load_annotations(cfg.annotations)
    _ddm, strata, _norm = _read_ddm(cfg)
    res = silver(anns, strata)
    write_jsonl(cfg.output_dir / "silver_labels.jsonl", [
        {"post_id": s.post_id, "emotion": s.emotion, "present": s.present,
         "intensity_mode": s.intensity_mode,
         "eligible_group": s.eligible_group,
         "n_annotators": s.n_annotators}
        for s in res.labels])
    dump_json(cfg.output_dir / "silver_summary.json", {
        "config_hash": cfg.config_hash,
        "n_labels": len(res.labels),
        "excluded_posts": res.excluded_posts,
        "extreme_disagreement": {
            "pre_gating": {"markers": res.extreme_pre_gating,
                           "posts": res.extreme_posts_pre},
            "post_gating": {"markers": res.extreme_post_gating,
                            "posts": res.extreme_posts_post},
        },
    })
    return [f"high-density post {p} has no ingroup annotation; excluded"
            for p in res.excluded_posts]


def stage_audit(cfg: RunConfig) -> list:
    silver_labels = _read_silver(cfg)
    _ddm, strata, _norm = _read_ddm(cfg)
    groups = _prediction_groups(cfg)
    if not groups:
        raise ConfigError("no predictions configured (predictions files "
                          "or a lexicon are required for audit)")
    if cfg.lexicon is not None and "nrc/none" in groups:
        write_jsonl(cfg.output_dir / "nrc_predictions.jsonl", [
            {"post_id": p.post_id, "model_id": p.model_id,
             "prompt_schema": p.prompt_schema, "scores": p.scores,
             "refusal": p.refusal}
            for p in groups["nrc/none"]])
    diags: list = []
    out_groups: dict = {}
    for key, preds in groups.items():
        model_id, schema = key.split("/", 1)
        entry: dict = {
            "model_id": model_id,
            "prompt_schema": schema,
            "n_predictions": len(preds),
            "refusal_rate": statslib.refusal_rate(preds),
        }
        per = statslib.confusion(preds, silver_labels, cfg.score_threshold)
        entry["confusion"] = {}
        for emotion, c in per.items():
            rec = {"tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn,
                   "precision": c.precision.as_record(),
                   "recall": c.recall.as_record(),
                   "f1": c.f1.as_record()}
            entry["confusion"][emotion] = rec
            for name in ("precision", "recall", "f1"):
                if rec[name]["undefined"]:
                    diags.append(f"{key}/{emotion}: undefined {name}")
        try:
            cells = statslib.disparity(preds, silver_labels, strata,
                                       cfg.score_threshold)
            entry["disparity"] = {e: c.as_record()
                                  for e, c in cells.items()}
            entry["disparity_means"] = statslib.disparity_means(cells)
            for e, rec in entry["disparity"].items():
                for name in ("dfpr", "dfnr"):
                    if rec[name]["undefined"]:
                        diags.append(f"{key}/{e}: undefined {name}")
        except statslib.StatsError as e:
            entry["disparity_error"] = str(e)
            diags.append(f"{key}: disparity not computed: {e}")
        out_groups[key] = entry
    dump_json(cfg.output_dir / "audit.json",
              {"meta": _meta(cfg), "groups": out_groups})
    return diags


def stage_agree(cfg: RunConfig) -> list:
    if cfg.annotations is None:
        raise ConfigError("agree requires an annotations input")
    anns = load_annotations(cfg.annotations)
    groups = _prediction_groups(cfg)
    model_sets = {key: statslib.prediction_sets(preds, cfg.score_threshold)
                  for key, preds in groups.items()}
    matrix = statslib.agreement_matrix(anns, model_sets, ANNOTATABLE)
    dump_json(cfg.output_dir / "agreement.json",
              {"meta": _meta(cfg), "matrix": matrix.as_record()})
    return []


def stage_regress(cfg: RunConfig) -> list:
    if cfg.annotations is None:
        raise ConfigError("regress requires an annotations input")
    anns = load_annotations(cfg.annotations)
    _ddm, _strata, normalized = _read_ddm(cfg)
    groups = _prediction_groups(cfg)

    runs: list = []
    diags: list = []

    def run_one(key: str, group: str, emotion: str, post_ids: list,
                y: list) -> None:
        if not post_ids:
            return
        feats = sorted(normalized[post_ids[0]])
        X = {f: [normalized[p][f] for p in post_ids] for f in feats}
        try:
            res = statslib.regress(y, X, jitter_seed=cfg.jitter_seed)
        except statslib.StatsError as e:
            runs.append({"key": key, "group": group, "emotion": emotion,
                         "n": len(post_ids), "skipped": str(e)})
            diags.append(f"regression skipped ({key}, {emotion}): {e}")
            return
        runs.append({"key": key, "group": group, "emotion": emotion,
                     **res.as_record()})

    by_annotator: dict = {}
    ann_group: dict = {}
    for a in anns:
        by_annotator.setdefault((a.annotator_id, a.emotion), {})[a.post_id] = a
        ann_group[a.annotator_id] = a.group
    for (annotator, emotion), per_post in sorted(by_annotator.items()):
        post_ids = sorted(p for p in per_post if p in normalized)
        y = [1.0 if per_post[p].intensity >= 2 else 0.0 for p in post_ids]
        run_one(f"annotator:{annotator}", ann_group[annotator], emotion,
                post_ids, y)

    for key, preds in groups.items():
        sets = statslib.prediction_sets(preds, cfg.score_threshold)
        post_ids = sorted(p for p in sets if p in normalized)
        for emotion in ANNOTATABLE:
            y = [1.0 if emotion in sets[p] else 0.0 for p in post_ids]
            run_one(key, key, emotion, post_ids, y)

    influence = {}
    for group in sorted({r["group"] for r in runs}):
        entries = []
        for r in runs:
            if r["group"] != group or "skipped" in r:
                continue
            coefs = tuple(statslib.CoefStat(**{k: c[k] for k in
                          ("name", "beta", "std_err", "t_stat", "p_value")})
                          for c in r["coefficients"])
            res = statslib.RegressionResult(
                intercept=statslib.CoefStat(**{k: r["intercept"][k] for k in
                          ("name", "beta", "std_err", "t_stat", "p_value")}),
                coefficients=coefs, r_squared=r["r_squared"], n=r["n"],
                excluded=tuple(r["excluded"]))
            entries.append((r["key"], r["emotion"], res))
        influence[group] = statslib.feature_influence_summary(entries)

    dump_json(cfg.output_dir / "regressions.json",
              {"meta": _meta(cfg), "runs": runs, "influence": influence})
    return diags


def stage_geo(cfg: RunConfig) -> list:
    for name in ("tracts", "demographics", "neighborhoods"):
        if getattr(cfg, name) is None:
            raise ConfigError(f"geo requires a {name} input")
    posts = _read_clean_posts(cfg)
    tracts = geolib.load_tracts(cfg.tracts)
    demo = geolib.load_demographics(cfg.demographics)
    defs = geolib.load_neighborhood_defs(cfg.neighborhoods)
    join = geolib.join_posts(posts, tracts, defs)
    neighborhoods = geolib.build_neighborhoods(defs, demo, join)
    ddm_by_post, _strata, _norm = _read_ddm(cfg)

    write_jsonl(cfg.output_dir / "geo_joins.jsonl", [
        {"post_id": pid, "geoid": geoid,
         "neighborhood": join.post_neighborhood.get(pid)}
        for pid, geoid in sorted(join.post_tract.items())])

    nb_demo = {nb.name: nb.demographics for nb in neighborhoods}
    demo_by_post = {pid: nb_demo[nb]
                    for pid, nb in join.post_neighborhood.items()}
    try:
        ddm_check = density.ddm_demographic_check(ddm_by_post, demo_by_post)
    except density.DensityError as e:
        ddm_check = {"error": str(e)}

    diags: list = []
    if join.diagnostics["unmapped_tract"]:
        diags.append(f"{join.diagnostics['unmapped_tract']} located posts "
                     "fall in tracts outside the neighborhood mapping")
    groups = _prediction_groups(cfg)
    probs_out: dict = {}
    corr_out: dict = {}
    for key, preds in groups.items():
        sets = statslib.prediction_sets(preds, cfg.score_threshold)
        probs_out[key] = {}
        corr_out[key] = {}
        for emotion in ANNOTATABLE:
            binary = {pid: (1 if emotion in s else 0)
                      for pid, s in sets.items()}
            probs, excluded = geolib.neighborhood_emotion_prob(
                binary, join.post_neighborhood, cfg.min_neighborhood_posts)
            probs_out[key][emotion] = {"probs": probs, "excluded": excluded}
            for nb in excluded:
                diags.append(f"{key}/{emotion}: neighborhood {nb} below "
                             "the post-count floor")
            try:
                corr_out[key][emotion] = geolib.demographic_correlation(
                    probs, neighborhoods)
            except geolib.GeoError as e:
                corr_out[key][emotion] = {"error": str(e)}

    dump_json(cfg.output_dir / "geo.json", {
        "meta": _meta(cfg),
        "diagnostics": join.diagnostics,
        "neighborhoods": [
            {"name": nb.name, "post_count": nb.post_count,
             "tracts": sorted(nb.tract_geoids), **nb.demographics}
            for nb in neighborhoods],
        "ddm_demographics": ddm_check,
        "emotion_probs": probs_out,
        "correlations": corr_out,
    })
    return diags


def _load_json(path: Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def stage_report(cfg: RunConfig) -> list:
    meta = _meta(cfg)
    line = _meta_line(meta)
    clean_summary = _load_json(_artifact(cfg, "clean_summary.json", "clean"))
    audit = _load_json(_artifact(cfg, "audit.json", "audit"))
    if not audit.get("groups"):
        raise ConfigError("audit output has no model groups; nothing to report")
    silver_summary = _load_json(_artifact(cfg, "silver_summary.json",
                                          "silver"))
    ddm_by_post, strata, _norm = _read_ddm(cfg)

    report: dict = {"meta": meta, "clean": clean_summary,
                    "silver": silver_summary, "audit": audit["groups"]}
    report["ddm"] = {
        "n_posts": len(ddm_by_post),
        "n_high": sum(1 for s in strata.values() if s == "high"),
        "n_low": sum(1 for s in strata.values() if s == "low"),
        "mean_ddm": (sum(ddm_by_post.values()) / len(ddm_by_post)
                     if ddm_by_post else None),
    }

    rows = []
    for key, g in sorted(audit["groups"].items()):
        for emotion, c in sorted(g.get("confusion", {}).items()):
            rows.append([key, emotion, c["tp"], c["fp"], c["tn"], c["fn"],
                         c["precision"]["value"], c["recall"]["value"],
                         c["f1"]["value"]])
    write_table(cfg.output_dir / "confusion.csv", line,
                ["model", "emotion", "tp", "fp", "tn", "fn", "precision",
                 "recall", "f1"], rows)

    rows = []
    emotions_by_group: dict = {}
    for key, g in sorted(audit["groups"].items()):
        for emotion, d in sorted(g.get("disparity", {}).items()):
            emotions_by_group.setdefault(key, []).append(emotion)
            rows.append([key, emotion,
                         d["fpr_high"]["value"], d["fpr_low"]["value"],
                         d["dfpr"]["value"],
                         "yes" if d["dfpr"]["undefined"] else "no",
                         d["fnr_high"]["value"], d["fnr_low"]["value"],
                         d["dfnr"]["value"],
                         "yes" if d["dfnr"]["undefined"] else "no"])
    write_table(cfg.output_dir / "disparity.csv", line,
                ["model", "emotion", "fpr_high", "fpr_low", "dfpr",
                 "dfpr_undefined", "fnr_high", "fnr_low", "dfnr",
                 "dfnr_undefined"], rows)

    rows = [[key, g["prompt_schema"], g["n_predictions"], g["refusal_rate"]]
            for key, g in sorted(audit["groups"].items())]
    write_table(cfg.output_dir / "refusals.csv", line,
                ["model", "prompt_schema", "n_predictions", "refusal_rate"],
                rows)

    for key, g in sorted(audit["groups"].items()):
        emotions = emotions_by_group.get(key)
        if not emotions:
            continue
        d = g["disparity"]
        safe = key.replace("/", "_")
        render_disparity_chart(
            cfg.output_dir / f"disparity_{safe}.svg",
            f"False-rate ratios (high/low density): {key}", emotions,
            {e: d[e]["dfpr"]["value"] for e in emotions},
            {e: d[e]["dfnr"]["value"] for e in emotions})

    if cfg.annotations is not None:
        agree = _load_json(_artifact(cfg, "agreement.json", "agree"))
        report["agreement"] = agree["matrix"]
        rows = []
        for pairing, per_emotion in sorted(agree["matrix"].items()):
            for emotion, cell in sorted(per_emotion.items()):
                rows.append([pairing, emotion, cell["mean_kappa"],
                             cell["n_pairs"]])
        write_table(cfg.output_dir / "agreement.csv", line,
                    ["pairing", "emotion", "mean_kappa", "n_pairs"], rows)
        if agree["matrix"]:
            emotions = sorted({e for per in agree["matrix"].values()
                               for e in per})
            render_agreement_chart(cfg.output_dir / "agreement.svg",
                                   "Mean pairwise agreement", emotions,
                                   agree["matrix"])

        reg = _load_json(_artifact(cfg, "regressions.json", "regress"))
        report["regressions"] = {"influence": reg["influence"],
                                 "n_runs": len(reg["runs"])}
        rows = []
        for r in reg["runs"]:
            if "skipped" in r:
                continue
            for c in r["coefficients"]:
                rows.append([r["key"], r["group"], r["emotion"], c["name"],
                             c["beta"], c["std_err"], c["p_value"],
                             "yes" if c["significant"] else "no",
                             r["r_squared"], r["n"]])
        write_table(cfg.output_dir / "regressions.csv", line,
                    ["run", "group", "emotion", "feature", "beta", "std_err",
                     "p_value", "significant", "r_squared", "n"], rows)
        rows = []
        for group, summary in sorted(reg["influence"].items()):
            for cell, v in sorted(summary["cells"].items()):
                emotion, feat = cell.split("/", 1)
                rows.append([group, emotion, feat, v])
            for feat, v in sorted(summary["abs_mean"].items()):
                rows.append([group, "(abs mean)", feat, v])
        write_table(cfg.output_dir / "influence.csv", line,
                    ["group", "emotion", "feature", "mean_beta"], rows)

    if cfg.tracts is not None:
        geo = _load_json(_artifact(cfg, "geo.json", "geo"))
        report["geo"] = {k: geo[k] for k in
                         ("diagnostics", "ddm_demographics", "correlations")}
        rows = [[nb["name"], nb["post_count"], nb.get("population"),
                 nb.get("pct_black"), nb.get("pct_white")]
                for nb in geo["neighborhoods"]]
        write_table(cfg.output_dir / "neighborhoods.csv", line,
                    ["neighborhood", "post_count", "population", "pct_black",
                     "pct_white"], rows)
        rows = []
        for key, per_emotion in sorted(geo["emotion_probs"].items()):
            for emotion, cell in sorted(per_emotion.items()):
                for nb, prob in sorted(cell["probs"].items()):
                    rows.append([key, emotion, nb, prob])
        write_table(cfg.output_dir / "neighborhood_probs.csv", line,
                    ["model", "emotion", "neighborhood", "probability"], rows)
        rows = []
        for key, per_emotion in sorted(geo["correlations"].items()):
            for emotion, fields in sorted(per_emotion.items()):
                if "error" in fields:
                    rows.append([key, emotion, "", None, None, fields["error"]])
                    continue
                for fieldname, cell in sorted(fields.items()):
                    rows.append([key, emotion, fieldname,
                                 cell.get("r"), cell.get("p"),
                                 cell.get("error", "")])
        write_table(cfg.output_dir / "demographic_correlation.csv", line,
                    ["model", "emotion", "demographic", "r", "p", "note"],
                    rows)

    dump_json(cfg.output_dir / "report.json", report)
    return []


_STAGE_FUNCS = {
    "clean": stage_clean,
    "annotate": stage_annotate,
    "ddm": stage_ddm,
    "silver": stage_silver,
    "audit": stage_audit,
    "agree": stage_agree,
    "regress": stage_regress,
    "geo": stage_geo,
    "report": stage_report,
}


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--corpus", help="raw corpus jsonl")
    common.add_argument("--annotations", help="human annotations jsonl")
    common.add_argument("--predictions", action="append",
                        help="model predictions jsonl (repeatable)")
    common.add_argument("--taxonomy", help="emotion taxonomy tsv "
                        "(default: bundled)")
    common.add_argument("--lexicon", help="word-emotion lexicon tsv")
    common.add_argument("--tracts", help="census tract GeoJSON")
    common.add_argument("--demographics", help="tract demographics csv")
    common.add_argument("--neighborhoods", help="neighborhood definition csv")
    common.add_argument("--external-scores", dest="external_scores",
                        help="external feature scores tsv")
    common.add_argument("--threshold", "--ddm-threshold", dest="ddm_threshold",
                        type=float, help="density stratum threshold")
    common.add_argument("--score-threshold", dest="score_threshold",
                        type=float, help="prediction presence threshold")
    common.add_argument("--features", help="comma-separated detector names")
    common.add_argument("--seed", type=int)
    common.add_argument("--min-neighborhood-posts",
                        dest="min_neighborhood_posts", type=int)
    common.add_argument("--min-tokens", dest="min_tokens", type=int)
    common.add_argument("--jitter-seed", dest="jitter_seed", type=int)
    common.add_argument("--out", help="output directory (overrides config "
                        f"and ${OUTPUT_DIR_ENV})")
    common.add_argument("--strict", action="store_true",
                        help="turn diagnostics into failures")

    parser = argparse.ArgumentParser(
        prog="dialect-audit",
        description="Dialect-density fairness audit pipeline")
    sub = parser.add_subparsers(dest="stage", required=True)
    for name in STAGES:
        sub.add_parser(name, parents=[common],
                       help=f"run the {name} stage")
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if not e.code else 1
    try:
        cfg = build_config(args)
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        diags = _STAGE_FUNCS[args.stage](cfg)
        for d in diags:
            print(f"diagnostic: {d}", file=sys.stderr)
        if cfg.strict and diags:
            print(f"error: --strict with {len(diags)} diagnostic(s)",
                  file=sys.stderr)
            return 1
        print(f"{args.stage}: ok ({cfg.output_dir})")
        return 0
    except MissingArtifactError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (FileNotFoundError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except AuditError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
