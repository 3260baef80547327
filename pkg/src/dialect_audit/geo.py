"""Census-tract joins and neighborhood-level demographic correlation.

Planar even-odd point-in-polygon with an explicit boundary test; boundary
points go to the first containing tract in file order. Neighborhoods are
groupings of tracts with population-weighted demographics.
"""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .stats import pearson, StatsError
from .util import AuditError

_EDGE_EPS = 1e-12
DEFAULT_MIN_NEIGHBORHOOD_POSTS = 30


class GeoError(AuditError):
    pass


@dataclass(frozen=True)
class Tract:
    geoid: str
    rings: tuple  # each ring a tuple of (lon, lat), closed
    bbox: tuple  # (min_lon, min_lat, max_lon, max_lat)
    demographics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Neighborhood:
    name: str
    tract_geoids: frozenset
    demographics: dict  # population-weighted percentages + summed population
    post_count: int


def _ring_bbox(points: Sequence[tuple]) -> tuple:
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    return (min(xs), min(ys), max(xs), max(ys))


def load_tracts(path: Path) -> list:
    """GeoJSON FeatureCollection with a GEOID property per feature; file
    order is preserved because it breaks boundary ties."""
    p = Path(path)
    with open(p, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("type") != "FeatureCollection":
        raise GeoError(f"{p.name}: expected a FeatureCollection")
    tracts = []
    seen = set()
    for i, feat in enumerate(doc.get("features", [])):
        geoid = (feat.get("properties") or {}).get("GEOID")
        if not geoid:
            raise GeoError(f"{p.name}: feature {i} missing GEOID property")
        geoid = str(geoid)
        if geoid in seen:
            raise GeoError(f"{p.name}: duplicate GEOID {geoid!r}")
        seen.add(geoid)
        geom = feat.get("geometry") or {}
        gtype = geom.get("type")
        if gtype == "Polygon":
            polys = [geom["coordinates"]]
        elif gtype == "MultiPolygon":
            polys = geom["coordinates"]
        else:
            raise GeoError(f"{p.name}: feature {geoid} has unsupported "
                           f"geometry {gtype!r}")
        rings = []
        for poly in polys:
            for ring in poly:
                pts = tuple((float(x), float(y)) for x, y in ring)
                if len(pts) < 4 or pts[0] != pts[-1]:
                    raise GeoError(f"{p.name}: feature {geoid} has an "
                                   "unclosed or degenerate ring")
                rings.append(pts)
        boxes = [_ring_bbox(r) for r in rings]
        bbox = (min(b[0] for b in boxes), min(b[1] for b in boxes),
                max(b[2] for b in boxes), max(b[3] for b in boxes))
        tracts.append(Tract(geoid=geoid, rings=tuple(rings), bbox=bbox))
    return tracts


def load_demographics(path: Path,
                      required: Sequence[str] = ("pct_black", "pct_white",
                                                 "population")) -> dict:
    """CSV keyed by geoid; percentage fields validated into [0, 100]."""
    p = Path(path)
    out: dict = {}
    with open(p, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or "geoid" not in reader.fieldnames:
            raise GeoError(f"{p.name}: missing geoid column")
        for lineno, row in enumerate(reader, start=2):
            geoid = row["geoid"].strip()
            if geoid in out:
                raise GeoError(f"{p.name}:{lineno}: duplicate geoid {geoid!r}")
            fields = {}
            for k, v in row.items():
                if k == "geoid":
                    continue
                try:
                    fields[k] = float(v)
                except (TypeError, ValueError):
                    raise GeoError(f"{p.name}:{lineno}: non-numeric value "
                                   f"for {k!r}")
            for k in required:
                if k not in fields:
                    raise GeoError(f"{p.name}:{lineno}: missing field {k!r}")
            for k, v in fields.items():
                if k.startswith("pct_") and not 0.0 <= v <= 100.0:
                    raise GeoError(f"{p.name}:{lineno}: {k} outside [0,100]")
            out[geoid] = fields
    return out


def load_neighborhood_defs(path: Path) -> dict:
    """CSV `neighborhood,geoid`; a tract may belong to only one neighborhood."""
    p = Path(path)
    by_name: dict = {}
    claimed: dict = {}
    with open(p, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"neighborhood", "geoid"}
        if not reader.fieldnames or not need.issubset(reader.fieldnames):
            raise GeoError(f"{p.name}: expected columns neighborhood,geoid")
        for lineno, row in enumerate(reader, start=2):
            name = row["neighborhood"].strip()
            geoid = row["geoid"].strip()
            if not name or not geoid:
                raise GeoError(f"{p.name}:{lineno}: empty field")
            if geoid in claimed and claimed[geoid] != name:
                raise GeoError(f"{p.name}:{lineno}: tract {geoid!r} claimed "
                               f"by both {claimed[geoid]!r} and {name!r}")
            claimed[geoid] = name
            by_name.setdefault(name, set()).add(geoid)
    return by_name


# ------------------------------------------------------ point in polygon

def _on_segment(x: float, y: float, x1: float, y1: float,
                x2: float, y2: float) -> bool:
    cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
    if abs(cross) > _EDGE_EPS:
        return False
    return (min(x1, x2) - _EDGE_EPS <= x <= max(x1, x2) + _EDGE_EPS
            and min(y1, y2) - _EDGE_EPS <= y <= max(y1, y2) + _EDGE_EPS)


def _in_ring(x: float, y: float, ring: Sequence[tuple]) -> bool:
    inside = False
    for i in range(len(ring) - 1):
        x1, y1 = ring[i]
        x2, y2 = ring[i + 1]
        if (y1 > y) != (y2 > y):
            x_cross = x1 + (x2 - x1) * (y - y1) / (y2 - y1)
            if x < x_cross:
                inside = not inside
    return inside


def tract_contains(tract: Tract, lon: float, lat: float) -> bool:
    bx0, by0, bx1, by1 = tract.bbox
    if not (bx0 - _EDGE_EPS <= lon <= bx1 + _EDGE_EPS
            and by0 - _EDGE_EPS <= lat <= by1 + _EDGE_EPS):
        return False
    for ring in tract.rings:
        for i in range(len(ring) - 1):
            if _on_segment(lon, lat, *ring[i], *ring[i + 1]):
                return True  # boundary points count as contained
    inside = False
    for ring in tract.rings:
        if _in_ring(lon, lat, ring):
            inside = not inside  # even-odd across rings handles holes
    return inside


def locate(lat: Optional[float], lon: Optional[float],
           tracts: Sequence[Tract]) -> Optional[str]:
    """First containing tract in file order, or None."""
    if lat is None or lon is None:
        return None
    for t in tracts:
        if tract_contains(t, lon, lat):
            return t.geoid
    return None


# ------------------------------------------------------------- joining

@dataclass
class JoinResult:
    post_tract: dict  # post_id -> geoid
    post_neighborhood: dict  # post_id -> neighborhood name
    diagnostics: dict  # counters


def join_posts(posts: Iterable, tracts: Sequence[Tract],
               neighborhood_defs: Mapping[str, set]) -> JoinResult:
    tract_to_nb = {g: name for name, geoids in neighborhood_defs.items()
                   for g in geoids}
    post_tract: dict = {}
    post_nb: dict = {}
    diag = {"located": 0, "missing_coords": 0, "outside_tracts": 0,
            "unmapped_tract": 0}
    for post in posts:
        lat = getattr(post, "latitude", None)
        lon = getattr(post, "longitude", None)
        if lat is None or lon is None:
            diag["missing_coords"] += 1
            continue
        geoid = locate(lat, lon, tracts)
        if geoid is None:
            diag["outside_tracts"] += 1
            continue
        diag["located"] += 1
        post_tract[post.id] = geoid
        nb = tract_to_nb.get(geoid)
        if nb is None:
            diag["unmapped_tract"] += 1
            continue
        post_nb[post.id] = nb
    return JoinResult(post_tract=post_tract, post_neighborhood=post_nb,
                      diagnostics=diag)


def build_neighborhoods(neighborhood_defs: Mapping[str, set],
                        demographics: Mapping[str, dict],
                        join: JoinResult) -> list:
    """Population-weighted demographic aggregation per neighborhood."""
    counts: dict = {}
    for nb in join.post_neighborhood.values():
        counts[nb] = counts.get(nb, 0) + 1
    out = []
    for name, geoids in sorted(neighborhood_defs.items()):
        rows = [demographics[g] for g in sorted(geoids) if g in demographics]
        if not rows:
            raise GeoError(f"neighborhood {name!r} has no demographic rows")
        pop = sum(r.get("population", 0.0) for r in rows)
        agg = {"population": pop}
        pct_fields = sorted({k for r in rows for k in r if k.startswith("pct_")})
        for k in pct_fields:
            if pop > 0:
                agg[k] = sum(r.get(k, 0.0) * r.get("population", 0.0)
                             for r in rows) / pop
            else:
                agg[k] = sum(r.get(k, 0.0) for r in rows) / len(rows)
        out.append(Neighborhood(name=name, tract_geoids=frozenset(geoids),
                                demographics=agg,
                                post_count=counts.get(name, 0)))
    return out


def neighborhood_emotion_prob(
    binary_by_post: Mapping[str, int],
    post_neighborhood: Mapping[str, str],
    min_posts: int = DEFAULT_MIN_NEIGHBORHOOD_POSTS,
) -> tuple[dict, list]:
    """Mean binary prediction per neighborhood; thin neighborhoods are
    excluded and listed."""
    sums: dict = {}
    ns: dict = {}
    for post_id, label in binary_by_post.items():
        nb = post_neighborhood.get(post_id)
        if nb is None:
            continue
        sums[nb] = sums.get(nb, 0) + (1 if label else 0)
        ns[nb] = ns.get(nb, 0) + 1
    probs = {nb: sums[nb] / ns[nb] for nb in sorted(ns) if ns[nb] >= min_posts}
    excluded = [nb for nb in sorted(ns) if ns[nb] < min_posts]
    return probs, excluded


def demographic_correlation(probs: Mapping[str, float],
                            neighborhoods: Sequence[Neighborhood],
                            fields: Sequence[str] = ("pct_black",
                                                     "pct_white")) -> dict:
    demo = {nb.name: nb.demographics for nb in neighborhoods}
    names = sorted(set(probs) & set(demo))
    if len(names) < 3:
        raise GeoError(f"need at least 3 neighborhoods, have {len(names)}")
    out = {}
    x = [probs[n] for n in names]
    for fieldname in fields:
        y = [demo[n][fieldname] for n in names]
        try:
            r, p = pearson(x, y)
            out[fieldname] = {"r": r, "p": p, "n": len(names)}
        except StatsError as e:
            out[fieldname] = {"error": str(e), "n": len(names)}
    return out
