"""Polygonal approximations of the domain boundary from orbit points.

Random group words are applied to a boundary seed. Their order along the
boundary is read off from the Fuchsian shadow: the same word in the
Fuchsian generators moves ``coth(lambda/4)`` along the real line, and real
order is boundary order.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from brennan import words
from brennan.errors import DegeneratePolygon, NonSimple, TooManyRequested
from brennan.grafting import GroupPair
from brennan.moebius import INF, apply

log = logging.getLogger(__name__)

SEP_MIN = 1e-4


@dataclass
class BoundaryPolygon:
    vertices: np.ndarray
    words: list[str]
    sort_keys: np.ndarray
    seed: int | None = None
    max_word_length: int | None = None
    dropped: dict = field(default_factory=dict)

    orientation = "ccw"

    def __len__(self):
        return len(self.vertices)

    @property
    def diameter(self) -> float:
        v = self.vertices
        return float(np.max(np.abs(v[:, None] - v[None, :])))

    @property
    def edges(self) -> np.ndarray:
        return np.roll(self.vertices, -1) - self.vertices

    def centroid(self) -> complex:
        """Area centroid."""
        v = self.vertices
        w = np.roll(v, -1)
        cross = (v.conj() * w).imag
        area = cross.sum() / 2
        return complex(((v + w) * cross).sum() / (6 * area))

    def contains(self, w) -> np.ndarray:
        return point_in_polygon(self.vertices, w)

    def to_csv(self, path) -> None:
        write_csv(self, path)


def signed_area(vertices: np.ndarray) -> float:
    v = np.asarray(vertices)
    return float((v.conj() * np.roll(v, -1)).imag.sum() / 2)


def point_in_polygon(vertices: np.ndarray, w) -> np.ndarray:
    """Even-odd rule; returns a boolean array shaped like ``w``."""
    w = np.asarray(w, dtype=complex)
    shape = w.shape
    w = w.ravel()
    v1 = np.asarray(vertices)
    v2 = np.roll(v1, -1)
    x, y = w.real[:, None], w.imag[:, None]
    y1, y2 = v1.imag[None, :], v2.imag[None, :]
    x1, x2 = v1.real[None, :], v2.real[None, :]
    straddle = (y1 > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    inside = np.count_nonzero(straddle & (x < xc), axis=1) % 2 == 1
    return inside.reshape(shape)


def _orient(p, q, r):
    return np.sign((q - p).real * (r - p).imag - (q - p).imag * (r - p).real)


def crossing_pairs(vertices: np.ndarray) -> list[tuple[int, int]]:
    """Pairs ``(i, j)``, ``i < j``, of non-adjacent edges that touch or cross.

    Edge ``i`` joins vertex ``i`` to vertex ``i + 1`` (cyclically).
    """
    v = np.asarray(vertices)
    n = len(v)
    p1, p2 = v, np.roll(v, -1)
    out = []
    for i in range(n - 2):
        j = np.arange(i + 2, n)
        if i == 0:
            j = j[j != n - 1]
        if j.size == 0:
            continue
        a, b = p1[i], p2[i]
        c, d = p1[j], p2[j]
        o1, o2 = _orient(a, b, c), _orient(a, b, d)
        o3, o4 = _orient(c, d, a), _orient(c, d, b)
        proper = (o1 * o2 < 0) & (o3 * o4 < 0)
        # collinear touching
        def on_seg(p, q, r):
            return (np.minimum(p.real, r.real) <= q.real) & (q.real <= np.maximum(p.real, r.real)) & (
                np.minimum(p.imag, r.imag) <= q.imag
            ) & (q.imag <= np.maximum(p.imag, r.imag))

        touch = (
            ((o1 == 0) & on_seg(a, c, b))
            | ((o2 == 0) & on_seg(a, d, b))
            | ((o3 == 0) & on_seg(c, a, d))
            | ((o4 == 0) & on_seg(c, b, d))
        )
        for jj in j[proper | touch]:
            out.append((i, int(jj)))
    return out


def is_simple(vertices: np.ndarray) -> bool:
    return not crossing_pairs(vertices)


def sample_words(n: int, max_len: int, seed: int) -> list[str]:
    """``n`` distinct non-empty reduced words of length ``<= max_len``, uniformly."""
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    pop = words.population_size(max_len)
    if not 1 <= n <= pop:
        raise TooManyRequested(f"requested {n} words from a population of {pop}")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(pop, size=n, replace=False))
    return [words.word_from_index(int(i)) for i in idx]


def _drop_close(vertices, sep_min):
    """Greedy keep-first removal so that all pairwise gaps are ``>= sep_min``."""
    pts = np.c_[vertices.real, vertices.imag]
    pairs = cKDTree(pts).query_pairs(sep_min, output_type="ndarray")
    keep = np.ones(len(vertices), dtype=bool)
    for i, j in sorted(map(tuple, pairs)):
        if keep[i] and keep[j]:
            keep[j] = False
    return keep


def _untangle(vertices, max_span=None):
    """Remove vertices until no edges cross; only local crossings are repaired.

    A crossing is local when one of the two loops it closes has at most
    ``max_span`` vertices (default ``max(6, n // 8)``).
    """
    keep = np.arange(len(vertices))
    if max_span is None:
        max_span = max(6, len(vertices) // 8)
    while True:
        pairs = crossing_pairs(vertices[keep])
        if not pairs:
            return keep
        m = len(keep)
        i, j = pairs[0]
        fwd = j - i  # vertices i+1 .. j lie between the two edges
        back = m - fwd
        if min(fwd, back) > max_span:
            raise NonSimple(f"non-local edge crossing between edges {i} and {j}")
        if fwd <= back:
            drop = [(i + k) % m for k in range(1, fwd + 1)][: max(1, fwd - 1)]
        else:
            drop = [(j + k) % m for k in range(1, back + 1)][: max(1, back - 1)]
        keep = np.delete(keep, drop)
        if len(keep) < 3:
            raise DegeneratePolygon("untangling removed too many vertices")


def build_polygon(
    n: int,
    max_len: int,
    seed: int,
    pair: GroupPair,
    sep_min: float = SEP_MIN,
    repair_crossings: bool = True,
) -> BoundaryPolygon:
    ws = sample_words(n, max_len, seed)
    ftab, ktab = pair.fuchsian_table(), pair.kleinian_table()
    keys, verts, kept_words = [], [], []
    at_infinity = 0
    for w in ws:
        key = apply(words.evaluate(w, ftab), pair.fuchsian_seed)
        v = apply(words.evaluate(w, ktab), pair.seed)
        if key is INF or v is INF:
            at_infinity += 1
            continue
        keys.append(key.real)
        verts.append(v)
        kept_words.append(w)
    keys = np.array(keys)
    verts = np.array(verts, dtype=complex)
    order = np.argsort(keys, kind="stable")
    keys, verts = keys[order], verts[order]
    kept_words = [kept_words[i] for i in order]

    keep = _drop_close(verts, sep_min)
    dropped = {"at_infinity": at_infinity, "too_close": int(np.count_nonzero(~keep))}
    keys, verts = keys[keep], verts[keep]
    kept_words = [w for w, k in zip(kept_words, keep) if k]
    if len(verts) < 3:
        raise DegeneratePolygon(f"only {len(verts)} vertices survive filtering")

    if repair_crossings:
        idx = _untangle(verts)
        dropped["crossing"] = len(verts) - len(idx)
        keys, verts = keys[idx], verts[idx]
        kept_words = [kept_words[i] for i in idx]
    elif not is_simple(verts):
        raise NonSimple("polygon through the sampled orbit points is not simple")

    if signed_area(verts) < 0:
        keys, verts, kept_words = keys[::-1], verts[::-1], kept_words[::-1]
    if sum(dropped.values()):
        log.info("build_polygon dropped vertices: %s", dropped)
    return BoundaryPolygon(
        vertices=verts.copy(),
        words=list(kept_words),
        sort_keys=keys.copy(),
        seed=seed,
        max_word_length=max_len,
        dropped=dropped,
    )


def polygon_from_vertices(vertices) -> BoundaryPolygon:
    """Wrap a plain vertex list (e.g. a test shape) as a counterclockwise polygon."""
    v = np.asarray(vertices, dtype=complex)
    if signed_area(v) < 0:
        v = v[::-1]
    return BoundaryPolygon(v.copy(), [""] * len(v), np.arange(len(v), dtype=float))


def hausdorff(p: np.ndarray, q: np.ndarray) -> float:
    p = np.c_[np.real(p), np.imag(p)]
    q = np.c_[np.real(q), np.imag(q)]
    d1, _ = cKDTree(q).query(p)
    d2, _ = cKDTree(p).query(q)
    return float(max(d1.max(), d2.max()))


CSV_HEADER = ["index", "word", "re", "im", "sort_key"]


def write_csv(poly: BoundaryPolygon, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        for i, (w, v, k) in enumerate(zip(poly.words, poly.vertices, poly.sort_keys)):
            wr.writerow([i, w, repr(float(v.real)), repr(float(v.imag)), repr(float(k))])


def read_csv(path) -> BoundaryPolygon:
    path = Path(path)
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
        rows = list(rd)
    verts = np.array([complex(float(r["re"]), float(r["im"])) for r in rows])
    return BoundaryPolygon(
        vertices=verts,
        words=[r["word"] for r in rows],
        sort_keys=np.array([float(r["sort_key"]) for r in rows]),
    )
