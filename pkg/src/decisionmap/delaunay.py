"""Landmark triangulation for localized inverse-map evaluation.

Builds k-means landmarks plus a padded bounding rectangle, Delaunay
triangulates them (Bowyer-Watson over an implicit vertex at infinity, so no
super-triangle distortion), and attaches to every simplex a composed
neighborhood of data-point indices assembled round-robin from the per-vertex
nearest-neighbor lists.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (
    DegenerateGeometryError,
    NeighborhoodExhaustedError,
    ParameterError,
)

_INF = -1  # index of the implicit vertex at infinity

# float-filter slack factors: exact rational arithmetic kicks in below these
_ORIENT_BOUND = 3.4e-16
_INCIRCLE_BOUND = 1.2e-14


def _orient2d(ax, ay, bx, by, cx, cy) -> int:
    """Sign of the signed area of (a, b, c); exact."""
    l = (bx - ax) * (cy - ay)
    r = (by - ay) * (cx - ax)
    det = l - r
    if abs(det) > _ORIENT_BOUND * (abs(l) + abs(r)):
        return 1 if det > 0 else -1
    fa, fb, fc = (Fraction(ax), Fraction(ay)), (Fraction(bx), Fraction(by)), (Fraction(cx), Fraction(cy))
    det = (fb[0] - fa[0]) * (fc[1] - fa[1]) - (fb[1] - fa[1]) * (fc[0] - fa[0])
    return (det > 0) - (det < 0)


def _incircle(ax, ay, bx, by, cx, cy, dx, dy) -> int:
    """Sign > 0 when d lies strictly inside the circumcircle of CCW (a, b, c)."""
    adx, ady = ax - dx, ay - dy
    bdx, bdy = bx - dx, by - dy
    cdx, cdy = cx - dx, cy - dy
    ad = adx * adx + ady * ady
    bd = bdx * bdx + bdy * bdy
    cd = cdx * cdx + cdy * cdy
    det = (
        ad * (bdx * cdy - bdy * cdx)
        + bd * (cdx * ady - cdy * adx)
        + cd * (adx * bdy - ady * bdx)
    )
    permanent = (
        ad * (abs(bdx * cdy) + abs(bdy * cdx))
        + bd * (abs(cdx * ady) + abs(cdy * adx))
        + cd * (abs(adx * bdy) + abs(ady * bdx))
    )
    if abs(det) > _INCIRCLE_BOUND * permanent:
        return 1 if det > 0 else -1
    fadx, fady = Fraction(ax) - Fraction(dx), Fraction(ay) - Fraction(dy)
    fbdx, fbdy = Fraction(bx) - Fraction(dx), Fraction(by) - Fraction(dy)
    fcdx, fcdy = Fraction(cx) - Fraction(dx), Fraction(cy) - Fraction(dy)
    det = (
        (fadx * fadx + fady * fady) * (fbdx * fcdy - fbdy * fcdx)
        + (fbdx * fbdx + fbdy * fbdy) * (fcdx * fady - fcdy * fadx)
        + (fcdx * fcdx + fcdy * fcdy) * (fadx * fbdy - fady * fbdx)
    )
    return (det > 0) - (det < 0)


@dataclass(eq=False)
class Triangulation:
    vertices: np.ndarray              # m x 2
    simplices: np.ndarray             # s x 3 vertex indices, CCW
    adjacency: np.ndarray             # s x 3, neighbor across edge (v_e, v_{e+1}), -1 on hull
    neighbor_sets: np.ndarray | None = None   # s x n_k composed data indices
    vertex_neighbors: np.ndarray | None = None  # m x n_k per-vertex data indices
    _cursor: threading.local = field(default_factory=threading.local, repr=False)

    def locate(self, y) -> int | None:
        return locate(self, y)

    def barycentric(self, s: int, y) -> np.ndarray:
        """Barycentric coordinates of y with respect to simplex s."""
        i, j, k = self.simplices[s]
        a, b, c = self.vertices[i], self.vertices[j], self.vertices[k]
        m = np.array([[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]])
        lam = np.linalg.solve(m, np.asarray(y, dtype=np.float64) - a)
        return np.array([1.0 - lam[0] - lam[1], lam[0], lam[1]])


def _lex_order(points: np.ndarray) -> np.ndarray:
    return np.lexsort((points[:, 1], points[:, 0]))


def triangulate(vertices) -> Triangulation:
    """Bowyer-Watson incremental Delaunay triangulation.

    Hull-facing faces are represented as triangles against an implicit
    infinite vertex, which sidesteps super-triangle sizing issues; ties
    (cocircular quadruples) are broken by the lexicographic insertion order.
    """
    pts = np.asarray(vertices, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ParameterError("need at least 3 vertices of dimension 2")
    seen: dict[tuple, int] = {}
    unique = []
    for i, (x, y) in enumerate(pts):
        key = (float(x), float(y))
        if key not in seen:
            seen[key] = i
            unique.append(i)
    order = [unique[j] for j in _lex_order(pts[unique])]
    if len(order) < 3:
        raise DegenerateGeometryError("fewer than 3 distinct vertices")

    # bootstrap: first two points plus the first non-collinear one
    p0, p1 = order[0], order[1]
    base = None
    for pos in range(2, len(order)):
        pk = order[pos]
        if _orient2d(*pts[p0], *pts[p1], *pts[pk]) != 0:
            base = pos
            break
    if base is None:
        raise DegenerateGeometryError("all vertices are collinear")
    pk = order.pop(base)
    insert_order = order[2:]
    a, b, c = (p0, p1, pk) if _orient2d(*pts[p0], *pts[p1], *pts[pk]) > 0 else (p1, p0, pk)

    tris: set[tuple] = {(a, b, c), (b, a, _INF), (c, b, _INF), (a, c, _INF)}

    def add_tri(u, v, w):
        # canonical storage: infinite triangles keep their finite edge first,
        # preserving the cyclic orientation (u -> v -> w -> u)
        if u == _INF:
            tris.add((v, w, _INF))
        elif v == _INF:
            tris.add((w, u, _INF))
        else:
            tris.add((u, v, w))

    def in_circumdisk(tri, p) -> bool:
        if tri[2] == _INF:
            u, v = tri[0], tri[1]
            # (u, v) is the reversed hull edge, so the outside region (the
            # limit circumdisk) is the open left halfplane of u -> v, plus
            # the closed segment itself
            s = _orient2d(*pts[u], *pts[v], *pts[p])
            if s != 0:
                return s > 0
            lo_x, hi_x = sorted((pts[u][0], pts[v][0]))
            lo_y, hi_y = sorted((pts[u][1], pts[v][1]))
            return lo_x <= pts[p][0] <= hi_x and lo_y <= pts[p][1] <= hi_y
        i, j, k = tri
        return _incircle(*pts[i], *pts[j], *pts[k], *pts[p]) > 0

    for p in insert_order:
        bad = [t for t in tris if in_circumdisk(t, p)]
        edge_count: dict[tuple, int] = {}
        for t in bad:
            cyc = (t[0], t[1], t[2])
            for e in ((cyc[0], cyc[1]), (cyc[1], cyc[2]), (cyc[2], cyc[0])):
                edge_count[e] = edge_count.get(e, 0) + 1
        for t in bad:
            tris.discard(t)
        for (u, v) in edge_count:
            if (v, u) in edge_count:
                continue  # interior to the cavity
            add_tri(u, v, p)

    finite = sorted(t for t in tris if _INF not in t)
    simplices = np.array(finite, dtype=np.int64).reshape(-1, 3)
    # orient CCW (construction already guarantees it; normalize regardless)
    for s in range(simplices.shape[0]):
        i, j, k = simplices[s]
        if _orient2d(*pts[i], *pts[j], *pts[k]) < 0:
            simplices[s] = (i, k, j)
    adjacency = _build_adjacency(simplices)
    return Triangulation(vertices=pts, simplices=simplices, adjacency=adjacency)


def _build_adjacency(simplices: np.ndarray) -> np.ndarray:
    owner: dict[tuple, int] = {}
    adjacency = np.full(simplices.shape, -1, dtype=np.int64)
    for s, (i, j, k) in enumerate(simplices):
        for e, (u, v) in enumerate(((i, j), (j, k), (k, i))):
            owner[(u, v)] = s * 3 + e
    for s, (i, j, k) in enumerate(simplices):
        for e, (u, v) in enumerate(((i, j), (j, k), (k, i))):
            rev = owner.get((v, u))
            if rev is not None:
                adjacency[s, e] = rev // 3
    return adjacency


def kmeans2d(points, n_s: int, seed: int = 0) -> np.ndarray:
    """Seeded k-means++ followed by Lloyd iterations; empty clusters reseed
    at the farthest point from its assigned center (lowest index on ties)."""
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if not 1 <= n_s <= n:
        raise ParameterError("need 1 <= n_s <= n")
    rng = np.random.default_rng(seed)
    centers = np.empty((n_s, 2))
    centers[0] = pts[int(rng.integers(n))]
    d2 = ((pts - centers[0]) ** 2).sum(axis=1)
    for c in range(1, n_s):
        total = d2.sum()
        if total <= 0:
            pick = c % n  # every point duplicates a center already
        else:
            pick = int(rng.choice(n, p=d2 / total))
        centers[c] = pts[pick]
        d2 = np.minimum(d2, ((pts - centers[c]) ** 2).sum(axis=1))

    for _ in range(100):
        dists = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = dists.argmin(axis=1)
        for c in range(n_s):
            if not np.any(assign == c):
                far = int(np.argmax(dists[np.arange(n), assign]))
                centers[c] = pts[far]
                dists[:, c] = ((pts - centers[c]) ** 2).sum(axis=1)
                assign = dists.argmin(axis=1)
        new_centers = np.array([pts[assign == c].mean(axis=0) for c in range(n_s)])
        movement = float(np.abs(new_centers - centers).max())
        centers = new_centers
        if movement < 1e-9:
            break
    return centers


def border(points, epsilon: float) -> np.ndarray:
    """Corners of the axis-aligned rectangle [min - eps, max + eps] per axis."""
    if epsilon <= 0:
        raise ParameterError("epsilon must be positive")
    pts = np.asarray(points, dtype=np.float64)
    lo = pts.min(axis=0) - epsilon
    hi = pts.max(axis=0) + epsilon
    return np.array([
        [lo[0], lo[1]],
        [hi[0], lo[1]],
        [hi[0], hi[1]],
        [lo[0], hi[1]],
    ])


def compose_neighbors(sorted_neighbors, n_k: int) -> np.ndarray:
    """Round-robin merge of row-wise sorted neighbor lists.

    The cursor of the current row keeps advancing past already-taken indices;
    only a fresh index moves the round-robin to the next row.
    """
    rows = [list(r) for r in sorted_neighbors]
    n_rows = len(rows)
    cursors = [0] * n_rows
    taken: set[int] = set()
    out: list[int] = []
    i = 0
    while len(out) < n_k:
        if cursors[i] >= len(rows[i]):
            raise NeighborhoodExhaustedError(
                f"row {i} exhausted after {len(out)} of {n_k} neighbors"
            )
        candidate = rows[i][cursors[i]]
        cursors[i] += 1
        if candidate not in taken:
            taken.add(candidate)
            out.append(candidate)
            i = (i + 1) % n_rows
    return np.asarray(out, dtype=np.int64)


def build(points, n_s: int | None = None, n_k: int = 30, epsilon: float | None = None,
          seed: int = 0) -> Triangulation:
    """Landmarks + border corners -> triangulation -> per-simplex neighborhoods."""
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n_s is None:
        n_s = max(8, n // 20)
    n_s = min(n_s, n)
    if n_k > n:
        raise ParameterError("n_k cannot exceed the number of data points")
    if epsilon is None:
        span = pts.max(axis=0) - pts.min(axis=0)
        epsilon = 0.05 * float(np.hypot(span[0], span[1]))
        epsilon = max(epsilon, 1e-9)
    centers = kmeans2d(pts, n_s, seed=seed)
    corners = border(pts, epsilon)
    tri = triangulate(np.vstack([centers, corners]))
    vertex_rows = np.empty((tri.vertices.shape[0], n_k), dtype=np.int64)
    for v in range(tri.vertices.shape[0]):
        d = np.sqrt(((pts - tri.vertices[v]) ** 2).sum(axis=1))
        vertex_rows[v] = np.argsort(d, kind="stable")[:n_k]
    sets = np.empty((tri.simplices.shape[0], n_k), dtype=np.int64)
    for s, simplex in enumerate(tri.simplices):
        sets[s] = compose_neighbors([vertex_rows[v] for v in simplex], n_k)
    tri.neighbor_sets = sets
    tri.vertex_neighbors = vertex_rows
    for i in range(n):
        if locate(tri, pts[i]) is None:
            raise DegenerateGeometryError(f"data point {i} is outside the triangulation")
    return tri


def _contains(tri: Triangulation, s: int, y, tol: float) -> bool:
    i, j, k = tri.simplices[s]
    pts = tri.vertices
    for u, v in ((i, j), (j, k), (k, i)):
        area2 = (pts[v, 0] - pts[u, 0]) * (y[1] - pts[u, 1]) - (pts[v, 1] - pts[u, 1]) * (y[0] - pts[u, 0])
        if area2 < -tol:
            return False
    return True


def locate(tri: Triangulation, y) -> int | None:
    """Walking point location; boundary ties resolve to the lowest index."""
    y = np.asarray(y, dtype=np.float64)
    pts = tri.vertices
    scale = float(np.abs(pts).max()) + 1.0
    tol = 1e-12 * scale * scale
    current = getattr(tri._cursor, "simplex", 0)
    if current >= tri.simplices.shape[0]:
        current = 0
    steps = 0
    max_steps = 4 * tri.simplices.shape[0] + 8
    while True:
        i, j, k = tri.simplices[current]
        exit_edge = None
        for e, (u, v) in enumerate(((i, j), (j, k), (k, i))):
            area2 = (pts[v, 0] - pts[u, 0]) * (y[1] - pts[u, 1]) - (pts[v, 1] - pts[u, 1]) * (y[0] - pts[u, 0])
            if area2 < -tol:
                exit_edge = e
                break
        if exit_edge is None:
            break
        nxt = tri.adjacency[current, exit_edge]
        if nxt == -1:
            return None  # walked off the hull: outside the border rectangle
        current = int(nxt)
        steps += 1
        if steps > max_steps:
            hits = [s for s in range(tri.simplices.shape[0]) if _contains(tri, s, y, tol)]
            if not hits:
                return None
            current = hits[0]
            break
    # boundary ties: flood to adjacent simplices that also contain y
    best = current
    frontier = [current]
    visited = {current}
    while frontier:
        s = frontier.pop()
        for nxt in tri.adjacency[s]:
            if nxt != -1 and nxt not in visited and _contains(tri, int(nxt), y, tol):
                visited.add(int(nxt))
                frontier.append(int(nxt))
                best = min(best, int(nxt))
    tri._cursor.simplex = best
    return best
