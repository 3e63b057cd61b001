"""Hot geometric kernels: ray casting, polygon distances, grid search.

Each kernel exists twice: a numba ``@njit`` version and a pure numpy/Python
version with identical semantics.  The module-level names resolve to one or
the other depending on :data:`cbsa._accel.USE_NUMBA`; both sets stay
reachable through :data:`numba_impl` and :data:`numpy_impl` so tests and the
benchmark can compare them.

Obstacle geometry is passed in flat form:

``edges``
    ``(E, 4)`` float64 array of segments ``x1, y1, x2, y2``.
``offsets``
    ``(P + 1,)`` int64 array; polygon ``k`` owns ``edges[offsets[k]:offsets[k+1]]``.
"""

import heapq
import math
from types import SimpleNamespace

import numpy as np

from ._accel import USE_NUMBA, njit

SQRT2 = math.sqrt(2.0)
_PAR_EPS = 1e-14


def pack_polygons(polygons):
    """Flatten a list of vertex lists into ``(edges, offsets)``."""
    rows = []
    offsets = [0]
    for poly in polygons:
        pts = np.asarray(poly, dtype=np.float64)
        nxt = np.roll(pts, -1, axis=0)
        rows.append(np.hstack([pts, nxt]))
        offsets.append(offsets[-1] + len(pts))
    if rows:
        edges = np.ascontiguousarray(np.vstack(rows))
    else:
        edges = np.zeros((0, 4), dtype=np.float64)
    return edges, np.asarray(offsets, dtype=np.int64)


# ---------------------------------------------------------------- numba path


@njit
def _ray_cast_nb(ox, oy, ang, edges, max_range):
    dx = math.cos(ang)
    dy = math.sin(ang)
    best = max_range
    for k in range(edges.shape[0]):
        ax = edges[k, 0]
        ay = edges[k, 1]
        ex = edges[k, 2] - ax
        ey = edges[k, 3] - ay
        denom = dx * ey - dy * ex
        if abs(denom) < _PAR_EPS:
            continue
        wx = ax - ox
        wy = ay - oy
        t = (wx * ey - wy * ex) / denom
        s = (wx * dy - wy * dx) / denom
        if t >= 0.0 and 0.0 <= s <= 1.0 and t < best:
            best = t
    return best


@njit
def _sense_nb(x, y, theta, edges, n, fov, max_range):
    out = np.empty(n)
    half = 0.5 * fov
    for k in range(n):
        c = theta + 2.0 * math.pi * k / n
        d = _ray_cast_nb(x, y, c, edges, max_range)
        d = min(d, _ray_cast_nb(x, y, c - half, edges, max_range))
        d = min(d, _ray_cast_nb(x, y, c + half, edges, max_range))
        out[k] = d
    return out


@njit
def _seg_dist_nb(px, py, ax, ay, bx, by):
    ex = bx - ax
    ey = by - ay
    ll = ex * ex + ey * ey
    if ll == 0.0:
        return math.hypot(px - ax, py - ay)
    s = ((px - ax) * ex + (py - ay) * ey) / ll
    if s < 0.0:
        s = 0.0
    elif s > 1.0:
        s = 1.0
    return math.hypot(px - ax - s * ex, py - ay - s * ey)


@njit
def _signed_distance_nb(px, py, edges, offsets):
    best = np.inf
    for k in range(offsets.shape[0] - 1):
        dmin = np.inf
        inside = False
        for e in range(offsets[k], offsets[k + 1]):
            ax = edges[e, 0]
            ay = edges[e, 1]
            bx = edges[e, 2]
            by = edges[e, 3]
            d = _seg_dist_nb(px, py, ax, ay, bx, by)
            if d < dmin:
                dmin = d
            if (ay > py) != (by > py):
                xc = ax + (py - ay) * (bx - ax) / (by - ay)
                if px < xc:
                    inside = not inside
        if inside:
            dmin = -dmin
        if dmin < best:
            best = dmin
    return best


@njit
def _signed_distance_many_nb(xs, ys, edges, offsets):
    out = np.empty(xs.shape[0])
    for i in range(xs.shape[0]):
        out[i] = _signed_distance_nb(xs[i], ys[i], edges, offsets)
    return out


@njit
def _segment_clear_nb(ax, ay, bx, by, edges):
    dx = bx - ax
    dy = by - ay
    for k in range(edges.shape[0]):
        cx = edges[k, 0]
        cy = edges[k, 1]
        ex = edges[k, 2] - cx
        ey = edges[k, 3] - cy
        denom = dx * ey - dy * ex
        if abs(denom) < _PAR_EPS:
            continue
        wx = cx - ax
        wy = cy - ay
        t = (wx * ey - wy * ex) / denom
        s = (wx * dy - wy * dx) / denom
        if 0.0 <= t <= 1.0 and 0.0 <= s <= 1.0:
            return False
    return True


_DI = np.array([1, -1, 0, 0, 1, 1, -1, -1], dtype=np.int64)
_DJ = np.array([0, 0, 1, -1, 1, -1, 1, -1], dtype=np.int64)


@njit
def _astar_nb(occ, si, sj, gi, gj):
    nx, ny = occ.shape
    n = nx * ny
    g = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    closed = np.zeros(n, dtype=np.bool_)
    start = si * ny + sj
    goal = gi * ny + gj
    g[start] = 0.0
    dxh = abs(gi - si)
    dyh = abs(gj - sj)
    h0 = max(dxh, dyh) + (SQRT2 - 1.0) * min(dxh, dyh)
    heap = [(h0, 0.0, start)]
    while len(heap) > 0:
        f, gc, cur = heapq.heappop(heap)
        if closed[cur]:
            continue
        closed[cur] = True
        if cur == goal:
            break
        ci = cur // ny
        cj = cur % ny
        for m in range(8):
            ni = ci + _DI[m]
            nj = cj + _DJ[m]
            if ni < 0 or nj < 0 or ni >= nx or nj >= ny:
                continue
            if occ[ni, nj]:
                continue
            if m >= 4 and (occ[ni, cj] or occ[ci, nj]):
                continue
            step = SQRT2 if m >= 4 else 1.0
            nid = ni * ny + nj
            cand = gc + step
            if cand < g[nid]:
                g[nid] = cand
                parent[nid] = cur
                ddx = abs(gi - ni)
                ddy = abs(gj - nj)
                h = max(ddx, ddy) + (SQRT2 - 1.0) * min(ddx, ddy)
                heapq.heappush(heap, (cand + h, cand, nid))
    if not closed[goal]:
        return np.empty((0, 2), dtype=np.int64), np.inf
    length = 1
    c = goal
    while c != start:
        c = parent[c]
        length += 1
    path = np.empty((length, 2), dtype=np.int64)
    c = goal
    for k in range(length - 1, -1, -1):
        path[k, 0] = c // ny
        path[k, 1] = c % ny
        if k > 0:
            c = parent[c]
    return path, g[goal]


# ---------------------------------------------------------------- numpy path


def _ray_cast_np(ox, oy, ang, edges, max_range):
    if edges.shape[0] == 0:
        return float(max_range)
    dx, dy = math.cos(ang), math.sin(ang)
    ax, ay = edges[:, 0], edges[:, 1]
    ex, ey = edges[:, 2] - ax, edges[:, 3] - ay
    denom = dx * ey - dy * ex
    ok = np.abs(denom) >= _PAR_EPS
    safe = np.where(ok, denom, 1.0)
    wx, wy = ax - ox, ay - oy
    t = (wx * ey - wy * ex) / safe
    s = (wx * dy - wy * dx) / safe
    hit = ok & (t >= 0.0) & (s >= 0.0) & (s <= 1.0) & (t < max_range)
    if not hit.any():
        return float(max_range)
    return float(t[hit].min())


def _sense_np(x, y, theta, edges, n, fov, max_range):
    out = np.empty(n)
    half = 0.5 * fov
    for k in range(n):
        c = theta + 2.0 * math.pi * k / n
        out[k] = min(_ray_cast_np(x, y, a, edges, max_range) for a in (c, c - half, c + half))
    return out


def _signed_distance_many_np(xs, ys, edges, offsets):
    xs = np.asarray(xs, dtype=np.float64)[:, None]
    ys = np.asarray(ys, dtype=np.float64)[:, None]
    best = np.full(xs.shape[0], np.inf)
    for k in range(len(offsets) - 1):
        seg = edges[offsets[k]:offsets[k + 1]]
        ax, ay, bx, by = (seg[:, c][None, :] for c in range(4))
        ex, ey = bx - ax, by - ay
        ll = ex * ex + ey * ey
        s = np.clip(((xs - ax) * ex + (ys - ay) * ey) / np.where(ll == 0.0, 1.0, ll), 0.0, 1.0)
        d = np.hypot(xs - ax - s * ex, ys - ay - s * ey).min(axis=1)
        crosses = (ay > ys) != (by > ys)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = ax + (ys - ay) * (bx - ax) / (by - ay)
        inside = (crosses & (xs < xc)).sum(axis=1) % 2 == 1
        best = np.minimum(best, np.where(inside, -d, d))
    return best


def _signed_distance_np(px, py, edges, offsets):
    return float(_signed_distance_many_np([px], [py], edges, offsets)[0])


def _segment_clear_np(ax, ay, bx, by, edges):
    if edges.shape[0] == 0:
        return True
    dx, dy = bx - ax, by - ay
    cx, cy = edges[:, 0], edges[:, 1]
    ex, ey = edges[:, 2] - cx, edges[:, 3] - cy
    denom = dx * ey - dy * ex
    ok = np.abs(denom) >= _PAR_EPS
    safe = np.where(ok, denom, 1.0)
    wx, wy = cx - ax, cy - ay
    t = (wx * ey - wy * ex) / safe
    s = (wx * dy - wy * dx) / safe
    return not bool((ok & (t >= 0) & (t <= 1) & (s >= 0) & (s <= 1)).any())


def _astar_np(occ, si, sj, gi, gj):
    nx, ny = occ.shape

    def h(i, j):
        dx, dy = abs(gi - i), abs(gj - j)
        return max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)

    g = {(si, sj): 0.0}
    parent = {}
    closed = set()
    heap = [(h(si, sj), 0.0, si * ny + sj)]
    while heap:
        _, gc, cur = heapq.heappop(heap)
        ci, cj = divmod(cur, ny)
        if (ci, cj) in closed:
            continue
        closed.add((ci, cj))
        if (ci, cj) == (gi, gj):
            break
        for m in range(8):
            ni, nj = ci + int(_DI[m]), cj + int(_DJ[m])
            if not (0 <= ni < nx and 0 <= nj < ny) or occ[ni, nj]:
                continue
            if m >= 4 and (occ[ni, cj] or occ[ci, nj]):
                continue
            cand = gc + (SQRT2 if m >= 4 else 1.0)
            if cand < g.get((ni, nj), math.inf):
                g[(ni, nj)] = cand
                parent[(ni, nj)] = (ci, cj)
                heapq.heappush(heap, (cand + h(ni, nj), cand, ni * ny + nj))
    if (gi, gj) not in closed:
        return np.empty((0, 2), dtype=np.int64), math.inf
    path = [(gi, gj)]
    while path[-1] != (si, sj):
        path.append(parent[path[-1]])
    return np.asarray(path[::-1], dtype=np.int64), g[(gi, gj)]


numba_impl = SimpleNamespace(
    ray_cast=_ray_cast_nb,
    sense=_sense_nb,
    signed_distance=_signed_distance_nb,
    signed_distance_many=_signed_distance_many_nb,
    segment_clear=_segment_clear_nb,
    astar=_astar_nb,
)
numpy_impl = SimpleNamespace(
    ray_cast=_ray_cast_np,
    sense=_sense_np,
    signed_distance=_signed_distance_np,
    signed_distance_many=_signed_distance_many_np,
    segment_clear=_segment_clear_np,
    astar=_astar_np,
)

_active = numba_impl if USE_NUMBA else numpy_impl

ray_cast = _active.ray_cast
sense = _active.sense
signed_distance = _active.signed_distance
signed_distance_many = _active.signed_distance_many
segment_clear = _active.segment_clear
astar = _active.astar
