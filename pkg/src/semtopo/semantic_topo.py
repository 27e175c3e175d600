"""Segmentation of an explored occupancy grid into a semantic topometric map.

Pipeline (recomputed from scratch on every call):

1. free component containing the robot -> morphological skeleton
2. spur pruning against the distance transform
3. junction clusters / endpoints -> skeleton graph with traced branches
4. geodesic BFS from the skeleton assigns every free cell to a skeleton pixel
5. every frontier cluster is linked to its nearest skeleton pixel
6. the graph is turned into areas: Intersection, Pathway, DeadEnd,
   FrontierPathway

Areas come in two kinds.  *Node* areas (Intersection, DeadEnd) are points on
the skeleton; *edge* areas (Pathway, FrontierPathway) are polylines with two
ports, port 0 at ``points[0]`` and port 1 at ``points[-1]``.  A
FrontierPathway always has its frontier goal at port 1.
"""
from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
from skimage.morphology import skeletonize as _sk_skeletonize

from .world import Cell, CellState, OccupancyGrid, WorldPose

EIGHT = np.ones((3, 3), dtype=bool)
_OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


class AreaClass(str, Enum):
    INTERSECTION = "Intersection"
    PATHWAY = "Pathway"
    DEAD_END = "DeadEnd"
    FRONTIER_PATHWAY = "FrontierPathway"


@dataclass(frozen=True)
class SegmentParams:
    min_frontier_size: int = 3
    prune_factor: float = 1.5   # spur kept if longer than factor * clearance + margin (cells)
    prune_margin: float = 1.0
    max_prune_rounds: int = 20


@dataclass
class SemanticArea:
    id: int
    cls: AreaClass
    points: np.ndarray                    # (K, 2) world points; K == 1 for node areas
    cells: List[Cell] = field(default_factory=list)
    neighbors: List[Tuple[int, int, int]] = field(default_factory=list)  # (area, my port, their port)
    openings: int = 0
    connected_frontier_pathways: int = 0
    goal_id: Optional[int] = None
    is_node: bool = False
    cum: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if self.cum is None:
            seg = np.hypot(*np.diff(self.points, axis=0).T) if len(self.points) > 1 else np.zeros(0)
            self.cum = np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self.cum[-1])

    @property
    def skeleton_segment(self) -> np.ndarray:
        return self.points

    def port_arc(self, port: int) -> float:
        return 0.0 if port == 0 else self.length

    def neighbor_ids(self) -> List[int]:
        seen = []
        for a, _, _ in self.neighbors:
            if a not in seen:
                seen.append(a)
        return seen


@dataclass
class FrontierGoal:
    id: int
    target: WorldPose
    frontier_cells: List[Cell]
    path_to_nearest_intersection_len: float
    nearest_intersection: Optional[int]
    area_id: int
    openings: int = 0
    frontier_pathways: int = 0
    target_cell: Optional[Cell] = None

    @property
    def p_l(self) -> float:
        return self.path_to_nearest_intersection_len


@dataclass
class RobotAnchor:
    """Where the robot joins the map: an area, an arc position along that
    area's polyline and the lead-in leg from the robot to that point."""
    area_id: int
    arc: float
    lead_in: np.ndarray


@dataclass
class SkelNode:
    id: int
    kind: str                      # junction | end | split | terminal | ring
    point: Tuple[float, float]
    cells: List[Cell] = field(default_factory=list)
    area_id: int = -1


@dataclass
class SkelEdge:
    u: int
    v: int
    points: List[Tuple[float, float]]
    cells: List[Optional[Cell]]     # pixel behind each polyline vertex (None for node anchors)
    area_id: int = -1


@dataclass
class SkeletonGraph:
    nodes: Dict[int, SkelNode] = field(default_factory=dict)
    edges: List[SkelEdge] = field(default_factory=list)

    def add_node(self, kind, point, cells=()) -> int:
        nid = max(self.nodes) + 1 if self.nodes else 0
        self.nodes[nid] = SkelNode(nid, kind, (float(point[0]), float(point[1])), list(cells))
        return nid

    def add_edge(self, u, v, points, cells=None) -> SkelEdge:
        points = [(float(x), float(y)) for x, y in points]
        e = SkelEdge(u, v, points, list(cells) if cells is not None else [None] * len(points))
        self.edges.append(e)
        return e

    def degree(self, nid) -> int:
        return sum((e.u == nid) + (e.v == nid) for e in self.edges)


@dataclass
class SemanticTopometricMap:
    areas: List[SemanticArea]
    goals: List[FrontierGoal]
    avg_intersection_path_len: float
    graph: SkeletonGraph
    resolution: float = 0.05
    origin: Tuple[float, float] = (0.0, 0.0)
    area_of_cell: Optional[np.ndarray] = None      # (H, W) int32, -1 outside
    _cell_anchor: Optional[dict] = field(default=None, repr=False)
    _parent: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def frontier_paths(self) -> List[int]:
        return [a.id for a in self.areas if a.cls == AreaClass.FRONTIER_PATHWAY]

    def count(self, cls: AreaClass) -> int:
        return sum(1 for a in self.areas if a.cls == cls)

    def class_counts(self) -> Dict[str, int]:
        return {c.value: self.count(c) for c in AreaClass}

    def _cell_center(self, cell):
        return (self.origin[0] + (cell[0] + 0.5) * self.resolution,
                self.origin[1] + (cell[1] + 0.5) * self.resolution)

    def locate(self, x: float, y: float) -> Optional[RobotAnchor]:
        """Attach a world point to the map.

        On grid-derived maps the lead-in follows the geodesic BFS tree to the
        nearest skeleton pixel; otherwise it is the straight projection onto
        the closest area polyline.
        """
        if self.area_of_cell is not None:
            col = math.floor((x - self.origin[0]) / self.resolution)
            row = math.floor((y - self.origin[1]) / self.resolution)
            h, w = self.area_of_cell.shape
            if not (0 <= col < w and 0 <= row < h) or self.area_of_cell[row, col] < 0:
                return None
            lead = [(x, y)]
            cell = (col, row)
            while cell not in self._cell_anchor:
                nxt = int(self._parent[cell[1], cell[0]])
                if nxt < 0 or nxt == cell[1] * w + cell[0]:
                    return None
                cell = (nxt % w, nxt // w)
                lead.append(self._cell_center(cell))
            area_id, idx = self._cell_anchor[cell]
            area = self.areas[area_id]
            anchor_pt = (float(area.points[idx][0]), float(area.points[idx][1]))
            if lead[-1] != anchor_pt:
                lead.append(anchor_pt)
            return RobotAnchor(area_id, float(area.cum[idx]), np.asarray(lead))
        best = None
        for a in self.areas:
            arc, pt, dist = _project(a, x, y)
            if best is None or dist < best[0] - 1e-12:
                best = (dist, a.id, arc, pt)
        if best is None:
            return None
        _, aid, arc, pt = best
        return RobotAnchor(aid, arc, np.array([(x, y), pt]))


def _project(area: SemanticArea, x, y):
    pts = area.points
    if len(pts) == 1:
        return 0.0, (float(pts[0, 0]), float(pts[0, 1])), math.hypot(pts[0, 0] - x, pts[0, 1] - y)
    a = pts[:-1]
    d = pts[1:] - a
    ll = (d ** 2).sum(axis=1)
    safe = np.where(ll > 0, ll, 1.0)
    t = np.clip(((x - a[:, 0]) * d[:, 0] + (y - a[:, 1]) * d[:, 1]) / safe, 0.0, 1.0)
    t[ll == 0] = 0.0
    proj = a + d * t[:, None]
    dist = np.hypot(proj[:, 0] - x, proj[:, 1] - y)
    k = int(np.argmin(dist))
    arc = area.cum[k] + t[k] * (area.cum[k + 1] - area.cum[k])
    return float(arc), (float(proj[k, 0]), float(proj[k, 1])), float(dist[k])


def point_at(area: SemanticArea, s: float) -> np.ndarray:
    pts, cum = area.points, area.cum
    if len(pts) == 1:
        return pts[0].copy()
    k = int(np.searchsorted(cum, s, side="right")) - 1
    k = min(max(k, 0), len(cum) - 2)
    span = cum[k + 1] - cum[k]
    t = 0.0 if span == 0 else (s - cum[k]) / span
    return pts[k] + t * (pts[k + 1] - pts[k])


def subpolyline(area: SemanticArea, s0: float, s1: float) -> np.ndarray:
    """Points of ``area`` between arc positions ``s0`` and ``s1`` (reversed if s1 < s0)."""
    if len(area.points) == 1:
        return area.points.copy()
    lo, hi = (s0, s1) if s0 <= s1 else (s1, s0)
    inner = area.points[(area.cum > lo) & (area.cum < hi)]
    out = np.vstack([point_at(area, lo)[None, :], inner, point_at(area, hi)[None, :]])
    return out if s0 <= s1 else out[::-1]


# ---------------------------------------------------------------------------
# raster primitives

def frontier_mask(explored: OccupancyGrid) -> np.ndarray:
    unknown = explored.cells == CellState.UNKNOWN
    near_unknown = ndimage.binary_dilation(unknown, structure=EIGHT, border_value=0)
    return (explored.cells == CellState.FREE) & near_unknown


def detect_frontier_cells(explored: OccupancyGrid) -> set:
    """Free cells with at least one Unknown 8-neighbour."""
    rows, cols = np.nonzero(frontier_mask(explored))
    return set(zip(cols.tolist(), rows.tolist()))


def skeletonize(free_mask: np.ndarray) -> np.ndarray:
    """One-pixel-wide skeleton; every 8-connected component keeps at least one pixel."""
    free_mask = np.asarray(free_mask, dtype=bool)
    skel = _sk_skeletonize(free_mask)
    labels, n = ndimage.label(free_mask, structure=EIGHT)
    if n:
        kept = np.unique(labels[skel])
        missing = np.setdiff1d(np.arange(1, n + 1), kept)
        if len(missing):
            dist = ndimage.distance_transform_edt(free_mask)
            for lab in missing:
                skel[ndimage.maximum_position(dist, labels, lab)] = True
    return skel


def _neighbor_count(skel: np.ndarray) -> np.ndarray:
    s = skel.astype(np.int16)
    return ndimage.convolve(s, EIGHT.astype(np.int16), mode="constant") - s


@dataclass
class Junction:
    cells: List[Cell]
    anchor: Cell
    degree: int


def classify_junctions(skel: np.ndarray) -> List[Junction]:
    """Junction nodes of a thinned skeleton.

    Pixels with three or more skeleton neighbours are clustered (8-connected);
    a cluster is a junction when the skeleton pixels bordering it form at least
    three separate branches.
    """
    skel = np.asarray(skel, dtype=bool)
    cand = skel & (_neighbor_count(skel) >= 3)
    labels, _ = ndimage.label(cand, structure=EIGHT)
    out = []
    for lab, sl in enumerate(ndimage.find_objects(labels), start=1):
        r0, r1 = max(sl[0].start - 2, 0), min(sl[0].stop + 2, skel.shape[0])
        c0, c1 = max(sl[1].start - 2, 0), min(sl[1].stop + 2, skel.shape[1])
        cluster = labels[r0:r1, c0:c1] == lab
        ring = ndimage.binary_dilation(cluster, structure=EIGHT) & skel[r0:r1, c0:c1] & ~cluster
        _, degree = ndimage.label(ring, structure=EIGHT)
        if degree < 3:
            continue
        rr, cc = np.nonzero(cluster)
        rr, cc = rr + r0, cc + c0
        cells = sorted(zip(cc.tolist(), rr.tolist()), key=lambda c: (c[1], c[0]))
        mc, mr = cc.mean(), rr.mean()
        anchor = min(cells, key=lambda c: ((c[0] - mc) ** 2 + (c[1] - mr) ** 2, c[1], c[0]))
        out.append(Junction(cells, anchor, int(degree)))
    return out


# ---------------------------------------------------------------------------
# skeleton -> graph

class _Center:
    def __init__(self, res, origin):
        self.res = res
        self.origin = origin

    def __call__(self, cell):
        return (self.origin[0] + (cell[0] + 0.5) * self.res, self.origin[1] + (cell[1] + 0.5) * self.res)


def _cells_of(labels, lab, sl) -> List[Cell]:
    rr, cc = np.nonzero(labels[sl] == lab)
    return sorted(((int(c + sl[1].start), int(r + sl[0].start)) for r, c in zip(rr, cc)),
                  key=lambda p: (p[1], p[0]))


def _set_neighbors(p, cells):
    c, r = p
    for dr, dc in _OFFSETS:
        q = (c + dc, r + dr)
        if q in cells:
            yield q


def _chain_bfs(starts, cells):
    dist = {s: 0 for s in starts}
    parent = {s: None for s in starts}
    dq = deque(starts)
    while dq:
        p = dq.popleft()
        for q in _set_neighbors(p, cells):
            if q not in dist:
                dist[q] = dist[p] + 1
                parent[q] = p
                dq.append(q)
    return dist, parent


def _chain_path(starts, goals, cells):
    dist, parent = _chain_bfs(starts, cells)
    end = min((p for p in goals if p in dist), key=lambda p: (dist[p], p[1], p[0]))
    out = []
    while end is not None:
        out.append(end)
        end = parent[end]
    return out[::-1]


def _trace_graph(skel: np.ndarray, center) -> Tuple[SkeletonGraph, Dict[Cell, int]]:
    """Nodes (junction clusters, endpoints) and pixel-chain edges of a skeleton.

    Returns the graph and a map from node pixels to node ids.
    """
    g = SkeletonGraph()
    node_of: Dict[Cell, int] = {}
    for j in classify_junctions(skel):
        nid = g.add_node("junction", center(j.anchor), j.cells)
        for c in j.cells:
            node_of[c] = nid
    count = _neighbor_count(skel)
    for r, c in zip(*np.nonzero(skel & (count <= 1))):
        cell = (int(c), int(r))
        if cell not in node_of:
            node_of[cell] = g.add_node("end", center(cell), [cell])

    node_pix = np.zeros_like(skel)
    for (c, r) in node_of:
        node_pix[r, c] = True
    labels, n = ndimage.label(skel & ~node_pix, structure=EIGHT)
    for lab, sl in enumerate(ndimage.find_objects(labels), start=1):
        comp = _cells_of(labels, lab, sl)
        comp_set = set(comp)
        touches: Dict[int, List[Cell]] = {}
        for p in comp:
            for q in _set_neighbors(p, node_of):
                lst = touches.setdefault(node_of[q], [])
                if p not in lst:
                    lst.append(p)
        if not touches:
            # closed loop without junctions: pin an artificial node on it
            ring_cell = comp[0]
            nid = g.add_node("ring", center(ring_cell), [ring_cell])
            node_of[ring_cell] = nid
            comp_set.discard(ring_cell)
            if not comp_set:
                continue
            touches = {nid: [p for p in _set_neighbors(ring_cell, comp_set)]}
        nodes = sorted(touches)
        end_node = None
        if len(nodes) >= 2:
            best = None
            for i, a in enumerate(nodes):
                dist, _ = _chain_bfs(touches[a], comp_set)
                for b in nodes[i + 1:]:
                    d = min(dist.get(p, math.inf) for p in touches[b])
                    if best is None or d > best[0]:
                        best = (d, a, b)
            _, a, b = best
            path = _chain_path(touches[a], set(touches[b]), comp_set)
        else:
            a = b = nodes[0]
            starts = touches[a]
            dist, _ = _chain_bfs(starts[:1], comp_set)
            far = max(starts, key=lambda p: (dist.get(p, -1), -p[1], -p[0]))
            if dist.get(far, 0) < 2 and len(comp_set) > 2:
                # touches its node at one end only: close it with a new endpoint
                far = max(comp_set, key=lambda p: (dist.get(p, -1), -p[1], -p[0]))
                end_node = far
            path = _chain_path(starts[:1], {far}, comp_set)
        pts = [g.nodes[a].point] + [center(p) for p in path]
        cells = [None] + list(path)
        if end_node is not None:
            b = g.add_node("end", center(end_node), [end_node])
            node_of[end_node] = b
            pts, cells = pts[:-1], cells[:-1]
        g.add_edge(a, b, pts + [g.nodes[b].point], cells + [None])

    # node pixels touching other node pixels directly (no chain in between)
    linked = {(min(e.u, e.v), max(e.u, e.v)) for e in g.edges}
    for cell, nid in sorted(node_of.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        for q in _set_neighbors(cell, node_of):
            key = (min(nid, node_of[q]), max(nid, node_of[q]))
            if key[0] != key[1] and key not in linked:
                linked.add(key)
                g.add_edge(key[0], key[1], [g.nodes[key[0]].point, g.nodes[key[1]].point])
    return g, node_of


def _edge_len(e: SkelEdge) -> float:
    p = np.asarray(e.points)
    return float(np.hypot(*np.diff(p, axis=0).T).sum()) if len(p) > 1 else 0.0


def prune_spurs(skel: np.ndarray, clearance: np.ndarray, params: SegmentParams,
                center) -> np.ndarray:
    """Remove short endpoint branches that stay inside their junction's clearance disc."""
    skel = skel.copy()
    for _ in range(params.max_prune_rounds):
        g, _ = _trace_graph(skel, center)
        deg = {nid: g.degree(nid) for nid in g.nodes}
        spurs_at: Dict[int, list] = {}
        for e in g.edges:
            for j, t in ((e.u, e.v), (e.v, e.u)):
                if j == t or g.nodes[j].kind != "junction" or g.nodes[t].kind != "end" or deg[t] != 1:
                    continue
                clear = max(clearance[c[1], c[0]] for c in g.nodes[j].cells)
                length = _edge_len(e) / center.res
                if length <= params.prune_factor * clear + params.prune_margin:
                    spurs_at.setdefault(j, []).append((length, e, t))
        removed = False
        for j, spurs in sorted(spurs_at.items()):
            spurs.sort(key=lambda s: s[0])
            if len(spurs) >= deg[j]:
                spurs = spurs[:-1]  # never strip a junction bare
            for _, e, t in spurs:
                for c in list(e.cells) + g.nodes[t].cells:
                    if c is not None:
                        skel[c[1], c[0]] = False
                removed = True
        if not removed:
            break
    return skel


# ---------------------------------------------------------------------------
# geodesic assignment of free cells to skeleton pixels

def _multi_source_bfs(comp: np.ndarray, sources: Sequence[Cell]):
    """8-connected BFS over ``comp`` from ``sources``.

    Returns (source index per cell, parent flat index per cell); -1 outside,
    sources are their own parent.
    """
    h, w = comp.shape
    src = np.full(h * w, -1, dtype=np.int64)
    parent = np.full(h * w, -1, dtype=np.int64)
    flat = comp.ravel()
    dq = deque()
    for i, (c, r) in enumerate(sources):
        k = r * w + c
        if src[k] < 0:
            src[k] = i
            parent[k] = k
            dq.append(k)
    while dq:
        k = dq.popleft()
        r, c = divmod(k, w)
        s = src[k]
        for dr, dc in _OFFSETS:
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w:
                q = rr * w + cc
                if flat[q] and src[q] < 0:
                    src[q] = s
                    parent[q] = k
                    dq.append(q)
    return src.reshape(h, w), parent.reshape(h, w)


# ---------------------------------------------------------------------------
# graph -> areas

@dataclass
class TerminalInfo:
    frontier_cells: List[Cell]
    target_cell: Optional[Cell] = None


def _dissolve(g: SkeletonGraph, kinds=("end", "split")) -> None:
    """Merge the two branches meeting at pass-through nodes of degree two."""
    changed = True
    while changed:
        changed = False
        for nid in sorted(g.nodes):
            node = g.nodes[nid]
            if node.kind not in kinds:
                continue
            inc = [e for e in g.edges if e.u == nid or e.v == nid]
            if len(inc) != 2 or inc[0].u == inc[0].v or inc[1].u == inc[1].v:
                continue
            e1, e2 = inc
            if e1.v == nid:
                p1, c1, a = e1.points, e1.cells, e1.u
            else:
                p1, c1, a = e1.points[::-1], e1.cells[::-1], e1.v
            if e2.u == nid:
                p2, c2, b = e2.points, e2.cells, e2.v
            else:
                p2, c2, b = e2.points[::-1], e2.cells[::-1], e2.u
            joint = node.cells[0] if node.cells else None
            merged = SkelEdge(a, b, list(p1) + list(p2[1:]), list(c1[:-1]) + [joint] + list(c2[1:]))
            g.edges = [e for e in g.edges if e is not e1 and e is not e2] + [merged]
            del g.nodes[nid]
            changed = True
            break


def assemble(graph: SkeletonGraph, terminals: Dict[int, TerminalInfo]) -> SemanticTopometricMap:
    """Turn a skeleton graph into classified areas and frontier goals.

    ``terminals`` maps terminal node ids to their frontier clusters.  Endpoint
    and split nodes of degree two are dissolved into a single branch; a branch
    with frontiers at both ends is cut in two at its midpoint.
    """
    g = SkeletonGraph({k: replace(v, cells=list(v.cells)) for k, v in graph.nodes.items()},
                      [replace(e, points=list(e.points), cells=list(e.cells)) for e in graph.edges])
    _dissolve(g)

    mid_pairs = []
    for e in list(g.edges):
        if e.u != e.v and g.nodes[e.u].kind == "terminal" and g.nodes[e.v].kind == "terminal":
            pts = np.asarray(e.points)
            cum = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
            if len(pts) < 3:
                mid = tuple((pts[0] + pts[-1]) / 2)
                left = SkelEdge(e.u, -1, [e.points[0], mid], [e.cells[0], None])
                right = SkelEdge(e.v, -1, [e.points[-1], mid], [e.cells[-1], None])
            else:
                k = int(np.argmin(np.abs(cum[1:-1] - cum[-1] / 2))) + 1
                left = SkelEdge(e.u, -1, e.points[:k + 1], e.cells[:k + 1])
                right = SkelEdge(e.v, -1, e.points[k:][::-1], ([None] + e.cells[k + 1:])[::-1])
            g.edges.remove(e)
            g.edges += [left, right]
            mid_pairs.append((left, right))

    deg = {nid: 0 for nid in g.nodes}
    for e in g.edges:
        for n in (e.u, e.v):
            if n >= 0:
                deg[n] += 1

    areas: List[SemanticArea] = []
    for nid in sorted(g.nodes):
        node = g.nodes[nid]
        if node.kind == "terminal":
            continue
        if node.kind == "ring":
            cls = AreaClass.PATHWAY
        elif deg[nid] >= 3:
            cls = AreaClass.INTERSECTION
        else:
            cls = AreaClass.DEAD_END
        node.area_id = len(areas)
        areas.append(SemanticArea(len(areas), cls, [node.point], list(node.cells), is_node=True))

    def is_term(n):
        return n >= 0 and g.nodes[n].kind == "terminal"

    for e in g.edges:
        if is_term(e.u) and not is_term(e.v):
            e.u, e.v = e.v, e.u
            e.points, e.cells = e.points[::-1], e.cells[::-1]
        if e.v == -1:
            # half of a cut branch: orient away from the cut, goal at port 1
            e.u, e.v = e.v, e.u
            e.points, e.cells = e.points[::-1], e.cells[::-1]
        cls = AreaClass.FRONTIER_PATHWAY if is_term(e.v) else AreaClass.PATHWAY
        area = SemanticArea(len(areas), cls, e.points)
        e.area_id = area.id
        areas.append(area)
        for port, n in ((0, e.u), (1, e.v)):
            if n >= 0 and g.nodes[n].area_id >= 0:
                na = g.nodes[n].area_id
                area.neighbors.append((na, port, 0))
                areas[na].neighbors.append((area.id, 0, port))
    for left, right in mid_pairs:
        areas[left.area_id].neighbors.append((right.area_id, 0, 0))
        areas[right.area_id].neighbors.append((left.area_id, 0, 0))

    for a in areas:
        if a.cls == AreaClass.INTERSECTION:
            nb = a.neighbor_ids()
            a.openings = len(nb)
            a.connected_frontier_pathways = sum(areas[n].cls == AreaClass.FRONTIER_PATHWAY for n in nb)

    goals: List[FrontierGoal] = []
    for e in g.edges:
        area = areas[e.area_id]
        if area.cls != AreaClass.FRONTIER_PATHWAY:
            continue
        info = terminals.get(e.v)
        dist, inter = nearest_intersection(areas, area.id)
        ia = areas[inter] if inter is not None else None
        tx, ty = area.points[-1]
        gl = FrontierGoal(
            id=len(goals),
            target=WorldPose(float(tx), float(ty), 0.0),
            frontier_cells=list(info.frontier_cells) if info else [],
            path_to_nearest_intersection_len=dist,
            nearest_intersection=inter,
            area_id=area.id,
            openings=ia.openings if ia else 0,
            frontier_pathways=ia.connected_frontier_pathways if ia else 0,
            target_cell=info.target_cell if info else None,
        )
        area.goal_id = gl.id
        goals.append(gl)

    lengths = [a.length for a in areas
               if a.cls == AreaClass.PATHWAY and not a.is_node and len(a.neighbors) == 2
               and all(areas[n].cls == AreaClass.INTERSECTION for n, _, _ in a.neighbors)]
    l_path = float(np.mean(lengths)) if lengths else 1.0
    return SemanticTopometricMap(areas, goals, l_path, g)


def nearest_intersection(areas: List[SemanticArea], fp_area: int) -> Tuple[float, Optional[int]]:
    """Skeleton distance from a FrontierPathway's goal end to the closest Intersection.

    Returns ``(0.0, None)`` when no Intersection is reachable.
    """
    best = {(fp_area, 1): 0.0}
    heap = [(0.0, fp_area, 1)]
    while heap:
        d, aid, entry = heapq.heappop(heap)
        if d > best.get((aid, entry), math.inf):
            continue
        area = areas[aid]
        if area.cls == AreaClass.INTERSECTION:
            return d, aid
        for nb, my_port, their_port in area.neighbors:
            if not area.is_node and my_port == entry and len(area.neighbors) > 1:
                continue
            step = 0.0 if area.is_node else abs(area.port_arc(my_port) - area.port_arc(entry))
            nd = d + step
            if nd < best.get((nb, their_port), math.inf):
                best[(nb, their_port)] = nd
                heapq.heappush(heap, (nd, nb, their_port))
    return 0.0, None


# ---------------------------------------------------------------------------
# top level

def segment(explored: OccupancyGrid, robot_cell: Cell,
            params: SegmentParams = SegmentParams()) -> SemanticTopometricMap:
    """Segment the free component around ``robot_cell`` into semantic areas."""
    col, row = robot_cell
    if not explored.in_bounds(robot_cell) or explored.cells[row, col] != CellState.FREE:
        raise ValueError("robot cell is not Free")
    free = explored.cells == CellState.FREE
    labels, _ = ndimage.label(free, structure=EIGHT)
    comp = labels == labels[row, col]
    center = _Center(explored.resolution, explored.origin)
    h, w = comp.shape

    clearance = ndimage.distance_transform_edt(comp)
    skel = prune_spurs(skeletonize(comp), clearance, params, center)
    graph, node_of = _trace_graph(skel, center)

    owner: Dict[Cell, Tuple[str, int, int]] = {c: ("node", nid, 0) for c, nid in node_of.items()}
    for ei, e in enumerate(graph.edges):
        for k, c in enumerate(e.cells):
            if c is not None and c not in owner:
                owner[c] = ("edge", ei, k)
    sources = sorted(owner, key=lambda c: (c[1], c[0]))
    src, parent = _multi_source_bfs(comp, sources)

    # frontier clusters inside the robot's component, each linked to the
    # skeleton pixel its BFS tree leads to
    fmask = frontier_mask(explored) & comp
    flabels, _ = ndimage.label(fmask, structure=EIGHT)
    terminals: Dict[int, TerminalInfo] = {}
    splits: Dict[int, Dict[int, int]] = {}
    for lab, sl in enumerate(ndimage.find_objects(flabels), start=1):
        cells = _cells_of(flabels, lab, sl)
        if len(cells) < params.min_frontier_size:
            continue
        mc = sum(c for c, _ in cells) / len(cells)
        mr = sum(r for _, r in cells) / len(cells)
        target = min(cells, key=lambda p: ((p[0] - mc) ** 2 + (p[1] - mr) ** 2, p[1], p[0]))
        chain = [target]
        k = target[1] * w + target[0]
        while parent.flat[k] != k:
            k = int(parent.flat[k])
            chain.append((k % w, k // w))
        chain.reverse()                       # skeleton pixel -> target
        kind, ident, idx = owner[chain[0]]
        if kind == "node":
            base = ident
        else:
            per_edge = splits.setdefault(ident, {})
            if idx not in per_edge:
                per_edge[idx] = graph.add_node("split", center(chain[0]), [chain[0]])
            base = per_edge[idx]
        tid = graph.add_node("terminal", center(target), [target])
        terminals[tid] = TerminalInfo(cells, target)
        rest = chain[1:] if len(chain) > 1 else [target]
        graph.add_edge(base, tid, [graph.nodes[base].point] + [center(c) for c in rest],
                       [None] + list(rest))

    # cut split branches into pieces
    pieces = []
    for ei, e in enumerate(graph.edges):
        cuts = splits.get(ei)
        if not cuts:
            pieces.append(e)
            continue
        prev_node, prev_k = e.u, 0
        for k in sorted(cuts) + [len(e.points) - 1]:
            nid = cuts.get(k, e.v)
            cells = list(e.cells[prev_k:k + 1])
            cells[0] = None
            cells[-1] = None
            pieces.append(SkelEdge(prev_node, nid, e.points[prev_k:k + 1], cells))
            prev_node, prev_k = nid, k
    graph.edges = pieces

    # a frontier joining a branch just short of its endpoint leaves a stub
    # inside the clearance disc; fold the stub into the split point
    stub_owner: Dict[Cell, Cell] = {}
    for nid, node in list(graph.nodes.items()):
        if node.kind != "split":
            continue
        for e in [e for e in graph.edges if nid in (e.u, e.v)]:
            other = e.v if e.u == nid else e.u
            if graph.nodes[other].kind != "end" or graph.degree(other) != 1:
                continue
            sc = node.cells[0]
            if _edge_len(e) / center.res <= params.prune_factor * clearance[sc[1], sc[0]] + params.prune_margin:
                for c in [c for c in e.cells if c is not None] + graph.nodes[other].cells:
                    stub_owner[c] = sc
                graph.edges.remove(e)
                del graph.nodes[other]

    smap = assemble(graph, terminals)
    smap.resolution = explored.resolution
    smap.origin = explored.origin

    # skeleton pixel -> (area, polyline vertex); node pixels belong to node areas
    anchor: Dict[Cell, Tuple[int, int]] = {}
    for node in smap.graph.nodes.values():
        if node.area_id >= 0:
            for c in node.cells:
                anchor[c] = (node.area_id, 0)
    for e in smap.graph.edges:
        for k, c in enumerate(e.cells):
            if c is not None and c not in anchor:
                anchor[c] = (e.area_id, k)
    for c, sc in stub_owner.items():
        if sc in anchor:
            anchor[c] = anchor[sc]

    area_of_src = np.array([anchor.get(c, (-1, 0))[0] for c in sources], dtype=np.int64)
    area_of_cell = np.full((h, w), -1, dtype=np.int32)
    inside = src >= 0
    area_of_cell[inside] = area_of_src[src[inside]]
    for c, (aid, _) in anchor.items():
        area_of_cell[c[1], c[0]] = aid      # FrontierPathway connector cells
    for a in smap.areas:
        a.cells = []
    rows, cols = np.nonzero(area_of_cell >= 0)
    for r, c in zip(rows.tolist(), cols.tolist()):
        smap.areas[area_of_cell[r, c]].cells.append((c, r))
    smap.area_of_cell = area_of_cell
    smap._cell_anchor = anchor
    smap._parent = parent
    return smap


def export_graph_text(smap: SemanticTopometricMap) -> str:
    """Line-oriented dump of areas, adjacency and goals (stable ordering)."""
    lines = [f"L_path {smap.avg_intersection_path_len:.6f}"]
    for a in smap.areas:
        x, y = a.points[0]
        lines.append(f"area {a.id} {a.cls.value} len={a.length:.6f} cells={len(a.cells)} "
                     f"start=({x:.4f},{y:.4f}) openings={a.openings} "
                     f"frontier_paths={a.connected_frontier_pathways}")
    for a in smap.areas:
        for nb, mp, tp in a.neighbors:
            if a.id < nb:
                lines.append(f"link {a.id} {nb} ports={mp}:{tp}")
    for gl in smap.goals:
        lines.append(f"goal {gl.id} area={gl.area_id} target=({gl.target.x:.4f},{gl.target.y:.4f}) "
                     f"p_l={gl.p_l:.6f} I={gl.nearest_intersection} O={gl.openings} "
                     f"P_u={gl.frontier_pathways} cells={len(gl.frontier_cells)}")
    return "\n".join(lines) + "\n"
