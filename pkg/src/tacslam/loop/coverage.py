'''
Module: coverage.py
Description: Coverage set: the smallest-so-far subset of keyframes that still touches every surface cell seen

Usage:
- CoverageSet: members, cached lifted contact points, per-cell membership counts
- CoverageSet.update() / coverage_update(): greedy add (> area_min of new area) then prune
- CoverageSet.set_poses(): lazily re-project footprints after a pose-graph solve
- CoverageSet.footprints(): member id -> surface cell keys, shared with fusion
'''
# Import packages
from __future__ import annotations
import logging
from collections import Counter
from typing import Iterator, Optional

import numpy as np

from ..geometry import TransformSE3
from ..surface import SensorSpec
from ..tracking import Keyframe

log = logging.getLogger(__name__)

_OFFSET = 1 << 20


def cell_keys(points: np.ndarray, cell_size: float) -> np.ndarray:
    '''
    cell_keys(): unique int64 keys of the cubic cells containing points (mm)
    '''
    idx = np.floor(np.asarray(points) / cell_size).astype(np.int64) + _OFFSET
    keys = (idx[:, 0] << 42) | (idx[:, 1] << 21) | idx[:, 2]
    return np.unique(keys)


class CoverageSet:
    """Footprints are surface cells of the current global estimate; area = cell count x cell_size^2."""

    def __init__(self, spec: SensorSpec, area_min: float = 0.2, cell_size: float = 0.25):
        if area_min < 0 or cell_size <= 0:
            raise ValueError("area_min must be non-negative and cell_size positive")
        self.spec = spec
        self.area_min = area_min
        self.cell_size = cell_size
        self.members: list[int] = []
        self._keyframes: dict[int, Keyframe] = {}
        self._points: dict[int, np.ndarray] = {}
        self._poses: dict[int, TransformSE3] = {}
        self._cells: dict[int, np.ndarray] = {}
        self._counts: Counter = Counter()
        self._dirty = False

    # ---------- Views ----------

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, kf_id: int) -> bool:
        return kf_id in self._keyframes

    def __iter__(self) -> Iterator[Keyframe]:
        self._refresh()
        return iter([self._keyframes[m] for m in self.members])

    def keyframe(self, kf_id: int) -> Keyframe:
        return self._keyframes[kf_id]

    def pose(self, kf_id: int) -> TransformSE3:
        return self._poses[kf_id]

    @property
    def cell_area(self) -> float:
        return self.cell_size**2

    def footprint(self, kf_id: int) -> np.ndarray:
        self._refresh()
        return self._cells[kf_id]

    def footprints(self) -> dict[int, np.ndarray]:
        """Cell keys of every member at its current pose."""
        self._refresh()
        return {m: self._cells[m] for m in self.members}

    def union_area(self) -> float:
        self._refresh()
        return len(self._counts) * self.cell_area

    def unique_area(self, kf_id: int) -> float:
        """Area a member covers that no other member does."""
        self._refresh()
        cells = self._cells[kf_id]
        return sum(1 for c in cells.tolist() if self._counts[c] == 1) * self.cell_area

    def new_area(self, points: np.ndarray, pose: TransformSE3) -> float:
        """Area of lifted points (sensor frame) under pose not covered by any member."""
        self._refresh()
        cells = cell_keys(pose.apply(points), self.cell_size)
        return sum(1 for c in cells.tolist() if self._counts[c] == 0) * self.cell_area

    # ---------- Mutation ----------

    def _lift(self, kf: Keyframe) -> np.ndarray:
        points, _ = kf.frame.lift(self.spec)
        return points

    def _insert(self, kf: Keyframe, points: np.ndarray, pose: TransformSE3) -> None:
        self.members.append(kf.id)
        self._keyframes[kf.id] = kf
        self._points[kf.id] = points
        self._poses[kf.id] = pose
        cells = cell_keys(pose.apply(points), self.cell_size)
        self._cells[kf.id] = cells
        self._counts.update(cells.tolist())

    def _remove(self, kf_id: int) -> None:
        self.members.remove(kf_id)
        self._counts.subtract(self._cells.pop(kf_id).tolist())
        self._counts += Counter()   # drop non-positive entries
        for store in (self._keyframes, self._points, self._poses):
            store.pop(kf_id)

    def _refresh(self) -> None:
        if not self._dirty:
            return
        self._counts = Counter()
        for m in self.members:
            cells = cell_keys(self._poses[m].apply(self._points[m]), self.cell_size)
            self._cells[m] = cells
            self._counts.update(cells.tolist())
        self._dirty = False

    def set_poses(self, poses: dict[int, TransformSE3]) -> None:
        '''
        set_poses(): adopt re-optimized member poses; footprints are recomputed on next use
        '''
        for m in self.members:
            if m in poses:
                self._poses[m] = poses[m]
        self._dirty = True

    def prune(self, protect: Optional[int] = None) -> list[int]:
        '''
        prune(): drop members (oldest first) whose unique area is at most area_min
        '''
        self._refresh()
        removed = []
        for m in list(self.members):
            if m == protect:
                continue
            if self.unique_area(m) <= self.area_min:
                self._remove(m)
                removed.append(m)
        if removed:
            log.debug("coverage pruned keyframes %s", removed)
        return removed

    def update(self, kf: Keyframe, pose: TransformSE3) -> bool:
        '''
        update(): add kf when its new area exceeds area_min, then prune redundant members

        Parameters:
        kf (Keyframe): keyframe with a non-empty contact mask
        pose (TransformSE3): its current global pose estimate

        Returns:
        True when kf joined the coverage set
        '''
        if kf.frame.is_empty():
            return False
        points = self._lift(kf)
        area = self.new_area(points, pose)
        if area <= self.area_min:
            log.debug("keyframe %d adds %.3f mm2; not added to coverage", kf.id, area)
            return False
        self._insert(kf, points, pose)
        self.prune(protect=kf.id)
        log.debug("keyframe %d added to coverage (%.2f mm2 new, %d members)", kf.id, area, len(self))
        return True


def coverage_update(cov: CoverageSet, kf: Keyframe, pose: TransformSE3) -> CoverageSet:
    cov.update(kf, pose)
    return cov
