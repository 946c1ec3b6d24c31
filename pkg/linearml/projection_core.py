"""Projection f'(X) = W^t X, the 1-D neighbor index and the ratio consensus."""

import logging
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Union

import numpy as np

from linearml.config import get_eps_div
from linearml.dataset import Dataset, SparseVector
from linearml.errors import (
    ConfigInvalid,
    EmptyInput,
    EmptyNeighbors,
    IndexOutOfRange,
    KTooLarge,
    LengthMismatch,
    NonFiniteValue,
)


logger = logging.getLogger(__name__)


class ConsensusVariant(Enum):
    MEAN = 'mean'
    MEDIAN = 'median'


@dataclass(frozen=True)
class Projection:
    bias: float
    weights: tuple

    def __post_init__(self):
        if not math.isfinite(self.bias) or not all(math.isfinite(w) for w in self.weights):
            raise NonFiniteValue("projection has non-finite components")

    @property
    def dimension(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class Neighbor:
    projected: float
    target: float
    # insertion position in the index; the identity `exclude` refers to
    source: int = 0


def project(p: Projection, x: SparseVector) -> float:
    total = p.bias
    weights = p.weights
    for index, value in x.entries:
        if index > len(weights):
            raise IndexOutOfRange(f"feature {index} exceeds projection dimension {len(weights)}")
        total += weights[index - 1] * value
    return total


def project_all(p: Projection, d: Dataset) -> np.ndarray:
    return np.array([project(p, e.features) for e in d.examples], dtype=float)


class NeighborIndex:
    """Training pairs sorted by projected value; read-only once built"""

    def __init__(self, projected: Sequence[float], targets: Sequence[float], sources: Sequence[int]):
        self._values: List[float] = [float(v) for v in projected]
        self._targets: List[float] = [float(t) for t in targets]
        self._sources: List[int] = [int(s) for s in sources]
        self._rank = {source: rank for rank, source in enumerate(self._sources)}

    def __len__(self):
        return len(self._values)

    @property
    def entries(self) -> List[Neighbor]:
        return [Neighbor(v, t, s) for v, t, s in zip(self._values, self._targets, self._sources)]

    @property
    def projected(self) -> List[float]:
        return list(self._values)

    @property
    def sources(self) -> List[int]:
        return list(self._sources)

    def _take(self, start: int, stop: int, skip: Optional[int], needed: int, out: List[int]) -> None:
        for rank in range(start, stop):
            if len(out) == needed:
                return
            if rank != skip:
                out.append(rank)

    def nearest_ranks(self, query: float, k: int, exclude: Optional[int] = None) -> List[int]:
        """Sorted positions of the k nearest entries, nearest first"""
        n = len(self._values)
        skip = self._rank.get(exclude) if exclude is not None else None
        available = n - (1 if skip is not None else 0)
        if k < 1:
            raise ConfigInvalid(f"k must be at least 1, got {k}")
        if k > available:
            raise KTooLarge(f"k={k} exceeds the {available} available neighbors")

        values = self._values
        chosen: List[int] = []
        right = bisect_left(values, query)
        left = right - 1
        while len(chosen) < k:
            take_left = left >= 0 and (
                right >= n or abs(values[left] - query) <= abs(values[right] - query))
            if take_left:
                # equal values form a run; earlier insertions come first inside it
                start = bisect_left(values, values[left], 0, left + 1)
                self._take(start, left + 1, skip, k, chosen)
                left = start - 1
            else:
                stop = bisect_right(values, values[right], right)
                self._take(right, stop, skip, k, chosen)
                right = stop
        return chosen

    def k_nearest(self, query: float, k: int, exclude: Optional[int] = None) -> List[Neighbor]:
        return [Neighbor(self._values[r], self._targets[r], self._sources[r])
                for r in self.nearest_ranks(query, k, exclude)]


def build_index(projected: Sequence[float], targets: Sequence[float]) -> NeighborIndex:
    if len(projected) != len(targets):
        raise LengthMismatch(f"{len(projected)} projected values but {len(targets)} targets")
    if len(projected) == 0:
        raise EmptyInput("cannot build a neighbor index from no points")
    values = np.asarray(projected, dtype=float)
    if not np.all(np.isfinite(values)) or not np.all(np.isfinite(np.asarray(targets, dtype=float))):
        raise NonFiniteValue("neighbor index entries must be finite")
    order = np.argsort(values, kind='stable')
    return NeighborIndex(values[order], [targets[i] for i in order], order)


def k_nearest(idx: NeighborIndex, query: float, k: int, exclude: Optional[int] = None) -> List[Neighbor]:
    return idx.k_nearest(query, k, exclude)


def consensus(query: float, neighbors: Sequence[Neighbor],
              variant: Union[ConsensusVariant, str] = ConsensusVariant.MEAN,
              eps_div: Optional[float] = None) -> float:
    """Average (or median) of query * target / projected over the neighbors.

    Neighbors whose projected value is within eps_div of zero are left out;
    if none remain, the plain mean of the neighbor targets is returned.
    """
    if not neighbors:
        raise EmptyNeighbors("consensus needs at least one neighbor")
    variant = ConsensusVariant(variant)
    eps_div = get_eps_div() if eps_div is None else eps_div

    ratios = [query * n.target / n.projected for n in neighbors if abs(n.projected) > eps_div]
    if not ratios:
        return float(np.mean([n.target for n in neighbors]))
    if variant is ConsensusVariant.MEDIAN:
        return float(np.median(ratios))
    return float(np.mean(ratios))


def consensus_many(queries: np.ndarray, neighbor_projected: np.ndarray, neighbor_targets: np.ndarray,
                   variant: Union[ConsensusVariant, str] = ConsensusVariant.MEAN,
                   eps_div: Optional[float] = None) -> np.ndarray:
    """Row-wise `consensus` for n queries against n x k neighbor arrays"""
    variant = ConsensusVariant(variant)
    eps_div = get_eps_div() if eps_div is None else eps_div

    admissible = np.abs(neighbor_projected) > eps_div
    safe = np.where(admissible, neighbor_projected, 1.0)
    ratios = queries[:, None] * neighbor_targets / safe
    counts = admissible.sum(axis=1)
    has_any = counts > 0

    if variant is ConsensusVariant.MEDIAN:
        estimate = np.zeros(len(queries))
        if has_any.any():
            masked = np.where(admissible[has_any], ratios[has_any], np.nan)
            estimate[has_any] = np.nanmedian(masked, axis=1)
    else:
        estimate = np.where(admissible, ratios, 0.0).sum(axis=1) / np.maximum(counts, 1)

    return np.where(has_any, estimate, neighbor_targets.mean(axis=1))


def neighbor_table(projected: Sequence[float], k: int, leave_self_out: bool) -> np.ndarray:
    """Source positions of the k nearest neighbors of every point, one row per point"""
    index = build_index(projected, [0.0] * len(projected))
    table = np.empty((len(projected), k), dtype=np.int64)
    sources = index.sources
    for i, value in enumerate(projected):
        ranks = index.nearest_ranks(float(value), k, exclude=i if leave_self_out else None)
        table[i] = [sources[r] for r in ranks]
    logger.debug(f"Built {len(projected)}x{k} neighbor table (leave_self_out={leave_self_out})")
    return table
