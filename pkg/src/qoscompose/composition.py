"""Trust matrix construction, max-trust provider selection and handoff plans."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, MutableMapping, Optional, Sequence, Union

from .hammerstein import (HammersteinFilter, HammersteinModel, build_normalization, normalize,
                          scale_trust, trust_score)
from .qos_metrics import DEFAULT_METRICS, InvalidArgument, QosVector


class NoProviderError(LookupError):
    def __init__(self, service: "AbstractService"):
        super().__init__(f"no provider for abstract service {service.id!r} "
                         f"(plan position {service.position})")
        self.service = service


@dataclass(frozen=True)
class AbstractService:
    id: str
    position: int


def make_request(service_ids: Sequence[str]) -> list[AbstractService]:
    return [AbstractService(sid, i) for i, sid in enumerate(service_ids)]


@dataclass(frozen=True)
class ServiceAdvertisement:
    node_id: int
    service_id: str
    abstract_id: str
    qos: QosVector
    received_at: float = 0.0


@dataclass(frozen=True)
class Cell:
    trust: float
    service_id: str = ""
    received_at: float = 0.0


@dataclass(frozen=True)
class TrustMatrix:
    """Rows are abstract services, columns are node ids; ``None`` marks an absent cell."""

    services: tuple[AbstractService, ...]
    node_ids: tuple[int, ...]
    cells: tuple[tuple[Optional[Cell], ...], ...]

    def __post_init__(self):
        if len(self.cells) != len(self.services):
            raise InvalidArgument("one row per abstract service required")
        for row in self.cells:
            if len(row) != len(self.node_ids):
                raise InvalidArgument("row width must equal the number of nodes")
            for cell in row:
                if cell is not None and not 0.0 <= cell.trust <= 100.0:
                    raise InvalidArgument(f"trust {cell.trust} outside [0, 100]")

    @classmethod
    def from_scores(cls, rows: Sequence[Sequence[Optional[float]]],
                    node_ids: Optional[Sequence[int]] = None,
                    service_ids: Optional[Sequence[str]] = None) -> "TrustMatrix":
        """Build a matrix from raw scores; ``None`` or ``inf`` denote absent cells."""
        width = len(rows[0]) if rows else 0
        node_ids = tuple(node_ids) if node_ids is not None else tuple(range(1, width + 1))
        service_ids = service_ids or [f"S{i + 1}" for i in range(len(rows))]
        services = tuple(make_request(service_ids))
        cells = tuple(
            tuple(None if (v is None or math.isinf(v)) else Cell(float(v), f"{s.id}@{n}")
                  for v, n in zip(row, node_ids))
            for row, s in zip(rows, services))
        return cls(services, node_ids, cells)

    def scores(self) -> list[list[Optional[float]]]:
        return [[None if c is None else c.trust for c in row] for row in self.cells]

    def to_dict(self) -> dict:
        return {"services": [s.id for s in self.services],
                "nodes": list(self.node_ids),
                "trust": [[None if c is None else round(c.trust, 6) for c in row]
                          for row in self.cells]}


@dataclass(frozen=True)
class PathEntry:
    service: AbstractService
    node_id: int
    service_id: str
    trust: float


CompositionPath = tuple[PathEntry, ...]


def latest_per_node(replies: Sequence[ServiceAdvertisement]) -> dict[int, ServiceAdvertisement]:
    """Deduplicate by node, keeping the most recently received advertisement."""
    latest: dict[int, ServiceAdvertisement] = {}
    for r in replies:
        prev = latest.get(r.node_id)
        if prev is None or r.received_at >= prev.received_at:
            latest[r.node_id] = r
    return latest


def build_trust_matrix(request: Sequence[AbstractService],
                       replies: Sequence[ServiceAdvertisement],
                       model: Optional[HammersteinModel] = None,
                       metrics: Sequence[str] = DEFAULT_METRICS,
                       polarity: Optional[Mapping[str, bool]] = None,
                       noise: Optional[Callable[[], float]] = None,
                       filters: Optional[MutableMapping[tuple, HammersteinFilter]] = None,
                       ) -> TrustMatrix:
    """Score every (abstract service, node) pair that has an advertisement.

    Normalization runs per row, over that row's candidates only. ``noise``
    supplies one noise sample per scored cell. When ``filters`` is given, a
    dynamic model keeps one lagged history per (node, concrete service) in it.
    """
    if not request:
        raise InvalidArgument("composite request is empty")
    if model is None:
        model = HammersteinModel.default(len(metrics))
    if model.n_inputs != len(metrics):
        raise InvalidArgument(f"model has {model.n_inputs} inputs for {len(metrics)} metrics")

    by_type: dict[str, list[ServiceAdvertisement]] = {}
    for r in replies:
        by_type.setdefault(r.abstract_id, []).append(r)
    node_ids = tuple(sorted({r.node_id for s in request for r in by_type.get(s.id, ())}))
    column = {n: j for j, n in enumerate(node_ids)}

    rows = []
    for service in request:
        row: list[Optional[Cell]] = [None] * len(node_ids)
        candidates = latest_per_node(by_type.get(service.id, ()))
        if candidates:
            ordered = [candidates[n] for n in sorted(candidates)]
            ctx = build_normalization([c.qos for c in ordered], metrics, polarity)
            for adv in ordered:
                eta = noise() if noise is not None else 0.0
                if filters is not None and not model.is_static:
                    key = (adv.node_id, adv.service_id)
                    filt = filters.get(key)
                    if filt is None:
                        filt = filters[key] = HammersteinFilter(model)
                    score = scale_trust(filt.step(normalize(adv.qos, ctx), eta))
                else:
                    score = trust_score(adv.qos, ctx, model, eta)
                row[column[adv.node_id]] = Cell(score, adv.service_id, adv.received_at)
        rows.append(tuple(row))
    return TrustMatrix(tuple(request), node_ids, tuple(rows))


def select_providers(matrix: TrustMatrix) -> list[int]:
    """Per row, the node whose cell has maximal trust.

    Ties go to the lowest node id, then to the earliest reply.
    """
    chosen = []
    for service, row in zip(matrix.services, matrix.cells):
        best = None
        best_key = None
        for node, cell in zip(matrix.node_ids, row):
            if cell is None:
                continue
            key = (-cell.trust, node, cell.received_at)
            if best_key is None or key < best_key:
                best, best_key = node, key
        if best is None:
            raise NoProviderError(service)
        chosen.append(best)
    return chosen


def build_composition_path(matrix: TrustMatrix, assignment: Sequence[int]) -> CompositionPath:
    if len(assignment) != len(matrix.services):
        raise InvalidArgument("assignment must cover every abstract service")
    column = {n: j for j, n in enumerate(matrix.node_ids)}
    entries = []
    for service, row, node in sorted(zip(matrix.services, matrix.cells, assignment),
                                     key=lambda t: t[0].position):
        cell = row[column[node]]
        if cell is None:
            raise InvalidArgument(f"node {node} offers nothing for {service.id!r}")
        entries.append(PathEntry(service, node, cell.service_id, cell.trust))
    return tuple(entries)


def compose(request: Sequence[AbstractService], replies: Sequence[ServiceAdvertisement],
            model: Optional[HammersteinModel] = None, **kwargs) -> tuple[TrustMatrix, CompositionPath]:
    matrix = build_trust_matrix(request, replies, model, **kwargs)
    return matrix, build_composition_path(matrix, select_providers(matrix))


INITIATOR = "initiator"


@dataclass(frozen=True)
class Handoff:
    src: Union[int, str]
    dst: Union[int, str]
    remaining: CompositionPath  # stages still to run after ``dst``


def execution_plan(path: CompositionPath, initiator: Union[int, str] = INITIATOR) -> list[Handoff]:
    """Message schedule: initiator to first provider, provider to provider
    carrying the rest of the plan, last provider back to the initiator."""
    if not path:
        return []
    hops = [initiator] + [e.node_id for e in path] + [initiator]
    return [Handoff(hops[i], hops[i + 1], tuple(path[i + 1:])) for i in range(len(hops) - 1)]


def path_nodes(path: CompositionPath) -> list[int]:
    return [e.node_id for e in path]
