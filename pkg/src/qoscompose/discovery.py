"""Decentralized service discovery: one-hop repositories fed by beacons,
request splitting, TTL-bounded flooding with duplicate suppression, and
QoS-bearing replies that retrace the request's route.

The classes here hold per-node protocol state and decide protocol actions;
moving packets between nodes is the simulator's job.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

from .composition import ServiceAdvertisement, latest_per_node
from .qos_metrics import InvalidArgument

RequestId = tuple[int, int]  # (initiator, sequence number)


@dataclass(frozen=True)
class OfferedService:
    service_id: str
    abstract_id: str
    attributes: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class ServiceBeacon:
    origin: int
    services: tuple[OfferedService, ...]
    seq: int
    energy: float = 0.0


@dataclass
class RepositoryEntry:
    beacon: ServiceBeacon
    heard_at: float


class Repository:
    """Latest beacon per one-hop neighbor."""

    def __init__(self, owner: int, horizon: float):
        self.owner = owner
        self.horizon = horizon
        self.entries: dict[int, RepositoryEntry] = {}

    def update(self, beacon: ServiceBeacon, now: float) -> bool:
        if beacon.origin == self.owner:
            return False
        prev = self.entries.get(beacon.origin)
        if prev is not None and beacon.seq <= prev.beacon.seq:
            return False
        self.entries[beacon.origin] = RepositoryEntry(beacon, now)
        return True

    def evict(self, now: float) -> list[int]:
        stale = [n for n, e in self.entries.items() if now - e.heard_at > self.horizon]
        for n in stale:
            del self.entries[n]
        return stale

    def is_fresh(self, neighbor: int, now: float) -> bool:
        e = self.entries.get(neighbor)
        return e is not None and now - e.heard_at <= self.horizon

    def matching(self, abstract_id: str, now: float) -> list[tuple[int, OfferedService]]:
        out = []
        for n in sorted(self.entries):
            e = self.entries[n]
            if now - e.heard_at > self.horizon:
                continue
            out.extend((n, s) for s in e.beacon.services if s.abstract_id == abstract_id)
        return out

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class RequestPacket:
    request_id: RequestId
    service_id: str  # abstract service sought
    ttl: int
    initiator: int
    hop_count: int = 0
    issued_at: float = 0.0
    route: tuple[int, ...] = ()  # transmitters so far, initiator first

    def forwarded_by(self, node: int) -> "RequestPacket":
        if self.ttl <= 0:
            raise InvalidArgument("a packet with ttl 0 must not be forwarded")
        return RequestPacket(self.request_id, self.service_id, self.ttl - 1, self.initiator,
                             self.hop_count + 1, self.issued_at, self.route + (node,))


@dataclass(frozen=True)
class ReplyPacket:
    request_id: RequestId
    advertisement: ServiceAdvertisement
    reverse_route: tuple[int, ...]  # hops still to travel, initiator last
    forward_route: tuple[int, ...]  # initiator ... provider
    stamped: bool = False


def split_request(composite: Sequence[str], initiator: int, ttl: int, now: float = 0.0,
                  first_seq: int = 0) -> list[RequestPacket]:
    """One atomic request per abstract service, in plan order."""
    if not composite:
        raise InvalidArgument("composite request is empty")
    if ttl < 0:
        raise InvalidArgument("ttl must be nonnegative")
    return [RequestPacket((initiator, first_seq + i), sid, ttl, initiator, 0, now)
            for i, sid in enumerate(composite)]


@dataclass(frozen=True)
class Reply:
    service: OfferedService
    provider: int  # node hosting the service (differs from the replier for proxy answers)


@dataclass(frozen=True)
class Forward:
    packet: RequestPacket


@dataclass(frozen=True)
class Drop:
    reason: str


class DiscoveryAgent:
    """Discovery state owned by one node."""

    def __init__(self, node_id: int, services: Iterable[OfferedService] = (),
                 horizon: float = 3.0, answer_for_neighbors: bool = False):
        self.node_id = node_id
        self.services = list(services)
        self.repository = Repository(node_id, horizon)
        self.answer_for_neighbors = answer_for_neighbors
        self.seen: set[RequestId] = set()
        self._beacon_seq = 0

    def emit_beacon(self, energy: float = 0.0, alive: bool = True) -> Optional[ServiceBeacon]:
        if not alive:
            return None
        self._beacon_seq += 1
        return ServiceBeacon(self.node_id, tuple(self.services), self._beacon_seq, energy)

    def receive_beacon(self, beacon: ServiceBeacon, now: float) -> bool:
        return self.repository.update(beacon, now)

    def maintain(self, now: float) -> list[int]:
        return self.repository.evict(now)

    def handle_request(self, pkt: RequestPacket, now: float) -> list:
        """Protocol actions for one delivered request copy.

        A duplicate is dropped. Otherwise every matching local service (and,
        with ``answer_for_neighbors``, every fresh one-hop entry) is answered,
        and the request is rebroadcast while ttl remains.
        """
        if pkt.request_id in self.seen:
            return [Drop("duplicate")]
        self.seen.add(pkt.request_id)
        if pkt.initiator == self.node_id:
            return [Drop("own_request")]
        actions: list = [Reply(s, self.node_id) for s in self.services
                         if s.abstract_id == pkt.service_id]
        if self.answer_for_neighbors:
            actions.extend(Reply(s, n) for n, s in self.repository.matching(pkt.service_id, now))
        if pkt.ttl > 0:
            actions.append(Forward(pkt.forwarded_by(self.node_id)))
        elif not actions:
            actions.append(Drop("ttl"))
        return actions


def reply_route(pkt: RequestPacket) -> tuple[int, ...]:
    """Hops a reply travels from the receiving node back to the initiator."""
    return tuple(reversed(pkt.route))


class ReplyCollector:
    """Initiator-side gathering of replies until a deadline."""

    def __init__(self, requests: Sequence[RequestPacket], deadline: float):
        self.deadline = deadline
        self.requests = {p.request_id: p for p in requests}
        self.replies: dict[RequestId, list[ServiceAdvertisement]] = {r: [] for r in self.requests}
        self.late = 0

    def add(self, request_id: RequestId, adv: ServiceAdvertisement, now: float) -> bool:
        if request_id not in self.requests:
            return False
        if now > self.deadline:
            self.late += 1
            return False
        if adv.abstract_id != self.requests[request_id].service_id:
            return False
        self.replies[request_id].append(replace(adv, received_at=now))
        return True

    def result(self) -> dict[RequestId, list[ServiceAdvertisement]]:
        out = {}
        for rid, advs in self.replies.items():
            latest = latest_per_node(advs)
            out[rid] = [latest[n] for n in sorted(latest)]
        return out


def collect_replies(arrivals: Iterable[tuple[float, RequestId, ServiceAdvertisement]],
                    requests: Sequence[RequestPacket], timeout: float,
                    start: Optional[float] = None) -> dict[str, list[ServiceAdvertisement]]:
    """Replies that arrived within ``timeout`` of ``start``, grouped by abstract service.

    Late replies are discarded and repeated advertisements from one node keep
    the latest. Services nobody answered map to an empty list.
    """
    if start is None:
        start = min((p.issued_at for p in requests), default=0.0)
    collector = ReplyCollector(requests, start + timeout)
    for t, rid, adv in sorted(arrivals, key=lambda a: a[0]):
        collector.add(rid, adv, t)
    merged: dict[str, list[ServiceAdvertisement]] = {p.service_id: [] for p in requests}
    for rid, advs in collector.result().items():
        merged[collector.requests[rid].service_id].extend(advs)
    grouped = {}
    for sid, advs in merged.items():
        latest = latest_per_node(advs)
        grouped[sid] = [latest[n] for n in sorted(latest)]
    return grouped
