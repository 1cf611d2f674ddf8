import pytest

from qoscompose.composition import ServiceAdvertisement
from qoscompose.discovery import (DiscoveryAgent, Drop, Forward, OfferedService, Reply,
                                  ReplyCollector, Repository, RequestPacket, ServiceBeacon,
                                  collect_replies, reply_route, split_request)
from qoscompose.qos_metrics import InvalidArgument, QosVector

A1 = OfferedService("A#1", "A")
B1 = OfferedService("B#1", "B")


def adv(node, abstract="A", rt=0.1):
    return ServiceAdvertisement(node, f"{abstract}#{node}", abstract, QosVector(rt, 0.0, 1.0, 1.0))


def test_split_request_one_packet_per_service():
    pkts = split_request(["A", "B", "C"], initiator=4, ttl=5, now=2.0, first_seq=10)
    assert [p.service_id for p in pkts] == ["A", "B", "C"]
    assert [p.request_id for p in pkts] == [(4, 10), (4, 11), (4, 12)]
    assert all(p.ttl == 5 and p.issued_at == 2.0 and p.hop_count == 0 for p in pkts)


def test_split_request_rejects_empty_and_negative_ttl():
    with pytest.raises(InvalidArgument):
        split_request([], 0, 3)
    with pytest.raises(InvalidArgument):
        split_request(["A"], 0, -1)


def test_forwarding_decrements_ttl_and_extends_route():
    p = RequestPacket((0, 0), "A", 2, 0)
    q = p.forwarded_by(0).forwarded_by(3)
    assert q.ttl == 0 and q.hop_count == 2 and q.route == (0, 3)
    with pytest.raises(InvalidArgument):
        q.forwarded_by(5)
    assert reply_route(q) == (3, 0)


def test_match_replies_and_keeps_forwarding():
    agent = DiscoveryAgent(2, [A1, B1])
    pkt = RequestPacket((0, 0), "A", 3, 0, route=(0,))
    actions = agent.handle_request(pkt, 0.0)
    assert actions[0] == Reply(A1, 2)
    assert isinstance(actions[1], Forward) and actions[1].packet.ttl == 2


def test_duplicate_is_dropped():
    agent = DiscoveryAgent(2, [A1])
    pkt = RequestPacket((0, 0), "A", 3, 0)
    agent.handle_request(pkt, 0.0)
    assert agent.handle_request(pkt, 0.1) == [Drop("duplicate")]


def test_ttl_exhausted_without_match_drops():
    agent = DiscoveryAgent(2, [B1])
    assert agent.handle_request(RequestPacket((0, 0), "A", 0, 0), 0.0) == [Drop("ttl")]


def test_ttl_exhausted_with_match_still_replies():
    agent = DiscoveryAgent(2, [A1])
    assert agent.handle_request(RequestPacket((0, 0), "A", 0, 0), 0.0) == [Reply(A1, 2)]


def test_initiator_ignores_own_request():
    agent = DiscoveryAgent(0, [A1])
    assert agent.handle_request(RequestPacket((0, 0), "A", 3, 0), 0.0) == [Drop("own_request")]


def test_proxy_answers_from_fresh_repository():
    agent = DiscoveryAgent(2, [], horizon=3.0, answer_for_neighbors=True)
    agent.receive_beacon(ServiceBeacon(7, (A1,), 1), 0.0)
    actions = agent.handle_request(RequestPacket((0, 0), "A", 0, 0), 1.0)
    assert actions == [Reply(A1, 7)]
    stale = DiscoveryAgent(2, [], horizon=3.0, answer_for_neighbors=True)
    stale.receive_beacon(ServiceBeacon(7, (A1,), 1), 0.0)
    assert stale.handle_request(RequestPacket((0, 1), "A", 0, 0), 5.0) == [Drop("ttl")]


def test_repository_rejects_old_beacons_and_evicts():
    repo = Repository(1, horizon=3.0)
    assert repo.update(ServiceBeacon(2, (A1,), 5), 0.0)
    assert not repo.update(ServiceBeacon(2, (A1,), 5), 0.5)
    assert not repo.update(ServiceBeacon(2, (A1,), 4), 0.5)
    assert not repo.update(ServiceBeacon(1, (A1,), 9), 0.5)
    assert repo.is_fresh(2, 3.0)
    assert repo.evict(2.9) == []
    assert repo.evict(3.1) == [2]
    assert len(repo) == 0


def test_beacon_sequence_increases_and_dead_nodes_are_silent():
    agent = DiscoveryAgent(1, [A1])
    assert agent.emit_beacon().seq == 1
    assert agent.emit_beacon(energy=0.5).seq == 2
    assert agent.emit_beacon(alive=False) is None


def test_collector_drops_late_and_mismatched_replies():
    pkts = split_request(["A", "B"], 0, 3, now=0.0)
    c = ReplyCollector(pkts, deadline=1.0)
    assert c.add((0, 0), adv(3, "A"), 0.4)
    assert not c.add((0, 0), adv(4, "B"), 0.5)
    assert not c.add((0, 1), adv(5, "B"), 1.5)
    assert not c.add((9, 9), adv(6, "A"), 0.1)
    assert c.late == 1
    got = c.result()
    assert [a.node_id for a in got[(0, 0)]] == [3]
    assert got[(0, 0)][0].received_at == 0.4
    assert got[(0, 1)] == []


def test_collect_replies_groups_and_keeps_latest_per_node():
    pkts = split_request(["A", "B"], 0, 3, now=0.0)
    arrivals = [(0.2, (0, 0), adv(3, "A", rt=0.9)), (0.3, (0, 0), adv(3, "A", rt=0.2)),
                (0.1, (0, 1), adv(4, "B")), (2.0, (0, 1), adv(5, "B"))]
    grouped = collect_replies(arrivals, pkts, timeout=1.0)
    assert [a.qos.response_time for a in grouped["A"]] == [0.2]
    assert [a.node_id for a in grouped["B"]] == [4]
