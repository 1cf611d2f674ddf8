"""Deterministic discrete-event MANET simulator.

One :class:`Simulation` owns every piece of mutable state of a run: node
positions (random waypoint), energy accounts, discovery agents, watchdog
reliability trackers, composition attempts and the trace. Events fire in
(time, sequence) order from a single heap, and every random draw comes from a
named stream derived from the scenario seed, so a (config, seed) pair always
produces the same trace.

Radio is a unit disk with a fixed per-hop latency plus serialization delay and
optional Bernoulli loss. A transmission charges the sender ``e_act*k +
e_amp*d^2*k`` and each receiver ``e_act*k``; broadcasts size the amplifier
term for the full radio range.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from heapq import heappop, heappush
from typing import Callable, Optional

import numpy as np

from . import mobility as mob
from .baseline import baseline_compose
from .composition import (NoProviderError, ServiceAdvertisement, build_composition_path,
                          build_trust_matrix, make_request, path_nodes, select_providers)
from .config import ScenarioConfig, validate
from .discovery import (DiscoveryAgent, Drop, Forward, OfferedService, ReplyCollector,
                        ReplyPacket, Reply, RequestPacket, reply_route, split_request)
from .hammerstein import model_from_dict
from .qos_metrics import (EnergyAccount, EnergyParams, FailureWindow, QosVector,
                          ReliabilityTracker, ResponseTimeComponents,
                          observe_forwarding, reliability_expectation, rx_share,
                          service_failure_rate, total_response_time, tx_share)
from .trace import TraceWriter

BROADCAST = "*"


def stream(seed: int, name: str) -> random.Random:
    """Independent generator for one purpose, derived from the scenario seed."""
    return random.Random(f"{seed}/{name}")


@dataclass
class HostedService:
    service_id: str
    abstract_id: str
    node: int
    task_time: float
    p_fail: float
    t_cd: float
    t_ed: float
    history_failures: int
    history_window: float
    runtime_failures: int = 0

    def failure_rate(self, now: float) -> float:
        return service_failure_rate(FailureWindow(self.history_failures + self.runtime_failures,
                                                  self.history_window + now))

    def offered(self) -> OfferedService:
        return OfferedService(self.service_id, self.abstract_id,
                              {"task_time": self.task_time, "t_cd": self.t_cd, "t_ed": self.t_ed,
                               "failures": self.history_failures,
                               "window": self.history_window})


class Node:
    def __init__(self, node_id: int, state: mob.MobilityState, rng: random.Random,
                 energy: float, misbehaving: bool, horizon: float, answer_for_neighbors: bool):
        self.id = node_id
        self.mob = state
        self.rng = rng
        self.energy = EnergyAccount(energy)
        self.alive = True
        self.misbehaving = misbehaving
        self.services: dict[str, HostedService] = {}
        self.agent = DiscoveryAgent(node_id, (), horizon, answer_for_neighbors)
        self.trackers: dict[int, ReliabilityTracker] = {}
        self.filters: dict = {}
        self.request_seq = 0

    def tracker(self, other: int) -> ReliabilityTracker:
        return self.trackers.get(other, ReliabilityTracker())


@dataclass
class Attempt:
    id: int
    initiator: int
    plan: list[str]
    tries: int = 0
    finished: bool = False


@dataclass
class Discovery:
    attempt: Attempt
    packets: list[RequestPacket]
    collector: ReplyCollector
    routes: dict = field(default_factory=dict)  # provider -> forward route from initiator
    adverts: dict = field(default_factory=dict)  # (provider, service id) -> advertisement


@dataclass
class Execution:
    attempt: Attempt
    try_no: int
    path: tuple
    routes: dict
    deadline: float
    active: bool = True
    reason: str = "timeout"


@dataclass
class RunResult:
    config: ScenarioConfig
    trace: TraceWriter
    sim: "Simulation"

    @property
    def trace_text(self) -> str:
        return self.trace.text()


class Simulation:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = validate(cfg)
        self.now = 0.0
        self._queue: list = []
        self._seq = 0
        self.trace = TraceWriter({"method": cfg.method, "seed": cfg.seed,
                                  "config": cfg.config_hash(), "nodes": cfg.nodes,
                                  "duration": float(cfg.duration)})
        self.eparams = EnergyParams(cfg.energy.e_act, cfg.energy.e_amp)
        self.radio = cfg.radio
        self.hop_delay_cache: dict[int, float] = {}
        self.loss_rng = stream(cfg.seed, "loss")
        self.behavior_rng = stream(cfg.seed, "behavior")
        self.service_rng = stream(cfg.seed, "service")
        self.noise_rng = stream(cfg.seed, "noise")
        h = cfg.hammerstein
        self.metrics = tuple(h.metrics)
        self.model = model_from_dict(
            {"gains": h.gains, "weights": h.weights, "ma": h.ma, "ar": h.ar,
             "noise_variance": h.noise_variance}, len(self.metrics))
        self.types = [f"S{i + 1}" for i in range(cfg.services.abstract_types)]
        self.attempts: list[Attempt] = []
        self.executions: list[Execution] = []
        self.discoveries: list[Discovery] = []
        self._setup()

    # ------------------------------------------------------------------ setup
    def _setup(self):
        cfg = self.cfg
        n = cfg.nodes
        place = stream(cfg.seed, "placement")
        horizon = cfg.beacon_period * cfg.staleness_periods
        if cfg.initial_energy is not None:
            energies = [float(e) for e in cfg.initial_energy]
        else:
            energies = [place.uniform(cfg.energy.initial_min, cfg.energy.initial_max)
                        for _ in range(n)]
        if cfg.misbehaving is not None:
            bad = set(cfg.misbehaving)
        else:
            bad = set(place.sample(range(n), round(cfg.misbehaving_fraction * n)))
        self.nodes: list[Node] = []
        for i in range(n):
            rng = stream(cfg.seed, f"mobility/{i}")
            if cfg.positions is not None:
                state = mob.static_state(cfg.positions[i])
            else:
                state = mob.initial_state(rng, cfg.mobility, cfg.arena)
            self.nodes.append(Node(i, state, rng, energies[i], i in bad, horizon,
                                   cfg.answer_for_neighbors))

        s = cfg.services
        if cfg.placements is not None:
            placements = [(node, t % len(self.types)) for node, t in cfg.placements]
        else:
            placements = [(place.randrange(n), place.randrange(len(self.types)))
                          for _ in range(s.count)]
        history_n = round(s.history_window * s.history_rate)
        for k, (node, t) in enumerate(placements):
            p_fail = place.uniform(s.failure_prob_min, s.failure_prob_max)
            failures = sum(place.random() < p_fail for _ in range(history_n))
            svc = HostedService(f"{self.types[t]}#{k}", self.types[t], node,
                                place.uniform(s.task_time_min, s.task_time_max), p_fail,
                                s.t_cd, s.t_ed, failures, s.history_window)
            self.nodes[node].services[svc.service_id] = svc
        for node in self.nodes:
            node.agent.services = [svc.offered() for svc in node.services.values()]

        self._init_arrays()
        for node in self.nodes:
            x, y = node.mob.position_at(0.0)
            self.trace.emit(0.0, "init", node.id, energy=node.energy.initial,
                            misbehaving=node.misbehaving, x=x, y=y)
        for node in self.nodes:
            for svc in node.services.values():
                self.trace.emit(0.0, "svc", node.id, id=svc.service_id, type=svc.abstract_id,
                                pfail=svc.p_fail)

        phase = stream(cfg.seed, "beacon")
        for node in self.nodes:
            self.schedule(phase.uniform(0.0, cfg.beacon_period), self._beacon_tick, node.id)

        req = stream(cfg.seed, "requests")
        if cfg.traffic.requests is not None:
            schedule = [(float(t), int(i)) for t, i in cfg.traffic.requests]
        else:
            schedule = []
            t = cfg.traffic.start
            while t <= cfg.request_stop:
                schedule.append((t, req.randrange(n)))
                t += cfg.traffic.interval
        plan_size = cfg.traffic.plan_size
        for t, initiator in schedule:
            if plan_size <= len(self.types):
                plan = req.sample(self.types, plan_size)
            else:
                plan = [req.choice(self.types) for _ in range(plan_size)]
            self.schedule(t, self._issue_request, initiator, plan)

    def _init_arrays(self):
        n = len(self.nodes)
        self._ox = np.zeros(n)
        self._oy = np.zeros(n)
        self._wx = np.zeros(n)
        self._wy = np.zeros(n)
        self._vx = np.zeros(n)
        self._vy = np.zeros(n)
        self._t0 = np.zeros(n)
        self._arrive = np.zeros(n)
        self._depart = np.zeros(n)
        self._alive = np.ones(n, dtype=bool)
        for node in self.nodes:
            self._load_leg(node)
        self._pos_time = None
        self._pos = None

    def _load_leg(self, node: Node):
        i, s = node.id, node.mob
        self._ox[i], self._oy[i] = s.origin
        self._wx[i], self._wy[i] = s.waypoint
        self._vx[i], self._vy[i] = s.velocity
        self._t0[i] = s.leg_start
        self._arrive[i] = s.arrive
        self._depart[i] = s.depart

    # ------------------------------------------------------------- event loop
    def schedule(self, t: float, fn: Callable, *args):
        if t < self.now:
            raise RuntimeError(f"causality violation: scheduling at {t} before now={self.now}")
        self._seq += 1
        heappush(self._queue, (t, self._seq, fn, args))

    def run(self) -> RunResult:
        horizon = float(self.cfg.duration)
        while self._queue and self._queue[0][0] <= horizon:
            t, _, fn, args = heappop(self._queue)
            self.now = t
            fn(*args)
        self.now = horizon
        self.trace.close(horizon)
        return RunResult(self.cfg, self.trace, self)

    # --------------------------------------------------------------- geometry
    def positions(self, t: float):
        if t == self._pos_time:
            return self._pos
        due = np.nonzero(self._depart <= t)[0]
        for i in due:
            node = self.nodes[i]
            node.mob = mob.mobility_step(node.mob, t - node.mob.time, node.rng,
                                         self.cfg.mobility, self.cfg.arena)
            self._load_leg(node)
        moving = t < self._arrive
        x = np.where(moving, self._ox + self._vx * (t - self._t0), self._wx)
        y = np.where(moving, self._oy + self._vy * (t - self._t0), self._wy)
        self._pos_time, self._pos = t, (x, y)
        return self._pos

    def position(self, node_id: int, t: Optional[float] = None) -> tuple[float, float]:
        x, y = self.positions(self.now if t is None else t)
        return float(x[node_id]), float(y[node_id])

    def distance(self, a: int, b: int, t: float) -> float:
        x, y = self.positions(t)
        return math.hypot(x[a] - x[b], y[a] - y[b])

    def linked(self, a: int, b: int, t: float) -> bool:
        return self.distance(a, b, t) <= self.radio.range

    def neighbors(self, i: int, t: float) -> list[int]:
        x, y = self.positions(t)
        d = np.hypot(x - x[i], y - y[i])
        mask = (d <= self.radio.range) & self._alive
        mask[i] = False
        return np.nonzero(mask)[0].tolist()

    def hop_delay(self, bits: int) -> float:
        d = self.hop_delay_cache.get(bits)
        if d is None:
            d = self.hop_delay_cache[bits] = self.radio.per_hop_latency + bits / self.radio.bitrate
        return d

    # ----------------------------------------------------------------- energy
    def _charge(self, node: Node, amount: float, t: float):
        e = node.energy
        remaining = e.initial - e.consumed
        if remaining <= 0.0:
            return
        # inline deplete(): this is the hottest call in a run
        node.energy = EnergyAccount(e.initial, e.consumed + min(amount, remaining))
        if amount >= remaining and node.alive:
            node.alive = False
            self._alive[node.id] = False
            self.trace.emit(t, "death", node.id)

    def _observe(self, observer: int, subject: int, forwarded: bool, t: float):
        obs = self.nodes[observer]
        if not obs.alive or not self.linked(observer, subject, t):
            return
        obs.trackers[subject] = observe_forwarding(obs.tracker(subject), int(forwarded), 1)
        self.trace.emit(t, "obs", observer, subject=subject, fwd=forwarded)

    def _relay_decision(self, node: Node, sender: int, t: float) -> bool:
        """Whether ``node`` passes on a packet it was asked to forward; the
        upstream sender watches the outcome."""
        drops = node.misbehaving and self.behavior_rng.random() < self.cfg.drop_probability
        self._observe(sender, node.id, not drops, t)
        return not drops

    # ------------------------------------------------------------------ radio
    def broadcast(self, sender: int, ptype: str, bits: int, payload, on_receive: Callable,
                  t: float, **info):
        node = self.nodes[sender]
        if not node.alive:
            self.trace.emit(t, "drop", sender, ptype=ptype, reason="dead_sender", **info)
            return
        d = float(self.radio.range)
        self.trace.emit(t, "tx", sender, ptype=ptype, bits=bits, d=d, to=BROADCAST, **info)
        self._charge(node, tx_share(bits, d, self.eparams), t)
        candidates = self.neighbors(sender, t)
        if candidates:
            self.schedule(t + self.hop_delay(bits), self._deliver_broadcast, sender, candidates,
                          ptype, bits, payload, on_receive, info)

    def _deliver_broadcast(self, sender, candidates, ptype, bits, payload, on_receive, info):
        t = self.now
        x, y = self.positions(t)
        idx = np.asarray(candidates)
        ok = (np.hypot(x[idx] - x[sender], y[idx] - y[sender]) <= self.radio.range) \
            & self._alive[idx]
        p_loss = self.radio.loss_probability
        if p_loss > 0:
            got, lost = [], []
            for j, reachable in zip(candidates, ok.tolist()):
                if reachable and not self.loss_rng.random() < p_loss:
                    got.append(j)
                else:
                    lost.append(j)
        else:
            got, lost = idx[ok].tolist(), idx[~ok].tolist()
        if lost:
            self.trace.emit(t, "drop", sender, ptype=ptype, reason="channel", nodes=lost, **info)
        if not got:
            return
        self.trace.emit(t, "rx", sender, ptype=ptype, bits=bits, nodes=got, **info)
        share = rx_share(bits, self.eparams)
        nodes = self.nodes
        for j in got:
            node = nodes[j]
            e = node.energy
            if share < e.initial - e.consumed:  # common case of _charge, inlined
                node.energy = EnergyAccount(e.initial, e.consumed + share)
            else:
                self._charge(node, share, t)
        for j in got:
            if nodes[j].alive:
                on_receive(j, sender, payload)

    def unicast(self, sender: int, receiver: int, ptype: str, bits: int, payload,
                on_receive: Callable, on_loss: Callable, t: float, **info):
        node = self.nodes[sender]
        if not node.alive:
            self.trace.emit(t, "drop", sender, ptype=ptype, reason="dead_sender", **info)
            on_loss("dead_sender")
            return
        d = min(self.distance(sender, receiver, t), float(self.radio.range))
        self.trace.emit(t, "tx", sender, ptype=ptype, bits=bits, d=d, to=receiver, **info)
        self._charge(node, tx_share(bits, d, self.eparams), t)
        self.schedule(t + self.hop_delay(bits), self._deliver_unicast, sender, receiver, ptype,
                      bits, payload, on_receive, on_loss, info)

    def _deliver_unicast(self, sender, receiver, ptype, bits, payload, on_receive, on_loss, info):
        t = self.now
        node = self.nodes[receiver]
        reason = None
        if not node.alive:
            reason = "dead_receiver"
        elif not self.linked(sender, receiver, t):
            reason = "range"
        elif self.radio.loss_probability > 0 and self.loss_rng.random() < self.radio.loss_probability:
            reason = "loss"
        if reason is not None:
            self.trace.emit(t, "drop", sender, ptype=ptype, reason=reason, nodes=[receiver], **info)
            on_loss(reason)
            return
        self.trace.emit(t, "rx", sender, ptype=ptype, bits=bits, nodes=[receiver], **info)
        self._charge(node, rx_share(bits, self.eparams), t)
        if node.alive:
            on_receive(receiver, sender, payload)
        else:
            on_loss("dead_receiver")

    def send_routed(self, holder: int, route: tuple, ptype: str, bits: int, payload,
                    on_arrive: Callable, on_loss: Callable, on_hop: Optional[Callable] = None,
                    **info):
        """Strict source routing: ``route`` lists the remaining hops, destination
        last, and each hop must still be in range when the packet lands."""
        if not route:
            on_arrive(holder, None, payload)
            return
        nxt, rest = route[0], route[1:]

        def received(receiver, sender, pl):
            if on_hop is not None:
                pl = on_hop(receiver, sender, pl)
            if not rest:
                on_arrive(receiver, sender, pl)
            elif self._relay_decision(self.nodes[receiver], sender, self.now):
                self.send_routed(receiver, rest, ptype, bits, pl, on_arrive, on_loss, on_hop,
                                 **info)
            else:
                self.trace.emit(self.now, "drop", receiver, ptype=ptype, reason="misbehave",
                                **info)
                on_loss("misbehave")

        self.unicast(holder, nxt, ptype, bits, payload, received, on_loss, self.now, **info)

    def hop_distances(self, dst: int, t: float) -> dict[int, int]:
        """Hop count from every alive node to ``dst`` over the current unit-disk graph."""
        x, y = self.positions(t)
        adj = np.hypot(x[:, None] - x[None, :], y[:, None] - y[None, :]) <= self.radio.range
        adj &= self._alive[None, :]
        dist = {dst: 0}
        seen = np.zeros(len(x), dtype=bool)
        seen[dst] = True
        frontier = seen.copy()
        hops = 0
        while frontier.any():
            hops += 1
            frontier = adj[frontier].any(axis=0) & ~seen
            seen |= frontier
            for v in np.nonzero(frontier)[0].tolist():
                dist[v] = hops
        return dist

    def send_network(self, holder: int, dst: int, ptype: str, bits: int, payload,
                     on_arrive: Callable, on_loss: Callable, **info):
        """Unicast through the routing layer, which always knows a current
        shortest path; relays still forward (or misbehave) hop by hop."""
        t = self.now
        if holder == dst:
            on_arrive(holder, None, payload)
            return
        dist = self.hop_distances(dst, t)
        if holder not in dist or not self.nodes[dst].alive:
            self.trace.emit(t, "drop", holder, ptype=ptype, reason="no_route", **info)
            on_loss("no_route")
            return
        target = dist[holder] - 1
        nxt = min(v for v in self.neighbors(holder, t) if dist.get(v) == target)

        def received(receiver, sender, pl):
            if receiver == dst:
                on_arrive(receiver, sender, pl)
            elif self._relay_decision(self.nodes[receiver], sender, self.now):
                self.send_network(receiver, dst, ptype, bits, pl, on_arrive, on_loss, **info)
            else:
                self.trace.emit(self.now, "drop", receiver, ptype=ptype, reason="misbehave",
                                **info)
                on_loss("misbehave")

        self.unicast(holder, nxt, ptype, bits, payload, received, on_loss, t, **info)

    # ---------------------------------------------------------------- beacons
    def _beacon_tick(self, i: int):
        node = self.nodes[i]
        t = self.now
        if not node.alive:
            return
        node.agent.maintain(t)
        beacon = node.agent.emit_beacon(node.energy.remaining, node.alive)
        self.broadcast(i, "beacon", self.cfg.traffic.beacon_bits, beacon, self._on_beacon, t)
        self.schedule(t + self.cfg.beacon_period, self._beacon_tick, i)

    def _on_beacon(self, receiver: int, sender: int, beacon):
        self.nodes[receiver].agent.receive_beacon(beacon, self.now)

    # -------------------------------------------------------------- discovery
    def _issue_request(self, initiator: int, plan: list[str]):
        t = self.now
        if not self.nodes[initiator].alive:
            self.trace.emit(t, "skip", initiator, reason="initiator_dead")
            return
        attempt = Attempt(len(self.attempts), initiator, plan)
        self.attempts.append(attempt)
        self.trace.emit(t, "attempt", initiator, id=attempt.id, plan=plan)
        self._start_discovery(attempt)

    def _start_discovery(self, attempt: Attempt):
        t = self.now
        init = self.nodes[attempt.initiator]
        attempt.tries += 1
        packets = split_request(attempt.plan, init.id, self.cfg.ttl, t, init.request_seq)
        init.request_seq += len(packets)
        disc = Discovery(attempt, packets,
                         ReplyCollector(packets, t + self.cfg.traffic.discovery_timeout))
        self.discoveries.append(disc)
        for pkt in packets:
            init.agent.seen.add(pkt.request_id)
            out = pkt.forwarded_by(init.id)
            self.broadcast(init.id, "req", self.cfg.traffic.request_bits, (disc, out),
                           self._on_request, t, req=_rid(out), ttl=out.ttl)
        self.schedule(t + self.cfg.traffic.discovery_timeout, self._compose, disc)

    def _on_request(self, receiver: int, sender: int, payload):
        disc, pkt = payload
        t = self.now
        node = self.nodes[receiver]
        if pkt.request_id in node.agent.seen:
            return  # duplicate; implied by the rx record
        for action in node.agent.handle_request(pkt, t):
            if isinstance(action, Drop):
                if action.reason == "duplicate":
                    continue  # implied by the rx record
                self.trace.emit(t, "drop", receiver, ptype="req", reason=action.reason,
                                req=_rid(pkt), ttl=pkt.ttl)
            elif isinstance(action, Reply):
                self._send_reply(node, disc, pkt, action, t)
            elif isinstance(action, Forward):
                if not self._relay_decision(node, sender, t):
                    self.trace.emit(t, "drop", receiver, ptype="req", reason="misbehave",
                                    req=_rid(pkt), ttl=pkt.ttl)
                    continue
                out = action.packet
                self.broadcast(receiver, "req", self.cfg.traffic.request_bits, (disc, out),
                               self._on_request, t, req=_rid(out), ttl=out.ttl)

    def advertise(self, node: Node, provider: int, offered: OfferedService, pkt: RequestPacket,
                  t: float) -> ServiceAdvertisement:
        """Advertisement for a service, measured at reply time."""
        s = self.cfg.services
        hops = pkt.hop_count + (0 if provider == node.id else 1)
        if provider == node.id:
            svc = node.services[offered.service_id]
            failure_rate = svc.failure_rate(t)
            energy = node.energy.remaining
            task = svc.task_time
        else:
            # answered from the one-hop repository: beacon snapshot
            a = offered.attributes
            failure_rate = service_failure_rate(FailureWindow(int(a["failures"]),
                                                              a["window"] + t))
            entry = node.agent.repository.entries[provider]
            energy = entry.beacon.energy
            task = a["task_time"]
        rt = total_response_time(ResponseTimeComponents(
            t_task=task, t_stack=2 * hops * s.stack_time_per_hop,
            t_transport=2 * (t - pkt.issued_at), t_cd=offered.attributes.get("t_cd", s.t_cd),
            t_ed=offered.attributes.get("t_ed", s.t_ed)))
        qos = QosVector(rt, failure_rate, energy, 0.5, hop_count=max(hops, 1))
        return ServiceAdvertisement(provider, offered.service_id, offered.abstract_id, qos, t)

    def _send_reply(self, node: Node, disc: Discovery, pkt: RequestPacket, action: Reply,
                    t: float):
        adv = self.advertise(node, action.provider, action.service, pkt, t)
        forward = pkt.route + (node.id,)
        stamped = False
        if action.provider != node.id:
            forward = forward + (action.provider,)
            rel = reliability_expectation(node.tracker(action.provider))
            adv = replace(adv, qos=replace(adv.qos, node_reliability=rel))
            stamped = True
        reply = ReplyPacket(pkt.request_id, adv, reply_route(pkt), forward, stamped)
        self.send_routed(node.id, reply.reverse_route, "rep", self.cfg.traffic.reply_bits,
                         (disc, reply), self._on_reply_arrive, lambda reason: None,
                         self._stamp_reply, req=_rid(pkt))

    def _stamp_reply(self, receiver: int, sender: int, payload):
        disc, reply = payload
        if reply.stamped:
            return payload
        rel = reliability_expectation(self.nodes[receiver].tracker(sender))
        adv = reply.advertisement
        adv = replace(adv, qos=replace(adv.qos, node_reliability=rel))
        return disc, replace(reply, advertisement=adv, stamped=True)

    def _on_reply_arrive(self, receiver: int, sender, payload):
        disc, reply = payload
        t = self.now
        if disc.collector.add(reply.request_id, reply.advertisement, t):
            adv = reply.advertisement
            disc.routes[adv.node_id] = reply.forward_route
            disc.adverts[(adv.node_id, adv.service_id)] = adv
        else:
            self.trace.emit(t, "drop", receiver, ptype="rep", reason="late",
                            req=_rid(reply.request_id))

    # ------------------------------------------------------------ composition
    def _noise(self) -> float:
        var = self.model.noise_variance
        return self.noise_rng.gauss(0.0, math.sqrt(var)) if var > 0 else 0.0

    def _compose(self, disc: Discovery):
        attempt = disc.attempt
        init = self.nodes[attempt.initiator]
        t = self.now
        if not init.alive:
            self._finish(attempt, "giveup", reason="initiator_dead")
            return
        replies = [adv for advs in disc.collector.result().values() for adv in advs]
        request = make_request(attempt.plan)
        noise = self._noise if self.cfg.hammerstein.stochastic else None
        matrix = build_trust_matrix(request, replies, self.model, self.metrics, None, noise,
                                    init.filters)
        try:
            if self.cfg.method == "proposed":
                path = build_composition_path(matrix, select_providers(matrix))
            else:
                path = baseline_compose(request, replies, matrix)
        except NoProviderError as exc:
            self.trace.emit(t, "noprovider", init.id, id=attempt.id, service=exc.service.id)
            self._finish(attempt, "giveup", reason="noprovider")
            return
        self.trace.emit(t, "compose", init.id, id=attempt.id, **{"try": attempt.tries},
                        matrix=json.dumps(matrix.to_dict(), separators=(",", ":")),
                        path=path_nodes(path))
        self._execute(attempt, path, disc)

    def _route(self, routes: dict, src, dst, initiator: int) -> tuple:
        if src == dst:
            return ()
        if src == initiator:
            return tuple(routes[dst][1:])
        a = routes[src]
        if dst == initiator:
            return tuple(reversed(a[:-1]))
        b = routes[dst]
        c = 0
        while c < min(len(a), len(b)) and a[c] == b[c]:
            c += 1
        hops = list(reversed(a[c - 1:])) + list(b[c:])
        out: list[int] = []
        for h in hops:
            if h in out:
                del out[out.index(h) + 1:]
            else:
                out.append(h)
        return tuple(out[1:])

    def _execute(self, attempt: Attempt, path, disc: Discovery):
        t = self.now
        routes = disc.routes
        cfg = self.cfg
        init = attempt.initiator
        hop_time = self.hop_delay(cfg.traffic.payload_bits)
        stages = [init] + [e.node_id for e in path] + [init]
        budget = 0.0
        legs = []
        for i in range(len(stages) - 1):
            leg = self._route(routes, stages[i], stages[i + 1], init)
            legs.append(leg)
            rt = 0.0
            if i < len(path):
                rt = disc.adverts[(path[i].node_id, path[i].service_id)].qos.response_time
            budget += cfg.traffic.timeout_factor * (rt + max(len(leg), 1) * hop_time)
        ex = Execution(attempt, attempt.tries, path, routes, t + budget)
        self.executions.append(ex)
        self.schedule(ex.deadline, self._deadline, ex)
        self._handoff(ex, 0, init, legs)

    def _handoff(self, ex: Execution, stage: int, holder: int, legs: list):
        if not ex.active:
            return
        bits = self.cfg.traffic.payload_bits

        def lost(reason):
            ex.reason = reason

        def arrived(receiver, sender, _):
            if not ex.active:
                return
            if stage == len(ex.path):
                # only the composite result reaching the initiator counts as delivered
                self.trace.emit(self.now, "deliver", receiver, id=ex.attempt.id, bits=bits)
                self._succeed(ex)
            else:
                entry = ex.path[stage]
                svc = self.nodes[receiver].services[entry.service_id]
                self.schedule(self.now + svc.task_time + svc.t_cd + svc.t_ed, self._run_service,
                              ex, stage, receiver, sender, legs)

        dst = ex.attempt.initiator if stage == len(ex.path) else ex.path[stage].node_id
        self.send_network(holder, dst, "plan", bits, None, arrived, lost, id=ex.attempt.id)

    def _run_service(self, ex: Execution, stage: int, provider: int, upstream, legs: list):
        if not ex.active:
            return
        t = self.now
        node = self.nodes[provider]
        entry = ex.path[stage]
        if not node.alive:
            ex.reason = "provider_dead"
            return
        svc = node.services[entry.service_id]
        if self.service_rng.random() < svc.p_fail:
            svc.runtime_failures += 1
            ex.reason = "service_failure"
            self.trace.emit(t, "svc_fail", provider, id=ex.attempt.id, service=svc.service_id)
            return
        if upstream is not None and not self._relay_decision(node, upstream, t):
            ex.reason = "misbehave"
            self.trace.emit(t, "drop", provider, ptype="plan", reason="misbehave",
                            id=ex.attempt.id)
            return
        self._handoff(ex, stage + 1, provider, legs)

    def _deadline(self, ex: Execution):
        if not ex.active:
            return
        ex.active = False
        attempt = ex.attempt
        self.trace.emit(self.now, "path_fail", attempt.initiator, id=attempt.id,
                        **{"try": ex.try_no}, reason=ex.reason)
        if attempt.tries <= self.cfg.traffic.max_recompositions and \
                self.nodes[attempt.initiator].alive:
            self._start_discovery(attempt)
        else:
            self._finish(attempt, "giveup", reason="retries_exhausted"
                         if self.nodes[attempt.initiator].alive else "initiator_dead")

    def _succeed(self, ex: Execution):
        ex.active = False
        self._finish(ex.attempt, "success", **{"try": ex.try_no})

    def _finish(self, attempt: Attempt, kind: str, **fields):
        attempt.finished = True
        self.trace.emit(self.now, kind, attempt.initiator, id=attempt.id, **fields)


def _rid(request_id) -> str:
    if isinstance(request_id, RequestPacket):
        request_id = request_id.request_id
    return f"{request_id[0]}.{request_id[1]}"


def run(cfg: ScenarioConfig) -> RunResult:
    """Execute one scenario to its duration horizon."""
    return Simulation(cfg).run()
