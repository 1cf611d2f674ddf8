"""Per-candidate QoS quantities: radio energy, node reliability, service
failure rate and response time.

All quantities use SI units (joules, seconds, bits).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional


class InvalidArgument(ValueError):
    """Raised when an operation receives an argument outside its domain."""


@dataclass(frozen=True)
class EnergyParams:
    e_act: float = 50e-9  # J/bit, transceiver electronics
    e_amp: float = 100e-12  # J/bit/m^2, amplifier

    def __post_init__(self):
        if self.e_act < 0 or self.e_amp < 0:
            raise InvalidArgument("energy coefficients must be nonnegative")


def transmission_energy(k: float, d: float, p: EnergyParams) -> float:
    """Energy to move ``k`` bits over ``d`` meters, sender and receiver together.

    ``2 * e_act * k + e_amp * d**2 * k``.
    """
    if k < 0 or d < 0:
        raise InvalidArgument(f"bits and distance must be nonnegative (k={k}, d={d})")
    return 2 * p.e_act * k + p.e_amp * d * d * k


def tx_share(k: float, d: float, p: EnergyParams) -> float:
    """Sender's part of :func:`transmission_energy`: electronics plus amplifier."""
    return p.e_act * k + p.e_amp * d * d * k


def rx_share(k: float, p: EnergyParams) -> float:
    """Receiver's part of :func:`transmission_energy`."""
    return p.e_act * k


@dataclass(frozen=True)
class EnergyAccount:
    initial: float
    consumed: float = 0.0

    @property
    def remaining(self) -> float:
        return max(self.initial - self.consumed, 0.0)

    @property
    def dead(self) -> bool:
        return self.remaining <= 0.0


def deplete(account: EnergyAccount, amount: float) -> tuple[EnergyAccount, bool]:
    """Charge ``amount`` joules, saturating at the remaining budget.

    Returns the updated account and whether the node is now dead.
    """
    if amount < 0:
        raise InvalidArgument("cannot deplete a negative amount")
    if amount == 0:
        return account, account.dead
    charged = min(amount, account.remaining)
    updated = EnergyAccount(account.initial, account.consumed + charged)
    return updated, updated.dead


@dataclass(frozen=True)
class ReliabilityTracker:
    """Beta-style counters of correctly forwarded vs dropped packets."""

    alpha: float = 0.0
    beta: float = 0.0
    prior_alpha: float = 0.0
    prior_beta: float = 0.0
    empty_default: float = 0.5

    @classmethod
    def with_prior(cls, prior_alpha: float = 0.0, prior_beta: float = 0.0,
                   empty_default: float = 0.5) -> "ReliabilityTracker":
        if prior_alpha < 0 or prior_beta < 0:
            raise InvalidArgument("priors must be nonnegative")
        return cls(prior_alpha, prior_beta, prior_alpha, prior_beta, empty_default)


def observe_forwarding(t: ReliabilityTracker, a: int, b: int) -> ReliabilityTracker:
    """Fold in ``a`` correct forwards out of ``b`` packets received for relay."""
    if a < 0 or b < 0 or a > b:
        raise InvalidArgument(f"need 0 <= a <= b, got a={a}, b={b}")
    if b == 0:
        return t
    return ReliabilityTracker(t.alpha + a, t.beta + (b - a), t.prior_alpha, t.prior_beta,
                              t.empty_default)


def reliability_expectation(t: ReliabilityTracker) -> float:
    total = t.alpha + t.beta
    if total == 0:
        return t.empty_default
    return t.alpha / total


@dataclass(frozen=True)
class FailureWindow:
    failures: int
    window: float


def service_failure_rate(w: FailureWindow) -> float:
    """Failures per second over the observation window (a cost metric)."""
    if not w.window > 0:
        raise InvalidArgument(f"window must be positive, got {w.window}")
    if w.failures < 0:
        raise InvalidArgument("failure count must be nonnegative")
    return w.failures / w.window


@dataclass(frozen=True)
class ResponseTimeComponents:
    t_task: float = 0.0
    t_stack: float = 0.0
    t_transport: float = 0.0
    t_cd: float = 0.0
    t_ed: float = 0.0


def total_response_time(c: ResponseTimeComponents) -> float:
    parts = (c.t_task, c.t_stack, c.t_transport, c.t_cd, c.t_ed)
    for name, value in zip(("t_task", "t_stack", "t_transport", "t_cd", "t_ed"), parts):
        if value < 0:
            raise InvalidArgument(f"{name} must be nonnegative, got {value}")
    return c.t_task + c.t_stack + c.t_transport + c.t_cd + c.t_ed


# metric name -> True for benefit (higher is better), False for cost
POLARITY = {
    "response_time": False,
    "service_failure_rate": False,
    "node_energy": True,
    "node_reliability": True,
    "hop_count": False,
    "throughput": True,
}

DEFAULT_METRICS = ("response_time", "service_failure_rate", "node_energy", "node_reliability")


@dataclass(frozen=True)
class QosVector:
    """The QoS inputs one candidate advertises in a discovery reply."""

    response_time: float
    service_failure_rate: float
    node_energy: float
    node_reliability: float
    hop_count: Optional[int] = None
    throughput: Optional[float] = None

    def __post_init__(self):
        for name in ("response_time", "service_failure_rate", "node_energy", "node_reliability"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidArgument(f"{name} must be finite")
        if not 0.0 <= self.node_reliability <= 1.0:
            raise InvalidArgument(f"node_reliability must lie in [0, 1], got {self.node_reliability}")
        if self.hop_count is not None and self.hop_count < 1:
            raise InvalidArgument(f"hop_count must be >= 1, got {self.hop_count}")
        if self.throughput is not None and not math.isfinite(self.throughput):
            raise InvalidArgument("throughput must be finite")

    def metric(self, name: str) -> float:
        value = getattr(self, name)
        if value is None:
            raise InvalidArgument(f"metric {name!r} is not present on this vector")
        return float(value)
