"""MISO Hammerstein cascade used to fuse a candidate's QoS inputs into trust.

Each input passes through its own memoryless gain and the gain outputs drive a
single linear ARX block::

    y(t) = sum_i a_i y(t-i) + sum_m sum_k b_{k,m} psi_m(u_m(t-k)) + eta(t)

The default configuration is static (no lags), identity gains and equal convex
weights, which turns the cascade into a weighted mean of normalized inputs.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .qos_metrics import DEFAULT_METRICS, POLARITY, InvalidArgument, QosVector

GAIN_KINDS = ("identity", "polynomial", "bernstein")


@dataclass(frozen=True)
class GainFunction:
    kind: str = "identity"
    coefficients: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in GAIN_KINDS:
            raise InvalidArgument(f"unknown gain kind {self.kind!r}")
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if self.kind == "identity" and self.coefficients:
            raise InvalidArgument("identity gain takes no coefficients")
        if self.kind != "identity" and not self.coefficients:
            raise InvalidArgument(f"{self.kind} gain needs at least one coefficient")


def apply_gain(g: GainFunction, u: float) -> float:
    if g.kind == "identity":
        return u
    c = g.coefficients
    if g.kind == "polynomial":
        acc = 0.0
        for coef in reversed(c):
            acc = acc * u + coef
        return acc
    if not 0.0 <= u <= 1.0:
        raise InvalidArgument(f"bernstein gain is defined on [0, 1], got u={u}")
    n = len(c) - 1
    return sum(cj * math.comb(n, j) * u**j * (1.0 - u) ** (n - j) for j, cj in enumerate(c))


@dataclass(frozen=True)
class HammersteinModel:
    """Gains, AR coefficients ``a_1..a_na``, per-input MA coefficients
    ``b_{0,i}..b_{nbi,i}`` and the noise variance."""

    gains: tuple[GainFunction, ...]
    ma: tuple[tuple[float, ...], ...]
    ar: tuple[float, ...] = ()
    noise_variance: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "gains", tuple(self.gains))
        object.__setattr__(self, "ma", tuple(tuple(float(b) for b in row) for row in self.ma))
        object.__setattr__(self, "ar", tuple(float(a) for a in self.ar))
        if not self.gains:
            raise InvalidArgument("model needs at least one input")
        if len(self.ma) != len(self.gains):
            raise InvalidArgument(
                f"{len(self.gains)} gains but {len(self.ma)} MA coefficient rows")
        if any(len(row) == 0 for row in self.ma):
            raise InvalidArgument("each input needs at least the b_0 coefficient")
        if self.noise_variance < 0:
            raise InvalidArgument("noise variance must be nonnegative")

    @property
    def n_inputs(self) -> int:
        return len(self.gains)

    @property
    def output_lag(self) -> int:
        return len(self.ar)

    @property
    def input_lags(self) -> tuple[int, ...]:
        return tuple(len(row) - 1 for row in self.ma)

    @property
    def is_static(self) -> bool:
        return self.output_lag == 0 and all(n == 0 for n in self.input_lags)

    @classmethod
    def static(cls, weights: Sequence[float], gains: Optional[Sequence[GainFunction]] = None,
               noise_variance: float = 0.0) -> "HammersteinModel":
        if gains is None:
            gains = [GainFunction()] * len(weights)
        return cls(tuple(gains), tuple((w,) for w in weights), (), noise_variance)

    @classmethod
    def default(cls, n_inputs: int = len(DEFAULT_METRICS)) -> "HammersteinModel":
        return cls.static([1.0 / n_inputs] * n_inputs)


def evaluate(model: HammersteinModel, input_history: Sequence[Sequence[float]],
             output_history: Sequence[float] = (), noise_sample: float = 0.0) -> float:
    """One output sample.

    ``input_history[i][k]`` is ``u_i(t-k)`` (index 0 is the current input) and
    ``output_history[j]`` is ``y(t-1-j)``. Samples not supplied count as zero.
    """
    if len(input_history) != model.n_inputs:
        raise InvalidArgument(
            f"model has {model.n_inputs} inputs, got {len(input_history)} input histories")
    y = 0.0
    for i, a in enumerate(model.ar):
        if i < len(output_history):
            y += a * output_history[i]
    for gain, coefs, history in zip(model.gains, model.ma, input_history):
        for k, b in enumerate(coefs):
            if k < len(history):
                y += b * apply_gain(gain, history[k])
    return y + noise_sample


class HammersteinFilter:
    """Streaming evaluation of a model, keeping its own lagged history."""

    def __init__(self, model: HammersteinModel):
        self.model = model
        self._inputs = [deque(maxlen=n + 1) for n in model.input_lags]
        self._outputs: deque[float] = deque(maxlen=max(model.output_lag, 1))

    def step(self, inputs: Sequence[float], noise_sample: float = 0.0) -> float:
        if len(inputs) != self.model.n_inputs:
            raise InvalidArgument(
                f"model has {self.model.n_inputs} inputs, got {len(inputs)}")
        for hist, u in zip(self._inputs, inputs):
            hist.appendleft(float(u))
        y = evaluate(self.model, self._inputs, self._outputs, noise_sample)
        self._outputs.appendleft(y)
        return y


@dataclass(frozen=True)
class NormalizationContext:
    metrics: tuple[str, ...]
    bounds: Mapping[str, tuple[float, float]]
    benefit: Mapping[str, bool]

    def degenerate(self, metric: str) -> bool:
        lo, hi = self.bounds[metric]
        return lo == hi


def build_normalization(candidates: Sequence[QosVector],
                        metrics: Sequence[str] = DEFAULT_METRICS,
                        polarity: Optional[Mapping[str, bool]] = None) -> NormalizationContext:
    """Per-metric extrema over a candidate set.

    ``polarity`` maps metric name to True for benefit metrics; it defaults to
    the standard polarity table.
    """
    if not candidates:
        raise InvalidArgument("cannot normalize over an empty candidate set")
    polarity = dict(POLARITY if polarity is None else polarity)
    bounds = {}
    for m in metrics:
        if m not in polarity:
            raise InvalidArgument(f"no polarity declared for metric {m!r}")
        values = [c.metric(m) for c in candidates]
        bounds[m] = (min(values), max(values))
    return NormalizationContext(tuple(metrics), bounds, {m: polarity[m] for m in metrics})


def normalize(v: QosVector, ctx: NormalizationContext) -> list[float]:
    out = []
    for m in ctx.metrics:
        lo, hi = ctx.bounds[m]
        if lo == hi:
            out.append(1.0)
            continue
        x = v.metric(m)
        z = (x - lo) / (hi - lo) if ctx.benefit[m] else (hi - x) / (hi - lo)
        out.append(min(max(z, 0.0), 1.0))
    return out


def scale_trust(y: float) -> float:
    return min(max(100.0 * y, 0.0), 100.0)


def trust_score(v: QosVector, ctx: NormalizationContext, model: HammersteinModel,
                noise_sample: float = 0.0) -> float:
    """Memoryless trust in [0, 100] for one candidate."""
    u = normalize(v, ctx)
    return scale_trust(evaluate(model, [[x] for x in u], (), noise_sample))


def model_from_dict(cfg: Mapping, n_inputs: int) -> HammersteinModel:
    """Build a model from the ``hammerstein`` block of a scenario config."""
    gains_cfg = cfg.get("gains") or ["identity"] * n_inputs
    if len(gains_cfg) != n_inputs:
        raise InvalidArgument(f"expected {n_inputs} gains, got {len(gains_cfg)}")
    gains = []
    for g in gains_cfg:
        if isinstance(g, str):
            gains.append(GainFunction(g))
        else:
            gains.append(GainFunction(g.get("kind", "identity"), tuple(g.get("coefficients", ()))))
    ma = cfg.get("ma")
    if ma is None:
        weights = cfg.get("weights") or [1.0 / n_inputs] * n_inputs
        ma = [[w] for w in weights]
    return HammersteinModel(tuple(gains), tuple(tuple(r) for r in ma),
                            tuple(cfg.get("ar", ())), float(cfg.get("noise_variance", 0.0)))


def iter_metrics(names: Iterable[str]) -> tuple[str, ...]:
    names = tuple(names)
    unknown = [n for n in names if n not in POLARITY]
    if unknown:
        raise InvalidArgument(f"unknown QoS metrics: {', '.join(unknown)}")
    return names
