"""AODV-style baseline: take the first provider that answers, ignoring QoS."""

from __future__ import annotations

from typing import Optional, Sequence

from .composition import (AbstractService, CompositionPath, NoProviderError, PathEntry,
                          ServiceAdvertisement, TrustMatrix)


def baseline_compose(request: Sequence[AbstractService],
                     replies: Sequence[ServiceAdvertisement],
                     matrix: Optional[TrustMatrix] = None) -> CompositionPath:
    """Per abstract service, the earliest reply wins; ties go to fewer hops,
    then the lower node id.

    ``matrix`` is only used to annotate the chosen entries with their trust
    value (0.0 when not supplied).
    """
    trust = {}
    if matrix is not None:
        for s, row in zip(matrix.services, matrix.cells):
            for n, c in zip(matrix.node_ids, row):
                if c is not None:
                    trust[(s.position, n)] = c.trust
    entries = []
    for service in sorted(request, key=lambda s: s.position):
        candidates = [r for r in replies if r.abstract_id == service.id]
        if not candidates:
            raise NoProviderError(service)
        first = min(candidates, key=lambda r: (r.received_at,
                                               r.qos.hop_count if r.qos.hop_count is not None else 0,
                                               r.node_id))
        entries.append(PathEntry(service, first.node_id, first.service_id,
                                 trust.get((service.position, first.node_id), 0.0)))
    return tuple(entries)
