"""Primary/backup link failover for NavFix delivery plus a lossy
primary-only channel for commands.

The primary (Wi-Fi) link delivers everything with latency L1 except
during scripted outage windows.  The backup (point-to-point radio)
carries only navigation fixes, always, at latency L2 > L1.  A consumer
sees whichever copy of a fix arrives first; the ``source`` field records
which link won.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, replace
from itertools import count

from muralsim.lidar import BACKUP_LINK, PRIMARY_LINK, NavFix
from muralsim.sim.config import LinkConfig


def in_outage(cfg: LinkConfig, t: float) -> bool:
    return any(t0 <= t < t1 for t0, t1 in cfg.outages)


@dataclass
class _Delivery:
    due: float
    seq: int
    fix: NavFix


class FixLink:
    """Per-drone fix transport with first-arrival deduplication."""

    def __init__(self, cfg: LinkConfig):
        self.cfg = cfg
        self._heap: list[tuple[float, int, int, NavFix]] = []
        self._tiebreak = count()
        self._seq = 0
        self._delivered: int = -1  # highest seq handed out
        self.sent = 0
        self.dropped_primary = 0

    def send(self, fix: NavFix, t: float) -> None:
        seq = self._seq
        self._seq += 1
        self.sent += 1
        if not in_outage(self.cfg, t):
            heapq.heappush(self._heap, (t + self.cfg.latency_primary,
                                        next(self._tiebreak), seq,
                                        replace(fix, source=PRIMARY_LINK)))
        else:
            self.dropped_primary += 1
        heapq.heappush(self._heap, (t + self.cfg.latency_backup,
                                    next(self._tiebreak), seq,
                                    replace(fix, source=BACKUP_LINK)))

    def deliver_due(self, t: float) -> list[NavFix]:
        """Fixes whose first copy has arrived by ``t``, in arrival order.
        Late duplicates and out-of-date fixes are suppressed."""
        out: list[NavFix] = []
        while self._heap and self._heap[0][0] <= t:
            _, _, seq, fix = heapq.heappop(self._heap)
            if seq > self._delivered:
                self._delivered = seq
                out.append(fix)
        return out


class CommandLink:
    """Commands ride the primary link only; an outage loses them."""

    def __init__(self, cfg: LinkConfig):
        self.cfg = cfg
        self._heap: list[tuple[float, int, tuple]] = []
        self._tiebreak = count()
        self.dropped = 0

    def send(self, payload: tuple, t: float) -> bool:
        if in_outage(self.cfg, t):
            self.dropped += 1
            return False
        heapq.heappush(self._heap, (t + self.cfg.latency_primary,
                                    next(self._tiebreak), payload))
        return True

    def deliver_due(self, t: float) -> list[tuple]:
        out = []
        while self._heap and self._heap[0][0] <= t:
            _, _, payload = heapq.heappop(self._heap)
            out.append(payload)
        return out

    @property
    def in_flight(self) -> int:
        return len(self._heap)
