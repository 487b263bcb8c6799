"""In-process publish/subscribe monitoring bus."""

from __future__ import annotations

import itertools
import logging
import threading
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, List, Tuple

from .events import EventRecord

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProbeInstruction:
    """Event types the probes are told to emit, and where to send them."""

    enabled: FrozenSet[str] = frozenset()
    topic: str = "monitoring"


class MonitoringBus:
    """Synchronous topic-per-event-type bus.

    Delivery is serialized under a lock, so concurrent publishers are safe
    and each publisher's events reach every subscriber in publish order.
    Events whose type is not enabled by the current probe instruction, or
    that have no subscriber, are dropped and counted.
    """

    def __init__(self):
        self._subs: Dict[str, List[Tuple[int, Callable[[EventRecord], None]]]] = defaultdict(list)
        self._ids = itertools.count()
        self._lock = threading.RLock()
        self.instruction = ProbeInstruction()
        self.dropped = 0
        self.delivered = 0

    def instruct(self, instruction: ProbeInstruction) -> None:
        with self._lock:
            self.instruction = instruction

    def subscribe(self, event_type: str, callback: Callable[[EventRecord], None]) -> Tuple[str, int]:
        with self._lock:
            token = next(self._ids)
            self._subs[event_type].append((token, callback))
            return event_type, token

    def unsubscribe(self, handle: Tuple[str, int]) -> None:
        event_type, token = handle
        with self._lock:
            self._subs[event_type] = [s for s in self._subs[event_type] if s[0] != token]
            if not self._subs[event_type]:
                del self._subs[event_type]

    def publish(self, event: EventRecord) -> bool:
        """Deliver ``event``; returns False when it was dropped."""
        with self._lock:
            subs = self._subs.get(event.event_type)
            if event.event_type not in self.instruction.enabled or not subs:
                self.dropped += 1
                log.debug("dropped %s event (not enabled or unsubscribed)", event.event_type)
                return False
            for _, cb in list(subs):
                cb(event)
            self.delivered += 1
            return True
