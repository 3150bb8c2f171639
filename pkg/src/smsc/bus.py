"""In-cell publish/subscribe bus.

Each cell owns exactly one bus; it connects the cell's internal services.
Two delivery modes are supported: ``IMMEDIATE`` subscribers have their
handler invoked synchronously during ``publish``, ``QUEUED`` subscribers
accumulate envelopes that are fetched later with ``drain``.

Ordering guarantees:

* every envelope gets a strictly increasing ``bus_seq``;
* immediate handlers for one envelope run in (subscriber id, filter) order;
* a publish issued from inside an immediate handler is deferred onto the
  in-progress delivery agenda, so bus_seq order equals delivery order.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional

from .errors import (
    ClockRegression,
    DuplicateSubscription,
    MalformedFilter,
    MalformedTopic,
    UnknownSubscriber,
)

_SEGMENT_RE = re.compile(r"[a-z0-9-]+\Z")


def validate_topic(name: str) -> str:
    """Check a dot-separated topic name; returns it unchanged."""
    if not name:
        raise MalformedTopic("empty topic")
    for segment in name.split("."):
        if not _SEGMENT_RE.match(segment):
            raise MalformedTopic(f"bad topic segment {segment!r} in {name!r}")
    return name


def validate_filter(pattern: str) -> str:
    """Check a subscription filter: a topic, optionally ending in '.*'."""
    base = pattern[:-2] if pattern.endswith(".*") else pattern
    try:
        validate_topic(base)
    except MalformedTopic as exc:
        raise MalformedFilter(str(exc)) from None
    return pattern


def filter_matches(pattern: str, topic: str) -> bool:
    """Exact match, or prefix match when the filter ends in '.*'.

    ``a.b.*`` matches any topic with at least one segment below ``a.b``;
    it does not match ``a.b`` itself.
    """
    if pattern.endswith(".*"):
        return topic.startswith(pattern[:-2] + ".")
    return topic == pattern


class DeliveryMode(Enum):
    IMMEDIATE = "immediate"
    QUEUED = "queued"


@dataclass(frozen=True)
class Envelope:
    topic: str
    payload: Any
    publisher_id: str
    tick: int
    bus_seq: int


@dataclass(frozen=True)
class Subscription:
    subscriber_id: str
    filter: str
    mode: DeliveryMode


Handler = Callable[[Envelope], None]


@dataclass
class SubscriptionHandle:
    """Returned by ``subscribe``; supports cancellation."""

    subscription: Subscription
    _bus: "MessageBus" = field(repr=False)
    _handler: Optional[Handler] = field(default=None, repr=False)
    _active: bool = True

    def cancel(self) -> None:
        if self._active:
            self._active = False
            self._bus._remove(self)


class MessageBus:
    """Single-threaded bus, mutated only from the owning cell's loop."""

    def __init__(self, on_publish: Optional[Callable[[Envelope], None]] = None):
        self._handles: list[SubscriptionHandle] = []
        self._queues: dict[str, deque[Envelope]] = {}
        self._next_seq = 0
        self._last_tick = 0
        self._agenda: deque[Envelope] = deque()
        self._delivering = False
        self._on_publish = on_publish

    def subscribe(self, sub: Subscription, handler: Optional[Handler] = None) -> SubscriptionHandle:
        validate_filter(sub.filter)
        key = (sub.subscriber_id, sub.filter, sub.mode)
        for handle in self._handles:
            existing = handle.subscription
            if (existing.subscriber_id, existing.filter, existing.mode) == key:
                raise DuplicateSubscription(f"already registered: {key}")
        if sub.mode is DeliveryMode.QUEUED:
            self._queues.setdefault(sub.subscriber_id, deque())
        handle = SubscriptionHandle(sub, self, handler)
        self._handles.append(handle)
        return handle

    def publish(self, topic: str, payload: Any, publisher_id: str, tick: int) -> list[str]:
        """Publish one envelope; returns the immediate subscribers reached.

        A re-entrant call from an immediate handler returns an empty list:
        its envelope is appended to the agenda and delivered once the
        current pass reaches it.
        """
        validate_topic(topic)
        if tick < self._last_tick:
            raise ClockRegression(f"tick {tick} below last publish tick {self._last_tick}")
        self._last_tick = tick
        envelope = Envelope(topic, payload, publisher_id, tick, self._next_seq)
        self._next_seq += 1
        if self._on_publish is not None:
            self._on_publish(envelope)
        self._agenda.append(envelope)
        if self._delivering:
            return []
        delivered_first: list[str] = []
        first = True
        self._delivering = True
        try:
            while self._agenda:
                current = self._agenda.popleft()
                delivered = self._deliver(current)
                if first:
                    delivered_first = delivered
                    first = False
        finally:
            self._delivering = False
        return delivered_first

    def drain(self, subscriber_id: str) -> list[Envelope]:
        """Return and clear the subscriber's queued envelopes, bus_seq order."""
        if not any(
            h._active and h.subscription.mode is DeliveryMode.QUEUED
            and h.subscription.subscriber_id == subscriber_id
            for h in self._handles
        ):
            raise UnknownSubscriber(f"no queued subscription for {subscriber_id!r}")
        queue = self._queues.get(subscriber_id, deque())
        out = list(queue)
        queue.clear()
        return out

    # internal

    def _deliver(self, envelope: Envelope) -> list[str]:
        matching = [
            h for h in self._handles
            if h._active and filter_matches(h.subscription.filter, envelope.topic)
        ]
        matching.sort(key=lambda h: (h.subscription.subscriber_id, h.subscription.filter))
        delivered: list[str] = []
        queued_to: set[str] = set()
        for handle in matching:
            sub = handle.subscription
            if sub.mode is DeliveryMode.IMMEDIATE:
                delivered.append(sub.subscriber_id)
                if handle._handler is not None:
                    handle._handler(envelope)
            elif sub.subscriber_id not in queued_to:
                # one queue per subscriber: at most one append per envelope
                queued_to.add(sub.subscriber_id)
                self._queues[sub.subscriber_id].append(envelope)
        return delivered

    def _remove(self, handle: SubscriptionHandle) -> None:
        self._handles = [h for h in self._handles if h is not handle]
