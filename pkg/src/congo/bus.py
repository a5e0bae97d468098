"""In-process publish/subscribe bus with hierarchical topics.

One dedicated dispatcher thread runs every handler sequentially, so
publishers never execute handlers inline and per-subscription delivery
is FIFO in publish order.  ``request_reply`` layers a blocking
request/response protocol on top; calling it from the dispatcher thread
would deadlock the bus, so that re-entry fails fast instead.
"""

from __future__ import annotations

import logging
import queue
import threading
from dataclasses import dataclass
from typing import Callable, List, Optional

from .errors import BusClosedError, DecisionTimeoutError, ReentrantDispatchError

log = logging.getLogger("congo.bus")

DEFAULT_REPLY_TIMEOUT = 5.0


@dataclass(frozen=True)
class Topic:
    """Hierarchical topic; a trailing ``*`` segment matches any suffix."""

    segments: tuple

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("a topic needs at least one segment")
        for i, segment in enumerate(self.segments):
            if not isinstance(segment, str) or not segment or "/" in segment:
                raise ValueError(f"invalid topic segment: {segment!r}")
            if segment == "*" and i != len(self.segments) - 1:
                raise ValueError("wildcard '*' is only allowed as the final segment")

    @classmethod
    def parse(cls, text: str) -> "Topic":
        return cls(tuple(text.split("/")))

    def matches(self, topic: "Topic") -> bool:
        """True when ``topic`` (a concrete topic) matches this pattern."""
        pattern = self.segments
        if pattern[-1] == "*":
            head = pattern[:-1]
            return (
                len(topic.segments) > len(head)
                and topic.segments[: len(head)] == head
            )
        return topic.segments == pattern

    def __str__(self) -> str:
        return "/".join(self.segments)


@dataclass(frozen=True)
class Message:
    topic: Topic
    payload: object
    publish_seq: int


class Subscription:
    __slots__ = ("pattern", "handler", "_active")

    def __init__(self, pattern: Topic, handler: Callable[[Message], None]):
        self.pattern = pattern
        self.handler = handler
        self._active = True


_SHUTDOWN = object()


class MessageBus:
    """Single-dispatcher message bus. Starts its thread on construction."""

    def __init__(self, *, trace: Optional[Callable[[str], None]] = None):
        self._queue: "queue.SimpleQueue" = queue.SimpleQueue()
        self._lock = threading.Lock()
        # Held for the whole delivery of one message; unsubscribe uses it
        # as a barrier so no handler starts after unsubscribe returns.
        self._delivery_lock = threading.Lock()
        self._subscriptions: List[Subscription] = []
        self._seq = 0
        self._closed = False
        self._trace = trace
        self._thread = threading.Thread(
            target=self._dispatch_loop, name="congo-bus", daemon=True
        )
        self._thread.start()

    # --- core operations ---------------------------------------------------

    def publish(self, topic: Topic, payload: object) -> int:
        """Enqueue a message; returns its global publish sequence number."""
        with self._lock:
            if self._closed:
                raise BusClosedError("publish on a bus that was shut down")
            self._seq += 1
            seq = self._seq
            self._queue.put(Message(topic, payload, seq))
        return seq

    def subscribe(self, pattern: Topic, handler: Callable[[Message], None]) -> Subscription:
        subscription = Subscription(pattern, handler)
        with self._lock:
            self._subscriptions.append(subscription)
        return subscription

    def unsubscribe(self, subscription: Subscription) -> None:
        """Deactivate; once this returns the handler sees no more messages."""
        with self._lock:
            subscription._active = False
            try:
                self._subscriptions.remove(subscription)
            except ValueError:
                pass
        if threading.current_thread() is not self._thread:
            with self._delivery_lock:
                pass  # wait out any delivery already in flight

    def request_reply(
        self,
        request_topic: Topic,
        payload: object,
        reply_topic: Topic,
        timeout: float = DEFAULT_REPLY_TIMEOUT,
    ):
        """Publish a request and block until a reply arrives on ``reply_topic``."""
        if threading.current_thread() is self._thread:
            raise ReentrantDispatchError(
                "request_reply called from the bus dispatcher context"
            )
        ready = threading.Event()
        slot: List[object] = []

        def _on_reply(message: Message) -> None:
            if not slot:
                slot.append(message.payload)
            ready.set()

        subscription = self.subscribe(reply_topic, _on_reply)
        try:
            self.publish(request_topic, payload)
            if not ready.wait(timeout):
                raise DecisionTimeoutError(
                    f"no reply on '{reply_topic}' within {timeout:g}s",
                    request_id=getattr(payload, "request_id", None),
                )
        finally:
            self.unsubscribe(subscription)
        return slot[0]

    def shutdown(self) -> None:
        """Stop the dispatcher after draining already-queued messages."""
        with self._lock:
            if self._closed:
                return
            self._closed = True
        self._queue.put(_SHUTDOWN)
        self._thread.join()

    @property
    def closed(self) -> bool:
        with self._lock:
            return self._closed

    def __enter__(self) -> "MessageBus":
        return self

    def __exit__(self, *exc_info) -> None:
        self.shutdown()

    # --- dispatcher --------------------------------------------------------

    def _dispatch_loop(self) -> None:
        while True:
            message = self._queue.get()
            if message is _SHUTDOWN:
                break
            with self._delivery_lock:
                if self._trace is not None:
                    try:
                        self._trace(
                            f"SEQ {message.publish_seq} {message.topic} "
                            f"{type(message.payload).__name__}"
                        )
                    except Exception:
                        log.exception("bus trace hook failed")
                with self._lock:
                    targets = [
                        s for s in self._subscriptions
                        if s._active and s.pattern.matches(message.topic)
                    ]
                for subscription in targets:
                    if not subscription._active:
                        continue
                    try:
                        subscription.handler(message)
                    except Exception:
                        log.exception(
                            "subscriber raised while handling %s", message.topic
                        )
