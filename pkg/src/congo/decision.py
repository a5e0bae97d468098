"""Decision makers: who picks the variant chain for a contextual call.

A call site never chooses variants itself.  It packages the invocation
(variants, meta snapshot, epoch) into an :class:`InvocationRequest` and
either sends it over the bus (event dispatch) or calls ``decide``
synchronously (direct dispatch).  The reply is an ordered chain of
variant ids, outermost first.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Tuple

from .bus import MessageBus, Subscription, Topic
from .errors import (
    DecisionFailedError,
    NoApplicableVariantError,
    UnknownDecisionMakerError,
)
from .lowering import VariantId
from .nodes import LayerMode

log = logging.getLogger("congo.decision")

REQUEST_PATTERN = Topic(("congo", "decision", "request", "*"))


def request_topic_for(module: str) -> Topic:
    return Topic(("congo", "decision", "request", *module.split(".")))


def reply_topic_for(request_id: int) -> Topic:
    return Topic(("congo", "decision", "reply", str(request_id)))


def context_changed_topic(context: str) -> Topic:
    return Topic(("congo", "context", "changed", context))


@dataclass(frozen=True)
class VariantSpec:
    variant_id: VariantId
    constraints: Tuple[Tuple[str, str], ...]  # () marks the base variant
    mode: LayerMode


@dataclass(frozen=True)
class InvocationRequest:
    request_id: int
    module: str
    function_name: str
    arity: int
    variants: Tuple[VariantSpec, ...]
    receiver_id: Optional[int]
    meta_snapshot: Mapping[str, frozenset]
    snapshot_epoch: int
    reply_topic: Topic
    # Resolved at the call site (per-object override or the global one).
    # In-process reference; a networked bus would route by receiver_id.
    decision_maker: Optional["DecisionMaker"] = None


@dataclass(frozen=True)
class DecisionResponse:
    request_id: int
    chain: Tuple[VariantId, ...]  # outermost first; base, if present, last
    epoch: int


@dataclass(frozen=True)
class DecisionFailure:
    """Error reply published when a decision maker raises."""

    request_id: int
    kind: str  # "no-applicable-variant" | "decision-failed"
    message: str


class DecisionMaker(ABC):
    """Pluggable chain-selection policy.

    ``init`` and ``train`` are lifecycle hooks; the default policy needs
    neither but third-party implementations (e.g. learned policies) do.
    """

    def init(self, config: Mapping) -> None:
        pass

    @abstractmethod
    def decide(self, request: InvocationRequest) -> DecisionResponse:
        ...

    def train(self, feedback: object) -> None:
        pass


class DefaultDecisionMaker(DecisionMaker):
    """Static policy: eligible layers stacked LIFO, base innermost.

    A layer is eligible when every (context, meta) constraint is
    satisfied by the request's meta snapshot.  Eligible layers compose
    in reverse declaration order (the last declared layer runs first),
    with the base as the final chain element.
    """

    def __init__(self) -> None:
        self._config: Dict = {}

    def init(self, config: Mapping) -> None:
        self._config = dict(config)

    def decide(self, request: InvocationRequest) -> DecisionResponse:
        snapshot = request.meta_snapshot
        eligible = [
            spec for spec in request.variants
            if spec.constraints and all(
                meta in snapshot.get(ctx, frozenset())
                for ctx, meta in spec.constraints
            )
        ]
        chain: List[VariantId] = [spec.variant_id for spec in reversed(eligible)]
        base = next((spec for spec in request.variants if not spec.constraints), None)
        if base is not None:
            chain.append(base.variant_id)
        if not chain:
            raise NoApplicableVariantError(request.module, request.function_name)
        return DecisionResponse(request.request_id, tuple(chain), request.snapshot_epoch)


class CountingDecisionMaker(DecisionMaker):
    """Delegates to an inner policy while recording every decide call."""

    def __init__(self, inner: Optional[DecisionMaker] = None):
        self.inner = inner or DefaultDecisionMaker()
        self.decisions = 0
        self.seen: List[Tuple[str, str, Optional[int]]] = []

    def init(self, config: Mapping) -> None:
        self.inner.init(config)

    def decide(self, request: InvocationRequest) -> DecisionResponse:
        self.decisions += 1
        self.seen.append((request.module, request.function_name, request.receiver_id))
        return self.inner.decide(request)

    def train(self, feedback: object) -> None:
        self.inner.train(feedback)


def resolve_decision_maker(receiver, global_dm: DecisionMaker) -> DecisionMaker:
    """Per-object decision maker when the receiver carries one, else global."""
    dm = getattr(receiver, "decision_maker", None) if receiver is not None else None
    return dm if dm is not None else global_dm


def attach_decision_maker(bus: MessageBus, dm: DecisionMaker) -> Subscription:
    """Subscribe ``dm`` to every decision request on the bus.

    Each request is answered on its own reply topic.  Exceptions from
    ``decide`` become :class:`DecisionFailure` replies so a broken
    policy cannot take the dispatcher down.
    """

    def _handle(message) -> None:
        request = message.payload
        if not isinstance(request, InvocationRequest):
            return
        chosen = request.decision_maker or dm
        try:
            reply: object = chosen.decide(request)
        except NoApplicableVariantError as exc:
            reply = DecisionFailure(request.request_id, "no-applicable-variant", str(exc))
        except Exception as exc:
            log.debug("decision maker raised", exc_info=True)
            reply = DecisionFailure(
                request.request_id, "decision-failed", f"{type(exc).__name__}: {exc}"
            )
        bus.publish(request.reply_topic, reply)

    return bus.subscribe(REQUEST_PATTERN, _handle)


def failure_to_error(failure: DecisionFailure, module: str, function_name: str):
    if failure.kind == "no-applicable-variant":
        return NoApplicableVariantError(module, function_name)
    return DecisionFailedError(f"decision maker failed: {failure.message}")


def validate_response(request: InvocationRequest, response: DecisionResponse) -> None:
    """Check the chain-legality invariants; raise DecisionFailedError if broken."""
    if response.request_id != request.request_id:
        raise DecisionFailedError(
            f"decision response id {response.request_id} does not match "
            f"request {request.request_id}"
        )
    if not response.chain:
        raise DecisionFailedError("decision maker returned an empty chain")
    known = {spec.variant_id for spec in request.variants}
    base_ids = {spec.variant_id for spec in request.variants if not spec.constraints}
    for i, variant_id in enumerate(response.chain):
        if variant_id not in known:
            raise DecisionFailedError(
                f"decision chain names unknown variant {variant_id!r}"
            )
        if variant_id in base_ids and i != len(response.chain) - 1:
            raise DecisionFailedError(
                "the base variant may only appear as the last chain element"
            )
    if len([v for v in response.chain if v in base_ids]) > 1:
        raise DecisionFailedError("the base variant may appear at most once")


# --- registry for named decision makers (CLI and source-level lookup) ------

_FACTORIES: Dict[str, Callable[[], DecisionMaker]] = {}


def register_decision_maker(name: str, factory: Callable[[], DecisionMaker]) -> None:
    _FACTORIES[name] = factory


def unregister_decision_maker(name: str) -> None:
    _FACTORIES.pop(name, None)


def create_decision_maker(name: str) -> DecisionMaker:
    factory = _FACTORIES.get(name)
    if factory is None:
        raise UnknownDecisionMakerError(f"unknown decision maker '{name}'")
    return factory()


def registered_decision_makers() -> Tuple[str, ...]:
    return tuple(sorted(_FACTORIES))


register_decision_maker("default", DefaultDecisionMaker)
register_decision_maker("counting", CountingDecisionMaker)
