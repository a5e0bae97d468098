"""Two-level context model: concrete sensed values and symbolic meta values.

A :class:`ConcreteValueStore` holds raw scalars keyed by (context, key)
and stamps every write with a strictly increasing epoch.  Context
descriptors map a consistent snapshot of those scalars to sets of meta
symbols; the :class:`ContextManager` keeps, per module, which
descriptors are active.
"""

from __future__ import annotations

import re
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, List, Optional, Tuple, Union

from .errors import ContextEvaluationError, FeedError, UnknownContextCtorError

Scalar = Union[bool, int, float, str]

_META_SYMBOL_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def is_scalar(value: object) -> bool:
    return isinstance(value, (bool, int, float, str))


def _is_number(value: object) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


class ConcreteValueStore:
    """Shared mutable map of raw values; every mutation bumps the epoch."""

    def __init__(self) -> None:
        self._entries: Dict[Tuple[str, str], Scalar] = {}
        self._epoch = 0
        self._lock = threading.Lock()

    @property
    def epoch(self) -> int:
        # lock-free: int loads are atomic, and guard re-checks only compare
        return self._epoch

    def set(self, context: str, key: str, value: Scalar) -> int:
        """Store one value and return the new epoch."""
        if not is_scalar(value):
            raise ValueError(
                f"concrete values must be bool/int/float/str, got {type(value).__name__}"
            )
        with self._lock:
            self._entries[(context, key)] = value
            self._epoch += 1
            return self._epoch

    def get(self, context: str, key: str, default: Optional[Scalar] = None):
        with self._lock:
            return self._entries.get((context, key), default)

    def snapshot(self) -> Tuple[Dict[Tuple[str, str], Scalar], int]:
        """Consistent copy of (entries, epoch)."""
        with self._lock:
            return dict(self._entries), self._epoch


class StoreView:
    """Read-only view over one store snapshot, handed to descriptors."""

    def __init__(self, entries: Dict[Tuple[str, str], Scalar]):
        self._entries = entries

    def get(self, context: str, key: str, default: Optional[Scalar] = None):
        return self._entries.get((context, key), default)


class ContextDescriptor(ABC):
    """Maps concrete values to the meta values currently in force."""

    name: str

    @abstractmethod
    def evaluate(self, store) -> FrozenSet[str]:
        """Return the active meta symbols; must be deterministic in the store."""


class ConfusedHeroContext(ContextDescriptor):
    name = "ConfusedHero"

    def evaluate(self, store) -> FrozenSet[str]:
        confused = store.get(self.name, "confused")
        return frozenset({"TRUE"}) if confused is True else frozenset({"FALSE"})


class WeatherContext(ContextDescriptor):
    name = "Weather"
    RAINFALL_THRESHOLD_MM = 1.0

    def evaluate(self, store) -> FrozenSet[str]:
        rainfall = store.get(self.name, "rainfall_mm")
        if _is_number(rainfall) and rainfall >= self.RAINFALL_THRESHOLD_MM:
            return frozenset({"RAINY"})
        return frozenset({"CLEAR"})


class BatteryContext(ContextDescriptor):
    name = "Battery"
    LOW_CHARGE_PCT = 20.0

    def evaluate(self, store) -> FrozenSet[str]:
        charge = store.get(self.name, "charge_pct")
        if _is_number(charge) and charge < self.LOW_CHARGE_PCT:
            return frozenset({"LOW"})
        return frozenset({"OK"})


_FACTORY: Dict[str, Callable[[], ContextDescriptor]] = {}


def register_context(name: str, factory: Callable[[], ContextDescriptor]) -> None:
    """Register (or replace) a context constructor by name."""
    _FACTORY[name] = factory


def unregister_context(name: str) -> None:
    _FACTORY.pop(name, None)


def create_context(name: str) -> ContextDescriptor:
    factory = _FACTORY.get(name)
    if factory is None:
        raise UnknownContextCtorError(f"unknown context constructor '{name}'")
    return factory()


register_context("ConfusedHero", ConfusedHeroContext)
register_context("Weather", WeatherContext)
register_context("Battery", BatteryContext)


@dataclass(frozen=True)
class ContextChanged:
    """Bus payload published whenever a concrete value is written."""

    context: str
    key: str
    value: Scalar
    epoch: int


class ContextManager:
    """Per-module registry of active context descriptors."""

    def __init__(self) -> None:
        self._registry: Dict[str, Tuple[ContextDescriptor, ...]] = {}

    def register_module_contexts(self, module: str, ctor_names) -> None:
        """Instantiate descriptors for a module; re-registration replaces."""
        self._registry[module] = tuple(create_context(n) for n in ctor_names)

    def contexts_for(self, module: str) -> Tuple[ContextDescriptor, ...]:
        return self._registry.get(module, ())

    def snapshot_meta(
        self, module: str, store: ConcreteValueStore
    ) -> Tuple[Dict[str, FrozenSet[str]], int]:
        """Evaluate every registered descriptor against one store snapshot."""
        entries, epoch = store.snapshot()
        view = StoreView(entries)
        snapshot: Dict[str, FrozenSet[str]] = {}
        for descriptor in self._registry.get(module, ()):
            try:
                metas = frozenset(descriptor.evaluate(view))
            except Exception as exc:
                raise ContextEvaluationError(
                    descriptor.name,
                    f"context '{descriptor.name}' failed to evaluate: {exc}",
                ) from exc
            for symbol in metas:
                if not isinstance(symbol, str) or not _META_SYMBOL_RE.match(symbol):
                    raise ContextEvaluationError(
                        descriptor.name,
                        f"context '{descriptor.name}' produced an invalid meta "
                        f"symbol: {symbol!r}",
                    )
            snapshot[descriptor.name] = metas
        return snapshot, epoch


# --- concrete-value ingestion (CLI --set flags and feed files) -------------

_INT_RE = re.compile(r"[+-]?[0-9]+\Z")
_FLOAT_RE = re.compile(r"[+-]?([0-9]+\.[0-9]*|\.[0-9]+|[0-9]+)([eE][+-]?[0-9]+)?\Z")


def parse_scalar(text: str) -> Scalar:
    """Parse a value as boolean, integer, float, or string, in that order."""
    if text == "true":
        return True
    if text == "false":
        return False
    if _INT_RE.match(text):
        return int(text)
    if _FLOAT_RE.match(text) and any(c in text for c in ".eE"):
        return float(text)
    return text


def parse_concrete_assignment(text: str) -> Tuple[str, str, Scalar]:
    """Parse ``Ctx.key=value`` as used by the CLI ``--set`` flag."""
    lhs, sep, raw = text.partition("=")
    if not sep:
        raise ValueError(f"expected Ctx.key=value, got {text!r}")
    context, dot, key = lhs.partition(".")
    if not dot or not context or not key or not raw:
        raise ValueError(f"expected Ctx.key=value, got {text!r}")
    return context, key, parse_scalar(raw)


def parse_feed(text: str) -> List[Tuple[str, str, Scalar]]:
    """Parse a feed file: one ``Ctx.key=value`` per line, ``#`` comments."""
    out: List[Tuple[str, str, Scalar]] = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            out.append(parse_concrete_assignment(line))
        except ValueError as exc:
            raise FeedError(f"line {lineno}: {exc}") from exc
    return out
