"""ConGo: a small context-oriented language with decoupled layer dispatch."""

from .bus import DEFAULT_REPLY_TIMEOUT, MessageBus, Topic
from .context import (
    BatteryContext,
    ConcreteValueStore,
    ConfusedHeroContext,
    ContextChanged,
    ContextDescriptor,
    ContextManager,
    WeatherContext,
    register_context,
)
from .decision import (
    CountingDecisionMaker,
    DecisionFailure,
    DecisionMaker,
    DecisionResponse,
    DefaultDecisionMaker,
    InvocationRequest,
    VariantSpec,
    register_decision_maker,
)
from .errors import CongoError
from .interpreter import (
    CachePolicy,
    DispatchMode,
    DynObject,
    RunConfig,
    Runtime,
    run,
)
from .lexer import tokenize
from .lowering import LoweredModule, compile_source, lower, mangle
from .nodes import LayerMode
from .parser import parse, parse_source
from .printer import format_module

__version__ = "0.1.0"

__all__ = [
    "BatteryContext",
    "CachePolicy",
    "ConcreteValueStore",
    "ConfusedHeroContext",
    "CongoError",
    "ContextChanged",
    "ContextDescriptor",
    "ContextManager",
    "CountingDecisionMaker",
    "DecisionFailure",
    "DecisionMaker",
    "DecisionResponse",
    "DefaultDecisionMaker",
    "DEFAULT_REPLY_TIMEOUT",
    "DispatchMode",
    "DynObject",
    "InvocationRequest",
    "LayerMode",
    "LoweredModule",
    "MessageBus",
    "RunConfig",
    "Runtime",
    "Topic",
    "VariantSpec",
    "WeatherContext",
    "compile_source",
    "format_module",
    "lower",
    "mangle",
    "parse",
    "parse_source",
    "register_context",
    "register_decision_maker",
    "run",
    "tokenize",
    "__version__",
]
