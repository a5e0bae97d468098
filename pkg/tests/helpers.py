"""Shared plumbing for the test suite."""

from __future__ import annotations

from typing import Iterable, List, Optional, Tuple

from congo.interpreter import CachePolicy, DispatchMode, RunConfig, run
from congo.lowering import compile_source


def run_program(
    source: str,
    *,
    entry: str = "main",
    args: Tuple = (),
    mode: DispatchMode = DispatchMode.EVENT,
    policy: CachePolicy = CachePolicy.NONE,
    decision_maker="default",
    initial: Iterable[Tuple[str, str, object]] = (),
    trace: Optional[List[str]] = None,
) -> Tuple[object, List[str]]:
    """Compile and run a source string; returns (result, println lines)."""
    lowered = compile_source(source, file="<test>")
    output: List[str] = []
    config = RunConfig(
        dispatch_mode=mode,
        cache_policy=policy,
        decision_maker=decision_maker,
        initial_values=tuple(initial),
        trace=trace.append if trace is not None else None,
        println=output.append,
    )
    result = run(lowered, entry=entry, args=args, config=config)
    return result, output
