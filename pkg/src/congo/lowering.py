"""Lowering: variant tables, layered-name mangling, and call-site marking.

Before/after layers are rewritten here into replace-style bodies with an
implicit ``proceed()`` so that everything downstream (decision makers,
the chain executor) sees one uniform variant model:

* before base:  ``{ layerBody; return proceed() }``
* after base:   ``{ let $base = proceed(); layerBody; return $base }``

``$base`` cannot collide with user names because ``$`` is not a legal
identifier character in source.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import nodes
from .errors import (
    ArityMismatchError,
    ManglingCollisionError,
    MissingBaseError,
    ProceedOutsideLayerError,
    RedefinitionError,
    UnknownContextError,
)
from .lexer import tokenize
from .parser import parse

MANGLE_MARKER = "__$context$__"


def mangle(name: str, constraints: Sequence[Tuple[str, str]]) -> str:
    """Render the runtime name of a layered variant.

    Constraint pairs are sorted lexicographically by context name so the
    result does not depend on annotation order.
    """
    if not constraints:
        raise ValueError("mangle requires at least one constraint")
    pairs = sorted(constraints, key=lambda cv: cv[0])
    return name + MANGLE_MARKER + "__".join(f"{ctx}_{meta}" for ctx, meta in pairs)


@dataclass(frozen=True)
class VariantId:
    mangled_name: str
    declaration_index: int


@dataclass
class Variant:
    variant_id: VariantId
    constraints: Tuple[Tuple[str, str], ...]  # sorted by context name; () = base
    mode: nodes.LayerMode
    body: nodes.Lambda  # desugared for before/after layers
    arity: int
    # set by the runtime for object methods, which close over an environment
    closure_env: object = field(default=None, repr=False, compare=False)

    @property
    def is_base(self) -> bool:
        return not self.constraints


@dataclass
class VariantTable:
    function_name: str
    base: Optional[Variant] = None
    layers: List[Variant] = field(default_factory=list)

    def variants(self) -> List[Variant]:
        out = [self.base] if self.base is not None else []
        out.extend(self.layers)
        return out

    def variant_count(self) -> int:
        return len(self.layers) + (1 if self.base is not None else 0)

    def find(self, variant_id: VariantId) -> Optional[Variant]:
        for variant in self.variants():
            if variant.variant_id == variant_id:
                return variant
        return None


def desugar_lambda(lam: nodes.Lambda, mode: nodes.LayerMode) -> nodes.Lambda:
    """Rewrite a before/after layer body into replace form."""
    if mode is nodes.LayerMode.REPLACE:
        return lam
    sp = lam.span
    if isinstance(lam.body, nodes.Block):
        stmts: Tuple[nodes.Stmt, ...] = lam.body.stmts
    else:
        stmts = (nodes.ExprStmt(lam.body, lam.body.span),)
    if mode is nodes.LayerMode.BEFORE_BASE:
        new_stmts = (*stmts, nodes.ReturnStmt(nodes.Proceed((), sp), sp))
    else:  # AFTER_BASE
        new_stmts = (
            nodes.LetStmt("$base", nodes.Proceed((), sp), sp),
            *stmts,
            nodes.ReturnStmt(nodes.Ident("$base", sp), sp),
        )
    return nodes.Lambda(lam.params, None, nodes.Block(new_stmts, sp), sp)


def add_variant(
    table: VariantTable,
    lam: nodes.Lambda,
    *,
    declared_contexts: Sequence[str],
    closure_env: object = None,
    span: Optional[nodes.SourceSpan] = None,
) -> Variant:
    """Validate and append one declaration to a variant table.

    Shared by module lowering and the runtime ``define`` builtin: a
    single base, pairwise-distinct constraint sets, one arity per table,
    constraints only over declared contexts.
    """
    name = table.function_name
    span = span or lam.span
    arity = len(lam.params)
    existing = table.variants()
    if existing and existing[0].arity != arity:
        raise ArityMismatchError(
            f"variants of '{name}' disagree on arity "
            f"({existing[0].arity} vs {arity})",
            span,
        )
    index = len(existing)
    ann = lam.annotation
    if ann is None:
        if table.base is not None:
            raise RedefinitionError(f"base of '{name}' is already defined", span)
        variant = Variant(
            VariantId(name, index), (), nodes.LayerMode.REPLACE, lam, arity,
            closure_env,
        )
        table.base = variant
        return variant

    constraints = tuple(sorted(ann.constraints, key=lambda cv: cv[0]))
    for ctx, _ in constraints:
        if ctx not in declared_contexts:
            raise UnknownContextError(
                f"constraint on '{name}' references undeclared context '{ctx}'",
                ann.span,
            )
    constraint_set = frozenset(constraints)
    mangled = mangle(name, constraints)
    for layer in table.layers:
        if frozenset(layer.constraints) == constraint_set:
            rendered = ", ".join(f"{c}={m}" for c, m in constraints)
            raise RedefinitionError(
                f"layer of '{name}' with constraints ({rendered}) is already defined",
                span,
            )
        if layer.variant_id.mangled_name == mangled:
            raise ManglingCollisionError(
                f"constraint sets of '{name}' mangle to the same runtime name "
                f"'{mangled}'; rename the contexts or meta values involved",
                span,
            )
    variant = Variant(
        VariantId(mangled, index),
        constraints,
        ann.mode,
        desugar_lambda(lam, ann.mode),
        arity,
        closure_env,
    )
    table.layers.append(variant)
    return variant


@dataclass
class LoweredModule:
    name: str
    tables: Dict[str, VariantTable]
    context_ctors: Tuple[str, ...]
    contextual_call_names: frozenset
    ast: nodes.ModuleAst
    call_site_count: int


def lower(ast: nodes.ModuleAst) -> LoweredModule:
    declared = ast.context_decl.ctors if ast.context_decl is not None else ()
    tables: Dict[str, VariantTable] = {}
    for decl in ast.decls:
        table = tables.setdefault(decl.name, VariantTable(decl.name))
        add_variant(table, decl.fn, declared_contexts=declared, span=decl.span)

    for table in tables.values():
        if table.base is None and any(
            v.mode is not nodes.LayerMode.REPLACE for v in table.layers
        ):
            offender = next(
                v for v in table.layers if v.mode is not nodes.LayerMode.REPLACE
            )
            raise MissingBaseError(
                f"function '{table.function_name}' has a before/after layer "
                "but no base variant to proceed to",
                offender.body.span,
            )

    contextual = frozenset(
        name for name, table in tables.items() if table.layers
    )

    # proceed may only appear where a dispatch chain can be active: in a
    # layer body, or in the base of a function that has layers (where it
    # fails at runtime once the chain is exhausted).  Nested lambdas are
    # runtime values whose role is unknown here; their proceeds are
    # checked by the interpreter's frame barriers instead.
    for decl in ast.decls:
        if decl.fn.annotation is None and not tables[decl.name].layers:
            for node in nodes.walk_same_function(decl.fn.body):
                if isinstance(node, nodes.Proceed):
                    raise ProceedOutsideLayerError(
                        f"proceed in '{decl.name}', which has no layered variants",
                        node.span,
                    )

    # Mark dispatch sites.  Module-level calls are contextual by callee
    # name; method calls always get a site because the receiver's table
    # is only known at runtime.
    next_site = 0
    seen: set = set()
    for table in tables.values():
        for variant in table.variants():
            for node in nodes.walk(variant.body):
                if id(node) in seen:
                    continue
                seen.add(id(node))
                if isinstance(node, nodes.Call) and node.callee in contextual:
                    node.site_id = next_site
                    next_site += 1
                elif isinstance(node, nodes.MethodCall):
                    node.site_id = next_site
                    next_site += 1

    return LoweredModule(ast.name, tables, tuple(declared), contextual, ast, next_site)


def compile_source(source: str, file: str = "<string>") -> LoweredModule:
    """Tokenize, parse, and lower in one step."""
    return lower(parse(tokenize(source, file)))


def format_ir(lowered: LoweredModule) -> str:
    """Stable line-oriented dump of the variant tables."""
    lines = []
    for name in sorted(lowered.tables):
        table = lowered.tables[name]
        for variant in table.variants():
            constraints = ",".join(f"{c}={m}" for c, m in variant.constraints) or "-"
            lines.append(
                f"TABLE {name} VARIANT {variant.variant_id.mangled_name} "
                f"MODE {variant.mode.name} CONSTRAINTS {constraints}"
            )
    return "\n".join(lines)
