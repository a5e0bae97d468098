"""AST node definitions for ConGo programs.

Spans (and dispatch bookkeeping such as call-site ids) are excluded from
equality, so two parses of the same text compare structurally equal even
when they come from different files or a pretty-printed round trip.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Iterator, Optional, Tuple, Union


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


class LayerMode(Enum):
    REPLACE = "replace"
    BEFORE_BASE = "before_base"
    AFTER_BASE = "after_base"


# --- expressions ----------------------------------------------------------


@dataclass
class IntLit:
    value: int
    span: SourceSpan = field(compare=False)


@dataclass
class FloatLit:
    value: float
    span: SourceSpan = field(compare=False)


@dataclass
class StringLit:
    value: str
    span: SourceSpan = field(compare=False)


@dataclass
class BoolLit:
    value: bool
    span: SourceSpan = field(compare=False)


@dataclass
class NullLit:
    span: SourceSpan = field(compare=False)


@dataclass
class Ident:
    name: str
    span: SourceSpan = field(compare=False)


@dataclass
class BinaryOp:
    op: str
    left: "Expr"
    right: "Expr"
    span: SourceSpan = field(compare=False)


@dataclass
class UnaryOp:
    op: str  # "-" or "not"
    operand: "Expr"
    span: SourceSpan = field(compare=False)


@dataclass
class Call:
    callee: str
    args: Tuple["Expr", ...]
    span: SourceSpan = field(compare=False)
    site_id: Optional[int] = field(default=None, compare=False, repr=False)


@dataclass
class MethodCall:
    receiver: "Expr"
    name: str
    args: Tuple["Expr", ...]
    span: SourceSpan = field(compare=False)
    site_id: Optional[int] = field(default=None, compare=False, repr=False)


@dataclass
class Proceed:
    args: Tuple["Expr", ...]
    span: SourceSpan = field(compare=False)


@dataclass
class LayerAnnotation:
    # (context name, meta value) pairs in declared order
    constraints: Tuple[Tuple[str, str], ...]
    mode: LayerMode
    span: SourceSpan = field(compare=False)


@dataclass
class Lambda:
    params: Tuple[str, ...]
    annotation: Optional[LayerAnnotation]
    body: Union["Block", "Expr"]  # an Expr body means the compact "->" form
    span: SourceSpan = field(compare=False)


# --- statements -----------------------------------------------------------


@dataclass
class LetStmt:
    name: str
    value: "Expr"
    span: SourceSpan = field(compare=False)


@dataclass
class AssignStmt:
    name: str
    value: "Expr"
    span: SourceSpan = field(compare=False)


@dataclass
class ReturnStmt:
    value: Optional["Expr"]
    span: SourceSpan = field(compare=False)


@dataclass
class IfStmt:
    cond: "Expr"
    then: "Block"
    orelse: Optional[Union["Block", "IfStmt"]]
    span: SourceSpan = field(compare=False)


@dataclass
class WhileStmt:
    cond: "Expr"
    body: "Block"
    span: SourceSpan = field(compare=False)


@dataclass
class ExprStmt:
    expr: "Expr"
    span: SourceSpan = field(compare=False)


@dataclass
class Block:
    stmts: Tuple["Stmt", ...]
    span: SourceSpan = field(compare=False)


# --- declarations ----------------------------------------------------------


@dataclass
class FunctionDecl:
    name: str
    fn: Lambda
    span: SourceSpan = field(compare=False)


@dataclass
class ContextDecl:
    ctors: Tuple[str, ...]
    span: SourceSpan = field(compare=False)


@dataclass
class ModuleAst:
    name: str
    context_decl: Optional[ContextDecl]
    decls: Tuple[FunctionDecl, ...]
    span: SourceSpan = field(compare=False)


Expr = Union[
    IntLit, FloatLit, StringLit, BoolLit, NullLit,
    Ident, BinaryOp, UnaryOp, Call, MethodCall, Proceed, Lambda,
]

Stmt = Union[LetStmt, AssignStmt, ReturnStmt, IfStmt, WhileStmt, ExprStmt, Block]

Node = Union[Expr, Stmt, LayerAnnotation, FunctionDecl, ContextDecl, ModuleAst]

NODE_TYPES = (
    IntLit, FloatLit, StringLit, BoolLit, NullLit,
    Ident, BinaryOp, UnaryOp, Call, MethodCall, Proceed, Lambda,
    LayerAnnotation,
    LetStmt, AssignStmt, ReturnStmt, IfStmt, WhileStmt, ExprStmt, Block,
    FunctionDecl, ContextDecl, ModuleAst,
)


def walk(node: Node) -> Iterator[Node]:
    """Yield ``node`` and every AST node nested anywhere beneath it."""
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        for f in fields(current):
            value = getattr(current, f.name)
            if isinstance(value, NODE_TYPES):
                stack.append(value)
            elif isinstance(value, tuple):
                stack.extend(v for v in value if isinstance(v, NODE_TYPES))


def walk_same_function(node: Node) -> Iterator[Node]:
    """Like :func:`walk`, but does not descend into nested lambdas."""
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        for f in fields(current):
            value = getattr(current, f.name)
            if isinstance(value, NODE_TYPES) and not isinstance(value, Lambda):
                stack.append(value)
            elif isinstance(value, tuple):
                stack.extend(
                    v for v in value
                    if isinstance(v, NODE_TYPES) and not isinstance(v, Lambda)
                )


def is_compact(lam: Lambda) -> bool:
    """True for the single-expression ``-> expr`` body form."""
    return not isinstance(lam.body, Block)
