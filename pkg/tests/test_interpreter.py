from __future__ import annotations

import time

import pytest

from congo.decision import (
    CountingDecisionMaker,
    DecisionMaker,
    DecisionResponse,
    DefaultDecisionMaker,
    register_decision_maker,
    unregister_decision_maker,
)
from congo.errors import (
    CallArityError,
    CongoTypeError,
    DecisionFailedError,
    DecisionTimeoutError,
    DivisionByZeroError,
    MissingBaseError,
    NoApplicableVariantError,
    ProceedExhaustedError,
    RedefinitionError,
    UnknownContextError,
    UnknownDecisionMakerError,
    UnknownFunctionError,
    UnknownMethodError,
    UnknownVariableError,
)
from congo.interpreter import CachePolicy, DispatchMode, RunConfig, Runtime, run
from congo.lowering import compile_source

from helpers import run_program


def eval_expr(expr: str):
    result, _ = run_program(f"module m\nfunction main = || -> {expr}\n")
    return result


# --- values and operators ------------------------------------------------------


def test_arithmetic_entry():
    assert eval_expr("41 + 1") == 42


@pytest.mark.parametrize(
    "expr,expected",
    [
        ("1 + 2.5", 3.5),
        ("2 * 3.0", 6.0),
        ("7 / 2", 3),
        ("7.0 / 2", 3.5),
        ("(0 - 7) / 2", -4),  # integer division floors
        ("7 % 3", 1),
        ("2 * 3 + 4", 10),
        ("2 + 3 * 4", 14),
        ("(2 + 3) * 4", 20),
        ("0 - 5", -5),
    ],
)
def test_numeric_operators(expr, expected):
    result = eval_expr(expr)
    assert result == expected
    assert type(result) is type(expected)


@pytest.mark.parametrize("expr", ["1 / 0", "1 % 0", "1.0 / 0"])
def test_division_by_zero(expr):
    with pytest.raises(DivisionByZeroError):
        eval_expr(expr)


@pytest.mark.parametrize(
    "expr,expected",
    [
        ('"a" + "b"', "ab"),
        ('"n=" + 1', "n=1"),
        ('1 + "!"', "1!"),
        ('"flag=" + true', "flag=true"),
        ('"v=" + null', "v=null"),
        ('"pi=" + 3.5', "pi=3.5"),
    ],
)
def test_string_concatenation_stringifies(expr, expected):
    assert eval_expr(expr) == expected


@pytest.mark.parametrize(
    "expr,expected",
    [
        ("1 == 1.0", True),
        ("1 == true", False),  # booleans never equal numbers
        ("true == true", True),
        ("null == null", True),
        ('"a" == "a"', True),
        ('"a" != "b"', True),
        ('"b" < "c"', True),
        ("2 <= 2", True),
        ("3 > 2.5", True),
        ("not false", True),
        ("null == 0", False),
    ],
)
def test_comparisons(expr, expected):
    assert eval_expr(expr) is expected


@pytest.mark.parametrize("expr", ['1 + null', '"a" < 1', "true + true", "-true"])
def test_operator_type_errors(expr):
    with pytest.raises(CongoTypeError):
        eval_expr(expr)


def test_boolean_operators_short_circuit():
    src = (
        "module m\n"
        "function boom = || -> 1 / 0\n"
        "function main = || -> false && boom() == 1 || true\n"
    )
    result, _ = run_program(src)
    assert result is True


def test_condition_must_be_boolean():
    with pytest.raises(CongoTypeError):
        run_program("module m\nfunction main = || { if 1 { return 2 } }\n")


# --- statements, scoping, closures ------------------------------------------------


def test_while_loop_and_assignment():
    src = (
        "module m\n"
        "function main = || {\n"
        "  let i = 0\n"
        "  let acc = 0\n"
        "  while i < 5 {\n"
        "    acc = acc + i\n"
        "    i = i + 1\n"
        "  }\n"
        "  return acc\n"
        "}\n"
    )
    assert run_program(src)[0] == 10


def test_else_if_dispatching():
    src = (
        "module m\n"
        "function grade = |n| {\n"
        "  if n < 10 { return \"low\" }\n"
        "  else if n < 100 { return \"mid\" }\n"
        "  else { return \"high\" }\n"
        "}\n"
        "function main = || -> grade(5) + grade(50) + grade(500)\n"
    )
    assert run_program(src)[0] == "lowmidhigh"


def test_block_scope_shadows_then_restores():
    src = (
        "module m\n"
        "function main = || {\n"
        "  let x = 1\n"
        "  if true {\n"
        "    let x = 2\n"
        "    x = x + 10\n"
        "  }\n"
        "  return x\n"
        "}\n"
    )
    assert run_program(src)[0] == 1


def test_assignment_reaches_enclosing_scope():
    src = (
        "module m\n"
        "function main = || {\n"
        "  let x = 1\n"
        "  if true { x = 99 }\n"
        "  return x\n"
        "}\n"
    )
    assert run_program(src)[0] == 99


def test_assignment_to_undefined_variable():
    with pytest.raises(UnknownVariableError):
        run_program("module m\nfunction main = || { y = 1 }\n")


def test_unknown_variable_read():
    with pytest.raises(UnknownVariableError):
        eval_expr("mystery")


def test_missing_return_gives_null():
    src = "module m\nfunction main = || { let x = 1 }\n"
    assert run_program(src)[0] is None


def test_bare_return():
    src = "module m\nfunction main = || { return }\n"
    assert run_program(src)[0] is None


def test_lambda_values_and_closures():
    src = (
        "module m\n"
        "function main = || {\n"
        "  let n = 10\n"
        "  let add = |x| -> x + n\n"
        "  let bump = || { n = n + 1 }\n"
        "  bump()\n"
        "  return add(5)\n"
        "}\n"
    )
    assert run_program(src)[0] == 16


def test_recursion():
    src = (
        "module m\n"
        "function fib = |n| {\n"
        "  if n < 2 { return n }\n"
        "  return fib(n - 1) + fib(n - 2)\n"
        "}\n"
        "function main = || -> fib(10)\n"
    )
    assert run_program(src)[0] == 55


def test_entry_with_arguments():
    src = "module m\nfunction double = |x| -> x * 2\n"
    assert run_program(src, entry="double", args=(21,))[0] == 42


def test_missing_entry_function():
    with pytest.raises(UnknownFunctionError):
        run_program("module m\nfunction f = || -> 1\n")


def test_call_arity_checked():
    with pytest.raises(CallArityError):
        run_program("module m\nfunction f = |a, b| -> a\nfunction main = || -> f(1)\n")


def test_calling_a_non_function_value():
    with pytest.raises(CongoTypeError):
        run_program("module m\nfunction main = || { let x = 5 return x(1) }\n")


def test_runtime_errors_carry_span_and_call_stack():
    src = "module m\nfunction inner = |x| -> x / 0\nfunction main = || -> inner(3)\n"
    with pytest.raises(DivisionByZeroError) as err:
        run_program(src)
    assert err.value.span is not None
    assert err.value.span.line == 2
    names = [name for name, _ in err.value.call_stack]
    assert names == ["main", "inner"]


def test_println_stringifies(capsys=None):
    src = (
        "module m\n"
        "function main = || {\n"
        "  println(true)\n"
        "  println(null)\n"
        "  println(3.5)\n"
        "  println(\"text\")\n"
        "}\n"
    )
    _, output = run_program(src)
    assert output == ["true", "null", "3.5", "text"]


# --- dynamic objects ----------------------------------------------------------------


def test_properties_read_write_and_chain():
    src = (
        "module m\n"
        "function main = || {\n"
        "  let o = DynamicObject(): x(1): y(2)\n"
        "  o: x(o: x() + 10)\n"
        "  return \"\" + o: x() + \",\" + o: y()\n"
        "}\n"
    )
    assert run_program(src)[0] == "11,2"


def test_reading_a_missing_property():
    src = "module m\nfunction main = || -> DynamicObject(): ghost()\n"
    with pytest.raises(UnknownMethodError):
        run_program(src)


def test_method_call_on_non_object():
    with pytest.raises(CongoTypeError):
        run_program("module m\nfunction main = || -> 5: x()\n")


def test_define_binds_this_to_receiver():
    src = (
        "module m\n"
        "function main = || {\n"
        "  let o = DynamicObject(): label(\"box\")\n"
        "  o: define(\"tag\", |this, suffix| -> this: label() + suffix)\n"
        "  return o: tag(\"!\")\n"
        "}\n"
    )
    assert run_program(src)[0] == "box!"


def test_define_duplicate_base_method():
    src = (
        "module m\n"
        "function main = || {\n"
        "  let o = DynamicObject()\n"
        "  o: define(\"f\", |this| -> 1)\n"
        "  o: define(\"f\", |this| -> 2)\n"
        "}\n"
    )
    with pytest.raises(RedefinitionError):
        run_program(src)


def test_define_rejects_reserved_names():
    src = (
        "module m\n"
        "function main = || {\n"
        "  DynamicObject(): define(\"contexts\", |this| -> 1)\n"
        "}\n"
    )
    with pytest.raises(RedefinitionError):
        run_program(src)


def test_method_arity_includes_receiver():
    src = (
        "module m\n"
        "function main = || {\n"
        "  let o = DynamicObject()\n"
        "  o: define(\"f\", |this, a| -> a)\n"
        "  return o: f(1, 2)\n"
        "}\n"
    )
    with pytest.raises(CallArityError):
        run_program(src)


def test_decisionmaker_requires_a_maker_value():
    src = (
        "module m\n"
        "function main = || { DynamicObject(): decisionmaker(42) }\n"
    )
    with pytest.raises(CongoTypeError):
        run_program(src)


def test_contexts_override_must_name_declared_contexts():
    src = (
        "module m\n"
        "contexts = [Weather()]\n"
        "function main = || { DynamicObject(): contexts(\"Battery\") }\n"
    )
    with pytest.raises(UnknownContextError):
        run_program(src)


# --- proceed semantics -----------------------------------------------------------------


LAYERED = (
    "module m\n"
    "contexts = [Weather()]\n"
    "function f = |dir| -> 10\n"
    "function f = |dir| @(Weather=RAINY) -> proceed(dir) + 1\n"
    "function main = |d| -> f(d)\n"
)


def test_replace_layer_proceed_plus_one():
    result, _ = run_program(
        LAYERED, entry="main", args=(0,), initial=[("Weather", "rainfall_mm", 7.0)]
    )
    assert result == 11


def test_ineligible_layer_behaves_like_plain_call():
    result, _ = run_program(LAYERED, entry="main", args=(0,))
    assert result == 10


def test_proceed_without_args_forwards_originals():
    src = (
        "module m\n"
        "contexts = [Weather()]\n"
        "function f = |x| -> x * 2\n"
        "function f = |x| @(Weather=RAINY) -> proceed()\n"
        "function main = || -> f(21)\n"
    )
    result, _ = run_program(src, initial=[("Weather", "rainfall_mm", 9.0)])
    assert result == 42


def test_proceed_with_replacement_argument():
    src = (
        "module m\n"
        "contexts = [Weather()]\n"
        "function f = |x| -> x\n"
        "function f = |x| @(Weather=RAINY) -> proceed(x * 100)\n"
        "function main = || -> f(3)\n"
    )
    result, _ = run_program(src, initial=[("Weather", "rainfall_mm", 9.0)])
    assert result == 300


def test_base_calling_proceed_exhausts_the_chain():
    src = (
        "module m\n"
        "contexts = [Weather()]\n"
        "function f = |x| -> proceed()\n"
        "function f = |x| @(Weather=RAINY) -> proceed()\n"
        "function main = || -> f(1)\n"
    )
    with pytest.raises(ProceedExhaustedError):
        run_program(src, initial=[("Weather", "rainfall_mm", 9.0)])


def test_proceed_may_run_the_rest_of_the_chain_twice():
    src = (
        "module m\n"
        "contexts = [Weather()]\n"
        "function f = |x| { println(\"base\") return 1 }\n"
        "function f = |x| @(Weather=RAINY) -> proceed() + proceed()\n"
        "function main = || -> f(0)\n"
    )
    result, output = run_program(src, initial=[("Weather", "rainfall_mm", 9.0)])
    assert result == 2
    assert output == ["base", "base"]


def test_before_layer_effects_first_value_discarded():
    src = (
        "module m\n"
        "contexts = [Weather()]\n"
        "function f = || { println(\"base\") return \"base\" }\n"
        "function f = || @(Weather=RAINY)+ -> println(\"layer\")\n"
        "function main = || -> f()\n"
    )
    result, output = run_program(src, initial=[("Weather", "rainfall_mm", 9.0)])
    assert result == "base"
    assert output == ["layer", "base"]


def test_after_layer_effects_last_value_kept():
    src = (
        "module m\n"
        "contexts = [Weather()]\n"
        "function f = || { println(\"base\") return \"base\" }\n"
        "function f = || +@(Weather=RAINY) { println(\"layer\") }\n"
        "function main = || -> f()\n"
    )
    result, output = run_program(src, initial=[("Weather", "rainfall_mm", 9.0)])
    assert result == "base"
    assert output == ["base", "layer"]


def test_explicit_return_in_before_body_short_circuits():
    # the desugaring appends `return proceed()` after the body, so a body
    # that returns on its own skips the rest of the chain entirely
    src = (
        "module m\n"
        "contexts = [Weather()]\n"
        "function f = || { println(\"base\") return \"base\" }\n"
        "function f = || @(Weather=RAINY)+ { return \"layer\" }\n"
        "function main = || -> f()\n"
    )
    result, output = run_program(src, initial=[("Weather", "rainfall_mm", 9.0)])
    assert result == "layer"
    assert output == []


def test_lifo_composition_of_eligible_layers():
    src = (
        "module m\n"
        "contexts = [Weather(), Battery()]\n"
        "function f = || { println(\"base\") return 0 }\n"
        "function f = || @(Weather=RAINY) { println(\"first\") return proceed() }\n"
        "function f = || @(Battery=LOW) { println(\"second\") return proceed() }\n"
        "function main = || -> f()\n"
    )
    _, output = run_program(
        src,
        initial=[("Weather", "rainfall_mm", 9.0), ("Battery", "charge_pct", 1.0)],
    )
    assert output == ["second", "first", "base"]


def test_proceed_inside_nested_plain_lambda_hits_the_barrier():
    src = (
        "module m\n"
        "contexts = [Weather()]\n"
        "function f = || -> 1\n"
        "function f = || @(Weather=RAINY) {\n"
        "  let helper = || -> proceed()\n"
        "  return helper()\n"
        "}\n"
        "function main = || -> f()\n"
    )
    with pytest.raises(ProceedExhaustedError):
        run_program(src, initial=[("Weather", "rainfall_mm", 9.0)])


def test_object_method_layers_dispatch_on_context():
    src = (
        "module m\n"
        "contexts = [ConfusedHero()]\n"
        "function main = || {\n"
        "  let hero = DynamicObject(): steps(0)\n"
        "  hero: define(\"move\", |this| {\n"
        "    this: steps(this: steps() + 1)\n"
        "    return \"ok\"\n"
        "  })\n"
        "  hero: define(\"move\", |this| @(ConfusedHero=TRUE) -> \"stumble\")\n"
        "  let before = hero: move()\n"
        "  setConcrete(\"ConfusedHero\", \"confused\", true)\n"
        "  let after = hero: move()\n"
        "  return before + \"/\" + after + \"/\" + hero: steps()\n"
        "}\n"
    )
    assert run_program(src)[0] == "ok/stumble/1"


def test_object_layer_without_base_needs_replace():
    src = (
        "module m\n"
        "contexts = [ConfusedHero()]\n"
        "function main = || {\n"
        "  let o = DynamicObject()\n"
        "  o: define(\"f\", |this| @(ConfusedHero=TRUE)+ { println(\"pre\") })\n"
        "  return o: f()\n"
        "}\n"
    )
    with pytest.raises(MissingBaseError):
        run_program(src)


def test_replace_only_object_method_without_base():
    src = (
        "module m\n"
        "contexts = [ConfusedHero()]\n"
        "function main = || {\n"
        "  let o = DynamicObject()\n"
        "  o: define(\"f\", |this| @(ConfusedHero=TRUE) -> \"layered\")\n"
        "  return o: f()\n"
        "}\n"
    )
    result, _ = run_program(src, initial=[("ConfusedHero", "confused", True)])
    assert result == "layered"
    with pytest.raises(NoApplicableVariantError):
        run_program(src)


# --- dispatch modes and caching -------------------------------------------------------


COUNTED = (
    "module m\n"
    "contexts = [Weather()]\n"
    "function f = |x| -> x\n"
    "function f = |x| @(Weather=RAINY) -> proceed(x + 100)\n"
    "function main = || {\n"
    "  let i = 0\n"
    "  let acc = 0\n"
    "  while i < 20 {\n"
    "    acc = acc + f(i)\n"
    "    i = i + 1\n"
    "  }\n"
    "  return acc\n"
    "}\n"
)


def run_counted(mode, policy, initial=()):
    dm = CountingDecisionMaker(DefaultDecisionMaker())
    result, _ = run_program(
        COUNTED, mode=mode, policy=policy, decision_maker=dm, initial=initial
    )
    return result, dm


def test_event_and_direct_agree():
    event, _ = run_counted(DispatchMode.EVENT, CachePolicy.NONE)
    direct, _ = run_counted(DispatchMode.DIRECT, CachePolicy.NONE)
    assert event == direct == sum(range(20))


def test_policy_none_decides_every_call():
    _, dm = run_counted(DispatchMode.EVENT, CachePolicy.NONE)
    assert dm.decisions == 20
    _, dm = run_counted(DispatchMode.DIRECT, CachePolicy.NONE)
    assert dm.decisions == 20


def test_epoch_guard_decides_once_for_static_context():
    result_none, _ = run_counted(DispatchMode.EVENT, CachePolicy.NONE)
    result_guard, dm = run_counted(DispatchMode.EVENT, CachePolicy.EPOCH_GUARD)
    assert dm.decisions == 1
    assert result_guard == result_none


def test_epoch_guard_rebinds_after_store_writes():
    # one call site in a loop: decisions = 1 + number of epoch changes
    src = (
        "module m\n"
        "contexts = [Weather()]\n"
        "function f = |x| -> x\n"
        "function f = |x| @(Weather=RAINY) -> proceed(x + 100)\n"
        "function main = || {\n"
        "  let i = 0\n"
        "  let out = \"\"\n"
        "  while i < 6 {\n"
        "    out = out + f(1) + \",\"\n"
        "    if i == 2 { setConcrete(\"Weather\", \"rainfall_mm\", 9.0) }\n"
        "    i = i + 1\n"
        "  }\n"
        "  return out\n"
        "}\n"
    )
    dm = CountingDecisionMaker(DefaultDecisionMaker())
    result, _ = run_program(src, policy=CachePolicy.EPOCH_GUARD, decision_maker=dm)
    assert result == "1,1,1,101,101,101,"
    assert dm.decisions == 2


def test_each_call_site_binds_independently():
    src = (
        "module m\n"
        "contexts = [Weather()]\n"
        "function f = |x| -> x\n"
        "function f = |x| @(Weather=RAINY) -> proceed(x + 100)\n"
        "function main = || {\n"
        "  let a = f(1)\n"
        "  setConcrete(\"Weather\", \"rainfall_mm\", 9.0)\n"
        "  let b = f(1)\n"
        "  let c = f(1)\n"
        "  setConcrete(\"Weather\", \"rainfall_mm\", 0.0)\n"
        "  let d = f(1)\n"
        "  return \"\" + a + \",\" + b + \",\" + c + \",\" + d\n"
        "}\n"
    )
    dm = CountingDecisionMaker(DefaultDecisionMaker())
    result, _ = run_program(src, policy=CachePolicy.EPOCH_GUARD, decision_maker=dm)
    assert result == "1,101,101,1"
    # four textual sites, each pays its own first decision
    assert dm.decisions == 4


def test_epoch_guard_distinguishes_receivers():
    src = (
        "module m\n"
        "contexts = [ConfusedHero()]\n"
        "function tag = |o, label| {\n"
        "  o: define(\"who\", |this| -> label)\n"
        "  return o\n"
        "}\n"
        "function main = || {\n"
        "  let a = tag(DynamicObject(), \"a\")\n"
        "  let b = tag(DynamicObject(), \"b\")\n"
        "  a: define(\"who\", |this| @(ConfusedHero=TRUE) -> \"?\" )\n"
        "  b: define(\"who\", |this| @(ConfusedHero=TRUE) -> \"??\" )\n"
        "  let i = 0\n"
        "  let out = \"\"\n"
        "  while i < 3 {\n"
        "    out = out + a: who() + b: who()\n"
        "    i = i + 1\n"
        "  }\n"
        "  return out\n"
        "}\n"
    )
    result, _ = run_program(
        src,
        policy=CachePolicy.EPOCH_GUARD,
        initial=[("ConfusedHero", "confused", True)],
    )
    assert result == "???" * 3


def test_defining_a_layer_invalidates_cached_chains():
    src = (
        "module m\n"
        "contexts = [ConfusedHero()]\n"
        "function main = || {\n"
        "  let o = DynamicObject()\n"
        "  o: define(\"f\", |this| -> \"base\")\n"
        "  o: define(\"f\", |this| @(ConfusedHero=FALSE) -> \"calm\")\n"
        "  let first = o: f()\n"
        "  o: define(\"f\", |this| @(ConfusedHero=FALSE, ConfusedHero2=X) -> \"never\")\n"
        "  return first + \"/\" + o: f()\n"
        "}\n"
    )
    # second define bumps the object version, so the site re-decides even
    # though the store epoch is unchanged
    with pytest.raises(UnknownContextError):
        run_program(src, policy=CachePolicy.EPOCH_GUARD)


def test_version_bump_via_new_method_redecides():
    src = (
        "module m\n"
        "contexts = [ConfusedHero()]\n"
        "function main = || {\n"
        "  let o = DynamicObject()\n"
        "  o: define(\"f\", |this| -> \"base\")\n"
        "  o: define(\"f\", |this| @(ConfusedHero=TRUE) -> \"layered\")\n"
        "  let first = o: f()\n"
        "  o: define(\"g\", |this| -> 0)\n"
        "  return first + \"/\" + o: f()\n"
        "}\n"
    )
    dm = CountingDecisionMaker(DefaultDecisionMaker())
    result, _ = run_program(
        src,
        policy=CachePolicy.EPOCH_GUARD,
        decision_maker=dm,
        initial=[("ConfusedHero", "confused", True)],
    )
    assert result == "layered/layered"
    assert dm.decisions == 2


def test_per_object_decision_maker_overrides_global():
    src = (
        "module m\n"
        "contexts = [ConfusedHero()]\n"
        "function build = |withOwn| {\n"
        "  let o = DynamicObject()\n"
        "  o: define(\"f\", |this| -> \"base\")\n"
        "  o: define(\"f\", |this| @(ConfusedHero=TRUE) -> \"layered\")\n"
        "  if withOwn {\n"
        "    o: decisionmaker(decisionMaker(\"counting\"))\n"
        "  }\n"
        "  return o\n"
        "}\n"
        "function main = |withOwn| -> build(withOwn): f()\n"
    )
    for mode in (DispatchMode.EVENT, DispatchMode.DIRECT):
        with_own = CountingDecisionMaker(DefaultDecisionMaker())
        result, _ = run_program(
            src, entry="main", args=(True,), mode=mode, decision_maker=with_own
        )
        assert result == "base"
        assert with_own.decisions == 0  # global maker never consulted

        fallback = CountingDecisionMaker(DefaultDecisionMaker())
        result, _ = run_program(
            src, entry="main", args=(False,), mode=mode, decision_maker=fallback
        )
        assert result == "base"
        assert fallback.decisions == 1


def test_contexts_override_narrows_eligibility():
    src = (
        "module m\n"
        "contexts = [Weather(), Battery()]\n"
        "function main = || {\n"
        "  let o = DynamicObject()\n"
        "  o: define(\"f\", |this| -> \"base\")\n"
        "  o: define(\"f\", |this| @(Weather=RAINY) -> \"wet\")\n"
        "  let before = o: f()\n"
        "  o: contexts(\"Battery\")\n"
        "  return before + \"/\" + o: f()\n"
        "}\n"
    )
    result, _ = run_program(src, initial=[("Weather", "rainfall_mm", 9.0)])
    assert result == "wet/base"


def test_plain_programs_stay_off_the_bus():
    src = (
        "module m\n"
        "function f = |x| -> x + 1\n"
        "function main = || -> f(1) + f(2)\n"
    )
    trace: list = []
    result, _ = run_program(src, trace=trace)
    assert result == 5
    assert trace == []


def test_contextual_calls_traverse_the_bus_in_event_mode():
    trace: list = []
    run_program(
        LAYERED, entry="main", args=(0,), trace=trace,
        initial=[("Weather", "rainfall_mm", 7.0)],
    )
    kinds = [line.split()[-1] for line in trace]
    assert kinds == ["InvocationRequest", "DecisionResponse"]


def test_direct_mode_skips_the_bus():
    trace: list = []
    run_program(
        LAYERED, entry="main", args=(0,), mode=DispatchMode.DIRECT, trace=trace,
        initial=[("Weather", "rainfall_mm", 7.0)],
    )
    assert trace == []


def test_set_concrete_then_current_meta():
    src = (
        "module m\n"
        "contexts = [Weather()]\n"
        "function main = || {\n"
        "  setConcrete(\"Weather\", \"rainfall_mm\", 7.0)\n"
        "  return currentMeta(\"Weather\")\n"
        "}\n"
    )
    assert run_program(src)[0] == "RAINY"


def test_current_meta_unknown_context():
    src = "module m\nfunction main = || -> currentMeta(\"Weather\")\n"
    with pytest.raises(UnknownContextError):
        run_program(src)


def test_set_concrete_rejects_non_scalar_key():
    src = "module m\nfunction main = || { setConcrete(\"C\", 1, 2) }\n"
    with pytest.raises(CongoTypeError):
        run_program(src)


# --- decision failure paths ----------------------------------------------------------


class _Crashing(DecisionMaker):
    def decide(self, request):
        raise RuntimeError("model offline")


class _Sleepy(DecisionMaker):
    def decide(self, request):
        time.sleep(0.3)
        return DefaultDecisionMaker().decide(request)


class _Scrambling(DecisionMaker):
    """Returns the right variants in an illegal order."""

    def decide(self, request):
        good = DefaultDecisionMaker().decide(request)
        return DecisionResponse(good.request_id, tuple(reversed(good.chain)), good.epoch)


def contextual_args():
    return dict(
        entry="main", args=(0,), initial=[("Weather", "rainfall_mm", 7.0)]
    )


@pytest.mark.parametrize("mode", [DispatchMode.EVENT, DispatchMode.DIRECT])
def test_crashing_maker_surfaces_decision_failed(mode):
    with pytest.raises(DecisionFailedError) as err:
        run_program(LAYERED, mode=mode, decision_maker=_Crashing(), **contextual_args())
    assert "model offline" in str(err.value)


@pytest.mark.parametrize("mode", [DispatchMode.EVENT, DispatchMode.DIRECT])
def test_scrambled_chain_rejected_by_validation(mode):
    with pytest.raises(DecisionFailedError):
        run_program(
            LAYERED, mode=mode, decision_maker=_Scrambling(), **contextual_args()
        )


def test_slow_maker_times_out_in_event_mode():
    lowered = compile_source(LAYERED, file="<test>")
    config = RunConfig(
        decision_maker=_Sleepy(),
        decision_timeout=0.05,
        initial_values=(("Weather", "rainfall_mm", 7.0),),
        println=lambda s: None,
    )
    with pytest.raises(DecisionTimeoutError):
        run(lowered, entry="main", args=(0,), config=config)


def test_unknown_decision_maker_name_fails_at_start():
    with pytest.raises(UnknownDecisionMakerError):
        run_program(LAYERED, decision_maker="nope", **contextual_args())


def test_named_decision_maker_resolved_from_registry():
    register_decision_maker("always-crash", _Crashing)
    try:
        with pytest.raises(DecisionFailedError):
            run_program(
                LAYERED, decision_maker="always-crash", **contextual_args()
            )
    finally:
        unregister_decision_maker("always-crash")


# --- runtime lifecycle -----------------------------------------------------------------


def test_runtime_reuse_across_calls():
    src = (
        "module m\n"
        "function bump = |x| -> x + 1\n"
    )
    lowered = compile_source(src, file="<test>")
    with Runtime(lowered, RunConfig()) as runtime:
        assert runtime.call("bump", (1,)) == 2
        assert runtime.call("bump", (41,)) == 42
    assert runtime.bus.closed


def test_run_shuts_the_bus_down_even_on_errors():
    src = "module m\nfunction main = || -> 1 / 0\n"
    lowered = compile_source(src, file="<test>")
    runtime = Runtime(lowered, RunConfig())
    runtime.start()
    try:
        with pytest.raises(DivisionByZeroError):
            runtime.call("main")
    finally:
        runtime.shutdown()
    assert runtime.bus.closed
