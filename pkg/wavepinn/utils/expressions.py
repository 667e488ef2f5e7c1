"""
Small expression grammar for declarative problems, backed by sympy.

Expressions use the coordinates x1..xd, time t and (forcing only) the field value u,
the operators + - * / ** and the functions sin, cos, exp, sqrt, erf plus the constant pi.
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

from wavepinn.errors import ConfigError

logger = logging.getLogger(__name__)

ALLOWED_FUNCTIONS = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp, "sqrt": sp.sqrt, "erf": sp.erf}
_LAMBDIFY_MODULES = ["scipy", "numpy"]


def coordinate_symbols(dim: int) -> Tuple[List[sp.Symbol], sp.Symbol, sp.Symbol]:
    xs = [sp.Symbol(f"x{i + 1}", real=True) for i in range(dim)]
    return xs, sp.Symbol("t", real=True), sp.Symbol("u", real=True)


def parse_expression(text: str, dim: int, allow_u: bool = False, key: str = "expression") -> sp.Expr:
    """Parse and validate one expression; ConfigError names the offending key."""
    xs, t, u = coordinate_symbols(dim)
    local_dict: Dict[str, object] = {s.name: s for s in xs}
    local_dict["t"] = t
    local_dict["pi"] = sp.pi
    local_dict.update(ALLOWED_FUNCTIONS)
    if allow_u:
        local_dict["u"] = u
    try:
        expr = parse_expr(str(text), local_dict=local_dict, transformations=standard_transformations)
    except Exception as e:
        raise ConfigError(f"{key}: cannot parse expression {text!r} ({e})")

    allowed = set(xs) | {t} | ({u} if allow_u else set())
    unknown = expr.free_symbols - allowed
    if unknown:
        names = ", ".join(sorted(s.name for s in unknown))
        raise ConfigError(f"{key}: unknown symbol(s) {names} in {text!r}")
    for func in expr.atoms(sp.Function):
        if func.func not in ALLOWED_FUNCTIONS.values():
            raise ConfigError(f"{key}: function {func.func.__name__} is not supported in {text!r}")
    return expr


class CompiledExpression:
    """Vectorized numpy callable of a parsed expression."""

    def __init__(self, expr: sp.Expr, dim: int, with_u: bool = False, source: Optional[str] = None):
        self.expr = expr
        self.dim = dim
        self.with_u = with_u
        self.source = source if source is not None else str(expr)
        xs, t, u = coordinate_symbols(dim)
        args = [*xs, t] + ([u] if with_u else [])
        self._fn = sp.lambdify(args, expr, modules=_LAMBDIFY_MODULES)

    def __call__(self, x: np.ndarray, t: Optional[np.ndarray] = None, u: Optional[np.ndarray] = None) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = len(x)
        t = np.zeros(n) if t is None else np.broadcast_to(np.asarray(t, dtype=float), (n,))
        args = [x[:, i] for i in range(self.dim)] + [t]
        if self.with_u:
            args.append(np.zeros(n) if u is None else np.broadcast_to(np.asarray(u, dtype=float), (n,)))
        value = self._fn(*args)
        # constant expressions come back as scalars
        return np.array(np.broadcast_to(np.asarray(value, dtype=float), (n,)))

    def __repr__(self) -> str:
        return f"CompiledExpression({self.source!r})"


def compile_expression(text: str, dim: int, allow_u: bool = False, key: str = "expression") -> CompiledExpression:
    expr = parse_expression(text, dim, allow_u=allow_u, key=key)
    return CompiledExpression(expr, dim, with_u=allow_u, source=str(text))


def derivative_in_u(compiled: CompiledExpression) -> Optional[CompiledExpression]:
    """df/du, or None when the expression does not depend on u."""
    _, _, u = coordinate_symbols(compiled.dim)
    if u not in compiled.expr.free_symbols:
        return None
    return CompiledExpression(sp.diff(compiled.expr, u), compiled.dim, with_u=True)


class SymbolicOracle:
    """Exact solution u(x, t) with symbolic gradient and diagonal second derivatives."""

    def __init__(self, text: str, dim: int, key: str = "exact"):
        expr = parse_expression(text, dim, key=key)
        xs, t, _ = coordinate_symbols(dim)
        variables: Sequence[sp.Symbol] = [*xs, t]
        self.dim = dim
        self.value = CompiledExpression(expr, dim, source=str(text))
        self.grad = [CompiledExpression(sp.diff(expr, v), dim) for v in variables]
        self.diag2 = [CompiledExpression(sp.diff(expr, v, 2), dim) for v in variables]

    def __call__(self, x: np.ndarray, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        u = self.value(x, t)
        grad = np.stack([g(x, t) for g in self.grad], axis=1)
        diag2 = np.stack([h(x, t) for h in self.diag2], axis=1)
        return u, grad, diag2
