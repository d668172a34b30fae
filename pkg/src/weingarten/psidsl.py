"""Prescribed-curvature expressions over the Gauss-map components.

Expressions are written in the variables nx, ny, nz (the ambient components
of the unit normal), numeric literals, the operators + - * / ^ with the
usual precedence (^ right-associative, unary minus below ^), and the
functions exp, log, sin, cos, sqrt, abs, min, max.  A recursive-descent
parser produces an immutable tree; evaluation is vectorized over numpy
arrays and a forward-mode dual pass yields exact ambient gradients.

abs/min/max parse fine but are rejected by the gradient path unless
explicitly allowed, since the solver needs one continuous derivative.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PsiExpr", "PsiSyntaxError", "PsiEvalError", "PsiPositivityError",
    "NonSmoothExpressionError", "parse", "to_text", "evaluate",
    "eval_with_gradient", "sphere_samples", "positivity_scan",
]

VARIABLES = ("nx", "ny", "nz")
_UNARY_FUNCS = ("exp", "log", "sin", "cos", "sqrt", "abs")
_BINARY_FUNCS = ("min", "max")
_NONSMOOTH = ("abs", "min", "max")


class PsiSyntaxError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class PsiEvalError(ValueError):
    pass


class PsiPositivityError(ValueError):
    pass


class NonSmoothExpressionError(ValueError):
    pass


@dataclass(frozen=True)
class PsiExpr:
    """One node of the expression tree."""

    kind: str                  # "num" | "var" | "neg" | "bin" | "call"
    value: float = 0.0
    name: str = ""
    args: tuple = ()
    offset: int = 0

    @property
    def has_nonsmooth(self) -> bool:
        if self.kind == "call" and self.name in _NONSMOOTH:
            return True
        return any(a.has_nonsmooth for a in self.args)


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            at = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise PsiSyntaxError(f"unexpected character {text[at]!r}", at)
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.lastgroup == "ident":
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, val, off = self.peek()
        if kind != "op" or val != op:
            raise PsiSyntaxError(f"expected {op!r}", off)
        return self.next()

    def parse(self) -> PsiExpr:
        expr = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise PsiSyntaxError(f"unexpected token {val!r}", off)
        return expr

    def expr(self) -> PsiExpr:
        node = self.term()
        while True:
            kind, val, off = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                rhs = self.term()
                node = PsiExpr("bin", name=val, args=(node, rhs), offset=off)
            else:
                return node

    def term(self) -> PsiExpr:
        node = self.unary()
        while True:
            kind, val, off = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                rhs = self.unary()
                node = PsiExpr("bin", name=val, args=(node, rhs), offset=off)
            else:
                return node

    def unary(self) -> PsiExpr:
        kind, val, off = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return PsiExpr("neg", args=(self.unary(),), offset=off)
        return self.power()

    def power(self) -> PsiExpr:
        base = self.atom()
        kind, val, off = self.peek()
        if kind == "op" and val == "^":
            self.next()
            exponent = self.unary()  # right associative, allows 2^-3
            return PsiExpr("bin", name="^", args=(base, exponent), offset=off)
        return base

    def atom(self) -> PsiExpr:
        kind, val, off = self.next()
        if kind == "num":
            return PsiExpr("num", value=float(val), offset=off)
        if kind == "ident":
            if val in VARIABLES:
                return PsiExpr("var", name=val, offset=off)
            if val in _UNARY_FUNCS or val in _BINARY_FUNCS:
                self.expect_op("(")
                args = [self.expr()]
                while True:
                    k2, v2, o2 = self.peek()
                    if k2 == "op" and v2 == ",":
                        self.next()
                        args.append(self.expr())
                    else:
                        break
                self.expect_op(")")
                want = 2 if val in _BINARY_FUNCS else 1
                if len(args) != want:
                    raise PsiSyntaxError(f"{val} takes {want} argument(s)", off)
                return PsiExpr("call", name=val, args=tuple(args), offset=off)
            raise PsiSyntaxError(f"unknown identifier {val!r}", off)
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise PsiSyntaxError("expected a value", off)


def parse(text: str) -> PsiExpr:
    """Parse an expression; raises PsiSyntaxError with a byte offset."""
    return _Parser(text).parse()


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def to_text(expr: PsiExpr, _parent_prec: int = 0) -> str:
    """Render a tree back to parseable text."""
    if expr.kind == "num":
        return repr(expr.value)
    if expr.kind == "var":
        return expr.name
    if expr.kind == "neg":
        inner = to_text(expr.args[0], 3)
        out = f"-{inner}"
        return f"({out})" if _parent_prec > 3 else out
    if expr.kind == "call":
        return f"{expr.name}({', '.join(to_text(a) for a in expr.args)})"
    prec = _PREC[expr.name]
    if expr.name == "^":  # right associative
        left = to_text(expr.args[0], prec + 1)
        right = to_text(expr.args[1], prec)
    else:
        left = to_text(expr.args[0], prec)
        right = to_text(expr.args[1], prec + 1)
    out = f"{left} {expr.name} {right}"
    return f"({out})" if prec < _parent_prec else out


def _eval(expr: PsiExpr, env: dict, dual: bool, allow_nonsmooth: bool):
    """Evaluate; returns value or (value, d/d(nx,ny,nz) stacked last axis)."""
    if expr.kind == "num":
        v = np.asarray(expr.value, dtype=float)
        return (v, np.zeros(np.shape(v) + (3,))) if dual else v
    if expr.kind == "var":
        v = env[expr.name]
        if not dual:
            return v
        g = np.zeros(np.shape(v) + (3,))
        g[..., VARIABLES.index(expr.name)] = 1.0
        return v, g
    if expr.kind == "neg":
        if dual:
            v, g = _eval(expr.args[0], env, dual, allow_nonsmooth)
            return -v, -g
        return -_eval(expr.args[0], env, dual, allow_nonsmooth)
    if expr.kind == "bin":
        a = _eval(expr.args[0], env, dual, allow_nonsmooth)
        b = _eval(expr.args[1], env, dual, allow_nonsmooth)
        if not dual:
            return _apply_bin(expr, a, b)
        (va, ga), (vb, gb) = a, b
        if expr.name == "+":
            return va + vb, ga + gb
        if expr.name == "-":
            return va - vb, ga - gb
        if expr.name == "*":
            return va * vb, ga * vb[..., None] + gb * va[..., None]
        if expr.name == "/":
            _check_div(expr, vb)
            return va / vb, (ga * vb[..., None] - gb * va[..., None]) / vb[..., None] ** 2
        # power: constant exponents get the cheap rule, otherwise require a > 0
        v = _apply_bin(expr, va, vb)
        if expr.args[1].kind == "num":
            c = expr.args[1].value
            dv = c * _safe_pow(expr, va, c - 1.0)
            return v, ga * dv[..., None]
        dv_da = vb * np.power(va, vb - 1.0)
        dv_db = v * np.log(va)
        return v, ga * dv_da[..., None] + gb * dv_db[..., None]
    # calls
    if expr.name in _NONSMOOTH and dual and not allow_nonsmooth:
        raise NonSmoothExpressionError(
            f"{expr.name} has no continuous derivative; a smooth expression is "
            f"required here (offset {expr.offset})")
    if expr.name in _BINARY_FUNCS:
        a = _eval(expr.args[0], env, dual, allow_nonsmooth)
        b = _eval(expr.args[1], env, dual, allow_nonsmooth)
        if not dual:
            return np.minimum(a, b) if expr.name == "min" else np.maximum(a, b)
        (va, ga), (vb, gb) = a, b
        take_a = (va <= vb) if expr.name == "min" else (va >= vb)
        v = np.where(take_a, va, vb)
        g = np.where(take_a[..., None], ga, gb)
        return v, g
    arg = _eval(expr.args[0], env, dual, allow_nonsmooth)
    if not dual:
        return _apply_func(expr, arg)
    va, ga = arg
    v = _apply_func(expr, va)
    if expr.name == "exp":
        dv = v
    elif expr.name == "log":
        dv = 1.0 / va
    elif expr.name == "sin":
        dv = np.cos(va)
    elif expr.name == "cos":
        dv = -np.sin(va)
    elif expr.name == "sqrt":
        dv = 0.5 / v
    else:  # abs, allowed explicitly
        dv = np.sign(va)
    return v, ga * dv[..., None]


def _check_domain(expr, ok, message):
    if not np.all(ok):
        raise PsiEvalError(f"{message} (offset {expr.offset})")


def _check_div(expr, vb):
    _check_domain(expr, vb != 0, "division by zero")


def _safe_pow(expr, base, p):
    if p == int(p) or not np.any(base < 0):
        with np.errstate(divide="raise", invalid="raise"):
            try:
                return np.power(base, p)
            except FloatingPointError:
                raise PsiEvalError(f"invalid power (offset {expr.offset})") from None
    raise PsiEvalError(f"negative base with fractional exponent (offset {expr.offset})")


def _apply_bin(expr, a, b):
    if expr.name == "+":
        return a + b
    if expr.name == "-":
        return a - b
    if expr.name == "*":
        return a * b
    if expr.name == "/":
        _check_div(expr, b)
        return a / b
    if expr.args[1].kind == "num":
        return _safe_pow(expr, a, expr.args[1].value)
    _check_domain(expr, a > 0, "base of ^ must be positive")
    return np.power(a, b)


def _apply_func(expr, a):
    if expr.name == "exp":
        return np.exp(a)
    if expr.name == "log":
        _check_domain(expr, a > 0, "log of a nonpositive value")
        return np.log(a)
    if expr.name == "sin":
        return np.sin(a)
    if expr.name == "cos":
        return np.cos(a)
    if expr.name == "sqrt":
        _check_domain(expr, a >= 0, "sqrt of a negative value")
        return np.sqrt(a)
    return np.abs(a)


def evaluate(expr: PsiExpr, eta: np.ndarray) -> np.ndarray:
    """psi at unit vectors ``eta`` (shape (..., 3)); vectorized."""
    eta = np.asarray(eta, dtype=float)
    env = {"nx": eta[..., 0], "ny": eta[..., 1], "nz": eta[..., 2]}
    out = np.asarray(_eval(expr, env, dual=False, allow_nonsmooth=True), dtype=float)
    if out.shape != eta.shape[:-1]:  # constant subtrees collapse the batch shape
        out = np.broadcast_to(out, eta.shape[:-1]).copy()
    return out


def eval_with_gradient(expr: PsiExpr, eta: np.ndarray,
                       allow_nonsmooth: bool = False):
    """psi(eta) and its gradient projected tangent to the sphere at eta.

    ``eta`` must be unit within 1e-9.  Raises PsiPositivityError if psi is
    not strictly positive at any evaluation point.
    """
    eta = np.asarray(eta, dtype=float)
    norms = np.sqrt(np.einsum("...i,...i->...", eta, eta))
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise ValueError("eta must be a unit vector (within 1e-9)")
    env = {"nx": eta[..., 0], "ny": eta[..., 1], "nz": eta[..., 2]}
    value, grad = _eval(expr, env, dual=True, allow_nonsmooth=allow_nonsmooth)
    value = np.asarray(value, dtype=float)
    grad = np.broadcast_to(grad, value.shape + (3,)).copy()
    if np.any(value <= 0):
        raise PsiPositivityError(
            f"psi must be positive at every evaluation point (min {value.min():.6g})")
    radial = np.einsum("...i,...i->...", grad, eta)
    tangential = grad - radial[..., None] * eta
    return value, tangential


def sphere_samples(count: int) -> np.ndarray:
    """Deterministic quasi-uniform unit vectors (Fibonacci spiral)."""
    i = np.arange(count)
    z = 1.0 - 2.0 * (i + 0.5) / count
    phi = i * np.pi * (3.0 - np.sqrt(5.0))
    r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def positivity_scan(expr: PsiExpr, count: int = 1000):
    """Min of psi over a deterministic sphere sample; (min, argmin point)."""
    pts = sphere_samples(count)
    vals = evaluate(expr, pts)
    worst = int(np.argmin(vals))
    return float(vals[worst]), pts[worst]
