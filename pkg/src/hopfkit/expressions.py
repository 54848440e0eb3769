"""Closed-form H and sigma from short expression strings.

Grammar: numbers, ``+ - * / ^`` (``**`` also accepted), parentheses, the
functions ``ln log exp sqrt abs min max`` and the constants ``pi e``. The
variable is ``p`` (or ``x``) in 1-D and ``p1..pn`` (or ``x1..xn``) otherwise.
Input is tokenized and checked against that whitelist before sympy sees it.
"""

from __future__ import annotations

import io
import tokenize

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

from .errors import ConfigurationError

_FUNCS = {
    "ln": sp.log,
    "log": sp.log,
    "exp": sp.exp,
    "sqrt": sp.sqrt,
    "abs": sp.Abs,
    "min": sp.Min,
    "max": sp.Max,
}
_CONSTS = {"pi": sp.pi, "e": sp.E}
_OPS = {"+", "-", "*", "/", "^", "**", "(", ")", ","}


def variable_names(letter: str, dim: int) -> list[str]:
    return [letter] if dim == 1 else [f"{letter}{i + 1}" for i in range(dim)]


def _check_tokens(text: str, allowed: set[str]):
    try:
        toks = list(tokenize.generate_tokens(io.StringIO(text).readline))
    except (tokenize.TokenError, IndentationError) as exc:
        raise ConfigurationError(f"cannot tokenize expression {text!r}: {exc}") from None
    for tok in toks:
        if tok.type in (tokenize.NEWLINE, tokenize.NL, tokenize.ENDMARKER):
            continue
        if tok.type == tokenize.NUMBER:
            if any(c in tok.string.lower() for c in "jx_o") or tok.string.lower().startswith("0b"):
                raise ConfigurationError(f"unsupported number literal {tok.string!r}")
            continue
        if tok.type == tokenize.NAME and tok.string in allowed:
            continue
        if tok.type == tokenize.OP and tok.string in _OPS:
            continue
        raise ConfigurationError(f"token {tok.string!r} not allowed in expression {text!r}")


class Expression:
    """A parsed scalar field of ``dim`` variables with a symbolic gradient.

    Instances are callables on arrays shaped ``(..., dim)``; ``grad`` returns
    the same leading shape with a trailing ``dim`` axis.
    """

    def __init__(self, text: str, dim: int, letters=("p", "x")):
        if not isinstance(text, str) or not text.strip():
            raise ConfigurationError("expression must be a non-empty string")
        self.text = text
        self.dim = int(dim)
        names = None
        for letter in letters:
            cand = variable_names(letter, self.dim)
            if any(_mentions(text, nm) for nm in cand):
                names = cand
                break
        names = names or variable_names(letters[0], self.dim)
        _check_tokens(text, set(names) | set(_FUNCS) | set(_CONSTS))
        self.symbols = sp.symbols(names, real=True)
        local = dict(zip(names, self.symbols))
        local.update(_FUNCS)
        local.update(_CONSTS)
        try:
            self.expr = parse_expr(text, local_dict=local, global_dict={"__builtins__": {},
                                                                          **_sympy_globals()},
                                   transformations=standard_transformations + (convert_xor,))
        except (SyntaxError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"cannot parse expression {text!r}: {exc}") from None
        self.gradient = [sp.diff(self.expr, s) for s in self.symbols]
        self._f = sp.lambdify(self.symbols, self.expr, "numpy")
        self._g = [sp.lambdify(self.symbols, g, "numpy") for g in self.gradient]

    def __repr__(self):
        return f"Expression({self.text!r}, dim={self.dim})"

    def _args(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape[-1:] != (self.dim,):
            z = z.reshape(*z.shape, 1) if self.dim == 1 else z
        return z, [z[..., i] for i in range(self.dim)]

    def __call__(self, z):
        z, args = self._args(z)
        with np.errstate(all="ignore"):
            out = self._f(*args)
        return np.broadcast_to(np.asarray(out, dtype=float), z.shape[:-1]).copy()

    def grad(self, z):
        z, args = self._args(z)
        with np.errstate(all="ignore"):
            cols = [np.broadcast_to(np.asarray(g(*args), dtype=float), z.shape[:-1]) for g in self._g]
        return np.stack(cols, axis=-1)


def _mentions(text, name):
    try:
        toks = tokenize.generate_tokens(io.StringIO(text).readline)
        return any(t.type == tokenize.NAME and t.string == name for t in toks)
    except tokenize.TokenError:
        return False


def _sympy_globals():
    # parse_expr needs these names for the auto-number and symbol wrappers
    return {"Integer": sp.Integer, "Float": sp.Float, "Rational": sp.Rational,
            "Symbol": sp.Symbol}
