"""Smooth maps as expression DAGs with batched order-2 forward jets.

A :class:`SmoothMap` holds one expression per output over the input
coordinates.  Evaluation is vectorized over a batch of points; ``jet``
returns values, gradients and Hessians computed in forward mode.  Cut-off
functions, the chart/subset data of the pairs (:class:`PairSpec`) and the
sampling verifiers for maps of pairs and homotopies live here too.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .report import TOL_EXACT, TOL_FD, VerificationReport

DIV_GUARD = 1e-300
PIECEWISE_TOL = 1e-9
HOMOTOPY_GRID = 33
FD_STEP = 1e-4
RIDDERS_STEP = 1e-3  # first step of the extrapolation tableau


class DomainError(ValueError):
    """Evaluation left the domain of a guarded primitive."""


# -- expressions -------------------------------------------------------------

UNARY = ("neg", "exp", "sin", "cos", "sqrt", "bump")
BINARY = ("add", "sub", "mul", "div")


class Expr:
    """Immutable DAG node.  Build with the helper functions and operators."""

    __slots__ = ("op", "args", "param")

    def __init__(self, op: str, args: tuple = (), param=None):
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "args", tuple(args))
        object.__setattr__(self, "param", param)

    def __setattr__(self, name, value):
        raise AttributeError("Expr is immutable")

    def __repr__(self):
        if self.op == "const":
            return repr(self.param)
        if self.op == "coord":
            return f"x{self.param}"
        return f"{self.op}({', '.join(map(repr, self.args))})"

    # arithmetic sugar
    def __add__(self, o):
        return Expr("add", (self, lift(o)))

    def __radd__(self, o):
        return Expr("add", (lift(o), self))

    def __sub__(self, o):
        return Expr("sub", (self, lift(o)))

    def __rsub__(self, o):
        return Expr("sub", (lift(o), self))

    def __mul__(self, o):
        return Expr("mul", (self, lift(o)))

    def __rmul__(self, o):
        return Expr("mul", (lift(o), self))

    def __truediv__(self, o):
        return Expr("div", (self, lift(o)))

    def __rtruediv__(self, o):
        return Expr("div", (lift(o), self))

    def __neg__(self):
        return Expr("neg", (self,))

    def __pow__(self, k):
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        if k == 0:
            return const(1.0)
        out = self
        for _ in range(int(k) - 1):
            out = out * self
        return out


def lift(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float, np.integer, np.floating)):
        return const(float(v))
    raise TypeError(f"cannot use {type(v).__name__} in an expression")


def const(v: float) -> Expr:
    return Expr("const", (), float(v))


def coord(i: int) -> Expr:
    return Expr("coord", (), int(i))


def variables(n: int) -> list:
    return [coord(i) for i in range(n)]


def exp(e) -> Expr:
    return Expr("exp", (lift(e),))


def sin(e) -> Expr:
    return Expr("sin", (lift(e),))


def cos(e) -> Expr:
    return Expr("cos", (lift(e),))


def sqrt(e) -> Expr:
    """Square root, guarded: the argument must stay positive."""
    return Expr("sqrt", (lift(e),))


def bump(e) -> Expr:
    """The flat bump g(t) = exp(-1/t) for t > 0, else 0."""
    return Expr("bump", (lift(e),))


def piecewise(selector, pos, neg, tol: float = PIECEWISE_TOL) -> Expr:
    """``pos`` where ``selector >= 0``, else ``neg``.

    The branches are declared to agree (with first jets) on ``selector == 0``;
    :func:`check_piecewise_agreement` samples that locus.
    """
    return Expr("piecewise", (lift(selector), lift(pos), lift(neg)), float(tol))


def halfspace(normal: Sequence[float], offset: float = 0.0) -> Expr:
    """Affine selector ``normal . x + offset``."""
    out = const(offset)
    for i, w in enumerate(normal):
        if w:
            out = out + float(w) * coord(i)
    return out


def dot(a: Sequence, b: Sequence) -> Expr:
    out = None
    for u, v in zip(a, b):
        term = lift(u) * lift(v)
        out = term if out is None else out + term
    return out if out is not None else const(0.0)


def total(items: Sequence) -> Expr:
    out = None
    for u in items:
        out = lift(u) if out is None else out + u
    return out if out is not None else const(0.0)


def walk(roots, into_branches: bool = True) -> list:
    """Nodes reachable from ``roots`` in post-order (each node once).

    With ``into_branches=False`` piecewise nodes only expose their selector;
    evaluation handles the branches on the masked sub-batches.
    """
    seen, order = set(), []
    stack = [(r, False) for r in reversed(list(roots))]
    while stack:
        node, expanded = stack.pop()
        if id(node) in seen:
            continue
        if expanded:
            seen.add(id(node))
            order.append(node)
            continue
        stack.append((node, True))
        kids = node.args if into_branches or node.op != "piecewise" else node.args[:1]
        for a in reversed(kids):
            if id(a) not in seen:
                stack.append((a, False))
    return order


def substitute(roots, replacements: Sequence[Expr]) -> list:
    """Replace ``coord(i)`` by ``replacements[i]`` throughout."""
    memo = {}
    for node in walk(roots):
        if node.op == "coord":
            if node.param >= len(replacements):
                raise ValueError(f"coordinate x{node.param} has no replacement")
            memo[id(node)] = lift(replacements[node.param])
        elif not node.args:
            memo[id(node)] = node
        else:
            memo[id(node)] = Expr(node.op, tuple(memo[id(a)] for a in node.args), node.param)
    return [memo[id(r)] for r in roots]


# -- value evaluation --------------------------------------------------------

def _sqrt_value(a):
    if np.any(a < 0):
        raise DomainError("sqrt of a negative number")
    return np.sqrt(a)


def _div_value(a, b):
    if np.any(np.abs(b) <= DIV_GUARD):
        raise DomainError("division guard violated")
    return a / b


VALUE_RULES: dict[str, Callable] = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "div": _div_value,
    "neg": np.negative,
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": _sqrt_value,
    "bump": lambda a: kernels.flat_bump(a),
}


def _eval_values(roots, X: np.ndarray) -> list:
    N = X.shape[0]
    memo = {}
    for node in walk(roots, into_branches=False):
        op = node.op
        if op == "const":
            val = np.full(N, node.param)
        elif op == "coord":
            val = X[:, node.param]
        elif op == "piecewise":
            sel, pos, neg = node.args
            s = memo[id(sel)]
            if not np.all(np.isfinite(s)):
                raise DomainError("piecewise selector is not finite")
            mask = s >= 0
            val = np.empty(N)
            if mask.any():
                val[mask] = _eval_values([pos], X[mask])[0]
            if (~mask).any():
                val[~mask] = _eval_values([neg], X[~mask])[0]
        else:
            val = VALUE_RULES[op](*(memo[id(a)] for a in node.args))
        memo[id(node)] = val
    return [memo[id(r)] for r in roots]


# -- jet evaluation ------------------------------------------------------------
# A jet is (value (N,), grad (N,n) or None, hess (N,n,n) or None); None means 0.

def _add(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def _neg(a):
    return None if a is None else -a


def _scale(s, a):
    if a is None:
        return None
    return s.reshape((-1,) + (1,) * (a.ndim - 1)) * a


def _outer(a, b):
    if a is None or b is None:
        return None
    return a[:, :, None] * b[:, None, :]


def _jet_add(a, b):
    return a[0] + b[0], _add(a[1], b[1]), _add(a[2], b[2])


def _jet_sub(a, b):
    return a[0] - b[0], _add(a[1], _neg(b[1])), _add(a[2], _neg(b[2]))


def _jet_mul(a, b):
    va, ga, Ha = a
    vb, gb, Hb = b
    g = _add(_scale(va, gb), _scale(vb, ga))
    H = _add(_add(_scale(va, Hb), _scale(vb, Ha)), _add(_outer(ga, gb), _outer(gb, ga)))
    return va * vb, g, H


def _unary(a, f0, f1, f2):
    va, ga, Ha = a
    return f0, _scale(f1, ga), _add(_scale(f1, Ha), _scale(f2, _outer(ga, ga)))


def _jet_div(a, b):
    vb = b[0]
    if np.any(np.abs(vb) <= DIV_GUARD):
        raise DomainError("division guard violated")
    inv = 1.0 / vb
    recip = _unary(b, inv, -inv * inv, 2.0 * inv * inv * inv)
    return _jet_mul(a, recip)


def _jet_neg(a):
    return -a[0], _neg(a[1]), _neg(a[2])


def _jet_exp(a):
    e = np.exp(a[0])
    return _unary(a, e, e, e)


def _jet_sin(a):
    s, c = np.sin(a[0]), np.cos(a[0])
    return _unary(a, s, c, -s)


def _jet_cos(a):
    s, c = np.sin(a[0]), np.cos(a[0])
    return _unary(a, c, -s, -c)


def _jet_sqrt(a):
    if np.any(a[0] <= 0):
        raise DomainError("sqrt jets need a positive argument")
    r = np.sqrt(a[0])
    return _unary(a, r, 0.5 / r, -0.25 / (r * a[0]))


def _jet_bump(a):
    t = a[0]
    g = kernels.flat_bump(t)
    live = g > 0
    ts = np.where(live, t, 1.0)
    d1 = np.where(live, g / ts**2, 0.0)
    d2 = np.where(live, g * (1.0 / ts**4 - 2.0 / ts**3), 0.0)
    return _unary(a, g, d1, d2)


JET_RULES: dict[str, Callable] = {
    "add": _jet_add,
    "sub": _jet_sub,
    "mul": _jet_mul,
    "div": _jet_div,
    "neg": _jet_neg,
    "exp": _jet_exp,
    "sin": _jet_sin,
    "cos": _jet_cos,
    "sqrt": _jet_sqrt,
    "bump": _jet_bump,
}


def _eval_jets(roots, X: np.ndarray) -> list:
    N, n = X.shape
    memo = {}
    for node in walk(roots, into_branches=False):
        op = node.op
        if op == "const":
            jet = (np.full(N, node.param), None, None)
        elif op == "coord":
            g = np.zeros((N, n))
            g[:, node.param] = 1.0
            jet = (X[:, node.param].copy(), g, None)
        elif op == "piecewise":
            sel, pos, neg = node.args
            s = _eval_values([sel], X)[0]
            if not np.all(np.isfinite(s)):
                raise DomainError("piecewise selector is not finite")
            mask = s >= 0
            v, g, H = np.empty(N), np.zeros((N, n)), np.zeros((N, n, n))
            for m, branch in ((mask, pos), (~mask, neg)):
                if m.any():
                    bv, bg, bH = _eval_jets([branch], X[m])[0]
                    v[m] = bv
                    if bg is not None:
                        g[m] = bg
                    if bH is not None:
                        H[m] = bH
            jet = (v, g, H)
        else:
            jet = JET_RULES[op](*(memo[id(a)] for a in node.args))
        memo[id(node)] = jet
    return [memo[id(r)] for r in roots]


# -- smooth maps -------------------------------------------------------------

def _as_batch(X, n: int):
    X = np.asarray(X, dtype=float)
    if n == 0:
        if X.ndim <= 1:
            return np.zeros((1, 0)), True
        return np.zeros((X.shape[0], 0)), False
    single = X.ndim <= 1
    X2 = X.reshape(-1, n) if X.ndim <= 2 else None
    if X2 is None or (X.ndim == 2 and X.shape[1] != n) or (single and X.size != n):
        raise ValueError(f"expected points with {n} coordinates, got shape {X.shape}")
    return X2, single


@dataclass(frozen=True, eq=False)
class SmoothMap:
    """A map R^n -> R^m given by one expression per output."""

    arity_in: int
    outputs: tuple
    name: str = ""

    def __post_init__(self):
        outs = tuple(lift(e) for e in self.outputs)
        object.__setattr__(self, "outputs", outs)
        for node in walk(outs):
            if node.op == "coord" and not 0 <= node.param < self.arity_in:
                raise ValueError(f"x{node.param} is out of range for arity {self.arity_in}")
            if node.op not in UNARY + BINARY + ("const", "coord", "piecewise"):
                raise ValueError(f"unknown primitive {node.op!r}")

    @property
    def arity_out(self) -> int:
        return len(self.outputs)

    def __call__(self, X):
        X2, single = _as_batch(X, self.arity_in)
        vals = _eval_values(self.outputs, X2)
        out = np.stack(vals, axis=1) if vals else np.zeros((X2.shape[0], 0))
        return out[0] if single else out

    def jet(self, X):
        """Values (N,m), gradients (N,m,n) and Hessians (N,m,n,n)."""
        X2, _ = _as_batch(X, self.arity_in)
        N, n = X2.shape
        m = self.arity_out
        V = np.zeros((N, m))
        G = np.zeros((N, m, n))
        H = np.zeros((N, m, n, n))
        for k, (v, g, h) in enumerate(_eval_jets(self.outputs, X2)):
            V[:, k] = v
            if g is not None:
                G[:, k] = g
            if h is not None:
                H[:, k] = h
        return V, G, H

    def compose(self, inner: "SmoothMap") -> "SmoothMap":
        """``self after inner``."""
        if inner.arity_out != self.arity_in:
            raise ValueError(f"cannot compose: inner has {inner.arity_out} outputs, "
                             f"outer expects {self.arity_in} inputs")
        return SmoothMap(inner.arity_in, tuple(substitute(self.outputs, inner.outputs)))

    def __getitem__(self, idx) -> "SmoothMap":
        outs = self.outputs[idx]
        if isinstance(outs, Expr):
            outs = (outs,)
        return SmoothMap(self.arity_in, tuple(outs))

    def nodes(self) -> list:
        return walk(self.outputs)

    def to_dict(self) -> dict:
        return {"arity_in": self.arity_in, "outputs": [expr_to_dict(e) for e in self.outputs]}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d) -> "SmoothMap":
        return cls(int(d["arity_in"]), tuple(expr_from_dict(e) for e in d["outputs"]))

    @classmethod
    def from_json(cls, text: str) -> "SmoothMap":
        return cls.from_dict(json.loads(text))


def smooth_map(n: int, outputs, name: str = "") -> SmoothMap:
    if isinstance(outputs, Expr):
        outputs = (outputs,)
    return SmoothMap(n, tuple(outputs), name)


def identity_map(n: int) -> SmoothMap:
    return SmoothMap(n, tuple(variables(n)), "identity")


def constant_map(n: int, value) -> SmoothMap:
    return SmoothMap(n, tuple(const(v) for v in np.atleast_1d(value)), "constant")


def affine_map(matrix, offset=None) -> SmoothMap:
    M = np.atleast_2d(np.asarray(matrix, dtype=float))
    b = np.zeros(M.shape[0]) if offset is None else np.asarray(offset, dtype=float)
    return SmoothMap(M.shape[1], tuple(halfspace(row, off) for row, off in zip(M, b)))


def stack_maps(*maps: SmoothMap) -> SmoothMap:
    n = maps[0].arity_in
    if any(m.arity_in != n for m in maps):
        raise ValueError("stacked maps need a common arity")
    return SmoothMap(n, tuple(e for m in maps for e in m.outputs))


def expr_to_dict(e: Expr) -> dict:
    if e.op == "const":
        return {"op": "const", "value": e.param}
    if e.op == "coord":
        return {"op": "coord", "index": e.param}
    d = {"op": e.op, "args": [expr_to_dict(a) for a in e.args]}
    if e.op == "piecewise":
        d["tol"] = e.param
    return d


def expr_from_dict(d) -> Expr:
    op = d["op"]
    if op == "const":
        return const(d["value"])
    if op == "coord":
        return coord(d["index"])
    args = tuple(expr_from_dict(a) for a in d.get("args", ()))
    if op == "piecewise":
        return piecewise(*args, tol=d.get("tol", PIECEWISE_TOL))
    if op in UNARY and len(args) == 1 or op in BINARY and len(args) == 2:
        return Expr(op, args)
    raise ValueError(f"bad expression node {op!r} with {len(args)} arguments")


class Jet2(tuple):
    """(value, gradient, hessian) at one point; scalars are unwrapped."""

    __slots__ = ()

    def __new__(cls, value, gradient, hessian):
        return super().__new__(cls, (value, gradient, hessian))

    value = property(lambda self: self[0])
    gradient = property(lambda self: self[1])
    hessian = property(lambda self: self[2])


def eval_jet2(f: SmoothMap, p) -> Jet2:
    """Exact forward-mode value, gradient and Hessian of ``f`` at one point.

    For a scalar map the result has shapes ``()``, ``(n,)``, ``(n, n)``;
    otherwise ``(m,)``, ``(m, n)``, ``(m, n, n)``.
    """
    p = np.asarray(p, dtype=float).reshape(1, -1) if f.arity_in else np.zeros((1, 0))
    V, G, H = f.jet(p)
    if f.arity_out == 1:
        return Jet2(float(V[0, 0]), G[0, 0], H[0, 0])
    return Jet2(V[0], G[0], H[0])


# -- derivative checks -------------------------------------------------------

def _fd_gradient(f: SmoothMap, X: np.ndarray, h: float) -> np.ndarray:
    N, n = X.shape
    out = np.zeros((N, f.arity_out, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        out[:, :, i] = (f(X + e) - f(X - e)) / (2 * h)
    return out


def _fd_hessian(f: SmoothMap, X: np.ndarray, h: float) -> np.ndarray:
    N, n = X.shape
    out = np.zeros((N, f.arity_out, n, n))
    f0 = f(X)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        out[:, :, i, i] = (f(X + ei) - 2 * f0 + f(X - ei)) / h**2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h
            v = (f(X + ei + ej) - f(X + ei - ej) - f(X - ei + ej) + f(X - ei - ej)) / (4 * h * h)
            out[:, :, i, j] = v
            out[:, :, j, i] = v
    return out


def _ridders(op, h0: float, con: float = 2.0, ntab: int = 8, safe: float = 2.0):
    """Elementwise Ridders extrapolation of a central-difference operator.

    ``op(h)`` returns an array whose error expands in even powers of h.
    Each element keeps the tableau entry with the smallest error estimate;
    a level whose evaluation leaves the domain is skipped.
    """
    def level(h):
        try:
            return op(h)
        except DomainError:
            return None

    con2 = con * con
    h = h0
    prev = [level(h)]
    shape = next((a.shape for a in prev if a is not None), None)
    best, err, done = None, None, None
    for i in range(1, ntab):
        h /= con
        row = [level(h)]
        if shape is None and row[0] is not None:
            shape = row[0].shape
        if shape is not None and best is None:
            best = np.full(shape, np.nan)
            err = np.full(shape, np.inf)
            done = np.zeros(shape, dtype=bool)
        fac = con2
        for j in range(1, i + 1):
            a, b = row[j - 1], prev[j - 1]
            row.append(None if a is None or b is None else (a * fac - b) / (fac - 1.0))
            fac *= con2
            if row[j] is None:
                continue
            e1 = np.abs(row[j] - a)
            e2 = np.abs(row[j] - b)
            errt = np.maximum(e1, e2)
            take = (errt <= err) & ~done
            best = np.where(take, row[j], best)
            err = np.where(take, errt, err)
        if row[i] is not None and prev[i - 1] is not None:
            done |= np.abs(row[i] - prev[i - 1]) >= safe * err
        prev = row
        if done is not None and done.all():
            break
    if best is None:
        raise DomainError("every finite-difference step left the domain")
    # elements never improved fall back to the smallest plain step
    if prev[0] is not None:
        best = np.where(np.isnan(best), prev[0], best)
    return best


def _fd_report(name, ad, fd, X, abs_tol, rel_tol):
    N = X.shape[0]
    err = np.abs(ad - fd).reshape(N, -1).max(axis=1)
    mag = np.linalg.norm(ad.reshape(N, -1), axis=1)
    allowed = np.maximum(abs_tol, rel_tol * mag)
    # residual is error / allowed error, so the tolerance is 1
    return VerificationReport.from_residuals(
        name, err / allowed, 1.0, points=X,
        max_abs_error=float(err.max()) if N else 0.0, abs_tol=abs_tol, rel_tol=rel_tol)


def fd_gradient(f: SmoothMap, points, h: float | None = None, extrapolate: bool = True):
    """Central-difference gradient, Ridders-extrapolated from step ``h`` unless disabled."""
    X, _ = _as_batch(points, f.arity_in)
    if not extrapolate:
        return _fd_gradient(f, X, h or FD_STEP)
    return _ridders(lambda s: _fd_gradient(f, X, s), h or RIDDERS_STEP)


def fd_hessian(f: SmoothMap, points, h: float | None = None, extrapolate: bool = True):
    """Second central differences of values, Ridders-extrapolated unless disabled."""
    X, _ = _as_batch(points, f.arity_in)
    if not extrapolate:
        return _fd_hessian(f, X, h or FD_STEP)
    return _ridders(lambda s: _fd_hessian(f, X, s), h or RIDDERS_STEP)


def check_gradient_fd(f: SmoothMap, points, h: float | None = None, extrapolate: bool = True,
                      abs_tol: float = TOL_FD, rel_tol: float = 1e-4) -> VerificationReport:
    """AD gradient against central differences, allowing max(1e-6, 1e-4*|grad|)."""
    X, _ = _as_batch(points, f.arity_in)
    _, G, _ = f.jet(X)
    return _fd_report("gradient_fd", G, fd_gradient(f, X, h, extrapolate), X, abs_tol, rel_tol)


def check_hessian_fd(f: SmoothMap, points, h: float | None = None, extrapolate: bool = True,
                     abs_tol: float = TOL_FD, rel_tol: float = 1e-4) -> VerificationReport:
    """AD Hessian against second central differences of values."""
    X, _ = _as_batch(points, f.arity_in)
    _, _, H = f.jet(X)
    return _fd_report("hessian_fd", H, fd_hessian(f, X, h, extrapolate), X, abs_tol, rel_tol)


def _project_to_locus(selector: SmoothMap, X: np.ndarray, iters: int = 50) -> np.ndarray:
    X = X.copy()
    for _ in range(iters):
        V, G, _ = selector.jet(X)
        s, g = V[:, 0], G[:, 0]
        nrm = np.einsum("ij,ij->i", g, g)
        step = np.where(nrm > 0, s / np.where(nrm > 0, nrm, 1.0), 0.0)
        X -= step[:, None] * g
        if np.max(np.abs(s)) < 1e-15:
            break
    return X


def check_piecewise_agreement(f: SmoothMap, rng: np.random.Generator, count: int = 1000,
                              box=(-1.0, 2.0), sampler=None) -> VerificationReport:
    """Both branches of every piecewise node agree, with gradients, on its locus.

    Locus points come from Newton projection of random points (or of
    ``sampler(rng, count)``) onto ``selector == 0``.
    """
    parts = []
    n = f.arity_in
    pw_nodes = [node for node in f.nodes() if node.op == "piecewise"]
    for k, node in enumerate(pw_nodes):
        sel, pos, neg = node.args
        start = sampler(rng, count) if sampler else rng.uniform(*box, size=(count, n))
        X = _project_to_locus(SmoothMap(n, (sel,)), start)
        on_locus = np.abs(_eval_values([sel], X)[0]) < 1e-12
        X = X[on_locus]
        Vp, Gp, _ = SmoothMap(n, (pos,)).jet(X)
        Vn, Gn, _ = SmoothMap(n, (neg,)).jet(X)
        res = np.maximum(np.abs(Vp - Vn).max(axis=1, initial=0.0),
                         np.abs(Gp - Gn).reshape(len(X), -1).max(axis=1, initial=0.0))
        parts.append(VerificationReport.from_residuals(
            f"piecewise[{k}]", res, node.param, points=X))
    return VerificationReport.combine("piecewise_agreement", parts)


# -- cut-off functions -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CutoffFn:
    """phi(t) = g(t - eps) / (g(t - eps) + g(1 - eps - t)) with g the flat bump."""

    epsilon: float
    map: SmoothMap = field(repr=False)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        v = kernels.cutoff(t.reshape(-1), self.epsilon)
        return float(v[0]) if t.ndim == 0 else v.reshape(t.shape)

    def expr(self, u) -> Expr:
        u = lift(u)
        a = bump(u - self.epsilon)
        return a / (a + bump((1.0 - self.epsilon) - u))

    def jet(self, t):
        V, G, H = self.map.jet(np.asarray(t, dtype=float).reshape(-1, 1))
        return V[:, 0], G[:, 0, 0], H[:, 0, 0, 0]


def check_epsilon(eps, upper: float = 0.5, what: str = "epsilon") -> float:
    eps = float(eps)
    if not 0.0 < eps < upper:
        raise ValueError(f"{what}={eps} must lie in (0, {upper:g})")
    return eps


def make_cutoff(epsilon: float) -> CutoffFn:
    eps = check_epsilon(epsilon)
    t = coord(0)
    a = bump(t - eps)
    phi = a / (a + bump((1.0 - eps) - t))
    return CutoffFn(eps, SmoothMap(1, (phi,), f"cutoff({eps:g})"))


def check_cutoff_invariants(phi: CutoffFn, count: int = 10_000, lo=-0.5, hi=1.5) -> VerificationReport:
    eps = phi.epsilon
    t = np.linspace(lo, hi, count)
    v = phi(t)
    parts = [
        VerificationReport.from_residuals("range", np.maximum(0, np.maximum(-v, v - 1)), 0.0, t),
        VerificationReport.from_residuals("zero_below", np.where(t < eps, np.abs(v), 0.0), 0.0, t),
        VerificationReport.from_residuals("one_above", np.where(t > 1 - eps, np.abs(v - 1), 0.0), 0.0, t),
    ]
    # strictly positive above eps (checked where the bump is representable)
    live = (t > eps + kernels.BUMP_FLOOR)
    parts.append(VerificationReport.from_residuals(
        "positive_above", np.where(live & (v <= 0), 1.0, 0.0), 0.0, t))
    mid = (t >= eps) & (t <= 1 - eps)
    dv = np.diff(v[mid])
    parts.append(VerificationReport.from_residuals(
        "monotone", np.maximum(0, -dv), 0.0, t[mid][1:]))
    return VerificationReport.combine(f"cutoff_invariants[eps={eps:g}]", parts)


# -- pairs ---------------------------------------------------------------------

CASES = (1, 2, 3, 4, 5, 6, 7, 8, 9, "SH", "SH*")
_EPS_CASES = (2, 4, 6, 8)
SPHERE_CAP = 0.98  # charts of S^n minus N stop at this height


def _unit(rng, count, dim):
    v = rng.standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _split(count, parts):
    base, extra = divmod(count, parts)
    return [base + (1 if k < extra else 0) for k in range(parts)]


@dataclass(frozen=True)
class PairSpec:
    """One pair (A, B): a chart for A and a subset B of it.

    ``case`` is 1..9 for the nine pairs, ``"SH"`` for (S^n, H) and ``"SH*"``
    for (S^n minus N, H minus N), where H is the closed northern hemisphere.
    """

    case: object
    n: int
    epsilon: float | None = None
    box: float = 1.0

    def __post_init__(self):
        if self.case not in CASES:
            raise ValueError(f"unknown pair case {self.case!r}")
        if self.n < 1:
            raise ValueError("pairs need n >= 1")
        if self.case in _EPS_CASES:
            if self.epsilon is None:
                raise ValueError(f"case {self.case} needs epsilon")
            upper = 1.0 / (self.n + 1) if self.case == 6 else 0.5
            check_epsilon(self.epsilon, upper)

    @property
    def chart(self) -> str:
        return {1: "R", 2: "R", 3: "I", 4: "I", 5: "A", 6: "A", 7: "D", 8: "D",
                9: "S", "SH": "S", "SH*": "S*"}[self.case]

    @property
    def ambient_dim(self) -> int:
        return self.n + 1 if self.chart in ("A", "S", "S*") else self.n

    @property
    def label(self) -> str:
        eps = "" if self.epsilon is None else f",eps={self.epsilon:g}"
        return f"case{self.case}(n={self.n}{eps})"

    # residuals: 0 inside, a distance-like positive number outside
    def ambient_residual(self, Y) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        ch = self.chart
        if ch == "R":
            return np.zeros(len(Y))
        if ch == "I":
            return np.maximum(0, np.maximum(-Y, Y - 1)).max(axis=1)
        if ch == "A":
            return np.abs(Y.sum(axis=1) - 1)
        if ch == "D":
            return np.maximum(0, np.linalg.norm(Y, axis=1) - 1)
        r = np.abs(np.linalg.norm(Y, axis=1) - 1)
        if ch == "S*":
            r = r + np.where(np.linalg.norm(Y - self.north, axis=1) < 1e-9, 1.0, 0.0)
        return r

    @property
    def north(self) -> np.ndarray:
        e = np.zeros(self.n + 1)
        e[-1] = 1.0
        return e

    def subset_residual(self, Y) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        eps = self.epsilon
        c = self.case
        if c in (1, 3):
            return np.minimum(np.abs(Y), np.abs(Y - 1)).min(axis=1)
        if c in (2, 4):
            return np.maximum(0, np.minimum(Y - eps, (1 - eps) - Y)).min(axis=1)
        if c == 5:
            return np.abs(Y).min(axis=1)
        if c == 6:
            return np.maximum(0, Y - eps).min(axis=1)
        if c == 7:
            return np.abs(np.linalg.norm(Y, axis=1) - 1)
        if c == 8:
            return np.maximum(0, (1 - eps) - np.linalg.norm(Y, axis=1))
        if c == 9:
            return np.linalg.norm(Y - self.north, axis=1)
        return np.maximum(0, -Y[:, -1])  # hemisphere z >= 0

    def normalize(self, X) -> np.ndarray:
        """Renormalize A^n points whose coordinate sum is within 1e-12 of 1."""
        X = np.array(X, dtype=float, ndmin=2)
        if self.chart != "A":
            return X
        s = X.sum(axis=1)
        if np.any(np.abs(s - 1) > 1e-12):
            raise ValueError("A^n points must have coordinate sum 1 (tolerance 1e-12)")
        return X / s[:, None]

    # samplers
    def _affine_fill(self, X, free_mask):
        """Shift the free coordinates so every row sums to 1."""
        k = free_mask.sum(axis=1)
        fixed = np.where(free_mask, 0.0, X).sum(axis=1)
        free = np.where(free_mask, X, 0.0).sum(axis=1)
        shift = (1 - fixed - free) / k
        return np.where(free_mask, X + shift[:, None], X)

    def sample_domain(self, rng: np.random.Generator, count: int) -> np.ndarray:
        n, b, ch = self.n, self.box, self.chart
        if ch == "R":
            return rng.uniform(-b, 1 + b, size=(count, n))
        if ch == "I":
            return rng.uniform(0, 1, size=(count, n))
        if ch == "A":
            X = rng.uniform(-b, 1 + b, size=(count, n + 1))
            return self._affine_fill(X, np.ones_like(X, dtype=bool))
        if ch == "D":
            u = _unit(rng, count, n)
            r = rng.uniform(0, 1, size=(count, 1)) ** (1.0 / n)
            return u * r
        X = _unit(rng, count, n + 1)
        if ch == "S*":
            bad = X[:, -1] > SPHERE_CAP
            while bad.any():
                X[bad] = _unit(rng, int(bad.sum()), n + 1)
                bad = X[:, -1] > SPHERE_CAP
        return X

    def strata(self) -> list:
        n, c = self.n, self.case
        if c in (1, 2, 3, 4):
            return [(i, side) for i in range(n) for side in (0, 1)]
        if c in (5, 6):
            return list(range(n + 1))
        if c in ("SH", "SH*"):
            return ["equator", "cap"]
        return ["all"]

    def critical_points(self) -> np.ndarray:
        """Deterministic boundary points where pair conditions are tightest."""
        n, eps, c = self.n, self.epsilon, self.case
        pts = []
        if c in (2, 4):
            for i in range(n):
                for v in (eps, 1 - eps):
                    x = np.full(n, 0.5)
                    x[i] = v
                    pts.append(x)
        elif c == 6:
            for i in range(n + 1):
                x = np.full(n + 1, (1 - eps) / n)
                x[i] = eps
                pts.append(x)
        elif c == 5:
            for i in range(n + 1):
                x = np.full(n + 1, 1.0 / n)
                x[i] = 0.0
                pts.append(x)
        elif c == 8:
            for i in range(n):
                x = np.zeros(n)
                x[i] = 1 - eps + 1e-9
                pts.append(x)
                pts.append(-x)
        elif c == 9:
            pts.append(self.north)
        return np.array(pts).reshape(-1, self.ambient_dim)

    def sample_boundary(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Stratified: every stratum of B gets an equal share of the budget."""
        crit = self.critical_points()
        count = max(count - len(crit), 0)
        strata = self.strata()
        chunks = [crit]
        for stratum, k in zip(strata, _split(count, len(strata))):
            if k:
                chunks.append(self._sample_stratum(rng, stratum, k))
        return np.concatenate(chunks, axis=0) if chunks else np.zeros((0, self.ambient_dim))

    def _sample_stratum(self, rng, stratum, k) -> np.ndarray:
        n, b, eps, c = self.n, self.box, self.epsilon, self.case
        if c in (1, 2, 3, 4):
            i, side = stratum
            lo, hi = (-b, 1 + b) if c in (1, 2) else (0.0, 1.0)
            X = rng.uniform(lo, hi, size=(k, n))
            if c in (1, 3):
                X[:, i] = side
            else:
                left, right = (lo, eps) if side == 0 else (1 - eps, hi)
                X[:, i] = rng.uniform(left, right, size=k)
            return X
        if c in (5, 6):
            i = stratum
            X = rng.uniform(-b, 1 + b, size=(k, n + 1))
            X[:, i] = 0.0 if c == 5 else rng.uniform(-b, eps, size=k)
            free = np.ones_like(X, dtype=bool)
            free[:, i] = False
            return self._affine_fill(X, free)
        if c == 7:
            return _unit(rng, k, n)
        if c == 8:
            u = _unit(rng, k, n)
            return u * rng.uniform(1 - eps, 1, size=(k, 1))
        if c == 9:
            return np.repeat(self.north[None], k, axis=0)
        # hemispheres
        if stratum == "equator":
            u = _unit(rng, k, n)
            return np.concatenate([u, np.zeros((k, 1))], axis=1)
        top = SPHERE_CAP if c == "SH*" else 1.0
        z = rng.uniform(0, top, size=(k, 1))
        if c == "SH":
            z[: max(1, k // 20)] = 1.0  # the pole itself
        u = _unit(rng, k, n)
        return np.concatenate([u * np.sqrt(1 - z**2), z], axis=1)


def pair(case, n: int, epsilon: float | None = None) -> PairSpec:
    return PairSpec(case, n, epsilon if case in _EPS_CASES else None)


# -- sampling verifiers --------------------------------------------------------

def _split_budget(budget: int):
    interior = budget // 2
    return interior, budget - interior


def verify_map_of_pairs(f: SmoothMap, src: PairSpec, dst, budget: int = 1000,
                        rng: np.random.Generator | None = None,
                        tol: float = TOL_EXACT) -> VerificationReport:
    """Sample ``src`` and check that f lands in dst's ambient set and B into B'.

    ``dst`` is a :class:`PairSpec` or a basepoint (array-like), in which case
    the boundary must go to that point.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    point = None if isinstance(dst, PairSpec) else np.atleast_1d(np.asarray(dst, dtype=float))
    out_dim = dst.ambient_dim if point is None else point.size
    if f.arity_in != src.ambient_dim or f.arity_out != out_dim:
        raise ValueError(f"chart mismatch: map is R^{f.arity_in} -> R^{f.arity_out}, "
                         f"pairs need R^{src.ambient_dim} -> R^{out_dim}")
    n_in, n_bd = _split_budget(budget)
    Xi = src.sample_domain(rng, n_in)
    Xb = src.sample_boundary(rng, n_bd)
    parts = []
    if point is None:
        X = np.concatenate([Xi, Xb])
        parts.append(VerificationReport.from_residuals(
            "lands_in_ambient", dst.ambient_residual(f(X)), tol, points=X))
        parts.append(VerificationReport.from_residuals(
            "boundary_to_subset", dst.subset_residual(f(Xb)), tol, points=Xb))
    else:
        Y = f(Xb)
        parts.append(VerificationReport.from_residuals(
            "boundary_to_basepoint", np.abs(Y - point).max(axis=1), tol, points=Xb))
    dst_label = dst.label if point is None else f"point{point.tolist()}"
    return VerificationReport.combine(f"map_of_pairs[{src.label}->{dst_label}]", parts)


def verify_homotopy(H: SmoothMap, f: SmoothMap, g: SmoothMap, src: PairSpec,
                    budget: int = 1000, rng: np.random.Generator | None = None,
                    dst: PairSpec | None = None, tol: float = TOL_EXACT,
                    grid: int = HOMOTOPY_GRID) -> VerificationReport:
    """Endpoints H(.,0)=f, H(.,1)=g on ``budget`` samples, plus the pair
    condition of every H(.,t) on a t-grid at the boundary samples."""
    rng = rng if rng is not None else np.random.default_rng(0)
    dst = dst or src
    d = src.ambient_dim
    if H.arity_in != d + 1 or f.arity_in != d or g.arity_in != d:
        raise ValueError(f"arity mismatch: H takes {H.arity_in}, f/g take "
                         f"{f.arity_in}/{g.arity_in}, chart has {d}")
    if not (H.arity_out == f.arity_out == g.arity_out == dst.ambient_dim):
        raise ValueError("H, f and g must share the target chart")
    n_in, n_bd = _split_budget(budget)
    Xi = src.sample_domain(rng, n_in)
    Xb = src.sample_boundary(rng, n_bd)
    X = np.concatenate([Xi, Xb])

    def at(P, t):
        return np.concatenate([P, np.full((len(P), 1), t)], axis=1)

    parts = [
        VerificationReport.from_residuals(
            "start_is_f", np.abs(H(at(X, 0.0)) - f(X)).max(axis=1), tol, points=X),
        VerificationReport.from_residuals(
            "end_is_g", np.abs(H(at(X, 1.0)) - g(X)).max(axis=1), tol, points=X),
    ]
    ts = np.linspace(0.0, 1.0, grid)
    TXb = np.concatenate([at(Xb, t) for t in ts])
    TX = np.concatenate([at(X, t) for t in ts])
    parts.append(VerificationReport.from_residuals(
        "pair_preserved", dst.subset_residual(H(TXb)), tol, points=TXb, grid=grid))
    parts.append(VerificationReport.from_residuals(
        "stays_in_ambient", dst.ambient_residual(H(TX)), tol, points=TX, grid=grid))
    return VerificationReport.combine(f"homotopy[{src.label}]", parts, grid=grid)


def numbers_close(a, b, tol=TOL_EXACT) -> bool:
    return bool(np.all(np.abs(np.asarray(a, float) - np.asarray(b, float)) <= tol))


__all__ = [
    "DomainError", "Expr", "SmoothMap", "CutoffFn", "PairSpec", "Jet2",
    "const", "coord", "variables", "exp", "sin", "cos", "sqrt", "bump", "piecewise",
    "halfspace", "dot", "total", "substitute", "smooth_map", "identity_map",
    "constant_map", "affine_map", "stack_maps", "eval_jet2", "fd_gradient", "fd_hessian",
    "check_gradient_fd",
    "check_hessian_fd", "check_piecewise_agreement", "make_cutoff",
    "check_cutoff_invariants", "pair", "verify_map_of_pairs", "verify_homotopy",
    "JET_RULES", "VALUE_RULES",
]
