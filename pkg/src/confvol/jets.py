"""Truncated multivariate Taylor (jet) arithmetic.

Forward-mode propagation of derivatives through chart component functions.
A jet holds the Taylor coefficients of a scalar quantity in the chart
coordinates around a base point, truncated at a fixed total degree.  The
coefficient array carries arbitrary leading batch axes, so whole tensors
and whole batches of evaluation points propagate in one vectorized sweep.

Curvature needs exact metric derivatives to fourth order (the Bach tensor
consumes four), which is why charts are evaluated on jets instead of being
finite-differenced.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def jet_space(nvars: int, order: int) -> "JetSpace":
    return JetSpace(nvars, order)


class JetSpace:
    """Monomial bookkeeping for jets in ``nvars`` variables up to ``order``."""

    def __init__(self, nvars: int, order: int):
        monos = []
        for deg in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(nvars), deg):
                alpha = [0] * nvars
                for v in combo:
                    alpha[v] += 1
                monos.append(tuple(alpha))
        self.nvars = nvars
        self.order = order
        self.monomials = monos
        self.ncoef = len(monos)
        self.index = {m: i for i, m in enumerate(monos)}
        self.degree = np.array([sum(m) for m in monos])
        # boundaries of the degree blocks: monomials of degree <= d occupy
        # indices [0, self._cut[d])
        self._cut = [int(np.searchsorted(self.degree, d + 1)) for d in range(order + 1)]
        # multiplication pairs grouped by output coefficient
        pairs = [[] for _ in range(self.ncoef)]
        for i, mi in enumerate(monos):
            di = self.degree[i]
            for j, mj in enumerate(monos):
                if di + self.degree[j] <= order:
                    k = self.index[tuple(a + b for a, b in zip(mi, mj))]
                    pairs[k].append((i, j))
        self._pairs = [
            (np.array([p[0] for p in ps]), np.array([p[1] for p in ps]))
            for ps in pairs
        ]
        # index maps for partial derivatives
        self._dmaps = []
        for v in range(nvars):
            src, dst, fac = [], [], []
            for i, m in enumerate(monos):
                if self.degree[i] < order:
                    up = list(m)
                    up[v] += 1
                    src.append(self.index[tuple(up)])
                    dst.append(i)
                    fac.append(up[v])
            self._dmaps.append(
                (np.array(src), np.array(dst), np.array(fac, dtype=float))
            )

    def ncoef_at(self, order: int) -> int:
        return self._cut[min(order, self.order)]

    def mul(self, a: np.ndarray, b: np.ndarray, out_order: int | None = None) -> np.ndarray:
        """Coefficient-array product, truncated at ``out_order``."""
        nout = self.ncoef_at(self.order if out_order is None else out_order)
        shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
        out = np.zeros(shape + (self.ncoef,), dtype=np.result_type(a, b))
        for k in range(nout):
            idx_i, idx_j = self._pairs[k]
            out[..., k] = np.sum(a[..., idx_i] * b[..., idx_j], axis=-1)
        return out

    def diff(self, c: np.ndarray, v: int) -> np.ndarray:
        src, dst, fac = self._dmaps[v]
        out = np.zeros_like(c)
        out[..., dst] = c[..., src] * fac
        return out


def _as_inexact(a) -> np.ndarray:
    """Coerce to a float array, preserving complex inputs."""
    arr = np.asarray(a)
    if not np.issubdtype(arr.dtype, np.inexact):
        arr = arr.astype(float)
    return arr


class Jet:
    """A batch of truncated Taylor expansions sharing one JetSpace."""

    __slots__ = ("space", "c")

    def __init__(self, space: JetSpace, c: np.ndarray):
        self.space = space
        self.c = _as_inexact(c)

    # -- construction -----------------------------------------------------

    @staticmethod
    def constant(space: JetSpace, value) -> "Jet":
        value = _as_inexact(value)
        c = np.zeros(value.shape + (space.ncoef,), dtype=value.dtype)
        c[..., 0] = value
        return Jet(space, c)

    @staticmethod
    def variable(space: JetSpace, v: int, value) -> "Jet":
        jet = Jet.constant(space, value)
        if space.order >= 1:
            unit = tuple(1 if i == v else 0 for i in range(space.nvars))
            jet.c[..., space.index[unit]] = 1.0
        return jet

    # -- views ------------------------------------------------------------

    @property
    def value(self) -> np.ndarray:
        return self.c[..., 0]

    def __getitem__(self, idx) -> "Jet":
        return Jet(self.space, self.c[idx])

    def trunc(self, order: int) -> "Jet":
        """Zero all coefficients above ``order`` (drop untrusted tails)."""
        out = self.c.copy()
        out[..., self.space.ncoef_at(order):] = 0.0
        return Jet(self.space, out)

    def diff(self, v: int) -> "Jet":
        return Jet(self.space, self.space.diff(self.c, v))

    def gradient_value(self) -> np.ndarray:
        """Values of all first partials, stacked along a new leading axis."""
        return np.stack([self.diff(v).value for v in range(self.space.nvars)])

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, Jet):
            return other.c
        arr = _as_inexact(other)
        c = np.zeros(arr.shape + (self.space.ncoef,), dtype=arr.dtype)
        c[..., 0] = arr
        return c

    def __add__(self, other):
        return Jet(self.space, self.c + self._coerce(other))

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, -self.c)

    def __sub__(self, other):
        return Jet(self.space, self.c - self._coerce(other))

    def __rsub__(self, other):
        return Jet(self.space, self._coerce(other) - self.c)

    def __mul__(self, other):
        if isinstance(other, Jet):
            return Jet(self.space, self.space.mul(self.c, other.c))
        arr = _as_inexact(other)
        return Jet(self.space, self.c * arr[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * reciprocal(other)
        arr = _as_inexact(other)
        return Jet(self.space, self.c / arr[..., None])

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, p):
        if isinstance(p, int) or (isinstance(p, float) and p.is_integer()):
            p = int(p)
            if p < 0:
                return reciprocal(self) ** (-p)
            out = Jet.constant(self.space, np.ones(self.c.shape[:-1]))
            for _ in range(p):
                out = out * self
            return out
        return power(self, p)

    def mul_trunc(self, other: "Jet", out_order: int) -> "Jet":
        return Jet(self.space, self.space.mul(self.c, other.c, out_order))


# -- analytic functions of jets ------------------------------------------


def _compose(u: Jet, derivs: list[np.ndarray]) -> Jet:
    """Taylor composition f(u) given f^(m)(u0) for m = 0..order (Horner)."""
    space = u.space
    h = u.c.copy()
    h[..., 0] = 0.0
    order = space.order
    shape = u.c.shape[:-1]
    res = np.zeros(shape + (space.ncoef,),
                   dtype=np.result_type(u.c, derivs[order]))
    res[..., 0] = derivs[order] / math.factorial(order)
    for m in range(order - 1, -1, -1):
        res = space.mul(res, h)
        res[..., 0] += derivs[m] / math.factorial(m)
    return Jet(space, res)


def reciprocal(u: Jet) -> Jet:
    u0 = u.value
    derivs = [((-1.0) ** m) * math.factorial(m) / u0 ** (m + 1)
              for m in range(u.space.order + 1)]
    return _compose(u, derivs)


def power(u: Jet, p: float) -> Jet:
    u0 = u.value
    derivs = []
    coef = 1.0
    for m in range(u.space.order + 1):
        derivs.append(coef * u0 ** (p - m))
        coef *= (p - m)
    return _compose(u, derivs)


def exp(x):
    if isinstance(x, Jet):
        e0 = np.exp(x.value)
        return _compose(x, [e0] * (x.space.order + 1))
    return np.exp(x)


def log(x):
    if isinstance(x, Jet):
        u0 = x.value
        derivs = [np.log(u0)]
        for m in range(1, x.space.order + 1):
            derivs.append(((-1.0) ** (m - 1)) * math.factorial(m - 1) / u0 ** m)
        return _compose(x, derivs)
    return np.log(x)


def sqrt(x):
    if isinstance(x, Jet):
        return power(x, 0.5)
    return np.sqrt(x)


def sin(x):
    if isinstance(x, Jet):
        s0, c0 = np.sin(x.value), np.cos(x.value)
        cycle = [s0, c0, -s0, -c0]
        return _compose(x, [cycle[m % 4] for m in range(x.space.order + 1)])
    return np.sin(x)


def cos(x):
    if isinstance(x, Jet):
        s0, c0 = np.sin(x.value), np.cos(x.value)
        cycle = [c0, -s0, -c0, s0]
        return _compose(x, [cycle[m % 4] for m in range(x.space.order + 1)])
    return np.cos(x)


# -- structural helpers ---------------------------------------------------


def coordinates(space: JetSpace, values: np.ndarray) -> list[Jet]:
    """Coordinate seed jets at base point(s) ``values`` (shape (nvars, ...))."""
    values = np.asarray(values, dtype=float)
    return [Jet.variable(space, v, values[v]) for v in range(space.nvars)]


def stack(jets, axis: int = 0) -> Jet:
    """Stack jets (or scalars broadcastable against them) along a new axis."""
    space = next(j.space for j in _flatten(jets) if isinstance(j, Jet))
    return _stack_rec(jets, space)


def _flatten(obj):
    if isinstance(obj, (list, tuple)):
        for o in obj:
            yield from _flatten(o)
    else:
        yield obj


def _stack_rec(obj, space: JetSpace) -> Jet:
    if isinstance(obj, (list, tuple)):
        parts = [_stack_rec(o, space) for o in obj]
        shape = np.broadcast_shapes(*[p.c.shape for p in parts])
        cs = [np.broadcast_to(p.c, shape) for p in parts]
        return Jet(space, np.stack(cs, axis=0))
    if isinstance(obj, Jet):
        return obj
    return Jet.constant(space, obj)
