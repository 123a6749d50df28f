"""Piecewise-polynomial initial data with explicit breakpoints."""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from .quadrature import integrate_interval


@dataclass(frozen=True)
class InitialData:
    """u0 on the real line as polynomial pieces between ``breaks``.

    ``coeffs[k]`` holds ascending polynomial coefficients (shape
    ``(deg+1, m)``) in the global variable x for the piece
    ``[breaks[k], breaks[k+1])``. Outside the breakpoints u0 extends by the
    constants ``left`` and ``right``.
    """

    breaks: tuple
    coeffs: tuple
    left: tuple
    right: tuple

    @property
    def m(self):
        return len(self.left)

    @classmethod
    def constant(cls, value):
        v = tuple(np.atleast_1d(np.asarray(value, dtype=float)).tolist())
        return cls(breaks=(), coeffs=(), left=v, right=v)

    @classmethod
    def riemann(cls, u_left, u_right, x0=0.0):
        ul = tuple(np.atleast_1d(np.asarray(u_left, dtype=float)).tolist())
        ur = tuple(np.atleast_1d(np.asarray(u_right, dtype=float)).tolist())
        return cls(breaks=(float(x0),), coeffs=(), left=ul, right=ur)

    @classmethod
    def indicator(cls, a=0.0, b=1.0, value=1.0):
        return cls.piecewise_constant([a, b], [value], outside=0.0)

    @classmethod
    def piecewise_constant(cls, breaks, values, outside=0.0):
        breaks = [float(b) for b in breaks]
        if len(values) != len(breaks) - 1:
            raise ValueError("need len(breaks) - 1 values")
        out = tuple(np.atleast_1d(np.asarray(outside, dtype=float)).tolist())
        coeffs = tuple(
            np.atleast_1d(np.asarray(v, dtype=float))[None, :] for v in values
        )
        return cls(breaks=tuple(breaks), coeffs=coeffs, left=out, right=out)

    @classmethod
    def piecewise_linear(cls, breaks, values_at_breaks, outside=None):
        """Continuous-or-not linear ramps; ``values_at_breaks`` pairs per piece."""
        breaks = [float(b) for b in breaks]
        coeffs = []
        for k, (va, vb) in enumerate(values_at_breaks):
            a, b = breaks[k], breaks[k + 1]
            va = np.atleast_1d(np.asarray(va, dtype=float))
            vb = np.atleast_1d(np.asarray(vb, dtype=float))
            slope = (vb - va) / (b - a)
            coeffs.append(np.stack([va - slope * a, slope]))
        first = np.atleast_1d(np.asarray(values_at_breaks[0][0], dtype=float))
        last = np.atleast_1d(np.asarray(values_at_breaks[-1][1], dtype=float))
        if outside is not None:
            first = last = np.atleast_1d(np.asarray(outside, dtype=float))
        return cls(
            breaks=tuple(breaks),
            coeffs=tuple(coeffs),
            left=tuple(first.tolist()),
            right=tuple(last.tolist()),
        )

    def _pieces(self):
        """(lo, hi, coeff) triples covering the real line."""
        m = self.m
        b = self.breaks
        left = np.asarray(self.left)[None, :]
        right = np.asarray(self.right)[None, :]
        if not b:
            return [(-np.inf, np.inf, left)]
        out = [(-np.inf, b[0], left)]
        if self.coeffs:
            for k, c in enumerate(self.coeffs):
                out.append((b[k], b[k + 1], np.asarray(c).reshape(-1, m)))
        out.append((b[-1], np.inf, right))
        return out

    def __call__(self, x):
        """Evaluate at points x; returns shape (n, m)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty((x.size, self.m))
        for lo, hi, c in self._pieces():
            sel = (x >= lo) & (x < hi)
            if np.any(sel):
                out[sel] = P.polyval(x[sel], c).T if c.shape[0] > 1 else c[0]
        return out

    def integrate(self, a, b):
        """Exact integral of u0 over [a, b] (vector of length m)."""
        total = np.zeros(self.m)
        if b <= a:
            return total
        for lo, hi, c in self._pieces():
            lo2, hi2 = max(lo, a), min(hi, b)
            if hi2 <= lo2:
                continue
            anti = P.polyint(c)
            total += P.polyval(hi2, anti) - P.polyval(lo2, anti)
        return total

    def integrate_function(self, g, a, b):
        """Integral of g(u0(x)) over [a, b], split at the breakpoints.

        ``g`` maps an (n, m) state array to an (n,) or (n, k) array.
        """
        return integrate_interval(lambda x: g(self(x)), a, b, breaks=self.breaks)

    def cell_averages(self, lo, hi):
        """Exact averages over each interval [lo[i], hi[i]]."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        out = np.empty((lo.size, self.m))
        for i in range(lo.size):
            out[i] = self.integrate(lo[i], hi[i]) / (hi[i] - lo[i])
        return out

    def l1_norm(self, a=-np.inf, b=np.inf):
        """L1 norm of the first component over [a, b] (finite support assumed)."""
        lo = max(a, self.breaks[0]) if self.breaks else a
        hi = min(b, self.breaks[-1]) if self.breaks else b
        inner = integrate_interval(
            lambda x: np.abs(self(x)[:, 0]), lo, hi, breaks=self.breaks
        )
        tails = 0.0
        if np.isfinite(a) and a < lo:
            tails += abs(self.left[0]) * (lo - a)
        if np.isfinite(b) and b > hi:
            tails += abs(self.right[0]) * (b - hi)
        return inner + tails
