"""Physical models: flux, source, admissible box and entropy pairs.

States are arrays of shape (n, m); positions are given as separate t and x
arrays of shape (n,). The time component of the space-time flux is the
identity and is not stored.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class ModelError(ValueError):
    """Invalid model parameters or an inadmissible state."""


def _zero_source(u, t, x):
    return np.zeros_like(u)


@dataclass(frozen=True)
class PhysicalModel:
    """u_t + f(u, y)_x = p(u, y) with states restricted to a box.

    Parameters
    ----------
    name : str
    m : int
        System size.
    flux : callable
        ``flux(u, t, x)`` with u of shape (n, m), returns (n, m).
    source : callable, optional
        ``source(u, t, x)``; zero when omitted.
    lower, upper : tuple
        Bounds of the admissible box P, one entry per component.
    dflux : callable, optional
        Scalar models only: ``dflux(u, t, x)`` returns f'(u) with shape (n,).
    homogeneous : bool
        True when neither flux nor source depends on position.
    """

    name: str
    m: int
    flux: Callable
    source: Optional[Callable] = None
    lower: tuple = (-1.0,)
    upper: tuple = (1.0,)
    dflux: Optional[Callable] = None
    homogeneous: bool = True

    @property
    def has_source(self):
        return self.source is not None

    def p(self, u, t, x):
        if self.source is None:
            return np.zeros_like(u)
        return self.source(u, t, x)

    def admissible(self, u, tol=1e-12):
        """Boolean mask of rows of ``u`` inside the box."""
        u = np.asarray(u, dtype=float).reshape(-1, self.m)
        lo = np.asarray(self.lower) - tol
        hi = np.asarray(self.upper) + tol
        return np.all((u >= lo) & (u <= hi), axis=1) & np.all(np.isfinite(u), axis=1)

    def sample_states(self, n=33):
        """Evenly spaced states on the box diagonal, plus its corners for m > 1."""
        s = np.linspace(0.0, 1.0, n)[:, None]
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return lo[None, :] + s * (hi - lo)[None, :]

    def max_speed(self, t=0.0, x=0.0, n=65):
        """max |f'(u)| over sampled box states at position (t, x)."""
        if self.dflux is None:
            raise ModelError(f"model {self.name!r} has no derivative for CFL estimates")
        u = self.sample_states(n)
        tt = np.full(len(u), float(t))
        xx = np.full(len(u), float(x))
        return float(np.abs(self.dflux(u, tt, xx)).max())


@dataclass(frozen=True)
class EntropyPair:
    """Entropy eta0, entropy flux eta1 and entropy source g, each (u, t, x) -> (n,).

    ``kink`` marks a state where eta0 is not differentiable (Kruzkov pairs).
    """

    eta0: Callable
    eta1: Callable
    g: Callable
    kink: Optional[float] = None
    name: str = "entropy"


def burgers(lower=-1.0, upper=1.0):
    return PhysicalModel(
        name="burgers",
        m=1,
        flux=lambda u, t, x: 0.5 * u * u,
        lower=(float(lower),),
        upper=(float(upper),),
        dflux=lambda u, t, x: u[:, 0],
    )


def advection(c=1.0, lower=-1.0, upper=1.0):
    c = float(c)
    return PhysicalModel(
        name=f"advection(c={c:g})",
        m=1,
        flux=lambda u, t, x: c * u,
        lower=(float(lower),),
        upper=(float(upper),),
        dflux=lambda u, t, x: np.full(len(u), c),
    )


def trivial(lower=-1.0, upper=1.0, m=1):
    """u_t = 0."""
    return PhysicalModel(
        name="trivial",
        m=m,
        flux=lambda u, t, x: np.zeros_like(u),
        lower=(float(lower),) * m,
        upper=(float(upper),) * m,
        dflux=(lambda u, t, x: np.zeros(len(u))) if m == 1 else None,
    )


def selfsimilar(base, d=1):
    """Similarity-coordinate form: flux f(u) - xi u and source -d u.

    Grid coordinates (t, x) play the role of pseudo-time and xi.
    """
    if int(d) != d or d < 1:
        raise ModelError(f"dimension d must be a positive integer, got {d}")
    d = int(d)
    f = base.flux
    df = base.dflux

    def flux(u, t, x):
        return f(u, t, x) - x[:, None] * u

    def source(u, t, x):
        return -d * u

    dflux = None
    if df is not None:
        dflux = lambda u, t, x: df(u, t, x) - x
    return PhysicalModel(
        name=f"selfsimilar({base.name}, d={d})",
        m=base.m,
        flux=flux,
        source=source,
        lower=base.lower,
        upper=base.upper,
        dflux=dflux,
        homogeneous=False,
    )


def kruzkov_pair(model, a):
    """(|u - a|, sgn(u - a)(f(u) - f(a))) for a scalar model."""
    if model.m != 1:
        raise ModelError("Kruzkov entropies need a scalar model")
    a = float(a)

    def eta0(u, t, x):
        return np.abs(u[:, 0] - a)

    def eta1(u, t, x):
        fa = model.flux(np.full_like(u, a), t, x)
        return np.sign(u[:, 0] - a) * (model.flux(u, t, x)[:, 0] - fa[:, 0])

    def g(u, t, x):
        if model.source is None:
            return np.zeros(len(u))
        return np.sign(u[:, 0] - a) * model.source(u, t, x)[:, 0]

    return EntropyPair(eta0, eta1, g, kink=a, name=f"kruzkov(a={a:g})")


def square_entropy(model):
    """eta0 = u^2/2 for Burgers (eta1 = u^3/3) or linear advection (eta1 = c u^2/2)."""
    if model.m != 1:
        raise ModelError("square entropy implemented for scalar models only")
    if model.name == "burgers":
        eta1 = lambda u, t, x: u[:, 0] ** 3 / 3.0
    elif model.name.startswith("advection"):
        c = float(model.dflux(np.zeros((1, 1)), np.zeros(1), np.zeros(1))[0])
        eta1 = lambda u, t, x: 0.5 * c * u[:, 0] ** 2
    elif model.name == "trivial":
        eta1 = lambda u, t, x: np.zeros(len(u))
    else:
        raise ModelError(f"no square entropy flux known for {model.name!r}")
    return EntropyPair(
        eta0=lambda u, t, x: 0.5 * u[:, 0] ** 2,
        eta1=eta1,
        g=lambda u, t, x: np.zeros(len(u)),
        name="square",
    )


def check_entropy_compatibility(pair, model, states=None, y=(0.0, 0.0), eps=1e-6):
    """Max relative defect of d(eta1)/du = eta0'(u) f'(u), by central differences.

    States within ``10 eps`` of the pair's kink are skipped.
    """
    if model.m != 1:
        raise ModelError("compatibility check implemented for scalar models")
    u = model.sample_states() if states is None else np.asarray(states, float).reshape(-1, 1)
    if pair.kink is not None:
        u = u[np.abs(u[:, 0] - pair.kink) > 10 * eps]
    t = np.full(len(u), float(y[0]))
    x = np.full(len(u), float(y[1]))
    d1 = (pair.eta1(u + eps, t, x) - pair.eta1(u - eps, t, x)) / (2 * eps)
    d0 = (pair.eta0(u + eps, t, x) - pair.eta0(u - eps, t, x)) / (2 * eps)
    df = (model.flux(u + eps, t, x) - model.flux(u - eps, t, x))[:, 0] / (2 * eps)
    rhs = d0 * df
    scale = np.maximum(1.0, np.abs(rhs))
    return float(np.max(np.abs(d1 - rhs) / scale)) if len(u) else 0.0


MODELS = {
    "burgers": burgers,
    "advection": advection,
    "trivial": trivial,
}


def model_from_name(name, **params):
    """Built-in model by name; ``selfsimilar`` wraps ``base`` (default burgers)."""
    if name == "selfsimilar":
        base = params.pop("base", "burgers")
        d = params.pop("d", 1)
        return selfsimilar(model_from_name(base, **params), d)
    if name not in MODELS:
        raise ModelError(f"unknown model {name!r}; choose from {sorted(MODELS) + ['selfsimilar']}")
    return MODELS[name](**params)
