"""Oscillatory test problems with exact solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .integrator import IVProblem


@dataclass(frozen=True)
class ProblemCatalogEntry:
    name: str
    problem: IVProblem
    dominant_frequency: float
    notes: str = ""

    def to_dict(self) -> dict:
        p = self.problem
        return {
            "name": self.name,
            "dominant_frequency": self.dominant_frequency,
            "dim": p.dim,
            "x0": p.x0,
            "y0": list(p.y0),
            "dy0": list(p.dy0),
            "has_exact": p.exact is not None,
            "notes": self.notes,
        }


def harmonic(omega: float = 1.0) -> ProblemCatalogEntry:
    """y'' = -omega^2 y, y(0) = 1, y'(0) = 0."""
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    w2 = omega * omega

    prob = IVProblem(
        f=lambda x, y: -w2 * np.asarray(y, dtype=float),
        x0=0.0,
        y0=(1.0,),
        dy0=(0.0,),
        exact=lambda x: np.array([math.cos(omega * x)]),
        lipschitz_hint=w2,
        exact_dd=lambda x: np.array([-w2 * math.cos(omega * x)]),
    )
    return ProblemCatalogEntry("harmonic", prob, float(omega), f"y'' = -{omega:g}^2 y, exact cos({omega:g} x)")


def inhomogeneous_oscillator() -> ProblemCatalogEntry:
    """y'' = -100 y + 99 sin x, y(0) = 1, y'(0) = 11; y = cos 10x + sin 10x + sin x."""

    def exact(x):
        return np.array([math.cos(10 * x) + math.sin(10 * x) + math.sin(x)])

    def exact_dd(x):
        return np.array([-100 * (math.cos(10 * x) + math.sin(10 * x)) - math.sin(x)])

    prob = IVProblem(
        f=lambda x, y: -100.0 * np.asarray(y, dtype=float) + 99.0 * math.sin(x),
        x0=0.0,
        y0=(1.0,),
        dy0=(11.0,),
        exact=exact,
        lipschitz_hint=100.0,
        exact_dd=exact_dd,
    )
    return ProblemCatalogEntry("inhomogeneous", prob, 10.0, "forced oscillator; k = 10 fits the free part only")


def kepler_circular() -> ProblemCatalogEntry:
    """Planar two-body problem y'' = -y/|y|^3 on the unit circular orbit."""

    def f(x, y):
        y = np.asarray(y, dtype=float)
        r = math.hypot(y[0], y[1])
        return -y / r**3

    prob = IVProblem(
        f=f,
        x0=0.0,
        y0=(1.0, 0.0),
        dy0=(0.0, 1.0),
        exact=lambda t: np.array([math.cos(t), math.sin(t)]),
        lipschitz_hint=3.0,
        exact_dd=lambda t: np.array([-math.cos(t), -math.sin(t)]),
    )
    return ProblemCatalogEntry("kepler", prob, 1.0, "circular orbit, exact (cos t, sin t)")


def kepler_energy(y: np.ndarray, v: np.ndarray) -> np.ndarray:
    """0.5 |v|^2 - 1/|y| rowwise."""
    y = np.atleast_2d(y)
    v = np.atleast_2d(v)
    return 0.5 * np.sum(v * v, axis=1) - 1.0 / np.hypot(y[:, 0], y[:, 1])


CATALOG = {
    "harmonic": harmonic,
    "inhomogeneous": inhomogeneous_oscillator,
    "kepler": kepler_circular,
}


def get_problem(name: str, omega: float | None = None) -> ProblemCatalogEntry:
    if name not in CATALOG:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(CATALOG)}")
    if name == "harmonic":
        return harmonic(1.0 if omega is None else omega)
    return CATALOG[name]()


def list_problems() -> list[dict]:
    return [get_problem(name).to_dict() for name in CATALOG]


def exact_residual(entry: ProblemCatalogEntry, xs=None) -> float:
    """max |exact'' - f(x, exact)| over sample points."""
    p = entry.problem
    if p.exact is None or p.exact_dd is None:
        raise ValueError(f"{entry.name} has no analytic second derivative")
    if xs is None:
        xs = np.linspace(p.x0, p.x0 + 10.0, 100)
    return max(float(np.max(np.abs(p.exact_dd(x) - p.f(x, p.exact(x))))) for x in xs)
