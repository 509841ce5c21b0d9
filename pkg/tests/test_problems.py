import math

import numpy as np
import pytest
import sympy as sp

from efms.integrator import integrate
from efms.method_core import load_method_spec
from efms.problems import (
    exact_residual,
    get_problem,
    harmonic,
    inhomogeneous_oscillator,
    kepler_circular,
    kepler_energy,
    list_problems,
)

x = sp.Symbol("x", real=True)


def sympy_check(expr, rhs, y0, dy0):
    """expr solves y'' = rhs(y, x) with the given initial data."""
    assert sp.simplify(sp.diff(expr, x, 2) - rhs(expr, x)) == 0
    assert sp.simplify(expr.subs(x, 0) - y0) == 0
    assert sp.simplify(sp.diff(expr, x).subs(x, 0) - dy0) == 0


def test_harmonic_symbolic():
    w = sp.Rational(7, 2)
    sympy_check(sp.cos(w * x), lambda y, t: -w**2 * y, 1, 0)


def test_inhomogeneous_symbolic():
    expr = sp.cos(10 * x) + sp.sin(10 * x) + sp.sin(x)
    sympy_check(expr, lambda y, t: -100 * y + 99 * sp.sin(t), 1, 11)


def test_kepler_symbolic():
    cx, cy = sp.cos(x), sp.sin(x)
    r3 = (cx**2 + cy**2) ** sp.Rational(3, 2)
    assert sp.simplify(sp.diff(cx, x, 2) + cx / r3) == 0
    assert sp.simplify(sp.diff(cy, x, 2) + cy / r3) == 0


@pytest.mark.parametrize("entry", [harmonic(1.0), harmonic(10.0), inhomogeneous_oscillator(), kepler_circular()],
                         ids=["harmonic1", "harmonic10", "inhomogeneous", "kepler"])
def test_residual_invariant(entry):
    assert exact_residual(entry) < 1e-9


@pytest.mark.parametrize("entry", [harmonic(3.0), inhomogeneous_oscillator(), kepler_circular()],
                         ids=["harmonic", "inhomogeneous", "kepler"])
def test_analytic_second_derivative(entry):
    # central differences against the analytic exact''
    p = entry.problem
    h = 1e-4
    for t in np.linspace(0.1, 3.0, 7):
        fd = (p.exact(t + h) - 2 * p.exact(t) + p.exact(t - h)) / h**2
        assert np.allclose(fd, p.exact_dd(t), atol=1e-4 * max(1.0, entry.dominant_frequency**2))


def test_harmonic_values():
    e = harmonic(1.0)
    assert e.problem.exact(math.pi)[0] == pytest.approx(-1.0, abs=1e-15)
    assert e.dominant_frequency == 1.0
    assert harmonic(2.5).dominant_frequency == 2.5
    with pytest.raises(ValueError):
        harmonic(0.0)


def test_initial_data_consistent():
    for e in (harmonic(2.0), inhomogeneous_oscillator(), kepler_circular()):
        p = e.problem
        assert np.allclose(p.exact(p.x0), p.y0)
        h = 1e-6
        assert np.allclose((p.exact(h) - p.exact(-h)) / (2 * h), p.dy0, atol=1e-8)


def test_inhomogeneous_ef_beats_classical():
    p = inhomogeneous_oscillator()
    for name in ("two_step_k3p0", "two_step_k1p1", "simos_case2_ef"):
        spec = load_method_spec(name)
        ef = integrate(spec, p.problem, 0.05, 200, k=p.dominant_frequency).max_error()
        classical = integrate(spec, p.problem, 0.05, 200).max_error()
        assert classical >= 10 * ef, name


@pytest.mark.parametrize("name", ["numerov", "simos_case2_classical", "simos_case2_ef"])
def test_kepler_radius_drift(name):
    traj = integrate(load_method_spec(name), kepler_circular().problem, 0.05, 1000, k=1.0)
    r = np.hypot(traj.ys[:, 0], traj.ys[:, 1])
    assert np.max(np.abs(r - 1)) < 1e-5


def test_kepler_energy():
    p = kepler_circular().problem
    assert kepler_energy(np.array(p.y0), np.array(p.dy0))[0] == pytest.approx(-0.5)


def test_catalog():
    names = [d["name"] for d in list_problems()]
    assert names == ["harmonic", "inhomogeneous", "kepler"]
    assert get_problem("harmonic", omega=4.0).dominant_frequency == 4.0
    with pytest.raises(KeyError):
        get_problem("schrodinger")
