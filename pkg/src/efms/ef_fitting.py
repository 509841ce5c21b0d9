"""Coefficients of exponentially (trigonometrically) fitted symmetric methods.

The method is required to annihilate every member of the reference set
``{1, x, ..., x^K, x^m cos(kx), x^m sin(kx) for m <= P}``.  For symmetric
coefficients only the members that are even about the centre of the step
block give independent conditions, so the system has ``(K + 1)/2 + P + 1``
rows.

Near theta = 0 the trigonometric rows become nearly dependent on the
polynomial rows (condition number ~ theta^-(2P+2)).  The default "canonical"
basis avoids this: it uses the even solutions psi_s of
``D^(K+1) (D^2 + theta^2)^(P+1) psi = 0`` with ``psi_s^(2t)(0) = delta_st``,
which span the same space and tend to ``x^(2s)/(2s)!`` as theta -> 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import _numeric
from .errors import ConditionWarning, SingularSystemError
from .method_core import (
    CoefficientSet,
    MethodSpec,
    apply_functional,
    poly_label,
    trig_label,
)

COND_WARN = 1e8
COND_ERROR = 1e12
# canonical basis is used while theta * J/2 stays below this
CANONICAL_LIMIT = 2.0


@dataclass
class MomentSystem:
    """Square linear system for the free centered coefficients.

    ``matrix`` and ``rhs`` are numpy arrays for double precision and nested
    lists for exact or multiprecision systems.  ``basis`` records how the rows
    were formed: ``"direct"`` (one row per reference function),
    ``"canonical"`` (rows from the psi_s basis of the same span) or
    ``"polynomial"`` (the theta = 0 limit).
    """

    matrix: object
    rhs: object
    condition_labels: list[str]
    unknowns: list[str]
    basis: str
    theta: float

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rhs), len(self.unknowns)


def _poly_table(i, m):
    vals = [x ** (2 * i) for x in range(m + 1)]
    dds = [2 * i * (2 * i - 1) * x ** (2 * i - 2) if i > 0 else 0 for x in range(m + 1)]
    return vals, dds


def _trig_table(mm, theta, m, lib):
    vals, dds = [], []
    use_cos = mm % 2 == 0
    for x in range(m + 1):
        c, s = lib.cos(theta * x), lib.sin(theta * x)
        f, g = (c, s) if use_cos else (s, c)
        sign = -1 if use_cos else 1
        v = x**mm * f
        dd = -theta * theta * x**mm * f
        if mm >= 1:
            dd = dd + sign * 2 * mm * theta * x ** (mm - 1) * g
        if mm >= 2:
            dd = dd + mm * (mm - 1) * x ** (mm - 2) * f
        vals.append(v)
        dds.append(dd)
    return vals, dds


def _direct_tables(spec: MethodSpec, theta, lib):
    m = spec.J // 2
    tables = [_poly_table(i, m) for i in range(spec.n_poly)]
    tables += [_trig_table(mm, theta, m, lib) for mm in range(spec.tuning + 1)]
    return tables


def _recurrence(spec: MethodSpec, t2):
    n = spec.n_conditions
    q = [0] * n
    for i in range(spec.tuning + 2):
        l = spec.n_poly + i
        if l < n:
            q[l] = math.comb(spec.tuning + 1, i) * t2 ** (spec.tuning + 1 - i)
    return q


@lru_cache(maxsize=None)
def _taylor_matrices(T: int, m: int):
    xs = np.arange(m + 1, dtype=float)
    two_t = 2 * np.arange(T)
    inv_fact = np.array([1.0 / math.factorial(k) for k in range(2 * T)])
    P0 = xs[None, :] ** two_t[:, None] * inv_fact[two_t][:, None]
    P2 = np.zeros_like(P0)
    P2[1:] = xs[None, :] ** (two_t[1:, None] - 2) * inv_fact[two_t[1:] - 2][:, None]
    P0.setflags(write=False)
    P2.setflags(write=False)
    return P0, P2


def _canonical_tables_float(spec: MethodSpec, theta: float):
    n, m = spec.n_conditions, spec.J // 2
    q = np.array(_recurrence(spec, theta * theta), dtype=float)
    # x <= m and theta m <= 2: terms beyond this are below 1e-20 relative
    T = n + 12 + 4 * m
    U = np.zeros((n, T))
    U[:, :n] = np.eye(n)
    for t in range(n, T):
        U[:, t] = -U[:, t - n : t] @ q
    P0, P2 = _taylor_matrices(T, m)
    return list(zip(U @ P0, U @ P2))


def _canonical_tables_generic(spec: MethodSpec, theta, one):
    """Same as the float version for Fraction or mpf arithmetic."""
    n, m = spec.n_conditions, spec.J // 2
    t2 = theta * theta
    q = _recurrence(spec, t2)
    exact_zero = t2 == 0
    T = n if exact_zero else n + 60
    tables = []
    for s in range(n):
        u = [0 * one] * T
        u[s] = one
        for t in range(n, T):
            u[t] = -sum(q[l] * u[t - n + l] for l in range(n))
        vals, dds = [], []
        for x in range(m + 1):
            vals.append(sum(u[t] * x ** (2 * t) / math.factorial(2 * t) for t in range(T)))
            dds.append(sum(u[t] * x ** (2 * t - 2) / math.factorial(2 * t - 2) for t in range(1, T)))
        tables.append((vals, dds))
    return tables


def _assemble(spec: MethodSpec, tables, convert):
    m = spec.J // 2
    fixed = spec.frozen_map
    unknowns = spec.unknowns
    rows, rhs = [], []
    for vals, dds in tables:
        coef = {"a0": vals[0], "b0": -dds[0]}
        for j in range(1, m + 1):
            coef[f"a{j}"] = 2 * vals[j]
            coef[f"b{j}"] = -2 * dds[j]
        r = -coef[f"a{m}"]
        for key, v in fixed.items():
            r = r - coef[key] * convert(v)
        rows.append([coef[u] for u in unknowns])
        rhs.append(r)
    return rows, rhs


def _pick_basis(spec: MethodSpec, theta, basis: str) -> str:
    if theta == 0:
        return "polynomial"
    if basis == "auto":
        return "canonical" if float(theta) * (spec.J // 2) <= CANONICAL_LIMIT else "direct"
    if basis not in ("canonical", "direct"):
        raise ValueError(f"unknown basis {basis!r}")
    return basis


def build_moment_system(spec: MethodSpec, theta: float, basis: str = "auto", dps: int | None = None) -> MomentSystem:
    """Exactness conditions at ``theta`` with the step size scaled to 1."""
    if theta < 0:
        raise ValueError(f"theta must be non-negative, got {theta}")
    spec.check_square()
    kind = _pick_basis(spec, theta, basis)
    labels = spec.condition_labels
    if kind == "polynomial":
        one = Fraction(1)
        tables = _canonical_tables_generic(spec, Fraction(0), one)
        rows, rhs = _assemble(spec, tables, Fraction)
        if dps is None:
            return MomentSystem(
                np.array(rows, dtype=float), np.array(rhs, dtype=float), labels, spec.unknowns, kind, 0.0
            )
        with _numeric.precision(dps):
            rows = [[_numeric.to_mp(v) for v in row] for row in rows]
            rhs = [_numeric.to_mp(v) for v in rhs]
        return MomentSystem(rows, rhs, labels, spec.unknowns, kind, 0.0)

    with _numeric.precision(dps):
        if dps is None:
            th = float(theta)
            tables = _canonical_tables_float(spec, th) if kind == "canonical" else _direct_tables(spec, th, math)
            rows, rhs = _assemble(spec, tables, float)
            return MomentSystem(
                np.array(rows, dtype=float), np.array(rhs, dtype=float), labels, spec.unknowns, kind, th
            )
        th = _numeric.to_mp(theta)
        if kind == "canonical":
            tables = _canonical_tables_generic(spec, th, mpmath.mpf(1))
        else:
            tables = _direct_tables(spec, th, mpmath)
        rows, rhs = _assemble(spec, tables, _numeric.to_mp)
    return MomentSystem(rows, rhs, labels, spec.unknowns, kind, float(theta))


def _equilibrate(A: np.ndarray):
    r = 1.0 / np.maximum(np.abs(A).max(axis=1), np.finfo(float).tiny)
    Ar = A * r[:, None]
    c = 1.0 / np.maximum(np.abs(Ar).max(axis=0), np.finfo(float).tiny)
    return r, c


def _check_condition(As: np.ndarray, theta, warn: bool = True) -> float:
    with np.errstate(all="ignore"):
        cond = float(np.linalg.cond(As))
    if not np.isfinite(cond) or cond > COND_ERROR:
        raise SingularSystemError(
            f"moment system is singular at theta = {float(theta):.17g} (condition estimate {cond:.3g})",
            condition=cond,
        )
    if warn and cond > COND_WARN:
        warnings.warn(
            f"moment system ill-conditioned at theta = {float(theta):.6g} (condition estimate {cond:.3g})",
            ConditionWarning,
            stacklevel=3,
        )
    return cond


def _solve_exact(rows, rhs):
    n = len(rhs)
    M = [list(map(Fraction, r)) + [Fraction(b)] for r, b in zip(rows, rhs)]
    for col in range(n):
        piv = max(range(col, n), key=lambda i: abs(M[i][col]))
        if M[piv][col] == 0:
            raise SingularSystemError("polynomial limit system is singular", condition=float("inf"))
        M[col], M[piv] = M[piv], M[col]
        for i in range(col + 1, n):
            f = M[i][col] / M[col][col]
            if f:
                for k in range(col, n + 1):
                    M[i][k] -= f * M[col][k]
    x = [Fraction(0)] * n
    for i in reversed(range(n)):
        x[i] = (M[i][n] - sum(M[i][k] * x[k] for k in range(i + 1, n))) / M[i][i]
    return x


def solve_moment_system(system: MomentSystem, warn: bool = True):
    """Solve with row/column equilibration, LU with partial pivoting and a condition check."""
    if isinstance(system.matrix, np.ndarray):
        A, b = system.matrix, system.rhs
        r, c = _equilibrate(A)
        As = A * r[:, None] * c[None, :]
        _check_condition(As, system.theta, warn)
        return list(c * lu_solve(lu_factor(As, check_finite=True), b * r))
    # multiprecision: condition from a double-precision copy, solve in mpmath
    Af = np.array([[float(v) for v in row] for row in system.matrix])
    r, c = _equilibrate(Af)
    _check_condition(Af * r[:, None] * c[None, :], system.theta, warn)
    n = len(system.rhs)
    As = mpmath.matrix(n, n)
    bs = mpmath.matrix(n, 1)
    for i in range(n):
        for j in range(n):
            As[i, j] = system.matrix[i][j] * r[i] * c[j]
        bs[i] = system.rhs[i] * r[i]
    sol = mpmath.lu_solve(As, bs)
    return [sol[j] * c[j] for j in range(n)]


def _coefficient_set(spec: MethodSpec, values, theta, convert, dps) -> CoefficientSet:
    m = spec.J // 2
    known = {f"a{m}": convert(1)}
    known.update({k: convert(v) for k, v in spec.frozen_map.items()})
    known.update({u: convert(v) for u, v in zip(spec.unknowns, values)})
    a = tuple(known[f"a{j}"] for j in range(m + 1))
    b = tuple(known[f"b{j}"] for j in range(m + 1))
    return CoefficientSet(spec.J, theta, a, b, dps=dps)


@lru_cache(maxsize=256)
def _classical_exact(spec: MethodSpec) -> CoefficientSet:
    tables = _canonical_tables_generic(spec, Fraction(0), Fraction(1))
    rows, rhs = _assemble(spec, tables, Fraction)
    values = _solve_exact(rows, rhs)
    return _coefficient_set(spec, values, 0.0, Fraction, None)


def classical_limit(spec: MethodSpec, dps: int | None = None, exact: bool = False) -> CoefficientSet:
    """theta = 0 coefficients from the polynomial limit system, solved in exact rationals.

    Returns Fractions when ``exact`` is set, mpf values when ``dps`` is given,
    floats otherwise.
    """
    cs = _classical_exact(spec)
    if exact:
        return cs
    if dps is not None:
        return cs.to_mp(dps)
    return cs.to_float()


def solve_ef_coefficients(spec: MethodSpec, theta: float, dps: int | None = None,
                          basis: str = "auto", warn: bool = True) -> CoefficientSet:
    """Centered coefficients a_j(theta), b_j(theta) with a_{J/2} = 1.

    theta = 0 and classical specs take the exact polynomial-limit path.  Raises
    SingularSystemError at resonant theta (condition estimate above 1e12).
    """
    if theta < 0:
        raise ValueError(f"theta must be non-negative, got {theta}")
    if theta == 0 or spec.is_classical:
        cs = classical_limit(spec, dps=dps)
        return CoefficientSet(cs.J, float(theta), cs.a, cs.b, dps=cs.dps)
    system = build_moment_system(spec, theta, basis=basis, dps=dps)
    with _numeric.precision(dps):
        values = solve_moment_system(system, warn=warn)
        convert = float if dps is None else _numeric.to_mp
        return _coefficient_set(spec, values, float(theta), convert, dps)


def reference_functions(spec: MethodSpec, k, lib=math):
    """All members of the (effective) reference set as (label, z, z'') triples."""
    out = []
    for i in range(2 * spec.n_poly):
        out.append((
            "1" if i == 0 else f"x^{i}",
            lambda x, i=i: x**i,
            lambda x, i=i: i * (i - 1) * x ** (i - 2) if i >= 2 else 0 * x,
        ))
    for m in range(spec.tuning + 1):
        for use_cos in (True, False):
            f, g = (lib.cos, lib.sin) if use_cos else (lib.sin, lib.cos)
            sign = -1 if use_cos else 1

            def z(x, m=m, f=f):
                return x**m * f(k * x)

            def z_dd(x, m=m, f=f, g=g, sign=sign):
                v = -k * k * x**m * f(k * x)
                if m >= 1:
                    v = v + sign * 2 * m * k * x ** (m - 1) * g(k * x)
                if m >= 2:
                    v = v + m * (m - 1) * x ** (m - 2) * f(k * x)
                return v

            name = ("cos" if use_cos else "sin") if m == 0 else f"x^{m}·{'cos' if use_cos else 'sin'}"
            out.append((name, z, z_dd))
    return out


def exactness_check(cs: CoefficientSet, spec: MethodSpec, k: float | None = None,
                    xs=None) -> float:
    """Largest |L[1, a] z(x)| over the reference set of ``spec`` (h = 1, k = theta)."""
    m = cs.J // 2
    xs = (-m - 0.37, -m, -m + 0.41) if xs is None else xs
    dps = cs.dps
    with _numeric.precision(dps):
        kk = _numeric.convert(cs.theta if k is None else k, dps)
        lib = _numeric.lib_for(dps)
        worst = 0.0
        for _, z, z_dd in reference_functions(spec, kk, lib):
            for x in xs:
                xv = _numeric.convert(x, dps)
                worst = max(worst, abs(float(apply_functional(cs, z, z_dd, xv, 1))))
    return worst


__all__ = [
    "MomentSystem",
    "build_moment_system",
    "solve_moment_system",
    "solve_ef_coefficients",
    "classical_limit",
    "exactness_check",
    "reference_functions",
    "poly_label",
    "trig_label",
]
