"""Characteristic roots, periodicity, stability regions and phase-lag.

Applying a symmetric method to y'' = -omega^2 y gives the characteristic
equation sum_j A_j (zeta^j + zeta^-j) + A_0 = 0 with A_j = a_j + nu^2 b_j,
nu = omega h.  The phase-lag is t = nu - lambda(nu), where exp(+-i lambda) is
the principal root pair.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from . import _numeric
from .ef_fitting import classical_limit, solve_ef_coefficients
from .errors import (
    DegenerateDegreeError,
    EFMSError,
    FitFailure,
    InconsistencyError,
    InsufficientDataError,
    OutOfRegionError,
    SingularNormalizationError,
)
from .method_core import ROOT_TOL, CoefficientSet, MethodSpec, order_and_error_constant

PAIR_TOL = 1e-6
DEFAULT_DPS = 30
NOISE_FACTOR = 1e3


@dataclass(frozen=True)
class CharacteristicModel:
    J: int
    A: tuple
    nu: float
    theta: float


@dataclass
class StabilityGrid:
    nu_axis: np.ndarray
    second_axis: np.ndarray
    axis: str  # "r" or "theta"
    periodic: np.ndarray
    excluded: int = 0

    def to_rows(self):
        for i, nu in enumerate(self.nu_axis):
            for j, s in enumerate(self.second_axis):
                theta = s * nu if self.axis == "r" else s
                yield float(nu), float(theta), bool(self.periodic[i, j])


@dataclass
class PhaseLagFit:
    q: int | None
    c: float
    r: float
    fit_points: list[tuple[float, float]]
    slope_residual: float
    slope: float = float("nan")
    c_loglog: float = float("nan")
    exact_zero: bool = False
    excluded_points: int = 0

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "c_fit": self.c,
            "r": self.r,
            "slope": self.slope,
            "slope_residual": self.slope_residual,
            "c_loglog": self.c_loglog,
            "exact_zero": self.exact_zero,
            "n_points": len(self.fit_points),
        }


def characteristic_model(cs: CoefficientSet, nu) -> CharacteristicModel:
    nu2 = nu * nu
    A = tuple(a + nu2 * b for a, b in zip(cs.a, cs.b))
    return CharacteristicModel(cs.J, A, nu, cs.theta)


def characteristic_roots(cm: CharacteristicModel) -> np.ndarray:
    """Companion-matrix roots of zeta^(J/2) times the characteristic equation."""
    A = [float(v) for v in cm.A]
    m = cm.J // 2
    if not any(A):
        raise DegenerateDegreeError("all A_j vanish")
    if abs(A[m]) < 1e-14:
        raise DegenerateDegreeError(f"leading coefficient A_{m} = {A[m]:.3g} vanishes")
    coeffs = [A[abs(k - m)] for k in range(cm.J + 1)]
    return np.roots(coeffs)


def principal_pair(cs: CoefficientSet, nu: float, tol: float = ROOT_TOL):
    """Principal roots (zeta, conj partner) when the periodicity condition holds, else None."""
    try:
        roots = characteristic_roots(characteristic_model(cs.to_float(), float(nu)))
    except DegenerateDegreeError:
        return None
    mods = np.abs(roots)
    if np.any(mods > 1.0 + tol):
        return None
    on_circle = np.flatnonzero(np.abs(mods - 1.0) < tol)
    if on_circle.size < 2:
        return None
    angles = np.angle(roots[on_circle])
    i1 = on_circle[np.argmin(np.abs(angles - nu))]
    z1 = roots[i1]
    if z1.imag <= 0:
        return None
    others = [i for i in on_circle if i != i1]
    i2 = min(others, key=lambda i: abs(roots[i] - np.conj(z1)))
    if abs(roots[i2] - np.conj(z1)) > PAIR_TOL:
        return None
    return z1, roots[i2]


def is_periodic_point(cs: CoefficientSet, nu: float, tol: float = ROOT_TOL) -> bool:
    return nu > 0 and principal_pair(cs, nu, tol) is not None


def _coefficients(method, theta) -> CoefficientSet:
    if isinstance(method, CoefficientSet):
        return method
    return solve_ef_coefficients(method, theta)


def periodicity_interval(method, theta: float = 0.0, nu2_max: float = 100.0, nu2_step: float = 0.02,
                         rtol: float = 1e-10) -> float:
    """Largest nu0^2 with every grid point of (0, nu0^2) periodic; bisection at the edge.

    Returns 0.0 when nothing below nu^2 = 0.01 is periodic and ``inf`` when the
    whole scan up to ``nu2_max`` is periodic.
    """
    cs = _coefficients(method, theta)

    def ok(nu2):
        return is_periodic_point(cs, math.sqrt(nu2))

    if not any(ok(v) for v in (1e-4, 1e-3, 1e-2)):
        return 0.0
    lo = 0.01
    for v in np.arange(0.01 + nu2_step, nu2_max + nu2_step / 2, nu2_step):
        if ok(v):
            lo = float(v)
        else:
            hi = float(v)
            break
    else:
        return math.inf
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _threads(threads):
    return os.cpu_count() or 1 if threads is None else max(1, int(threads))


def stability_region_scan(spec: MethodSpec, nu_axis: Sequence[float], second_axis: Sequence[float],
                          axis: str = "r", threads: int | None = None) -> StabilityGrid:
    """Periodicity predicate over (nu, theta = r nu) or (nu, theta) grid cells."""
    if axis not in ("r", "theta"):
        raise ValueError(f"axis must be 'r' or 'theta', got {axis!r}")
    nu_axis = np.asarray(nu_axis, dtype=float)
    second_axis = np.asarray(second_axis, dtype=float)
    if nu_axis.size == 0 or second_axis.size == 0:
        raise ValueError("axes must be nonempty")
    if np.any(nu_axis <= 0) or np.any(second_axis < 0):
        raise ValueError("nu axis must be positive and the second axis non-negative")

    fixed = solve_ef_coefficients(spec, 0.0) if spec.is_classical else None

    def row(nu):
        out, bad = [], 0
        for s in second_axis:
            theta = s * nu if axis == "r" else s
            try:
                cs = fixed or solve_ef_coefficients(spec, theta, warn=False)
                out.append(is_periodic_point(cs, nu))
            except EFMSError:
                out.append(False)
                bad += 1
        return out, bad

    n = _threads(threads)
    if n == 1:
        results = [row(nu) for nu in nu_axis]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(row, nu_axis))
    periodic = np.array([r for r, _ in results], dtype=bool).reshape(nu_axis.size, second_axis.size)
    return StabilityGrid(nu_axis, second_axis, axis, periodic, sum(b for _, b in results))


def _working(cs: CoefficientSet):
    """Coefficient set in the arithmetic used for phase quantities."""
    if cs.dps is None and _numeric.is_exact(cs.a + cs.b):
        return cs.to_mp(DEFAULT_DPS + 10)
    return cs


def _trig_residual(A, lam, lib):
    """2 sum A_j cos(j lam) + A_0, written to avoid cancellation as lam -> 0."""
    S = A[0] + 2 * sum(A[1:])
    return S - 4 * sum(A[j] * lib.sin(j * lam / 2) ** 2 for j in range(1, len(A)))


def _refine_lambda(A, lam, lib, eps):
    lam0 = lam
    for _ in range(40):
        d = -2 * sum(j * A[j] * lib.sin(j * lam) for j in range(1, len(A)))
        if d == 0:
            break
        step = _trig_residual(A, lam, lib) / d
        lam = lam - step
        if abs(step) <= 4 * eps * abs(lam):
            break
    if abs(float(lam) - float(lam0)) > 1e-6:
        return lam0
    return lam


def phase_lag(cs: CoefficientSet, nu: float) -> float:
    """t = nu - lambda(nu) at a point of the stability region.

    The principal root from the companion matrix is polished by Newton's
    method on 2 sum A_j cos(j lambda) + A_0 = 0 in the coefficients' own
    precision, so t stays accurate when it is many orders below nu.
    """
    pair = principal_pair(cs, nu)
    if pair is None:
        raise OutOfRegionError(f"nu = {nu} (theta = {float(cs.theta)}) is outside the stability region")
    cs = _working(cs)
    dps = cs.dps
    with _numeric.precision(dps):
        lib = _numeric.lib_for(dps)
        nu_w = _numeric.convert(nu, dps)
        A = characteristic_model(cs, nu_w).A
        eps = _numeric.EPS if dps is None else mpmath.mpf(10) ** (-dps)
        lam = _refine_lambda(A, _numeric.convert(float(np.angle(pair[0])), dps), lib, eps)
        return float(nu_w - lam)


def _richardson(values: list[float]) -> float:
    """Extrapolate g(nu_k), nu_k = nu_0 / 2^k, assuming an even expansion in nu."""
    table = [list(values)]
    for i in range(1, len(values)):
        f = 4.0**i
        prev = table[-1]
        table.append([prev[k] + (prev[k] - prev[k - 1]) / (f - 1) for k in range(1, len(prev))])
    return table[-1][-1]


def fit_phaselag(spec: MethodSpec, r: float, nu_min: float = 1e-2, nu_max: float = 0.3, n_points: int = 16,
                 dps: int | None = DEFAULT_DPS, richardson_levels: int = 4) -> PhaseLagFit:
    """Measure the phase-lag order q and constant c(r) from t(nu) at theta = r nu.

    Points with |t| below 1e3 * eps * nu are discarded.  q + 1 comes from a
    log-log least-squares slope; c from Richardson extrapolation of
    t / nu^(q+1) on nu_max, nu_max/2, ...
    """
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r must lie in [0, 1], got {r}")

    def sample(nu):
        cs = solve_ef_coefficients(spec, r * nu, dps=dps)
        if not is_periodic_point(cs, nu):
            return None
        return phase_lag(cs, nu)

    points, excluded = [], 0
    for nu in np.geomspace(nu_min, nu_max, n_points):
        t = sample(float(nu))
        if t is None:
            excluded += 1
        else:
            points.append((float(nu), t))
    usable = [(nu, t) for nu, t in points if abs(t) >= NOISE_FACTOR * _numeric.EPS * nu]
    if len(usable) < 4:
        if points and len(usable) == 0:
            return PhaseLagFit(None, 0.0, r, [], 0.0, exact_zero=True, excluded_points=excluded)
        raise InsufficientDataError(
            f"only {len(usable)} usable phase-lag samples at r = {r}",
            {"points": points, "excluded": excluded},
        )
    signs = {math.copysign(1.0, t) for _, t in usable}
    if len(signs) > 1:
        raise FitFailure(f"phase-lag changes sign across the fit window at r = {r}", {"points": usable})
    sign = signs.pop()
    x = np.log([nu for nu, _ in usable])
    y = np.log([abs(t) for _, t in usable])
    slope, intercept = np.polyfit(x, y, 1)
    k = int(round(slope))
    diag = {"slope": float(slope), "points": usable}
    if abs(slope - k) > 0.1:
        raise FitFailure(f"log-log slope {slope:.4f} is not near an integer", diag)
    q = k - 1
    if q % 2:
        raise FitFailure(f"odd phase-lag order {q} from slope {slope:.4f}", diag)
    resid = float(np.max(np.abs(y - (slope * x + intercept))))
    c_loglog = sign * math.exp(float(np.mean(y - k * x)))

    ladder = []
    nu = nu_max
    while nu >= nu_min * (1 - 1e-12) and len(ladder) < richardson_levels:
        t = sample(nu)
        if t is None or abs(t) < NOISE_FACTOR * _numeric.EPS * nu:
            break
        ladder.append(t / nu ** (q + 1))
        nu /= 2
    c = _richardson(ladder) if ladder else c_loglog
    return PhaseLagFit(q, float(c), r, usable, resid, float(slope), c_loglog, False, excluded)


@dataclass
class PhaseLagConstant:
    """c(r) = c (1 - r^2)^(P+1) with c the classical phase-lag constant."""

    c: Fraction
    P: int
    p: int
    error_constant: Fraction
    sum_j2_a: Fraction

    def __call__(self, r):
        return float(self.c) * (1.0 - r * r) ** (self.P + 1)

    def to_dict(self) -> dict:
        return {"c": float(self.c), "c_exact": str(self.c), "P": self.P, "p": self.p,
                "C": float(self.error_constant)}


def plte_constant_closed_form(spec: MethodSpec) -> PhaseLagConstant:
    """Closed-form phase-lag constant from the classical error constant."""
    cs0 = classical_limit(spec, exact=True)
    rep = order_and_error_constant(cs0)
    sum_j2 = sum(j * j * cs0.a[j] for j in range(1, cs0.half + 1))
    sigma1 = cs0.b[0] + 2 * sum(cs0.b[1:])
    if abs(sum_j2) < 1e-12 or sigma1 == 0:
        raise InconsistencyError(
            f"sum j^2 a_j(0) = {float(sum_j2):.3g}, sigma(1) = {float(sigma1):.3g}: method is degenerate or inconsistent"
        )
    c = (-1) ** (rep.p // 2) * Fraction(rep.error_constant) / (2 * sum_j2)
    return PhaseLagConstant(c, spec.tuning, rep.p, Fraction(rep.error_constant), Fraction(sum_j2))


def theorem1_residual(cs: CoefficientSet, nu) -> float:
    """[2 sum A_j cos(j nu) + A_0] / [2 sum j^2 A_j] with A_j = a_j(theta) + nu^2 b_j(theta)."""
    cs = _working(cs)
    dps = cs.dps
    with _numeric.precision(dps):
        lib = _numeric.lib_for(dps)
        nu_w = _numeric.convert(nu, dps)
        A = characteristic_model(cs, nu_w).A
        den = 2 * sum(j * j * A[j] for j in range(1, len(A)))
        if abs(float(den)) < 1e-300:
            raise SingularNormalizationError("2 sum j^2 A_j vanishes")
        return float(_trig_residual(A, nu_w, lib) / den)


def theorem1_ratio(spec: MethodSpec, nu: float, r: float, q: int | None = None,
                   dps: int | None = DEFAULT_DPS) -> float:
    """theorem1_residual / (-nu^(q+2)) at theta = r nu; tends to c(r) as nu -> 0."""
    q = spec.order if q is None else q
    cs = solve_ef_coefficients(spec, r * nu, dps=dps)
    return theorem1_residual(cs, nu) / -(nu ** (q + 2))


@dataclass
class Theorem2Row:
    r: float
    q: int | None
    c_fit: float
    c_scaled: float
    c_closed: float
    deviation: float


@dataclass
class Theorem2Report:
    spec_label: str
    c0_fit: float
    exponent: int
    rows: list[Theorem2Row] = field(default_factory=list)

    @property
    def max_deviation(self) -> float:
        return max((row.deviation for row in self.rows), default=0.0)

    def to_dict(self) -> dict:
        return {
            "label": self.spec_label,
            "c0_fit": self.c0_fit,
            "exponent": self.exponent,
            "max_deviation": self.max_deviation,
            "rows": [row.__dict__ for row in self.rows],
        }


def theorem2_check(spec: MethodSpec, r_list: Sequence[float] = (0.0, 0.3, 0.6, 0.9),
                   threads: int | None = 1, dps: int | None = DEFAULT_DPS, **fit_kwargs) -> Theorem2Report:
    """Compare fitted c(r) with c_fit(0) (1 - r^2)^(P+1)."""
    for r in r_list:
        if not 0.0 <= r <= 0.95:
            raise ValueError(f"r = {r} outside [0, 0.95]")
    rs = [0.0] + [r for r in r_list if r != 0.0]

    def fit(r):
        return fit_phaselag(spec, r, dps=dps, **fit_kwargs)

    n = _threads(threads)
    if n == 1:
        fits = [fit(r) for r in rs]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            fits = list(pool.map(fit, rs))
    by_r = dict(zip(rs, fits))
    closed = plte_constant_closed_form(spec)
    c0 = by_r[0.0].c
    e = spec.tuning + 1
    report = Theorem2Report(spec.label, c0, e)
    for r in r_list:
        f = by_r[r]
        scaled = c0 * (1.0 - r * r) ** e
        dev = abs(f.c / scaled - 1.0) if scaled != 0 else math.inf
        report.rows.append(Theorem2Row(float(r), f.q, f.c, scaled, closed(r), dev))
    return report
