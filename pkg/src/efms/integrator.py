"""Fixed-step symmetric multistep integration of y'' = f(x, y)."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .ef_fitting import solve_ef_coefficients
from .errors import ImplicitDivergenceError
from .method_core import CoefficientSet, MethodSpec, to_standard

MAX_SWEEPS = 50
STALL_TOL = 1e-13
EPS = np.finfo(float).eps


@dataclass(frozen=True)
class IVProblem:
    f: Callable[[float, np.ndarray], np.ndarray]
    x0: float
    y0: tuple
    dy0: tuple
    exact: Callable[[float], np.ndarray] | None = None
    lipschitz_hint: float | None = None
    exact_dd: Callable[[float], np.ndarray] | None = None

    @property
    def dim(self) -> int:
        return len(self.y0)


@dataclass
class Trajectory:
    xs: np.ndarray
    ys: np.ndarray  # (n_steps + 1, d)
    implicit_iters: np.ndarray
    max_residual: float
    h: float
    coefficients: CoefficientSet
    f_evals: int = 0
    problem: IVProblem | None = field(default=None, repr=False)

    def errors(self) -> np.ndarray | None:
        if self.problem is None or self.problem.exact is None:
            return None
        ex = np.array([np.atleast_1d(self.problem.exact(x)) for x in self.xs], dtype=float)
        return self.ys - ex

    def max_error(self) -> float | None:
        err = self.errors()
        return None if err is None else float(np.max(np.abs(err)))


def _as_vec(v) -> np.ndarray:
    return np.atleast_1d(np.asarray(v, dtype=float))


def bootstrap_starts(problem: IVProblem, cs: CoefficientSet, h: float) -> np.ndarray:
    """y_0 .. y_{J-1}: exact samples when available, else DOP853 at max step h/100."""
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    xs = problem.x0 + h * np.arange(cs.J)
    if problem.exact is not None:
        return np.array([_as_vec(problem.exact(x)) for x in xs])
    d = problem.dim

    def rhs(x, u):
        return np.concatenate([u[d:], _as_vec(problem.f(x, u[:d]))])

    u0 = np.concatenate([_as_vec(problem.y0), _as_vec(problem.dy0)])
    sol = solve_ivp(rhs, (xs[0], xs[-1]), u0, method="DOP853", t_eval=xs, max_step=h / 100,
                    rtol=1e-13, atol=1e-15)
    if not sol.success:
        raise RuntimeError(f"bootstrap failed: {sol.message}")
    return sol.y[:d].T.copy()


def _resolve(method, h: float, theta: float | None, k: float | None) -> CoefficientSet:
    if isinstance(method, CoefficientSet):
        return method.to_float()
    if theta is None:
        theta = 0.0 if k is None else k * h
    return solve_ef_coefficients(method, theta).to_float()


class _Stepper:
    def __init__(self, cs: CoefficientSet, f, h: float, max_sweeps: int = MAX_SWEEPS):
        alpha, beta = to_standard(cs)
        self.J = cs.J
        self.alpha = np.array([float(v) for v in alpha])
        self.beta = np.array([float(v) for v in beta])
        self.f = f
        self.h = h
        self.h2bJ = h * h * self.beta[-1]
        self.explicit = self.beta[-1] == 0.0
        self.f_evals = 0
        self.max_sweeps = max_sweeps

    def rhs(self, x, y):
        self.f_evals += 1
        return _as_vec(self.f(x, y))

    def step(self, ywin: np.ndarray, fwin: np.ndarray, x_new: float, index: int = 0):
        """Advance one step from the last J values; returns (y, f(y), sweeps, residual)."""
        J, h = self.J, self.h
        known = -self.alpha[:J] @ ywin + h * h * (self.beta[:J] @ fwin)
        known = known / self.alpha[J]
        if self.explicit:
            return known, self.rhs(x_new, known), 0, 0.0
        c = self.h2bJ / self.alpha[J]
        f_pred = 2 * fwin[-1] - fwin[-2] if J >= 2 else fwin[-1]
        y = known + c * f_pred
        prev = math.inf
        for sweep in range(1, self.max_sweeps + 1):
            fy = self.rhs(x_new, y)
            y_next = known + c * fy
            upd = float(np.max(np.abs(y_next - y)))
            scale = max(1.0, float(np.max(np.abs(y_next))))
            y = y_next
            if upd <= 4 * EPS * scale:
                break
            # remaining error of a contraction with observed rate rho
            rho = upd / prev
            if prev < math.inf and rho < 1 and upd * rho / (1 - rho) <= EPS * scale:
                break
            if rho >= 1:
                if upd <= STALL_TOL * scale:
                    break
                raise ImplicitDivergenceError(
                    f"fixed-point iteration stalled at step {index} (update {upd:.3g}); try a smaller h"
                )
            prev = upd
        else:
            raise ImplicitDivergenceError(
                f"fixed-point iteration did not converge in {self.max_sweeps} sweeps at step {index}; try a smaller h"
            )
        fy = self.rhs(x_new, y)
        resid = float(np.max(np.abs(y - known - c * fy)))
        return y, fy, sweep, resid


def step(cs: CoefficientSet, ywin, f, x: float, h: float, fwin=None):
    """One step y_{n+J} from the J previous values y_n .. y_{n+J-1}; x is x_{n+J}."""
    st = _Stepper(cs.to_float(), f, h)
    ywin = np.array([_as_vec(v) for v in ywin])
    if fwin is None:
        fwin = np.array([st.rhs(x - (cs.J - j) * h, ywin[j]) for j in range(cs.J)])
    return st.step(ywin, np.asarray(fwin, dtype=float), x)[0]


def integrate(method: MethodSpec | CoefficientSet, problem: IVProblem, h: float, n_steps: int,
              theta: float | None = None, k: float | None = None, max_sweeps: int = MAX_SWEEPS) -> Trajectory:
    """March n_steps fixed steps of size h.

    EF coefficients are taken at theta, or at theta = k h when only the
    fitting frequency k is given; classical specs ignore both.
    """
    if h <= 0 or not math.isfinite(h):
        raise ValueError(f"h must be positive, got {h}")
    cs = _resolve(method, h, theta, k)
    J = cs.J
    if n_steps < J:
        raise ValueError(f"n_steps = {n_steps} must be at least J = {J}")
    st = _Stepper(cs, problem.f, h, max_sweeps)
    xs = problem.x0 + h * np.arange(n_steps + 1)
    ys = np.empty((n_steps + 1, problem.dim))
    fs = np.empty_like(ys)
    ys[:J] = bootstrap_starts(problem, cs, h)
    for j in range(J):
        fs[j] = st.rhs(xs[j], ys[j])
    iters = np.zeros(n_steps + 1, dtype=int)
    max_res = 0.0
    for n in range(J, n_steps + 1):
        y, fy, sweeps, res = st.step(ys[n - J : n], fs[n - J : n], xs[n], n)
        ys[n], fs[n], iters[n] = y, fy, sweeps
        max_res = max(max_res, res)
    return Trajectory(xs, ys, iters, max_res, h, cs, st.f_evals, problem)


def principal_angle(cs: CoefficientSet, nu: float) -> float | None:
    from .phase_analysis import principal_pair

    pair = principal_pair(cs, nu)
    return None if pair is None else float(np.angle(pair[0]))


def amplitude_drift(traj: Trajectory, omega: float, velocity: str = "corrected") -> float:
    """max_n |E_n - E_0| / E_0 for a run on y'' = -omega^2 y (first component).

    E_n = omega^2 y_n^2 + v_n^2 with v_n = (y_{n+1} - y_{n-1}) / (2h) scaled by
    nu / sin(lambda), lambda the argument of the principal root at nu = omega h.
    On the discrete solution A cos(n lambda + phi) this E_n is constant, so
    the result measures amplitude change alone.  ``velocity="centered"``
    uses the unscaled difference, which carries an O(nu^2) beat.
    """
    if velocity not in ("corrected", "centered"):
        raise ValueError(f"unknown velocity reconstruction {velocity!r}")
    y = traj.ys[:, 0]
    if y.size < 3:
        raise ValueError("need at least three points")
    h = traj.h
    nu = omega * h
    v = (y[2:] - y[:-2]) / (2 * h)
    if velocity == "corrected":
        lam = principal_angle(traj.coefficients, nu)
        if lam is None:
            lam = nu
        s = math.sin(lam)
        if abs(s) > 1e-300:
            v = v * (nu / s)
    with np.errstate(all="ignore"):
        E = omega**2 * y[1:-1] ** 2 + v**2
        d = np.abs(E - E[0]) / E[0]
    d = np.where(np.isfinite(d), d, np.inf)
    return float(np.max(d))


@dataclass
class ConvergenceStudy:
    hs: list[float]
    errors: list[float]
    slope: float

    def to_dict(self) -> dict:
        return {"h": self.hs, "max_error": self.errors, "slope": self.slope}


def convergence_study(method, problem: IVProblem, hs: Sequence[float], x_end: float,
                      theta: float | None = None, k: float | None = None,
                      threads: int | None = 1) -> ConvergenceStudy:
    """Max global error over [x0, x_end] for each h and the log-log slope."""
    if problem.exact is None:
        raise ValueError("convergence study needs an exact solution")

    def run(h):
        n = int(round((x_end - problem.x0) / h))
        return integrate(method, problem, h, n, theta=theta, k=k).max_error()

    if threads is None or threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            errs = list(pool.map(run, hs))
    else:
        errs = [run(h) for h in hs]
    slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    return ConvergenceStudy(list(map(float, hs)), errs, slope)
