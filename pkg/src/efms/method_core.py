"""Symmetric multistep methods for y'' = f(x, y).

A J-step symmetric method is stored in centered form: ``a[0]`` multiplies
``y_n`` and ``a[j]`` multiplies both ``y_{n+j}`` and ``y_{n-j}``; likewise for
``b``.  The standard form (alpha_0..alpha_J, beta_0..beta_J) is a derived view.
"""

from __future__ import annotations

import json
import math
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import _numeric
from .errors import (
    InconsistencyError,
    InvalidMethodError,
    OrderUndeterminedError,
    ShapeError,
    SpecParseError,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MAX_J = 8
MAX_P = 5

ZERO_THRESHOLD = 1e-9
ROOT_TOL = 1e-8
CLUSTER_TOL = 1e-6
COPRIME_TOL = 1e-8


def poly_label(i: int) -> str:
    """Label of the i-th even power, x^(2i)."""
    return "1" if i == 0 else f"x^{2 * i}"


def trig_label(m: int) -> str:
    """Label of the even member of the pair x^m cos(kx), x^m sin(kx)."""
    base = "cos" if m % 2 == 0 else "sin"
    if m == 0:
        return base
    if m == 1:
        return f"x·{base}"
    return f"x^{m}·{base}"


def _normalize_label(label: str) -> str:
    return label.strip().replace("*", "·").replace(" ", "")


@dataclass(frozen=True)
class MethodSpec:
    """Identity of a symmetric J-step method and its reference set.

    ``frozen`` maps centered coefficient names (``"a0"``, ``"b2"``, ...) to
    fixed values.  ``drop_conditions`` removes the top member of a family of
    exactness conditions (e.g. ``"x^3·sin"``) so that frozen coefficients can
    still give a square system.
    """

    J: int
    K: int
    P: int
    frozen: Mapping[str, float] | tuple = ()
    label: str = ""
    drop_conditions: tuple[str, ...] = ()
    n_poly: int = field(init=False, repr=False)
    tuning: int = field(init=False, repr=False)

    def __post_init__(self):
        J, K, P = self.J, self.K, self.P
        if not isinstance(J, int) or J < 2 or J % 2:
            raise InvalidMethodError(f"J must be an even integer >= 2, got {J!r}")
        if J > MAX_J:
            raise InvalidMethodError(f"J = {J} exceeds the supported maximum {MAX_J}")
        if K < -1 or P < -1:
            raise InvalidMethodError(f"K and P must be >= -1, got K={K}, P={P}")
        if K == -1 and P == -1:
            raise InvalidMethodError("K = -1 and P = -1 leave an empty reference set")
        if P > MAX_P:
            raise InvalidMethodError(f"P = {P} exceeds the supported maximum {MAX_P}")
        if K % 2 == 0:
            raise InvalidMethodError(
                f"K = {K} is even; symmetric methods have even order, so K must be odd (or -1)"
            )

        items = dict(self.frozen)
        valid = {f"a{j}" for j in range(J // 2)} | {f"b{j}" for j in range(J // 2 + 1)}
        for key in items:
            if key == f"a{J // 2}":
                raise InvalidMethodError(f"{key} is fixed to 1 by normalization")
            if key not in valid:
                raise InvalidMethodError(f"unknown frozen coefficient {key!r} for J = {J}")
        frozen = tuple(sorted((k, float(v)) for k, v in items.items()))
        object.__setattr__(self, "frozen", frozen)

        n_poly, tuning = (K + 1) // 2, P
        drops = tuple(_normalize_label(d) for d in self.drop_conditions)
        for d in drops:
            if n_poly > 0 and d == poly_label(n_poly - 1):
                n_poly -= 1
            elif tuning >= 0 and d == trig_label(tuning):
                tuning -= 1
            else:
                raise InvalidMethodError(
                    f"cannot drop {d!r}: only the highest remaining power or the "
                    "highest-m fitting condition may be dropped"
                )
        object.__setattr__(self, "drop_conditions", drops)
        object.__setattr__(self, "n_poly", n_poly)
        object.__setattr__(self, "tuning", tuning)
        if self.n_conditions == 0:
            raise InvalidMethodError("no exactness conditions remain after dropping")
        self.check_square()

    @property
    def frozen_map(self) -> dict[str, float]:
        return dict(self.frozen)

    @property
    def n_conditions(self) -> int:
        return self.n_poly + self.tuning + 1

    @property
    def unknowns(self) -> list[str]:
        fixed = self.frozen_map
        names = [f"a{j}" for j in range(self.J // 2)] + [f"b{j}" for j in range(self.J // 2 + 1)]
        return [n for n in names if n not in fixed]

    @property
    def condition_labels(self) -> list[str]:
        return [poly_label(i) for i in range(self.n_poly)] + [
            trig_label(m) for m in range(self.tuning + 1)
        ]

    @property
    def order(self) -> int:
        """Intended algebraic order p (K + 2P = p - 1 after any drops)."""
        return 2 * self.n_conditions - 2

    @property
    def is_classical(self) -> bool:
        return self.tuning < 0

    def check_square(self):
        n_rows, n_cols = self.n_conditions, len(self.unknowns)
        if n_rows != n_cols:
            raise ShapeError(
                f"{n_rows} even exactness conditions {self.condition_labels} but "
                f"{n_cols} free coefficients {self.unknowns}"
            )

    def to_dict(self) -> dict:
        d = {"J": self.J, "K": self.K, "P": self.P, "label": self.label}
        if self.frozen:
            d["frozen"] = self.frozen_map
        if self.drop_conditions:
            d["drop_conditions"] = list(self.drop_conditions)
        return d


def method_spec_from_dict(data: Mapping) -> MethodSpec:
    unknown = set(data) - {"J", "K", "P", "frozen", "label", "drop_conditions"}
    if unknown:
        raise SpecParseError(f"unknown keys in method definition: {sorted(unknown)}")
    try:
        return MethodSpec(
            J=int(data["J"]),
            K=int(data["K"]),
            P=int(data["P"]),
            frozen=dict(data.get("frozen", {})),
            label=str(data.get("label", "")),
            drop_conditions=tuple(data.get("drop_conditions", ())),
        )
    except KeyError as exc:
        raise SpecParseError(f"method definition is missing {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, (InvalidMethodError, ShapeError)):
            raise
        raise SpecParseError(str(exc)) from exc


def parse_method_spec(text: str) -> MethodSpec:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SpecParseError(f"malformed method definition: {exc}") from exc
    return method_spec_from_dict(data)


def bundled_spec_names() -> list[str]:
    root = resources.files("efms") / "specs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_method_spec(ref: str | os.PathLike) -> MethodSpec:
    """Load a method definition from a file path or a bundled name such as ``numerov``."""
    path = Path(ref)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
    else:
        bundled = resources.files("efms") / "specs" / f"{ref}.toml"
        if not bundled.is_file():
            raise FileNotFoundError(f"no method definition file or bundled spec named {str(ref)!r}")
        text = bundled.read_text(encoding="utf-8")
    return parse_method_spec(text)


@dataclass(frozen=True)
class CoefficientSet:
    """Centered coefficients of a symmetric method at a given theta = k h.

    Entries may be floats, exact Fractions or mpmath numbers; ``dps`` is set
    for the latter and tells downstream routines to stay in multiprecision.
    """

    J: int
    theta: float
    a: tuple
    b: tuple
    dps: int | None = None

    def __post_init__(self):
        if self.J < 2 or self.J % 2:
            raise InvalidMethodError(f"J must be even and >= 2, got {self.J}")
        a, b = tuple(self.a), tuple(self.b)
        if len(a) != self.J // 2 + 1 or len(b) != self.J // 2 + 1:
            raise InvalidMethodError(
                f"centered coefficient lists must have length J/2 + 1 = {self.J // 2 + 1}"
            )
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def half(self) -> int:
        return self.J // 2

    def to_float(self) -> CoefficientSet:
        return CoefficientSet(self.J, float(self.theta), tuple(map(float, self.a)), tuple(map(float, self.b)))

    def to_mp(self, dps: int) -> CoefficientSet:
        with _numeric.precision(dps):
            a = tuple(_numeric.to_mp(v) for v in self.a)
            b = tuple(_numeric.to_mp(v) for v in self.b)
        return CoefficientSet(self.J, self.theta, a, b, dps=dps)

    def to_dict(self) -> dict:
        return {
            "J": self.J,
            "theta": float(self.theta),
            "a": [float(v) for v in self.a],
            "b": [float(v) for v in self.b],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: Mapping) -> CoefficientSet:
        return cls(int(data["J"]), float(data["theta"]), tuple(map(float, data["a"])), tuple(map(float, data["b"])))

    @classmethod
    def from_json(cls, text: str) -> CoefficientSet:
        return cls.from_dict(json.loads(text))


def to_standard(cs: CoefficientSet) -> tuple[list, list]:
    """Expand centered coefficients to alpha_0..alpha_J, beta_0..beta_J."""
    m = cs.half
    alpha = [cs.a[abs(j - m)] for j in range(cs.J + 1)]
    beta = [cs.b[abs(j - m)] for j in range(cs.J + 1)]
    return alpha, beta


def to_centered(alpha: Sequence, beta: Sequence, theta: float = 0.0, tol: float = 0.0) -> CoefficientSet:
    if len(alpha) != len(beta) or len(alpha) < 3 or len(alpha) % 2 == 0:
        raise InvalidMethodError("standard form needs alpha, beta of equal odd length J + 1 >= 3")
    J = len(alpha) - 1
    for j in range(J + 1):
        if abs(alpha[j] - alpha[J - j]) > tol or abs(beta[j] - beta[J - j]) > tol:
            raise InvalidMethodError("coefficients are not symmetric; only symmetric methods are supported")
    m = J // 2
    return CoefficientSet(J, theta, tuple(alpha[m:]), tuple(beta[m:]))


@dataclass
class ValidationReport:
    symmetric: bool
    consistent: bool
    zero_stable: bool
    rho_sigma_coprime: bool
    hypothesis_I: bool
    messages: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(
            (self.symmetric, self.consistent, self.zero_stable, self.rho_sigma_coprime, self.hypothesis_I)
        )

    def to_dict(self) -> dict:
        return {
            "symmetric": self.symmetric,
            "consistent": self.consistent,
            "zero_stable": self.zero_stable,
            "rho_sigma_coprime": self.rho_sigma_coprime,
            "hypothesis_I": self.hypothesis_I,
            "ok": self.ok,
            "messages": list(self.messages),
        }


def _clusters(roots: np.ndarray, tol: float) -> list[list[complex]]:
    groups: list[list[complex]] = []
    for z in roots:
        for g in groups:
            if abs(z - g[0]) < tol:
                g.append(z)
                break
        else:
            groups.append([z])
    return groups


def _rho_roots(alpha: list[float], consistent: bool, messages: list[str]) -> tuple[np.ndarray, bool]:
    """Roots of rho with the mandated double root at +1 deflated exactly."""
    c = np.asarray(alpha[::-1], dtype=float)
    scale = max(1.0, np.abs(c).sum())
    if consistent:
        q = np.polydiv(np.polydiv(c, [1.0, -1.0])[0], [1.0, -1.0])[0]
        if abs(np.polyval(q, 1.0)) <= 1e-12 * scale:
            messages.append("rho has a root of multiplicity > 2 at +1")
            return np.concatenate([[1.0, 1.0], np.roots(q)]), False
        return np.concatenate([[1.0, 1.0], np.roots(q)]), True
    return np.roots(c), True


def validate(cs: CoefficientSet, root_tol: float = ROOT_TOL, cluster_tol: float = CLUSTER_TOL,
             coprime_tol: float = COPRIME_TOL) -> ValidationReport:
    """Check normalization, consistency, zero-stability, coprimality and symmetry."""
    if all(v == 0 for v in cs.a) and all(v == 0 for v in cs.b):
        raise InvalidMethodError("all coefficients are zero")
    messages: list[str] = []
    if float(cs.theta) != 0.0:
        messages.append(f"coefficients are at theta = {float(cs.theta)}; hypotheses refer to theta = 0")
    alpha, beta = to_standard(cs)
    alpha_f = [float(v) for v in alpha]
    beta_f = [float(v) for v in beta]
    scale = max(1.0, sum(map(abs, alpha_f)) + sum(map(abs, beta_f)))

    hyp1 = abs(alpha_f[-1] - 1.0) <= 1e-14 and (abs(alpha_f[0]) + abs(beta_f[0])) != 0 and any(beta_f)
    if not hyp1:
        messages.append("normalization fails: need alpha_J = 1, |alpha_0| + |beta_0| != 0, sum |beta_j| != 0")

    # rho(1), rho'(1) and rho''(1) - 2 sigma(1), in the coefficients' own arithmetic
    J = cs.J
    r0 = sum(alpha)
    r1 = sum(j * alpha[j] for j in range(J + 1))
    r2 = sum(j * (j - 1) * alpha[j] for j in range(J + 1)) - 2 * sum(beta)
    residuals = [abs(float(r)) for r in (r0, r1, r2)]
    consistent = max(residuals) <= 1e-12 * scale
    if not consistent:
        messages.append(
            "not consistent: rho(1) = %.3g, rho'(1) = %.3g, rho''(1) - 2 sigma(1) = %.3g" % tuple(residuals)
        )

    double_at_one = residuals[0] <= 1e-12 * scale and residuals[1] <= 1e-12 * scale
    rho_roots, simple_enough = _rho_roots(alpha_f, double_at_one, messages)
    zero_stable = simple_enough
    free_roots = rho_roots[2:] if double_at_one else rho_roots
    for group in _clusters(free_roots, cluster_tol):
        mod = max(abs(z) for z in group)
        if mod > 1.0 + root_tol:
            zero_stable = False
            messages.append(f"rho has a root of modulus {mod:.12g} > 1")
        elif len(group) > 1 and mod > 1.0 - cluster_tol:
            zero_stable = False
            messages.append(f"rho has a multiple root on the unit circle near {complex(group[0]):.6g}")
        if double_at_one and any(abs(z - 1.0) < cluster_tol for z in group):
            zero_stable = False
            messages.append("rho has a root of multiplicity > 2 at +1")

    coprime = True
    if not any(beta_f):
        coprime = False
        messages.append("sigma vanishes identically")
    else:
        sigma_roots = np.roots(np.asarray(beta_f[::-1]))
        for z in rho_roots:
            if sigma_roots.size and np.min(np.abs(sigma_roots - z)) < coprime_tol:
                coprime = False
                messages.append(f"rho and sigma appear to share the root {complex(z):.6g}")
                break

    return ValidationReport(True, consistent, zero_stable, coprime, hyp1, messages)


def validate_standard(alpha: Sequence, beta: Sequence, **kwargs) -> ValidationReport:
    try:
        cs = to_centered(alpha, beta)
    except InvalidMethodError as exc:
        return ValidationReport(False, False, False, False, False, [str(exc)])
    return validate(cs, **kwargs)


@dataclass
class OrderReport:
    p: int
    error_constant: object
    cq_sequence: list[tuple[int, object]]
    zero_threshold: float

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "C": float(self.error_constant),
            "cq": [[q, float(c)] for q, c in self.cq_sequence],
            "zero_threshold": self.zero_threshold,
        }


def error_constant_sequence(cs: CoefficientSet, q_max: int, about: str = "center") -> list:
    """C_0..C_q_max of the linear functional expanded about the centre or the left end.

    Centered moments pair +j with -j, so every odd C_q is exactly zero.
    """
    out = []
    if about == "center":
        m = cs.half
        for q in range(q_max + 1):
            s = cs.a[0] * 0**q + sum(cs.a[j] * (j**q + (-j) ** q) for j in range(1, m + 1))
            c = s / math.factorial(q)
            if q >= 2:
                t = cs.b[0] * 0 ** (q - 2) + sum(cs.b[j] * (j ** (q - 2) + (-j) ** (q - 2)) for j in range(1, m + 1))
                c = c - t / math.factorial(q - 2)
            out.append(c)
    elif about == "left":
        alpha, beta = to_standard(cs)
        for q in range(q_max + 1):
            c = sum(j**q * alpha[j] for j in range(cs.J + 1)) / math.factorial(q)
            if q >= 2:
                c = c - sum(j ** (q - 2) * beta[j] for j in range(cs.J + 1)) / math.factorial(q - 2)
            out.append(c)
    else:
        raise ValueError(f"about must be 'center' or 'left', got {about!r}")
    return out


def order_and_error_constant(cs: CoefficientSet, zero_threshold: float = ZERO_THRESHOLD,
                             q_max: int | None = None, about: str = "center") -> OrderReport:
    """Algebraic order p and error constant C_{p+2}.

    With ``about="left"`` the expansion point is x_n as in the standard form;
    the order and C_{p+2} agree with the centered expansion.
    """
    q_max = cs.J + 12 if q_max is None else q_max
    alpha, beta = to_standard(cs)
    scale = max(1.0, sum(abs(float(v)) for v in alpha) + sum(abs(float(v)) for v in beta))
    cq = error_constant_sequence(cs, q_max, about)
    for q, c in enumerate(cq):
        if abs(float(c)) > zero_threshold * scale:
            if q <= 2:
                raise InconsistencyError(
                    f"C_{q} = {float(c):.3g} is nonzero: the method is not consistent"
                )
            return OrderReport(q - 2, c, list(enumerate(cq[: q + 1])), zero_threshold)
    raise OrderUndeterminedError(
        f"no nonzero C_q found up to q = {q_max} (threshold {zero_threshold:g})"
    )


def apply_functional(cs: CoefficientSet, z: Callable, z_dd: Callable, x, h):
    """L[h, a] z(x) = sum alpha_j z(x + j h) - h^2 sum beta_j z''(x + j h)."""
    alpha, beta = to_standard(cs)
    total = 0
    for j in range(cs.J + 1):
        xj = x + j * h
        total = total + alpha[j] * z(xj) - h * h * beta[j] * z_dd(xj)
    return total

