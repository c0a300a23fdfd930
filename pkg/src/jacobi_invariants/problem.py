"""Jacobi-type second-order ODE problems and their variational structure.

A problem is the equation  x'' + (1/2)*phi_x*x'^2 + phi_t*x' + B = 0  with
coefficient functions phi(t,x) and B(t,x).  It derives from the Lagrangian
L = (1/2)*e^phi*x'^2 + delta1*x' + delta2 whenever the deltas satisfy
d_t(delta1) - d_x(delta2) = e^phi * B.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import expr as ex
from .expr import Expr, DomainError, zero_check, ZeroCheck

AUTONOMOUS = "Autonomous"
TIME_INDEPENDENT_PHI = "TimeIndependentPhi"
GENERAL = "General"


class ProblemError(Exception):
    pass


def default_domain(t0: float, t_end: float, x0: float) -> tuple[float, float, float, float]:
    span = 2.0 * abs(x0) + 1.0
    return (t0, t_end, x0 - span, x0 + span)


@dataclass(frozen=True)
class JacobiProblem:
    """Coefficients, parameters, initial state and sampling domain."""

    phi: Expr
    B: Expr
    params: dict[str, float] = field(default_factory=dict)
    t0: float = 0.0
    t_end: float = 1.0
    x0: float = 0.0
    v0: float = 0.0
    domain: tuple[float, float, float, float] | None = None

    def __post_init__(self):
        if not self.t_end > self.t0:
            raise ProblemError(f"t_end ({self.t_end}) must exceed t0 ({self.t0})")
        try:
            ex.evaluate(self.phi, self.t0, self.x0, self.params)
            ex.evaluate(self.B, self.t0, self.x0, self.params)
        except DomainError as err:
            raise ProblemError(f"coefficients undefined at the initial point: {err}") from err
        if self.domain is None:
            object.__setattr__(self, "domain", default_domain(self.t0, self.t_end, self.x0))

    def window(self) -> float:
        return self.t_end - self.t0


@dataclass(frozen=True)
class Classification:
    tag: str
    warnings: tuple[str, ...] = ()

    def __str__(self):
        return self.tag


@dataclass(frozen=True)
class LagrangianData:
    """delta1/delta2 pair; eta optional with delta1 = d_x(eta)."""

    delta1: Expr
    delta2: Expr
    eta: Expr | None = None


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one hypothesis/residual check."""

    name: str
    passed: bool
    structural: bool
    residual: str
    warning: str | None = None
    max_residual: float = 0.0

    @classmethod
    def from_zero_check(cls, name: str, residual: Expr, zc: ZeroCheck) -> "CheckReport":
        return cls(
            name=name,
            passed=zc.is_zero,
            structural=zc.structural,
            residual=ex.pprint(ex.simplify(residual)),
            warning=zc.warning,
            max_residual=zc.max_residual,
        )


def classify(p: JacobiProblem, samples: int = 64) -> Classification:
    """Split into the three regimes by whether phi_t and B_t vanish."""
    phi_t = ex.diff(p.phi, "t")
    zc_phi = zero_check(phi_t, p.domain, samples, p.params)
    warnings = []
    if zc_phi.warning:
        warnings.append("phi_t: " + zc_phi.warning)
    if not zc_phi.is_zero:
        return Classification(GENERAL, tuple(warnings))
    B_t = ex.diff(p.B, "t")
    zc_B = zero_check(B_t, p.domain, samples, p.params)
    if zc_B.warning:
        warnings.append("B_t: " + zc_B.warning)
    if zc_B.is_zero:
        return Classification(AUTONOMOUS, tuple(warnings))
    return Classification(TIME_INDEPENDENT_PHI, tuple(warnings))


def rhs(p: JacobiProblem):
    """Acceleration closure (t, x, v) -> v'; derivatives taken once here."""
    phi_x = ex.compile_fn(ex.diff(p.phi, "x"), p.params)
    phi_t = ex.compile_fn(ex.diff(p.phi, "t"), p.params)
    B = ex.compile_fn(ex.simplify(p.B), p.params)

    def accel(t: float, x: float, v: float) -> float:
        return -(0.5 * phi_x(t, x) * v * v + phi_t(t, x) * v + B(t, x))

    return accel


def lagrangian_residual_expr(p: JacobiProblem, L: LagrangianData) -> Expr:
    """d_t(delta1) - d_x(delta2) - e^phi*B, simplified."""
    return ex.simplify(
        ex.diff(L.delta1, "t") - ex.diff(L.delta2, "x") - ex.Exp(p.phi) * p.B
    )


def validate_lagrangian(p: JacobiProblem, L: LagrangianData,
                        samples: int = 64) -> list[CheckReport]:
    """Check the defining constraint, and delta1 = d_x(eta) when eta is given."""
    resid = lagrangian_residual_expr(p, L)
    reports = [CheckReport.from_zero_check(
        "lagrangian_constraint", resid,
        zero_check(resid, p.domain, samples, p.params))]
    if L.eta is not None:
        diff_eta = ex.simplify(L.delta1 - ex.diff(L.eta, "x"))
        reports.append(CheckReport.from_zero_check(
            "delta1_is_dx_eta", diff_eta,
            zero_check(diff_eta, p.domain, samples, p.params)))
    return reports


def euler_lagrange_residual(p: JacobiProblem, L: LagrangianData):
    """Closure (t, x, v, a) -> (d/dt dL/dv - dL/dx) with the chain rule expanded.

    Zero along exact solutions of the equation of motion whenever the
    Lagrangian constraint holds.
    """
    ephi = ex.Exp(p.phi)
    # d/dt(e^phi v + delta1) = e^phi(phi_t v + phi_x v^2) + e^phi a
    #                          + dt(delta1) + dx(delta1) v
    # dL/dx = (1/2) phi_x e^phi v^2 + dx(delta1) v + dx(delta2)
    c_a = ex.compile_fn(ex.simplify(ephi), p.params)
    c_v2 = ex.compile_fn(ex.simplify(ex.Rat(1, 2) * ex.diff(p.phi, "x") * ephi), p.params)
    c_v1 = ex.compile_fn(ex.simplify(ex.diff(p.phi, "t") * ephi), p.params)
    c_v0 = ex.compile_fn(ex.simplify(ex.diff(L.delta1, "t") - ex.diff(L.delta2, "x")), p.params)

    def residual(t: float, x: float, v: float, a: float) -> float:
        return c_a(t, x) * a + c_v2(t, x) * v * v + c_v1(t, x) * v + c_v0(t, x)

    return residual


# Gauss-Legendre nodes/weights on [-1, 1], 32 points (scipy-independent,
# generated once from numpy.polynomial.legendre.leggauss and frozen here
# via lazy call to keep values exact to the library).
_GL_CACHE: tuple | None = None


def _gauss_legendre_32():
    global _GL_CACHE
    if _GL_CACHE is None:
        import numpy as np

        nodes, weights = np.polynomial.legendre.leggauss(32)
        _GL_CACHE = (nodes, weights)
    return _GL_CACHE


def delta2_by_quadrature(p: JacobiProblem, x_ref: float | None = None):
    """Numeric delta2(x) = -integral of e^phi*B dx from x_ref, for autonomous input.

    Composite 32-node Gauss-Legendre with panel width refined until two
    successive halvings agree to 1e-12.  Returns a float-valued callable;
    symbolic delta2 input is preferred whenever it is available since the
    invariant constructors need derivatives of it.
    """
    if x_ref is None:
        x_ref = p.x0
    integrand = ex.compile_fn(ex.simplify(ex.Exp(p.phi) * p.B), p.params)
    t_fix = p.t0
    nodes, weights = _gauss_legendre_32()

    def panel(a: float, b: float) -> float:
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        return half * sum(w * integrand(t_fix, mid + half * xi)
                          for xi, w in zip(nodes, weights))

    def integral(a: float, b: float) -> float:
        if a == b:
            return 0.0
        n = 1
        prev = panel(a, b)
        for _ in range(20):
            n *= 2
            step = (b - a) / n
            cur = sum(panel(a + i * step, a + (i + 1) * step) for i in range(n))
            if abs(cur - prev) <= 1e-12 * (1.0 + abs(cur)):
                return cur
            prev = cur
        return prev

    def delta2(xv: float) -> float:
        return -integral(x_ref, xv)

    return delta2
