"""Constructors for constants of motion of the Jacobi-type equation.

Three regimes:

* autonomous (phi_t = B_t = 0): an exponential-dressed pair I+/I- built
  from the factorization B = b*Bbar, and the energy-like first integral
  (1/2)*v^2*e^phi - delta2 recovered as (1/2)*I+*I-;
* phi_t = 0, B_t != 0: a constant with one additive accumulator channel,
  (1/2)*v^2*e^phi + (eta_t - delta2) - int d_t(eta_t - delta2) dt;
* phi_t != 0: a single exponential-dressed constant built from the
  decomposition B*e^phi = rho1*e^(phi/2) + rho2, downgraded to a true
  first integral when the exponent integrand depends on t alone.

Every accumulator integrand is a function of t and x only; velocities
never enter the integral terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from . import expr as ex
from .expr import Expr, pprint, simplify, zero_check
from .problem import (
    AUTONOMOUS,
    GENERAL,
    TIME_INDEPENDENT_PHI,
    CheckReport,
    JacobiProblem,
    LagrangianData,
    classify,
    validate_lagrangian,
)

FIRST_INTEGRAL = "FirstIntegral"
NONLOCAL_CONSTANT = "NonlocalConstant"


class HypothesisError(Exception):
    def __init__(self, message: str, residual: Expr | None = None):
        if residual is not None:
            message = f"{message}; residual {pprint(simplify(residual))}"
        super().__init__(message)
        self.residual = residual


class NegativeRadicandError(Exception):
    def __init__(self, point: tuple[float, float], value: float):
        super().__init__(f"radicand {value:g} < 0 at (t={point[0]:g}, x={point[1]:g})")
        self.point = point
        self.value = value


class DegenerateDenominatorError(Exception):
    pass


class MismatchedAuxPairError(Exception):
    pass


@dataclass(frozen=True)
class AuxiliaryFunctions:
    """Amplitude/factorization data behind one sign of the dressed pair.

    bbar and b factor the forcing term (bbar*b == B on the domain); the
    amplitude a = e^(-phi/2) kills the v^2 term of the perturbed action.
    """

    a: Expr
    bbar: Expr
    b: Expr
    sign: int


@dataclass(frozen=True)
class InvariantSpec:
    """A constructed constant of motion.

    The local part is a polynomial in the velocity with (t,x)-coefficients,
    optionally dressed by exp(sign*u) for one accumulator channel u and/or a
    closed-form factor exp(g(t)); additive channels enter linearly.  Channel
    indices refer to this spec's own ``integrands`` tuple.
    """

    name: str
    kind: str
    poly: dict[int, Expr]
    integrands: tuple[Expr, ...] = ()
    exp_sign: int = 0
    exp_channel: int = 0
    linear_channels: tuple[tuple[Fraction, int], ...] = ()
    exp_closed_arg: Expr | None = None

    def compiled(self, params: dict[str, float] | None = None):
        coeff_fns = [(d, ex.compile_fn(c, params)) for d, c in sorted(self.poly.items())]
        closed_fn = (ex.compile_fn(self.exp_closed_arg, params)
                     if self.exp_closed_arg is not None else None)
        sign, ch = self.exp_sign, self.exp_channel
        linear = self.linear_channels

        def fn(t: float, x: float, v: float, u) -> float:
            val = 0.0
            for d, cf in coeff_fns:
                val += cf(t, x) * v ** d
            if sign != 0:
                val *= math.exp(sign * u[ch])
            if closed_fn is not None:
                val *= math.exp(closed_fn(t, x))
            for c, i in linear:
                val += float(c) * u[i]
            return val

        return fn

    def value(self, t, x, v, u=(), params=None) -> float:
        return self.compiled(params)(t, x, v, u)

    def local_exprs(self) -> dict[int, Expr]:
        """Velocity-power coefficients with any closed exp factor folded in.

        Only meaningful when no live accumulator remains (pure point
        function); used for structural comparisons against target formulas.
        """
        if self.exp_sign != 0 or self.linear_channels:
            raise ValueError(f"{self.name} still depends on accumulator channels")
        if self.exp_closed_arg is None:
            return {d: simplify(c) for d, c in self.poly.items()}
        factor = ex.Exp(self.exp_closed_arg)
        return {d: simplify(c * factor) for d, c in self.poly.items()}

    def printed(self) -> str:
        parts = []
        for d in sorted(self.poly, reverse=True):
            c = pprint(simplify(self.poly[d]))
            if d == 0:
                parts.append(c)
            elif d == 1:
                parts.append(f"{c} * xdot")
            else:
                parts.append(f"{c} * xdot^{d}")
        body = " + ".join(parts) if parts else "0"
        if self.exp_sign != 0:
            g = pprint(simplify(self.integrands[self.exp_channel]))
            s = "-" if self.exp_sign < 0 else ""
            body = f"({body}) * exp({s}Int[{g}])"
        if self.exp_closed_arg is not None:
            body = f"({body}) * exp({pprint(simplify(self.exp_closed_arg))})"
        for c, i in self.linear_channels:
            g = pprint(simplify(self.integrands[i]))
            body += f" + ({c}) * Int[{g}]"
        return body

    def to_jsonable(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "expression": self.printed(),
            "accumulators": [pprint(simplify(g)) for g in self.integrands],
        }


# ------------------------------------------------------------ autonomous

def autonomous_aux(p: JacobiProblem, delta2: Expr,
                   samples: int = 64) -> tuple[AuxiliaryFunctions, AuxiliaryFunctions]:
    """Factorization data for the autonomous dressed pair.

    Builds a = e^(-phi/2), bbar = sqrt(2*delta2*e^(-phi)) (principal root)
    and b = -(1/2)*phi_x*bbar - bbar_x, then verifies bbar*b == B.
    """
    tag = classify(p, samples).tag
    if tag != AUTONOMOUS:
        raise HypothesisError(f"problem is {tag}, not {AUTONOMOUS}")
    # guard the radicand in its defining form: points where e^(-phi) itself
    # is undefined lie outside the problem domain and are skipped
    raw_radicand = ex.Rat(2) * delta2 * ex.Exp(-p.phi)
    for (tv, xv) in ex.sample_points(p.domain, samples):
        try:
            val = ex.evaluate(raw_radicand, tv, xv, p.params)
        except ex.DomainError:
            continue
        if val < 0.0:
            raise NegativeRadicandError((tv, xv), val)
    radicand = simplify(raw_radicand)
    a = simplify(ex.Exp(ex.Rat(-1, 2) * p.phi))
    bbar = simplify(ex.Sqrt(radicand))
    b = simplify(ex.Rat(-1, 2) * ex.diff(p.phi, "x") * bbar - ex.diff(bbar, "x"))
    product_residual = simplify(bbar * b - p.B)
    if not zero_check(product_residual, p.domain, samples, p.params).is_zero:
        raise HypothesisError("factorization bbar*b == B fails", product_residual)
    return (
        AuxiliaryFunctions(a=a, bbar=bbar, b=b, sign=+1),
        AuxiliaryFunctions(a=a, bbar=bbar, b=b, sign=-1),
    )


def check_y_ode(p: JacobiProblem, bbar: Expr, samples: int = 64) -> CheckReport:
    """Residual of d_x(bbar^2) + phi_x*bbar^2 + 2B, an independent check."""
    y = simplify(bbar * bbar)
    resid = simplify(ex.diff(y, "x") + ex.diff(p.phi, "x") * y + ex.Rat(2) * p.B)
    return CheckReport.from_zero_check(
        "square_factor_ode", resid, zero_check(resid, p.domain, samples, p.params))


def first_integral_autonomous(p: JacobiProblem, delta2: Expr,
                              samples: int = 64) -> InvariantSpec:
    """Energy-like first integral (1/2)*v^2*e^phi - delta2."""
    tag = classify(p, samples).tag
    if tag != AUTONOMOUS:
        raise HypothesisError(f"problem is {tag}, not {AUTONOMOUS}")
    reports = validate_lagrangian(p, LagrangianData(ex.ZERO, delta2), samples)
    if not reports[0].passed:
        raise HypothesisError(
            f"delta2 inconsistent with B: residual {reports[0].residual}")
    return InvariantSpec(
        name="energy_integral",
        kind=FIRST_INTEGRAL,
        poly={2: simplify(ex.HALF * ex.Exp(p.phi)), 0: simplify(-delta2)},
    )


def nonlocal_autonomous(p: JacobiProblem, aux: AuxiliaryFunctions) -> InvariantSpec:
    """Dressed constant (v +/- bbar)*e^(phi/2)*exp(-/+ u), u' = phi_x*bbar/2 + bbar_x."""
    half_phi = simplify(ex.HALF * p.phi)
    g = simplify(ex.HALF * ex.diff(p.phi, "x") * aux.bbar + ex.diff(aux.bbar, "x"))  # = -b
    sign = aux.sign
    return InvariantSpec(
        name=f"dressed_constant_{'plus' if sign > 0 else 'minus'}",
        kind=NONLOCAL_CONSTANT,
        poly={1: simplify(ex.Exp(half_phi)),
              0: simplify(ex.Rat(sign) * aux.bbar * ex.Exp(half_phi))},
        integrands=(g,),
        exp_sign=-sign,
        exp_channel=0,
    )


def product_first_integral(iplus: InvariantSpec, iminus: InvariantSpec) -> InvariantSpec:
    """(1/2)*I+*I-; the exponential dressings cancel pairwise and drop out."""
    if (not iplus.integrands or iplus.integrands != iminus.integrands
            or iplus.exp_sign != -iminus.exp_sign or iplus.exp_sign == 0
            or iplus.linear_channels or iminus.linear_channels):
        raise MismatchedAuxPairError(
            "inputs must share one accumulator with opposite exponential signs")
    poly: dict[int, Expr] = {}
    for d1, c1 in iplus.poly.items():
        for d2, c2 in iminus.poly.items():
            d = d1 + d2
            term = ex.HALF * c1 * c2
            poly[d] = simplify(poly[d] + term) if d in poly else simplify(term)
    poly = {d: c for d, c in poly.items() if not (c.kind == ex.RAT and c.value == 0)}
    return InvariantSpec(name="product_integral", kind=FIRST_INTEGRAL, poly=poly)


# ------------------------------------------------- time-independent phi

def nonlocal_timedep_phi0(p: JacobiProblem, eta: Expr, delta2: Expr,
                          samples: int = 64) -> InvariantSpec:
    """Accumulator constant for phi_t = 0:
    (1/2)*v^2*e^phi + (eta_t - delta2) - int d_t(eta_t - delta2) dt.

    Requires e^phi*B = d_x(eta_t - delta2); a true first integral only when
    the problem is autonomous (then the accumulator integrand vanishes).
    """
    tag = classify(p, samples).tag
    if tag not in (TIME_INDEPENDENT_PHI, AUTONOMOUS):
        raise HypothesisError(f"problem is {tag}; needs phi_t = 0")
    psi = simplify(ex.diff(eta, "t") - delta2)
    resid = simplify(ex.Exp(p.phi) * p.B - ex.diff(psi, "x"))
    if not zero_check(resid, p.domain, samples, p.params).is_zero:
        raise HypothesisError("e^phi*B = d_x(eta_t - delta2) fails", resid)
    integrand = simplify(ex.diff(psi, "t"))
    return InvariantSpec(
        name="accumulator_constant",
        kind=FIRST_INTEGRAL if tag == AUTONOMOUS else NONLOCAL_CONSTANT,
        poly={2: simplify(ex.HALF * ex.Exp(p.phi)), 0: psi},
        integrands=(integrand,),
        linear_channels=((Fraction(-1), 0),),
    )


# ------------------------------------------------------------- general

def general_aux(p: JacobiProblem, rho1: Expr, rho2: Expr,
                samples: int = 64) -> tuple[AuxiliaryFunctions, AuxiliaryFunctions]:
    """Factorization for phi_t != 0:
    bbar(+/-) = +/- 4*(B_t + B*phi_t) / (2*phi_tt + phi_t^2),
    b(+/-)    = +/- (1/4)*(2*phi_tt + phi_t^2) / (d_t ln B + phi_t).
    """
    tag = classify(p, samples).tag
    if tag != GENERAL:
        raise HypothesisError(f"problem is {tag}, not {GENERAL}")
    if zero_check(rho1, p.domain, samples, p.params).is_zero:
        raise HypothesisError("rho1 must not vanish identically")
    phi_t = ex.diff(p.phi, "t")
    den = simplify(ex.Rat(2) * ex.diff(phi_t, "t") + phi_t * phi_t)
    if zero_check(den, p.domain, samples, p.params).is_zero:
        raise DegenerateDenominatorError("2*phi_tt + phi_t^2 vanishes identically")
    den2 = simplify(ex.diff(ex.Ln(p.B), "t") + phi_t)
    if zero_check(den2, p.domain, samples, p.params).is_zero:
        raise DegenerateDenominatorError("d_t ln B + phi_t vanishes identically")
    num = simplify(ex.diff(p.B, "t") + p.B * phi_t)
    bbar_plus = simplify(ex.Rat(4) * num / den)
    b_plus = simplify(ex.Rat(1, 4) * den / den2)
    product_residual = simplify(bbar_plus * b_plus - p.B)
    if not zero_check(product_residual, p.domain, samples, p.params).is_zero:
        raise HypothesisError("factorization bbar*b == B fails", product_residual)
    a = simplify(ex.Exp(ex.Rat(-1, 2) * p.phi))
    return (
        AuxiliaryFunctions(a=a, bbar=bbar_plus, b=b_plus, sign=+1),
        AuxiliaryFunctions(a=a, bbar=simplify(-bbar_plus), b=simplify(-b_plus), sign=-1),
    )


def check_general_hypotheses(p: JacobiProblem, rho1: Expr, rho2: Expr,
                             samples: int = 64) -> list[CheckReport]:
    """Both structural hypotheses of the general construction:
    B*e^phi = rho1*e^(phi/2) + rho2 and
    rho1' = d_t(ln phi_t) * (e^(phi/2) + rho2/rho1),
    with rho1, rho2 functions of x alone and rho1 not identically zero.
    """
    if zero_check(rho1, p.domain, samples, p.params).is_zero:
        raise HypothesisError("rho1 must not vanish identically")
    reports = []
    for name, r in (("rho1_time_free", rho1), ("rho2_time_free", rho2)):
        dr = ex.diff(r, "t")
        reports.append(CheckReport.from_zero_check(
            name, dr, zero_check(dr, p.domain, samples, p.params)))
    half_phi = simplify(ex.HALF * p.phi)
    resid1 = simplify(p.B * ex.Exp(p.phi) - rho1 * ex.Exp(half_phi) - rho2)
    reports.append(CheckReport.from_zero_check(
        "forcing_decomposition", resid1,
        zero_check(resid1, p.domain, samples, p.params)))
    phi_t = ex.diff(p.phi, "t")
    growth = simplify(ex.diff(ex.Ln(phi_t), "t"))
    resid2 = simplify(ex.diff(rho1, "x")
                      - growth * (ex.Exp(half_phi) + simplify(rho2 / rho1)))
    reports.append(CheckReport.from_zero_check(
        "rho_compatibility", resid2,
        zero_check(resid2, p.domain, samples, p.params)))
    return reports


def _antiderivative_t(g: Expr) -> Expr | None:
    """Closed-form antiderivative in t for the downgrade table:
    constants, powers of t, and exp(linear in t); sums and constant
    multiples thereof.  None when the shape is not recognized."""
    g = simplify(g)
    terms = g.args if g.kind == ex.ADD else (g,)
    parts = []
    for term in terms:
        c, core = ex._as_coeff_core(term)
        if core is None:
            parts.append(ex.Rat(c) * ex.T)
            continue
        if ex.depends_on(core, "x"):
            return None
        if core.kind == ex.VAR:  # t itself
            parts.append(ex.Rat(c, 2) * ex.T ** ex.Rat(2))
            continue
        if (core.kind == ex.POW and core.args[0].kind == ex.VAR
                and core.args[1].kind == ex.RAT and core.args[1].value != -1):
            k = core.args[1].value
            parts.append(ex.Rat(c / (k + 1)) * ex.T ** ex.Rat(k + 1))
            continue
        if core.kind == ex.EXP:
            arg = core.args[0]
            slope = simplify(ex.diff(arg, "t"))
            if slope.kind == ex.RAT and slope.value != 0 and \
                    simplify(ex.diff(slope, "t")) == ex.ZERO:
                parts.append(ex.Rat(c / slope.value) * core)
                continue
        return None
    out = parts[0]
    for part in parts[1:]:
        out = out + part
    return simplify(out)


def nonlocal_general(p: JacobiProblem, rho1: Expr, rho2: Expr,
                     samples: int = 64) -> InvariantSpec:
    """Dressed constant for phi_t != 0:
    (v*e^(phi/2) + 2*rho1/D) * exp(int (D/2)*(1 + (rho2/rho1)*e^(-phi/2)) dt)
    with D = d_t(2*ln(phi_t) + phi).  Downgraded to a first integral with a
    closed-form exponent when the integrand depends on t alone.
    """
    tag = classify(p, samples).tag
    if tag != GENERAL:
        raise HypothesisError(f"problem is {tag}, not {GENERAL}")
    reports = check_general_hypotheses(p, rho1, rho2, samples)
    failed = [r for r in reports if not r.passed]
    if failed:
        raise HypothesisError(f"hypothesis {failed[0].name} fails "
                              f"(residual {failed[0].residual})")
    phi_t = ex.diff(p.phi, "t")
    D = simplify(ex.diff(simplify(ex.Rat(2) * ex.Ln(phi_t) + p.phi), "t"))
    if zero_check(D, p.domain, samples, p.params).is_zero:
        raise DegenerateDenominatorError("d_t(2*ln(phi_t) + phi) vanishes identically")
    half_phi = simplify(ex.HALF * p.phi)
    quotient = simplify(rho2 / rho1)
    integrand = simplify(ex.HALF * D * (ex.ONE + quotient * ex.Exp(-half_phi)))
    poly = {1: simplify(ex.Exp(half_phi)),
            0: simplify(ex.Rat(2) * rho1 / D)}
    if not ex.depends_on(integrand, "x"):
        F = _antiderivative_t(integrand)
        if F is not None:
            F0 = simplify(ex.substitute(F, "t", ex.Rat(Fraction(p.t0))))
            return InvariantSpec(
                name="general_constant",
                kind=FIRST_INTEGRAL,
                poly=poly,
                exp_closed_arg=simplify(F - F0),
            )
        # integrand is a function of t alone, so still a point function of
        # (t, x, v); keep the channel for evaluation
        return InvariantSpec(
            name="general_constant",
            kind=FIRST_INTEGRAL,
            poly=poly,
            integrands=(integrand,),
            exp_sign=+1,
            exp_channel=0,
        )
    return InvariantSpec(
        name="general_constant",
        kind=NONLOCAL_CONSTANT,
        poly=poly,
        integrands=(integrand,),
        exp_sign=+1,
        exp_channel=0,
    )


def nonlocal_general_signed(p: JacobiProblem, aux: AuxiliaryFunctions) -> InvariantSpec:
    """One sign of the general dressed pair, (v + s*bbar_s)*e^(phi/2)*exp(s*u),
    u' = b_s.  Both signs collapse to the same constant."""
    half_phi = simplify(ex.HALF * p.phi)
    s = aux.sign
    return InvariantSpec(
        name=f"general_constant_{'plus' if s > 0 else 'minus'}",
        kind=NONLOCAL_CONSTANT,
        poly={1: simplify(ex.Exp(half_phi)),
              0: simplify(ex.Rat(s) * aux.bbar * ex.Exp(half_phi))},
        integrands=(simplify(aux.b),),
        exp_sign=s,
        exp_channel=0,
    )
