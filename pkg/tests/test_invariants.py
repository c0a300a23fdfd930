import math

import pytest

from jacobi_invariants import expr as ex
from jacobi_invariants.expr import Param, Rat, parse, simplify
from jacobi_invariants.integrate import evaluate_along, integrate
from jacobi_invariants.invariants import (
    FIRST_INTEGRAL,
    NONLOCAL_CONSTANT,
    DegenerateDenominatorError,
    HypothesisError,
    MismatchedAuxPairError,
    NegativeRadicandError,
    autonomous_aux,
    check_general_hypotheses,
    check_y_ode,
    first_integral_autonomous,
    general_aux,
    nonlocal_autonomous,
    nonlocal_general,
    nonlocal_general_signed,
    nonlocal_timedep_phi0,
    product_first_integral,
)
from jacobi_invariants.problem import JacobiProblem


@pytest.fixture
def pg18(all_fixtures):
    return all_fixtures["PG18"]


def free_particle():
    return JacobiProblem(phi=ex.ZERO, B=ex.ZERO, t0=0.0, t_end=1.0, x0=0.0, v0=1.0)


# ----------------------------------------------------------- autonomous aux

def test_autonomous_aux_pg18(pg18):
    aux_p, aux_m = autonomous_aux(pg18.problem, pg18.delta2)
    assert aux_p.bbar == simplify(parse("2*x^(3/2)"))
    assert aux_p.b == simplify(parse("-2*x^(1/2)"))
    assert aux_p.a == simplify(parse("x^(1/2)"))
    assert aux_p.sign == 1 and aux_m.sign == -1
    assert simplify(aux_p.bbar * aux_p.b - pg18.problem.B) == Rat(0)


def test_autonomous_aux_constant_forcing_negative_x():
    p = JacobiProblem(phi=ex.ZERO, B=Param("k"), params={"k": 3.0},
                      t0=0.0, t_end=1.0, x0=-1.0, v0=0.0,
                      domain=(0.0, 1.0, -2.0, -0.5))
    aux_p, _ = autonomous_aux(p, parse("-k*x"))
    assert aux_p.bbar == simplify(parse("(-2*k*x)^(1/2)"))
    for x in (-2.0, -1.0, -0.6):
        assert ex.evaluate(aux_p.bbar, 0.0, x, p.params) == \
            pytest.approx(math.sqrt(-2 * 3.0 * x), rel=1e-14)


def test_autonomous_aux_negative_radicand():
    p = JacobiProblem(phi=ex.ZERO, B=Param("k"), params={"k": 3.0},
                      t0=0.0, t_end=1.0, x0=1.0, v0=0.0,
                      domain=(0.0, 1.0, 0.5, 2.0))
    with pytest.raises(NegativeRadicandError):
        autonomous_aux(p, parse("-k*x"))  # radicand -2kx < 0 for x > 0


def test_autonomous_aux_wrong_regime(all_fixtures):
    with pytest.raises(HypothesisError):
        autonomous_aux(all_fixtures["PG4"].problem, parse("t*x"))


# ----------------------------------------------------------------- y-ODE

def test_check_y_ode_pg18(pg18):
    aux_p, _ = autonomous_aux(pg18.problem, pg18.delta2)
    report = check_y_ode(pg18.problem, aux_p.bbar)
    assert report.passed and report.structural


def test_check_y_ode_all_autonomous_aux(all_fixtures):
    for fid in ("PG18", "PG21", "PG22"):
        fx = all_fixtures[fid]
        aux_p, _ = autonomous_aux(fx.problem, fx.delta2)
        assert check_y_ode(fx.problem, aux_p.bbar).passed, fid


def test_check_y_ode_rejects_wrong_factor(pg18):
    report = check_y_ode(pg18.problem, ex.X)
    assert not report.passed


# ------------------------------------------------------ autonomous specs

def test_first_integral_autonomous_forms(all_fixtures):
    # doubled, the energy form matches the classical one for each fixture
    for fid in ("PG18", "PG21", "PG22"):
        fx = all_fixtures[fid]
        spec = first_integral_autonomous(fx.problem, fx.delta2)
        assert spec.kind == FIRST_INTEGRAL and not spec.integrands
        target = fx.expected[0]
        doubled = {d: simplify(Rat(target.normalization) * c)
                   for d, c in spec.local_exprs().items()}
        for d, text in target.poly_targets.items():
            assert doubled[d] == simplify(parse(text)), (fid, d)


def test_first_integral_requires_consistent_delta2(pg18):
    with pytest.raises(HypothesisError):
        first_integral_autonomous(pg18.problem, parse("2*x^2 + x"))


def test_nonlocal_autonomous_free_particle():
    p = free_particle()
    aux_p, aux_m = autonomous_aux(p, ex.ZERO)
    spec = nonlocal_autonomous(p, aux_p)
    assert simplify(spec.integrands[0]) == Rat(0)
    assert spec.value(0.0, 0.0, 3.0, [0.0]) == pytest.approx(3.0)


def test_nonlocal_autonomous_pg18_values(pg18, trajectories):
    aux_p, _ = autonomous_aux(pg18.problem, pg18.delta2)
    spec = nonlocal_autonomous(pg18.problem, aux_p)
    # at the initial state u = 0: I+ = (v + bbar) e^(phi/2) = (0 + 2)*1
    assert spec.value(0.0, 1.0, 0.0, [0.0]) == pytest.approx(2.0, rel=1e-14)
    series = evaluate_along(trajectories["PG18"], spec, 512)
    assert series.max_drift() < 1e-6 * max(1.0, abs(series.initial()))


def test_product_first_integral_identity(pg18, trajectories):
    aux_p, aux_m = autonomous_aux(pg18.problem, pg18.delta2)
    ip = nonlocal_autonomous(pg18.problem, aux_p)
    im = nonlocal_autonomous(pg18.problem, aux_m)
    prod = product_first_integral(ip, im)
    assert prod.kind == FIRST_INTEGRAL and not prod.integrands
    fi = first_integral_autonomous(pg18.problem, pg18.delta2)
    f_fi = fi.compiled(pg18.problem.params)
    f_pr = prod.compiled(pg18.problem.params)
    for s in trajectories["PG18"].states():
        a, b = f_fi(s.t, s.x, s.v, []), f_pr(s.t, s.x, s.v, [])
        assert abs(a - b) < 1e-9 * (1 + abs(a))


def test_product_first_integral_free_particle():
    p = free_particle()
    aux_p, aux_m = autonomous_aux(p, ex.ZERO)
    prod = product_first_integral(nonlocal_autonomous(p, aux_p),
                                  nonlocal_autonomous(p, aux_m))
    assert prod.value(0.0, 0.0, 2.0) == pytest.approx(2.0)  # (1/2) v^2


def test_product_rejects_mismatched_pair(pg18, all_fixtures):
    aux_p, _ = autonomous_aux(pg18.problem, pg18.delta2)
    ip = nonlocal_autonomous(pg18.problem, aux_p)
    with pytest.raises(MismatchedAuxPairError):
        product_first_integral(ip, ip)  # same sign twice


# ----------------------------------------------------- time-free phi specs

def test_theorem3_pg4_structure(all_fixtures):
    fx = all_fixtures["PG4"]
    spec = nonlocal_timedep_phi0(fx.problem, fx.eta, fx.delta2)
    assert spec.kind == NONLOCAL_CONSTANT
    assert spec.poly[2] == Rat(1, 2)
    assert spec.poly[0] == simplify(parse("-2*x^3 - t*x"))
    assert simplify(spec.integrands[0]) == simplify(parse("-x"))
    assert spec.linear_channels == ((-1, 0),)


def test_theorem3_pg20_structure(all_fixtures):
    fx = all_fixtures["PG20"]
    spec = nonlocal_timedep_phi0(fx.problem, fx.eta, fx.delta2)
    assert spec.poly[2] == simplify(parse("1/2 * x^(-1)"))
    assert spec.poly[0] == simplify(parse("-2*t*x - 2*x^2"))
    # d_t(eta_t - delta2) = -2x, entering as +2*Int[x] through the -w term
    assert simplify(spec.integrands[0]) == simplify(parse("-2*x"))


def test_theorem3_hypothesis_failure():
    p = JacobiProblem(phi=ex.ZERO, B=parse("-(6*x^2+t)"), t0=0, t_end=0.5, x0=1.0)
    with pytest.raises(HypothesisError):
        nonlocal_timedep_phi0(p, parse("-2*x^3*t"), parse("t*x + x"))


def test_theorem3_reduces_to_energy_on_autonomous(pg18, trajectories):
    spec3 = nonlocal_timedep_phi0(pg18.problem, ex.ZERO, pg18.delta2)
    assert spec3.kind == FIRST_INTEGRAL
    assert simplify(spec3.integrands[0]) == Rat(0)
    fi = first_integral_autonomous(pg18.problem, pg18.delta2)
    f3 = spec3.compiled({})
    f1 = fi.compiled({})
    for s in trajectories["PG18"].states():
        assert abs(f3(s.t, s.x, s.v, [0.0]) - f1(s.t, s.x, s.v, [])) < 1e-12


def test_theorem3_drift(all_fixtures):
    for fid in ("PG4", "PG20"):
        fx = all_fixtures[fid]
        spec = nonlocal_timedep_phi0(fx.problem, fx.eta, fx.delta2)
        traj = integrate(fx.problem, spec.integrands, (1e-10, 1e-10))
        series = evaluate_along(traj, spec, 512)
        rel = series.max_drift() / max(1.0, abs(series.initial()))
        assert rel < 1e-6, fid


# ------------------------------------------------------------ general specs

def test_general_aux_exact_fixture(all_fixtures):
    fx = all_fixtures["JAC_EXACT"]
    aux_p, aux_m = general_aux(fx.problem, fx.rho1, fx.rho2)
    assert aux_p.bbar == simplify(parse("2*rho*exp(-(t+x)/2)"))
    assert aux_p.b == Rat(1, 2)
    assert aux_m.bbar == simplify(parse("-2*rho*exp(-(t+x)/2)"))
    assert aux_m.b == Rat(-1, 2)
    assert simplify(aux_p.bbar * aux_p.b - fx.problem.B) == Rat(0)


def test_general_hypotheses_pass_structurally(all_fixtures):
    fx = all_fixtures["JAC_EXACT"]
    reports = check_general_hypotheses(fx.problem, fx.rho1, fx.rho2)
    assert all(r.passed and r.structural for r in reports)


def test_general_rejects_vanishing_rho1(all_fixtures):
    fx = all_fixtures["JAC_EXACT"]
    with pytest.raises(HypothesisError):
        check_general_hypotheses(fx.problem, ex.ZERO, Rat(1))
    with pytest.raises(HypothesisError):
        general_aux(fx.problem, ex.ZERO, Rat(1))


def test_general_constant_structure_and_downgrade(all_fixtures):
    fx = all_fixtures["JAC_EXACT"]
    spec = nonlocal_general(fx.problem, fx.rho1, fx.rho2)
    assert spec.kind == FIRST_INTEGRAL
    assert not spec.integrands  # closed-form exponent found
    assert simplify(spec.exp_closed_arg) == simplify(parse("t/2"))
    le = spec.local_exprs()
    assert le[1] == simplify(parse("exp(t/2)*exp((t+x)/2)"))
    assert le[0] == simplify(parse("2*rho*exp(t/2)"))


def test_general_constant_equals_itilde_on_trajectory(all_fixtures, trajectories):
    fx = all_fixtures["JAC_EXACT"]
    spec = nonlocal_general(fx.problem, fx.rho1, fx.rho2)
    series = evaluate_along(trajectories["JAC_EXACT"], spec, 512)
    assert series.initial() == pytest.approx(-2.0, abs=1e-12)
    assert series.max_drift() < 1e-8


def test_general_sign_collapse(all_fixtures):
    fx = all_fixtures["JAC_EXACT"]
    aux_p, aux_m = general_aux(fx.problem, fx.rho1, fx.rho2)
    sp = nonlocal_general_signed(fx.problem, aux_p)
    sm = nonlocal_general_signed(fx.problem, aux_m)
    traj = integrate(fx.problem, sp.integrands + sm.integrands, (1e-10, 1e-10))
    fp, fm = sp.compiled(fx.problem.params), sm.compiled(fx.problem.params)
    cp = [traj.channel_of(g) for g in sp.integrands]
    cm = [traj.channel_of(g) for g in sm.integrands]
    for s in traj.states():
        a = fp(s.t, s.x, s.v, [s.u[c] for c in cp])
        b = fm(s.t, s.x, s.v, [s.u[c] for c in cm])
        assert abs(a - b) <= 1e-10 * max(1.0, abs(a))


def test_general_requires_nonzero_phi_t(pg18):
    with pytest.raises(HypothesisError):
        nonlocal_general(pg18.problem, Param("rho"), ex.ZERO)


def test_general_degenerate_denominator():
    # phi = 2 ln(t+1): 2 phi_tt + phi_t^2 = 0 identically
    p = JacobiProblem(phi=parse("2*ln(t+1)"), B=parse("exp(x)"),
                      t0=0.0, t_end=1.0, x0=0.0, v0=0.0,
                      domain=(0.0, 1.0, -1.0, 1.0))
    with pytest.raises(DegenerateDenominatorError):
        general_aux(p, Rat(1), ex.ZERO)


# ------------------------------------------------------- drift invariants

def test_every_constructed_invariant_drifts_below_1e6(all_fixtures, constructed,
                                                      trajectories):
    for fid, specs in constructed.items():
        for spec in specs:
            series = evaluate_along(trajectories[fid], spec, 512)
            rel = series.max_drift() / max(1.0, abs(series.initial()))
            assert rel < 1e-6, (fid, spec.name, rel)


def test_factorization_invariant_for_every_aux(all_fixtures):
    from jacobi_invariants.expr import is_identically_zero

    for fid in ("PG18", "PG21", "PG22"):
        fx = all_fixtures[fid]
        aux_p, _ = autonomous_aux(fx.problem, fx.delta2)
        assert is_identically_zero(
            simplify(aux_p.bbar * aux_p.b - fx.problem.B),
            fx.problem.domain, params=fx.problem.params)
    fx = all_fixtures["JAC_EXACT"]
    aux_p, _ = general_aux(fx.problem, fx.rho1, fx.rho2)
    assert is_identically_zero(
        simplify(aux_p.bbar * aux_p.b - fx.problem.B),
        fx.problem.domain, params=fx.problem.params)
