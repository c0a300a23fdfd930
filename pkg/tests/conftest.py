import random
from fractions import Fraction

import pytest

from jacobi_invariants import catalog
from jacobi_invariants import expr as ex
from jacobi_invariants.integrate import integrate


@pytest.fixture(scope="session")
def all_fixtures():
    return {fid: catalog.get(fid) for fid in catalog.ids()}


@pytest.fixture(scope="session")
def constructed(all_fixtures):
    """Constructed invariant specs per fixture id."""
    return {fid: fx.invariants() for fid, fx in all_fixtures.items()}


@pytest.fixture(scope="session")
def families(all_fixtures):
    return {fid: fx.oracle_family() for fid, fx in all_fixtures.items()}


def registered_integrands(specs, fam):
    regs = []
    for spec in specs:
        for g in spec.integrands:
            if not any(ex.simplify(g) == ex.simplify(r) for r in regs):
                regs.append(g)
    if fam.sign != 0 and not any(
            ex.simplify(fam.b) == ex.simplify(r) for r in regs):
        regs.append(fam.b)
    return tuple(regs)


@pytest.fixture(scope="session")
def trajectories(all_fixtures, constructed, families):
    """One tol-1e-10 trajectory per fixture with every needed channel."""
    out = {}
    for fid, fx in all_fixtures.items():
        regs = registered_integrands(constructed[fid], families[fid])
        out[fid] = integrate(fx.problem, regs, (1e-10, 1e-10))
    return out


# ---------------------------------------------------------------- helpers

PARAM_NAMES = ("alpha", "beta", "k")
SAFE_ENV = {"alpha": 1.25, "beta": 0.8, "k": 2.0}


def random_tree(rng: random.Random, depth: int, powers: bool = True) -> ex.Expr:
    """Random expression tree for round-trip and derivative properties."""
    if depth == 0 or rng.random() < 0.28:
        choice = rng.random()
        if choice < 0.34:
            return ex.Rat(Fraction(rng.randint(-6, 6), rng.randint(1, 5)))
        if choice < 0.75:
            return ex.T if rng.random() < 0.5 else ex.X
        return ex.Param(rng.choice(PARAM_NAMES))
    op = rng.choice(["add", "sub", "mul", "div", "neg",
                     "exp", "ln", "sqrt", "sin", "cos", "pow"])
    if op in ("add", "sub", "mul", "div"):
        a, b = random_tree(rng, depth - 1, powers), random_tree(rng, depth - 1, powers)
        return {"add": a + b, "sub": a - b, "mul": a * b, "div": a / b}[op]
    if op == "neg":
        return -random_tree(rng, depth - 1, powers)
    if op == "pow":
        base = random_tree(rng, depth - 1, powers)
        den = rng.choice([1, 1, 1, 2]) if powers else 1
        return base ** ex.Rat(Fraction(rng.randint(-4, 4), den))
    fn = {"exp": ex.Exp, "ln": ex.Ln, "sqrt": ex.Sqrt, "sin": ex.Sin, "cos": ex.Cos}[op]
    return fn(random_tree(rng, depth - 1, powers))
