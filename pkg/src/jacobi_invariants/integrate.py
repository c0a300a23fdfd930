"""Adaptive Runge-Kutta integration of the equation of motion with
accumulator channels.

The state is [x, v, u_0..u_k] where each u_i integrates a registered
integrand g_i(t, x) alongside the motion (u_i(t0) = 0), so nonlocal
integral terms are produced under the same error control as the
trajectory itself.  The pair is the classic Dormand-Prince 5(4) with a
PI step controller and the standard quartic dense-output interpolant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .expr import Expr, DomainError
from .problem import JacobiProblem, rhs

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = _A[6]  # fifth-order weights; FSAL
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
_D = (
    -12715105075 / 11282082432, 0.0, 87487479700 / 32700410799,
    -10690763975 / 1880347072, 701980252875 / 199316789632,
    -1453857185 / 822651844, 69997945 / 29380423,
)
_A_NP = [np.array(row) for row in _A]
_B_NP = np.array(_B)
_E_NP = np.array(_E)
_D_NP = np.array(_D)

COMPLETED = "Completed"
DOMAIN_ABORT = "DomainAbort"
BLOW_UP = "BlowUp"
STEP_FAILURE = "StepFailure"

_BLOWUP_BOUND = 1e8
_MAX_CONSECUTIVE_REJECTS = 20


class IntegrationError(Exception):
    pass


class AccumulatorMismatchError(IntegrationError):
    pass


@dataclass(frozen=True)
class Termination:
    status: str
    t: float
    point: tuple[float, float] | None = None
    detail: str = ""

    @property
    def completed(self) -> bool:
        return self.status == COMPLETED


@dataclass(frozen=True)
class AugmentedState:
    t: float
    x: float
    v: float
    u: tuple[float, ...]


@dataclass
class Trajectory:
    """Accepted-step samples plus per-step dense-output coefficients."""

    problem: JacobiProblem
    integrands: tuple[Expr, ...]
    ts: np.ndarray
    ys: np.ndarray          # shape (n_samples, 2 + n_channels)
    conts: np.ndarray       # shape (n_steps, 5, 2 + n_channels)
    termination: Termination
    mean_step: float

    @property
    def t0(self) -> float:
        return float(self.ts[0])

    @property
    def t_last(self) -> float:
        return float(self.ts[-1])

    def state(self, t: float) -> AugmentedState:
        """Dense-output state at any t inside the integrated window."""
        ts = self.ts
        if not (ts[0] <= t <= ts[-1]):
            raise IntegrationError(f"t={t} outside integrated window [{ts[0]}, {ts[-1]}]")
        if t == ts[-1]:
            y = self.ys[-1]
        else:
            k = int(np.searchsorted(ts, t, side="right")) - 1
            k = min(max(k, 0), len(ts) - 2)
            h = ts[k + 1] - ts[k]
            theta = (t - ts[k]) / h
            r = self.conts[k]
            y = r[0] + theta * (r[1] + (1 - theta) * (r[2] + theta * (r[3] + (1 - theta) * r[4])))
        return AugmentedState(t=float(t), x=float(y[0]), v=float(y[1]),
                              u=tuple(float(c) for c in y[2:]))

    def states(self) -> list[AugmentedState]:
        return [AugmentedState(float(t), float(y[0]), float(y[1]),
                               tuple(float(c) for c in y[2:]))
                for t, y in zip(self.ts, self.ys)]

    def channel_of(self, integrand: Expr) -> int:
        """Index of a registered accumulator, matched structurally."""
        target = ex.simplify(integrand)
        for i, g in enumerate(self.integrands):
            if ex.simplify(g) == target:
                return i
        raise AccumulatorMismatchError(
            f"integrand {ex.pprint(target)} is not registered on this trajectory")

    def to_csv(self) -> str:
        n_u = self.ys.shape[1] - 2
        header = "t,x,v" + "".join(f",u{i}" for i in range(n_u))
        lines = [header]
        for t, y in zip(self.ts, self.ys):
            lines.append(",".join("%.17g" % val for val in [t, *y]))
        return "\n".join(lines) + "\n"

    def to_jsonable(self) -> dict:
        n_u = self.ys.shape[1] - 2
        return {
            "t": [float(v) for v in self.ts],
            "x": [float(y[0]) for y in self.ys],
            "v": [float(y[1]) for y in self.ys],
            **{f"u{i}": [float(y[2 + i]) for y in self.ys] for i in range(n_u)},
        }


def _norm_err(err_vec, y0, y1, atol, rtol):
    sc = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err_vec / sc) ** 2)))


def integrate(p: JacobiProblem, integrands: list[Expr] | tuple[Expr, ...] = (),
              tol: tuple[float, float] = (1e-10, 1e-10),
              u0: tuple[float, ...] | None = None) -> Trajectory:
    """Integrate x'' = -(phi_x/2 v^2 + phi_t v + B) plus accumulator channels.

    tol is (absolute, relative), both in [1e-14, 1e-2].  Termination is
    Completed when t_end is reached; DomainAbort / BlowUp / StepFailure
    truncate the trajectory at the last accepted step.
    """
    atol, rtol = tol
    for v in (atol, rtol):
        if not (1e-14 <= v <= 1e-2):
            raise IntegrationError(f"tolerance {v} outside [1e-14, 1e-2]")
    integrands = tuple(integrands)
    accel = rhs(p)
    gs = [ex.compile_fn(ex.simplify(g), p.params) for g in integrands]
    n = 2 + len(gs)
    if u0 is None:
        u0 = (0.0,) * len(gs)
    elif len(u0) != len(gs):
        raise AccumulatorMismatchError("u0 length does not match integrand count")

    def f(t, y):
        out = np.empty(n)
        out[0] = y[1]
        out[1] = accel(t, y[0], y[1])
        for i, g in enumerate(gs):
            out[2 + i] = g(t, y[0])
        return out

    t0, t_end = p.t0, p.t_end
    hmin = 1e-12 * (t_end - t0)
    y = np.array([p.x0, p.v0, *u0], dtype=float)

    ts = [t0]
    ys = [y.copy()]
    conts = []

    def finish(status, t_at, point=None, detail=""):
        return Trajectory(
            problem=p, integrands=integrands,
            ts=np.array(ts), ys=np.array(ys),
            conts=(np.array(conts) if conts else np.zeros((0, 5, n))),
            termination=Termination(status, t_at, point, detail),
            mean_step=((ts[-1] - ts[0]) / max(len(conts), 1)),
        )

    try:
        k1 = f(t0, y)
    except DomainError as err:
        return finish(DOMAIN_ABORT, t0, (err.t, err.x), str(err))

    h = _initial_step(f, t0, y, k1, t_end, atol, rtol)

    t = t0
    errprev = 1.0
    rejects = 0
    just_rejected = False
    K = np.empty((7, n))

    while t < t_end:
        h = min(h, t_end - t)
        if h < hmin:
            h = hmin
        K[0] = k1
        try:
            for i in range(1, 7):
                yi = y + h * (_A_NP[i] @ K[:i])
                K[i] = f(t + _C[i] * h, yi)
        except DomainError as err:
            # a wide trial step may poke outside the domain; creep closer
            # before declaring the abort
            if h > 8.0 * hmin and rejects < _MAX_CONSECUTIVE_REJECTS:
                rejects += 1
                just_rejected = True
                h *= 0.25
                continue
            return finish(DOMAIN_ABORT, t, (err.t, err.x), str(err))
        y_new = y + h * (_B_NP @ K[:6])  # equals the stage-7 input (FSAL)
        err_vec = h * (_E_NP @ K)
        err = _norm_err(err_vec, y, y_new, atol, rtol)
        if not math.isfinite(err):
            err = 10.0

        if err <= 1.0:
            ydiff = y_new - y
            bspl = h * K[0] - ydiff
            cont = np.stack([
                y, ydiff, bspl,
                ydiff - h * K[6] - bspl,
                h * (_D_NP @ K),
            ])
            conts.append(cont)
            t = t + h
            y = y_new
            ts.append(t)
            ys.append(y.copy())
            if abs(y[0]) + abs(y[1]) > _BLOWUP_BOUND:
                return finish(BLOW_UP, t, (t, float(y[0])),
                              f"|x|+|v| exceeded {_BLOWUP_BOUND:g}")
            k1 = K[6]
            rejects = 0
            # PI controller, safety 0.9, exponents 0.7/4 and 0.4/4
            fac = 0.9 * err ** (-0.175) * errprev ** 0.1 if err > 0 else 5.0
            fac = min(1.0 if just_rejected else 5.0, max(0.2, fac))
            errprev = max(err, 1e-4)
            just_rejected = False
            h *= fac
        else:
            rejects += 1
            just_rejected = True
            if rejects >= _MAX_CONSECUTIVE_REJECTS and h <= hmin * 4.0:
                return finish(STEP_FAILURE, t, (t, float(y[0])),
                              f"{rejects} consecutive rejected steps at minimum step size")
            h *= max(0.2, 0.9 * err ** (-0.25))

    return finish(COMPLETED, t)


def _initial_step(f, t0, y0, f0, t_end, atol, rtol) -> float:
    """Standard starting-step heuristic from the embedded-RK literature."""
    sc = atol + rtol * np.abs(y0)
    d0 = float(np.sqrt(np.mean((y0 / sc) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / sc) ** 2)))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, t_end - t0)
    try:
        f1 = f(t0 + h0, y0 + h0 * f0)
        d2 = float(np.sqrt(np.mean(((f1 - f0) / sc) ** 2))) / h0
    except DomainError:
        return max(h0 * 0.1, 1e-10 * (t_end - t0))
    dm = max(d1, d2)
    h1 = (0.01 / dm) ** 0.2 if dm > 1e-15 else max(1e-6, h0 * 1e-3)
    return min(100.0 * h0, h1, t_end - t0)


# ------------------------------------------------------------- evaluation

@dataclass(frozen=True)
class EvalSeries:
    ts: np.ndarray
    values: np.ndarray
    truncated: bool = False
    abort_point: tuple[float, float] | None = None

    def max_drift(self) -> float:
        return float(np.max(np.abs(self.values - self.values[0])))

    def initial(self) -> float:
        return float(self.values[0])


@dataclass(frozen=True)
class DriftReport:
    """Constancy metrics for one invariant along one trajectory."""

    name: str
    initial_value: float
    max_abs_drift: float
    mean_abs_drift: float
    rel_drift: float
    order: float            # observed convergence order under step refinement
    truncated: bool = False
    window: tuple[float, float] = (0.0, 0.0)

    def to_jsonable(self) -> dict:
        return {
            "name": self.name,
            "initial_value": self.initial_value,
            "max_abs_drift": self.max_abs_drift,
            "mean_abs_drift": self.mean_abs_drift,
            "rel_drift": self.rel_drift,
            "order": (self.order if math.isfinite(self.order) else 99.0),
            "truncated": self.truncated,
            "window": list(self.window),
        }


def evaluate_along(traj: Trajectory, spec, grid: int = 1024) -> EvalSeries:
    """Sample an invariant on a uniform dense-output grid.

    Domain errors (e.g. the square-root factor leaving its region of
    validity) truncate the series at the failing point and flag it.
    """
    if grid < 2:
        raise ValueError("grid must be >= 2")
    channels = [traj.channel_of(g) for g in spec.integrands]
    fn = spec.compiled(traj.problem.params)
    ts = np.linspace(traj.t0, traj.t_last, grid)
    values = []
    truncated = False
    abort = None
    for t in ts:
        s = traj.state(float(t))
        try:
            values.append(fn(s.t, s.x, s.v, [s.u[c] for c in channels]))
        except DomainError as err:
            truncated = True
            abort = (err.t, err.x)
            break
    if len(values) < 2:
        raise IntegrationError(
            f"invariant {spec.name!r} undefined on the trajectory start")
    return EvalSeries(ts[: len(values)], np.array(values), truncated, abort)


def _drift_stats(series: EvalSeries) -> tuple[float, float, float]:
    dev = np.abs(series.values - series.values[0])
    scale = max(1.0, abs(float(series.values[0])))
    return float(np.max(dev)), float(np.mean(dev)), float(np.max(dev)) / scale


def drift_report(p: JacobiProblem, spec, integrands=(),
                 tol: tuple[float, float] = (1e-10, 1e-10),
                 grid: int = 1024, refine: float = 16.0) -> DriftReport:
    """Drift metrics at tol, with order estimated against a tol/refine rerun.

    The observed order is log(drift ratio) / log(mean-step ratio) between
    the two runs; drifts at the round-off floor report order inf.
    """
    regs = tuple(integrands) if integrands else tuple(spec.integrands)
    traj_c = integrate(p, regs, tol)
    series_c = evaluate_along(traj_c, spec, grid)
    max_c, mean_c, rel_c = _drift_stats(series_c)

    tol_f = (tol[0] / refine, tol[1] / refine)
    traj_f = integrate(p, regs, tol_f)
    series_f = evaluate_along(traj_f, spec, grid)
    max_f, _, _ = _drift_stats(series_f)

    floor = 1e-14 * max(1.0, abs(series_c.initial()))
    if max_f <= floor or max_c <= floor:
        order = math.inf
    else:
        h_ratio = traj_c.mean_step / traj_f.mean_step
        order = (math.log(max_c / max_f) / math.log(h_ratio)
                 if h_ratio > 1.0 and max_c > max_f else 0.0)
    return DriftReport(
        name=spec.name,
        initial_value=series_c.initial(),
        max_abs_drift=max_c,
        mean_abs_drift=mean_c,
        rel_drift=rel_c,
        order=order,
        truncated=series_c.truncated,
        window=(traj_c.t0, traj_c.t_last),
    )
