"""Time integration of the coupled system: implicit diffusion and linear
decay, explicit chemotaxis and nonlinear reaction, adaptive step control,
and trajectory emission with per-output diagnostics.

The splitting keeps constants exact discrete fixed points and makes the
density mass obey the discrete relaxation law exactly (the flux form is
conservative, so reaction is the only mass source).  Bound violations beyond
the guard tolerance are errors, never silently clamped: the analytic bounds
hold for the continuum system, and enforcing them would mask scheme
failure."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from . import analysis
from .grid import (
    GridSpec,
    ScalarField,
    VectorField,
    divergence,
    gradient,
    helmholtz_solve,
    integral,
    read_field,
    cosine_mode,
)
from .model import (
    DerivedBounds,
    ModelKind,
    ModelParams,
    ShortParams,
    derived_bounds,
    reaction_terms,
    sensitivity_grad,
    short_steady_state,
    steady_state,
)


class SolverError(Exception):
    pass


class PositivityBreach(SolverError):
    """A or N left the guarded region: the step is too large, or regularity
    is genuinely being lost."""


class NonFinite(SolverError):
    pass


@dataclass
class SimState:
    t: float
    A: ScalarField
    N: ScalarField
    step_count: int = 0


@dataclass(frozen=True)
class InitialCondition:
    recipe: Literal["constants", "perturbed_steady", "file"]
    a0: Optional[float] = None
    n0: Optional[float] = None
    amplitude: Optional[float] = None
    mode_j: int = 1
    mode_k: int = 1
    path_A: Optional[str] = None
    path_N: Optional[str] = None


@dataclass(frozen=True)
class SimConfig:
    grid: GridSpec
    params: ModelKind
    t_end: float
    dt_init: float
    dt_min: float
    output_every: float
    ic: InitialCondition
    dt_max: Optional[float] = None  # fixed-step refinement studies set this
    cfl_advection: float = 0.5
    flux_scheme: Literal["centered", "upwind"] = "centered"
    guard_tol: float = 1e-6

    def __post_init__(self):
        if self.t_end <= 0 or self.dt_init <= 0 or self.dt_min <= 0:
            raise ValueError("t_end, dt_init, dt_min must be positive")
        if self.dt_min > self.dt_init:
            raise ValueError("dt_min must not exceed dt_init")
        if self.output_every < self.dt_min:
            raise ValueError("output_every must be at least dt_min")
        if not (0 < self.cfl_advection <= 1):
            raise ValueError("cfl_advection must lie in (0, 1]")
        if self.flux_scheme not in ("centered", "upwind"):
            raise ValueError(f"unknown flux scheme {self.flux_scheme!r}")


@dataclass(frozen=True)
class Outcome:
    kind: Literal["completed", "blowup_suspected", "failed"]
    t: float
    reason: Optional[str] = None


@dataclass
class RunResult:
    records: list
    snapshots: list  # (t, A, N) at output times
    outcome: Outcome
    max_step_mass_residual: float


# ---------------------------------------------------------------------------
# Initial conditions
# ---------------------------------------------------------------------------

def build_initial(config: SimConfig) -> tuple[ScalarField, ScalarField]:
    ic, grid, params = config.ic, config.grid, config.params
    if ic.recipe == "constants":
        if ic.a0 is None or ic.n0 is None:
            raise ValueError("constants recipe needs a0 and n0")
        A = ScalarField(grid, np.full((grid.n, grid.n), float(ic.a0)))
        N = ScalarField(grid, np.full((grid.n, grid.n), float(ic.n0)))
    elif ic.recipe == "perturbed_steady":
        if ic.amplitude is None:
            raise ValueError("perturbed_steady recipe needs an amplitude")
        if isinstance(params, ModelParams):
            a_star, n_star = steady_state(params)
        elif isinstance(params, ShortParams):
            a_star, n_star = short_steady_state(params)
        else:
            raise ValueError(
                "perturbed_steady is only defined for the built-in model kinds"
            )
        bump = cosine_mode(grid, ic.mode_j, ic.mode_k, ic.amplitude)
        A = ScalarField(grid, a_star + bump.values)
        N = ScalarField(grid, np.full((grid.n, grid.n), n_star))
    elif ic.recipe == "file":
        if ic.path_A is None or ic.path_N is None:
            raise ValueError("file recipe needs path_A and path_N")
        A = read_field(ic.path_A, grid)
        N = read_field(ic.path_N, grid)
    else:
        raise ValueError(f"unknown initial-condition recipe {ic.recipe!r}")
    if np.min(A.values) <= 0:
        raise ValueError("initial attractiveness must be positive everywhere")
    if np.min(N.values) < 0:
        raise ValueError("initial criminal density must be nonnegative")
    return A, N


# ---------------------------------------------------------------------------
# Single step
# ---------------------------------------------------------------------------

def _chemo_velocity(params: ModelKind, A: ScalarField, a_floor: float) -> VectorField:
    if isinstance(params, (ModelParams, ShortParams)):
        return sensitivity_grad(A, params.chi, a_floor)
    # generalized sensitivity: gradient of h(A) sampled at cells
    hA = ScalarField(A.grid, np.asarray(params.h(A.values), dtype=float))
    return gradient(hA)


def _advective_flux(
    N: ScalarField, v: VectorField, scheme: str
) -> VectorField:
    """Face flux of the drift term, -N_face * v, with N at faces by
    arithmetic mean (centered) or by donor cell (upwind)."""
    n = N.values
    fx = np.zeros_like(v.fx)
    fy = np.zeros_like(v.fy)
    if scheme == "centered":
        nfx = 0.5 * (n[1:, :] + n[:-1, :])
        nfy = 0.5 * (n[:, 1:] + n[:, :-1])
    else:
        vx_in = v.fx[1:-1, :]
        vy_in = v.fy[:, 1:-1]
        nfx = np.where(vx_in >= 0, n[:-1, :], n[1:, :])
        nfy = np.where(vy_in >= 0, n[:, :-1], n[:, 1:])
    fx[1:-1, :] = -nfx * v.fx[1:-1, :]
    fy[:, 1:-1] = -nfy * v.fy[:, 1:-1]
    return VectorField(N.grid, fx, fy)


def step(
    state: SimState,
    dt: float,
    config: SimConfig,
    bounds: Optional[DerivedBounds] = None,
    a_floor: Optional[float] = None,
) -> SimState:
    """One IMEX update: explicit chemotactic transport and nonlinear
    reaction, then implicit Helmholtz solves for diffusion and linear decay."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    params = config.params
    A, N = state.A, state.N
    if a_floor is None:
        a_floor = (bounds.a_min if bounds is not None else float(np.min(A.values))) / 2.0

    rA, rN, lam_A, lam_N = reaction_terms(params, A, N, atol=config.guard_tol)
    v = _chemo_velocity(params, A, a_floor)
    adv = divergence(_advective_flux(N, v, config.flux_scheme))

    a_exp = A.values + dt * rA.values
    n_exp = N.values + dt * (adv.values + rN.values)
    if not (np.all(np.isfinite(a_exp)) and np.all(np.isfinite(n_exp))):
        raise NonFinite("explicit stage produced non-finite values")

    eta = params.eta
    A_new = helmholtz_solve(ScalarField(A.grid, a_exp), eta, lam_A, dt)
    N_new = helmholtz_solve(ScalarField(N.grid, n_exp), 1.0, lam_N, dt)

    _guard(A_new, N_new, config, bounds)
    return SimState(state.t + dt, A_new, N_new, state.step_count + 1)


def _guard(
    A: ScalarField, N: ScalarField, config: SimConfig, bounds: Optional[DerivedBounds]
) -> None:
    if not (np.all(np.isfinite(A.values)) and np.all(np.isfinite(N.values))):
        raise NonFinite("state contains non-finite values")
    tol = config.guard_tol
    if bounds is not None:
        span = bounds.a_max - bounds.a_min
        floor = bounds.a_min - tol * span
        if float(np.min(A.values)) < floor:
            raise PositivityBreach(
                f"A reached {np.min(A.values):.6g}, below guarded floor {floor:.6g}"
            )
    elif float(np.min(A.values)) <= 0:
        raise PositivityBreach("A lost positivity")
    if float(np.min(N.values)) < -tol:
        raise PositivityBreach(
            f"N reached {np.min(N.values):.6g}, below -guard_tol = {-tol:.6g}"
        )


def adapt_dt(
    state: SimState,
    config: SimConfig,
    dt_prev: float,
    bounds: Optional[DerivedBounds] = None,
    a_floor: Optional[float] = None,
) -> float:
    """Grow the step by at most 10%, limited by the advective CFL condition
    on the chemotactic face velocity and by the output cadence."""
    if a_floor is None:
        a_floor = (
            bounds.a_min if bounds is not None else float(np.min(state.A.values))
        ) / 2.0
    v = _chemo_velocity(config.params, state.A, a_floor)
    vmax = v.max_abs()
    dt = dt_prev * 1.1
    if vmax > 0:
        dt = min(dt, config.cfl_advection * config.grid.h / vmax)
    dt = min(dt, config.output_every)
    if config.dt_max is not None:
        dt = min(dt, config.dt_max)
    return dt


# ---------------------------------------------------------------------------
# Trajectory driver
# ---------------------------------------------------------------------------

_SNAP = 1e-12


def run(config: SimConfig) -> RunResult:
    """Integrate to t_end or termination; deterministic given the config."""
    A, N = build_initial(config)
    params = config.params
    pitcher = isinstance(params, ModelParams)
    bounds = derived_bounds(A, N, params) if pitcher else None
    a_floor = (bounds.a_min if pitcher else float(np.min(A.values))) / 2.0
    n0_mass = integral(N)
    area = config.grid.area

    state = SimState(0.0, A, N, 0)
    records = [
        analysis.diagnostics_record(state, params, bounds, n0_mass, config.guard_tol)
    ]
    snapshots = [(0.0, A, N)]
    outcome = Outcome("completed", config.t_end)
    max_mass_res = 0.0
    dt = min(config.dt_init, config.output_every)
    out_idx = 1

    try:
        while state.t < config.t_end - _SNAP:
            t_next = min(out_idx * config.output_every, config.t_end)
            dt = adapt_dt(state, config, dt, bounds, a_floor)
            # clipping to the output boundary may shrink the step legitimately;
            # only guard-driven halving counts toward the dt_min floor
            dt_try = min(dt, t_next - state.t)
            halved = False
            while True:
                if halved and dt_try < config.dt_min * (1.0 - 1e-12):
                    outcome = Outcome(
                        "blowup_suspected",
                        state.t,
                        "step size collapsed below dt_min under positivity guards",
                    )
                    break
                try:
                    new_state = step(state, dt_try, config, bounds, a_floor)
                except (PositivityBreach, NonFinite):
                    dt_try *= 0.5
                    halved = True
                    continue
                break
            if outcome.kind != "completed":
                break

            if pitcher:
                res = (
                    abs(
                        (1.0 + params.omega * dt_try) * integral(new_state.N)
                        - integral(state.N)
                        - dt_try * params.omega * area
                    )
                    / area
                )
                max_mass_res = max(max_mass_res, res)
            state = new_state
            if halved:
                dt = dt_try
            if state.t >= t_next - _SNAP:
                records.append(
                    analysis.diagnostics_record(
                        state, params, bounds, n0_mass, config.guard_tol
                    )
                )
                snapshots.append((state.t, state.A, state.N))
                out_idx += 1
    except SolverError as exc:
        outcome = Outcome("failed", state.t, str(exc))

    if pitcher:
        _attach_energy_residuals(records, snapshots, params)
    return RunResult(records, snapshots, outcome, max_mass_res)


def _attach_energy_residuals(records, snapshots, params: ModelParams) -> None:
    """Fill r1..r4 wherever a uniformly spaced three-output window exists."""
    for i in range(1, len(snapshots) - 1):
        t0, t1, t2 = snapshots[i - 1][0], snapshots[i][0], snapshots[i + 1][0]
        if abs((t2 - t1) - (t1 - t0)) > 1e-9 * max(t1 - t0, t2 - t1):
            continue
        if min(np.min(snapshots[i + k - 1][2].values) for k in range(3)) <= 0:
            continue
        records[i].residuals = analysis.energy_residuals(
            (snapshots[i - 1], snapshots[i], snapshots[i + 1]), params
        )
