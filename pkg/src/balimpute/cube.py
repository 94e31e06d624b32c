"""Cube-method flight phase for balanced random rounding.

Given a vector pi0 in [0, 1]^M and a q x M balancing matrix A, the flight
phase performs a random walk inside the cube that keeps A @ pi constant at
every step and each coordinate a martingale, ending when the kernel of A
restricted to the still-fractional coordinates is trivial.  At most q
coordinates remain fractional.
"""

import csv
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from ._backend import NUMBA_ENABLED
from ._cube_kernels import (
    FLIGHT_DEGENERATE,
    FLIGHT_NO_RANDOMNESS,
    FLIGHT_OK,
    FLIGHT_STALLED,
    flight_kernel,
)

INTEGER_SNAP_TOL = 1e-9
PIVOT_RTOL = 1e-10
DIRECTION_GUARD = 1e-14


class FlightPhaseError(RuntimeError):
    pass


@dataclass(frozen=True)
class BalanceProblem:
    """Starting point pi0 and balancing matrix a_matrix (q rows, M columns)."""

    pi0: npt.NDArray[np.float64]
    a_matrix: npt.NDArray[np.float64]

    def __post_init__(self):
        pi0 = np.ascontiguousarray(self.pi0, dtype=np.float64)
        a = np.ascontiguousarray(self.a_matrix, dtype=np.float64)
        if pi0.ndim != 1:
            raise ValueError("pi0 must be a vector")
        if a.ndim != 2 or a.shape[1] != pi0.shape[0]:
            raise ValueError("a_matrix must be (q, len(pi0))")
        if not np.all(np.isfinite(a)):
            raise ValueError("a_matrix has non-finite entries")
        if not np.all((pi0 >= 0.0) & (pi0 <= 1.0)):
            raise ValueError("pi0 entries must lie in [0, 1]")
        object.__setattr__(self, "pi0", pi0)
        object.__setattr__(self, "a_matrix", a)

    @property
    def n_cells(self) -> int:
        return self.pi0.shape[0]

    @property
    def n_constraints(self) -> int:
        return self.a_matrix.shape[0]


@dataclass(frozen=True)
class FlightResult:
    itilde: npt.NDArray[np.float64]
    fractional: npt.NDArray[np.bool_]
    steps: int
    history: npt.NDArray[np.float64] | None = None

    @property
    def n_fractional(self) -> int:
        return int(self.fractional.sum())


def default_backend() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


def flight_phase(
    problem: BalanceProblem,
    rng: np.random.Generator,
    keep_history: bool = False,
    backend: str | None = None,
) -> FlightResult:
    """Run the flight phase; consumes exactly n_cells uniforms from rng.

    The uniform draws are taken up front so the generator state after the
    call does not depend on the number of steps, and so both backends walk
    the same trajectory for the same seed.
    """
    kern = flight_kernel(backend or default_backend())
    m = problem.n_cells
    pi = problem.pi0.copy()
    u = rng.random(m)
    if keep_history:
        history = np.empty((m + 1, m))
    else:
        history = np.empty((1, 1))
    status, steps = kern(
        pi, problem.a_matrix, u, INTEGER_SNAP_TOL, PIVOT_RTOL, DIRECTION_GUARD,
        keep_history, history,
    )
    if status == FLIGHT_DEGENERATE:
        raise FlightPhaseError(f"degenerate step length at step {steps}")
    if status == FLIGHT_STALLED:
        raise FlightPhaseError(f"no coordinate fixed at step {steps}")
    if status == FLIGHT_NO_RANDOMNESS:
        raise FlightPhaseError("uniform budget exhausted")
    assert status == FLIGHT_OK
    frac = (pi > 0.0) & (pi < 1.0)
    return FlightResult(
        itilde=pi,
        fractional=frac,
        steps=int(steps),
        history=history[: steps + 1].copy() if keep_history else None,
    )


def snap_integers(v: npt.NDArray[np.float64], tol: float = INTEGER_SNAP_TOL) -> npt.NDArray[np.float64]:
    """Round entries lying within tol of an integer; leave the rest alone."""
    v = np.asarray(v, dtype=np.float64)
    r = np.round(v)
    return np.where(np.abs(v - r) <= tol, r, v)


def write_trace_csv(problem: BalanceProblem, result: FlightResult, path) -> None:
    """Per-step trace (step, n_fractional, balance residual); needs history."""
    if result.history is None:
        raise ValueError("flight was run without keep_history")
    a = problem.a_matrix
    target = a @ problem.pi0
    scale = np.abs(a).sum(axis=1).max()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "n_fractional", "balance_residual", "residual_scale"])
        for t in range(result.history.shape[0]):
            pi_t = result.history[t]
            n_frac = int(((pi_t > 0.0) & (pi_t < 1.0)).sum())
            resid = float(np.abs(a @ pi_t - target).max())
            w.writerow([t, n_frac, repr(resid), repr(float(scale))])
