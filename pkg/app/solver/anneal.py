"""Simulated annealing over QUBO instances.

Each restart ``r`` draws from its own PCG64 stream ``default_rng(seed + r)``:
one initial state, then one uniform per variable per sweep.  Restarts are
advanced together as rows of a matrix, but every row only consumes its own
stream, so a restart's trajectory does not depend on how many others run
beside it.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from app.compiler.qubo import QuboInstance
from app.config import settings
from app.errors import SolverError
from app.schemas.run import AnnealSchedule
from app.solver.report import RunReport, SpinSolution

LOGGER = logging.getLogger(__name__)

CALIBRATION_SWEEPS = 20


@dataclass(frozen=True)
class ResolvedSchedule:
    """A schedule with every field fixed for one instance."""

    sweeps: int
    beta_start: float
    beta_end: float
    restarts: int
    seed: int
    quench: bool = True
    time_budget_ms: Optional[float] = None

    def __post_init__(self) -> None:
        if self.sweeps < 1 or self.restarts < 1:
            raise SolverError("sweeps and restarts must be >= 1")
        if not 0 < self.beta_start <= self.beta_end:
            raise SolverError(f"Need 0 < beta_start <= beta_end, got {self.beta_start}, {self.beta_end}")

    def betas(self) -> np.ndarray:
        """Geometric ramp from ``beta_start`` to ``beta_end``, one value per sweep."""

        if self.sweeps == 1:
            return np.array([self.beta_end])
        return np.geomspace(self.beta_start, self.beta_end, self.sweeps)


def auto_betas(qubo: QuboInstance) -> tuple:
    """Betas at which the largest uphill move starts at ``hot_acceptance``
    and the smallest ends at ``cold_acceptance``."""

    if not qubo.coefficients:
        return 1.0, 1.0
    diag, rows, cols, values = qubo.arrays()
    reach = np.abs(diag).astype(np.float64)
    np.add.at(reach, rows, np.abs(values))
    np.add.at(reach, cols, np.abs(values))
    smallest = min(abs(value) for value in qubo.coefficients.values())
    beta_start = math.log(1.0 / settings.hot_acceptance) / float(reach.max())
    beta_end = math.log(1.0 / settings.cold_acceptance) / float(smallest)
    return beta_start, max(beta_start, beta_end)


class _Annealer:
    """Batched single-flip Metropolis dynamics with incremental local fields."""

    def __init__(self, qubo: QuboInstance, seeds: List[int]) -> None:
        self.qubo = qubo
        self.n = qubo.num_vars
        self.diag = qubo.arrays()[0]
        self.coupling = qubo.symmetric_matrix()
        self.rngs = [np.random.default_rng(seed) for seed in seeds]
        self.state = np.stack([rng.integers(0, 2, size=self.n, dtype=np.int64) for rng in self.rngs])
        self.field = self.state @ self.coupling
        self.energy = qubo.energies(self.state)
        self.best_energy = self.energy.copy()
        self.best_state = self.state.copy()

    def delta(self, i: int) -> np.ndarray:
        return (1 - 2 * self.state[:, i]) * (self.diag[i] + self.field[:, i])

    def flip(self, i: int, mask: np.ndarray, delta: np.ndarray) -> None:
        if not mask.any():
            return
        change = 1 - 2 * self.state[mask, i]
        self.state[mask, i] += change
        self.field[mask] += change[:, None] * self.coupling[i][None, :]
        self.energy[mask] += delta[mask]

    def sweep(self, beta: float) -> None:
        uniforms = np.stack([rng.random(self.n) for rng in self.rngs])
        for i in range(self.n):
            delta = self.delta(i)
            accept = delta <= 0
            uphill = ~accept
            if uphill.any():
                accept[uphill] = uniforms[uphill, i] < np.exp(-beta * delta[uphill].astype(np.float64))
            self.flip(i, accept, delta)
        self._track_best()

    def quench(self) -> None:
        """Greedy descent until no single flip lowers any restart's energy."""

        improved = True
        while improved:
            improved = False
            for i in range(self.n):
                delta = self.delta(i)
                mask = delta < 0
                if mask.any():
                    improved = True
                    self.flip(i, mask, delta)
        self._track_best()

    def _track_best(self) -> None:
        better = self.energy < self.best_energy
        if better.any():
            self.best_energy[better] = self.energy[better]
            self.best_state[better] = self.state[better]


def _calibrate_sweeps(qubo: QuboInstance, budget_ms: float, beta: float) -> int:
    probe = _Annealer(qubo, [0])
    started = time.perf_counter()
    for _ in range(CALIBRATION_SWEEPS):
        probe.sweep(beta)
    per_sweep_ms = max((time.perf_counter() - started) * 1000.0 / CALIBRATION_SWEEPS, 1e-6)
    sweeps = max(1, int(budget_ms / per_sweep_ms))
    LOGGER.info("Calibrated %.3f ms per sweep: %s sweeps fit a %s ms budget", per_sweep_ms, sweeps, budget_ms)
    return sweeps


def resolve_schedule(qubo: QuboInstance, schedule: Optional[AnnealSchedule] = None) -> ResolvedSchedule:
    """Fill unset schedule fields from the instance and settings."""

    schedule = schedule or AnnealSchedule()
    auto_start, auto_end = auto_betas(qubo)
    beta_start = schedule.beta_start if schedule.beta_start is not None else auto_start
    beta_end = schedule.beta_end if schedule.beta_end is not None else max(auto_end, beta_start)
    if schedule.sweeps is not None:
        sweeps = schedule.sweeps
    elif schedule.time_budget_ms is not None:
        sweeps = _calibrate_sweeps(qubo, schedule.time_budget_ms, beta_start)
    else:
        sweeps = max(1, settings.sweeps_per_var * qubo.num_vars)
    return ResolvedSchedule(
        sweeps=sweeps,
        beta_start=beta_start,
        beta_end=beta_end,
        restarts=schedule.restarts,
        seed=schedule.seed,
        quench=schedule.quench,
        time_budget_ms=schedule.time_budget_ms,
    )


def solve_sa(qubo: QuboInstance, schedule: Optional[AnnealSchedule] = None) -> RunReport:
    """Anneal ``restarts`` independent chains and report each one's best energy."""

    qubo.check_int64()
    resolved = resolve_schedule(qubo, schedule)
    LOGGER.info(
        "Annealing %s variables: %s restarts x %s sweeps, beta %.4g -> %.4g, seed %s",
        qubo.num_vars,
        resolved.restarts,
        resolved.sweeps,
        resolved.beta_start,
        resolved.beta_end,
        resolved.seed,
    )
    started = time.perf_counter()
    seeds = [resolved.seed + r for r in range(resolved.restarts)]
    annealer = _Annealer(qubo, seeds)
    if qubo.num_vars:
        for beta in resolved.betas():
            annealer.sweep(float(beta))
        if resolved.quench:
            annealer.quench()
    elapsed = time.perf_counter() - started

    energies = [int(value) for value in annealer.best_energy]
    for k, energy in enumerate(energies):
        LOGGER.debug("restart %s best energy %s", k, energy)
    winner = int(np.argmin(annealer.best_energy)) if energies else 0
    best = SpinSolution.from_assignment(qubo, annealer.best_state[winner].tolist())
    if resolved.time_budget_ms is not None:
        t_com = resolved.time_budget_ms / 1000.0
    else:
        t_com = settings.nominal_trial_ms / 1000.0
    report = RunReport(
        solver="sa",
        energies=energies,
        rescaled=[qubo.rescale(energy) for energy in energies],
        best=best,
        seed=resolved.seed,
        sweeps=resolved.sweeps,
        t_com=t_com,
        wall_times=[elapsed / resolved.restarts] * resolved.restarts,
        states=[tuple(int(bit) for bit in row) for row in annealer.best_state],
    )
    LOGGER.info(
        "Annealing done in %.2fs: best energy %s (rescaled %s), p_s=%s",
        elapsed,
        best.energy,
        best.rescaled_energy,
        float(report.success_probability()),
    )
    return report


def exact_report(solution: SpinSolution, qubo: QuboInstance) -> RunReport:
    """Single-restart report wrapping an exact solution."""

    return RunReport(
        solver="exact",
        energies=[solution.energy],
        rescaled=[solution.rescaled_energy],
        best=solution,
        states=[solution.assignment],
        t_com=settings.nominal_trial_ms / 1000.0,
    )
