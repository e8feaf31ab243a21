"""Adaptive time stepping: proposal strategies, rejection-halving loop, and
the theoretical stability margins of the three schemes.

The proposal follows the literal composition

    tau_{n+1} = min( max(tau_min, tau_max / sqrt(1 + c * q^2)), r_user * tau_n ),

with q the trajectory change rate (strategy 1, weight gamma) or the energy
change rate (strategy 2, weight beta).  Note the outer min: when
r_user * tau_n < tau_min the cap wins and the proposal drops below the
floor; this is logged, not corrected.

A solver that cannot complete a step (determinant loss, Newton failure)
raises SolverError; the run loop halves the step and retries, aborting only
when the step falls below tau_min / 2**max_halvings.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import SolverError

__all__ = ["StepController", "StepHistory", "propose_dt", "run_adaptive",
           "stability_margin", "AdaptiveRunResult", "STRATEGY_TRAJECTORY",
           "STRATEGY_ENERGY", "THEORY_RATIO_BOUNDS"]

log = logging.getLogger(__name__)

STRATEGY_TRAJECTORY = 1
STRATEGY_ENERGY = 2

THEORY_RATIO_BOUNDS = {
    "allen-cahn": 1.5,
    "wgf-1d": 0.5 * (3.0 + np.sqrt(17.0)),
    "wgf-2d": 1.25,
}


@dataclass(frozen=True)
class StepController:
    strategy: int = STRATEGY_ENERGY
    gamma: float = 1.0
    beta: float = 1.0
    tau_min: float = 1e-6
    tau_max: float = 1e-2
    r_user: float = 1.5
    r_max_theory: float = 1.5
    enforce_theory: bool = False
    max_halvings: int = 40

    def __post_init__(self):
        if self.strategy not in (STRATEGY_TRAJECTORY, STRATEGY_ENERGY):
            raise ValueError(f"unknown strategy {self.strategy}")
        if not 0.0 < self.tau_min <= self.tau_max:
            raise ValueError("need 0 < tau_min <= tau_max")
        if self.r_user <= 0.0:
            raise ValueError("r_user must be positive")
        if self.gamma < 0.0 or self.beta < 0.0:
            raise ValueError("strategy weights must be nonnegative")


@dataclass(frozen=True)
class StepHistory:
    """Quantities of the last accepted step feeding the proposal."""

    tau: float
    trajectory_rate: float = 0.0  # ||(x^n - x^{n-1}) / tau_n||_h
    energy_rate: float = 0.0      # |E^n - E^{n-1}| / tau_n

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")


def propose_dt(controller: StepController, history: StepHistory) -> float:
    if controller.strategy == STRATEGY_TRAJECTORY:
        q2 = controller.gamma * history.trajectory_rate ** 2
    else:
        q2 = controller.beta * history.energy_rate ** 2
    base = controller.tau_max / np.sqrt(1.0 + q2)
    cap = controller.r_user * history.tau
    proposal = min(max(controller.tau_min, base), cap)
    if proposal < controller.tau_min:
        log.warning("ratio cap pushed the proposal below tau_min (%.3e < %.3e)",
                    proposal, controller.tau_min)
    if controller.enforce_theory:
        proposal = min(proposal, controller.r_max_theory * history.tau)
    return float(proposal)


@dataclass
class AdaptiveRunResult:
    """Per-accepted-step log of an adaptive run."""

    times: list = field(default_factory=list)
    taus: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    masses: list = field(default_factory=list)
    min_densities: list = field(default_factory=list)
    max_densities: list = field(default_factory=list)
    rejections: list = field(default_factory=list)
    boundary_lo: list = field(default_factory=list)
    boundary_hi: list = field(default_factory=list)
    aborted: bool = False
    abort_reason: str = ""

    def append(self, info, tau, ratio, rejections):
        self.times.append(info["time"])
        self.taus.append(tau)
        self.ratios.append(ratio)
        self.energies.append(info["energy"])
        self.masses.append(info["mass"])
        self.min_densities.append(info["min_density"])
        self.max_densities.append(info.get("max_density", np.nan))
        self.rejections.append(rejections)
        self.boundary_lo.append(info.get("boundary_lo", np.nan))
        self.boundary_hi.append(info.get("boundary_hi", np.nan))

    @property
    def total_rejections(self) -> int:
        return int(sum(self.rejections))


def run_adaptive(sim, controller: StepController, t_final: float,
                 max_steps: int = 2_000_000, stall_taus: int = 0) -> AdaptiveRunResult:
    """Drive a simulation adapter until t_final (or abort).

    ``sim`` provides: ``time``, ``tau_prev``, ``trajectory_rate``,
    ``energy_rate``, and ``bdf2_step(tau) -> info dict`` that commits the
    step or raises SolverError leaving the state untouched.

    ``stall_taus`` > 0 declares tau_min exhaustion once that many
    consecutive accepted steps sit at or below tau_min (blow-up runs would
    otherwise grind forever at rejection-halved steps).
    """
    result = AdaptiveRunResult()
    floor = controller.tau_min / 2 ** controller.max_halvings
    at_floor = 0
    below_floor = 0
    for _ in range(max_steps):
        if sim.time >= t_final - 1e-13:
            return result
        history = StepHistory(sim.tau_prev, sim.trajectory_rate, sim.energy_rate)
        tau = propose_dt(controller, history)
        remaining = t_final - sim.time
        # land exactly on t_final without leaving a sliver the schemes cannot
        # integrate: either finish now or split the tail into two even steps
        if remaining <= tau * (1.0 + 1e-7):
            tau = remaining
        elif remaining <= 2.0 * tau:
            tau = 0.5 * remaining
        rejections = 0
        while True:
            try:
                info = sim.bdf2_step(tau)
                break
            except SolverError as exc:
                rejections += 1
                tau *= 0.5
                if tau < floor:
                    result.aborted = True
                    result.abort_reason = (f"step halved below {floor:.3e} at "
                                           f"t={sim.time:.6f}: {exc}")
                    log.warning("adaptive run aborted: %s", result.abort_reason)
                    return result
        result.append(info, tau, tau / history.tau, rejections)
        if stall_taus > 0:
            at_floor = at_floor + 1 if tau <= controller.tau_min * (1.0 + 1e-9) else 0
            if at_floor >= stall_taus:
                result.aborted = True
                result.abort_reason = (f"tau collapsed to tau_min for {stall_taus} "
                                       f"consecutive steps at t={sim.time:.6f}")
                return result
        # the literal ratio cap can trap the step strictly below tau_min after
        # a rejection cascade (proposals then grow only by r_user per step and
        # never recross the floor within any useful horizon)
        below_floor = below_floor + 1 if tau < controller.tau_min * (1.0 - 1e-12) else 0
        if below_floor >= 200:
            result.aborted = True
            result.abort_reason = (f"trapped below tau_min for {below_floor} "
                                   f"consecutive steps at t={sim.time:.6f}")
            log.warning("adaptive run aborted: %s", result.abort_reason)
            return result
    result.aborted = True
    result.abort_reason = f"exceeded {max_steps} accepted steps"
    return result


def stability_margin(scheme: str, r: float, r_max: Optional[float] = None) -> float:
    """Distance of the scheme's per-step energy inequality from failure at ratio r.

    allen-cahn:  (2r+1)(3-r)/(8(r+1)) - r_max/(2(r_max+1))
    wgf-1d:      (2 + 3r - r^2)/(1+r)
    wgf-2d:      1/4 - r^3/((1+r)(1+2r))
    """
    if r <= 0.0:
        raise ValueError("ratio must be positive")
    if scheme == "allen-cahn":
        bound = THEORY_RATIO_BOUNDS[scheme] if r_max is None else r_max
        return (2.0 * r + 1.0) * (3.0 - r) / (8.0 * (r + 1.0)) - bound / (2.0 * (bound + 1.0))
    if scheme == "wgf-1d":
        return (2.0 + 3.0 * r - r * r) / (1.0 + r)
    if scheme == "wgf-2d":
        return 0.25 - r ** 3 / ((1.0 + r) * (1.0 + 2.0 * r))
    raise ValueError(f"unknown scheme {scheme!r}")
