"""Per-spin expectation values, purity factor and mean-field diagnostics.

Expectation values come from Hellmann-Feynman: differentiating the quadratic
system with respect to a field amplitude p gives the linear system

    J(r) . dr/dp = dK/dp,

with J the Jacobian of the quadratic system at the solution.  The bath
<S^z_j> requires the regulated model (delta > 0) and is obtained by a
polynomial extrapolation in sqrt(delta) over a few small regulators.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ExtrapolationUnstable, NoConvergence, SingularJacobian, StepUnderflow
from .model import CoefficientSet, ModelParams, assemble_coefficients, rescaled_coupling
from .solver import (
    DEFAULT_TOL,
    BranchTracker,
    ChargeSolution,
    ParentState,
    newton_polish,
    refine_extended,
    residual_and_jacobian,
    solve_linear,
    track,
)

SPIN_BOUND = 0.5
PURE_GAMMA = 0.25
#: regulator values, relative to min(1, min_k(eps_k + j_z))
DEFAULT_DELTA_FACTORS = (1e-4, 2.5e-5, 6.25e-6)
_UNSTABLE_FRACTION = 0.1
_CLAMP_SLACK = 1e-4
_REG_MAX_ITER = 8
_REG_UNDERFLOW = 1e-6


class FieldParameter(str, Enum):
    BX = "Bx"
    BY = "By"
    BZ0 = "Bz0"


class Classification(str, Enum):
    DARK = "dark"
    BRIGHT = "bright"


def field_derivative_rhs(coeffs: CoefficientSet, parameter: str | FieldParameter, field: np.ndarray) -> np.ndarray:
    """dK_j/dp for p one of the parent-model field amplitudes."""
    parameter = FieldParameter(parameter)
    eps, jv, delta = coeffs.epsilons, coeffs.j_values, coeffs.delta
    n = coeffs.n_spins
    if parameter is FieldParameter.BZ0:
        bz = field[2]
        v = np.zeros(n)
        if delta > 0:
            v[1:] = bz * delta / (2.0 * (eps[1:] + jv[2]))
        v[0] = bz / 2.0
        return v
    a = 0 if parameter is FieldParameter.BX else 1
    # local field B^a_j = B^a / sqrt(eps_j + j_perp); K_j holds (B^a_j / 2)^2
    shifted = eps + jv[a]
    shifted[0] = jv[0] - jv[2] + delta
    amplitude = field[a] * np.sqrt(jv[0] - jv[2])
    return amplitude / (2.0 * shifted)


def sensitivity(
    coeffs: CoefficientSet,
    solution: ChargeSolution,
    parameter: str | FieldParameter,
    field: Sequence[float],
) -> np.ndarray:
    """dr/dp at a solution; ``field`` is the applied field (B0x, B0y, B0z)."""
    _, jac = residual_and_jacobian(coeffs, solution.r)
    return solve_linear(jac, field_derivative_rhs(coeffs, parameter, np.asarray(field, float)))


def inplane_and_central_expectations(
    params: ModelParams, coeffs: CoefficientSet, solution: ChargeSolution
) -> np.ndarray:
    """(N, 3) array of <S^a_j>; bath <S^z_j> entries are left as NaN."""
    if params.delta != 0:
        raise ValueError("expectations are evaluated on the delta = 0 model")
    _, jac = residual_and_jacobian(coeffs, solution.r)
    rhs = np.column_stack(
        [field_derivative_rhs(coeffs, p, params.field) for p in FieldParameter]
    )
    derivs = solve_linear(jac, rhs)
    scale = np.sqrt(params.epsilons + params.j_perp)
    scale[0] = np.sqrt(params.j_perp - params.j_z)
    out = np.full((params.n_spins, 3), np.nan)
    out[:, 0] = scale * derivs[:, 0]
    out[:, 1] = scale * derivs[:, 1]
    out[0, 2] = derivs[0, 2]
    return out


def regulator_values(
    params: ModelParams, factors: Sequence[float] = DEFAULT_DELTA_FACTORS
) -> tuple[float, ...]:
    """Absolute regulators: ``factors`` times min(1, min_k(eps_k + j_z))."""
    reference = min(1.0, float(np.min(params.epsilons[1:] + params.j_z)))
    return tuple(f * reference for f in factors)


def regulated_solution(
    params: ModelParams,
    start: ChargeSolution,
    delta: float,
    *,
    tol: float = DEFAULT_TOL,
) -> ChargeSolution:
    """Continue ``start`` (same g, smaller or zero regulator) to ``delta``.

    The path runs in s = sqrt(delta) at fixed g, so the regulated state is the
    one continuously connected to the delta = 0 eigenstate.  Tracking the
    regulated model in g instead can switch states at avoided crossings.
    """
    g = start.g_value
    s, s_target = float(np.sqrt(start.delta_value)), float(np.sqrt(delta))
    if s_target < s:
        raise ValueError("regulator continuation only runs towards larger delta")
    r, h = start.r, s_target - s
    coeffs = None
    while s < s_target:
        s_next = s_target if h >= s_target - s else s + h
        p = params.with_delta(s_next * s_next).with_g(g)
        coeffs = assemble_coefficients(p)
        try:
            sol = newton_polish(coeffs, r, tol, _REG_MAX_ITER, parent=start.parent, g_value=g)
        except (NoConvergence, SingularJacobian):
            h /= 2.0
            if h < _REG_UNDERFLOW * s_target:
                raise StepUnderflow(g, h) from None
            continue
        r, s = sol.r, s_next
    p = params.with_delta(delta).with_g(g)
    return refine_extended(p, ChargeSolution(r, g, delta, start.parent, 0.0, 0))


def _regulated_bath_sz(params: ModelParams, solution: ChargeSolution) -> np.ndarray:
    """sqrt(eps_j + j_z) * (dr_j/dB0z) / sqrt(delta) on a delta > 0 solution."""
    p = params.with_delta(solution.delta_value).with_g(solution.g_value)
    w = sensitivity(assemble_coefficients(p), solution, FieldParameter.BZ0, p.field)
    eps = p.epsilons[1:]
    return np.sqrt(eps + p.j_z) * w[1:] / np.sqrt(p.delta)


def _neville_at_zero(s: np.ndarray, values: list[np.ndarray]) -> np.ndarray:
    table = list(values)
    n = len(table)
    for m in range(1, n):
        table = [(s[i + m] * table[i] - s[i] * table[i + 1]) / (s[i + m] - s[i]) for i in range(n - m)]
    return table[0]


def extrapolate_bath_sz(values: Sequence[np.ndarray], deltas: Sequence[float]) -> np.ndarray:
    """Polynomial extrapolation in sqrt(delta) to delta = 0 (Neville's scheme).

    With m regulators the error terms up to sqrt(delta)^(m-1) are removed.
    Raises ExtrapolationUnstable when dropping the largest regulator moves
    the answer by more than a tenth of the spin length.
    """
    if len(values) != len(deltas) or len(values) < 2:
        raise ValueError("need at least two (value, delta) pairs")
    s = np.sqrt(np.asarray(deltas, dtype=float))
    arrays = [np.asarray(v, dtype=float) for v in values]
    full = _neville_at_zero(s, arrays)
    lower = _neville_at_zero(s[1:], arrays[1:]) if len(arrays) > 2 else arrays[-1]
    change = float(np.max(np.abs(full - lower))) if full.size else 0.0
    if change > _UNSTABLE_FRACTION * SPIN_BOUND:
        raise ExtrapolationUnstable(
            f"bath <S^z> extrapolation changes by {change:.3g} between orders"
        )
    return full


def clamp_to_spin_bound(expectations: np.ndarray) -> np.ndarray:
    """Shrink extrapolated bath z components that overshoot |<S_j>| <= 1/2.

    Overshoots larger than the extrapolation accuracy raise ExtrapolationUnstable.
    """
    out = np.array(expectations, dtype=float)
    for j in range(1, out.shape[0]):
        norm = np.linalg.norm(out[j])
        if norm <= SPIN_BOUND:
            continue
        if norm > SPIN_BOUND + _CLAMP_SLACK:
            raise ExtrapolationUnstable(f"spin {j} has |<S>| = {norm:.6f} > 1/2")
        inplane_sq = out[j, 0] ** 2 + out[j, 1] ** 2
        out[j, 2] = np.copysign(np.sqrt(max(SPIN_BOUND**2 - inplane_sq, 0.0)), out[j, 2])
    return out


def bath_sz_from_solution(
    params: ModelParams,
    solution: ChargeSolution,
    *,
    delta_factors: Sequence[float] = DEFAULT_DELTA_FACTORS,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """<S^z_j>, j = 1..N-1, for the delta = 0 eigenstate ``solution``."""
    deltas = sorted(regulator_values(params, delta_factors))
    values, current = [], solution
    for d in deltas:
        current = regulated_solution(params, current, d, tol=tol)
        values.append(_regulated_bath_sz(params, current))
    return extrapolate_bath_sz(values[::-1], deltas[::-1])


def bath_sz(
    params: ModelParams,
    parent: ParentState,
    g_value: float,
    *,
    delta_factors: Sequence[float] = DEFAULT_DELTA_FACTORS,
    steps_hint: int = 20,
) -> np.ndarray:
    """<S^z_j> for j = 1..N-1 of the state continued from ``parent``."""
    params = params.with_delta(0.0)
    sol = track(params, parent, [g_value], steps_hint=steps_hint)[0]
    return bath_sz_from_solution(params, sol, delta_factors=delta_factors)


def purity_factor(expectations: np.ndarray) -> float:
    """gamma_0 = |<S_0>|^2; equals 1/4 exactly for a pure central-spin state."""
    s0 = np.asarray(expectations)[0]
    return float(s0 @ s0)


def effective_field(params: ModelParams, expectations: np.ndarray) -> np.ndarray:
    """Applied field plus the mean-field Overhauser field of the bath (in-plane only)."""
    exps = np.asarray(expectations)
    gam = params.couplings
    bx, by, bz = params.field
    return np.array([bx + gam @ exps[1:, 0], by + gam @ exps[1:, 1], bz])


def classify(
    record: "float | ObservableRecord", tol_gamma: float = 1e-6, tol_field: float | None = None
) -> Classification:
    """Dark iff gamma_0 >= 1/4 - tol_gamma.

    ``record`` may be an ObservableRecord or a bare gamma_0.  ``tol_field`` is
    accepted for symmetry with the reported field diagnostic; the in-plane
    effective field never gates the label.
    """
    gamma0 = record.gamma0 if isinstance(record, ObservableRecord) else float(record)
    return Classification.DARK if gamma0 >= PURE_GAMMA - tol_gamma else Classification.BRIGHT


@dataclass(frozen=True)
class ObservableRecord:
    expectations: np.ndarray
    gamma0: float
    effective_field: np.ndarray
    g_tilde: float
    classification: Classification
    parent: ParentState
    g_value: float
    solution: ChargeSolution | None = None

    @property
    def inplane_effective_field(self) -> float:
        return float(np.hypot(self.effective_field[0], self.effective_field[1]))


def make_record(
    params: ModelParams,
    solution: ChargeSolution,
    expectations: np.ndarray,
    tol_gamma: float = 1e-6,
) -> ObservableRecord:
    gamma0 = purity_factor(expectations)
    p = params.with_g(solution.g_value)
    return ObservableRecord(
        expectations=expectations,
        gamma0=gamma0,
        effective_field=effective_field(p, expectations),
        g_tilde=rescaled_coupling(p),
        classification=classify(gamma0, tol_gamma),
        parent=solution.parent,
        g_value=solution.g_value,
        solution=solution,
    )


class ObservableTracker:
    """Advance one parent state along increasing g, producing ObservableRecords.

    The delta = 0 branch is tracked in g.  When ``with_bath_sz`` is set the
    bath <S^z_j> at each point come from short regulator continuations of
    that point's solution.  A failure at one grid point leaves the tracker at
    its last good point, so later points can still be attempted.
    """

    def __init__(
        self,
        params: ModelParams,
        parent: ParentState,
        g_max: float,
        *,
        with_bath_sz: bool = True,
        delta_factors: Sequence[float] = DEFAULT_DELTA_FACTORS,
        steps_hint: int = 20,
        tol: float = DEFAULT_TOL,
        tol_gamma: float = 1e-6,
    ):
        self.params = params.with_delta(0.0)
        self.parent = parent
        self.tol = tol
        self.tol_gamma = tol_gamma
        self.with_bath_sz = with_bath_sz
        self.delta_factors = tuple(delta_factors)
        self.main = BranchTracker(self.params, parent, g_max, steps_hint=steps_hint, tol=tol)

    @property
    def trackers(self) -> list[BranchTracker]:
        return [self.main]

    def advance(self, g: float) -> ObservableRecord:
        sol = self.main.advance(g)
        p = self.params.with_g(sol.g_value)
        exps = inplane_and_central_expectations(p, assemble_coefficients(p), sol)
        if self.with_bath_sz:
            exps[1:, 2] = bath_sz_from_solution(
                self.params, sol, delta_factors=self.delta_factors, tol=self.tol
            )
            exps = clamp_to_spin_bound(exps)
        return make_record(self.params, sol, exps, self.tol_gamma)


def observables_along(
    params: ModelParams,
    parent: ParentState,
    g_values: Sequence[float],
    **kwargs,
) -> list[ObservableRecord]:
    """Full ObservableRecords along a non-decreasing grid of RG couplings g."""
    g_values = [float(g) for g in g_values]
    if not g_values:
        return []
    tracker = ObservableTracker(params, parent, max(g_values), **kwargs)
    return [tracker.advance(g) for g in g_values]


def observables_at(
    params: ModelParams, parent: ParentState, g_value: float, **kwargs
) -> ObservableRecord:
    return observables_along(params, parent, [g_value], **kwargs)[0]
