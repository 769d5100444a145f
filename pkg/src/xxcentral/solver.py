"""Newton / homotopy solver for the quadratic conserved-charge equations.

For every eigenstate the eigenvalues r_j of the N conserved charges satisfy

    F_j(r) = r_j^2 + 1/2 sum_{k != j} C_jk r_k - K_j = 0.

At g = 0 the system decouples and the solutions are r_j = +-|B_j|/2; each
sign vector (the *parent state*) is tracked to finite g by continuation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateSeed,
    NoConvergence,
    SingularJacobian,
    StepUnderflow,
    XXCentralError,
)
from .model import CoefficientSet, ModelParams, assemble_coefficients

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 50
MAX_ENUMERATE_SPINS = 16

# continuation step control
_STEP_MAX_ITER = 8
_EASY_ITERATIONS = 4
_GROWTH = 1.5
_UNDERFLOW = 1e-12
# a corrector that moves farther than this fraction of the predicted change
# has probably landed on a neighbouring branch
_MAX_CORRECTION_RATIO = 0.5
_CORRECTION_FLOOR = 1e-8


@dataclass(frozen=True)
class ParentState:
    """Sign vector of the g = 0 product state; index 0 is the central spin."""

    signs: tuple[int, ...]

    def __post_init__(self):
        signs = tuple(int(s) for s in self.signs)
        if any(s not in (1, -1) for s in signs):
            raise ValueError(f"parent signs must be +1 or -1, got {self.signs!r}")
        object.__setattr__(self, "signs", signs)

    @classmethod
    def from_label(cls, label: str) -> "ParentState":
        table = {"+": 1, "-": -1, "−": -1}
        try:
            return cls(tuple(table[c] for c in label))
        except KeyError as exc:
            raise ValueError(f"invalid character {exc.args[0]!r} in parent label") from None

    @classmethod
    def from_motif(cls, motif: str, n_spins: int) -> "ParentState":
        """Repeat ``motif`` (e.g. ``"--+"``) and truncate it to ``n_spins`` signs."""
        base = cls.from_label(motif).signs
        if not base:
            raise ValueError("empty parent motif")
        reps = -(-n_spins // len(base))
        return cls((base * reps)[:n_spins])

    @property
    def label(self) -> str:
        return "".join("+" if s > 0 else "-" for s in self.signs)

    def __len__(self) -> int:
        return len(self.signs)

    def as_array(self) -> np.ndarray:
        return np.array(self.signs, dtype=float)


@dataclass(frozen=True)
class ChargeSolution:
    r: np.ndarray
    g_value: float
    delta_value: float
    parent: ParentState | None
    residual_norm: float
    iterations: int = 0

    @property
    def energy(self) -> float:
        """Eigenvalue of the central charge, i.e. the energy of H."""
        return float(self.r[0])


def residual_and_jacobian(coeffs: CoefficientSet, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    r = np.asarray(r, dtype=float)
    half_c = 0.5 * coeffs.c_matrix
    residual = r * r + half_c @ r - coeffs.constant_terms
    jac = half_c.copy()
    jac[np.diag_indices_from(jac)] = 2.0 * r
    return residual, jac


def solve_linear(jac: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Dense LU solve with partial pivoting; singular systems raise SingularJacobian."""
    try:
        lu, piv = scipy.linalg.lu_factor(jac, check_finite=True)
    except (ValueError, scipy.linalg.LinAlgError) as exc:
        raise SingularJacobian(str(exc)) from exc
    diag = np.abs(np.diag(lu))
    if diag.min() <= np.finfo(float).eps * max(diag.max(), 1.0) * jac.shape[0]:
        raise SingularJacobian("Jacobian is numerically singular")
    return scipy.linalg.lu_solve((lu, piv), rhs)


def residual_scale(coeffs: CoefficientSet) -> float:
    """Magnitude used to express the convergence tolerance (>= 1)."""
    return max(1.0, float(np.max(np.abs(coeffs.constant_terms))))


def newton_polish(
    coeffs: CoefficientSet,
    guess: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    *,
    parent: ParentState | None = None,
    g_value: float = float("nan"),
) -> ChargeSolution:
    """Newton iteration on F(r) = 0 until ``max|F| <= tol * residual_scale``.

    Once the test passes, one more Newton step is taken and kept if it does
    not increase the residual.  At strong coupling the central equation
    cancels terms of order K_j down to O(1), so the scaled test alone leaves
    r_0 far less accurate than the data allow.
    """
    r = np.array(guess, dtype=float)
    if r.shape != (coeffs.n_spins,) or not np.all(np.isfinite(r)):
        raise ValueError("guess must be a finite vector of length n_spins")
    threshold = tol * residual_scale(coeffs)
    for it in range(max_iter + 1):
        residual, jac = residual_and_jacobian(coeffs, r)
        res_norm = float(np.max(np.abs(residual)))
        if not np.isfinite(res_norm):
            raise NoConvergence(it, res_norm)
        if res_norm <= threshold:
            if res_norm > 0:
                refined = r - solve_linear(jac, residual)
                ref_norm = check_solution(coeffs, refined)
                if ref_norm <= res_norm:
                    r, res_norm = refined, ref_norm
            return ChargeSolution(r, g_value, coeffs.delta, parent, res_norm, it)
        if it == max_iter:
            break
        r = r - solve_linear(jac, residual)
    raise NoConvergence(max_iter, res_norm)


def seed_solution(coeffs: CoefficientSet, parent: ParentState) -> ChargeSolution:
    """Exact g = 0 solution r_j = sign_j |B_j| / 2."""
    if len(parent) != coeffs.n_spins:
        raise ValueError(f"parent has {len(parent)} signs for {coeffs.n_spins} spins")
    norms = np.linalg.norm(coeffs.local_fields, axis=1)
    if np.any(norms == 0):
        bad = np.flatnonzero(norms == 0).tolist()
        raise DegenerateSeed(
            f"spins {bad} have zero local field; the g = 0 parent labelling is ill-defined"
        )
    r = parent.as_array() * norms / 2.0
    return ChargeSolution(r, 0.0, coeffs.delta, parent, 0.0, 0)


def refine_extended(
    params: ModelParams, solution: ChargeSolution, iterations: int = 3
) -> ChargeSolution:
    """Mixed-precision iterative refinement of a converged solution.

    Coefficients and residuals are evaluated in ``np.longdouble`` while the
    corrections reuse the double-precision LU solve.  Coefficient rounding is
    amplified strongly at large g, which is what limits the double-precision
    answer.  On platforms where longdouble is plain double this is a no-op.
    """
    if np.finfo(np.longdouble).eps >= np.finfo(float).eps:
        return solution
    ext = assemble_coefficients(params.with_g(solution.g_value), dtype=np.longdouble)
    r = solution.r.astype(np.longdouble)
    best_r, best_norm = r, None
    for _ in range(iterations + 1):
        residual = r * r + (ext.c_matrix @ r) / 2 - ext.constant_terms
        norm = float(np.max(np.abs(residual)))
        if best_norm is None or norm < best_norm:
            best_r, best_norm = r, norm
        if norm == 0:
            break
        jac = 0.5 * ext.c_matrix.astype(float)
        jac[np.diag_indices_from(jac)] = 2.0 * r.astype(float)
        try:
            r = r - solve_linear(jac, residual.astype(float)).astype(np.longdouble)
        except SingularJacobian:
            break
    return ChargeSolution(
        best_r.astype(float),
        solution.g_value,
        solution.delta_value,
        solution.parent,
        best_norm,
        solution.iterations,
    )


class Homotopy:
    """Coefficients of the quadratic system as exact functions of g.

    C scales linearly with g and K_j = g^2 K1_j + Kb_j, so a single assembly
    at g = 1 and g = 0 covers the whole path.
    """

    def __init__(self, params: ModelParams):
        self.params = params
        self.at_zero = assemble_coefficients(params.with_g(0.0))
        unit = assemble_coefficients(params.with_g(1.0))
        self.c_unit = unit.c_matrix
        self.k_unit = unit.constant_terms - self.at_zero.constant_terms

    def coefficients(self, g: float) -> CoefficientSet:
        if g == 0.0:
            return self.at_zero
        return assemble_coefficients(self.params.with_g(g))

    def dF_dg(self, g: float, r: np.ndarray) -> np.ndarray:
        return 0.5 * self.c_unit @ r - 2.0 * g * self.k_unit


def _predict(hom: Homotopy, coeffs: CoefficientSet, g: float, r: np.ndarray, h: float) -> np.ndarray:
    _, jac = residual_and_jacobian(coeffs, r)
    try:
        tangent = solve_linear(jac, -hom.dF_dg(g, r))
    except SingularJacobian:
        return r
    return r + h * tangent


def _jumped(previous: np.ndarray, predicted: np.ndarray, corrected: np.ndarray) -> bool:
    moved = float(np.max(np.abs(predicted - previous)))
    correction = float(np.max(np.abs(corrected - predicted)))
    floor = _CORRECTION_FLOOR * max(1.0, float(np.max(np.abs(previous))))
    return correction > _MAX_CORRECTION_RATIO * moved + floor


class BranchTracker:
    """Stateful continuation of one parent branch towards increasing g.

    The step size starts at ``(g_max - g_start) / steps_hint``; it is halved
    when Newton fails or the corrector strays far from the predictor, and grown by 1.5 (never above its initial value) after
    steps converging in fewer than 4 iterations.  A failed :meth:`advance`
    leaves the tracker at its last good point.
    """

    def __init__(
        self,
        params: ModelParams,
        parent: ParentState,
        g_max: float,
        *,
        steps_hint: int = 20,
        tol: float = DEFAULT_TOL,
        start: ChargeSolution | None = None,
        extended: bool = True,
    ):
        self.hom = Homotopy(params)
        self.tol = tol
        self.extended = extended
        if start is None:
            start = seed_solution(self.hom.at_zero, parent)
        elif start.parent is not None:
            parent = start.parent
        self.parent = parent
        self.current = start
        self.coeffs = self.hom.coefficients(start.g_value)
        self.g_max = float(g_max)
        span = self.g_max - start.g_value
        self.h_max = span / max(int(steps_hint), 1) if span > 0 else 0.0
        self.h = self.h_max
        self.steps = 0
        self.rejected = 0
        self.newton_iterations = 0

    @property
    def g(self) -> float:
        return self.current.g_value

    def advance(self, target: float) -> ChargeSolution:
        target = float(target)
        if target < self.g:
            raise ValueError(f"cannot move backwards from g={self.g!r} to {target!r}")
        if self.h <= 0 and target > self.g:
            self.h = self.h_max = target - self.g
        floor = _UNDERFLOW * max(self.g_max, target)
        while self.g < target:
            step = min(self.h, target - self.g)
            g_next = target if step == target - self.g else self.g + step
            next_coeffs = self.hom.coefficients(g_next)
            guess = _predict(self.hom, self.coeffs, self.g, self.current.r, g_next - self.g)
            try:
                sol = newton_polish(
                    next_coeffs, guess, self.tol, _STEP_MAX_ITER, parent=self.parent, g_value=g_next
                )
                jumped = _jumped(self.current.r, guess, sol.r)
            except (NoConvergence, SingularJacobian):
                jumped = True
            if jumped:
                self.rejected += 1
                self.h = step / 2.0
                if self.h < floor:
                    self.h = self.h_max
                    raise StepUnderflow(self.g, step / 2.0) from None
                continue
            self.steps += 1
            self.newton_iterations += sol.iterations
            self.h = min(self.h_max, step * _GROWTH) if sol.iterations < _EASY_ITERATIONS else step
            self.current, self.coeffs = sol, next_coeffs
        if self.extended and self.current.g_value > 0:
            self.current = refine_extended(self.hom.params, self.current)
        return self.current


def track(
    params: ModelParams,
    parent: ParentState,
    g_values: Iterable[float],
    *,
    steps_hint: int = 20,
    tol: float = DEFAULT_TOL,
    start: ChargeSolution | None = None,
) -> list[ChargeSolution]:
    """Follow one parent branch through non-decreasing ``g_values``."""
    targets = [float(g) for g in g_values]
    if any(b < a for a, b in zip(targets, targets[1:])):
        raise ValueError("g_values must be non-decreasing")
    if not targets:
        return []
    tracker = BranchTracker(
        params, parent, targets[-1], steps_hint=steps_hint, tol=tol, start=start
    )
    return [tracker.advance(t) for t in targets]


def continue_in_g(
    params: ModelParams,
    parent: ParentState,
    g_target: float,
    steps_hint: int = 20,
    *,
    tol: float = DEFAULT_TOL,
    start: ChargeSolution | None = None,
) -> ChargeSolution:
    """Deform the parent's g = 0 solution (or ``start``) to ``g_target``.

    ``params.g`` is ignored; only the shape (eps, field, delta) is used.
    """
    if not g_target >= 0:
        raise ValueError(f"g_target must be >= 0, got {g_target!r}")
    if start is None and g_target == 0:
        return seed_solution(assemble_coefficients(params.with_g(0.0)), parent)
    return track(params, parent, [g_target], steps_hint=steps_hint, tol=tol, start=start)[0]


@dataclass(frozen=True)
class EnumeratedState:
    parent: ParentState
    solution: ChargeSolution | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.solution is not None


@dataclass(frozen=True)
class Enumeration:
    states: list[EnumeratedState]
    collisions: list[tuple[int, int]]

    @property
    def solutions(self) -> list[ChargeSolution]:
        return [s.solution for s in self.states if s.solution is not None]

    @property
    def complete(self) -> bool:
        return all(s.ok for s in self.states)


def all_parents(n_spins: int) -> list[ParentState]:
    """Every sign vector, ordered lexicographically with '+' first."""
    out = []
    for code in range(2**n_spins):
        bits = [(code >> (n_spins - 1 - i)) & 1 for i in range(n_spins)]
        out.append(ParentState(tuple(-1 if b else 1 for b in bits)))
    return out


def enumerate_all_states(
    params: ModelParams,
    g_target: float,
    *,
    steps_hint: int = 20,
    tol: float = DEFAULT_TOL,
    max_spins: int = MAX_ENUMERATE_SPINS,
    separation: float = 1e-8,
) -> Enumeration:
    """Continue every one of the 2^N parents to ``g_target``.

    Failures are collected per parent instead of aborting.  Pairs of
    solutions closer than ``separation`` (max-norm) are reported in
    ``collisions``.
    """
    if params.n_spins > max_spins:
        raise ValueError(f"enumeration of 2^{params.n_spins} states exceeds guard N <= {max_spins}")
    states = []
    for parent in all_parents(params.n_spins):
        try:
            sol = continue_in_g(params, parent, g_target, steps_hint, tol=tol)
            states.append(EnumeratedState(parent, sol))
        except XXCentralError as exc:
            log.warning("parent %s failed: %s", parent.label, exc)
            states.append(EnumeratedState(parent, None, f"{type(exc).__name__}: {exc}"))
    collisions = []
    ok = [(i, s.solution.r) for i, s in enumerate(states) if s.solution is not None]
    if ok:
        idx = [i for i, _ in ok]
        mat = np.array([r for _, r in ok])
        for a in range(len(idx)):
            dist = np.max(np.abs(mat[a + 1 :] - mat[a]), axis=1) if a + 1 < len(idx) else []
            for b in np.flatnonzero(np.asarray(dist) <= separation):
                collisions.append((idx[a], idx[a + 1 + int(b)]))
    return Enumeration(states, collisions)


def check_solution(coeffs: CoefficientSet, r: Sequence[float]) -> float:
    """Max-norm residual of the quadratic system at ``r``."""
    return float(np.max(np.abs(residual_and_jacobian(coeffs, np.asarray(r))[0])))
