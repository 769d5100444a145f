"""Brute-force exact diagonalization reference for small systems.

Operators are dense complex matrices built by Kronecker products.  The
charges are written out directly from their closed forms here (not through
:mod:`xxcentral.model`) so the oracle stays independent of the solver path.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import InvalidDelta, MatchFailure, TooLarge
from .model import ModelParams
from .solver import ChargeSolution

MAX_ED_SPINS = 14
DEGENERACY_GAP = 1e-10

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex) / 2,
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex) / 2,
    "z": np.array([[1, 0], [0, -1]], dtype=complex) / 2,
}
AXES = ("x", "y", "z")


class ChargeForm(str, Enum):
    GENERIC_RG = "generic_rg"
    XX_LIMIT = "xx_limit"


@dataclass(frozen=True)
class DenseOperator:
    matrix: np.ndarray
    n_spins: int

    def __matmul__(self, other: "DenseOperator") -> "DenseOperator":
        return DenseOperator(self.matrix @ other.matrix, self.n_spins)

    def __add__(self, other: "DenseOperator") -> "DenseOperator":
        return DenseOperator(self.matrix + other.matrix, self.n_spins)

    def __sub__(self, other: "DenseOperator") -> "DenseOperator":
        return DenseOperator(self.matrix - other.matrix, self.n_spins)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix))


def _guard(n_spins: int) -> None:
    if n_spins > MAX_ED_SPINS:
        raise TooLarge(f"ED is limited to N <= {MAX_ED_SPINS} spins, got {n_spins}")


def _site_op(n_spins: int, site: int, axis: str) -> np.ndarray:
    left = np.eye(2**site)
    right = np.eye(2 ** (n_spins - site - 1))
    return np.kron(np.kron(left, _PAULI[axis]), right)


def spin_operator(n_spins: int, site: int, axis: str) -> DenseOperator:
    """S^axis on ``site`` with identities elsewhere (site 0 is the leftmost factor)."""
    _guard(n_spins)
    if not 0 <= site < n_spins:
        raise IndexError(f"site {site} out of range for {n_spins} spins")
    if axis not in _PAULI:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    return DenseOperator(_site_op(n_spins, site, axis), n_spins)


class SpinBasis:
    """Cache of all S^a_j for one system size."""

    def __init__(self, n_spins: int):
        _guard(n_spins)
        self.n_spins = n_spins
        self.ops = [[_site_op(n_spins, j, a) for a in AXES] for j in range(n_spins)]

    def __getitem__(self, key: tuple[int, int]) -> np.ndarray:
        j, a = key
        return self.ops[j][a]


def hamiltonian_matrix(
    field: Sequence[float], couplings: Sequence[float], basis: SpinBasis | None = None
) -> np.ndarray:
    couplings = np.asarray(couplings, dtype=float)
    n = couplings.size + 1
    s = basis or SpinBasis(n)
    h = sum(field[a] * s[0, a] for a in range(3))
    for k, gk in enumerate(couplings, start=1):
        h = h + gk * (s[0, 0] @ s[k, 0] + s[0, 1] @ s[k, 1])
    return h


def build_hamiltonian(params: ModelParams) -> DenseOperator:
    """H = B0 . S_0 + sum_k Gamma_k (S^x_0 S^x_k + S^y_0 S^y_k)."""
    _guard(params.n_spins)
    return DenseOperator(hamiltonian_matrix(params.field, params.couplings), params.n_spins)


def generic_rg_charges(
    epsilons: Sequence[float],
    j_values: Sequence[float],
    g: float,
    fields: Sequence[float],
    basis: SpinBasis | None = None,
) -> list[np.ndarray]:
    """Non-skew-symmetric elliptic RG charges for arbitrary (j_x, j_y, j_z).

    ``fields`` are the amplitudes (B^x, B^y, B^z); the local field on spin j
    along a is B^a / sqrt(eps_j + j_a).
    """
    eps = np.asarray(epsilons, dtype=float)
    jv = np.asarray(j_values, dtype=float)
    n = eps.size
    s = basis or SpinBasis(n)
    charges = []
    for j in range(n):
        r = sum(fields[a] / np.sqrt(eps[j] + jv[a]) * s[j, a] for a in range(3))
        for k in range(n):
            if k == j:
                continue
            for a in range(3):
                b, c = (x for x in range(3) if x != a)
                coupling = (
                    g
                    * np.sqrt((eps[j] + jv[a]) * (eps[k] + jv[b]) * (eps[k] + jv[c]))
                    / (eps[k] - eps[j])
                )
                r = r + coupling * (s[j, a] @ s[k, a])
        charges.append(r)
    return charges


def xx_limit_charges(params: ModelParams, basis: SpinBasis | None = None) -> list[np.ndarray]:
    """Charges of the XX model at delta = 0; R_0 is the Hamiltonian itself."""
    if params.delta != 0:
        raise InvalidDelta("xx_limit charges are defined at delta = 0")
    n = params.n_spins
    s = basis or SpinBasis(n)
    jp, jz = params.j_perp, params.j_z
    jv = (jp, jp, jz)
    eps = params.epsilons
    bx = params.field[0] * np.sqrt(jp - jz)
    by = params.field[1] * np.sqrt(jp - jz)
    charges = [hamiltonian_matrix(params.field, params.couplings, s)]
    for j in range(1, n):
        r = bx / np.sqrt(eps[j] + jp) * s[j, 0] + by / np.sqrt(eps[j] + jp) * s[j, 1]
        for k in range(1, n):
            if k == j:
                continue
            for a in range(3):
                b, c = (x for x in range(3) if x != a)
                coupling = (
                    params.g
                    * np.sqrt((eps[j] + jv[a]) * (eps[k] + jv[b]) * (eps[k] + jv[c]))
                    / (eps[k] - eps[j])
                )
                r = r + coupling * (s[j, a] @ s[k, a])
        central = params.g * np.sqrt((jp - jz) * (jp - jz) * (eps[j] + jz)) / (eps[j] + jz)
        r = r - central * (s[0, 2] @ s[j, 2])
        charges.append(r)
    return charges


def build_charge(params: ModelParams, j: int, form: str | ChargeForm) -> DenseOperator:
    _guard(params.n_spins)
    form = ChargeForm(form)
    if form is ChargeForm.GENERIC_RG:
        if params.delta <= 0:
            raise InvalidDelta("generic_rg charges need delta > 0")
        mats = generic_rg_charges(
            params.epsilons,
            (params.j_perp, params.j_perp, params.j_z),
            params.g,
            params.generic_field,
        )
    else:
        mats = xx_limit_charges(params)
    return DenseOperator(mats[j], params.n_spins)


@dataclass(frozen=True)
class EdState:
    energy: float
    charge_tuple: np.ndarray
    expectations: np.ndarray
    vector_index: int
    degenerate: bool = False


def _degenerate_blocks(values: np.ndarray, gap: float) -> list[np.ndarray]:
    blocks, start = [], 0
    for i in range(1, values.size + 1):
        if i == values.size or values[i] - values[i - 1] > gap:
            blocks.append(np.arange(start, i))
            start = i
    return blocks


def ed_analysis(params: ModelParams, gap: float = DEGENERACY_GAP) -> list[EdState]:
    """Diagonalize H; per eigenvector return energy, charge tuple and <S^a_j>.

    Inside degenerate energy blocks the eigenbasis is fixed by diagonalizing a
    generic linear combination of the charges restricted to the block.
    """
    _guard(params.n_spins)
    n = params.n_spins
    basis = SpinBasis(n)
    charges = xx_limit_charges(params.with_delta(0.0), basis)
    energies, vecs = np.linalg.eigh(charges[0])
    flags = np.zeros(energies.size, dtype=bool)
    weights = np.random.default_rng(12345).uniform(0.5, 1.5, n - 1)
    mix = sum(w * c for w, c in zip(weights, charges[1:]))
    for block in _degenerate_blocks(energies, gap):
        if block.size < 2:
            continue
        sub = vecs[:, block]
        _, rot = np.linalg.eigh(sub.conj().T @ mix @ sub)
        vecs[:, block] = sub @ rot
        flags[block] = True

    states = []
    for idx in range(energies.size):
        v = vecs[:, idx]
        tup = np.array([np.real(np.vdot(v, c @ v)) for c in charges])
        exps = np.array([[np.real(np.vdot(v, basis[j, a] @ v)) for a in range(3)] for j in range(n)])
        states.append(EdState(float(tup[0]), tup, exps, idx, bool(flags[idx])))
    return states


def ed_expectations_at(params: ModelParams, r: Sequence[float]) -> np.ndarray:
    """<S^a_j> in the ED eigenstate whose charge tuple is closest to ``r``."""
    states = ed_analysis(params)
    r = np.asarray(r)
    best = min(states, key=lambda s: np.max(np.abs(s.charge_tuple - r)))
    return best.expectations


@dataclass(frozen=True)
class MatchReport:
    pairs: list[tuple[int, int, float]]  # (ed index, solution index, distance)
    unmatched: list[int]
    max_distance: float

    @property
    def ok(self) -> bool:
        return not self.unmatched


def match_solutions(
    ed: Sequence[EdState], solved: Sequence[ChargeSolution], tol: float = 1e-7
) -> MatchReport:
    """Greedy nearest-tuple bijection (max-norm) between ED and solver tuples."""
    if len(ed) != len(solved):
        raise ValueError(f"count mismatch: {len(ed)} ED states vs {len(solved)} solutions")
    a = np.array([s.charge_tuple for s in ed])
    b = np.array([s.r for s in solved])
    dist = np.max(np.abs(a[:, None, :] - b[None, :, :]), axis=2)
    order = np.argsort(dist, axis=None, kind="stable")
    used_a, used_b = set(), set()
    pairs = []
    for flat in order:
        i, j = divmod(int(flat), len(solved))
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        pairs.append((i, j, float(dist[i, j])))
        if len(pairs) == len(ed):
            break
    pairs.sort()
    unmatched = [j for i, j, d in pairs if d > tol]
    max_d = max((d for *_, d in pairs), default=0.0)
    report = MatchReport(pairs, unmatched, max_d)
    if unmatched:
        raise MatchFailure(
            f"{len(unmatched)} solver tuples farther than {tol:g} from any ED tuple "
            f"(max distance {max_d:.3e}); outliers {unmatched}",
            unmatched,
        )
    return report
