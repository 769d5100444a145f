"""Integrable parametrization of the XX central spin model.

The Hamiltonian

    H = B0 . S_0 + sum_k Gamma_k (S^x_0 S^x_k + S^y_0 S^y_k)

is obtained as a limit of the non-skew-symmetric elliptic Richardson-Gaudin
family with ``j_x = j_y = j_perp``.  Each bath coupling ``Gamma_k`` is encoded
by a free parameter ``eps_k``; the central spin sits at ``eps_0 = -j_z``
(shifted by a regulator ``delta`` when the limit is not taken exactly).

Everything here is dimensionless with spin-1/2 operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import (
    DuplicateCouplings,
    InvalidParameters,
    NonPositiveCoupling,
    UnsupportedShape,
    ZeroField,
)

#: Normalisation of the smallest reduced coupling; puts every eps_k in (0, 1].
MIN_REDUCED_COUPLING = np.sqrt(2.0)
DEFAULT_JITTER = 1e-6


class DistributionKind(str, Enum):
    SQRT_DECREASING = "sqrt_decreasing"
    INVERSE_SQUARE = "inverse_square"
    UNIFORM = "uniform"
    LINEAR_DECREASING = "linear_decreasing"
    CUSTOM = "custom"


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CouplingDistribution:
    """Bath couplings Gamma_1..Gamma_{N-1} (index 0 of ``values`` is k = 1)."""

    kind: DistributionKind
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", DistributionKind(self.kind))
        if values.ndim != 1 or values.size < 1:
            raise InvalidParameters("couplings must be a non-empty 1-d array")
        if not np.all(np.isfinite(values)):
            raise InvalidParameters("couplings must be finite")
        if np.any(values <= 0):
            raise NonPositiveCoupling(f"couplings must be > 0, got min {values.min()!r}")
        if np.unique(values).size != values.size:
            raise DuplicateCouplings(
                "couplings must be pairwise distinct (equal couplings make eps_k coincide)"
            )

    @classmethod
    def custom(cls, values: Sequence[float]) -> "CouplingDistribution":
        return cls(DistributionKind.CUSTOM, np.asarray(values, dtype=float))

    @property
    def n_spins(self) -> int:
        return self.values.size + 1

    @property
    def total(self) -> float:
        return float(self.values.sum())


def make_distribution(
    kind: str | DistributionKind,
    n_spins: int,
    total: float,
    jitter: float | None = None,
) -> CouplingDistribution:
    """Standard coupling shapes normalised to ``sum(Gamma_k) == total``.

    ``uniform`` couplings are singular for the parametrization, so they are
    only accepted with an explicit relative ``jitter`` that tilts them
    linearly across the bath.
    """
    try:
        kind = DistributionKind(kind)
    except ValueError:
        raise UnsupportedShape(f"unknown coupling distribution {kind!r}") from None
    if n_spins < 2:
        raise InvalidParameters(f"n_spins must be >= 2, got {n_spins}")
    if not total > 0:
        raise InvalidParameters(f"total coupling must be > 0, got {total!r}")

    k = np.arange(1, n_spins, dtype=float)
    if kind is DistributionKind.SQRT_DECREASING:
        shape = np.sqrt(n_spins - k)
    elif kind is DistributionKind.INVERSE_SQUARE:
        shape = 1.0 / k**2
    elif kind is DistributionKind.LINEAR_DECREASING:
        shape = n_spins - k
    elif kind is DistributionKind.UNIFORM:
        shape = np.ones_like(k)
        if jitter is not None and n_spins > 2:
            shape = shape * (1.0 - jitter * (k - k.mean()) / (k.size - 1))
    else:
        raise UnsupportedShape("custom distributions are built with CouplingDistribution.custom")

    return CouplingDistribution(kind, shape * (total / shape.sum()))


@dataclass(frozen=True)
class ModelParams:
    """Gauge-fixed integrable parameters for one XX central spin model.

    ``g`` is the Richardson-Gaudin coupling scale (physical couplings are
    ``Gamma_k = g * reduced_couplings[k]``), ``field`` is the applied field
    ``(B0x, B0y, B0z)`` on the central spin.
    """

    n_spins: int
    j_perp: float
    j_z: float
    epsilons: np.ndarray
    g: float
    field: np.ndarray
    delta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "epsilons", _frozen(self.epsilons))
        object.__setattr__(self, "field", _frozen(self.field))
        self.validate()

    def validate(self) -> None:
        eps = self.epsilons
        if self.n_spins < 2:
            raise InvalidParameters(f"n_spins must be >= 2, got {self.n_spins}")
        if eps.shape != (self.n_spins,):
            raise InvalidParameters(f"epsilons must have shape ({self.n_spins},)")
        if self.field.shape != (3,) or not np.all(np.isfinite(self.field)):
            raise InvalidParameters("field must be a finite 3-vector")
        if not (self.g >= 0 and np.isfinite(self.g)):
            raise InvalidParameters(f"g must be finite and >= 0, got {self.g!r}")
        if not self.delta >= 0:
            raise InvalidParameters(f"delta must be >= 0, got {self.delta!r}")
        if not self.j_perp > self.j_z:
            raise InvalidParameters("j_perp must exceed j_z")
        if eps[0] != -self.j_z + self.delta:
            raise InvalidParameters("epsilons[0] must equal -j_z + delta")
        bath = eps[1:]
        if np.any(bath + self.j_perp <= 0) or np.any(bath + self.j_z <= 0):
            raise InvalidParameters("eps_k + j_perp and eps_k + j_z must be > 0 for k >= 1")
        if np.unique(eps).size != eps.size:
            raise InvalidParameters("epsilons must be pairwise distinct")

    @property
    def reduced_couplings(self) -> np.ndarray:
        """Gamma_k / g for k = 1..N-1."""
        eps = self.epsilons[1:]
        return np.sqrt((self.j_perp - self.j_z) * (eps + self.j_perp) / (eps + self.j_z))

    @property
    def couplings(self) -> np.ndarray:
        """Physical couplings Gamma_k, k = 1..N-1, of the limiting Hamiltonian."""
        return self.g * self.reduced_couplings

    @property
    def generic_field(self) -> np.ndarray:
        """Field amplitudes (B^x, B^y, B^z) of the parent elliptic model."""
        s = np.sqrt(self.j_perp - self.j_z)
        bx, by, bz = self.field
        return np.array([bx * s, by * s, bz * np.sqrt(self.delta)])

    def with_g(self, g: float) -> "ModelParams":
        return replace(self, g=float(g))

    def with_delta(self, delta: float) -> "ModelParams":
        eps = np.array(self.epsilons)
        eps[0] = -self.j_z + delta
        return replace(self, epsilons=eps, delta=float(delta))


def build_model(
    couplings: CouplingDistribution,
    g: float = 1.0,
    field: Sequence[float] = (0.0, 0.0, 1.0),
    delta: float = 0.0,
) -> ModelParams:
    """Fix the gauge (j_z = 0, j_perp = 1) and encode ``g * couplings.values``.

    ``g`` scales the coupling shape, so the physical couplings of the returned
    model are ``g * couplings.values``.
    """
    if not g >= 0:
        raise InvalidParameters(f"g must be >= 0, got {g!r}")
    if not delta >= 0:
        raise InvalidParameters(f"delta must be >= 0, got {delta!r}")
    values = couplings.values
    scale = values.min() / MIN_REDUCED_COUPLING
    reduced = values / scale
    # closed-form inverse of Gamma~^2 = (eps + 1) / eps in the j_z = 0, j_perp = 1 gauge
    eps_bath = 1.0 / (reduced**2 - 1.0)
    eps_bath[np.argmin(values)] = 1.0
    epsilons = np.concatenate(([delta], eps_bath))
    return ModelParams(
        n_spins=couplings.n_spins,
        j_perp=1.0,
        j_z=0.0,
        epsilons=epsilons,
        g=float(g) * scale,
        field=np.asarray(field, dtype=float),
        delta=float(delta),
    )


def field_from_angle(norm: float, theta: float) -> np.ndarray:
    """Applied field with B0z = |B| cos(theta) and B0x = B0y = |B| sin(theta)/sqrt(2)."""
    inplane = norm * np.sin(theta) / np.sqrt(2.0)
    return np.array([inplane, inplane, norm * np.cos(theta)])


def rescaled_coupling(params: ModelParams) -> float:
    """g~ = (sum_k Gamma_k) / |B0|."""
    norm = float(np.linalg.norm(params.field))
    if norm == 0:
        raise ZeroField("rescaled coupling is undefined for a zero applied field")
    return float(params.couplings.sum()) / norm


@dataclass(frozen=True)
class CoefficientSet:
    """Coefficients of the quadratic system for one ModelParams.

    ``gamma[a, j, k]`` is Gamma^a_jk (a = x, y, z), ``c_matrix[j, k]`` is
    C_jk, ``local_fields[j]`` is (B^x_j, B^y_j, B^z_j) and
    ``constant_terms[j]`` is K_j.
    """

    gamma: np.ndarray
    c_matrix: np.ndarray
    local_fields: np.ndarray
    constant_terms: np.ndarray
    epsilons: np.ndarray = dc_field(repr=False)
    j_values: np.ndarray = dc_field(repr=False)
    delta: float = 0.0

    @property
    def n_spins(self) -> int:
        return self.c_matrix.shape[0]


def assemble_coefficients(params: ModelParams, dtype=np.float64) -> CoefficientSet:
    """Gamma^a_jk, C_jk, local fields and K_j for ``params``.

    Pass ``dtype=np.longdouble`` for the extended-precision copy used when
    polishing solutions at strong coupling.
    """
    n = params.n_spins
    eps = params.epsilons.astype(dtype)
    jp, jz, delta = (dtype(params.j_perp), dtype(params.j_z), dtype(params.delta))
    g = dtype(params.g)
    jv = np.array([jp, jp, jz], dtype=dtype)
    # shifted[a, j] = eps_j + j_a; shifted[2, 0] is exactly delta
    shifted = eps[None, :] + jv[:, None]
    shifted[:, 0] = [jp - jz + delta, jp - jz + delta, delta]

    diff = eps[None, :] - eps[:, None]  # eps_k - eps_j
    np.fill_diagonal(diff, 1)
    off = ~np.eye(n, dtype=bool)

    gamma = np.zeros((3, n, n), dtype=dtype)
    for a in range(3):
        others = np.prod(np.delete(shifted, a, axis=0), axis=0)
        gamma[a] = g * np.sqrt(np.outer(shifted[a], others)) / diff * off

    c_matrix = -g * np.sqrt(np.prod(shifted, axis=0))[None, :] / diff * off

    field = params.field.astype(dtype)
    root_perp = np.sqrt(jp - jz)
    local = np.zeros((n, 3), dtype=dtype)
    local[:, 0] = field[0] * root_perp / np.sqrt(shifted[0])
    local[:, 1] = field[1] * root_perp / np.sqrt(shifted[1])
    local[1:, 2] = field[2] * np.sqrt(delta) / np.sqrt(shifted[2, 1:])
    local[0, 2] = field[2]

    constant = (gamma**2).sum(axis=(0, 2)) / 16 + (local**2).sum(axis=1) / 4

    for arr in (gamma, c_matrix, local, constant, eps, jv):
        arr.setflags(write=False)
    return CoefficientSet(
        gamma=gamma,
        c_matrix=c_matrix,
        local_fields=local,
        constant_terms=constant,
        epsilons=eps,
        j_values=jv,
        delta=params.delta,
    )
