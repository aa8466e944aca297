"""The driven Ising chain with local dephasing.

A chain of ``N`` spin-1/2 sites with longitudinal field ``delta``, transverse
drive of instantaneous strength ``omega_value``, power-law couplings
``v0 * |k - m|**-alpha`` between excited sites (open boundary, no wraparound),
and dephasing jump operators ``sqrt(gamma) * n_k``.  All rates and fields are
expressed in units of the dephasing rate.

Basis convention, fixed here and used everywhere: basis state index ``i``
encodes the classical configuration with site ``k`` stored in bit ``k - 1``,
so site 1 is the least significant bit.  ``sigma_z = diag(-1, +1)`` so that
``n = (1 + sigma_z) / 2`` projects onto the excited state ``|1>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import linalg
from .errors import CapacityError, ValidationError

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
# sigma_y is fixed by sigma_x @ sigma_y = 1j * sigma_z under this sigma_z.
SIGMA_Y = np.array([[0.0, 1.0j], [-1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)
NUMBER_2 = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)

PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}

MAX_SITES = 10

MIXTURE_ATOL = 1e-12


def site_operator(n_sites, site, op2):
    """Embed a 2x2 operator at one site of the chain.

    Site 1 occupies the least significant bit, so its factor goes last in
    the Kronecker chain.
    """
    if not 1 <= site <= n_sites:
        raise IndexError(f"site {site} outside 1..{n_sites}")
    return linalg.kron_chain(
        op2 if k == site else IDENTITY_2 for k in range(n_sites, 0, -1)
    )


def pauli(n_sites, site, axis):
    """Pauli operator sigma^axis acting on one site."""
    if axis not in PAULI:
        raise KeyError(f"axis must be one of x, y, z, got {axis!r}")
    return site_operator(n_sites, site, PAULI[axis])


def number_op(n_sites, site):
    """Projector onto the excited state of one site."""
    return site_operator(n_sites, site, NUMBER_2)


def total_pauli(n_sites, axis):
    """Sum of one Pauli axis over all sites."""
    out = np.zeros((1 << n_sites, 1 << n_sites), dtype=complex)
    for k in range(1, n_sites + 1):
        out += pauli(n_sites, k, axis)
    return out


@dataclass(frozen=True)
class SpinChainModel:
    """Static chain parameters. Immutable and safe to share across workers."""

    n_sites: int
    delta: float = 0.0
    v0: float = 0.0
    alpha: float = 3.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValidationError("n_sites must be at least 1")
        if self.n_sites > MAX_SITES:
            raise CapacityError(
                f"n_sites {self.n_sites} exceeds the dense-state cap {MAX_SITES}"
            )
        if self.gamma <= 0:
            # Zero dephasing removes the spectral gap the adiabatic
            # construction divides by, so it is rejected outright.
            raise ValidationError("gamma must be positive")
        if self.alpha <= 0:
            raise ValidationError("alpha must be positive")

    @property
    def dim(self):
        return 1 << self.n_sites

    @cached_property
    def interactions(self):
        """Coupling matrix with entries v0 * |k - m|**-alpha and zero diagonal."""
        n = self.n_sites
        dist = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :]).astype(float)
        with np.errstate(divide="ignore"):
            v = self.v0 * dist**-self.alpha
        np.fill_diagonal(v, 0.0)
        return v

    @cached_property
    def bit_table(self):
        """Array of shape (2^N, N): bit_table[i, k-1] = occupation of site k."""
        idx = np.arange(self.dim)
        return (idx[:, None] >> np.arange(self.n_sites)[None, :]) & 1

    @cached_property
    def diagonal_energies(self):
        """Drive-free energies of all classical configurations.

        Entry ``i`` equals ``delta * sum_k p_k + (1/2) * sum_km V_km p_k p_m``
        for the configuration encoded by ``i``.
        """
        bits = self.bit_table.astype(float)
        pair = 0.5 * np.einsum("ik,km,im->i", bits, self.interactions, bits)
        return self.delta * bits.sum(axis=1) + pair


def config_index(bits):
    """Integer encoding of a configuration tuple (site 1 least significant)."""
    check_config(bits)
    return sum(b << k for k, b in enumerate(bits))


def index_config(i, n_sites):
    """Configuration tuple encoded by the integer ``i``."""
    if not 0 <= i < (1 << n_sites):
        raise ValueError(f"index {i} outside configuration space of {n_sites} sites")
    return tuple((i >> k) & 1 for k in range(n_sites))


def all_configs(n_sites):
    """All configurations in index order."""
    return [index_config(i, n_sites) for i in range(1 << n_sites)]


def check_config(bits):
    if len(bits) < 1 or any(b not in (0, 1) for b in bits):
        raise ValidationError(f"configuration {bits!r} is not a 0/1 tuple")


def config_label(bits):
    """Bitstring label with site 1 written first."""
    return "".join(str(b) for b in bits)


@dataclass(frozen=True)
class ClassicalMixture:
    """Probability weights over classical configurations."""

    weights: dict

    def __post_init__(self):
        if not self.weights:
            raise ValidationError("mixture needs at least one configuration")
        lengths = {len(p) for p in self.weights}
        if len(lengths) != 1:
            raise ValidationError("mixture mixes configuration lengths")
        for p, a in self.weights.items():
            check_config(p)
            if a < 0:
                raise ValidationError(f"negative weight {a} for {p}")
        total = sum(self.weights.values())
        if abs(total - 1.0) > MIXTURE_ATOL:
            raise ValidationError(f"mixture weights sum to {total}, not 1")

    @property
    def n_sites(self):
        return len(next(iter(self.weights)))


def mixture_to_density(mix):
    """Diagonal density matrix carrying the mixture weights."""
    dim = 1 << mix.n_sites
    rho = np.zeros((dim, dim), dtype=complex)
    for p, a in mix.weights.items():
        rho[config_index(p), config_index(p)] = a
    return rho


def hamiltonian(model, omega_value):
    """Chain Hamiltonian at a fixed drive strength.

    ``sum_k [delta * n_k + omega_value * sigma_k^x]`` plus half the doubly
    counted symmetric interaction sum; diagonal part equals
    :attr:`SpinChainModel.diagonal_energies`.
    """
    h = np.diag(model.diagonal_energies.astype(complex))
    if omega_value != 0.0:
        h = h + omega_value * total_pauli(model.n_sites, "x")
    return h


def jump_ops(model):
    """Dephasing jump operators sqrt(gamma) * n_k, one per site."""
    root = np.sqrt(model.gamma)
    return [root * number_op(model.n_sites, k) for k in range(1, model.n_sites + 1)]
