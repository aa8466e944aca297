"""Scalar quantities extracted from chain states.

Entropies use the natural logarithm; the choice is recorded in experiment
metadata so downstream plots are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isfinite

import numpy as np

from . import model as model_mod
from .errors import DomainError, ShapeError, ValidationError

ENTROPY_CLAMP = 1e-8
REALITY_ATOL = 1e-12


@dataclass(frozen=True)
class ObservableRecord:
    """One measured value tagged with its time coordinates."""

    label: str
    value: float
    s_time: float = 0.0
    pulse_index: int = 0

    def __post_init__(self):
        if not isfinite(self.value):
            raise ValidationError(f"observable {self.label} is not finite")


def _n_sites_of(rho):
    n = int(np.log2(rho.shape[0]))
    if rho.shape != (1 << n, 1 << n):
        raise ShapeError(f"state shape {rho.shape} is not a spin-chain dimension")
    return n


def populations(rho):
    """Diagonal weights keyed by classical configuration."""
    rho = np.asarray(rho)
    n = _n_sites_of(rho)
    diag = np.diag(rho).real
    return {
        model_mod.index_config(i, n): float(diag[i]) for i in range(rho.shape[0])
    }


def coherence_expect(rho, axis):
    """Expectation of the summed single-site coherence operator."""
    if axis not in ("x", "y"):
        raise DomainError(f"axis must be x or y, got {axis!r}")
    rho = np.asarray(rho)
    n = _n_sites_of(rho)
    val = np.trace(rho @ model_mod.total_pauli(n, axis))
    if abs(val.imag) > REALITY_ATOL * max(1.0, abs(val.real)):
        raise DomainError(f"coherence expectation came out complex: {val}")
    return float(val.real)


def trace_distance(sigma, mu):
    """Half the sum of singular values of the difference."""
    sigma = np.asarray(sigma)
    mu = np.asarray(mu)
    if sigma.shape != mu.shape:
        raise ShapeError(f"shape mismatch {sigma.shape} vs {mu.shape}")
    return 0.5 * float(np.linalg.svd(sigma - mu, compute_uv=False).sum())


def _clamped_spectrum(rho):
    vals = np.linalg.eigvalsh((rho + rho.conj().T) / 2.0)
    lowest = vals.min()
    if lowest < -ENTROPY_CLAMP:
        raise DomainError(
            f"state eigenvalue {lowest:.3e} is too negative for an entropy"
        )
    return np.clip(vals, 0.0, None)


def von_neumann_entropy(rho):
    """Entropy -sum(p ln p) of the clamped spectrum, natural log."""
    vals = _clamped_spectrum(np.asarray(rho))
    pos = vals[vals > 0.0]
    return float(-(pos * np.log(pos)).sum())


def entropy_of_coherence(rho):
    """Entropy gained by removing off-diagonal content in the classical basis."""
    rho = np.asarray(rho)
    diag = np.diag(np.diag(rho))
    return von_neumann_entropy(diag) - von_neumann_entropy(rho)


def excitation_density(rho):
    """Mean occupation per site, in [0, 1]."""
    rho = np.asarray(rho)
    n = _n_sites_of(rho)
    diag = np.diag(rho).real
    counts = np.array([bin(i).count("1") for i in range(rho.shape[0])])
    return float((diag * counts).sum() / n)
