"""Drive pulse shapes on the normalized time interval [0, 1].

A pulse of length ``T`` drives the chain with ``Omega(t) = g(t/T) / T``, so
the pulse area ``integral of Omega dt = omega(1)`` is independent of ``T``.
A profile carries ``g(s)`` together with its running integrals
``omega(s) = int_0^s g`` and ``g2_integral(s) = int_0^s g**2``; both vanish
at ``s = 0`` and are nondecreasing for nonnegative shapes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, interpolate

from .errors import ValidationError

BOUNDARY_ATOL = 1e-12
CUSTOM_BOUNDARY_ATOL = 1e-8
QUAD_ATOL = 1e-10
CLOSED_FORM_ATOL = 1e-10


@dataclass(frozen=True)
class PulseProfile:
    """A drive shape with closed-form or precomputed running integrals."""

    shape: str
    duration: float
    g: Callable
    omega: Callable
    g2_integral: Callable
    boundary_atol: float = BOUNDARY_ATOL

    def __post_init__(self):
        if self.duration <= 0:
            raise ValidationError("pulse duration must be positive")
        for s in (0.0, 1.0):
            edge = abs(float(self.g(s)))
            if edge > self.boundary_atol:
                raise ValidationError(
                    f"g({s}) = {edge:.3e} violates the vanishing-edge condition"
                )

    def omega_value(self, s):
        """Instantaneous drive strength Omega at normalized time s."""
        return float(self.g(s)) / self.duration


def sin_squared_pulse(T, amplitude=4.0 * np.pi):
    """Shape ``g(s) = amplitude * sin(pi s)**2`` with closed-form integrals."""
    a = float(amplitude)

    def g(s):
        return a * np.sin(np.pi * s) ** 2

    def omega(s):
        return a * (s / 2.0 - np.sin(2.0 * np.pi * s) / (4.0 * np.pi))

    def g2_integral(s):
        return a * a * (
            3.0 * s / 8.0
            - np.sin(2.0 * np.pi * s) / (4.0 * np.pi)
            + np.sin(4.0 * np.pi * s) / (32.0 * np.pi)
        )

    profile = PulseProfile(f"sin2(amplitude={a:g})", float(T), g, omega, g2_integral)
    _check_closed_forms(profile)
    return profile


def default_pulse(T):
    """The standard drive: amplitude ``4 pi``, area ``omega(1) = 2 pi``."""
    return sin_squared_pulse(T)


def custom_pulse(g, T, boundary_atol=CUSTOM_BOUNDARY_ATOL, grid_points=513):
    """Profile for an arbitrary shape, integrals by adaptive quadrature.

    ``g`` is either a callable on [0, 1] or an array of ``(s, g(s))``
    samples (in which case a monotone cubic interpolant of the samples is
    used as the shape).  The running integrals are accumulated per grid
    interval with ``scipy.integrate.quad`` and cached as monotone cubic
    interpolants on a dense grid.
    """
    if callable(g):
        g_fn = g
        shape = "custom"
    else:
        samples = np.atleast_2d(np.asarray(g, dtype=float))
        if samples.shape[0] == 2 and samples.shape[1] != 2:
            samples = samples.T
        if samples.ndim != 2 or samples.shape[1] != 2 or samples.shape[0] < 2:
            raise ValidationError("samples must form an (M, 2) array of (s, g)")
        base = interpolate.PchipInterpolator(samples[:, 0], samples[:, 1])
        g_fn = base
        shape = "custom-sampled"

    grid = np.linspace(0.0, 1.0, grid_points)
    omega_vals = _cumulative_quad(g_fn, grid)
    g2_vals = _cumulative_quad(lambda s: float(g_fn(s)) ** 2, grid)
    omega_interp = interpolate.PchipInterpolator(grid, omega_vals)
    g2_interp = interpolate.PchipInterpolator(grid, g2_vals)
    return PulseProfile(
        shape, float(T), g_fn, omega_interp, g2_interp, boundary_atol=boundary_atol
    )


def make_pulse(shape, T, amplitude=None):
    """Build a named pulse shape, as selected by experiment configs."""
    if shape == "sin2":
        if amplitude is None:
            return default_pulse(T)
        return sin_squared_pulse(T, amplitude)
    raise ValidationError(f"unknown pulse shape {shape!r}")


def _cumulative_quad(fn, grid):
    parts = np.zeros(len(grid))
    for i in range(1, len(grid)):
        val, _ = integrate.quad(
            fn, grid[i - 1], grid[i], epsabs=QUAD_ATOL / len(grid), epsrel=1e-12
        )
        parts[i] = parts[i - 1] + val
    return parts


def _check_closed_forms(profile):
    """Cross-check closed-form integrals against quadrature at construction."""
    for fn, target in (
        (profile.g, profile.omega),
        (lambda s: float(profile.g(s)) ** 2, profile.g2_integral),
    ):
        ref, _ = integrate.quad(fn, 0.0, 1.0, epsabs=1e-12, epsrel=1e-12)
        if abs(ref - float(target(1.0))) > CLOSED_FORM_ATOL:
            raise ValidationError(
                f"closed-form integral {float(target(1.0)):.12e} disagrees "
                f"with quadrature {ref:.12e}"
            )
