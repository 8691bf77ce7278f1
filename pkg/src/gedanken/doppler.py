"""Photon reflected off a moving massive target, in one dimension with hbar = c = 1.

Conservation of energy and momentum for back-reflection::

    w + m v**2 / 2 = w' + m v'**2 / 2
    m v - w        = m v' + w'

Eliminating ``v'`` gives a quadratic in ``s = w + w'``::

    s**2 + 2 m (1 - v) s - 4 m w = 0

whose positive root fixes the outgoing frequency. The shift ``w - w'``
expands to ``2 w**2 / m - 2 v w``: a Compton recoil term plus the Doppler term
that survives when ``m`` is very large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

MAX_SPEED = 0.1


class CollisionError(ValueError):
    """Inputs outside the non-relativistic validity window."""


@dataclass(frozen=True)
class CollisionInput:
    omega_in: float
    v: float
    mass: float

    def __post_init__(self):
        for name in ("omega_in", "v", "mass"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise CollisionError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.omega_in <= 0:
            raise CollisionError(f"omega_in must be positive, got {self.omega_in}")
        if self.mass <= 0:
            raise CollisionError(f"mass must be positive, got {self.mass}")
        if abs(self.v) >= MAX_SPEED:
            raise CollisionError(f"|v| must be below {MAX_SPEED} (non-relativistic window), got {self.v}")


@dataclass(frozen=True)
class CollisionResult:
    omega_out: float
    v_out: float
    shift_exact: float
    shift_expansion: float
    shift_doppler: float

    def residuals(self, inp: CollisionInput) -> tuple[float, float]:
        """Relative energy and momentum conservation residuals."""
        m = inp.mass
        e_in = inp.omega_in + 0.5 * m * inp.v**2
        e_out = self.omega_out + 0.5 * m * self.v_out**2
        p_in = m * inp.v - inp.omega_in
        p_out = m * self.v_out + self.omega_out
        energy = abs(e_in - e_out) / max(abs(e_in), abs(e_out))
        scale = max(abs(m * inp.v), abs(m * self.v_out), inp.omega_in, self.omega_out)
        momentum = abs(p_in - p_out) / scale
        return energy, momentum


def _shift(omega: float, v: float, mass: float) -> float:
    # w - w' = 2w - s with s = 4w / D, D = (1 - v) + sqrt((1 - v)**2 + 4w/m);
    # D - 2 is rewritten to avoid cancelling two numbers close to 2.
    q = (1.0 - v) ** 2 + 4.0 * omega / mass
    root = math.sqrt(q)
    d_minus_2 = -v + (v * v - 2.0 * v + 4.0 * omega / mass) / (root + 1.0)
    return 2.0 * omega * d_minus_2 / (2.0 + d_minus_2)


def shift_expansion(inp: CollisionInput) -> float:
    """Leading-order shift ``2 w**2 / m - 2 v w``."""
    return 2.0 * inp.omega_in**2 / inp.mass - 2.0 * inp.v * inp.omega_in


def shift_doppler(inp: CollisionInput) -> float:
    """Infinite-mass limit of the shift, ``-2 v w``."""
    return -2.0 * inp.v * inp.omega_in


def collide_exact(inp: CollisionInput) -> CollisionResult:
    shift = _shift(inp.omega_in, inp.v, inp.mass)
    omega_out = inp.omega_in - shift
    if not omega_out > 0:
        raise CollisionError(f"no positive-frequency solution for {inp}")
    s = inp.omega_in + omega_out
    v_out = inp.v - s / inp.mass
    return CollisionResult(
        omega_out=omega_out,
        v_out=v_out,
        shift_exact=shift,
        shift_expansion=shift_expansion(inp),
        shift_doppler=shift_doppler(inp),
    )


def infer_velocity(omega_in: float, omega_out: float, mass: float) -> float:
    """Target velocity before the collision from the two photon frequencies.

    Exact inversion of the conservation pair: ``v = (w' - w)/s + s/(2m)``.
    """
    if not (omega_in > 0 and omega_out > 0 and mass > 0):
        raise CollisionError(
            f"frequencies and mass must be positive, got omega_in={omega_in}, omega_out={omega_out}, mass={mass}"
        )
    s = omega_in + omega_out
    v = (omega_out - omega_in) / s + s / (2.0 * mass)
    if not abs(v) < MAX_SPEED:
        raise CollisionError(
            f"inferred speed {v:.6g} outside the non-relativistic window; inputs are inconsistent"
        )
    return v


def readout_momentum(mass: float, omega_in: float, omega_out: float) -> float:
    return mass * infer_velocity(omega_in, omega_out, mass)
