"""Exact spin-1 operator algebra, states, and unitary propagation primitives.

Basis order is fixed globally as (|+1>, |0>, |-1>); every matrix literal in
this package is written in that order.  All operators are plain complex
3x3 numpy arrays and all states are complex 3-vectors, so everything here
is an immutable value in practice: functions return fresh arrays and the
module-level constants are marked read-only.

Frequencies are angular (rad/s) throughout the package; conversion from
cyclic units happens once, at the configuration boundary.
"""

from __future__ import annotations

import numpy as np

from .errors import NonHermitianInput

__all__ = [
    "SX",
    "SY",
    "SZ",
    "SZ2",
    "KET_PLUS",
    "KET_ZERO",
    "KET_MINUS",
    "BRIGHT",
    "DARK",
    "spin_operators",
    "dressed_basis",
    "matrix_exponential",
    "is_hermitian",
    "is_unitary",
    "commutator",
]

_SQRT2 = np.sqrt(2.0)


def _frozen(a):
    out = np.asarray(a, dtype=complex)
    out.setflags(write=False)
    return out


# Standard (Condon-Shortley) spin-1 matrices in the (|+1>, |0>, |-1>) basis.
SX = _frozen([[0, 1, 0], [1, 0, 1], [0, 1, 0]]) / _SQRT2
SY = _frozen([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]]) / _SQRT2
SZ = _frozen(np.diag([1.0, 0.0, -1.0]))
SZ2 = _frozen(np.diag([1.0, 0.0, 1.0]))

# Bare basis kets.
KET_PLUS = _frozen([1, 0, 0])
KET_ZERO = _frozen([0, 1, 0])
KET_MINUS = _frozen([0, 0, 1])

# Symmetric / antisymmetric combinations of |+1> and |-1>.  The bright state
# is the one the microwave couples to |0>; the dark state is decoupled.
BRIGHT = _frozen([1, 0, 1]) / _SQRT2
DARK = _frozen([1, 0, -1]) / _SQRT2


def spin_operators():
    """Return (Sx, Sy, Sz) as fresh 3x3 arrays.

    Sz is diagonal with entries (+1, 0, -1) and the set satisfies the
    spin-1 algebra [Sx, Sy] = i Sz and Sx^2 + Sy^2 + Sz^2 = 2 I.
    """
    return SX.copy(), SY.copy(), SZ.copy()


def dressed_basis():
    """Return the dressed states (|+1>_d, |0>_d, |-1>_d).

    |+1>_d = (|+1> + |-1>)/sqrt(2), |0>_d = (|+1> - |-1>)/sqrt(2) and
    |-1>_d = |0>.  They are the eigenstates of the continuously driven
    spin in the doubly rotating frame and form an orthonormal basis.
    """
    return BRIGHT.copy(), DARK.copy(), KET_ZERO.copy()


def is_hermitian(m, rtol=1e-12):
    """Check H = H^dagger to within `rtol` relative to the matrix scale."""
    m = np.asarray(m)
    scale = max(1.0, float(np.abs(m).max()))
    return float(np.abs(m - m.conj().T).max()) <= rtol * scale


def is_unitary(m, atol=1e-9):
    """Check U^dagger U = I in max-norm."""
    m = np.asarray(m)
    return float(np.abs(m.conj().T @ m - np.eye(m.shape[0])).max()) <= atol


def commutator(a, b):
    return a @ b - b @ a


def matrix_exponential(h, t):
    """Return exp(-i H t) for Hermitian H.

    Computed by eigendecomposition of the 3x3 Hermitian matrix rather than
    a series expansion, so the result is unitary to floating-point
    accuracy regardless of ||H t||.

    Raises NonHermitianInput if H fails the Hermiticity check.
    """
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h):
        raise NonHermitianInput(
            "matrix_exponential requires a Hermitian generator; "
            f"max asymmetry {np.abs(h - h.conj().T).max():.3e}"
        )
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T
