"""Complex / symplectic structure on R^(2n) in block layout.

A point of C^n is stored as (Re z_1..Re z_n, Im z_1..Im z_n).  The standard
complex structure J is multiplication by i, the symplectic form is
omega(a, b) = <J a, b>, and the standard basis satisfies E_{alpha+n} = J E_alpha.
"""

from __future__ import annotations

import numpy as np


def block_from_complex(z: np.ndarray) -> np.ndarray:
    """(N, n) complex -> (N, 2n) real block layout."""
    return np.concatenate([z.real, z.imag], axis=-1)


def complex_from_block(v: np.ndarray) -> np.ndarray:
    n = v.shape[-1] // 2
    return v[..., :n] + 1j * v[..., n:]


def J_apply(v: np.ndarray) -> np.ndarray:
    """Multiplication by i: (a, b) -> (-b, a).  Acts on the last axis."""
    n = v.shape[-1] // 2
    return np.concatenate([-v[..., n:], v[..., :n]], axis=-1)


def complex_scale(gamma, v: np.ndarray) -> np.ndarray:
    """Multiply block vectors by complex scalars (broadcast over leading axes)."""
    gamma = np.asarray(gamma)
    a = gamma.real[..., None]
    b = gamma.imag[..., None]
    n = v.shape[-1] // 2
    re, im = v[..., :n], v[..., n:]
    return np.concatenate([a * re - b * im, b * re + a * im], axis=-1)


def omega(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Symplectic form omega(a, b) = <J a, b> on the last axis."""
    return np.einsum("...c,...c->...", J_apply(a), b)


def hermitian(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Standard Hermitian product <<a, b>> = sum a_i conj(b_i) in block form."""
    za = complex_from_block(a)
    zb = complex_from_block(b)
    return np.einsum("...c,...c->...", za, np.conj(zb))
