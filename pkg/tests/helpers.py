"""Independent dense oracles used across the tests."""

import numpy as np


def dense_toeplitz(coeffs, n, d):
    """Block (i, k) = a_{i-k}, assembled entry by entry."""
    A = np.zeros((n * d, n * d), dtype=complex)
    for i in range(n):
        for k in range(n):
            m = coeffs.get(i - k)
            if m is not None:
                A[i * d:(i + 1) * d, k * d:(k + 1) * d] = m
    return A


def dense_circulant(coeffs, n, d):
    """Block (r, c) = sum of a_j over j = r - c (mod n)."""
    A = np.zeros((n * d, n * d), dtype=complex)
    for r in range(n):
        for c in range(n):
            for j, m in coeffs.items():
                if (j - (r - c)) % n == 0:
                    A[r * d:(r + 1) * d, c * d:(c + 1) * d] += m
    return A


def random_hermitian_coeffs(rng, d, degree, real=False):
    coeffs = {}
    a0 = rng.standard_normal((d, d)) + (0 if real else 1j * rng.standard_normal((d, d)))
    coeffs[0] = a0 + a0.conj().T
    for j in range(1, degree + 1):
        a = rng.standard_normal((d, d)) + (0 if real else 1j * rng.standard_normal((d, d)))
        coeffs[j] = a
        coeffs[-j] = a.conj().T
    return coeffs
