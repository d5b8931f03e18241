"""Coulomb and exchange matrices and the Hartree-Fock energy functional."""

from __future__ import annotations

import numpy as np


def coulomb(V: np.ndarray, D: np.ndarray) -> np.ndarray:
    """``J(D)[k, l] = sum_{n x} V[l, x, k, n] D[n, x]``."""
    return np.einsum("lxkn,nx->kl", V, D, optimize=True)


def exchange(V: np.ndarray, D: np.ndarray) -> np.ndarray:
    """``K(D)[k, l] = sum_{n x} V[k, x, n, l] D[n, x]``."""
    return np.einsum("kxnl,nx->kl", V, D, optimize=True)


def mean_field_potential(V: np.ndarray, D: np.ndarray) -> np.ndarray:
    return coulomb(V, D) - exchange(V, D)


def fock_matrix(h, V, alpha, D) -> np.ndarray:
    return h + alpha * mean_field_potential(V, D)


def hf_energy(h, V, alpha, D) -> float:
    G = mean_field_potential(V, D)
    return float(np.sum(h * D) + 0.5 * alpha * np.sum(G * D))


def hf_energy_and_fock(h, V, alpha, D) -> tuple[float, np.ndarray]:
    """Energy of the Slater determinant with density ``D`` and its Fock matrix."""
    G = mean_field_potential(V, D)
    return float(np.sum(h * D) + 0.5 * alpha * np.sum(G * D)), h + alpha * G
