"""Quantum feature maps and fidelity kernel matrices.

Two map variants:

- angle: each of the L repetitions re-uploads the data as RY(pi*x) on one
  qubit per feature, followed by a seeded-random RY/RZ rotation block with
  a CZ entangling ring; L = 0 is the bare data layer.
- amplitude: the normalized feature vector becomes the state amplitudes
  (zero-padded to 2^n), followed by L seeded-random rotation/entangler
  layers that do not depend on the data.

Kernel entries are |<psi_i|psi_j>|^(2*beta); beta > 1 (amplitude only)
is an elementwise power of the beta = 1 fidelity matrix, so one
statevector pass serves every beta.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import qsim


@dataclass(frozen=True)
class FeatureMapSpec:
    variant: str  # "angle" | "amplitude"
    n_qubits: int
    layers: int
    beta: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.variant not in ("angle", "amplitude"):
            raise ValueError(f"unknown feature map variant {self.variant!r}")
        if not 1 <= self.n_qubits <= qsim.MAX_QUBITS:
            raise ValueError(f"qubit count {self.n_qubits} outside 1..{qsim.MAX_QUBITS}")
        if self.layers < 0:
            raise ValueError("layer count must be >= 0")
        if self.beta not in (1, 2, 3):
            raise ValueError("beta must be 1, 2 or 3")
        if self.variant == "angle" and self.beta != 1:
            raise ValueError("beta exponent applies to the amplitude variant only")

    def check_dimension(self, d: int) -> None:
        if self.variant == "angle":
            if d != self.n_qubits:
                raise ValueError(f"angle map needs one qubit per feature ({d} != {self.n_qubits})")
        elif d > 2**self.n_qubits:
            raise ValueError(f"{d} features exceed 2^{self.n_qubits} amplitudes")


def _layer_angles(spec: FeatureMapSpec) -> np.ndarray:
    """Fixed rotation angles of the post-unitary stack, shape (layers, 2, n)."""
    rng = np.random.default_rng(spec.seed)
    return rng.uniform(-np.pi, np.pi, size=(spec.layers, 2, spec.n_qubits))


def _rotation_block(state: np.ndarray, angles: np.ndarray) -> np.ndarray:
    n = angles.shape[1]
    for q in range(n):
        state = qsim.apply_ry(state, q, angles[0, q])
    for q in range(n):
        state = qsim.apply_rz(state, q, angles[1, q])
    return qsim.apply_cz_ring(state)


def feature_map_states(spec: FeatureMapSpec, X: np.ndarray) -> np.ndarray:
    """Embed a batch of samples; returns statevectors of shape (N, 2^n)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    spec.check_dimension(X.shape[1])
    rot = _layer_angles(spec)
    if spec.variant == "angle":
        state = qsim.angle_encode(X)
        for layer in range(spec.layers):
            if layer > 0:  # first data layer is the encoding itself
                for q in range(spec.n_qubits):
                    state = qsim.apply_ry(state, q, np.pi * X[:, q])
            state = _rotation_block(state, rot[layer])
        return state
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("cannot amplitude-encode a zero vector")
    state = np.zeros((X.shape[0], 2**spec.n_qubits), dtype=np.complex128)
    state[:, : X.shape[1]] = X / norms
    for layer in range(spec.layers):
        state = _rotation_block(state, rot[layer])
    return state


def feature_map_state(spec: FeatureMapSpec, x: np.ndarray) -> np.ndarray:
    """Single-sample embedding Phi(x)."""
    return feature_map_states(spec, np.asarray(x, dtype=float)[None, :])[0]


def kernel_entry(spec: FeatureMapSpec, x_i, x_j) -> float:
    """|<Phi(x_i)|Phi(x_j)>|^(2*beta), in [0, 1]."""
    psi_i = feature_map_state(spec, x_i)
    psi_j = feature_map_state(spec, x_j)
    fid = abs(qsim.overlap(psi_i, psi_j)) ** 2
    return float(fid**spec.beta)


@dataclass(frozen=True)
class KernelMatrix:
    """Symmetric Gram matrix of fidelity kernel entries."""

    entries: np.ndarray
    row_ids: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", np.asarray(self.entries, dtype=float))
        k = self.entries
        if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape[0] != len(self.row_ids):
            raise ValueError("kernel matrix must be square and match row_ids")
        if not np.array_equal(k, k.T):
            raise ValueError("kernel matrix must be exactly symmetric")
        if not np.allclose(np.diag(k), 1.0, atol=1e-9):
            raise ValueError("kernel diagonal must equal 1")

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])


def _fidelity_gram(states_a: np.ndarray, states_b: np.ndarray) -> np.ndarray:
    return np.abs(states_a @ states_b.conj().T) ** 2


def kernel_matrix(spec: FeatureMapSpec, X: np.ndarray) -> KernelMatrix:
    """Gram matrix over the sample set.

    Statevectors are cached once (N vectors), each unordered pair is
    computed once, and the lower triangle mirrors the upper exactly.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("empty sample set")
    states = feature_map_states(spec, X)
    fid = _fidelity_gram(states, states)
    upper = np.triu(fid)
    sym = upper + np.triu(fid, 1).T
    return KernelMatrix(entries=sym**spec.beta, row_ids=tuple(range(X.shape[0])))


def kernel_cross(spec: FeatureMapSpec, X_train: np.ndarray, X_test: np.ndarray) -> np.ndarray:
    """Rectangular kernel block, shape (len(X_test), len(X_train))."""
    X_train = np.atleast_2d(np.asarray(X_train, dtype=float))
    X_test = np.atleast_2d(np.asarray(X_test, dtype=float))
    if X_train.shape[0] == 0 or X_test.shape[0] == 0:
        raise ValueError("empty sample set")
    states_train = feature_map_states(spec, X_train)
    states_test = feature_map_states(spec, X_test)
    return _fidelity_gram(states_test, states_train) ** spec.beta


def write_kernel_csv(kernel: KernelMatrix, path) -> None:
    """Dump the Gram matrix for external verification."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row_id"] + [str(i) for i in kernel.row_ids])
        for rid, row in zip(kernel.row_ids, kernel.entries):
            writer.writerow([rid] + [repr(float(v)) for v in row])
