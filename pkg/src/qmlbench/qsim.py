"""Exact statevector simulation of small parameterized circuits.

A statevector is a complex ndarray whose last axis has length 2**n.
Qubit 0 is the most significant bit of the amplitude index, so for two
qubits the basis order is |00>, |01>, |10>, |11>.  All gate functions
accept leading batch axes and rotation angles may be per-batch arrays,
which is what makes gradient training over whole datasets cheap.

Expectations are computed exactly from amplitudes; there is no shot
sampling anywhere in this module.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from string import ascii_lowercase, ascii_uppercase

import numpy as np

MAX_QUBITS = 14  # dense 2^n amplitudes; largest supported configuration is 12 qubits

ROTATION_KINDS = ("rx", "ry", "rz")
GATE_KINDS = ROTATION_KINDS + ("cz", "cnot", "h", "x")

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


def n_qubits(state: np.ndarray) -> int:
    dim = state.shape[-1]
    n = int(round(np.log2(dim)))
    if 2**n != dim:
        raise ValueError(f"state length {dim} is not a power of two")
    return n


def zero_state(n: int, batch: int | None = None) -> np.ndarray:
    """|0...0> on n qubits, optionally replicated along a leading batch axis."""
    if not 1 <= n <= MAX_QUBITS:
        raise ValueError(f"qubit count {n} outside supported range 1..{MAX_QUBITS}")
    shape = (2**n,) if batch is None else (batch, 2**n)
    state = np.zeros(shape, dtype=np.complex128)
    state[..., 0] = 1.0
    return state


def check_state(state: np.ndarray, tol: float = 1e-9) -> None:
    norms = np.linalg.norm(state, axis=-1)
    if not np.allclose(norms, 1.0, atol=tol):
        raise ValueError("statevector norm deviates from 1 beyond tolerance")


def _split_axis(state: np.ndarray, qubit: int):
    n = n_qubits(state)
    if not 0 <= qubit < n:
        raise ValueError(f"qubit {qubit} out of range for {n}-qubit state")
    head = state.shape[:-1]
    r = state.reshape(head + (2**qubit, 2, 2 ** (n - qubit - 1)))
    return r, head


def _angle_factors(theta, head):
    theta = np.asarray(theta, dtype=float)
    c = np.cos(theta / 2.0)
    s = np.sin(theta / 2.0)
    if theta.ndim:  # per-batch angles broadcast over the two trailing axes
        c = c[..., None, None]
        s = s[..., None, None]
    return c, s


def apply_rx(state: np.ndarray, qubit: int, theta) -> np.ndarray:
    r, head = _split_axis(state, qubit)
    c, s = _angle_factors(theta, head)
    out = np.empty_like(r)
    out[..., 0, :] = c * r[..., 0, :] - 1j * s * r[..., 1, :]
    out[..., 1, :] = -1j * s * r[..., 0, :] + c * r[..., 1, :]
    return out.reshape(state.shape)


def apply_ry(state: np.ndarray, qubit: int, theta) -> np.ndarray:
    r, head = _split_axis(state, qubit)
    c, s = _angle_factors(theta, head)
    out = np.empty_like(r)
    out[..., 0, :] = c * r[..., 0, :] - s * r[..., 1, :]
    out[..., 1, :] = s * r[..., 0, :] + c * r[..., 1, :]
    return out.reshape(state.shape)


def apply_rz(state: np.ndarray, qubit: int, theta) -> np.ndarray:
    r, head = _split_axis(state, qubit)
    theta = np.asarray(theta, dtype=float)
    phase = np.exp(-0.5j * theta)
    if theta.ndim:
        phase = phase[..., None, None]
    out = np.empty_like(r)
    out[..., 0, :] = phase * r[..., 0, :]
    out[..., 1, :] = np.conj(phase) * r[..., 1, :]
    return out.reshape(state.shape)


def apply_h(state: np.ndarray, qubit: int) -> np.ndarray:
    r, _ = _split_axis(state, qubit)
    out = np.empty_like(r)
    out[..., 0, :] = _INV_SQRT2 * (r[..., 0, :] + r[..., 1, :])
    out[..., 1, :] = _INV_SQRT2 * (r[..., 0, :] - r[..., 1, :])
    return out.reshape(state.shape)


def apply_x(state: np.ndarray, qubit: int) -> np.ndarray:
    r, _ = _split_axis(state, qubit)
    return r[..., ::-1, :].reshape(state.shape)


@lru_cache(maxsize=None)
def _bit(n: int, qubit: int) -> np.ndarray:
    idx = np.arange(2**n)
    return (idx >> (n - 1 - qubit)) & 1


@lru_cache(maxsize=None)
def _z_signs(n: int) -> np.ndarray:
    """Rows of +-1 signs, one per qubit; <Z_k> = probs @ _z_signs(n)[k]."""
    return np.stack([1.0 - 2.0 * _bit(n, k) for k in range(n)])


def apply_cz(state: np.ndarray, a: int, b: int) -> np.ndarray:
    n = n_qubits(state)
    if a == b:
        raise ValueError("cz needs two distinct qubits")
    signs = 1.0 - 2.0 * (_bit(n, a) & _bit(n, b))
    return state * signs


def apply_cnot(state: np.ndarray, control: int, target: int) -> np.ndarray:
    n = n_qubits(state)
    if control == target:
        raise ValueError("cnot needs two distinct qubits")
    idx = np.arange(2**n)
    flip = idx ^ (1 << (n - 1 - target))
    perm = np.where(_bit(n, control) == 1, flip, idx)
    return state[..., perm]


def apply_cz_ring(state: np.ndarray) -> np.ndarray:
    """CZ entanglers on neighbouring qubits closed into a ring.

    Two qubits get a single CZ (a closed ring would apply it twice and
    cancel); one qubit is left untouched.
    """
    n = n_qubits(state)
    if n == 1:
        return state
    if n == 2:
        return apply_cz(state, 0, 1)
    for i in range(n - 1):
        state = apply_cz(state, i, i + 1)
    return apply_cz(state, n - 1, 0)


# ---------------------------------------------------------------------------
# circuit descriptions


@dataclass(frozen=True)
class Gate:
    """One gate: rotations carry either a parameter index or a fixed angle."""

    kind: str
    target: int
    control: int | None = None
    param_index: int | None = None
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind in ROTATION_KINDS:
            if (self.param_index is None) == (self.angle is None):
                raise ValueError("rotation gate needs exactly one of param_index/angle")
        elif self.param_index is not None or self.angle is not None:
            raise ValueError(f"{self.kind} gate takes no angle")
        if self.kind in ("cz", "cnot") and self.control is None:
            raise ValueError(f"{self.kind} gate needs a control qubit")


@dataclass(frozen=True)
class CircuitSpec:
    """Ordered gate list over n qubits plus the bound parameter vector."""

    n: int
    ops: tuple[Gate, ...]
    params: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if not 1 <= self.n <= MAX_QUBITS:
            raise ValueError(f"qubit count {self.n} outside 1..{MAX_QUBITS}")
        object.__setattr__(self, "ops", tuple(self.ops))
        object.__setattr__(self, "params", np.asarray(self.params, dtype=float))
        if not np.all(np.isfinite(self.params)):
            raise ValueError("parameters must be finite")
        for g in self.ops:
            for q in (g.target, g.control):
                if q is not None and not 0 <= q < self.n:
                    raise ValueError(f"qubit index {q} out of range for n={self.n}")
            if g.param_index is not None and g.param_index >= len(self.params):
                raise ValueError(f"parameter index {g.param_index} out of range")

    @property
    def n_params(self) -> int:
        return len(self.params)


def _gate_angle(gate: Gate, params: np.ndarray) -> float:
    return gate.angle if gate.param_index is None else params[gate.param_index]


def _mat_1q(kind: str, theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    if kind == "ry":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "rx":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind == "rz":
        return np.array([[np.exp(-0.5j * theta), 0.0], [0.0, np.exp(0.5j * theta)]])
    if kind == "h":
        return np.array([[_INV_SQRT2, _INV_SQRT2], [_INV_SQRT2, -_INV_SQRT2]], dtype=complex)
    return np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)  # x


def _apply_1q_mats(state: np.ndarray, mats: dict[int, np.ndarray]) -> np.ndarray:
    """One fused einsum applying per-qubit 2x2 unitaries on the given qubits."""
    n = n_qubits(state)
    if len(mats) == 1:
        ((q, m),) = mats.items()
        r, _ = _split_axis(state, q)
        out = np.empty_like(r)
        out[..., 0, :] = m[0, 0] * r[..., 0, :] + m[0, 1] * r[..., 1, :]
        out[..., 1, :] = m[1, 0] * r[..., 0, :] + m[1, 1] * r[..., 1, :]
        return out.reshape(state.shape)
    r = state.reshape((-1,) + (2,) * n)
    ins = ascii_lowercase[:n]
    outs = list(ins)
    subs, operands = [], []
    for k, (q, m) in enumerate(mats.items()):
        new = ascii_uppercase[k]
        subs.append(new + ins[q])
        outs[q] = new
        operands.append(m)
    expr = ",".join(subs) + ",z" + ins + "->z" + "".join(outs)
    return np.einsum(expr, *operands, r, optimize=True).reshape(state.shape)


def _run_ops(state: np.ndarray, ops, angle_of) -> np.ndarray:
    """Shared evolution loop; consecutive single-qubit gates are fused into
    one einsum (composing repeats on the same qubit)."""
    pending: dict[int, np.ndarray] = {}
    for pos, g in ops:
        if g.kind in ("cz", "cnot"):
            if pending:
                state = _apply_1q_mats(state, pending)
                pending = {}
            if g.kind == "cz":
                state = apply_cz(state, g.control, g.target)
            else:
                state = apply_cnot(state, g.control, g.target)
        else:
            theta = angle_of(pos, g)
            m = _mat_1q(g.kind, theta)
            pending[g.target] = m @ pending[g.target] if g.target in pending else m
    if pending:
        state = _apply_1q_mats(state, pending)
    return state


def run_circuit(
    spec: CircuitSpec,
    state: np.ndarray | None = None,
    params: np.ndarray | None = None,
    override_angles: dict[int, float] | None = None,
) -> np.ndarray:
    """Apply the circuit gate-by-gate; norm is preserved exactly.

    `params` overrides spec.params; `override_angles` maps gate positions
    to absolute angles (used by the parameter-shift rule, which must shift
    one gate occurrence at a time).
    """
    if state is None:
        state = zero_state(spec.n)
    if n_qubits(state) != spec.n:
        raise ValueError("state dimension does not match circuit")
    p = spec.params if params is None else np.asarray(params, dtype=float)

    def angle_of(pos, g):
        if g.kind not in ROTATION_KINDS:
            return 0.0
        if override_angles and pos in override_angles:
            return override_angles[pos]
        return _gate_angle(g, p)

    return _run_ops(state, enumerate(spec.ops), angle_of)


def evolution_matrix(
    spec: CircuitSpec,
    params: np.ndarray | None = None,
    override_angles: dict[int, float] | None = None,
) -> np.ndarray:
    """Dense matrix M with evolved = states @ M (M is the unitary's transpose).

    Built by evolving the full basis as a batch; worthwhile for small
    circuits that are applied to many states, since the data pass becomes
    a single matrix product. The inverse evolution is M.conj().T.
    """
    basis = np.eye(2**spec.n, dtype=np.complex128)
    return run_circuit(spec, basis, params, override_angles)


def run_circuit_inverse(
    spec: CircuitSpec,
    state: np.ndarray,
    params: np.ndarray | None = None,
) -> np.ndarray:
    """Apply the exact inverse circuit (reversed order, negated rotations)."""
    if n_qubits(state) != spec.n:
        raise ValueError("state dimension does not match circuit")
    p = spec.params if params is None else np.asarray(params, dtype=float)

    def angle_of(pos, g):
        return -_gate_angle(g, p) if g.kind in ROTATION_KINDS else 0.0

    return _run_ops(state, [(i, g) for i, g in enumerate(reversed(spec.ops))], angle_of)


# ---------------------------------------------------------------------------
# data encodings


def angle_encode(x: np.ndarray) -> np.ndarray:
    """Product state RY(pi*x_i)|0> per feature, one qubit per feature.

    Features are expected in [0, 1]; the pi scaling maps 0 and 1 to the
    Z-basis poles. Accepts leading batch axes.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    if d == 0:
        raise ValueError("cannot encode an empty feature vector")
    if d > MAX_QUBITS:
        raise ValueError(f"{d} features need {d} qubits > limit {MAX_QUBITS}")
    if not np.all(np.isfinite(x)):
        raise ValueError("features must be finite")
    half = 0.5 * np.pi * x
    state = np.stack([np.cos(half[..., 0]), np.sin(half[..., 0])], axis=-1)
    for i in range(1, d):
        factor = np.stack([np.cos(half[..., i]), np.sin(half[..., i])], axis=-1)
        state = (state[..., :, None] * factor[..., None, :]).reshape(x.shape[:-1] + (-1,))
    return state.astype(np.complex128)


def amplitude_encode(x: np.ndarray) -> np.ndarray:
    """Normalized feature vector as amplitudes on ceil(log2 d) qubits, zero-padded."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    if d == 0:
        raise ValueError("cannot encode an empty feature vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("features must be finite")
    n = max(1, int(np.ceil(np.log2(d))))
    if n > MAX_QUBITS:
        raise ValueError(f"{d} amplitudes need {n} qubits > limit {MAX_QUBITS}")
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("cannot amplitude-encode a zero vector")
    padded = np.zeros(x.shape[:-1] + (2**n,), dtype=np.complex128)
    padded[..., :d] = x / norms
    return padded


# ---------------------------------------------------------------------------
# measurements


def expectation_z(state: np.ndarray, qubit: int) -> np.ndarray:
    """Exact <Z> on one qubit; returns a real scalar or batch array."""
    n = n_qubits(state)
    if not 0 <= qubit < n:
        raise ValueError(f"qubit {qubit} out of range for {n}-qubit state")
    val = np.abs(state) ** 2 @ _z_signs(n)[qubit]
    return val if val.ndim else float(val)


def expectation_all_z(state: np.ndarray) -> np.ndarray:
    """<Z_k> for every qubit; shape (..., n)."""
    n = n_qubits(state)
    probs = np.abs(state) ** 2
    return probs @ _z_signs(n).T


def expectation_z_product(state: np.ndarray, qubits) -> np.ndarray:
    """Exact expectation of the tensor product of Z over the given qubits."""
    n = n_qubits(state)
    signs = np.ones(2**n)
    for q in qubits:
        if not 0 <= q < n:
            raise ValueError(f"qubit {q} out of range for {n}-qubit state")
        signs = signs * (1.0 - 2.0 * _bit(n, q))
    val = np.sum(np.abs(state) ** 2 * signs, axis=-1)
    return val if val.ndim else float(val)


def overlap(a: np.ndarray, b: np.ndarray) -> complex:
    """Inner product <a|b>; |overlap| <= 1 for unit vectors."""
    if a.shape[-1] != b.shape[-1]:
        raise ValueError("states live on different qubit counts")
    val = np.sum(np.conj(a) * b, axis=-1)
    return complex(val) if val.ndim == 0 else val


# ---------------------------------------------------------------------------
# gradients


def parameter_shift_grad(
    spec: CircuitSpec,
    input_state: np.ndarray | None,
    observable_qubits,
    param_index: int,
    params: np.ndarray | None = None,
) -> float:
    """d<Z-product>/d(theta) via +-pi/2 shifts of each gate occurrence.

    Exact for single-qubit rotations; raises if the parameter drives any
    other gate kind.
    """
    p = spec.params if params is None else np.asarray(params, dtype=float)
    if not 0 <= param_index < len(p):
        raise ValueError(f"parameter index {param_index} out of range")
    positions = [i for i, g in enumerate(spec.ops) if g.param_index == param_index]
    if not positions:
        raise ValueError(f"parameter {param_index} drives no gate")
    for i in positions:
        if spec.ops[i].kind not in ROTATION_KINDS:
            raise ValueError("parameter-shift rule needs a rotation gate")
    theta = p[param_index]
    grad = 0.0
    for pos in positions:
        plus = run_circuit(spec, input_state, p, override_angles={pos: theta + np.pi / 2})
        minus = run_circuit(spec, input_state, p, override_angles={pos: theta - np.pi / 2})
        f_plus = expectation_z_product(plus, observable_qubits)
        f_minus = expectation_z_product(minus, observable_qubits)
        grad += 0.5 * (f_plus - f_minus)
    return float(grad)


# ---------------------------------------------------------------------------
# circuit builders


def hardware_efficient_ops(n: int, layers: int, start_index: int = 0):
    """RY+RZ rotations per qubit followed by a CZ ring, repeated `layers` times.

    Returns (ops, n_params) with parameter indices start_index ... consecutive.
    """
    ops: list[Gate] = []
    idx = start_index
    for _ in range(layers):
        for q in range(n):
            ops.append(Gate("ry", q, param_index=idx))
            idx += 1
        for q in range(n):
            ops.append(Gate("rz", q, param_index=idx))
            idx += 1
        if n == 2:
            ops.append(Gate("cz", 1, control=0))
        elif n > 2:
            for q in range(n - 1):
                ops.append(Gate("cz", q + 1, control=q))
            ops.append(Gate("cz", 0, control=n - 1))
    return ops, idx - start_index


def random_circuit(n: int, depth: int, seed: int, p_entangle: float = 0.3) -> CircuitSpec:
    """Seeded random circuit of rotations and entanglers, for self-tests."""
    rng = np.random.default_rng(seed)
    ops: list[Gate] = []
    n_params = 0
    for _ in range(depth):
        for q in range(n):
            if n > 1 and rng.random() < p_entangle:
                other = int(rng.integers(n - 1))
                other = other if other < q else other + 1
                kind = "cz" if rng.random() < 0.5 else "cnot"
                ops.append(Gate(kind, q, control=other))
            else:
                kind = ROTATION_KINDS[rng.integers(3)]
                ops.append(Gate(kind, q, param_index=n_params))
                n_params += 1
    params = rng.uniform(-np.pi, np.pi, size=n_params)
    return CircuitSpec(n=n, ops=tuple(ops), params=params)
