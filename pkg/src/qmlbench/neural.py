"""ANN, QNN, LSTM, and QLSTM classifiers with a shared training loop.

All models expose a flat parameter vector, `predict_proba`, and
`loss_grad` returning the weighted-BCE loss with its exact gradient:
classical weights differentiate by backprop, circuit angles by the
parameter-shift rule (amplitude-embedding inputs by an adjoint pass,
where the shift rule does not apply). Training is full-batch gradient
descent with optional momentum, early-stopped on the early-stop slice
ROC-AUC; everything is deterministic for a fixed seed.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import qsim
from .metrics import auc_score

PROB_CLAMP = 1e-7

QNN_ARCHS = ("SQ", "MQ", "HybridSQ", "HybridMQ")


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


# ---------------------------------------------------------------------------
# weighted binary cross-entropy


def weighted_bce(probs, labels, class_weights=(1.0, 1.0)) -> float:
    """-mean[w_y (y log p + (1-y) log(1-p))], probabilities clamped."""
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if probs.shape != labels.shape:
        raise ValueError("probs and labels length mismatch")
    p = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    w = np.where(labels == 1.0, class_weights[1], class_weights[0])
    return float(-np.mean(w * (labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p))))


def _bce_dprob(probs, labels, class_weights):
    """dL/dp for the mean weighted BCE (clamped probabilities)."""
    p = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    w = np.where(labels == 1.0, class_weights[1], class_weights[0])
    return w * (p - labels) / (p * (1.0 - p)) / len(labels)


def inverse_frequency_weights(labels) -> tuple[float, float]:
    """Class weights proportional to inverse class frequency, mean-normalized."""
    labels = np.asarray(labels, dtype=float)
    n = len(labels)
    n_pos = float(np.sum(labels == 1.0))
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        return (1.0, 1.0)
    return (n / (2.0 * n_neg), n / (2.0 * n_pos))


# ---------------------------------------------------------------------------
# feedforward ANN


@dataclass(frozen=True)
class AnnSpec:
    """Dense layers [d, hidden..., 1]; sigmoid output, configurable hidden act."""

    layer_sizes: tuple[int, ...]
    hidden_activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if len(self.layer_sizes) < 2 or self.layer_sizes[-1] != 1:
            raise ValueError("layer_sizes must end in a single output unit")
        if any(s < 1 for s in self.layer_sizes):
            raise ValueError("layer sizes must be positive")
        if self.hidden_activation not in ("tanh", "relu", "sigmoid"):
            raise ValueError(f"unknown activation {self.hidden_activation!r}")

    @property
    def n_params(self) -> int:
        sizes = self.layer_sizes
        return sum((sizes[i] + 1) * sizes[i + 1] for i in range(len(sizes) - 1))


def _act(kind, z):
    if kind == "tanh":
        return np.tanh(z)
    if kind == "relu":
        return np.maximum(z, 0.0)
    return _sigmoid(z)


def _act_grad(kind, z, a):
    if kind == "tanh":
        return 1.0 - a**2
    if kind == "relu":
        return (z > 0).astype(float)
    return a * (1.0 - a)


class AnnClassifier:
    def __init__(self, spec: AnnSpec, seed: int = 0, params: np.ndarray | None = None):
        self.spec = spec
        if params is not None:
            params = np.asarray(params, dtype=float).copy()
            if len(params) != spec.n_params:
                raise ValueError("parameter vector has the wrong length")
            self.params = params
        else:
            rng = np.random.default_rng(seed)
            chunks = []
            sizes = spec.layer_sizes
            for i in range(len(sizes) - 1):
                bound = 1.0 / np.sqrt(sizes[i])
                chunks.append(rng.uniform(-bound, bound, size=sizes[i + 1] * sizes[i]))
                chunks.append(np.zeros(sizes[i + 1]))
            self.params = np.concatenate(chunks)

    @property
    def n_params(self) -> int:
        return self.spec.n_params

    def _layers(self, params):
        sizes = self.spec.layer_sizes
        out, off = [], 0
        for i in range(len(sizes) - 1):
            n_in, n_out = sizes[i], sizes[i + 1]
            w = params[off: off + n_out * n_in].reshape(n_out, n_in)
            off += n_out * n_in
            b = params[off: off + n_out]
            off += n_out
            out.append((w, b))
        return out

    def _forward(self, X, params):
        layers = self._layers(params)
        act = self.spec.hidden_activation
        a = X
        cache = [(None, a)]
        for w, b in layers[:-1]:
            z = a @ w.T + b
            a = _act(act, z)
            cache.append((z, a))
        w, b = layers[-1]
        logit = (a @ w.T + b)[:, 0]
        return logit, cache

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.spec.layer_sizes[0]:
            raise ValueError("input dimension mismatch")
        logit, _ = self._forward(X, self.params)
        return _sigmoid(logit)

    def loss_grad(self, X, y, class_weights=(1.0, 1.0)):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float)
        logit, cache = self._forward(X, self.params)
        p = _sigmoid(logit)
        loss = weighted_bce(p, y, class_weights)
        layers = self._layers(self.params)
        act = self.spec.hidden_activation
        # sigmoid + BCE collapse to (p - y) at the logit
        w_cls = np.where(y == 1.0, class_weights[1], class_weights[0])
        dz = (w_cls * (p - y) / len(y))[:, None]
        grads = [None] * len(layers)
        for li in range(len(layers) - 1, -1, -1):
            w, _ = layers[li]
            a_prev = cache[li][1]
            grads[li] = (dz.T @ a_prev, dz.sum(axis=0))
            if li > 0:
                da = dz @ w
                z_prev, a_prev_act = cache[li]
                dz = da * _act_grad(act, z_prev, a_prev_act)
        flat = np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])
        return loss, flat


def ann_forward(spec: AnnSpec, weights, x) -> float:
    """Single-sample probability under the given flat weight vector."""
    model = AnnClassifier(spec, params=np.asarray(weights, dtype=float))
    return float(model.predict_proba(np.atleast_2d(x))[0])


# ---------------------------------------------------------------------------
# QNN


@dataclass(frozen=True)
class QnnSpec:
    """Variational classifier: optional classical input projection (Hybrid),
    angle/amplitude encoding, hardware-efficient ansatz of `depth` layers,
    single- or multi-qubit readout."""

    arch: str  # SQ | MQ | HybridSQ | HybridMQ
    encoding: str  # angle | amplitude
    depth: int
    n_qubits: int

    def __post_init__(self):
        if self.arch not in QNN_ARCHS:
            raise ValueError(f"unknown architecture {self.arch!r}")
        if self.encoding not in ("angle", "amplitude"):
            raise ValueError(f"unknown encoding {self.encoding!r}")
        if not 1 <= self.depth <= 6:
            raise ValueError("depth must lie in 1..6")
        if not 1 <= self.n_qubits <= qsim.MAX_QUBITS:
            raise ValueError("qubit count out of range")

    @property
    def hybrid(self) -> bool:
        return self.arch.startswith("Hybrid")

    @property
    def mqr(self) -> bool:
        return self.arch.endswith("MQ") and not self.arch.endswith("SQ")

    def projection_dim(self) -> int:
        return self.n_qubits if self.encoding == "angle" else 2**self.n_qubits

    def n_params(self, n_features: int) -> int:
        total = 2 * self.n_qubits * self.depth
        if self.hybrid:
            total += self.projection_dim() * n_features
        if self.mqr:
            total += self.n_qubits + 1
        return total

    def check_features(self, n_features: int) -> None:
        if self.hybrid:
            return
        if self.encoding == "angle" and n_features != self.n_qubits:
            raise ValueError("angle encoding needs one qubit per feature")
        if self.encoding == "amplitude" and n_features > 2**self.n_qubits:
            raise ValueError("amplitude encoding needs 2^q >= feature count")


class QnnClassifier:
    def __init__(self, spec: QnnSpec, n_features: int, seed: int = 0, params=None):
        spec.check_features(n_features)
        self.spec = spec
        self.n_features = n_features
        q = spec.n_qubits
        ops, n_theta = qsim.hardware_efficient_ops(q, spec.depth)
        self._circuit = qsim.CircuitSpec(n=q, ops=tuple(ops), params=np.zeros(n_theta))
        self._pos = {g.param_index: i for i, g in enumerate(self._circuit.ops) if g.param_index is not None}
        self._n_theta = n_theta
        if params is not None:
            params = np.asarray(params, dtype=float).copy()
            if len(params) != spec.n_params(n_features):
                raise ValueError("parameter vector has the wrong length")
            self.params = params
        else:
            rng = np.random.default_rng(seed)
            chunks = []
            if spec.hybrid:
                bound = 1.0 / np.sqrt(n_features)
                chunks.append(rng.uniform(-bound, bound, size=spec.projection_dim() * n_features))
            chunks.append(rng.uniform(-np.pi / 8, np.pi / 8, size=n_theta))
            if spec.mqr:
                chunks.append(rng.uniform(-0.5, 0.5, size=q))
                chunks.append(np.zeros(1))
            self.params = np.concatenate(chunks)

    @property
    def n_params(self) -> int:
        return self.spec.n_params(self.n_features)

    def _split(self, params):
        spec = self.spec
        off = 0
        w_in = None
        if spec.hybrid:
            size = spec.projection_dim() * self.n_features
            w_in = params[off: off + size].reshape(spec.projection_dim(), self.n_features)
            off += size
        theta = params[off: off + self._n_theta]
        off += self._n_theta
        w_out, b_out = None, None
        if spec.mqr:
            w_out = params[off: off + spec.n_qubits]
            b_out = params[off + spec.n_qubits]
        return w_in, theta, w_out, b_out

    def _encode(self, X, w_in):
        """Returns (state, z, v_norm): z are angle-layer inputs, v_norm the
        amplitude pre-normalization vector; unused slots are None."""
        if self.spec.encoding == "angle":
            z = X @ w_in.T if w_in is not None else X
            return qsim.angle_encode(z), z, None
        v = X @ w_in.T if w_in is not None else np.pad(X, ((0, 0), (0, 2**self.spec.n_qubits - X.shape[1])))
        norms = np.linalg.norm(v, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise ValueError("amplitude encoding hit a zero vector")
        return (v / norms).astype(np.complex128), None, (v, norms)

    def _readout(self, state, w_out, b_out):
        if self.spec.mqr:
            e = qsim.expectation_all_z(state)
            logit = e @ w_out + b_out
            return _sigmoid(logit), e
        e0 = qsim.expectation_z(state, 0)
        return (np.asarray(e0) + 1.0) / 2.0, np.asarray(e0)

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        w_in, theta, w_out, b_out = self._split(self.params)
        encoded, _, _ = self._encode(X, w_in)
        state = encoded @ qsim.evolution_matrix(self._circuit, theta)
        prob, _ = self._readout(state, w_out, b_out)
        return np.asarray(prob, dtype=float)

    def loss_grad(self, X, y, class_weights=(1.0, 1.0)):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float)
        spec = self.spec
        q = spec.n_qubits
        w_in, theta, w_out, b_out = self._split(self.params)
        encoded, z, v_info = self._encode(X, w_in)
        evo = qsim.evolution_matrix(self._circuit, theta)
        state = encoded @ evo
        prob, e = self._readout(state, w_out, b_out)
        loss = weighted_bce(prob, y, class_weights)

        grad = np.zeros_like(self.params)
        _, theta_g, w_out_g, b_out_g = self._split(grad)
        if spec.mqr:
            w_cls = np.where(y == 1.0, class_weights[1], class_weights[0])
            dlogit = w_cls * (prob - y) / len(y)
            w_out_g[:] = e.T @ dlogit
            grad[-1] = dlogit.sum()
            de = dlogit[:, None] * w_out[None, :]  # (B, q)
        else:
            dp = _bce_dprob(prob, y, class_weights)
            de = (0.5 * dp)[:, None]  # (B, 1) acting on <Z_0>

        def upstream_dot(states):
            """Sum_k de_k * <Z_k> on a batch of states."""
            if spec.mqr:
                return np.sum(de * qsim.expectation_all_z(states), axis=1)
            return de[:, 0] * qsim.expectation_z(states, 0)

        # ansatz angles: parameter-shift per gate, batched over samples
        for m in range(self._n_theta):
            pos = self._pos[m]
            plus = encoded @ qsim.evolution_matrix(self._circuit, theta, {pos: theta[m] + np.pi / 2})
            minus = encoded @ qsim.evolution_matrix(self._circuit, theta, {pos: theta[m] - np.pi / 2})
            theta_g[m] = np.sum(0.5 * (upstream_dot(plus) - upstream_dot(minus)))

        if spec.hybrid:
            w_in_g = self._split(grad)[0]
            if spec.encoding == "angle":
                # shift rule on the encoding rotations: angle = pi * z
                dz = np.empty_like(z)
                for i in range(q):
                    for sign in (1.0, -1.0):
                        z_s = z.copy()
                        z_s[:, i] += 0.5 * sign
                        st = qsim.angle_encode(z_s) @ evo
                        if sign > 0:
                            up_plus = upstream_dot(st)
                        else:
                            up_minus = upstream_dot(st)
                    dz[:, i] = 0.5 * np.pi * (up_plus - up_minus)
                w_in_g[:] = dz.T @ X
            else:
                # adjoint pass: grad of sum_k de_k <Z_k> w.r.t. the real amplitudes
                v, norms = v_info
                obs = range(q) if spec.mqr else (0,)
                signs = np.stack([1.0 - 2.0 * qsim._bit(q, k) for k in obs])
                s = de @ signs  # (B, 2^q)
                xi = (s * state) @ evo.conj().T
                g_hat = 2.0 * np.real(xi)
                v_hat = np.real(encoded)
                g_v = (g_hat - np.sum(g_hat * v_hat, axis=1, keepdims=True) * v_hat) / norms
                w_in_g[:] = g_v.T @ X
        return loss, grad


def qnn_forward(spec: QnnSpec, params, x, n_features: int | None = None) -> float:
    """Single-sample probability; n_features defaults to the input length."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = n_features if n_features is not None else x.shape[1]
    model = QnnClassifier(spec, d, params=np.asarray(params, dtype=float))
    return float(model.predict_proba(x)[0])


def qnn_grid(encoding: str, depths=range(1, 7), archs=QNN_ARCHS, qubit_choices=None, n_qubits=None):
    """Full architecture grid; infeasible points are filtered at evaluation.

    Angle grids fix the qubit count (one per feature); amplitude grids
    sweep qubit_choices (default 2..6).
    """
    specs = []
    if encoding == "angle":
        if n_qubits is None:
            raise ValueError("angle grid needs the feature count as n_qubits")
        for arch in archs:
            for depth in depths:
                specs.append(QnnSpec(arch, "angle", depth, n_qubits))
        return specs
    choices = tuple(qubit_choices) if qubit_choices is not None else (2, 3, 4, 5, 6)
    for arch in archs:
        for depth in depths:
            for nq in choices:
                specs.append(QnnSpec(arch, "amplitude", depth, nq))
    return specs


# ---------------------------------------------------------------------------
# classical LSTM


@dataclass(frozen=True)
class LstmSpec:
    hidden_dim: int
    depth: int
    n_features: int = 4

    def __post_init__(self):
        if self.hidden_dim < 1 or self.depth < 1 or self.n_features < 1:
            raise ValueError("hidden_dim, depth and n_features must be positive")

    @property
    def n_params(self) -> int:
        h = self.hidden_dim
        total = 0
        for layer in range(self.depth):
            n_in = self.n_features if layer == 0 else h
            total += 4 * h * (n_in + h + 1)
        return total + h + 1  # readout


def _lstm_gates(a):
    """Split stacked pre-activations into (i, f, g, o) activations."""
    h = a.shape[-1] // 4
    i = _sigmoid(a[..., :h])
    f = _sigmoid(a[..., h: 2 * h])
    g = np.tanh(a[..., 2 * h: 3 * h])
    o = _sigmoid(a[..., 3 * h:])
    return i, f, g, o


def lstm_step(wx, wh, b, x_t, h_prev, c_prev):
    """One classical cell step: c = f*c_prev + i*g, h = o*tanh(c)."""
    a = x_t @ wx.T + h_prev @ wh.T + b
    i, f, g, o = _lstm_gates(a)
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


class LstmClassifier:
    def __init__(self, spec: LstmSpec, seed: int = 0, params=None):
        self.spec = spec
        if params is not None:
            params = np.asarray(params, dtype=float).copy()
            if len(params) != spec.n_params:
                raise ValueError("parameter vector has the wrong length")
            self.params = params
        else:
            rng = np.random.default_rng(seed)
            bound = 1.0 / np.sqrt(spec.hidden_dim)
            self.params = rng.uniform(-bound, bound, size=spec.n_params)

    @property
    def n_params(self) -> int:
        return self.spec.n_params

    def _layers(self, params):
        h, d = self.spec.hidden_dim, self.spec.depth
        off, out = 0, []
        for layer in range(d):
            n_in = self.spec.n_features if layer == 0 else h
            wx = params[off: off + 4 * h * n_in].reshape(4 * h, n_in)
            off += 4 * h * n_in
            wh = params[off: off + 4 * h * h].reshape(4 * h, h)
            off += 4 * h * h
            b = params[off: off + 4 * h]
            off += 4 * h
            out.append((wx, wh, b))
        w_r = params[off: off + h]
        b_r = params[off + h]
        return out, w_r, b_r

    def _forward(self, X, params):
        """X: (B, T, F). Returns logits and per-step caches for BPTT."""
        B, T, _ = X.shape
        h_dim = self.spec.hidden_dim
        layers, w_r, b_r = self._layers(params)
        caches = []
        inputs = X
        for wx, wh, b in layers:
            h = np.zeros((B, h_dim))
            c = np.zeros((B, h_dim))
            steps = []
            outs = np.empty((B, T, h_dim))
            for t in range(T):
                x_t = inputs[:, t]
                a = x_t @ wx.T + h @ wh.T + b
                i, f, g, o = _lstm_gates(a)
                c_prev = c
                c = f * c_prev + i * g
                tanh_c = np.tanh(c)
                h = o * tanh_c
                steps.append((x_t, i, f, g, o, c_prev, tanh_c, h))
                outs[:, t] = h
            caches.append(steps)
            inputs = outs
        logit = inputs[:, -1] @ w_r + b_r
        return logit, inputs, caches

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        logit, _, _ = self._forward(X, self.params)
        return _sigmoid(logit)

    def loss_grad(self, X, y, class_weights=(1.0, 1.0)):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        B, T, _ = X.shape
        h_dim = self.spec.hidden_dim
        layers, w_r, _ = self._layers(self.params)
        logit, top_out, caches = self._forward(X, self.params)
        p = _sigmoid(logit)
        loss = weighted_bce(p, y, class_weights)
        w_cls = np.where(y == 1.0, class_weights[1], class_weights[0])
        dlogit = w_cls * (p - y) / len(y)

        g_layers = [
            (np.zeros_like(wx), np.zeros_like(wh), np.zeros_like(b)) for wx, wh, b in layers
        ]
        g_wr = top_out[:, -1].T @ dlogit
        g_br = dlogit.sum()
        # adjoint on each layer's hidden outputs, top layer seeded by readout
        dh_out = [np.zeros((B, T, h_dim)) for _ in layers]
        dh_out[-1][:, -1] = dlogit[:, None] * w_r[None, :]
        for li in range(len(layers) - 1, -1, -1):
            wx, wh, _ = layers[li]
            gx, gh, gb = g_layers[li]
            steps = caches[li]
            dh_next = np.zeros((B, h_dim))
            dc_next = np.zeros((B, h_dim))
            for t in range(T - 1, -1, -1):
                x_t, i, f, g, o, c_prev, tanh_c, _ = steps[t]
                dh = dh_out[li][:, t] + dh_next
                do = dh * tanh_c
                dc = dh * o * (1.0 - tanh_c**2) + dc_next
                di = dc * g
                df = dc * c_prev
                dg = dc * i
                da = np.concatenate(
                    [di * i * (1 - i), df * f * (1 - f), dg * (1 - g**2), do * o * (1 - o)],
                    axis=1,
                )
                gx += da.T @ x_t
                h_prev = steps[t - 1][7] if t > 0 else np.zeros((B, h_dim))
                gh += da.T @ h_prev
                gb += da.sum(axis=0)
                if li > 0:
                    dh_out[li - 1][:, t] += da @ wx
                dh_next = da @ wh
                dc_next = dc * f
        flat = np.concatenate(
            [np.concatenate([gx.ravel(), gh.ravel(), gb]) for gx, gh, gb in g_layers]
            + [g_wr, [g_br]]
        )
        return loss, flat


# ---------------------------------------------------------------------------
# QLSTM


@dataclass(frozen=True)
class QlstmSpec:
    """LSTM cell whose four gates plus the hidden/output transforms are
    variational circuits on hidden_dim qubits, fed through a shared linear
    embedding with multi-qubit Z readouts."""

    hidden_dim: int
    depth: int  # circuit layers per block
    n_features: int = 4

    def __post_init__(self):
        if self.hidden_dim < 1 or self.depth < 1 or self.n_features < 1:
            raise ValueError("hidden_dim, depth and n_features must be positive")

    @property
    def block_params(self) -> int:
        return 2 * self.hidden_dim * self.depth

    @property
    def n_params(self) -> int:
        q = self.hidden_dim
        embed = q * (q + self.n_features) + q
        return embed + 6 * self.block_params + q + 1


class _CircuitBlock:
    """Angle-encoded variational block returning all-qubit Z expectations."""

    def __init__(self, n_qubits: int, layers: int):
        ops, n_theta = qsim.hardware_efficient_ops(n_qubits, layers)
        self.circuit = qsim.CircuitSpec(n=n_qubits, ops=tuple(ops), params=np.zeros(n_theta))
        self.pos = {g.param_index: i for i, g in enumerate(self.circuit.ops) if g.param_index is not None}
        self.n_qubits = n_qubits
        self.n_theta = n_theta

    def matrix(self, theta, override_angles=None):
        return qsim.evolution_matrix(self.circuit, theta, override_angles)

    def forward(self, theta, Z, evo=None):
        if evo is None:
            evo = self.matrix(theta)
        return qsim.expectation_all_z(qsim.angle_encode(Z) @ evo)

    def jacobians(self, theta, Z):
        """(outputs, d out/d input, d out/d theta) by batched parameter shift.

        The encoding rotation is pi*z, so a +-pi/2 angle shift is a +-1/2
        input shift with a factor pi on the way back.
        """
        q = self.n_qubits
        B = Z.shape[0]
        evo = qsim.evolution_matrix(self.circuit, theta)
        encoded = qsim.angle_encode(Z)
        e = qsim.expectation_all_z(encoded @ evo)
        shifted = np.tile(Z, (2 * q, 1, 1))  # one batched pass for all input shifts
        for i in range(q):
            shifted[2 * i, :, i] += 0.5
            shifted[2 * i + 1, :, i] -= 0.5
        e_shift = qsim.expectation_all_z(
            qsim.angle_encode(shifted.reshape(-1, q)) @ evo
        ).reshape(2 * q, B, q)
        j_in = np.empty((B, q, q))
        for i in range(q):
            j_in[:, i, :] = 0.5 * np.pi * (e_shift[2 * i] - e_shift[2 * i + 1])
        j_th = np.empty((B, self.n_theta, q))
        for m in range(self.n_theta):
            pos = self.pos[m]
            plus = encoded @ qsim.evolution_matrix(self.circuit, theta, {pos: theta[m] + np.pi / 2})
            minus = encoded @ qsim.evolution_matrix(self.circuit, theta, {pos: theta[m] - np.pi / 2})
            j_th[:, m, :] = 0.5 * (qsim.expectation_all_z(plus) - qsim.expectation_all_z(minus))
        return e, j_in, j_th


_QLSTM_BLOCKS = ("f", "i", "g", "o", "h", "out")


def qlstm_step(block_fn, w_in, b_in, x_t, h_prev, c_prev):
    """One quantum cell step; block_fn(name, Z) evaluates the named circuit.

    Gate expectations pass through the classical activations (sigmoid for
    f/i/o, tanh for g); the hidden block's raw expectations become h_t.
    """
    v = np.concatenate([h_prev, x_t], axis=-1)
    z = v @ w_in.T + b_in
    f = _sigmoid(block_fn("f", z))
    i = _sigmoid(block_fn("i", z))
    g = np.tanh(block_fn("g", z))
    o = _sigmoid(block_fn("o", z))
    c = f * c_prev + i * g
    h = block_fn("h", o * np.tanh(c))
    return h, c


class QlstmClassifier:
    def __init__(self, spec: QlstmSpec, seed: int = 0, params=None):
        self.spec = spec
        self._block = _CircuitBlock(spec.hidden_dim, spec.depth)
        if params is not None:
            params = np.asarray(params, dtype=float).copy()
            if len(params) != spec.n_params:
                raise ValueError("parameter vector has the wrong length")
            self.params = params
        else:
            rng = np.random.default_rng(seed)
            q = spec.hidden_dim
            embed_n = q * (q + spec.n_features) + q
            bound = 1.0 / np.sqrt(q + spec.n_features)
            self.params = np.concatenate(
                [
                    rng.uniform(-bound, bound, size=embed_n),
                    rng.uniform(-np.pi / 8, np.pi / 8, size=6 * spec.block_params),
                    rng.uniform(-0.5, 0.5, size=q),
                    np.zeros(1),
                ]
            )

    @property
    def n_params(self) -> int:
        return self.spec.n_params

    def _split(self, params):
        q, f = self.spec.hidden_dim, self.spec.n_features
        off = 0
        w_in = params[off: off + q * (q + f)].reshape(q, q + f)
        off += q * (q + f)
        b_in = params[off: off + q]
        off += q
        thetas = {}
        for name in _QLSTM_BLOCKS:
            thetas[name] = params[off: off + self.spec.block_params]
            off += self.spec.block_params
        w_r = params[off: off + q]
        b_r = params[off + q]
        return w_in, b_in, thetas, w_r, b_r

    def _forward(self, X, params):
        B, T, _ = X.shape
        q = self.spec.hidden_dim
        w_in, b_in, thetas, w_r, b_r = self._split(params)
        evos = {name: self._block.matrix(thetas[name]) for name in _QLSTM_BLOCKS}
        h = np.zeros((B, q))
        c = np.zeros((B, q))
        steps = []
        for t in range(T):
            v = np.concatenate([h, X[:, t]], axis=1)
            z = v @ w_in.T + b_in
            f = _sigmoid(self._block.forward(thetas["f"], z, evos["f"]))
            i = _sigmoid(self._block.forward(thetas["i"], z, evos["i"]))
            g = np.tanh(self._block.forward(thetas["g"], z, evos["g"]))
            o = _sigmoid(self._block.forward(thetas["o"], z, evos["o"]))
            c_prev = c
            c = f * c_prev + i * g
            tanh_c = np.tanh(c)
            u = o * tanh_c
            h = self._block.forward(thetas["h"], u, evos["h"])
            steps.append({"v": v, "z": z, "f": f, "i": i, "g": g, "o": o,
                          "c_prev": c_prev, "tanh_c": tanh_c, "u": u, "h": h})
        e_out = self._block.forward(thetas["out"], h, evos["out"])
        logit = e_out @ w_r + b_r
        return logit, e_out, steps

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        logit, _, _ = self._forward(X, self.params)
        return _sigmoid(logit)

    def loss_grad(self, X, y, class_weights=(1.0, 1.0)):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        B, T, _ = X.shape
        spec = self.spec
        q = spec.hidden_dim
        w_in, b_in, thetas, w_r, _ = self._split(self.params)
        logit, e_out, steps = self._forward(X, self.params)
        p = _sigmoid(logit)
        loss = weighted_bce(p, y, class_weights)
        w_cls = np.where(y == 1.0, class_weights[1], class_weights[0])
        dlogit = w_cls * (p - y) / len(y)

        # batched jacobians: gate blocks over all (t, sample) embeddings,
        # hidden block over all cell outputs, output block on the last step
        z_all = np.concatenate([s["z"] for s in steps])
        u_all = np.concatenate([s["u"] for s in steps])
        jac = {}
        for name in ("f", "i", "g", "o"):
            _, j_in, j_th = self._block.jacobians(thetas[name], z_all)
            jac[name] = (j_in.reshape(T, B, q, q), j_th.reshape(T, B, self._block.n_theta, q))
        _, jh_in, jh_th = self._block.jacobians(thetas["h"], u_all)
        jac["h"] = (jh_in.reshape(T, B, q, q), jh_th.reshape(T, B, self._block.n_theta, q))
        _, jo_in, jo_th = self._block.jacobians(thetas["out"], steps[-1]["h"])

        grad = np.zeros_like(self.params)
        g_w_in, g_b_in, g_thetas, g_w_r, _ = self._split(grad)
        g_w_r[:] = e_out.T @ dlogit
        grad[-1] = dlogit.sum()

        de_out = dlogit[:, None] * w_r[None, :]
        g_thetas["out"] += np.einsum("bmo,bo->m", jo_th, de_out)
        dh = np.einsum("bio,bo->bi", jo_in, de_out)
        dc_next = np.zeros((B, q))
        for t in range(T - 1, -1, -1):
            s = steps[t]
            # hidden block: h_t = block(u_t)
            g_thetas["h"] += np.einsum("bmo,bo->m", jac["h"][1][t], dh)
            du = np.einsum("bio,bo->bi", jac["h"][0][t], dh)
            do = du * s["tanh_c"]
            dc = du * s["o"] * (1.0 - s["tanh_c"] ** 2) + dc_next
            di = dc * s["g"]
            df = dc * s["c_prev"]
            dg = dc * s["i"]
            dc_next = dc * s["f"]
            de = {
                "f": df * s["f"] * (1 - s["f"]),
                "i": di * s["i"] * (1 - s["i"]),
                "g": dg * (1 - s["g"] ** 2),
                "o": do * s["o"] * (1 - s["o"]),
            }
            dz = np.zeros((B, q))
            for name in ("f", "i", "g", "o"):
                j_in, j_th = jac[name]
                g_thetas[name] += np.einsum("bmo,bo->m", j_th[t], de[name])
                dz += np.einsum("bio,bo->bi", j_in[t], de[name])
            g_w_in += dz.T @ s["v"]
            g_b_in += dz.sum(axis=0)
            dh = (dz @ w_in)[:, :q]
        return loss, grad


# ---------------------------------------------------------------------------
# training loop


@dataclass
class TrainConfig:
    learning_rate: float = 0.2
    max_epochs: int = 300
    patience: int = 30
    momentum: float = 0.0
    class_weights: tuple[float, float] | None = None  # None -> inverse frequency
    seed: int = 0

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    es_auc: list[float] = field(default_factory=list)
    best_epoch: int = 0
    n_epochs: int = 0


def train(model, X, y, train_idx, es_idx, config: TrainConfig):
    """Full-batch gradient descent, early-stopped on the ES-slice ROC-AUC.

    Train and early-stop slices must be disjoint and chronological (train
    before early-stop). Returns the best-ES-AUC parameter vector (also
    restored into the model) and the per-epoch history.
    """
    train_idx = np.asarray(train_idx, dtype=int)
    es_idx = np.asarray(es_idx, dtype=int)
    if len(train_idx) == 0 or len(es_idx) == 0:
        raise ValueError("empty train or early-stop slice")
    if np.intersect1d(train_idx, es_idx).size:
        raise ValueError("train and early-stop slices overlap")
    if train_idx.max() >= es_idx.min():
        raise ValueError("early-stop slice must follow the train slice")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    X_tr, y_tr = X[train_idx], y[train_idx]
    X_es, y_es = X[es_idx], y[es_idx]
    weights = config.class_weights or inverse_frequency_weights(y_tr)

    history = TrainHistory()
    best_auc = -np.inf
    best_loss = np.inf
    best_params = model.params.copy()
    velocity = np.zeros_like(model.params)
    since_best = 0
    for epoch in range(1, config.max_epochs + 1):
        loss, grad = model.loss_grad(X_tr, y_tr, weights)
        if not np.isfinite(loss):
            raise RuntimeError(f"training diverged at epoch {epoch} (loss={loss})")
        velocity = config.momentum * velocity - config.learning_rate * grad
        model.params = model.params + velocity
        auc = auc_score(model.predict_proba(X_es), y_es)
        auc = 0.5 if auc is None else auc
        history.loss.append(float(loss))
        history.es_auc.append(float(auc))
        history.n_epochs = epoch
        # equal ES AUC breaks toward the lower training loss; only a strict
        # AUC improvement resets the patience window
        if auc > best_auc or (auc == best_auc and loss < best_loss):
            best_params = model.params.copy()
            best_loss = loss
            history.best_epoch = epoch
        if auc > best_auc:
            best_auc = auc
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break
    model.params = best_params.copy()
    return best_params, history


# ---------------------------------------------------------------------------
# architecture search


def architecture_search(candidates, evaluate, n_params_of):
    """Pick the grid point with the highest mean validation AUC.

    `evaluate(candidate)` returns the mean AUC over folds, or raises
    ValueError for infeasible points (skipped). Ties break toward fewer
    parameters, then lexicographic spec order.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("empty architecture grid")
    results = []
    for cand in candidates:
        try:
            auc = evaluate(cand)
        except ValueError:
            auc = None
        results.append((cand, auc))
    feasible = [(cand, auc) for cand, auc in results if auc is not None]
    if not feasible:
        raise RuntimeError("no feasible grid point")
    best = min(feasible, key=lambda t: (-t[1], n_params_of(t[0]), str(t[0])))
    return best[0], tuple(results)


# ---------------------------------------------------------------------------
# serialization


def save_model(path, kind: str, spec, params, history: TrainHistory | None = None, extra=None):
    """JSON layout: {kind, spec, params, history:{loss, es_auc, ...}, extra}."""
    payload = {
        "kind": kind,
        "spec": asdict(spec),
        "params": [float(v) for v in np.asarray(params).ravel()],
        "history": None
        if history is None
        else {
            "loss": history.loss,
            "es_auc": history.es_auc,
            "best_epoch": history.best_epoch,
            "n_epochs": history.n_epochs,
        },
        "extra": extra or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)


_SPEC_TYPES = {"ann": AnnSpec, "qnn": QnnSpec, "lstm": LstmSpec, "qlstm": QlstmSpec}


def load_model(path):
    """Inverse of save_model; returns (kind, spec, params, payload)."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    kind = payload["kind"]
    spec_cls = _SPEC_TYPES[kind]
    spec_kwargs = dict(payload["spec"])
    if "layer_sizes" in spec_kwargs:
        spec_kwargs["layer_sizes"] = tuple(spec_kwargs["layer_sizes"])
    spec = spec_cls(**spec_kwargs)
    return kind, spec, np.array(payload["params"], dtype=float), payload
