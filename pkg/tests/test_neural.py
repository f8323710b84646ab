import numpy as np
import pytest

from qmlbench import neural
from qmlbench.neural import (
    AnnClassifier,
    AnnSpec,
    LstmClassifier,
    LstmSpec,
    QlstmClassifier,
    QlstmSpec,
    QnnClassifier,
    QnnSpec,
    TrainConfig,
    ann_forward,
    architecture_search,
    inverse_frequency_weights,
    lstm_step,
    qlstm_step,
    qnn_forward,
    qnn_grid,
    train,
    weighted_bce,
)


# ---------------------------------------------------------------------------
# parameter counts


@pytest.mark.parametrize("sizes,count", [((3, 11, 1), 56), ((7, 32, 16, 1), 801), ((64, 32, 1), 2113)])
def test_published_ann_parameter_counts(sizes, count):
    assert AnnSpec(sizes).n_params == count


def test_qlstm_counts_in_band():
    for h in (3, 4, 5):
        for depth in (2, 3, 4, 5, 6):
            n = QlstmSpec(h, depth).n_params
            assert 100 <= n <= 1000


def test_qnn_grid_sizes():
    assert len(qnn_grid("angle", n_qubits=3)) == 24
    assert len(qnn_grid("amplitude")) == 120


# ---------------------------------------------------------------------------
# forward anchors


def test_ann_zero_weights_gives_half():
    spec = AnnSpec((4, 6, 1))
    assert ann_forward(spec, np.zeros(spec.n_params), np.ones(4)) == pytest.approx(0.5)


def test_qnn_sq_identity_circuit_anchor():
    spec = QnnSpec("SQ", "angle", depth=1, n_qubits=2)
    params = np.zeros(spec.n_params(2))
    assert qnn_forward(spec, params, np.zeros(2)) == pytest.approx(1.0)


def test_qnn_mq_zero_readout_gives_half():
    spec = QnnSpec("MQ", "angle", depth=1, n_qubits=2)
    params = np.zeros(spec.n_params(2))  # readout weights and bias zero
    assert qnn_forward(spec, params, np.array([0.3, 0.8])) == pytest.approx(0.5)


def test_qnn_sq_single_qubit_ry_pi_anchor():
    spec = QnnSpec("SQ", "angle", depth=1, n_qubits=1)
    params = np.zeros(spec.n_params(1))
    params[0] = np.pi  # the single RY layer angle
    assert qnn_forward(spec, params, np.zeros(1)) == pytest.approx(0.0, abs=1e-12)


def test_qnn_feasibility_checks():
    with pytest.raises(ValueError):
        QnnClassifier(QnnSpec("SQ", "angle", 1, 3), n_features=4)
    with pytest.raises(ValueError):
        QnnClassifier(QnnSpec("MQ", "amplitude", 1, 2), n_features=5)  # 2^2 < 5
    # hybrid projection lifts both restrictions
    QnnClassifier(QnnSpec("HybridSQ", "angle", 1, 3), n_features=4)
    QnnClassifier(QnnSpec("HybridMQ", "amplitude", 1, 2), n_features=5)


def test_outputs_in_unit_interval():
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 1, (20, 3))
    for arch in neural.QNN_ARCHS:
        model = QnnClassifier(QnnSpec(arch, "angle", 2, 3), 3, seed=1)
        p = model.predict_proba(X)
        assert np.all((p >= 0) & (p <= 1))


def test_sq_readout_is_rescaled_expectation():
    from qmlbench import qsim

    spec = QnnSpec("SQ", "angle", 2, 3)
    model = QnnClassifier(spec, 3, seed=3)
    rng = np.random.default_rng(1)
    X = rng.uniform(0, 1, (5, 3))
    _, theta, _, _ = model._split(model.params)
    state = qsim.angle_encode(X) @ qsim.evolution_matrix(model._circuit, theta)
    expect = qsim.expectation_z(state, 0)
    assert np.allclose(model.predict_proba(X), (expect + 1) / 2)


# ---------------------------------------------------------------------------
# weighted BCE


def test_wbce_perfect_predictions():
    assert weighted_bce([1 - 1e-9, 1e-9], [1.0, 0.0]) <= 1e-6


def test_wbce_half_is_log_two():
    assert weighted_bce([0.5] * 4, [1.0, 0.0, 1.0, 0.0]) == pytest.approx(np.log(2))


def test_wbce_weight_linearity():
    probs = np.array([0.7, 0.6, 0.8])
    labels = np.ones(3)
    assert weighted_bce(probs, labels, (1.0, 2.0)) == pytest.approx(
        2.0 * weighted_bce(probs, labels, (1.0, 1.0))
    )


def test_inverse_frequency_weights():
    w0, w1 = inverse_frequency_weights(np.array([1.0, 1.0, 1.0, 0.0]))
    assert w1 == pytest.approx(4 / 6)
    assert w0 == pytest.approx(4 / 2)
    assert inverse_frequency_weights(np.ones(5)) == (1.0, 1.0)


# ---------------------------------------------------------------------------
# recurrent cells


def test_lstm_step_forget_gate_preserves_cell():
    h = 3
    wx = np.zeros((4 * h, 2))
    wh = np.zeros((4 * h, h))
    b = np.concatenate([np.full(h, -50.0), np.full(h, 50.0), np.zeros(h), np.zeros(h)])
    # i ~ 0, f ~ 1 -> c_t = c_prev
    c_prev = np.array([[0.3, -0.2, 0.5]])
    h_out, c_out = lstm_step(wx, wh, b, np.ones((1, 2)), np.zeros((1, h)), c_prev)
    assert np.allclose(c_out, c_prev, atol=1e-12)


def test_lstm_step_zero_weights_zero_hidden():
    h = 2
    h_out, c_out = lstm_step(
        np.zeros((4 * h, 3)), np.zeros((4 * h, h)), np.zeros(4 * h),
        np.ones((1, 3)), np.zeros((1, h)), np.zeros((1, h)),
    )
    assert np.allclose(c_out, 0.0) and np.allclose(h_out, 0.0)


def test_qlstm_step_gate_algebra_with_stub_blocks():
    q = 3

    def block_fn(name, z):
        # force f ~ 1 and i ~ 0 regardless of input
        if name == "f":
            return np.full(z.shape, 50.0)
        if name == "i":
            return np.full(z.shape, -50.0)
        if name == "h":
            return z  # pass-through for shape checking
        return np.zeros_like(z)

    c_prev = np.array([[0.4, -0.1, 0.2]])
    w_in = np.zeros((q, q + 2))
    h_out, c_out = qlstm_step(block_fn, w_in, np.zeros(q), np.ones((1, 2)),
                              np.zeros((1, q)), c_prev)
    assert np.allclose(c_out, c_prev, atol=1e-12)
    assert h_out.shape == (1, q)


def test_qlstm_sequence_shape_contract():
    model = QlstmClassifier(QlstmSpec(4, 2), seed=0)
    X = np.random.default_rng(0).uniform(0, 1, (7, 10, 4))
    probs = model.predict_proba(X)
    assert probs.shape == (7,)
    assert np.all((probs >= 0) & (probs <= 1))


def test_qlstm_deterministic_forward():
    model = QlstmClassifier(QlstmSpec(3, 2), seed=5)
    X = np.random.default_rng(1).uniform(0, 1, (4, 6, 4))
    assert np.array_equal(model.predict_proba(X), model.predict_proba(X))


# ---------------------------------------------------------------------------
# gradient checks (finite-difference oracle)


def _gradcheck(model, X, y, weights=(1.3, 0.7), h=1e-5):
    _, grad = model.loss_grad(X, y, weights)
    base = model.params.copy()
    fd = np.empty_like(grad)
    for k in range(len(base)):
        model.params = base.copy()
        model.params[k] += h
        up = weighted_bce(model.predict_proba(X), y, weights)
        model.params = base.copy()
        model.params[k] -= h
        dn = weighted_bce(model.predict_proba(X), y, weights)
        fd[k] = (up - dn) / (2 * h)
    model.params = base
    return np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-12)


@pytest.fixture(scope="module")
def toy8():
    rng = np.random.default_rng(42)
    X = rng.uniform(0.1, 1, (8, 3))
    y = (rng.random(8) > 0.5).astype(float)
    return X, y


def test_ann_gradients_match_fd(toy8):
    X, y = toy8
    assert _gradcheck(AnnClassifier(AnnSpec((3, 5, 1)), seed=1), X, y) < 1e-5


@pytest.mark.parametrize("arch", neural.QNN_ARCHS)
@pytest.mark.parametrize("encoding", ["angle", "amplitude"])
def test_qnn_gradients_match_fd(arch, encoding, toy8):
    X, y = toy8
    n_feat = 3
    model = QnnClassifier(QnnSpec(arch, encoding, 2, 3), n_feat, seed=2)
    assert _gradcheck(model, X, y) < 1e-5


def test_lstm_gradients_match_fd():
    rng = np.random.default_rng(3)
    X = rng.uniform(0, 1, (8, 4, 4))
    y = (rng.random(8) > 0.5).astype(float)
    assert _gradcheck(LstmClassifier(LstmSpec(3, 2), seed=4), X, y) < 1e-5


def test_qlstm_gradients_match_fd():
    rng = np.random.default_rng(5)
    X = rng.uniform(0, 1, (8, 4, 4))
    y = (rng.random(8) > 0.5).astype(float)
    assert _gradcheck(QlstmClassifier(QlstmSpec(3, 2), seed=6), X, y) < 1e-5


# ---------------------------------------------------------------------------
# training loop


def _separable_toy(n=120, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (n, 2))
    y = (X[:, 0] > X[:, 1]).astype(float)
    return X, y


def test_train_separable_toy_reaches_full_accuracy():
    X, y = _separable_toy()
    # logistic-regression oracle confirms separability first
    sklearn_linear = pytest.importorskip("sklearn.linear_model")
    oracle = sklearn_linear.LogisticRegression(C=1e6).fit(X[:90], y[:90])
    assert oracle.score(X[:90], y[:90]) == 1.0

    model = AnnClassifier(AnnSpec((2, 8, 1)), seed=0)
    cfg = TrainConfig(learning_rate=1.0, max_epochs=200, patience=200)
    train(model, X, y, np.arange(90), np.arange(90, 120), cfg)
    train_acc = np.mean((model.predict_proba(X[:90]) > 0.5) == y[:90])
    assert train_acc == 1.0


def test_flat_es_auc_stops_at_patience():
    X, y = _separable_toy(60, seed=1)
    model = AnnClassifier(AnnSpec((2, 4, 1)), seed=1)
    cfg = TrainConfig(learning_rate=0.0, max_epochs=500, patience=30)  # nothing changes
    _, history = train(model, X, y, np.arange(40), np.arange(40, 60), cfg)
    assert history.n_epochs == 31  # one improving epoch plus the patience window
    assert history.best_epoch == 1


def test_train_restores_best_params():
    X, y = _separable_toy(80, seed=2)
    model = AnnClassifier(AnnSpec((2, 4, 1)), seed=2)
    cfg = TrainConfig(learning_rate=0.7, max_epochs=60, patience=10)
    best, history = train(model, X, y, np.arange(60), np.arange(60, 80), cfg)
    assert np.array_equal(best, model.params)
    assert history.best_epoch <= history.n_epochs


def test_train_determinism_bitwise():
    X, y = _separable_toy(60, seed=3)
    histories = []
    for _ in range(2):
        model = QnnClassifier(QnnSpec("HybridMQ", "angle", 1, 2), 2, seed=7)
        _, h = train(model, X, y, np.arange(45), np.arange(45, 60),
                     TrainConfig(learning_rate=0.4, max_epochs=25, patience=30))
        histories.append(h)
    assert histories[0].loss == histories[1].loss
    assert histories[0].es_auc == histories[1].es_auc


def test_train_reports_divergence():
    X, y = _separable_toy(40, seed=4)
    model = AnnClassifier(AnnSpec((2, 3, 1)), seed=0)
    model.params[:] = np.nan
    with pytest.raises(RuntimeError, match="diverged"):
        train(model, X, y, np.arange(30), np.arange(30, 40), TrainConfig())


def test_train_rejects_overlapping_slices():
    X, y = _separable_toy(40, seed=5)
    model = AnnClassifier(AnnSpec((2, 3, 1)), seed=0)
    with pytest.raises(ValueError):
        train(model, X, y, np.arange(30), np.arange(25, 40), TrainConfig())


# ---------------------------------------------------------------------------
# architecture search


def test_search_tie_break_prefers_fewer_params():
    a = AnnSpec((3, 20, 1))
    b = AnnSpec((3, 5, 1))  # fewer parameters
    best, results = architecture_search([a, b], lambda s: 0.7, lambda s: s.n_params)
    assert best == b
    assert len(results) == 2


def test_search_single_candidate():
    only = AnnSpec((3, 5, 1))
    best, _ = architecture_search([only], lambda s: 0.6, lambda s: s.n_params)
    assert best == only


def test_search_skips_infeasible():
    specs = [QnnSpec("SQ", "amplitude", 1, 2), QnnSpec("HybridSQ", "amplitude", 1, 2)]

    def evaluate(spec):
        QnnClassifier(spec, n_features=5, seed=0)  # raises for the non-hybrid point
        return 0.6

    best, results = architecture_search(specs, evaluate, lambda s: s.n_params(5))
    assert best == specs[1]
    assert results[0][1] is None


def test_search_empty_grid():
    with pytest.raises(ValueError):
        architecture_search([], lambda s: 0.5, lambda s: 0)


# ---------------------------------------------------------------------------
# serialization


def test_model_json_roundtrip(tmp_path):
    X, y = _separable_toy(50, seed=6)
    model = QnnClassifier(QnnSpec("MQ", "angle", 2, 2), 2, seed=9)
    _, history = train(model, X, y, np.arange(40), np.arange(40, 50),
                       TrainConfig(learning_rate=0.3, max_epochs=10, patience=30))
    path = tmp_path / "model.json"
    neural.save_model(path, "qnn", model.spec, model.params, history, extra={"note": "test"})
    kind, spec, params, payload = neural.load_model(path)
    assert kind == "qnn" and spec == model.spec
    assert np.allclose(params, model.params)
    assert payload["history"]["loss"] == history.loss
    rebuilt = QnnClassifier(spec, 2, params=params)
    assert np.array_equal(rebuilt.predict_proba(X), model.predict_proba(X))
