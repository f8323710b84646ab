"""Quantum vs. classical machine-learning benchmarks for financial prediction.

Library layout:

- ``marketdata``: CSV price loading, calendar alignment, return series
- ``features``: indicators, feature regimes, scaling, labels, split plans
- ``qsim``: exact statevector simulation with parameter-shift gradients
- ``qkernel``: quantum feature maps and fidelity kernel matrices
- ``neural``: ANN/QNN and LSTM/QLSTM models with a shared training loop
- ``svr``: epsilon-insensitive SVR (SMO solver) and hyperparameter search
- ``garch``: GARCH(1,1) quasi-maximum-likelihood baseline
- ``backtest``: signal thresholds, equity simulation, threshold calibration
- ``metrics``: classification, trading, forecasting, and regime statistics
- ``volstudy``: expanding-window volatility forecasting orchestration
- ``synthetic``: seeded synthetic price data with a planted signal
- ``bench``: study orchestration, config parsing, reports, CLI
"""

__version__ = "0.1.0"
