"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np

from affectcl.nn import DenseLayer, network_forward_batch


def layers_from_params(params: list[np.ndarray], activations: list[str]) -> list[DenseLayer]:
    """Rebuild a layer stack from a flat [W0, b0, W1, b1, ...] list."""
    layers = []
    for i, activation in enumerate(activations):
        layers.append(DenseLayer(params[2 * i].copy(), params[2 * i + 1].copy(), activation))
    return layers


def relative_error(analytic: list[np.ndarray], numeric: list[np.ndarray]) -> float:
    """Norm-based relative error between two gradient sets."""
    a = np.concatenate([g.ravel() for g in analytic])
    n = np.concatenate([g.ravel() for g in numeric])
    denom = max(np.linalg.norm(n), 1e-12)
    return float(np.linalg.norm(a - n) / denom)


def quadratic_loss(out: np.ndarray) -> float:
    """Simple deterministic scalar loss: 0.5 * sum(out^2)."""
    return float(0.5 * np.sum(out**2))


def net_quadratic_loss_fn(x: np.ndarray, activations: list[str]):
    """Loss over flat params for finite differencing a layer stack."""

    def fn(params: list[np.ndarray]) -> float:
        layers = layers_from_params(params, activations)
        out, _ = network_forward_batch(x, layers)
        return quadratic_loss(out)

    return fn


def linear_oracle_accuracy(sessions, window_length_s, step_s, modality, epsilon, k=5, seed=0):
    """Participant-disjoint linear readout accuracy on the binary high/low
    state task. Independent of the trained-network path: closed-form ridge
    least squares on standardized window features with a sign readout (the
    small ridge keeps the overlapping-window design numerically sane)."""
    from affectcl.corpus import apply_standardizer, feature_matrix, fit_standardizer
    from affectcl.evaluation import prepare_windows, split_folds

    prepared = prepare_windows(sessions, window_length_s, step_s, modality, epsilon)
    pids = np.asarray([w.participant_id for w in prepared.windows])
    x_all = feature_matrix(prepared.windows)
    y_signed = prepared.downstream * 2.0 - 1.0
    accuracies = []
    for fold in split_folds(sorted(set(pids)), k, seed):
        train = np.isin(pids, fold.train_participants)
        test = np.isin(pids, fold.test_participants)
        mean, std = fit_standardizer(x_all[train])
        x_train = apply_standardizer(x_all[train], mean, std)
        x_test = apply_standardizer(x_all[test], mean, std)
        design = np.column_stack([x_train, np.ones(x_train.shape[0])])
        penalty = 0.01 * x_train.shape[0] * np.eye(design.shape[1])
        penalty[-1, -1] = 0.0  # intercept unpenalized
        coef = np.linalg.solve(design.T @ design + penalty, design.T @ y_signed[train])
        scores = np.column_stack([x_test, np.ones(x_test.shape[0])]) @ coef
        predicted = (scores > 0).astype(float) * 2.0 - 1.0
        accuracies.append(float(np.mean(predicted == y_signed[test])))
    return float(np.mean(accuracies))
