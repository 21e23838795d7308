"""Epsilon-SVR via SMO: training, prediction, tuning, calibration selection."""

import io

import cvxopt
import numpy as np
import pytest

from gazefit import (
    GazeRegressor,
    SvrModel,
    SvrParams,
    load_regressor,
    predict,
    predict_angles,
    save_regressor,
    select_calibration,
    train,
    train_gaze_regressor,
    tune,
)
from gazefit.svr import default_grid, kernel_matrix, kkt_gap

cvxopt.solvers.options["show_progress"] = False

_QP_OPTIONS = {"show_progress": False, "abstol": 1e-10, "reltol": 1e-10, "feastol": 1e-10}


def qp_reference(x, y, c, eps, kernel, gamma):
    """Dense QP solution of the epsilon-SVR dual, independent of the SMO code.

    Variables z = (alpha, alpha*); minimizes 1/2 z' P z + q' z with
    P = [[K, -K], [-K, K]], q = (eps - y, eps + y), box 0 <= z <= C and the
    balance constraint sum(alpha) = sum(alpha*).  The bias is the equality
    constraint's multiplier.
    """
    n = len(y)
    k = kernel_matrix(x, x, kernel, gamma)
    p = np.block([[k, -k], [-k, k]])
    q = np.concatenate([eps - y, eps + y])
    g = np.vstack([-np.eye(2 * n), np.eye(2 * n)])
    h = np.concatenate([np.zeros(2 * n), np.full(2 * n, c)])
    a = np.concatenate([np.ones(n), -np.ones(n)])[None, :]
    sol = cvxopt.solvers.qp(
        cvxopt.matrix(p),
        cvxopt.matrix(q),
        cvxopt.matrix(g),
        cvxopt.matrix(h),
        cvxopt.matrix(a),
        cvxopt.matrix(np.zeros(1)),
        options=_QP_OPTIONS,
    )
    beta = np.array(sol["x"]).ravel()
    beta = beta[:n] - beta[n:]
    bias = float(np.array(sol["y"]).ravel()[0])
    return beta, bias, float(sol["primal objective"])


def random_instance(rng, n=None):
    n = n or int(rng.integers(5, 21))
    d = int(rng.integers(1, 4))
    x = rng.normal(size=(n, d))
    y = np.sin(x[:, 0]) + 0.3 * x[:, -1] + 0.1 * rng.normal(size=n)
    c = float(rng.uniform(0.5, 20.0))
    eps = float(rng.uniform(0.01, 0.2))
    gamma = float(rng.uniform(0.2, 2.0))
    return x, y, c, eps, gamma


def test_constant_targets_give_zero_support_vectors():
    x = np.linspace(0, 1, 10)[:, None]
    y = np.full(10, 3.25)
    m = train(x, y, SvrParams(epsilon=0.01))
    assert m.n_support == 0
    assert m.bias == 3.25
    assert m.iterations == 0
    np.testing.assert_array_equal(predict(m, x), np.full(10, 3.25))


def test_linear_function_recovered_with_linear_kernel(rng):
    x = rng.uniform(-1, 1, size=(40, 2))
    y = 2.0 * x[:, 0]
    m = train(x, y, SvrParams(kernel="linear", C=1e4, epsilon=1e-4, tol=1e-8))
    held_out = rng.uniform(-1, 1, size=(20, 2))
    np.testing.assert_allclose(predict(m, held_out), 2.0 * held_out[:, 0], atol=1e-3)


def test_smo_matches_dense_qp_on_small_instances(rng):
    for _ in range(8):
        x, y, c, eps, gamma = random_instance(rng)
        params = SvrParams(
            kernel="rbf", gamma=gamma, C=c, epsilon=eps, tol=1e-10, standardize=False
        )
        m = train(x, y, params)
        beta, bias, obj = qp_reference(x, y, c, eps, "rbf", gamma)
        assert abs(m.dual_objective - obj) <= 1e-6
        xt = rng.normal(size=(10, x.shape[1]))
        reference = kernel_matrix(xt, x, "rbf", gamma) @ beta + bias
        np.testing.assert_allclose(predict(m, xt), reference, atol=1e-4)


def test_kkt_conditions_hold_after_training(rng):
    for _ in range(5):
        x, y, c, eps, gamma = random_instance(rng)
        params = SvrParams(
            kernel="rbf", gamma=gamma, C=c, epsilon=eps, tol=1e-4, standardize=False
        )
        m = train(x, y, params)
        assert kkt_gap(m, x, y) < 1e-3
        resid = y - predict(m, x)
        # reconstruct the full dual coefficient vector by matching support
        # vectors back to their training rows (stored unstandardized here)
        full = np.zeros(len(y))
        for sv, cf in zip(m.support_vectors, m.coefficients):
            idx = int(np.argmin(np.linalg.norm(x - sv, axis=1)))
            full[idx] += cf
        # points strictly inside the tube carry no dual weight
        inside = np.abs(resid) < eps - 1e-3
        assert np.all(np.abs(full[inside]) <= 1e-9)
        # bound support vectors sit on or outside the tube
        at_bound = np.abs(np.abs(full) - c) <= 1e-9
        assert np.all(np.abs(resid[at_bound]) >= eps - 1e-3)


def test_prediction_invariant_to_training_order(rng):
    x, y, c, eps, gamma = random_instance(rng, n=18)
    params = SvrParams(kernel="rbf", gamma=gamma, C=c, epsilon=eps, tol=1e-8)
    m1 = train(x, y, params)
    perm = rng.permutation(len(y))
    m2 = train(x[perm], y[perm], params)
    xt = rng.normal(size=(12, x.shape[1]))
    np.testing.assert_allclose(predict(m1, xt), predict(m2, xt), atol=1e-6)


def test_training_twice_is_bit_stable(rng):
    x, y, c, eps, gamma = random_instance(rng, n=15)
    params = SvrParams(kernel="rbf", gamma=gamma, C=c, epsilon=eps)
    m1 = train(x, y, params)
    m2 = train(x, y, params)
    np.testing.assert_array_equal(m1.coefficients, m2.coefficients)
    assert m1.bias == m2.bias


def test_predict_zero_support_vectors_returns_bias():
    x = np.zeros((5, 2))
    y = np.full(5, 1.5)
    m = train(x, y, SvrParams(epsilon=0.1))
    assert predict(m, np.array([9.0, -4.0])) == 1.5


def test_predict_interpolates_training_points_within_tube(rng):
    x = rng.uniform(-1, 1, size=(30, 2))
    y = 2.0 * x[:, 0]
    eps = 1e-4
    m = train(x, y, SvrParams(kernel="linear", C=1e4, epsilon=eps, tol=1e-8))
    pred = predict(m, x)
    assert np.max(np.abs(pred - y)) <= eps + 1e-6


def test_predict_matches_kernel_sum_oracle(rng):
    x, y, c, eps, gamma = random_instance(rng, n=16)
    params = SvrParams(kernel="rbf", gamma=gamma, C=c, epsilon=eps, standardize=False)
    m = train(x, y, params)
    xt = rng.normal(size=(7, x.shape[1]))
    expected = []
    for t in xt:
        acc = m.bias
        for sv, cf in zip(m.support_vectors, m.coefficients):
            acc += cf * np.exp(-gamma * np.sum((t - sv) ** 2))
        expected.append(acc)
    np.testing.assert_allclose(predict(m, xt), expected, rtol=1e-10)


def test_predict_standardization_round_trips_through_model(rng):
    x = rng.normal(loc=100.0, scale=25.0, size=(25, 3))
    y = 0.01 * x[:, 0] + rng.normal(0, 0.01, 25)
    m = train(x, y, SvrParams(kernel="rbf", C=10.0, epsilon=0.005, standardize=True))
    pred = predict(m, x)
    assert np.mean(np.abs(pred - y)) < 0.05


def test_predict_dimension_mismatch_rejected(rng):
    x, y, *_ = random_instance(rng, n=10)
    m = train(x, y)
    with pytest.raises(ValueError):
        predict(m, np.zeros((3, x.shape[1] + 1)))


def test_train_input_validation():
    with pytest.raises(ValueError):
        train(np.zeros((1, 2)), np.zeros(1))
    with pytest.raises(ValueError):
        train(np.zeros((4, 2)), np.zeros(3))
    with pytest.raises(ValueError):
        SvrParams(kernel="poly")
    with pytest.raises(ValueError):
        SvrParams(C=-1.0)


def test_tune_single_point_grid_returns_it(rng):
    x = rng.uniform(-1, 1, size=(12, 2))
    y = x[:, 0]
    point = (3.0, 0.02, 0.7)
    assert tune(x, y, [point]) == point


def test_tune_ties_break_toward_earlier_grid_entries(rng):
    x = rng.uniform(-1, 1, size=(12, 2))
    y = x[:, 0]
    # linear kernel ignores gamma, so both grid points produce the same
    # cross-validation error and the first must win
    grid = [(1.0, 0.01, 0.5), (1.0, 0.01, 2.0)]
    won = tune(x, y, grid, SvrParams(kernel="linear"))
    assert won == (1.0, 0.01, 0.5)


def test_tune_winner_beats_every_other_grid_point(rng):
    x = rng.uniform(-1, 1, size=(24, 2))
    y = 2.0 * x[:, 0] + 0.02 * rng.normal(size=24)
    grid = [(0.1, 0.1, 0.5), (100.0, 0.01, 0.5), (1.0, 0.05, 2.0)]
    params = SvrParams(kernel="rbf")
    won = tune(x, y, grid, params)

    def loo_error(c, eps, gamma):
        errs = []
        for i in range(len(y)):
            keep = np.arange(len(y)) != i
            m = train(
                x[keep],
                y[keep],
                SvrParams(kernel="rbf", gamma=gamma, C=c, epsilon=eps),
            )
            errs.append(abs(float(predict(m, x[i])) - y[i]))
        return float(np.mean(errs))

    scores = {g: loo_error(*g) for g in grid}
    assert scores[won] <= min(scores.values()) + 1e-12


def test_tune_rejects_empty_grid_and_tiny_datasets(rng):
    x = rng.uniform(-1, 1, size=(12, 2))
    with pytest.raises(ValueError):
        tune(x, x[:, 0], [])
    with pytest.raises(ValueError):
        tune(x[:2], x[:2, 0])


def test_default_grid_covers_declared_ranges():
    grid = default_grid("rbf")
    cs = sorted({g[0] for g in grid})
    assert cs[0] == 0.25 and cs[-1] == 64.0
    assert sorted({g[1] for g in grid}) == [0.005, 0.01, 0.02]
    assert all(g[2] is not None for g in grid)
    assert all(g[2] is None for g in default_grid("linear"))


def test_select_k_equals_n_returns_all_indices(rng):
    pts = rng.uniform(-1, 1, size=(6, 2))
    assert sorted(select_calibration(pts, 6)) == list(range(6))


def test_select_one_from_square_takes_lowest_index():
    square = np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])
    assert select_calibration(square, 1) == [0]


def test_select_two_on_a_line_takes_the_endpoints():
    line = np.stack([np.linspace(0, 1, 7), np.zeros(7)], axis=1)
    assert sorted(select_calibration(line, 2)) == [0, 6]


def test_select_rejects_k_out_of_range(rng):
    pts = rng.uniform(-1, 1, size=(5, 2))
    with pytest.raises(ValueError):
        select_calibration(pts, 6)
    with pytest.raises(ValueError):
        select_calibration(pts, 0)


def test_select_min_pairwise_distance_non_increasing(rng):
    pts = rng.uniform(-1, 1, size=(40, 2))
    last = np.inf
    for k in range(2, 20):
        chosen = pts[select_calibration(pts, k)]
        d = np.linalg.norm(chosen[:, None, :] - chosen[None, :, :], axis=2)
        np.fill_diagonal(d, np.inf)
        min_dist = d.min()
        assert min_dist <= last + 1e-12
        last = min_dist


def test_select_is_deterministic(rng):
    pts = rng.uniform(-1, 1, size=(25, 2))
    assert select_calibration(pts, 8) == select_calibration(pts, 8)


def test_gaze_regressor_round_trip_is_bit_identical(rng):
    feats = rng.normal(size=(30, 4))
    targets = np.stack(
        [0.3 * feats[:, 0] + 0.05 * rng.normal(size=30), -0.2 * feats[:, 1]], axis=1
    )
    reg = train_gaze_regressor(feats, targets, SvrParams(C=5.0, epsilon=0.01), "pcec")
    buf = io.StringIO()
    save_regressor(reg, buf)
    buf.seek(0)
    back = load_regressor(buf)
    assert back.feature_config == "pcec"
    probe = rng.normal(size=(9, 4))
    np.testing.assert_array_equal(predict_angles(reg, probe), predict_angles(back, probe))


def test_load_rejects_corrupt_header(rng):
    with pytest.raises(ValueError):
        load_regressor(io.StringIO("not a model\n"))
