"""Losses, gradients, and the client update step.

Gradients are checked against central finite differences (the oracle knows
nothing about the closed forms), and the quadratic families additionally
against their hand-derived expressions.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from feo2.config import FeO2Config
from feo2.models import (
    ClientRecord,
    LabeledExamples,
    LossKind,
    NumericFailure,
    PointSamples,
    RegressionSamples,
    as_vector,
    client_update,
    local_gradient,
    local_loss,
    model_dim_for,
)
from feo2.rng import stream

from oracles import numeric_gradient

finite_floats = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def _point(rng, n_s=6, d=3):
    return PointSamples(rng.normal(size=(n_s, d)))


def _regression(rng, n_s=8, d=3):
    return RegressionSamples(rng.normal(size=(n_s, d)), rng.normal(size=n_s))


def _labeled(rng, n=12, d=4, classes=3):
    return LabeledExamples(rng.normal(size=(n, d)), rng.integers(0, classes, size=n))


def test_as_vector_rejects_nonfinite():
    with pytest.raises(ValueError):
        as_vector([1.0, np.inf])


def test_point_loss_closed_form():
    data = PointSamples(np.array([[1.0, 3.0], [3.0, 5.0]]))
    theta = np.array([0.0, 0.0])
    # mean is (2, 4); loss = 0.5 * (4 + 16)
    assert local_loss(theta, data, LossKind.POINT_ESTIMATION) == pytest.approx(10.0, abs=1e-14)
    g = local_gradient(theta, data, LossKind.POINT_ESTIMATION)
    assert np.allclose(g, [-2.0, -4.0], atol=1e-14)


def test_regression_loss_normalization():
    rng = stream(5, "t")
    data = _regression(rng, n_s=10, d=2)
    theta = rng.normal(size=2)
    resid = data.features @ theta - data.responses
    assert local_loss(theta, data, LossKind.LINEAR_REGRESSION) == pytest.approx(
        float(resid @ resid) / 20.0
    )


@pytest.mark.parametrize("kind", list(LossKind))
def test_gradient_matches_finite_differences(kind):
    rng = stream(17, "grad", {"point_estimation": 0, "linear_regression": 1, "softmax_classification": 2}[kind.value])
    if kind is LossKind.POINT_ESTIMATION:
        data = _point(rng)
    elif kind is LossKind.LINEAR_REGRESSION:
        data = _regression(rng)
    else:
        data = _labeled(rng)
    theta = rng.normal(size=model_dim_for(data, kind, n_classes=3))
    got = local_gradient(theta, data, kind)
    want = numeric_gradient(lambda t: local_loss(t, data, kind), theta)
    assert np.allclose(got, want, atol=1e-7), np.abs(got - want).max()


def test_softmax_probs_are_probabilities():
    from feo2.models import _softmax_probs

    rng = stream(3, "probs")
    data = _labeled(rng, n=30, d=5, classes=4)
    theta = rng.normal(size=4 * 6) * 50  # large logits stress the shift
    p = _softmax_probs(theta, data.features)
    assert np.all(p >= 0)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)


def test_regression_gradient_zero_at_least_squares_solution():
    rng = stream(9, "ls")
    q, r = np.linalg.qr(rng.normal(size=(12, 4)))
    F = np.sqrt(12) * q * np.sign(np.diag(r))
    phi = rng.normal(size=4)
    data = RegressionSamples(F, F @ phi)
    g = local_gradient(phi, data, LossKind.LINEAR_REGRESSION)
    assert np.allclose(g, 0.0, atol=1e-12)


def test_dimension_mismatch_raises():
    data = PointSamples(np.ones((4, 2)))
    with pytest.raises(ValueError):
        local_loss(np.zeros(5), data, LossKind.POINT_ESTIMATION)
    with pytest.raises(ValueError):
        local_loss(np.zeros(3), _regression(stream(0, "x"), d=2), LossKind.LINEAR_REGRESSION)


@given(
    obs=hnp.arrays(np.float64, (5, 2), elements=finite_floats),
    theta=hnp.arrays(np.float64, (2,), elements=finite_floats),
)
def test_one_step_full_batch_lands_on_sample_mean(obs, theta):
    """eta = 1, one epoch, full batch: the raw point-estimation delta is exactly
    mean(obs) - theta (before clipping)."""
    client = ClientRecord(0, True, PointSamples(obs))
    cfg = FeO2Config(eta=1.0, epochs=1, batch_size=None)
    delta, b = client_update(theta, client, 1e9, cfg, LossKind.POINT_ESTIMATION)
    assert np.allclose(delta, obs.mean(axis=0) - theta, atol=1e-9)
    assert b == 1


def test_clip_indicator_reflects_raw_norm():
    client = ClientRecord(0, True, PointSamples(np.full((3, 2), 10.0)))
    cfg = FeO2Config(eta=1.0)
    delta, b = client_update(np.zeros(2), client, 0.5, cfg, LossKind.POINT_ESTIMATION)
    assert b == 0
    assert np.linalg.norm(delta) <= 0.5


def test_minibatches_partition_the_data():
    from feo2.models import _batches

    data = _labeled(stream(11, "b"), n=10, d=3, classes=2)
    batches = list(_batches(data, 4, stream(11, "order")))
    assert [b.n for b in batches] == [4, 4, 2]
    seen = np.concatenate([b.features for b in batches])
    assert np.allclose(np.sort(seen, axis=0), np.sort(data.features, axis=0))


def test_minibatch_order_is_stream_determined():
    data = _point(stream(2, "d"), n_s=9, d=2)
    cfg = FeO2Config(eta=0.3, epochs=2, batch_size=3)
    client_a = ClientRecord(0, True, data)
    client_b = ClientRecord(0, True, data)
    da, _ = client_update(np.zeros(2), client_a, 10.0, cfg, LossKind.POINT_ESTIMATION, rng=stream(7, "c"))
    db, _ = client_update(np.zeros(2), client_b, 10.0, cfg, LossKind.POINT_ESTIMATION, rng=stream(7, "c"))
    assert np.array_equal(da, db)


@pytest.mark.filterwarnings("ignore:overflow")
@pytest.mark.filterwarnings("ignore:invalid value")
def test_divergent_training_raises_numeric_failure():
    client = ClientRecord(3, False, _point(stream(1, "nf"), n_s=4, d=2))
    cfg = FeO2Config(eta=4.0, epochs=3000)  # |1 - eta| > 1 compounds to overflow
    with pytest.raises(NumericFailure, match="client 3"):
        client_update(np.zeros(2), client, 1.0, cfg, LossKind.POINT_ESTIMATION)


def test_ditto_initializes_personal_model_from_broadcast():
    from feo2.personalization import DittoConfig

    client = ClientRecord(0, True, _point(stream(8, "di"), n_s=5, d=2))
    cfg = FeO2Config(eta=1.0)
    theta0 = np.array([0.5, -0.25])
    assert client.personalized_model is None
    client_update(theta0, client, 1e6, cfg, LossKind.POINT_ESTIMATION, ditto=DittoConfig(1.0, 1.0))
    # one proximal step with eta_p = 1/(1+lam) from theta0:
    target = (client.dataset.observations.mean(axis=0) + 1.0 * theta0) / 2.0
    assert np.allclose(client.personalized_model, target, atol=1e-12)
