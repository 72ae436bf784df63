import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from roadcsi.errors import InsufficientDataError, RangeError, ShapeError
from roadcsi.estimation import CsiVector, Estimator
from roadcsi.features import (
    FeatureMap,
    PcaModel,
    csi_to_real,
    fit_pca,
    project,
    project_matrix,
    reconstruct,
    select_components,
)


def csi(gains):
    return CsiVector(gains=np.asarray(gains, dtype=complex), estimator=Estimator.LS)


def test_magnitude_mapping():
    assert np.array_equal(csi_to_real(csi(np.ones(5))), np.ones(5))
    assert csi_to_real(csi([3 + 4j]))[0] == 5.0


@given(theta=st.floats(-10, 10), seed=st.integers(0, 2**32 - 1))
def test_magnitude_is_phase_invariant(theta, seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    assert np.allclose(csi_to_real(csi(np.exp(1j * theta) * g)), csi_to_real(csi(g)), rtol=1e-12)


def test_alternative_mappings():
    g = csi([3 + 4j, 0.5j])
    assert np.allclose(csi_to_real(g, FeatureMap.SQUARED_MAGNITUDE), [25.0, 0.25])
    assert np.allclose(csi_to_real(g, "LogMagnitude"), [np.log(5.0), np.log(0.5)])
    assert np.isfinite(csi_to_real(csi([0j]), FeatureMap.LOG_MAGNITUDE)).all()


def test_rank_one_data(rng):
    direction = np.array([3.0, -1.0, 2.0, 0.5])
    x = rng.standard_normal(50)[:, None] * direction + 7.0
    model = fit_pca(x)
    assert model.energy_fractions[0] == pytest.approx(1.0, abs=1e-9)
    assert select_components(model, 0.999) == 1
    assert select_components(model, 1.0) == 1


def test_isotropic_2d_gaussian(rng):
    model = fit_pca(rng.standard_normal((10_000, 2)))
    assert np.all(np.abs(model.energy_fractions - 0.5) <= 0.05)


def test_select_components_full_energy_counts_nonzero(rng):
    basis = np.linalg.qr(rng.standard_normal((6, 6)))[0][:, :3]
    x = rng.standard_normal((40, 3)) @ basis.T
    model = fit_pca(x)
    assert np.count_nonzero(model.eigenvalues) == 3
    assert select_components(model, 1.0) == 3


def test_select_components_smallest_d():
    model = PcaModel(
        mean=np.zeros(4), eigenvalues=np.array([6.0, 3.0, 1.0, 0.0]),
        eigenvectors=np.eye(4), energy_fractions=np.array([0.6, 0.3, 0.1, 0.0]),
    )
    assert select_components(model, 0.5) == 1
    assert select_components(model, 0.6) == 1
    assert select_components(model, 0.61) == 2
    assert select_components(model, 0.95) == 3
    with pytest.raises(RangeError):
        select_components(model, 0.0)


def test_pca_input_errors():
    with pytest.raises(InsufficientDataError):
        fit_pca([[1.0, 2.0]])
    with pytest.raises(ShapeError):
        fit_pca([[1.0, 2.0], [1.0, 2.0, 3.0]])


def test_projection_of_mean_is_zero(rng):
    model = fit_pca(rng.standard_normal((30, 5)))
    fv = project(model, model.mean, 3, capture_id=4)
    assert np.array_equal(fv.scores, np.zeros(3))
    assert fv.capture_id == 4
    with pytest.raises(RangeError):
        project(model, model.mean, 6)
    with pytest.raises(RangeError):
        project(model, model.mean, 0)
    with pytest.raises(ShapeError):
        project(model, np.zeros(4), 2)


def test_full_reconstruction(rng):
    x = rng.standard_normal((25, 8)) * np.arange(1, 9)
    model = fit_pca(x)
    scores = project_matrix(model, x, 8)
    assert np.allclose(reconstruct(model, scores) - model.mean, x - model.mean, atol=1e-8)


def test_score_variance_equals_eigenvalue(rng):
    x = rng.standard_normal((2000, 6)) @ rng.standard_normal((6, 6))
    model = fit_pca(x)
    scores = project_matrix(model, x, 6)
    assert np.var(scores[:, 0], ddof=1) == pytest.approx(model.eigenvalues[0], rel=0.01)


def test_sign_convention(rng):
    model = fit_pca(rng.standard_normal((100, 7)))
    for j in range(7):
        v = model.eigenvectors[:, j]
        assert v[np.argmax(np.abs(v))] >= 0


def test_json_round_trip(rng):
    model = fit_pca(rng.standard_normal((20, 4)))
    again = PcaModel.from_dict(model.to_dict())
    for name in ("mean", "eigenvalues", "eigenvectors", "energy_fractions"):
        assert np.array_equal(getattr(model, name), getattr(again, name))


samples = arrays(
    np.float64,
    st.tuples(st.integers(3, 30), st.integers(2, 6)),
    elements=st.floats(-100, 100, allow_nan=False, allow_infinity=False),
)


def _spread(x):
    return np.ptp(x, axis=0).max() > 1e-3


@given(x=samples)
@settings(max_examples=60, deadline=None)
def test_pca_invariants(x):
    if not _spread(x):
        return
    model = fit_pca(x)
    assert np.all(np.diff(model.eigenvalues) <= 0)
    assert np.all(model.eigenvalues >= 0)
    assert model.energy_fractions.sum() == pytest.approx(1.0, abs=1e-9)
    gram = model.eigenvectors.T @ model.eigenvectors
    assert np.allclose(gram, np.eye(x.shape[1]), atol=1e-8)
    cov = np.cov(x, rowvar=False)
    assert model.eigenvalues.sum() == pytest.approx(np.trace(cov), rel=1e-8, abs=1e-9)


@given(x=samples)
@settings(max_examples=60, deadline=None)
def test_scores_are_decorrelated(x):
    if not _spread(x):
        return
    model = fit_pca(x)
    keep = int(np.count_nonzero(model.eigenvalues > 1e-6 * model.eigenvalues[0]))
    scores = project_matrix(model, x, model.n_components)[:, :keep]
    cov = np.cov(scores, rowvar=False).reshape(keep, keep)
    sd = np.sqrt(np.diag(cov))
    corr = cov / np.outer(sd, sd)
    off = corr - np.diag(np.diag(corr))
    assert np.max(np.abs(off), initial=0.0) <= 1e-6


def test_permutation_invariance(rng):
    x = rng.standard_normal((60, 5)) @ np.diag([5, 4, 3, 2, 1])
    a = fit_pca(x)
    perm = rng.permutation(60)
    b = fit_pca(x[perm])
    assert np.allclose(a.eigenvalues, b.eigenvalues, rtol=1e-10)
    signs = np.sign(np.sum(a.eigenvectors * b.eigenvectors, axis=0))
    assert np.allclose(a.eigenvectors, b.eigenvectors * signs, atol=1e-8)
    assert np.allclose(project_matrix(a, x, 5), project_matrix(b, x, 5) * signs, atol=1e-8)


@given(c=st.floats(0.01, 100.0))
@settings(max_examples=30)
def test_scaling_invariance(c):
    rng = np.random.default_rng(5)
    x = rng.standard_normal((40, 4)) @ np.diag([4.0, 2.0, 1.0, 0.5])
    a, b = fit_pca(x), fit_pca(c * x)
    assert np.allclose(b.eigenvalues, c**2 * a.eigenvalues, rtol=1e-9)
    assert np.allclose(b.energy_fractions, a.energy_fractions, atol=1e-9)


def test_calibrated_detection_energy(detection_run):
    _, _, result = detection_run
    assert result.pca.energy_fractions[0] > 0.9
    assert select_components(result.pca, 0.999) <= 3
