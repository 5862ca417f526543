import numpy as np
import pytest

from otrom.errors import EmptyMatrix, ShapeMismatch, ZeroNorm
from otrom.pod import compute_pod, project, projection_error, reconstruct


class TestComputePod:
    def test_rank_one_from_identical_columns(self):
        col = np.array([1.0, 2.0, -1.0])
        basis = compute_pod(np.column_stack([col, col]), threshold=0.9999)
        assert basis.n_modes == 1
        assert basis.energies()[0] == pytest.approx(1.0)

    def test_identity_equal_energies(self):
        basis = compute_pod(np.eye(3), threshold=0.5)
        assert basis.n_modes == 2  # E(1)=1/3 < 0.5 <= E(2)=2/3

    def test_full_rank_reconstruction_and_sv_oracle(self, rng):
        S = rng.normal(size=(6, 4))
        basis = compute_pod(S, rank=4)
        recon = basis.modes @ (basis.modes.T @ S)
        assert np.linalg.norm(S - recon) <= 1e-10 * np.linalg.norm(S)
        # Gram-eigenvalue oracle plus an independent LAPACK route.
        gram_sv = np.sqrt(np.maximum(np.linalg.eigvalsh(S.T @ S)[::-1], 0.0))
        np.testing.assert_allclose(basis.singular_values, gram_sv, rtol=1e-9)
        np.testing.assert_allclose(
            basis.singular_values,
            np.linalg.svd(S, compute_uv=False), rtol=1e-9)

    def test_orthonormal_modes(self, rng):
        S = rng.normal(size=(20, 7))
        basis = compute_pod(S, threshold=0.9999)
        gram = basis.modes.T @ basis.modes
        np.testing.assert_allclose(gram, np.eye(basis.n_modes), atol=1e-10)

    def test_energy_cumulative_properties(self, rng):
        S = rng.normal(size=(10, 6))
        basis = compute_pod(S, rank=6)
        E = basis.energies()
        assert np.all(np.diff(E) >= -1e-15)
        assert E[-1] == pytest.approx(1.0)

    def test_selector_validation(self):
        S = np.eye(2)
        with pytest.raises(ValueError):
            compute_pod(S)
        with pytest.raises(ValueError):
            compute_pod(S, threshold=0.5, rank=1)
        with pytest.raises(ValueError):
            compute_pod(S, threshold=1.5)
        with pytest.raises(EmptyMatrix):
            compute_pod(np.zeros((0, 0)), rank=1)

    def test_zero_matrix_gives_empty_basis(self):
        basis = compute_pod(np.zeros((5, 3)), threshold=0.9999)
        assert basis.n_modes == 0

    def test_wide_matrix_uses_other_gram_side(self, rng):
        S = rng.normal(size=(4, 9))
        basis = compute_pod(S, rank=4)
        np.testing.assert_allclose(
            basis.singular_values, np.linalg.svd(S, compute_uv=False),
            rtol=1e-9)
        np.testing.assert_allclose(basis.modes.T @ basis.modes, np.eye(4),
                                   atol=1e-10)


class TestProjectReconstruct:
    @pytest.fixture
    def basis(self, rng):
        return compute_pod(rng.normal(size=(12, 5)), rank=3)

    def test_mode_projects_to_unit_vector(self, basis):
        coeffs = project(basis, basis.modes[:, 0])
        np.testing.assert_allclose(coeffs, [1.0, 0.0, 0.0], atol=1e-12)

    def test_orthogonal_vector_projects_to_zero(self, basis, rng):
        v = rng.normal(size=12)
        v -= basis.modes @ (basis.modes.T @ v)
        np.testing.assert_allclose(project(basis, v), 0.0, atol=1e-10)

    def test_linearity(self, basis):
        u = 2.0 * basis.modes[:, 0] + 3.0 * basis.modes[:, 1]
        np.testing.assert_allclose(project(basis, u), [2.0, 3.0, 0.0],
                                   atol=1e-12)

    def test_round_trip_in_span(self, basis, rng):
        u = basis.modes @ rng.normal(size=3)
        np.testing.assert_allclose(reconstruct(basis, project(basis, u)), u,
                                   atol=1e-10)

    def test_shape_mismatch(self, basis):
        with pytest.raises(ShapeMismatch):
            project(basis, np.ones(5))
        with pytest.raises(ShapeMismatch):
            reconstruct(basis, np.ones(7))


class TestProjectionError:
    @pytest.fixture
    def basis(self, rng):
        return compute_pod(rng.normal(size=(10, 4)), rank=2)

    def test_in_span(self, basis, rng):
        u = basis.modes @ rng.normal(size=2)
        assert projection_error(u, basis) <= 1e-10

    def test_orthogonal(self, basis, rng):
        v = rng.normal(size=10)
        v -= basis.modes @ (basis.modes.T @ v)
        assert projection_error(v, basis) == pytest.approx(1.0, abs=1e-10)

    def test_pythagoras(self, basis, rng):
        v = rng.normal(size=10)
        v -= basis.modes @ (basis.modes.T @ v)
        v /= np.linalg.norm(v)
        u = basis.modes[:, 0] + v
        assert projection_error(u, basis) == pytest.approx(1 / np.sqrt(2),
                                                           abs=1e-10)

    def test_zero_norm(self, basis):
        with pytest.raises(ZeroNorm):
            projection_error(np.zeros(10), basis)

    def test_nonincreasing_in_rank(self, rng):
        for _ in range(50):
            S = rng.normal(size=(16, 8))
            u = rng.normal(size=16)
            errors = [projection_error(u, compute_pod(S, rank=k))
                      for k in range(1, 9)]
            assert all(e2 <= e1 + 1e-12 for e1, e2 in zip(errors, errors[1:]))
