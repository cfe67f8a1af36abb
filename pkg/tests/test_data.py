"""Dataset validation, Gram precomputation, hyperparameter rules."""

import numpy as np
import pytest

from sparseprobit.data import (
    Dataset,
    Hyperparameters,
    TruthParams,
    derive_nu2,
    validate_and_cache,
)
from sparseprobit.errors import DomainError, ValidationError


def naive_gram(X):
    n, p = X.shape
    G = np.zeros((p, p))
    for j in range(p):
        for k in range(p):
            for i in range(n):
                G[j, k] += X[i, j] * X[i, k]
    return G


class TestDataset:
    def test_accepts_valid(self):
        ds = Dataset(X=np.eye(3), y=np.array([0, 1, 1]))
        assert ds.n == 3 and ds.p == 3
        np.testing.assert_array_equal(ds.k, [-1.0, 1.0, 1.0])

    def test_rejects_bad_response(self):
        with pytest.raises(ValidationError) as err:
            Dataset(X=np.eye(3), y=np.array([0, 2, 1]))
        assert 1 in err.value.indices

    def test_rejects_nonfinite_rows(self):
        X = np.eye(3)
        X[2, 0] = np.nan
        with pytest.raises(ValidationError) as err:
            Dataset(X=X, y=np.array([0, 1, 1]))
        assert 2 in err.value.indices

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            Dataset(X=np.eye(3), y=np.array([0, 1]))

    def test_rejects_duplicate_names(self):
        with pytest.raises(ValidationError):
            Dataset(X=np.eye(2), y=np.array([0, 1]), feature_names=("a", "a"))

    def test_immutable(self):
        ds = Dataset(X=np.eye(2), y=np.array([0, 1]))
        with pytest.raises(ValueError):
            ds.X[0, 0] = 5.0


class TestHyperparameters:
    def test_valid(self):
        h = Hyperparameters(nu2=0.5, rho=0.1)
        assert h.nu0_2 == 25.0

    @pytest.mark.parametrize("kw", [
        dict(nu2=0.0, rho=0.1), dict(nu2=1.0, rho=0.0),
        dict(nu2=1.0, rho=1.0), dict(nu2=1.0, rho=0.5, nu0_2=-1.0),
    ])
    def test_rejects(self, kw):
        with pytest.raises(DomainError):
            Hyperparameters(**kw)


class TestGramCache:
    def test_identity(self):
        ds = Dataset(X=np.eye(2), y=np.array([0, 1]))
        gram = validate_and_cache(ds)
        np.testing.assert_allclose(gram.G, np.eye(2))
        assert not gram.has_zero_columns

    def test_zero_column_flagged_not_rejected(self):
        X = np.array([[1.0, 0.0], [2.0, 0.0]])
        gram = validate_and_cache(Dataset(X=X, y=np.array([0, 1])))
        assert gram.zero_columns == (1,)
        assert np.all(gram.G[1, :] == 0) and np.all(gram.G[:, 1] == 0)

    def test_matches_naive_product(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((5, 3))
        gram = validate_and_cache(Dataset(X=X, y=(rng.random(5) > 0.5).astype(int)))
        np.testing.assert_allclose(gram.G, naive_gram(X), rtol=1e-12)

    def test_matches_naive_product_larger(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((200, 50))
        y = (rng.random(200) > 0.5).astype(int)
        gram = validate_and_cache(Dataset(X=X, y=y))
        np.testing.assert_allclose(gram.G, X.T @ X, rtol=1e-12)
        np.testing.assert_allclose(gram.col_sq_norms, np.sum(X * X, axis=0), rtol=1e-12)

    def test_symmetric_and_psd(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((30, 10))
        gram = validate_and_cache(Dataset(X=X, y=(rng.random(30) > 0.5).astype(int)))
        np.testing.assert_allclose(gram.G, gram.G.T, rtol=1e-12)
        eig = np.linalg.eigvalsh(gram.G)
        assert eig.min() >= -1e-9 * np.linalg.norm(gram.G)

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        ds = Dataset(X=rng.standard_normal((10, 4)),
                     y=(rng.random(10) > 0.5).astype(int))
        a = validate_and_cache(ds)
        b = validate_and_cache(ds)
        np.testing.assert_array_equal(a.G, b.G)
        assert a.zero_columns == b.zero_columns


class TestDeriveNu2:
    @pytest.mark.parametrize("rho,p,nu0_2,expected", [
        (0.5, 2, 25.0, 25.0),
        (0.05, 1000, 25.0, 0.5),
        (0.25, 200, 25.0, 0.5),
    ])
    def test_values(self, rho, p, nu0_2, expected):
        assert derive_nu2(rho, p, nu0_2) == pytest.approx(expected, rel=1e-15)

    def test_rejects_bad_rho(self):
        with pytest.raises(DomainError):
            derive_nu2(0.0, 10, 25.0)


class TestTruthParams:
    def test_effective_mask(self):
        t = TruthParams(gamma0=np.array([1, 0, 1]), beta0=np.array([2.0, 5.0, -1.0]))
        np.testing.assert_array_equal(t.effective, [2.0, 0.0, -1.0])
        np.testing.assert_array_equal(t.active, [0, 2])

    def test_rejects_nonbinary(self):
        with pytest.raises(ValidationError):
            TruthParams(gamma0=np.array([2, 0]), beta0=np.array([1.0, 1.0]))
