import numpy as np
import pytest
from scipy.stats import kstest

from rpiv.dataset import Dataset, augment
from rpiv.exceptions import DataError, EstimationError
from rpiv.jtest import sargan, square_instrument
from rpiv.simulate import SimSpec, generate


def overidentified_aug(rng, n=80):
    ds = Dataset(
        y=rng.normal(size=n),
        x=rng.normal(size=(n, 1)),
        z=rng.normal(size=(n, 2)),
        controls=rng.normal(size=(n, 1)),
    )
    return augment(ds)


class TestSargan:
    def test_orthogonal_residuals_give_zero(self, rng):
        # manufacture y = x beta + e with e exactly orthogonal to the
        # instrument block; 2SLS then recovers beta and the statistic
        # collapses
        n = 100
        z = rng.normal(size=(n, 3))
        x = z[:, :1] + 0.3 * rng.normal(size=(n, 1))
        ds = Dataset(y=np.zeros(n), x=x, z=z)
        aug = augment(ds)
        v = rng.normal(size=n)
        proj, *_ = np.linalg.lstsq(aug.z, v, rcond=None)
        e = v - aug.z @ proj
        beta = rng.normal(size=aug.x.shape[1])
        aug = augment(Dataset(y=aug.x @ beta + e, x=x, z=z))
        out = sargan(aug)
        assert out.statistic == pytest.approx(0.0, abs=1e-10)
        assert out.p_value == pytest.approx(1.0, abs=1e-8)

    def test_just_identified_rejected(self, rng):
        ds = Dataset(y=rng.normal(size=40), x=rng.normal(size=(40, 1)), z=rng.normal(size=(40, 1)))
        with pytest.raises(EstimationError, match="just-identified"):
            sargan(augment(ds))

    def test_statistic_nonnegative(self, rng):
        for _ in range(10):
            out = sargan(overidentified_aug(rng))
            assert out.statistic >= 0.0
            assert out.dof == 1

    def test_invariant_to_instrument_reparameterization(self, rng):
        from dataclasses import replace

        aug = overidentified_aug(rng)
        base = sargan(aug).statistic
        d = aug.z.shape[1]
        t = rng.normal(size=(d, d)) + 3.0 * np.eye(d)
        assert abs(np.linalg.det(t)) > 1e-3
        rotated = replace(aug, z=aug.z @ t)
        assert sargan(rotated).statistic == pytest.approx(base, rel=1e-8)

    def test_null_pvalues_uniform(self):
        # 1000 over-identified homoskedastic null draws: J p-values should
        # be uniform at the Kolmogorov-Smirnov 99% level
        spec = SimSpec(setting="over-hom", n=400, reps=1000, master_seed=31)
        pvals = []
        for rep in range(spec.reps):
            pvals.append(sargan(augment(generate(spec, rep))).p_value)
        assert kstest(pvals, "uniform").pvalue > 0.01


class TestSquareInstrument:
    def test_appends_square_after_instrument_block(self, rng):
        n = 30
        ds = Dataset(
            y=rng.normal(size=n),
            x=rng.normal(size=(n, 1)),
            z=np.arange(1.0, n + 1.0).reshape(-1, 1),
            controls=rng.normal(size=(n, 1)),
        )
        aug = augment(ds)
        out = square_instrument(aug, 0)
        assert out.n_base_z == 2
        np.testing.assert_array_equal(out.z[:, 1], aug.z[:, 0] ** 2)
        # controls and intercept stay at the tail
        np.testing.assert_array_equal(out.z[:, -1], np.ones(n))
        assert out.z.shape[1] == aug.z.shape[1] + 1

    def test_small_example_values(self, rng):
        ds = Dataset(
            y=rng.normal(size=3),
            x=np.array([[1.0], [2.0], [1.5]]),
            z=np.array([[1.0], [2.0], [3.0]]),
        )
        out = square_instrument(augment(ds), 0)
        np.testing.assert_array_equal(out.z[:, 1], [1.0, 4.0, 9.0])

    def test_binary_column_rejected(self, rng):
        n = 20
        z = (rng.random(size=(n, 1)) > 0.5).astype(float)
        ds = Dataset(y=rng.normal(size=n), x=rng.normal(size=(n, 1)), z=z)
        with pytest.raises(DataError, match="collinear"):
            square_instrument(augment(ds), 0)

    def test_sign_column_rejected(self, rng):
        # a +-1 column squares to the constant one: collinear with intercept
        n = 20
        z = np.sign(rng.normal(size=(n, 1)))
        ds = Dataset(y=rng.normal(size=n), x=rng.normal(size=(n, 1)), z=z)
        with pytest.raises(DataError, match="collinear"):
            square_instrument(augment(ds), 0)

    def test_intercept_not_addressable(self, rng):
        aug = overidentified_aug(rng)
        with pytest.raises(DataError, match="out of range"):
            square_instrument(aug, aug.n_base_z)

    def test_enables_jtest_on_just_identified(self, rng):
        spec = SimSpec(setting="just-hom", n=300, reps=1, master_seed=17)
        aug = augment(generate(spec, 0))
        with pytest.raises(EstimationError):
            sargan(aug)
        out = sargan(square_instrument(aug, 0))
        assert out.dof == 1
        assert 0.0 <= out.p_value <= 1.0
