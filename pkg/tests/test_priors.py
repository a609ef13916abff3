import numpy as np
import pytest
from scipy.stats import gaussian_kde

from tscore.priors import (
    Prior,
    uniform_sphere_log_density,
    vmf_log_normalizer,
)

LOG_2PI = np.log(2 * np.pi)


# ---------------------------------------------------------------- densities


def test_standard_normal_at_origin():
    p = Prior.standard_normal(2)
    assert p.log_density(np.zeros(2)) == pytest.approx(-LOG_2PI, abs=1e-12)


def test_vmf_kappa_zero_is_uniform_on_circle():
    p = Prior.vmf_mixture(np.array([[1.0, 0.0]]), kappa=0.0)
    for theta in np.linspace(0, 2 * np.pi, 7):
        z = np.array([np.cos(theta), np.sin(theta)])
        assert p.log_density(z) == pytest.approx(-LOG_2PI, abs=1e-12)


def test_identical_mixture_components_collapse(rng):
    mean = rng.standard_normal(3)
    single = Prior.gaussian_mixture(mean[None, :], variance=0.6)
    four = Prior.gaussian_mixture(np.tile(mean, (4, 1)), variance=0.6)
    for _ in range(10):
        z = rng.standard_normal(3)
        assert four.log_density(z) == pytest.approx(single.log_density(z), abs=1e-12)


def test_dimension_mismatch_rejected():
    p = Prior.standard_normal(3)
    with pytest.raises(ValueError):
        p.log_density(np.zeros(2))


def test_mixture_density_between_component_extremes(rng):
    means = rng.standard_normal((3, 2))
    mix = Prior.gaussian_mixture(means, variance=0.5)
    parts = [Prior.gaussian_mixture(m[None, :], variance=0.5) for m in means]
    for _ in range(20):
        z = 2 * rng.standard_normal(2)
        comp = [p.log_density(z) for p in parts]
        val = mix.log_density(z)
        assert min(comp) - 1e-9 <= val <= max(comp) + 1e-9


def test_vmf_normalizer_kappa_limit():
    for dim in (2, 3, 5, 8):
        limit = vmf_log_normalizer(dim, 1e-9)
        assert limit == pytest.approx(uniform_sphere_log_density(dim), abs=1e-6)


def test_vmf_normalizer_large_kappa_finite():
    assert np.isfinite(vmf_log_normalizer(4, 500.0))


def test_gaussian_mixture_normalizes_on_grid():
    # trapezoid quadrature over a wide 2-D grid as the normalization oracle
    p = Prior.gaussian_mixture(np.array([[0.5, -0.3], [-1.0, 1.0]]), variance=0.8)
    xs = np.linspace(-8, 8, 321)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    dens = np.exp(p.log_density_batch(pts)).reshape(321, 321)
    integral = np.trapezoid(np.trapezoid(dens, xs, axis=1), xs)
    assert integral == pytest.approx(1.0, rel=0.02)


def test_vmf_mixture_normalizes_on_sphere(rng):
    p = Prior.vmf_mixture(np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]), kappa=5.0)
    u = rng.standard_normal((300_000, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    area = 4 * np.pi
    integral = area * np.exp(p.log_density_batch(u)).mean()
    assert integral == pytest.approx(1.0, rel=0.02)


# ---------------------------------------------------------------- sampling


def test_standard_normal_sample_mean(rng):
    p = Prior.standard_normal(3)
    n = 10_000
    samples = p.sample(n, rng)
    assert samples.shape == (n, 3)
    assert np.all(np.abs(samples.mean(axis=0)) < 4 / np.sqrt(n))


def test_vmf_sample_concentrates_on_direction(rng):
    mu = np.array([1.0, 2.0, -0.5])
    mu /= np.linalg.norm(mu)
    p = Prior.vmf_mixture(mu[None, :], kappa=50.0)
    samples = p.sample(10_000, rng)
    assert np.allclose(np.linalg.norm(samples, axis=1), 1.0, atol=1e-9)
    mean_dir = samples.mean(axis=0)
    mean_dir /= np.linalg.norm(mean_dir)
    angle = np.arccos(np.clip(mean_dir @ mu, -1, 1))
    assert angle < 0.05


def test_gaussian_mixture_sample_moments(rng):
    means = np.array([[4.0, 0.0], [-4.0, 0.0]])
    p = Prior.gaussian_mixture(means, variance=0.25)
    samples = p.sample(20_000, rng)
    # symmetric mixture: overall mean near zero, |x1| near 4
    assert np.abs(samples.mean(axis=0)).max() < 0.1
    assert np.abs(np.abs(samples[:, 0]).mean() - 4.0) < 0.05


def test_sample_kde_agrees_with_density(rng):
    # loose smoke property: kernel density of samples tracks log_density
    p = Prior.gaussian_mixture(np.array([[1.0, 0.0], [-1.0, 0.5]]), variance=0.4)
    samples = p.sample(100_000, rng)
    kde = gaussian_kde(samples.T)
    probes = np.array([[1.0, 0.0], [-1.0, 0.5], [0.0, 0.2], [0.5, -0.3]])
    log_kde = np.log(kde(probes.T))
    log_true = p.log_density_batch(probes)
    assert np.max(np.abs(log_kde - log_true)) < 0.1


def test_sampling_deterministic_per_seed():
    p = Prior.vmf_mixture(np.array([[0.0, 1.0], [1.0, 0.0]]), kappa=3.0)
    a = p.sample(50, np.random.default_rng(9))
    b = p.sample(50, np.random.default_rng(9))
    assert np.array_equal(a, b)


def test_sample_rejects_bad_n(rng):
    with pytest.raises(ValueError):
        Prior.standard_normal(2).sample(0, rng)


# ------------------------------------------------------ reparameterization


def reparam_fd_check(prior, rng):
    n = 6
    noise = prior.draw_noise(n, rng)
    w = rng.standard_normal((n, prior.dim))  # random linear functional

    def value():
        return float(np.sum(w * prior.apply_noise(noise)))

    analytic = prior.noise_backward(noise, w)
    h = 1e-6
    fd = np.zeros_like(prior.means)
    flat = prior.means.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = value()
        flat[i] = orig - h
        down = value()
        flat[i] = orig
        fd.ravel()[i] = (up - down) / (2 * h)
    assert np.max(np.abs(fd - analytic)) < 1e-5


def test_gaussian_reparam_gradient(rng):
    prior = Prior.gaussian_mixture(rng.standard_normal((3, 2)), variance=0.7)
    reparam_fd_check(prior, rng)


def test_vmf_reparam_gradient(rng):
    prior = Prior.vmf_mixture(rng.standard_normal((2, 3)), kappa=8.0)
    reparam_fd_check(prior, rng)


def test_householder_maps_axis_to_direction(rng):
    prior = Prior.vmf_mixture(rng.standard_normal((1, 4)), kappa=1000.0)
    samples = prior.sample(200, rng)
    # extreme concentration: samples hug the mean direction
    assert np.all(samples @ prior.means[0] > 0.99)


# ---------------------------------------------------------------- validation


def test_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        Prior(
            "gaussian-mixture",
            2,
            np.zeros((2, 2)),
            np.ones(2),
            np.array([0.6, 0.6]),
        )


def test_vmf_requires_unit_directions():
    with pytest.raises(ValueError):
        Prior("vmf-mixture", 2, np.array([[2.0, 0.0]]), np.ones(1), np.ones(1))


def test_vmf_requires_dim_two_plus():
    with pytest.raises(ValueError):
        Prior("vmf-mixture", 1, np.array([[1.0]]), np.ones(1), np.ones(1))


def test_gaussian_variance_positive():
    with pytest.raises(ValueError):
        Prior.gaussian_mixture(np.zeros((1, 2)), variance=0.0)


def test_serialization_round_trip(rng):
    p = Prior.vmf_mixture(rng.standard_normal((3, 4)), kappa=7.0)
    q = Prior.from_dict(p.to_dict())
    z = rng.standard_normal(4)
    assert q.log_density(z) == p.log_density(z)
