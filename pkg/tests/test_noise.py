import numpy as np

from spinmix.noise import NoiseStream


def test_reproducible_for_same_key():
    a = NoiseStream(1234, 5).increments(1000, 1e-3)
    b = NoiseStream(1234, 5).increments(1000, 1e-3)
    assert np.array_equal(a, b)


def test_distinct_trajectories_distinct_streams():
    a = NoiseStream(1234, 5).increments(1000, 1e-3)
    b = NoiseStream(1234, 6).increments(1000, 1e-3)
    c = NoiseStream(1235, 5).increments(1000, 1e-3)
    assert not np.allclose(a, b)
    assert not np.allclose(a, c)


def test_split_requests_agree_with_one_request():
    whole = NoiseStream(7, 0).increments(1000, 0.25)
    s = NoiseStream(7, 0)
    parts = np.concatenate([s.increments(137, 0.25), s.increments(863, 0.25)])
    assert np.array_equal(whole, parts)


def test_increment_moments_within_five_sigma():
    n = 1_000_000
    dt = 1e-4
    x = NoiseStream(99, 0).increments(n, dt)
    # mean ~ N(0, dt/n); variance estimator sd ~ dt * sqrt(2/n)
    assert abs(x.mean()) < 5 * np.sqrt(dt / n)
    assert abs(x.var() - dt) < 5 * dt * np.sqrt(2.0 / n)


def test_sampling_generator_reproducible_and_distinct():
    g1 = NoiseStream.sampling_generator(42, 3)
    g2 = NoiseStream.sampling_generator(42, 3)
    assert np.array_equal(g1.integers(0, 1000, size=10), g2.integers(0, 1000, size=10))
    inc_normals = NoiseStream(42, 3).standard_normals(10)
    samp_normals = NoiseStream.sampling_generator(42, 3).standard_normal(10)
    assert not np.allclose(inc_normals, samp_normals)


def test_negative_seed_masked():
    a = NoiseStream(-1, 0).increments(8, 1.0)
    b = NoiseStream((1 << 64) - 1, 0).increments(8, 1.0)
    assert np.array_equal(a, b)
