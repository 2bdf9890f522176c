import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fourier_qae.acquire import (
    AcquisitionConfig,
    AcquisitionError,
    WindowParams,
    acquire_series,
    coarse_overlap_probability,
    direct_return_probability,
    hadamard_test_overlap,
    read_series_csv,
    symmetrize,
    write_series_csv,
)
from fourier_qae.grover import build_amplifier, rotated_pair
from fourier_qae.noise import NoiseConfig

A = 1 / (20 * np.sqrt(2))
THETA = 0.6


@pytest.fixture(scope="module")
def amp():
    return build_amplifier(*rotated_pair(3, THETA, seed=4, depth=3))


def cfg(mode="exact_overlap", m=2, T=10, **kw):
    return AcquisitionConfig(mode, m, T, WindowParams(A), **kw)


def test_psi_default_overlap_is_cosine(amp):
    s = acquire_series(amp, cfg(m=3))
    np.testing.assert_allclose(s.raw, np.cos(2 * 3 * THETA * s.t), atol=1e-10)


def test_y_minus_overlap_is_single_exponential(amp):
    s = acquire_series(amp, cfg(m=3, initial_state_mode="y_minus_exact"))
    np.testing.assert_allclose(s.raw, np.exp(-2j * 3 * THETA * s.t), atol=1e-10)


def test_eq9_state_gives_same_real_signal(amp):
    a = acquire_series(amp, cfg(m=2, initial_state_mode="eq9_exact")).raw
    b = acquire_series(amp, cfg(m=2)).raw
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_return_probability_is_cosine_squared(amp):
    s = acquire_series(amp, cfg("direct_probability", m=2))
    np.testing.assert_allclose(s.raw.real, np.cos(2 * 2 * THETA * s.t) ** 2, atol=1e-10)
    assert np.all(s.raw.imag == 0)


def test_window_is_applied(amp):
    s = acquire_series(amp, cfg(m=1))
    np.testing.assert_allclose(s.windowed, s.raw * np.exp(-(A * s.t) ** 2))
    assert s.value(0) == 1


@pytest.mark.parametrize(
    "mode, ism",
    [("exact_overlap", "psi_default"), ("exact_overlap", "y_minus_exact"), ("direct_probability", "psi_default")],
)
def test_symmetrized_half_equals_explicit_negative_powers(amp, mode, ism):
    c = cfg(mode, m=2, initial_state_mode=ism)
    np.testing.assert_allclose(acquire_series(amp, c).raw, acquire_series(amp, c, full=True).raw, atol=1e-10)


def test_negative_magnification_conjugates(amp):
    pos = acquire_series(amp, cfg(m=2, initial_state_mode="y_minus_exact")).raw
    neg = acquire_series(amp, cfg(m=-2, initial_state_mode="y_minus_exact")).raw
    np.testing.assert_allclose(neg, np.conj(pos), atol=1e-10)


def test_hadamard_test_is_unbiased(amp):
    # exact ancilla statistics: P(0) = (1 + Re <v|A^k|v>) / 2
    k = 3
    exact = np.cos(2 * k * THETA)
    est = hadamard_test_overlap(amp, amp.psi, k, 200_000, seed=1)
    sd = np.sqrt((1 - exact**2) / 200_000)
    assert abs(est.real - exact) < 5 * sd
    assert abs(est.imag) < 5 / np.sqrt(200_000)


def test_hadamard_infer_mode_keeps_unit_modulus(amp):
    est = hadamard_test_overlap(amp, amp.psi, 2, 100, seed=3, imag_mode="infer")
    assert abs(abs(est) - 1) < 1e-12


def test_direct_probability_estimator(amp):
    p = np.cos(2 * 2 * THETA) ** 2
    est = direct_return_probability(amp, amp.psi, 2, 100_000, seed=2)
    assert abs(est - p) < 5 * np.sqrt(p * (1 - p) / 100_000)


def test_coarse_overlap_probability(amp):
    assert abs(coarse_overlap_probability(amp.psi, amp.phi) - np.cos(THETA) ** 2) < 1e-12
    est = coarse_overlap_probability(amp.psi, amp.phi, 50_000, 0)
    assert abs(est - np.cos(THETA) ** 2) < 0.01


def test_sampled_series_is_seeded(amp):
    c = cfg("hadamard_test", m=1, T=5, n_shot=50, seed=11)
    np.testing.assert_array_equal(acquire_series(amp, c).raw, acquire_series(amp, c).raw)
    other = acquire_series(amp, cfg("hadamard_test", m=1, T=5, n_shot=50, seed=12)).raw
    assert not np.array_equal(acquire_series(amp, c).raw, other)


def test_sampled_values_lie_on_the_shot_lattice(amp):
    s = acquire_series(amp, cfg("direct_probability", m=1, T=5, n_shot=40, seed=0))
    assert np.allclose(np.round(s.raw.real * 40), s.raw.real * 40)


def test_noiseless_trajectories_equal_exact(amp):
    for mode in ("hadamard_test", "direct_probability"):
        exact = acquire_series(amp, cfg(mode, m=1, T=4)).raw
        noisy = acquire_series(amp, cfg(mode, m=1, T=4, noise=NoiseConfig(0.0, 3, 0))).raw
        np.testing.assert_allclose(noisy, exact, atol=1e-10)


def test_noise_shrinks_the_signal(amp):
    c = cfg("direct_probability", m=1, T=6, noise=NoiseConfig(0.05, 200, 1))
    s = acquire_series(amp, c)
    assert s.raw_stderr is not None and s.trajectory_raw.shape == (200, 13)
    # a depolarized return probability drifts toward 1/8 on average
    exact = acquire_series(amp, cfg("direct_probability", m=1, T=6)).raw.real
    assert np.mean(np.abs(s.raw.real - 1 / 8)) < np.mean(np.abs(exact - 1 / 8))


def test_csv_round_trip(tmp_path, amp):
    s = acquire_series(amp, cfg("hadamard_test", m=2, T=6, n_shot=30, seed=5))
    path = write_series_csv(s, tmp_path / "series.csv")
    back = read_series_csv(path)
    np.testing.assert_array_equal(back.raw, s.raw)
    np.testing.assert_array_equal(back.t, s.t)
    assert back.config == s.config


def test_symmetrize_is_idempotent(amp):
    s = acquire_series(amp, cfg(m=1))
    np.testing.assert_array_equal(symmetrize(s).raw, s.raw)


@pytest.mark.parametrize(
    "kw",
    [
        dict(mode="nope"),
        dict(T=-1),
        dict(n_shot=-3),
        dict(mode="direct_probability", initial_state_mode="y_minus_exact"),
        dict(imag_mode="guess"),
        dict(m=1.5),
    ],
)
def test_config_validation(kw):
    base = dict(mode="exact_overlap", m=1, T=3)
    base.update(kw)
    with pytest.raises(AcquisitionError):
        AcquisitionConfig(base.pop("mode"), base.pop("m"), base.pop("T"), WindowParams(A), **base)


def test_window_range():
    with pytest.raises(AcquisitionError):
        WindowParams(0.0)
    with pytest.raises(AcquisitionError):
        WindowParams(1.0)


@given(st.floats(0.05, 1.5), st.integers(1, 6))
def test_probability_equals_squared_overlap(theta, m):
    a = build_amplifier(*rotated_pair(2, theta, 3, 2))
    ov = acquire_series(a, cfg(m=m, T=5)).raw
    pr = acquire_series(a, cfg("direct_probability", m=m, T=5)).raw
    np.testing.assert_allclose(pr.real, np.abs(ov) ** 2, atol=1e-9)
