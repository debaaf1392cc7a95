import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wavecast.exceptions import InvalidDepthError, InvalidSizeError, StructuralError
from wavecast.wavelet import (
    FilterBank,
    MultilevelCoefficients,
    WaveletCoefficients,
    build_transform_matrix,
    default_filter_bank,
    forward_transform,
    get_filter_bank,
    inverse_transform,
    is_power_of_four,
    multilevel_inverse,
    multilevel_transform,
    paper_verbatim_filter_bank,
    project_components,
    read_coefficients_csv,
    validate_filter_bank,
    write_coefficients_csv,
)

FB = default_filter_bank()
PRINTED_U, PRINTED_V = 0.06737176, 0.09419511

signals = st.sampled_from([16, 64, 256]).flatmap(
    lambda n: arrays(np.float64, n, elements=st.floats(-1e3, 1e3, allow_nan=False))
)


def test_default_bank_passes_every_condition():
    report = validate_filter_bank(FB)
    assert report.passed
    assert report.max_residual <= 1e-12
    assert len(report.conditions) == 30


def test_refined_coefficients_round_to_printed_digits():
    u, v = -FB.alpha[0], FB.alpha[1]
    assert round(u, 8) == PRINTED_U
    assert round(v, 8) == PRINTED_V
    # u^2 + v^2 + u/2 - v/2 = 0 is both the unit-norm and the shift-4 condition
    assert abs(u * u + v * v + u / 2 - v / 2) < 1e-15


def test_rounded_bank_misses_norm_tolerance():
    report = validate_filter_bank(default_filter_bank(refine=False))
    assert not report.passed
    assert {c.name for c in report.failures} >= {"norm(alpha)=1"}
    assert report.max_residual < 1e-8


def test_verbatim_gamma_fails_zero_sum():
    report = validate_filter_bank(paper_verbatim_filter_bank())
    assert not report.passed
    np.testing.assert_allclose(paper_verbatim_filter_bank().gamma.sum(), -1.13474352, atol=1e-8)
    assert report["sum(gamma)=0"].residual == pytest.approx(1.13474352, abs=1e-8)
    assert report["sum(alpha)=2"].passed


def test_filter_sums():
    np.testing.assert_allclose(FB.filters.sum(axis=1), [2, 0, 0, 0], atol=1e-12)


def test_filters_are_read_only():
    with pytest.raises(ValueError):
        FB.alpha[0] = 1.0


def test_wrong_filter_length_is_structural():
    with pytest.raises(StructuralError):
        validate_filter_bank(FilterBank(*(np.ones(7),) * 4))


def test_get_filter_bank_names():
    assert get_filter_bank("default").name == "default"
    assert get_filter_bank(FB) is FB
    with pytest.raises(ValueError):
        get_filter_bank("haar")


@pytest.mark.parametrize("n", [16, 64, 256])
def test_matrix_is_orthogonal(n):
    T = build_transform_matrix(FB, n)
    np.testing.assert_allclose(T @ T.T, np.eye(n), atol=1e-12)


def test_matrix_row_layout():
    T = build_transform_matrix(FB, 16)
    # row 4 is the first beta row: taps at columns 0..7
    np.testing.assert_array_equal(T[4, :8], FB.beta)
    np.testing.assert_array_equal(T[4, 8:], 0)
    # the last alpha row wraps around the end of the signal
    np.testing.assert_array_equal(T[3, 12:], FB.alpha[:4])
    np.testing.assert_array_equal(T[3, :4], FB.alpha[4:])


def test_constant_signal_lands_in_approximation():
    c = forward_transform(FB, np.ones(16))
    np.testing.assert_allclose(c.approx, 2.0, atol=1e-12)
    np.testing.assert_allclose(c.details, 0.0, atol=1e-12)


def test_streaming_equals_matrix():
    rng = np.random.default_rng(0)
    s = rng.normal(size=64)
    np.testing.assert_allclose(forward_transform(FB, s).to_array(),
                               build_transform_matrix(FB, 64) @ s, atol=1e-12)


@pytest.mark.parametrize("n", [0, 4, 8, 32, 48, 100])
def test_invalid_sizes(n):
    with pytest.raises(InvalidSizeError):
        forward_transform(FB, np.zeros(n))


def test_is_power_of_four():
    assert [k for k in range(300) if is_power_of_four(k)] == [1, 4, 16, 64, 256]


def test_inverse_rejects_ragged_bands():
    with pytest.raises(StructuralError):
        inverse_transform(FB, WaveletCoefficients(np.zeros(4), np.zeros((3, 5))))


def test_depth_limits():
    multilevel_transform(FB, np.zeros(64), 2)
    with pytest.raises(InvalidDepthError):
        multilevel_transform(FB, np.zeros(64), 3)
    with pytest.raises(InvalidDepthError):
        multilevel_transform(FB, np.zeros(64), 0)


def test_multilevel_flat_order():
    rng = np.random.default_rng(1)
    s = rng.normal(size=256)
    c = multilevel_transform(FB, s, 2)
    flat = c.to_array()
    assert c.band_lengths() == [16, 16, 16, 16, 64, 64, 64]
    np.testing.assert_array_equal(flat[:16], c.approx)
    np.testing.assert_array_equal(flat[16:64], np.concatenate(c.details[1]))
    np.testing.assert_array_equal(flat[64:], np.concatenate(c.details[0]))
    # level 2 is the one-level transform of the level-1 approximation
    one = forward_transform(FB, s)
    two = forward_transform(FB, one.approx)
    np.testing.assert_allclose(c.approx, two.approx, atol=1e-12)
    back = MultilevelCoefficients.from_array(flat, 2)
    np.testing.assert_array_equal(back.to_array(), flat)


def test_coefficient_csv_round_trip(tmp_path):
    c = multilevel_transform(FB, np.arange(64.0), 2)
    path = tmp_path / "c.csv"
    write_coefficients_csv(path, c)
    back = read_coefficients_csv(path)
    assert back.levels == 2
    np.testing.assert_array_equal(back.to_array(), c.to_array())
    buf = io.StringIO()
    write_coefficients_csv(buf, c)
    assert buf.getvalue().startswith("# n=64, levels=2")


@settings(max_examples=50, deadline=None)
@given(signals)
def test_round_trip_property(s):
    scale = max(1.0, np.abs(s).max())
    np.testing.assert_allclose(inverse_transform(FB, forward_transform(FB, s)), s, atol=1e-12 * scale)


@settings(max_examples=50, deadline=None)
@given(signals)
def test_parseval_property(s):
    energy = float(s @ s)
    c = forward_transform(FB, s).to_array()
    assert abs(float(c @ c) - energy) <= 1e-10 * max(energy, 1.0)


@settings(max_examples=30, deadline=None)
@given(signals, st.integers(1, 3))
def test_multilevel_round_trip_property(s, levels):
    max_depth = int(round(np.log(s.size) / np.log(4))) - 1
    levels = min(levels, max_depth)
    back = multilevel_inverse(FB, multilevel_transform(FB, s, levels))
    np.testing.assert_allclose(back, s, atol=1e-11 * max(1.0, np.abs(s).max()))


@settings(max_examples=30, deadline=None)
@given(signals)
def test_projection_components_property(s):
    parts = project_components(FB, s)
    scale = max(1.0, float(s @ s))
    np.testing.assert_allclose(sum(parts), s, atol=1e-11 * max(1.0, np.abs(s).max()))
    for i in range(4):
        for j in range(i + 1, 4):
            assert abs(parts[i] @ parts[j]) <= 1e-11 * scale


@settings(max_examples=30, deadline=None)
@given(signals, signals, st.floats(-10, 10))
def test_linearity_property(a, b, k):
    if a.size != b.size:
        b = np.resize(b, a.size)
    lhs = forward_transform(FB, a + k * b).to_array()
    rhs = forward_transform(FB, a).to_array() + k * forward_transform(FB, b).to_array()
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * max(1.0, np.abs(a).max(), np.abs(k * b).max()))
