"""Channel stages: quantization tables, sharpen, resize and codec cycles."""

import numpy as np
import pytest
import scipy.ndimage

from stegobench.channel import (
    BASE_CHROMA_QUANT,
    BASE_LUMA_QUANT,
    ChannelSpec,
    CodecCycle,
    DegenerateSizeError,
    OutOfRangeError,
    ResizeCycle,
    Sharpen,
    UnknownPresetError,
    apply_channel,
    channel_from_dict,
    channel_to_dict,
    codec_cycle,
    load_channel,
    platform_preset,
    preset_names,
    quant_tables,
    resize_cycle,
    save_channel,
    sharpen,
)
from stegobench.imagecore import GRAY, RGB, ImageBuffer
from stegobench.metrics import pixel_fidelity
from stegobench.synthetic import synth_cover

# ---------------------------------------------------------------------------
# quantization tables


def test_base_luma_table_first_row():
    np.testing.assert_array_equal(BASE_LUMA_QUANT[0], [16, 11, 10, 16, 24, 40, 51, 61])
    assert BASE_LUMA_QUANT[7, 7] == 99
    assert BASE_CHROMA_QUANT[0, 0] == 17
    assert np.all(BASE_CHROMA_QUANT[4:] == 99)


def test_quant_tables_q50_is_base():
    t = quant_tables(50)
    np.testing.assert_array_equal(t.luma, BASE_LUMA_QUANT)
    np.testing.assert_array_equal(t.chroma, BASE_CHROMA_QUANT)


def test_quant_tables_q100_all_ones():
    t = quant_tables(100)
    assert np.all(t.luma == 1)
    assert np.all(t.chroma == 1)


def test_quant_tables_spot_values():
    # scale = 200 - 2q for q >= 50, 5000/q below; floor((base*s + 50)/100),
    # clamped to [1, 255]
    assert quant_tables(90).luma[0, 0] == 3  # floor((16*20+50)/100)
    assert quant_tables(95).luma[0, 0] == 2  # floor((16*10+50)/100)
    assert quant_tables(10).luma[0, 0] == 80  # floor((16*500+50)/100)
    assert quant_tables(10).luma[7, 7] == 255  # 495 before the clamp


def test_quant_tables_formula_full_grid():
    for q in (1, 10, 25, 50, 75, 90, 95, 99, 100):
        s = 5000.0 / q if q < 50 else 200.0 - 2.0 * q
        for base, got in (
            (BASE_LUMA_QUANT, quant_tables(q).luma),
            (BASE_CHROMA_QUANT, quant_tables(q).chroma),
        ):
            want = np.clip(np.floor((base * s + 50.0) / 100.0), 1, 255).astype(np.int64)
            np.testing.assert_array_equal(got, want)


def test_quant_tables_rejects_out_of_range():
    with pytest.raises(OutOfRangeError):
        quant_tables(0)
    with pytest.raises(OutOfRangeError):
        quant_tables(101)


# ---------------------------------------------------------------------------
# stage validation


def test_stage_validation():
    with pytest.raises(OutOfRangeError):
        Sharpen(radius=0.0, amount=0.5)
    with pytest.raises(OutOfRangeError):
        Sharpen(radius=1.0, amount=-0.1)
    with pytest.raises(OutOfRangeError):
        ResizeCycle(scale=0.0, kernel="lanczos3")
    with pytest.raises(OutOfRangeError):
        ResizeCycle(scale=0.5, kernel="mitchell")
    with pytest.raises(OutOfRangeError):
        CodecCycle(quality=0, subsampling="420")
    with pytest.raises(OutOfRangeError):
        CodecCycle(quality=75, subsampling="422")


# ---------------------------------------------------------------------------
# sharpen


def test_sharpen_matches_naive_unsharp(rng):
    arr = rng.integers(0, 256, size=(7, 7, 1), dtype=np.uint8)
    img = ImageBuffer(arr, GRAY)
    sigma = 1.0
    amount = 0.5
    got = sharpen(img, radius=sigma, amount=amount).pixels[:, :, 0].astype(np.float64)

    radius = max(1, int(np.floor(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    taps = np.exp(-(x * x) / (2.0 * sigma * sigma))
    taps /= taps.sum()
    plane = arr[:, :, 0].astype(np.float64)
    blurred = scipy.ndimage.correlate1d(plane, taps, axis=0, mode="nearest")
    blurred = scipy.ndimage.correlate1d(blurred, taps, axis=1, mode="nearest")
    want = plane + amount * (plane - blurred)
    want = np.clip(np.sign(want) * np.floor(np.abs(want) + 0.5), 0, 255)
    np.testing.assert_array_equal(got, want)


def test_sharpen_constant_is_identity():
    img = ImageBuffer(np.full((16, 16, 3), 90, dtype=np.uint8), RGB)
    assert sharpen(img, 1.0, 0.5) == img


def test_sharpen_increases_edge_contrast():
    arr = np.zeros((8, 8, 1), dtype=np.uint8)
    arr[:, 4:] = 200
    out = sharpen(ImageBuffer(arr, GRAY), 1.0, 0.5).pixels
    assert out[0, 3, 0] < arr[0, 3, 0] + 1  # dark side overshoots darker
    assert out[0, 4, 0] >= 200  # bright side overshoots brighter
    assert int(out[0, 4, 0]) - int(out[0, 3, 0]) > 200


# ---------------------------------------------------------------------------
# resize cycle


def test_resize_cycle_preserves_shape(rgb_cover):
    out = resize_cycle(rgb_cover, 0.75, "lanczos3")
    assert out.pixels.shape == rgb_cover.pixels.shape
    assert out != rgb_cover  # lossy at non-unit scale


def test_resize_cycle_unit_scale_is_identity(gray_cover):
    assert resize_cycle(gray_cover, 1.0, "lanczos3") == gray_cover


def test_resize_cycle_degenerate():
    img = ImageBuffer(np.zeros((4, 4, 1), dtype=np.uint8), GRAY)
    with pytest.raises(DegenerateSizeError):
        resize_cycle(img, 0.05, "bilinear")


# ---------------------------------------------------------------------------
# codec cycle


def test_codec_identityish_at_q100_444(gray_cover):
    out = codec_cycle(gray_cover, 100, "444")
    fid = pixel_fidelity(gray_cover, out)
    assert fid["psnr_db"] >= 50.0


def test_codec_constant_stays_constant():
    # a flat image is pure DC; AC stays zero, so the output is flat too,
    # shifted by at most the DC quantization error
    img = ImageBuffer(np.full((16, 16, 1), 123, dtype=np.uint8), GRAY)
    out = codec_cycle(img, 50, "444")
    vals = np.unique(out.pixels)
    assert vals.size == 1
    assert abs(int(vals[0]) - 123) <= 1
    # at quality 100 the DC step is 1, so the round trip is exact
    assert codec_cycle(img, 100, "444") == img


def test_codec_gray_content_rgb_keeps_neutral_chroma():
    base = synth_cover(9, 32, 32, 1).pixels[:, :, 0]
    img = ImageBuffer(np.stack([base] * 3, axis=-1), RGB)
    out = codec_cycle(img, 100, "420")
    spread = out.pixels.astype(np.int16)
    assert np.abs(spread.max(axis=2) - spread.min(axis=2)).max() <= 1


def test_codec_low_quality_is_lossy(rgb_cover):
    out = codec_cycle(rgb_cover, 10, "420")
    fid = pixel_fidelity(rgb_cover, out)
    assert fid["psnr_db"] < 40.0


def test_codec_pads_non_multiple_of_eight():
    img = synth_cover(10, 20, 26, 1)
    out = codec_cycle(img, 75, "444")
    assert out.pixels.shape == img.pixels.shape


def test_codec_odd_dims_with_subsampling():
    img = synth_cover(11, 21, 27, 3)
    out = codec_cycle(img, 90, "420")
    assert out.pixels.shape == img.pixels.shape


# ---------------------------------------------------------------------------
# presets and serialization


def test_preset_table():
    assert platform_preset("identity").stages == ()
    assert platform_preset("x-sim").stages == ()
    assert platform_preset("instagram-sim").stages == ()
    fb = platform_preset("facebook-sim")
    assert fb.stages == (CodecCycle(quality=90, subsampling="420"),)
    assert platform_preset("jpeg75").stages == (CodecCycle(quality=75, subsampling="420"),)
    assert platform_preset("jpeg95").stages == (CodecCycle(quality=95, subsampling="420"),)
    assert platform_preset("subsample420").stages == (CodecCycle(quality=100, subsampling="420"),)
    assert platform_preset("resize075").stages == (ResizeCycle(scale=0.75, kernel="lanczos3"),)
    assert platform_preset("sharpen").stages == (Sharpen(radius=1.0, amount=0.5),)


def test_preset_names_sorted_and_complete():
    names = preset_names()
    assert names == sorted(names)
    assert set(names) == {
        "identity",
        "x-sim",
        "instagram-sim",
        "facebook-sim",
        "jpeg75",
        "jpeg95",
        "subsample420",
        "resize075",
        "sharpen",
    }


def test_unknown_preset():
    with pytest.raises(UnknownPresetError):
        platform_preset("tiktok-sim")


def test_identity_channel_is_noop(rgb_cover):
    assert apply_channel(rgb_cover, platform_preset("identity")) == rgb_cover


def test_channel_serialization_round_trip(tmp_path):
    spec = ChannelSpec(
        name="gauntlet",
        stages=(
            Sharpen(radius=1.0, amount=0.5),
            ResizeCycle(scale=0.75, kernel="bilinear"),
            CodecCycle(quality=80, subsampling="420"),
        ),
    )
    assert channel_from_dict(channel_to_dict(spec)) == spec
    path = tmp_path / "chan.json"
    save_channel(spec, str(path))
    assert load_channel(str(path)) == spec


def test_multi_stage_application_order(gray_cover):
    spec = ChannelSpec(
        name="two",
        stages=(Sharpen(radius=1.0, amount=0.5), CodecCycle(quality=90, subsampling="420")),
    )
    got = apply_channel(gray_cover, spec)
    want = codec_cycle(sharpen(gray_cover, 1.0, 0.5), 90, "420")
    assert got == want
