"""Tests for the per-sample augmentation stack."""

import numpy as np
import pytest
from scipy.stats import chi2

from patchforge.augment import (
    PRESETS,
    RRM_METHODS,
    ApertureSpec,
    AugmentConfig,
    apply_aperture,
    apply_channel_drop,
    apply_mirror,
    apply_ubt_zoom_crop,
    layer4_coverage,
    make_patch_set,
    make_sample,
    rotate_image,
    sample_rng,
)
from patchforge.imgproc import ResampleMethod, resample
from patchforge.patchgrid import (
    FLAG_APERTURE,
    FLAG_MIRROR,
    PatchSet,
    assemble_set,
    default_catalog,
    extract_source_patches,
)
from patchforge.records import encode_record


class QueuedRng:
    def __init__(self, values):
        self.values = list(values)

    def integers(self, low, high=None):
        return self.values.pop(0)


@pytest.fixture(scope="module")
def catalog():
    return default_catalog()


@pytest.fixture(scope="module")
def planes():
    rng = np.random.default_rng(314)
    return tuple(rng.integers(0, 256, size=(s, s, 3), dtype=np.uint8) for s in (384, 256, 196))


def _set110(catalog, planes, config_id=2):
    pool = extract_source_patches(*planes, catalog)
    return assemble_set(pool, catalog.configs[config_id], image_id=0)


def _set96(catalog, planes, config_id=2):
    rng = np.random.default_rng(0)
    ps = _set110(catalog, planes, config_id)
    patches = [p[:96, :96].copy() for p in ps.patches]
    return PatchSet(ps.image_id, ps.config_id, patches)


# ---------------------------------------------------------------------------
# rotation
# ---------------------------------------------------------------------------


def test_rotate_zero_is_identity():
    rng = np.random.default_rng(1)
    img = rng.integers(0, 256, size=(12, 12, 3), dtype=np.uint8)
    assert np.array_equal(rotate_image(img, 0), img)


def test_rotate_180_twice_is_identity():
    rng = np.random.default_rng(2)
    img = rng.integers(0, 256, size=(9, 14, 3), dtype=np.uint8)
    assert np.array_equal(rotate_image(rotate_image(img, 2), 2), img)


def test_rotate_quarter_then_three_quarters_is_identity():
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8)
    assert np.array_equal(rotate_image(rotate_image(img, 1), 3), img)


def test_rotate_pixel_mapping_matches_hand_computed_raster():
    # 3x3 raster with distinct values; CCW quarter turn sends (x, y) to
    # (y, W-1-x). Hand-computed result frozen below.
    img = np.arange(9, dtype=np.uint8).reshape(3, 3, 1).repeat(3, axis=2)
    out = rotate_image(img, 1)
    expected = np.array([[2, 5, 8], [1, 4, 7], [0, 3, 6]], dtype=np.uint8)
    assert np.array_equal(out[..., 0], expected)
    w = 3
    for y in range(3):
        for x in range(3):
            assert out[w - 1 - x, y, 0] == img[y, x, 0]


def test_rotate_composition():
    rng = np.random.default_rng(4)
    img = rng.integers(0, 256, size=(6, 6, 3), dtype=np.uint8)
    for a in range(4):
        for b in range(4):
            lhs = rotate_image(rotate_image(img, a), b)
            rhs = rotate_image(img, (a + b) % 4)
            assert np.array_equal(lhs, rhs)


def test_rotate_rejects_nonsquare_quarter_turn():
    img = np.zeros((4, 6, 3), dtype=np.uint8)
    with pytest.raises(ValueError, match="square"):
        rotate_image(img, 1)
    rotate_image(img, 2)  # half turns are fine


# ---------------------------------------------------------------------------
# mirror
# ---------------------------------------------------------------------------


def test_mirror_is_label_consistent_involution(catalog, planes):
    ps = _set110(catalog, planes, config_id=2)  # W-C-E mirrors to E-C-W
    once = apply_mirror(ps, catalog, QueuedRng([1]))
    assert once.config_id == catalog.mirror_of(2) == 3
    assert once.flags & FLAG_MIRROR
    twice = apply_mirror(once, catalog, QueuedRng([1]))
    assert twice.config_id == 2
    assert not twice.flags & FLAG_MIRROR
    for a, b in zip(twice.patches, ps.patches):
        assert np.array_equal(a, b)


def test_mirror_skipped_on_zero_draw(catalog, planes):
    ps = _set110(catalog, planes)
    out = apply_mirror(ps, catalog, QueuedRng([0]))
    assert out is ps


def test_mirror_symmetric_config_keeps_label(catalog, planes):
    ps = _set110(catalog, planes, config_id=0)  # N-C-S is its own partner
    out = apply_mirror(ps, catalog, QueuedRng([1]))
    assert out.config_id == 0


def test_mirror_flips_all_patches_together(catalog, planes):
    ps = _set110(catalog, planes)
    out = apply_mirror(ps, catalog, QueuedRng([1]))
    for a, b in zip(out.patches, ps.patches):
        assert np.array_equal(a, b[:, ::-1])


def test_mirror_rate_is_half():
    rng = np.random.default_rng(99)
    catalog = default_catalog()
    ps = PatchSet(0, 2, [np.zeros((110, 110, 3), dtype=np.uint8)] * 3)
    hits = sum(apply_mirror(ps, catalog, rng).mirrored for _ in range(10_000))
    assert abs(hits / 10_000 - 0.5) < 0.02


# ---------------------------------------------------------------------------
# zoom / crop bag
# ---------------------------------------------------------------------------


def test_zoom_degenerate_draw_is_pure_resize(catalog, planes):
    ps = _set110(catalog, planes)
    cfg = AugmentConfig(enable_rrm=False)
    out = apply_ubt_zoom_crop(ps, QueuedRng([96, 0, 0]), cfg)
    assert out.patch_side == 96
    assert out.zoom == (96, 0, 0)
    for before, after in zip(ps.patches, out.patches):
        assert np.array_equal(after, resample(before, 96, 96, ResampleMethod.BILINEAR))


def test_zoom_parameters_are_yoked_methods_are_not(catalog, planes):
    ps = _set110(catalog, planes)
    cfg = AugmentConfig()
    rng = np.random.default_rng(7)
    seen_mixed_methods = False
    for _ in range(50):
        out = apply_ubt_zoom_crop(ps, rng, cfg)
        side, dx, dy = out.zoom
        assert 96 <= side <= 128
        assert 0 <= dx <= side - 96 and 0 <= dy <= side - 96
        assert len(out.resample_methods) == 3
        if len(set(out.resample_methods)) > 1:
            seen_mixed_methods = True
    assert seen_mixed_methods


def test_zoom_crop_matches_manual_pipeline(catalog, planes):
    ps = _set110(catalog, planes)
    cfg = AugmentConfig(enable_rrm=False)
    out = apply_ubt_zoom_crop(ps, QueuedRng([120, 5, 11]), cfg)
    for before, after in zip(ps.patches, out.patches):
        zoomed = resample(before, 120, 120, ResampleMethod.BILINEAR)
        assert np.array_equal(after, zoomed[11 : 11 + 96, 5 : 5 + 96])


def test_method_mix_is_uniform(catalog, planes):
    ps = _set110(catalog, planes)
    cfg = AugmentConfig()
    rng = np.random.default_rng(123)
    counts = {m.value: 0 for m in RRM_METHODS}
    n_sets = 2000
    for _ in range(n_sets):
        out = apply_ubt_zoom_crop(ps, rng, cfg)
        for m in out.resample_methods:
            counts[m] += 1
    total = 3 * n_sets
    for c in counts.values():
        assert abs(c / total - 0.25) < 0.02
    expected = total / 4
    stat = sum((c - expected) ** 2 / expected for c in counts.values())
    assert chi2.sf(stat, 3) > 0.001


def test_zoom_rejects_cropped_input(catalog, planes):
    ps = _set96(catalog, planes)
    with pytest.raises(ValueError, match="110x110"):
        apply_ubt_zoom_crop(ps, np.random.default_rng(0), AugmentConfig())


# ---------------------------------------------------------------------------
# aperture
# ---------------------------------------------------------------------------


def test_full_size_aperture_is_identity(catalog, planes):
    ps = _set96(catalog, planes)
    out = apply_aperture(ps, QueuedRng([96, 0, 0, 0]), AugmentConfig())
    for a, b in zip(out.patches, ps.patches):
        assert np.array_equal(a, b)
    assert out.flags & FLAG_APERTURE


def test_smallest_aperture_fills_outside(catalog, planes):
    ps = _set96(catalog, planes)
    cfg = AugmentConfig()
    out = apply_aperture(ps, QueuedRng([64, 0, 0, 0]), cfg)
    fill = np.array(cfg.fill_rgb, dtype=np.uint8)
    spec = out.aperture
    assert spec.side == 64 and (spec.x, spec.y) == (0, 0)
    for t in spec.targets:
        patch = out.patches[t]
        assert np.all(patch[:, 64:] == fill)
        assert np.all(patch[64:, :] == fill)
        assert np.array_equal(patch[:64, :64], ps.patches[t][:64, :64])


def test_aperture_is_yoked_and_third_patch_untouched(catalog, planes):
    ps = _set96(catalog, planes)
    rng = np.random.default_rng(17)
    for _ in range(100):
        out = apply_aperture(ps, rng, AugmentConfig())
        spec = out.aperture
        assert len(spec.targets) == 2
        untouched = ({0, 1, 2} - set(spec.targets)).pop()
        assert np.array_equal(out.patches[untouched], ps.patches[untouched])
        masked = [out.patches[t] for t in spec.targets]
        # both targets carry the identical aperture geometry
        for m, t in zip(masked, spec.targets):
            inside = m[spec.y : spec.y + spec.side, spec.x : spec.x + spec.side]
            ref = ps.patches[t][spec.y : spec.y + spec.side, spec.x : spec.x + spec.side]
            assert np.array_equal(inside, ref)


def test_aperture_spec_validation():
    ApertureSpec(64, 32, 32, (0, 1))
    with pytest.raises(ValueError):
        ApertureSpec(63, 0, 0, (0, 1))
    with pytest.raises(ValueError):
        ApertureSpec(64, 33, 0, (0, 1))
    with pytest.raises(ValueError):
        ApertureSpec(64, 0, 0, (1, 1))


# ---------------------------------------------------------------------------
# receptive-field coverage oracle
# ---------------------------------------------------------------------------


def test_full_aperture_sees_sixteen_windows():
    assert layer4_coverage(96, 0, 0) == 16  # (96-48)/16 + 1 = 4 per axis


def test_aperture_floor_theorem_exhaustive():
    # Every legal aperture of side >= 64 keeps at least one window visible.
    for side in range(64, 97):
        for x in range(0, 96 - side + 1):
            for y in range(0, 96 - side + 1):
                assert layer4_coverage(side, x, y) >= 1


def test_coverage_boundary_is_at_side_62():
    # The window grid has period 16 and the per-axis placement freedom of a
    # side-s aperture spans s-47 consecutive positions, so s = 63 already
    # guarantees a hit (any 16 consecutive integers contain a multiple of
    # 16). Side 62 is the first size that can dodge every window.
    blind_63 = [
        (x, y)
        for x in range(0, 96 - 63 + 1)
        for y in range(0, 96 - 63 + 1)
        if layer4_coverage(63, x, y) == 0
    ]
    assert blind_63 == []
    assert layer4_coverage(62, 1, 1) == 0


def test_channel_drop_keeps_one_channel(catalog, planes):
    ps = _set96(catalog, planes)
    cfg = AugmentConfig()
    out = apply_channel_drop(ps, QueuedRng([1]), cfg)
    for before, after in zip(ps.patches, out.patches):
        assert np.array_equal(after[..., 1], before[..., 1])
        assert np.all(after[..., 0] == cfg.fill_rgb[0])
        assert np.all(after[..., 2] == cfg.fill_rgb[2])


# ---------------------------------------------------------------------------
# full stack
# ---------------------------------------------------------------------------


def test_bare_path_is_pure_crop_with_base_label(catalog, planes):
    cfg = AugmentConfig(
        enable_cb=False,
        enable_yj=False,
        enable_ubt=False,
        enable_rrm=False,
        enable_ra=False,
        rotations=1,
    )
    config = catalog.configs[5]
    pool = extract_source_patches(*planes, catalog)
    source = assemble_set(pool, config, image_id=0)
    ps, class_id = make_patch_set(planes, config, catalog, sample_rng(1, 0, 5, 0), cfg)
    assert class_id == config.config_id == ps.config_id
    assert ps.rot_index == 0
    for src, out, (dx, dy) in zip(source.patches, ps.patches, ps.crop_offsets):
        assert np.array_equal(out, src[dy : dy + 96, dx : dx + 96])


def test_yoked_preset_yokes_the_crop(catalog, planes):
    cfg = PRESETS["cb+yj"]
    ps, _ = make_patch_set(planes, catalog.configs[3], catalog, sample_rng(2, 0, 3, 0), cfg)
    assert len(set(ps.crop_offsets)) == 1


def test_four_rotation_classes_span_80(catalog, planes):
    cfg = AugmentConfig(rotations=4)
    seen = set()
    for config in catalog.configs:
        for draw in range(40):
            rng = sample_rng(3, draw, config.config_id, 0)
            rec = make_sample(planes, config, catalog, rng, cfg)
            assert 0 <= rec.class_id < 80
            seen.add(rec.class_id)
    assert len(seen) > 60  # a healthy spread over the 80-class space


def test_sample_is_pure_function_of_stream_key(catalog, planes):
    cfg = PRESETS["full"]
    config = catalog.configs[12]
    a = make_sample(planes, config, catalog, sample_rng(9, 4, 12, 1), cfg)
    b = make_sample(planes, config, catalog, sample_rng(9, 4, 12, 1), cfg)
    assert encode_record(a) == encode_record(b)
    c = make_sample(planes, config, catalog, sample_rng(9, 4, 12, 2), cfg)
    assert encode_record(a) != encode_record(c)


def test_all_yoked_quantities_shared_within_set(catalog, planes):
    cfg = PRESETS["full"]
    for draw in range(50):
        rng = sample_rng(11, draw, 6, 0)
        ps, _ = make_patch_set(planes, catalog.configs[6], catalog, rng, cfg)
        side, dx, dy = ps.zoom
        assert 96 <= side <= 128 and 0 <= dx <= side - 96 and 0 <= dy <= side - 96
        assert ps.aperture is not None and len(ps.aperture.targets) == 2
        assert ps.rot_index in (0, 1, 2, 3)


def test_label_tracks_mirror_remap(catalog, planes):
    cfg = AugmentConfig(enable_ubt=True, enable_rrm=False, enable_ra=False, rotations=1)
    config = catalog.configs[2]
    for draw in range(30):
        rng = sample_rng(13, draw, 2, 0)
        ps, class_id = make_patch_set(planes, config, catalog, rng, cfg)
        assert class_id == ps.config_id
        assert ps.config_id == (3 if ps.mirrored else 2)


def test_presets_expose_ablation_ladder():
    assert PRESETS["baseline"].enable_cd
    assert not PRESETS["baseline"].enable_cb
    assert PRESETS["cb"].enable_cb and not PRESETS["cb"].enable_yj
    assert PRESETS["rwc180"].rotations == 2
    assert PRESETS["full"].rotations == 4 and PRESETS["full"].enable_rrm


def test_augment_config_validation():
    with pytest.raises(ValueError):
        AugmentConfig(aperture_min=50)
    with pytest.raises(ValueError):
        AugmentConfig(zoom_min=90)
    with pytest.raises(ValueError):
        AugmentConfig(rotations=3)
    cfg = AugmentConfig()
    assert AugmentConfig.from_dict(cfg.to_dict()) == cfg
