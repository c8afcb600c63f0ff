import numpy as np
import pytest

from wearalign_core.config.settings import SynthConfig
from wearalign_core.data.synthetic import generate_synthetic, synthetic_layout
from wearalign_core.utils.errors import InvalidConfig

SMALL = dict(n_users=4, n_classes=3, sensor_channels=[3, 3, 2], sampling_rate_hz=20.0,
             bout_seconds=5.0, bouts_per_user=12)


def _class_means(seq, n_classes):
    return np.stack([seq.frames[seq.labels == c].mean(axis=0) for c in range(n_classes)])


def _sensor_discrepancy(seqs, config):
    """Mean cross-user distance of class-conditional means, per sensor."""
    means = np.stack([_class_means(s, config.n_classes) for s in seqs])  # (U, C, total)
    bounds = np.cumsum([0] + config.sensor_channels)
    out = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        m = means[..., a:b]
        d = [np.linalg.norm(m[i] - m[j], axis=-1).mean() for i in range(len(seqs)) for j in range(i + 1, len(seqs))]
        out.append(float(np.mean(d)))
    return np.array(out)


def test_same_seed_is_bit_identical():
    a = generate_synthetic(SMALL, seed=3)
    b = generate_synthetic(SMALL, seed=3)
    for x, y in zip(a, b):
        assert x.user_id == y.user_id
        assert x.frames.tobytes() == y.frames.tobytes()
        np.testing.assert_array_equal(x.labels, y.labels)


def test_different_seed_changes_data():
    a = generate_synthetic(SMALL, seed=0)[0]
    b = generate_synthetic(SMALL, seed=1)[0]
    assert not np.array_equal(a.frames, b.frames)


def test_shape_and_labels_follow_config():
    config = SynthConfig(**SMALL)
    seqs = generate_synthetic(config, seed=0)
    assert [s.user_id for s in seqs] == ["user01", "user02", "user03", "user04"]
    for s in seqs:
        assert s.frames.shape == (12 * 100, 8)
        assert set(np.unique(s.labels)) == {0, 1, 2}
    layout = synthetic_layout(config)
    assert layout.channel_counts == [3, 3, 2]
    assert layout.class_names == ["class_0", "class_1", "class_2"]


def test_zero_shift_users_share_class_means():
    config = SynthConfig(**{**SMALL, "bout_seconds": 20.0}, shift_magnitude=0.0, noise_std=0.05)
    seqs = generate_synthetic(config, seed=0)
    m0, m1 = _class_means(seqs[0], 3), _class_means(seqs[1], 3)
    # long bouts average the sinusoids out; only phase and noise differ between users
    np.testing.assert_allclose(m0, m1, atol=0.25)


def test_misaligned_sensor_has_largest_cross_user_discrepancy():
    config = SynthConfig(**SMALL, misaligned_sensor=1)
    d = _sensor_discrepancy(generate_synthetic(config, seed=0), config)
    assert int(np.argmax(d)) == 1
    assert d[1] > np.delete(d, 1).max()


def test_missing_rate_injects_nan():
    seqs = generate_synthetic({**SMALL, "missing_rate": 0.1}, seed=0)
    frac = np.mean([np.isnan(s.frames).mean() for s in seqs])
    assert 0.05 < frac < 0.15


def test_invalid_mapping_raises_invalid_config():
    with pytest.raises(InvalidConfig):
        generate_synthetic({**SMALL, "misaligned_sensor": 5}, seed=0)
    with pytest.raises(InvalidConfig):
        generate_synthetic({**SMALL, "unknown_key": 1}, seed=0)
