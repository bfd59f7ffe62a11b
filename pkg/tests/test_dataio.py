import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ntu_text
from tdfix.dataio import (
    NTU_CAMERA_ANGLES,
    NTU_HAND_JOINTS,
    NTU_LAYOUT,
    SYNTH_LAYOUT,
    MeanSkeleton,
    SkeletonSequence,
    SyntheticSpec,
    build_datasets,
    flatten,
    load_dataset,
    load_ntu_file,
    parse_ntu_filename,
    parse_ntu_skeleton,
    preprocess,
    read_sequence_csv,
    save_dataset,
    split,
    synth_datasets,
    synth_generate,
    unflatten,
    write_sequence_csv,
)
from tdfix.errors import ConfigError, DataError, ParseError

ONES = [(1.0, 2.0, 3.0)] * 25


def test_layout_dimension_follows_slots_joints_xyz():
    assert NTU_LAYOUT.dim == 2 * 25 * 3
    assert len(NTU_LAYOUT.dim_names()) == 150
    assert NTU_LAYOUT.dim_index(1, 24, 2) == 149
    assert NTU_LAYOUT.joint_dims("spineMid", actor=0) == [3, 4, 5]


# -- NTU parser ---------------------------------------------------------------

def test_parse_single_body_fixture():
    seq = parse_ntu_skeleton(ntu_text([[ONES]]))
    x = flatten(seq)
    assert x.shape == (1, 150)
    np.testing.assert_array_equal(x[0, :75], np.tile([1.0, 2.0, 3.0], 25))
    np.testing.assert_array_equal(x[0, 75:], 0.0)


def test_parse_two_bodies_and_empty_frame():
    a = [(float(j), 0.5, -1.0) for j in range(25)]
    b = [(0.0, float(j), 2.0) for j in range(25)]
    seq = parse_ntu_skeleton(ntu_text([[a, b], [], [b]]))
    assert seq.frames.shape == (3, 2, 25, 3)
    np.testing.assert_array_equal(seq.frames[0, 0], np.array(a))
    np.testing.assert_array_equal(seq.frames[0, 1], np.array(b))
    np.testing.assert_array_equal(seq.frames[1], 0.0)
    np.testing.assert_array_equal(seq.frames[2, 0], np.array(b))
    np.testing.assert_array_equal(seq.frames[2, 1], 0.0)


def test_parse_three_bodies_keeps_first_two():
    bodies = [[(float(k), float(j), 0.0) for j in range(25)] for k in range(3)]
    with pytest.warns(UserWarning, match="dropped 1 bodies"):
        seq = parse_ntu_skeleton(ntu_text([bodies]))
    np.testing.assert_array_equal(seq.frames[0, 0, :, 0], 0.0)
    np.testing.assert_array_equal(seq.frames[0, 1, :, 0], 1.0)
    assert seq.frames.shape[1] == 2


def test_parse_zero_frames():
    with pytest.raises(ParseError, match="empty"):
        parse_ntu_skeleton("0\n")


def test_parse_truncated_reports_line():
    text = ntu_text([[ONES]]).splitlines()
    with pytest.raises(ParseError) as e:
        parse_ntu_skeleton("\n".join(text[:10]))
    assert e.value.line == 11


def test_parse_non_numeric_token():
    text = ntu_text([[ONES]]).splitlines()
    text[5] = "1.0 abc 3.0 0 0 0 0 0 0 0 0 2"
    with pytest.raises(ParseError) as e:
        parse_ntu_skeleton("\n".join(text))
    assert e.value.line == 6


def test_parse_wrong_joint_count():
    text = ntu_text([[ONES]]).replace("\n25\n", "\n24\n", 1)
    with pytest.raises(ParseError, match="joint count"):
        parse_ntu_skeleton(text)


def test_load_ntu_file(tmp_path):
    p = tmp_path / "S001C002P003R002A013.skeleton"
    p.write_text(ntu_text([[ONES], [ONES]]))
    seq = load_ntu_file(p)
    assert seq.label == 12 and seq.meta["camera"] == 2 and seq.num_frames == 2


# -- filenames and splits -----------------------------------------------------

def test_filename_examples():
    m = parse_ntu_filename("S001C002P003R002A013")
    assert (m.camera, m.performer, m.action) == (2, 3, 13)
    assert parse_ntu_filename("S017C003P040R002A060.skeleton").action == 60
    for bad in ("s001c002p003r002a013", "S001C002P003A013", "S001C002P003R002A13"):
        with pytest.raises(ParseError):
            parse_ntu_filename(bad)


def test_camera_angles():
    assert sorted(NTU_CAMERA_ANGLES.values()) == [-45, 0, 45]
    assert sorted(NTU_CAMERA_ANGLES) == [1, 2, 3]
    assert parse_ntu_filename("S001C002P003R002A013").camera_angle == 0


def _meta_seqs():
    seqs = []
    for cam in (1, 2, 3):
        for perf in (1, 2, 3, 4):
            seqs.append(SkeletonSequence(np.zeros((1, 2, 25, 3)), meta={"camera": cam, "performer": perf},
                                         name=f"C{cam}P{perf}"))
    return seqs


def test_cross_view_split():
    train, test = split(_meta_seqs(), "cross_view", [2, 3])
    assert all(s.meta["camera"] == 1 for s in test)
    assert all(s.meta["camera"] in (2, 3) for s in train)


def test_cross_subject_partition():
    seqs = _meta_seqs()
    train, test = split(seqs, "cross_subject", [1, 2])
    names = sorted(s.name for s in train + test)
    assert names == sorted(s.name for s in seqs)
    assert not {s.name for s in train} & {s.name for s in test}


def test_split_empty_side():
    with pytest.raises(ConfigError):
        split(_meta_seqs(), "cross_view", [1, 2, 3])
    with pytest.raises(ConfigError):
        split(_meta_seqs(), "sideways", [1])


# -- preprocessing ------------------------------------------------------------

def _seq(frames):
    return SkeletonSequence(np.asarray(frames, float).reshape(len(frames), 1, -1, 3), SYNTH_LAYOUT)


def test_preprocess_own_mean_gives_zero():
    rng = np.random.default_rng(0)
    s = _seq(np.tile(rng.normal(size=48), (10, 1)))
    mean = MeanSkeleton.from_sequences([s])
    np.testing.assert_allclose(preprocess(s, 10, mean), 0.0, atol=1e-12)


def test_preprocess_padding_becomes_minus_mean():
    rng = np.random.default_rng(1)
    s = _seq(rng.normal(size=(6, 48)))
    mean = MeanSkeleton(rng.normal(size=48))
    x = preprocess(s, 9, mean)
    np.testing.assert_array_equal(x[6:], np.tile(-mean.values, (3, 1)))
    np.testing.assert_array_equal(x[:6], flatten(s) - mean.values)
    np.testing.assert_array_equal(preprocess(s, 9, mean, pad_after=True)[6:], 0.0)


def test_preprocess_center_crop():
    s = _seq(np.arange(10 * 48, dtype=float).reshape(10, 48))
    x = preprocess(s, 6, MeanSkeleton.zeros(48))
    np.testing.assert_array_equal(x, flatten(s)[2:8])


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(1, 2), st.integers(0, 1000))
def test_flatten_roundtrip(T, slots, seed):
    frames = np.random.default_rng(seed).normal(size=(T, slots, 25, 3))
    layout = NTU_LAYOUT if slots == 2 else SYNTH_LAYOUT.__class__(NTU_LAYOUT.joint_names, 1)
    seq = SkeletonSequence(frames, layout)
    np.testing.assert_array_equal(unflatten(flatten(seq), layout), frames)


def test_training_mean_is_removed():
    rng = np.random.default_rng(2)
    seqs = [_seq(rng.normal(size=(int(rng.integers(4, 9)), 48)) + 3.0) for _ in range(5)]
    for s in seqs:
        s.label = 0
    train, _ = build_datasets(seqs, seqs[:1], 12, 1)
    real = np.concatenate([train.x[i, :s.num_frames] for i, s in enumerate(seqs)])
    np.testing.assert_allclose(real.mean(axis=0), 0.0, atol=1e-10)


def test_sequence_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    seq = SkeletonSequence(rng.normal(size=(5, 2, 25, 3)), NTU_LAYOUT, 4, {"camera": 1}, "x")
    write_sequence_csv(tmp_path / "x.csv", seq)
    back = read_sequence_csv(tmp_path / "x.csv")
    assert back.frames.tobytes() == seq.frames.tobytes()
    assert back.label == 4 and back.meta == {"camera": 1}


# -- synthetic generator ------------------------------------------------------

def test_synth_deterministic_and_balanced():
    spec = SyntheticSpec(train_per_class=5, test_per_class=2, seed=7)
    a, b = synth_generate(spec), synth_generate(spec)
    for sa, sb in zip(a[0] + a[1], b[0] + b[1]):
        assert sa.frames.tobytes() == sb.frames.tobytes()
    labels = [s.label for s in a[0]]
    assert [labels.count(k) for k in range(4)] == [5] * 4


def test_confusable_pair_differs_only_on_fine_dims():
    spec = SyntheticSpec(train_per_class=1, test_per_class=1, distractor_amplitude=0.0, noise=0.0)
    train, _ = synth_generate(spec)
    x0, x1 = flatten(train[0]), flatten(train[1])
    coarse = [d for d in range(48) if d not in spec.fine_dims]
    np.testing.assert_array_equal(x0[:, coarse], x1[:, coarse])
    assert np.abs(x0[:, spec.fine_dims] - x1[:, spec.fine_dims]).max() > 0.01


def test_zero_fine_amplitude_makes_pair_identical():
    spec = SyntheticSpec(train_per_class=1, test_per_class=1, distractor_amplitude=0.0, noise=0.0,
                         fine_amplitude=0.0)
    train, _ = synth_generate(spec)
    assert flatten(train[0]).tobytes() == flatten(train[1]).tobytes()


def test_centroid_oracle_separates_pair_on_fine_dims():
    spec = SyntheticSpec()
    tr, te = synth_datasets(spec)
    d = spec.fine_dims

    def feats(ds):
        m = np.isin(ds.y, spec.confusable_pair)
        return ds.x[m][:, :, d].reshape(m.sum(), -1), ds.y[m]

    xtr, ytr = feats(tr)
    xte, yte = feats(te)
    centroids = np.stack([xtr[ytr == k].mean(axis=0) for k in spec.confusable_pair])
    pred = np.array(spec.confusable_pair)[np.argmin(((xte[:, None] - centroids) ** 2).sum(-1), axis=1)]
    assert (pred == yte).mean() >= 0.95


def test_dataset_cache_roundtrip(tmp_path):
    tr, _ = synth_datasets(SyntheticSpec(train_per_class=3, test_per_class=1))
    save_dataset(tmp_path / "ds", tr)
    back = load_dataset(tmp_path / "ds")
    assert back.x.tobytes() == tr.x.tobytes()
    assert back.ids == tr.ids and (back.y == tr.y).all() and back.layout == tr.layout
    assert back.mean.values.tobytes() == tr.mean.values.tobytes()
    with pytest.raises(DataError):
        back.index_of("nope")


def test_hand_joints_exist():
    assert all(j in NTU_LAYOUT.joint_names for j in NTU_HAND_JOINTS)
