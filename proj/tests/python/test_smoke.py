import json

import numpy as np
import pytest

import silstm


@pytest.fixture(scope="module")
def scene():
    return silstm.simulate(seed=3, duration_steps=120, counts={"car": 6, "two-wheeler": 6})


def test_simulate_returns_tracks_and_truth(scene):
    ds, truth = scene
    assert len(ds) > 0
    assert set(truth) == {t.id for t in ds.tracks}
    track = ds.tracks[0]
    assert track.positions.shape == (len(track), 2)
    assert np.allclose(track.velocities[1:], np.diff(track.positions, axis=0))


def test_simulate_is_deterministic():
    a, _ = silstm.simulate(seed=9, duration_steps=60)
    b, _ = silstm.simulate(seed=9, duration_steps=60)
    assert [t.id for t in a.tracks] == [t.id for t in b.tracks]
    for ta, tb in zip(a.tracks, b.tracks):
        assert np.array_equal(ta.positions, tb.positions)


def test_track_csv_round_trip(scene, tmp_path):
    ds, _ = scene
    path = tmp_path / "tracks.csv"
    silstm.write_tracks_csv(ds, path)
    back = silstm.read_tracks(path)
    assert len(back) == len(ds)
    assert np.allclose(back.tracks[0].positions, ds.tracks[0].positions)


def test_resample_to_same_rate_is_identity(scene):
    ds, _ = scene
    same = silstm.resample(ds, 3.0, 3.0)
    assert np.array_equal(same.tracks[0].positions, ds.tracks[0].positions)


def test_interactions_have_2k_plus_1_features(scene):
    ds, _ = scene
    trajs = silstm.build_interactions(ds, k=4)
    assert len(trajs) == len(ds)
    seq = trajs[0].sequence()
    assert seq.shape == (9, trajs[0].n_steps)


def test_collision_energy_head_on_exceeds_diverging():
    others_p = np.array([[10.0, 0.0]])
    toward = silstm.collision_energy([1, 0], [0, 0], [1, 0], others_p, np.array([[-1.0, 0.0]]), 2.0, 5.0, 1.0)
    away = silstm.collision_energy([-1, 0], [0, 0], [-1, 0], others_p, np.array([[1.0, 0.0]]), 2.0, 5.0, 1.0)
    assert toward > away >= 0.0


def test_collision_energy_rejects_empty_neighbors():
    with pytest.raises(ValueError):
        silstm.collision_energy([1, 0], [0, 0], [1, 0], np.zeros((0, 2)), np.zeros((0, 2)), 1.0, 1.0, 1.0)


def test_fit_and_label(scene):
    ds, _ = scene
    fits = silstm.fit_energy(ds, generations=5, population=16)
    assert len(fits) == len(ds)
    labels = silstm.label_fits(fits)
    assert set(labels.values()) <= {"safe", "unsafe"}


@pytest.mark.parametrize("arch", silstm.architectures())
def test_encoder_shapes(arch):
    model = silstm.make_encoder(arch, 5, hidden=[4, 3], attention_units=2, seed=1)
    ctx, alpha = silstm.encode(model, np.random.default_rng(0).normal(size=(5, 7)))
    assert ctx.shape == (model.output_dim,)
    if model.has_attention:
        assert alpha.shape == (7,)
        assert abs(alpha.sum() - 1.0) < 1e-12
    else:
        assert alpha is None


def test_model_round_trip(tmp_path):
    model = silstm.make_encoder("blstm2l_a", 5, hidden=[4, 3], attention_units=2)
    path = tmp_path / "model.json"
    silstm.save_model(model, path)
    back = silstm.load_model(path)
    seq = np.ones((5, 3))
    assert np.array_equal(silstm.encode(model, seq)[0], silstm.encode(back, seq)[0])
    assert json.loads(path.read_text())["arch"] == "blstm2l_a"


def test_triplet_loss_hinge():
    assert silstm.triplet_loss([0, 0], [0, 0], [3, 0]) == 0.0
    assert silstm.triplet_loss([0, 0], [1, 0], [0, 0], margin=1.0) == pytest.approx(2.0)


def test_knn_majority():
    train = np.array([[0.0, 0.1, 0.2, 5.0, 5.1], [0.0, 0.0, 0.0, 0.0, 0.0]])
    labels = ["unsafe", "unsafe", "unsafe", "safe", "safe"]
    assert silstm.knn_classify(train, labels, np.array([0.05, 0.0]), 3) == "unsafe"
    with pytest.raises(ValueError):
        silstm.knn_classify(train, labels, np.array([0.0, 0.0]), 2)


def test_evaluate_reports_scopes(scene):
    ds, _ = scene
    trajs = silstm.build_interactions(ds, k=2)
    for i, t in enumerate(trajs):
        t.label = "unsafe" if i % 2 else "safe"
    model = silstm.make_encoder("lstm2l", 5, hidden=[3, 3])
    report = silstm.evaluate(model, trajs[:8], trajs[8:], knn_k=3)
    assert report["scopes"][0]["scope"] == "overall"
    assert report["k_neighbors"] == 2
    assert len(report["predictions"]) == len(trajs) - 8


def test_cli_help_and_missing_checkpoint(tmp_path):
    code, out, _ = silstm.run_cli(["eval", "--help"])
    assert code == 0 and "--arch" in out
    code, _, err = silstm.run_cli(["eval", "--out", str(tmp_path)])
    assert code == 2
    assert "model.json" in err
