import numpy as np
import pytest

from goldcast import checkpoint
from goldcast.data import Scaler
from goldcast.errors import DataError
from goldcast.lstm import LstmStack, lstm_forward
from goldcast.nn import Mlp


def _stack(seed=0):
    rng = np.random.default_rng(seed)
    return LstmStack.create(4, [5, 3], rng, n_outputs=1, head_hidden=(2,), window_len=7)


def _scaler(rng):
    return Scaler(rng.normal(size=3), rng.uniform(0.1, 3, size=3), ["a", "b", "c"])


@pytest.mark.parametrize("make", [_stack, lambda s: Mlp.create(6, [4], 3, np.random.default_rng(s))])
def test_round_trip_is_exact_and_byte_stable(make, rng):
    model = make(3)
    scalers = {"features": _scaler(rng)}
    text = checkpoint.dumps(model, "daily_close", scalers, {"note": 1})
    back, sc, doc = checkpoint.loads(text)
    assert doc["subnetwork"] == "daily_close" and doc["extra"] == {"note": 1}
    for k, v in model.params().items():
        np.testing.assert_array_equal(back.params()[k], v)
    np.testing.assert_array_equal(sc["features"].mean, scalers["features"].mean)
    np.testing.assert_array_equal(sc["features"].std, scalers["features"].std)
    assert sc["features"].columns == ["a", "b", "c"]
    assert checkpoint.dumps(back, "daily_close", sc, {"note": 1}) == text


def test_loaded_stack_predicts_identically(tmp_path, rng):
    model = _stack(1)
    checkpoint.save(tmp_path / "m.ckpt", model, "daily_high")
    back, _, _ = checkpoint.load(tmp_path / "m.ckpt")
    X = rng.normal(size=(5, 7, 4))
    np.testing.assert_array_equal(lstm_forward(back, X)[0], lstm_forward(model, X)[0])
    assert back.window_len == 7 and back.hidden_sizes == [5, 3]


@pytest.mark.parametrize("mutate,msg", [
    (lambda t: t.replace("GOLDCAST-CHECKPOINT", "NOPE", 1), "magic"),
    (lambda t: t.replace("GOLDCAST-CHECKPOINT 1", "GOLDCAST-CHECKPOINT 9", 1), "version"),
    (lambda t: t[:-40], "corrupt"),
    (lambda t: t.replace('"kind":"lstm_stack"', '"kind":"gru"'), "kind"),
])
def test_bad_checkpoints_are_rejected(mutate, msg):
    text = checkpoint.dumps(_stack(), "x")
    with pytest.raises(DataError, match=msg):
        checkpoint.loads(mutate(text))


def test_shape_mismatch_and_missing_file(tmp_path):
    text = checkpoint.dumps(_stack(), "x").replace('"hidden_sizes":[5,3]', '"hidden_sizes":[5,4]')
    with pytest.raises(DataError, match="topology"):
        checkpoint.loads(text)
    text = checkpoint.dumps(_stack(), "x").replace('"shape":[20,4]', '"shape":[4,20]', 1)
    with pytest.raises(DataError, match="shape"):
        checkpoint.loads(text)
    with pytest.raises(DataError, match="not found"):
        checkpoint.load(tmp_path / "none.ckpt")
