import json

import numpy as np
import pytest

from annealflow.config import config_from_dict, load_config, parse_config
from annealflow.errors import ValidationError
from annealflow.io import parse_samples, read_samples, samples_to_csv, write_samples
from annealflow.presets import get_preset, preset_names


def test_csv_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    X = np.r_[rng.standard_normal((50, 3)) * 10.0 ** rng.integers(-300, 300, (50, 3)),
              [[0.1, -0.0, 5e-324]], [[np.nextafter(1.0, 2.0), 1 / 3, 2.0 ** 1023]]]
    back = read_samples(write_samples(tmp_path / "s.csv", X))
    assert back.tobytes() == X.tobytes()


def test_csv_header_and_empty():
    text = samples_to_csv(np.zeros((0, 4)))
    assert text == "dim_1,dim_2,dim_3,dim_4\n"
    assert parse_samples(text).shape == (0, 4)
    assert samples_to_csv(np.array([[1.5, 2.0]])) == "dim_1,dim_2\n1.5,2\n"


def test_csv_diagnostics():
    with pytest.raises(ValidationError, match="line 1"):
        parse_samples("x,y\n1,2\n")
    with pytest.raises(ValidationError, match="line 3"):
        parse_samples("dim_1,dim_2\n1,2\n1\n")
    with pytest.raises(ValidationError, match="line 2"):
        parse_samples("dim_1\nabc\n")
    with pytest.raises(ValidationError, match="empty"):
        parse_samples("")
    with pytest.raises(ValidationError, match="cannot read"):
        read_samples("/nonexistent/file.csv")


@pytest.mark.parametrize("name", preset_names())
def test_every_preset_builds(name):
    if name.startswith("bayeslogit-") and name != "bayeslogit-synthetic":
        pytest.skip("dataset preset needs a data file")
    cfg = config_from_dict({"preset": name})
    target = cfg.build_target()
    path = cfg.build_path(target)
    train = cfg.build_train(path)
    assert len(train.alphas) == path.num_steps
    assert cfg.name == name


def test_preset_block_counts():
    def steps(name):
        cfg = config_from_dict({"preset": name})
        return cfg.build_path().num_steps

    assert steps("gmm-6-8-d2") == 12
    assert steps("expgauss-d2") == 20
    assert steps("funnel-d5") == 8
    assert steps("truncnorm-c4-d2") == 10
    with pytest.raises(ValidationError):
        get_preset("gmm-7-8-d2")


def test_config_round_trip():
    cfg = config_from_dict({"preset": "gmm-6-8-d2", "seed": 17, "train": {"iterations": 5}})
    again = parse_config(cfg.to_json())
    assert again.to_dict() == cfg.to_dict()
    assert again.train["iterations"] == 5 and again.seed == 17
    assert again.train["lr"] == get_preset("gmm-6-8-d2")["train"]["lr"]


def test_unknown_keys_are_rejected_with_line_numbers():
    text = '{\n  "preset": "gmm-6-8-d2",\n  "train": {\n    "iteratoins": 3\n  }\n}\n'
    with pytest.raises(ValidationError, match=r"line 4: field 'train.iteratoins'"):
        parse_config(text)
    with pytest.raises(ValidationError, match="line 2"):
        parse_config('{\n  "sed": 1\n}')
    with pytest.raises(ValidationError, match=r"line 3, column"):
        parse_config('{\n  "seed": 1,\n  }')
    with pytest.raises(ValidationError, match="metrics.radus"):
        config_from_dict({"preset": "gmm-6-8-d2", "metrics": {"radus": 1.0}})


def test_bad_values_are_rejected():
    with pytest.raises(ValidationError, match="seed"):
        config_from_dict({"preset": "gmm-6-8-d2", "seed": -1})
    with pytest.raises(ValidationError, match="seed"):
        config_from_dict({"preset": "gmm-6-8-d2", "seed": 2 ** 64})
    with pytest.raises(ValidationError):
        config_from_dict({"preset": "gmm-6-8-d2", "train": {"lr": -1}})
    with pytest.raises(ValidationError, match="target"):
        config_from_dict({"seed": 0})
    with pytest.raises(ValidationError):
        config_from_dict({"target": {"family": "IsotropicGaussian", "dim": 2}, "path": {"kind": "Geometric"}})


def test_explicit_config_defaults(tmp_path):
    doc = {"target": {"family": "TruncatedNormalRelaxed", "dim": 2, "radius": 3.0},
           "path": {"kind": "ShrinkingRadius", "num_steps": 4}}
    (tmp_path / "c.json").write_text(json.dumps(doc))
    cfg = load_config(tmp_path / "c.json")
    path = cfg.build_path()
    train = cfg.build_train(path)
    assert train.loss == "original"
    assert train.alphas == [8 / 3, 8 / 3, 4 / 3, 4 / 3]
    with pytest.raises(ValidationError, match="cannot read"):
        load_config(tmp_path / "missing.json")
