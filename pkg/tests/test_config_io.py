import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from odekit.config import EXPERIMENTS, config_hash, load_config, parse_config
from odekit.errors import ConfigError
from odekit.io import (
    dumps_json,
    read_params,
    read_pgm,
    read_trajectory_csv,
    to_gray8,
    write_params,
    write_pgm,
    write_trajectory_csv,
)


class TestConfig:
    @pytest.mark.parametrize("experiment", EXPERIMENTS)
    def test_empty_config_is_canonical(self, experiment):
        cfg = parse_config(experiment, {})
        assert cfg.experiment == experiment and cfg.seed == 42

    @pytest.mark.parametrize(
        "experiment,data,field",
        [
            ("solve", {"grid": {"n_steps": 0}}, "grid.n_steps"),
            ("solve", {"method": "rk45"}, "method"),
            ("solve", {"model": {"name": "compartment", "n": 1}}, "model.compartment.n"),
            ("solve", {"grid": {"t0": 5, "t1": 1}}, "grid"),
            ("solve", {"bogus": 1}, "bogus"),
            ("estimate", {"theta0": [1.0]}, "<root>"),
            ("estimate", {"learning_rate": -1}, "learning_rate"),
            ("train-node", {"epochs": 0}, "epochs"),
            ("train-node", {"hidden": "many"}, "hidden"),
            ("react-diffuse", {"stride": 0}, "stride"),
            ("react-diffuse", {"initial": {"kind": "noise"}}, "initial.kind"),
            ("bench", {"compartments": [1]}, "<root>"),
        ],
    )
    def test_errors_name_the_field(self, experiment, data, field):
        with pytest.raises(ConfigError) as info:
            parse_config(experiment, data)
        assert info.value.field == field
        assert str(info.value).startswith(field)

    def test_experiment_mismatch(self):
        with pytest.raises(ConfigError) as info:
            parse_config("solve", {"experiment": "bench"})
        assert info.value.field == "experiment"

    def test_missing_config_path_means_defaults(self):
        assert load_config("estimate", None) == parse_config("estimate", {})

    def test_seed_override(self):
        assert parse_config("solve", {"seed": 1}, seed=7).seed == 7

    def test_malformed_json_reports_position(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{\n  "seed": 1,\n}')
        with pytest.raises(ConfigError) as info:
            load_config("solve", path)
        assert "line 3" in str(info.value)

    def test_hash_depends_on_content_only(self):
        a = parse_config("solve", {"seed": 1, "method": "rk4"})
        b = parse_config("solve", {"method": "rk4", "seed": 1})
        c = parse_config("solve", {"seed": 2, "method": "rk4"})
        assert config_hash(a) == config_hash(b) != config_hash(c)
        assert len(config_hash(a)) == 64

    def test_estimate_samples_must_divide_steps(self):
        with pytest.raises(ConfigError):
            parse_config("estimate", {"observations": {"samples": 300}})


class TestFiles:
    def test_trajectory_csv_header_and_round_trip(self, tmp_path):
        t = np.linspace(0, 1, 4)
        y = np.array([[0.1, 1 / 3], [np.pi, -1e-300], [1e17, 2.5], [0.0, -0.0]])
        path = tmp_path / "traj.csv"
        write_trajectory_csv(path, t, y)
        assert path.read_text().splitlines()[0] == "t,y0,y1"
        t2, y2 = read_trajectory_csv(path)
        np.testing.assert_array_equal(t2, t)
        np.testing.assert_array_equal(y2, y)

    @settings(max_examples=30, deadline=None)
    @given(y=arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 3)), elements=st.floats(allow_nan=False, allow_infinity=False)))
    def test_csv_lossless(self, tmp_path_factory, y):
        path = tmp_path_factory.mktemp("csv") / "t.csv"
        t = np.arange(y.shape[0], dtype=float)
        write_trajectory_csv(path, t, y)
        np.testing.assert_array_equal(read_trajectory_csv(path)[1], y)

    def test_gray8_mapping(self):
        np.testing.assert_array_equal(to_gray8(np.array([[0.0, 0.5, 1.0]])), [[0, 128, 255]])
        np.testing.assert_array_equal(to_gray8(np.zeros((2, 2))), np.zeros((2, 2)))
        assert to_gray8(np.array([[-1.0, 2.0]]))[0, 0] == 0

    def test_pgm_header_and_round_trip(self, tmp_path):
        field = np.random.default_rng(0).uniform(size=(3, 5))
        path = tmp_path / "f.pgm"
        write_pgm(path, field)
        raw = path.read_bytes()
        assert raw.startswith(b"P5\n5 3\n255\n")
        assert len(raw) == len(b"P5\n5 3\n255\n") + 15
        np.testing.assert_array_equal(read_pgm(path), to_gray8(field))

    def test_params_file(self, tmp_path):
        theta = np.array([0.1, -2.5, 1e-20])
        path = tmp_path / "p.json"
        write_params(path, theta)
        assert isinstance(json.loads(path.read_text()), list)
        np.testing.assert_array_equal(read_params(path), theta)
        path.write_text('{"a": 1}')
        with pytest.raises(ValueError):
            read_params(path)

    def test_json_is_canonical(self):
        assert dumps_json({"b": 1, "a": [1.5]}) == '{\n  "a": [\n    1.5\n  ],\n  "b": 1\n}\n'
        with pytest.raises(ValueError):
            dumps_json({"x": float("nan")})
