import json

import numpy as np
import pytest
import yaml

from fumot.grid import SpatialGrid
from fumot.harness import (ConfigError, build_coefficients, build_source, load_config, relative_l2,
                           transfer)
from fumot.harness.cli import EXIT_CONFIG, main
from fumot.harness.config import GridSpec, default_config, inverse_crime_guard
from fumot.harness.io import read_field, read_pgm, write_field, write_manifest, write_pgm, write_table
from fumot.harness.phantoms import (DerenzoLayout, derenzo, derenzo_discs, phantom,
                                    reference_coordinates, shepp_logan)
from fumot.skeleton import LocalizedSource


# ---------------------------------------------------------------- phantoms
@pytest.mark.parametrize("name,params", [("shepp-logan-modified", {"lo": 0.1, "hi": 1.0}),
                                         ("derenzo", {}), ("affine", {"a": 1, "b": 2, "c": 3})])
def test_phantoms_agree_on_shared_nodes(name, params):
    coarse = SpatialGrid("unit-square", 17)
    fine = SpatialGrid("unit-square", 33)
    assert np.array_equal(phantom(name, coarse, **params), phantom(name, fine, **params)[::2, ::2])


def test_shepp_logan_range_and_levels():
    g = SpatialGrid("unit-square", 129)
    f = shepp_logan(g, 0.1, 1.0)
    assert f.min() == pytest.approx(0.1) and f.max() == pytest.approx(1.0)
    # outside the skull, on the skull and in the brain
    X, Y = reference_coordinates(g)
    assert f[0, 0] == pytest.approx(0.1)
    assert f[64, 64] == pytest.approx(0.1 + 0.9 * 0.2)


def test_derenzo_has_two_levels_and_disjoint_discs():
    g = SpatialGrid("unit-disk", 65)
    f = derenzo(g)
    assert set(np.unique(f[g.inside])) == {0.2, 0.8}
    d = derenzo_discs()
    assert len(np.unique(d[:, 2])) == 6
    dist = np.linalg.norm(d[:, None, :2] - d[None, :, :2], axis=-1) + 9 * np.eye(len(d))
    assert np.all(dist >= d[:, None, 2] + d[None, :, 2])
    assert np.all(np.hypot(d[:, 0], d[:, 1]) + d[:, 2] <= 0.85 + 1e-12)
    with pytest.raises(ValueError):
        DerenzoLayout(radii=(0.1, 0.1))


def test_unknown_phantom():
    with pytest.raises(ValueError):
        phantom("cat", SpatialGrid("unit-square", 5))


# ---------------------------------------------------------------- builders
def test_build_coefficients_and_sources():
    g = SpatialGrid("unit-square", 9)
    c = build_coefficients({"sigma_xa": 0.2, "sigma_xs": {"phantom": "affine", "a": 1.0, "b": 1.0},
                            "sigma_xf": 0.3}, g)
    assert np.allclose(c.sigma_xtf, 1.5 + g.X)
    assert c.eta is None
    src = build_source({"kind": "sinusoidal", "amplitude": 5, "frequency": 4})
    assert src(0.125, 0.0) == pytest.approx(5.0)
    assert src(0.125, 0.125) == pytest.approx(10.0)
    assert build_source({"kind": "constant", "value": 2.0}) == 2.0
    assert isinstance(build_source({"kind": "spots", "n": 4, "h": 0.1}), LocalizedSource)
    with pytest.raises(ConfigError):
        build_source({"kind": "laser"})


def test_transfer_is_exact_on_shared_nodes_and_bilinear():
    coarse = SpatialGrid("unit-square", 9)
    fine = SpatialGrid("unit-square", 17)
    f = 1 + 2 * fine.X - fine.Y + fine.X * fine.Y
    assert np.array_equal(transfer(f, fine, coarse), f[::2, ::2])
    up = transfer(f[::2, ::2], coarse, fine)
    assert np.allclose(up, f, atol=1e-13)


def test_relative_l2():
    g = SpatialGrid("unit-square", 9)
    ref = np.ones(g.shape)
    assert relative_l2(1.1 * ref, ref, g) == pytest.approx(0.1)
    assert relative_l2(ref, ref, g) == 0.0


# ---------------------------------------------------------------- config
def test_default_config_grids_are_nested():
    cfg = load_config("example2")
    assert (cfg.data_grid.n - 1) % (cfg.grid.n - 1) == 0
    assert cfg.data_grid.M >= cfg.grid.M
    large = load_config("example2", preset="paper")
    assert large.grid.n > cfg.grid.n


def test_config_file_and_overrides(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump({"grid": {"n": 17}, "noise": {"level": 0.02}}))
    cfg = load_config("reconstruct-sigma", p, overrides={"seed": 4})
    assert cfg.grid.n == 17 and cfg.grid.M == 32
    assert cfg.noise_level == 0.02 and cfg.seed == 4
    assert yaml.safe_load(cfg.dump())["grid"]["n"] == 17


@pytest.mark.parametrize("bad", [{"noise": {"level": 1.5}}, {"g_aniso": 1.0}, {"grid": {"M": 7}},
                                 {"grid": {"kind": "torus"}}, {"data_grid": {"n": 33}},
                                 {"grid": {"n": "many"}}])
def test_config_rejects_invalid_values(bad):
    with pytest.raises(ConfigError):
        load_config("example2", overrides=bad)


def test_config_rejects_unknown_names(tmp_path):
    with pytest.raises(ConfigError):
        default_config("nonsense")
    with pytest.raises(ConfigError):
        default_config("forward", "huge")
    p = tmp_path / "list.yaml"
    p.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config("forward", p)


def test_inverse_crime_guard():
    g = SpatialGrid("unit-square", 9)
    with pytest.raises(ConfigError):
        inverse_crime_guard(g, g, 8, 8)
    with pytest.raises(ConfigError):
        inverse_crime_guard(SpatialGrid("unit-square", 9), g, 8, 8)
    with pytest.raises(ConfigError):
        inverse_crime_guard(GridSpec("unit-square", 17, 8), GridSpec("unit-square", 9, 16))
    with pytest.raises(ConfigError):
        inverse_crime_guard(GridSpec("unit-disk", 17, 8), GridSpec("unit-square", 9, 8))
    inverse_crime_guard(GridSpec("unit-square", 17, 16), GridSpec("unit-square", 9, 16))


# ---------------------------------------------------------------- io
def test_field_round_trip(tmp_path, rng):
    data = rng.standard_normal((5, 7))
    p = write_field(tmp_path / "f.csv", data, "unit-square", "sigma_xf", pgm=True)
    back = read_field(p)
    assert np.array_equal(back.data, data)
    assert (back.nx, back.ny, back.domain, back.channel) == (5, 7, "unit-square", "sigma_xf")
    img, lo, hi = read_pgm(tmp_path / "f.pgm")
    assert img.shape == (7, 5)
    assert lo == pytest.approx(data.min()) and hi == pytest.approx(data.max())
    with pytest.raises(ValueError):
        write_field(tmp_path / "g.csv", data, "unit square", "x")
    (tmp_path / "bad.csv").write_text("1,2\n")
    with pytest.raises(ValueError):
        read_field(tmp_path / "bad.csv")


def test_pgm_orientation_and_nonfinite(tmp_path):
    data = np.array([[0.0, 1.0], [np.nan, 2.0]])
    img, lo, hi = read_pgm(write_pgm(tmp_path / "a.pgm", data))
    # y grows upwards: the top row holds y = 1
    assert img[0].tolist() == [128, 255] and img[1].tolist() == [0, 0]


def test_table_and_manifest(tmp_path):
    p = write_table(tmp_path / "t.csv", [[1, 2], [3, 4]], ["a", "b"])
    assert p.read_text().splitlines()[0] == "a,b"
    m = write_manifest(tmp_path / "m.json", {"x": np.arange(2)}, {"seed": 1}, {"err": np.float64(0.5)})
    doc = json.loads(m.read_text())
    assert doc["config"]["x"] == [0, 1] and doc["results"]["err"] == 0.5
    assert "numpy" in doc["versions"]


# ---------------------------------------------------------------- cli
def test_cli_check_conditions(capsys):
    assert main(["check-conditions", "--no-output"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passes"] is False
    assert report["delta"] == pytest.approx(10.0 / 10.7, rel=1e-12)


def test_cli_config_errors(tmp_path, capsys):
    assert main(["forward", "--noise", "2"]) == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config"
    assert main(["forward", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
    with pytest.raises(SystemExit):
        main(["no-such-experiment"])


def test_cli_forward_writes_outputs(tmp_path, capsys):
    cfg = tmp_path / "small.yaml"
    cfg.write_text(yaml.safe_dump({"grid": {"n": 9, "M": 8}, "data_grid": {"n": 17, "M": 8},
                                   "solver": {"refine": 2, "data_refine": 2}}))
    out = tmp_path / "run"
    assert main(["forward", "--config", str(cfg), "--out", str(out), "--seed", "3"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["u_max"] <= 10.0 + 1e-9 and report["u_min"] >= 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seeds"]["seed"] == 3
    assert read_field(out / "fluence.csv").data.shape == (9, 9)
