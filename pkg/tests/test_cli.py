import json
import os

import pytest

from oamtopo import __version__
from oamtopo.cli import build_from_spec, load_document, main, parse_config
from oamtopo.channel import LinkConfig
from oamtopo.errors import ConfigError

BUNDLED = ["fig7", "fig8", "fig9", "fig10", "fig11", "alg1"]


def run(tmp_path, *argv):
    return main(list(argv) + ["--out", str(tmp_path)])


def write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def data_rows(path):
    with open(path, newline="") as fh:
        return [line for line in fh.read().split("\n") if not line.startswith("#")]


def test_defaults_are_table_ii():
    cfg = parse_config({})
    assert cfg.link == LinkConfig()
    assert cfg.link.distance == 100.0 and cfg.link.carrier == 5.8e9
    assert cfg.link.noise_power == 0.01 and cfg.link.power_budget == 1.0
    assert cfg.link.bandwidth == 1e7 and cfg.link.aperture == 2.0


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_configs_parse(name):
    cfg = parse_config(load_document(name))
    assert cfg.link.aperture == 2.0


def test_topology_catalog_writes_seven_or_more(tmp_path):
    assert run(tmp_path / "o", "topology", "--catalog", "--budget", "16") == 0
    assert len(os.listdir(tmp_path / "o")) >= 7


def test_topology_explicit_cuca(tmp_path):
    assert run(tmp_path, "topology", "--family", "cuca", "--rings", "4", "--k", "4",
               "--radii", "2,1.5,1,0.5") == 0
    rows = data_rows(tmp_path / "cuca_4x4.csv")
    assert rows[0] == "ring,index,x_m,y_m,z_m"
    assert rows[1] == "0,0,2,0,0"
    assert rows[13].startswith("3,0,0.5,0")


def test_topology_default_radii_uniform(tmp_path):
    assert run(tmp_path, "topology", "--family", "cuca", "--rings", "4", "--k", "4",
               "--format", "json") == 0
    doc = json.loads((tmp_path / "cuca_4x4.json").read_text())
    assert [r["radius"] for r in doc["topology"]["parameters"]["rings"]] == [2.0, 1.5, 1.0, 0.5]
    assert doc["meta"]["tool"] == f"oamtopo {__version__}"


def test_invalid_topology_exit_code(tmp_path, capsys):
    assert run(tmp_path, "topology", "--family", "uca", "--k", "5") == 2
    assert "configuration error" in capsys.readouterr().err


def test_empty_snr_grid_is_error(tmp_path):
    cfg = write(tmp_path, {"topologies": [{"family": "uca", "k": 8}], "sweep": {"snr_db": []}})
    assert run(tmp_path / "o", "se", "--config", cfg) == 2
    assert not (tmp_path / "o").exists()


@pytest.mark.parametrize("doc", [
    {"link": {"distance": -1}},
    {"link": {"wavelength": 3}},
    {"output": {"format": "xml"}},
    {"monte_carlo": {"frames": 0}},
    {"topologies": ["uca"]},
])
def test_fail_fast_validation(doc):
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_unreadable_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(tmp_path, "se", "--config", str(bad)) == 2
    assert run(tmp_path, "se", "--config", str(tmp_path / "missing.json")) == 2


def test_unknown_subcommand_usage(capsys):
    with pytest.raises(SystemExit) as info:
        main(["bogus"])
    assert info.value.code != 0
    assert "usage" in capsys.readouterr().err


def test_header_and_line_endings(tmp_path):
    cfg = write(tmp_path, {"topologies": [{"family": "uca", "k": 8}], "sweep": {"snr_db": [0, 10]}})
    assert run(tmp_path / "o", "se", "--config", cfg, "--seed", "42") == 0
    raw = (tmp_path / "o" / "se.csv").read_bytes()
    assert b"\r" not in raw
    header = raw.split(b"\n")[0].decode()
    assert header.startswith(f"# oamtopo {__version__} command=se config_sha256=")
    assert header.endswith("seed=42")
    assert not [f for f in os.listdir(tmp_path / "o") if f.startswith(".tmp")]


def test_seed_changes_hash_but_not_se_rows(tmp_path):
    cfg = write(tmp_path, {"topologies": [{"family": "uca", "k": 8}], "sweep": {"snr_db": [0]}})
    run(tmp_path / "a", "se", "--config", cfg, "--seed", "1")
    run(tmp_path / "b", "se", "--config", cfg, "--seed", "2")
    a, b = data_rows(tmp_path / "a" / "se.csv"), data_rows(tmp_path / "b" / "se.csv")
    assert a == b


def test_ber_seeded_repeatable(tmp_path):
    cfg = write(tmp_path, {"topologies": [{"family": "cuca", "rings": 2, "k": 8}],
                           "sweep": {"snr_db": [70, 90]}, "monte_carlo": {"frames": 300}})
    run(tmp_path / "a", "ber", "--config", cfg, "--seed", "42")
    run(tmp_path / "b", "ber", "--config", cfg, "--seed", "42")
    assert (tmp_path / "a" / "ber.csv").read_bytes() == (tmp_path / "b" / "ber.csv").read_bytes()


def test_surface_and_switchcost(tmp_path):
    cfg = write(tmp_path, {"topologies": [{"family": "cuca", "rings": 2, "k": 8}],
                           "sweep": {"distance_m": [50, 100], "radius_m": [1.0, 2.0]}})
    assert run(tmp_path / "s", "surface", "--config", cfg) == 0
    rows = data_rows(tmp_path / "s" / "surface_cuca_2x8.csv")
    assert rows[0] == "d_m,r_m,se_bps" and len([r for r in rows if r]) == 5
    assert run(tmp_path / "c", "switchcost") == 0
    rows = data_rows(tmp_path / "c" / "switchcost.csv")
    assert len([r for r in rows if r]) == 37


def test_optimize_json_fields(tmp_path):
    cfg = write(tmp_path, {"optimizer": {"budget": 4, "resolution": 0.5}})
    assert run(tmp_path / "o", "optimize", "--config", cfg, "--format", "json") == 0
    doc = json.loads((tmp_path / "o" / "optimize.json").read_text())
    for key in ("family", "N", "K", "radii", "capacity_bps", "trace", "positions", "seed", "cfg"):
        assert key in doc["result"]
    assert doc["result"]["N"] == 1 and doc["result"]["K"] == 4


def test_scaled_surface_builder_keeps_proportions():
    from oamtopo.cli import scaled_builder
    top = scaled_builder({"family": "fuca", "n": 4, "k": 4, "primary": 1.2, "secondary": 0.8},
                         LinkConfig())(1.0)
    assert top.fuca.primary_radius == pytest.approx(0.6)
    assert top.fuca.secondary_radius == pytest.approx(0.4)


def test_spec_builder_families():
    link = LinkConfig()
    assert build_from_spec({"family": "qfuca", "count": 16}, link)[0].label == "QFUCA-16"
    assert len(build_from_spec({"figure_catalog": True}, link)) == 6
    with pytest.raises(ConfigError):
        build_from_spec({"family": "cuca", "rings": 2, "k": 4, "radii": [2.0]}, link)
