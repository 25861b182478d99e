"""Service config loading: defaults, validation, actionable errors."""

from __future__ import annotations

import pytest

from traytrack.config import ServiceConfig, config_from_dict, load_config
from traytrack.errors import ConfigError

MINIMAL = {"data_dir": "data"}


def write_config(tmp_path, text):
    path = tmp_path / "service.yaml"
    path.write_text(text)
    return path


def test_minimal_config_gets_defaults(tmp_path):
    cfg = load_config(write_config(tmp_path, "data_dir: data\n"))
    assert cfg.host == "127.0.0.1"
    assert cfg.port == 8077
    assert cfg.data_dir == (tmp_path / "data").resolve()
    assert cfg.static_dir is None
    assert cfg.snapshot_every == 200
    assert cfg.forecast_alpha == 0.3
    assert cfg.stability.window_frames == 10
    assert cfg.calibrations == {}
    assert cfg.tray_ids == set()


def test_full_config_round_trip(tmp_path):
    text = """
listen: "0.0.0.0:9000"
data_dir: var/data
static_dir: ../dist
snapshot_every: 50
stability:
  window_frames: 8
  stable_range_g: 0.4
  trigger_delta_g: 0.9
  tag_absent_scans: 4
  tag_present_scans: 3
  pending_timeout_s: 60
forecast:
  alpha: 0.5
trays:
  tray-1:
    tare_offset: 100
    scale_g_per_count: 0.002
  tray-2: {}
registry:
  chemicals:
    - chemical_id: etoh
      name: Ethanol
      hazard_class: flammable
  containers:
    - tag_id: "C:A"
      chemical_id: etoh
      tare_g: 50.0
      initial_gross_g: 150.0
"""
    cfg = load_config(write_config(tmp_path, text))
    assert (cfg.host, cfg.port) == ("0.0.0.0", 9000)
    assert cfg.data_dir == (tmp_path / "var/data").resolve()
    assert cfg.static_dir == (tmp_path / "../dist").resolve()
    assert cfg.snapshot_every == 50
    assert cfg.stability.window_frames == 8
    assert cfg.stability.pending_timeout_s == 60
    assert cfg.forecast_alpha == 0.5
    assert cfg.tray_ids == {"tray-1", "tray-2"}
    assert cfg.calibrations["tray-1"].tare_offset == 100
    assert cfg.calibrations["tray-1"].scale_g_per_count == 0.002
    assert cfg.calibrations["tray-2"].scale_g_per_count == 0.001
    assert cfg.registry_chemicals == [
        {"chemical_id": "etoh", "name": "Ethanol", "hazard_class": "flammable"}
    ]
    assert cfg.registry_containers[0]["tag_id"] == "C:A"


def test_missing_data_dir_rejected():
    with pytest.raises(ConfigError, match="data_dir"):
        config_from_dict({"listen": "127.0.0.1:8077"})


def test_unknown_top_level_key_rejected():
    with pytest.raises(ConfigError, match="listen_addr"):
        config_from_dict({**MINIMAL, "listen_addr": "x"})


@pytest.mark.parametrize("listen", ["8077", "localhost:", ":8077", "host:0", "host:99999", 8077])
def test_bad_listen_rejected(listen):
    with pytest.raises(ConfigError, match="listen"):
        config_from_dict({**MINIMAL, "listen": listen})


def test_ipv6_listen_parses():
    cfg = config_from_dict({**MINIMAL, "listen": "::1:8077"})
    assert (cfg.host, cfg.port) == ("::1", 8077)


def test_stability_unknown_key_rejected():
    with pytest.raises(ConfigError, match="window"):
        config_from_dict({**MINIMAL, "stability": {"window": 5}})


def test_stability_values_validated():
    with pytest.raises(ConfigError):
        config_from_dict({**MINIMAL, "stability": {"window_frames": 0}})
    with pytest.raises(ConfigError, match="integer"):
        config_from_dict({**MINIMAL, "stability": {"window_frames": 2.5}})
    with pytest.raises(ConfigError):
        config_from_dict(
            {**MINIMAL, "stability": {"trigger_delta_g": 0.1, "stable_range_g": 0.5}}
        )


def test_tray_calibration_validated():
    with pytest.raises(ConfigError, match="tare_offset"):
        config_from_dict({**MINIMAL, "trays": {"t": {"tare_offset": 1.5}}})
    with pytest.raises(ConfigError, match="scale"):
        config_from_dict({**MINIMAL, "trays": {"t": {"scale_g_per_count": 0}}})
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict({**MINIMAL, "trays": {"t": {"scale": 0.001}}})


def test_forecast_alpha_validated():
    with pytest.raises(ConfigError, match="alpha"):
        config_from_dict({**MINIMAL, "forecast": {"alpha": 0}})
    with pytest.raises(ConfigError, match="alpha"):
        config_from_dict({**MINIMAL, "forecast": {"alpha": 1.5}})


def test_snapshot_every_validated():
    with pytest.raises(ConfigError, match="snapshot_every"):
        config_from_dict({**MINIMAL, "snapshot_every": 0})
    with pytest.raises(ConfigError, match="snapshot_every"):
        config_from_dict({**MINIMAL, "snapshot_every": True})


def test_registry_entries_validated():
    with pytest.raises(ConfigError, match="chemicals"):
        config_from_dict({**MINIMAL, "registry": {"chemicals": [{"name": "X"}]}})
    with pytest.raises(ConfigError, match="containers"):
        config_from_dict(
            {**MINIMAL, "registry": {"containers": [{"tag_id": "C:A", "chemical_id": "x"}]}}
        )
    with pytest.raises(ConfigError, match="unknown registry"):
        config_from_dict({**MINIMAL, "registry": {"chems": []}})


def test_yaml_syntax_error_names_line(tmp_path):
    path = write_config(tmp_path, "data_dir: data\nstability: [unclosed\n")
    with pytest.raises(ConfigError, match="YAML"):
        load_config(path)


def test_empty_file_rejected(tmp_path):
    with pytest.raises(ConfigError, match="empty"):
        load_config(write_config(tmp_path, ""))


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.yaml")


def test_config_is_plain_dataclass(tmp_path):
    cfg = config_from_dict(MINIMAL, base_dir=tmp_path)
    assert isinstance(cfg, ServiceConfig)
    assert cfg.registry_chemicals == []
    assert cfg.registry_containers == []
