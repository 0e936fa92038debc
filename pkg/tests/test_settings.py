from pathlib import Path

import pytest

from config.settings import Settings, settings
from src.utils.errors import ConfigError
from src.utils.models import Variant


def write_config(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "pipeline.env"
    path.write_text(text)
    return path


def test_shipped_config_loads():
    cfg = settings.load_config(Settings.BASE_DIR / "config" / "pipeline.env")
    assert cfg.participants == 28
    assert cfg.fixation.dispersion_px == 25.0
    assert cfg.itti.center_levels == (2, 3, 4)
    assert cfg.train.split == (0.6, 0.1, 0.3)
    assert cfg.hism.variant == Variant.TRAN_ENC_TASK
    assert cfg.grid.T == 60


def test_overrides_win_over_the_file(tmp_path):
    path = write_config(tmp_path, "SEED=3\nPARTICIPANTS=6\nHISM__VARIANT=tranenc\n")
    cfg = settings.load_config(path, {"seed": 11, "hism.variant": "lstm", "participants": None,
                                      "output_dir": tmp_path / "out"})
    assert cfg.seed == 11
    assert cfg.participants == 6
    assert cfg.hism.variant == Variant.LSTM
    assert cfg.output_dir == tmp_path / "out"


@pytest.mark.parametrize("text", [
    "BOGUS=1\n",
    "NOPE__FIELD=1\n",
    "FIXATION__NOPE=1\n",
    "A__B__C=1\n",
    "PARTICIPANTS=1\n",
    "TRAIN__SPLIT=0.5,0.5,0.5\n",
    "SEED\n",
])
def test_bad_config_raises(tmp_path, text):
    with pytest.raises(ConfigError):
        settings.load_config(write_config(tmp_path, text))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        settings.load_config(tmp_path / "absent.env")


def test_validate_creates_stage_dirs(tmp_path):
    assert settings.validate(tmp_path / "run")
    for sub in Settings.STAGE_DIRS.values():
        assert (tmp_path / "run" / sub).is_dir()
    assert settings.stage_dir(tmp_path, "train") == tmp_path / "model"
    with pytest.raises(ConfigError):
        settings.stage_dir(tmp_path, "deploy")


def test_upper_case_field_names_resolve(tmp_path):
    cfg = settings.load_config(write_config(tmp_path, "GRID__T=60\nHISM__T=30\nhism__d_model=16\n"))
    assert cfg.grid.T == 60
    assert cfg.hism.T == 30
    assert cfg.hism.d_model == 16


def test_grid_length_mismatch_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        settings.load_config(write_config(tmp_path, "GRID__T=30\n"))
