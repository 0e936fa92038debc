"""
Configuration settings for the Highlight Attention Lab
"""
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ValidationError

from src.utils.errors import ConfigError
from src.utils.models import PipelineConfig

# Load environment variables
load_dotenv()


class Settings:
    """Global settings for the lab"""

    # Paths
    BASE_DIR: Path = Path(__file__).parent.parent
    DATA_DIR: Path = BASE_DIR / "data"
    OUTPUT_DIR: Path = Path(os.getenv("HAL_OUTPUT_DIR", str(BASE_DIR / "output")))
    LAYOUT_PATH: Path = Path(os.getenv("HAL_LAYOUT_PATH", str(BASE_DIR / "config" / "default_layout.json")))
    CONFIG_PATH: Path = Path(os.getenv("HAL_CONFIG_PATH", str(BASE_DIR / "config" / "pipeline.env")))

    # Run defaults
    SEED: int = int(os.getenv("HAL_SEED", "7"))
    LOG_LEVEL: str = os.getenv("HAL_LOG_LEVEL", "INFO")

    # Default screen of the study display
    SCREEN_WIDTH_PX: int = 1920
    SCREEN_HEIGHT_PX: int = 1200
    ICON_WIDTH_PX: int = 142
    ICON_HEIGHT_PX: int = 128

    # Artifact sub-directories under the output directory
    STAGE_DIRS: Dict[str, str] = {
        "simulate": "traces",
        "gaze-gen": "gaze",
        "fixations": "fixations",
        "saliency": "maps",
        "ns": "ns",
        "itti": "itti",
        "dataset": "dataset",
        "train": "model",
        "eval": "eval",
        "stats": "stats",
        "export": "figures",
    }

    @classmethod
    def validate(cls, output_dir: Optional[Path] = None) -> bool:
        """Validate settings and create output directories"""
        out = Path(output_dir) if output_dir else cls.OUTPUT_DIR
        out.mkdir(parents=True, exist_ok=True)
        for sub in cls.STAGE_DIRS.values():
            (out / sub).mkdir(parents=True, exist_ok=True)

        if not cls.LAYOUT_PATH.exists():
            raise ConfigError(f"Layout file {cls.LAYOUT_PATH} not found")

        return True

    @classmethod
    def stage_dir(cls, output_dir: Path, stage: str) -> Path:
        """Directory holding the artifacts of one stage"""
        if stage not in cls.STAGE_DIRS:
            raise ConfigError(f"Unknown stage {stage}")
        return Path(output_dir) / cls.STAGE_DIRS[stage]

    @classmethod
    def load_config(
        cls,
        path: Optional[Union[str, Path]] = None,
        overrides: Optional[Dict[str, Any]] = None,
    ) -> PipelineConfig:
        """
        Build the pipeline configuration from a KEY=VALUE file

        Keys are `FIELD` for top-level values and `SECTION__FIELD` for
        nested ones, e.g. `FIXATION__DISPERSION_PX=25`. Tuple values are
        comma separated.

        Args:
            path: Config file, defaults to CONFIG_PATH
            overrides: Top-level values that win over the file (CLI flags)

        Returns:
            Validated PipelineConfig
        """
        path = Path(path) if path else cls.CONFIG_PATH
        if not path.exists():
            raise ConfigError(f"Config file {path} not found")

        raw = dotenv_values(path)
        data: Dict[str, Any] = {"seed": cls.SEED}
        sections = PipelineConfig.model_fields

        for key, value in raw.items():
            if value is None:
                raise ConfigError(f"Config key {key} has no value")
            parts = key.lower().split("__")
            if len(parts) == 1:
                field = _field_name(sections, parts[0])
                if field is None:
                    raise ConfigError(f"Unknown config key {key}")
                data[field] = _parse_value(value)
            elif len(parts) == 2:
                section = _field_name(sections, parts[0])
                model = _section_model(section) if section else None
                if model is None:
                    raise ConfigError(f"Unknown config section in key {key}")
                field = _field_name(model.model_fields, parts[1])
                if field is None:
                    raise ConfigError(f"Unknown config key {key}")
                data.setdefault(section, {})[field] = _parse_value(value)
            else:
                raise ConfigError(f"Malformed config key {key}")

        for key, value in (overrides or {}).items():
            if value is None:
                continue
            if "." in key:
                section, field = key.split(".", 1)
                data.setdefault(section, {})[field] = value
            else:
                data[key] = value

        try:
            return PipelineConfig(**data)
        except ValidationError as e:
            raise ConfigError(f"Invalid pipeline configuration: {e}") from e


def _field_name(fields: Dict[str, Any], name: str) -> Optional[str]:
    """Model field matching a lower-cased config name (fields like `T` keep their case)"""
    return {f.lower(): f for f in fields}.get(name)


def _section_model(section: str) -> Optional[type]:
    field = PipelineConfig.model_fields.get(section)
    if field is None:
        return None
    annotation = field.annotation
    if isinstance(annotation, type) and issubclass(annotation, BaseModel):
        return annotation
    return None


def _parse_value(value: str) -> Any:
    """Comma-separated values become lists; pydantic coerces the rest"""
    value = value.strip()
    if "," in value:
        return [v.strip() for v in value.split(",") if v.strip()]
    return value


# Create settings instance
settings = Settings()
