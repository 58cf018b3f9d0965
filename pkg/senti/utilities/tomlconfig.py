import copy
import pathlib

import appdirs
import toml

from ..errors import ConfigError

_BUNDLED_DIR = pathlib.Path(__file__).parent.parent / "config"


def _merge(base: dict, override: dict, source: str, prefix: str = "") -> dict:
    """Copy of `base` updated from `override`; keys unknown to `base` are errors."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        dotted = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(f"{source}: unknown key '{dotted}'")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{source}: '{dotted}' must be a table")
            merged[key] = _merge(base[key], value, source, prefix=f"{dotted}.")
        else:
            merged[key] = value
    return merged


def _load(path: pathlib.Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fp:
            return toml.load(fp)
    except toml.TomlDecodeError as error:
        raise ConfigError(f"{path}: invalid TOML ({error})") from None


class TomlConfig:
    """Read-only layered configuration for one tool.

    bundled config/<tool>/config.toml  <-  user config dir  <-  explicit file
    """

    def __init__(self, tool: str, override: str | pathlib.Path | None = None, use_user_config: bool = True):
        self.tool = tool
        self.base_config_path = _BUNDLED_DIR / tool / "config.toml"
        self.user_config_path = pathlib.Path(appdirs.user_config_dir()) / "senti" / tool / "config.toml"

        self.config = _load(self.base_config_path)
        if use_user_config and self.user_config_path.exists():
            self.config = _merge(self.config, _load(self.user_config_path), str(self.user_config_path))
        if override is not None:
            override = pathlib.Path(override)
            self.config = _merge(self.config, _load(override), str(override))

    def __getitem__(self, key):
        return self.config[key]

    def __contains__(self, key):
        return key in self.config

    def __len__(self):
        return len(self.config)

    def __iter__(self):
        return iter(self.config)

    def __repr__(self):
        return f"TomlConfig({self.tool})"

    def as_dict(self) -> dict:
        return copy.deepcopy(self.config)
