"""Run configuration: a JSON file selecting a case and overriding mesh,
parametric-grid, enrichment and flow-solver settings."""

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .cases import CASES, make_case
from .pgd import AdsSettings
from .simple import SimpleSettings


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    case: str
    case_options: dict = field(default_factory=dict)
    ads: dict = field(default_factory=dict)
    simple: dict = field(default_factory=dict)
    output_dir: str = "out"
    csv_mirror: bool = True

    def __post_init__(self):
        if self.case not in CASES:
            raise ConfigError(f"unknown case '{self.case}'; have {sorted(CASES)}")
        valid_ads = {f.name for f in dataclasses.fields(AdsSettings)}
        bad = set(self.ads) - valid_ads
        if bad:
            raise ConfigError(f"unknown ads settings: {sorted(bad)}")
        valid_simple = {f.name for f in dataclasses.fields(SimpleSettings)}
        bad = set(self.simple) - valid_simple
        if bad:
            raise ConfigError(f"unknown simple settings: {sorted(bad)}")

    def build_case(self):
        case = make_case(self.case, **self.case_options)
        if self.simple:
            case.settings = dataclasses.replace(case.settings, **self.simple)
        return case

    def ads_settings(self):
        try:
            return AdsSettings(**self.ads)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad ads settings: {exc}") from exc


def load_config(path):
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    known = {f.name for f in dataclasses.fields(RunConfig)}
    bad = set(raw) - known
    if bad:
        raise ConfigError(f"unknown config keys: {sorted(bad)}")
    return RunConfig(**raw)
