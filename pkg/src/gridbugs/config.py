"""Run configuration: feature flags, stop rules, presets, config files.

A run is fully described by a :class:`ModelConfig`.  Presets ``v1``…``v16``
bundle the feature ladder (each rung enables one more capability); a flat
``key = value`` config file and CLI flags can override any field.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureSet:
    growth: bool = False
    food: bool = False
    file_output: bool = False
    histogram_output: bool = False
    mortality_reproduction: bool = False
    predators: bool = False


@dataclass(frozen=True)
class StopRule:
    """``fixed_steps``: run exactly ``value`` steps.  ``max_size_reached``:
    halt at the first step where the largest bug size >= ``value``."""

    kind: str = "fixed_steps"
    value: float = 100

    def __post_init__(self) -> None:
        if self.kind not in ("fixed_steps", "max_size_reached"):
            raise ConfigError(f"unknown stop rule {self.kind!r}")
        if self.kind == "fixed_steps" and (self.value < 0 or self.value != int(self.value)):
            raise ConfigError(f"fixed_steps wants a non-negative integer, got {self.value}")


SCHEDULERS = ("fixed", "shuffled", "sorted_desc_size")
MOVEMENT_RULES = ("random_retry", "best_food")
LAYOUTS = ("cell_object", "field")
VARIANTS = ("ghost", "field")
FOOD_MODES = ("stochastic", "habitat")


@dataclass(frozen=True)
class ModelConfig:
    width: int = 200
    height: int = 200
    seed: int = 1
    initial_bug_count: int = 4000
    initial_bug_size: float = 1.0
    initial_bug_size_sd: float = 0.0  # > 0: truncated-normal initial sizes
    move_radius: int = 4
    movement_rule: str = "random_retry"
    scheduler: str = "fixed"
    max_food_production: float = 0.01
    max_consumption: float = 1.0
    food_mode: str = "stochastic"
    habitat_file: str | None = None
    survival_probability: float = 0.95
    reproduce_threshold: float = 10.0
    offspring_count: int = 5
    offspring_place_radius: int = 3
    predator_count: int = 200
    histogram_bin_width: float = 1.0
    histogram_bins: int = 100
    food_display_max: float = 2.0
    layout: str = "cell_object"
    workers: int = 1
    variant: str = "ghost"
    halo_radius: int = 4
    exact_halo_food: bool = False
    features: FeatureSet = field(default_factory=FeatureSet)
    stop: StopRule = field(default_factory=StopRule)

    def validate(self) -> "ModelConfig":
        if self.width < 1 or self.height < 1:
            raise ConfigError(f"grid must be positive, got {self.width}x{self.height}")
        n_cells = self.width * self.height
        if not 0 <= self.initial_bug_count <= n_cells:
            raise ConfigError(
                f"initial_bug_count {self.initial_bug_count} outside [0, {n_cells}]"
            )
        if self.features.predators and not 0 <= self.predator_count <= n_cells:
            raise ConfigError(
                f"predator_count {self.predator_count} outside [0, {n_cells}]"
            )
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit value, got {self.seed}")
        if self.move_radius < 0 or 2 * self.move_radius + 1 > min(self.width, self.height):
            raise ConfigError(f"move_radius {self.move_radius} does not fit the grid")
        if self.offspring_place_radius < 0 or 2 * self.offspring_place_radius + 1 > min(
            self.width, self.height
        ):
            raise ConfigError(
                f"offspring_place_radius {self.offspring_place_radius} does not fit the grid"
            )
        for name, allowed in (
            ("movement_rule", MOVEMENT_RULES),
            ("scheduler", SCHEDULERS),
            ("layout", LAYOUTS),
            ("variant", VARIANTS),
            ("food_mode", FOOD_MODES),
        ):
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        for name in (
            "max_food_production",
            "max_consumption",
            "reproduce_threshold",
            "histogram_bin_width",
            "food_display_max",
        ):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.histogram_bin_width == 0 or self.histogram_bins < 1:
            raise ConfigError("histogram bins must be non-degenerate")
        if not 0.0 <= self.survival_probability <= 1.0:
            raise ConfigError(
                f"survival_probability {self.survival_probability} outside [0, 1]"
            )
        if self.offspring_count < 0:
            raise ConfigError("offspring_count must be >= 0")
        if self.initial_bug_size < 0 or self.initial_bug_size_sd < 0:
            raise ConfigError("initial bug size parameters must be >= 0")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.workers > 1 and self.halo_radius < self.move_radius:
            raise ConfigError(
                f"halo_radius {self.halo_radius} below move_radius {self.move_radius}; "
                "bugs could see past the halo"
            )
        if self.workers > 1 and self.features.predators and self.halo_radius < 1:
            raise ConfigError("predators need a halo_radius of at least 1")
        if self.food_mode == "habitat" and not self.habitat_file:
            raise ConfigError("food_mode=habitat requires habitat_file")
        return self


# ── presets: the feature ladder ────────────────────────────────────────────

def _ladder() -> dict[str, ModelConfig]:
    base = ModelConfig()
    rungs: dict[str, ModelConfig] = {}
    f = FeatureSet()
    rungs["v1"] = replace(base)  # movement only
    f = replace(f, growth=True)
    rungs["v2"] = replace(base, features=f)  # + fixed growth increment
    f = replace(f, food=True)
    rungs["v3"] = replace(base, features=f)  # + food production / grazing
    rungs["v4"] = rungs["v3"]  # probe rung -> `inspect` command
    rungs["v5"] = rungs["v4"]  # parameter-display rung -> config file
    f = replace(f, histogram_output=True)
    rungs["v6"] = replace(base, features=f)
    rungs["v7"] = replace(
        rungs["v6"], stop=StopRule("max_size_reached", 100.0)
    )
    f = replace(f, file_output=True)
    rungs["v8"] = replace(rungs["v7"], features=f)
    rungs["v9"] = replace(rungs["v8"], scheduler="shuffled")
    # benchmark rungs switch to a fixed step budget: with mortality and
    # reproduction in play the max-size stop may never trigger
    rungs["v10"] = replace(rungs["v9"], stop=StopRule("fixed_steps", 500))
    rungs["v11"] = replace(rungs["v10"], movement_rule="best_food")
    f = replace(f, mortality_reproduction=True)
    rungs["v12"] = replace(rungs["v11"], features=f)
    rungs["v13"] = rungs["v12"]  # population-graph rung -> stats CSV/figure
    rungs["v14"] = replace(rungs["v13"], initial_bug_size_sd=0.03)
    rungs["v15"] = replace(rungs["v14"], food_mode="habitat")
    f = replace(f, predators=True)
    rungs["v16"] = replace(
        rungs["v15"],
        features=f,
        food_mode="stochastic",
        stop=StopRule("fixed_steps", 1000),
    )
    return rungs


PRESETS = _ladder()


def preset(name: str) -> ModelConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; expected v1..v{len(PRESETS)}"
        ) from None


# ── flat key = value config files ──────────────────────────────────────────

_BOOL_WORDS = {"true": True, "false": False, "yes": True, "no": False,
               "on": True, "off": False, "1": True, "0": False}

_FEATURE_KEYS = {f.name for f in fields(FeatureSet)}
_INT_KEYS = {
    "width", "height", "seed", "initial_bug_count", "move_radius",
    "offspring_count", "offspring_place_radius", "predator_count",
    "histogram_bins", "workers", "halo_radius",
}
_FLOAT_KEYS = {
    "initial_bug_size", "initial_bug_size_sd", "max_food_production",
    "max_consumption", "survival_probability", "reproduce_threshold",
    "histogram_bin_width", "food_display_max",
}
_STR_KEYS = {"movement_rule", "scheduler", "food_mode", "habitat_file",
             "layout", "variant"}
_BOOL_KEYS = _FEATURE_KEYS | {"exact_halo_food"}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse flat ``key = value`` lines (# comments) into an override dict.

    Special keys: ``preset`` (string), ``stop`` (``fixed_steps:N`` or
    ``max_size_reached:X``).  Raises :class:`ConfigError` with the line
    number on anything malformed.
    """
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigError(f"{source}:{lineno}: empty key or value")
        try:
            out[key] = _coerce(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return out


def _coerce(key: str, value: str):
    if key == "preset":
        return value
    if key == "stop":
        kind, _, arg = value.partition(":")
        kind = kind.strip()
        try:
            num = float(arg.strip()) if arg.strip() else None
        except ValueError:
            raise ConfigError(f"bad stop rule argument {arg!r}")
        if num is None:
            raise ConfigError("stop wants 'kind:value'")
        return StopRule(kind, int(num) if kind == "fixed_steps" else num)
    if key in _INT_KEYS:
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"{key} wants an integer, got {value!r}")
    if key in _FLOAT_KEYS:
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"{key} wants a number, got {value!r}")
    if key in _BOOL_KEYS:
        try:
            return _BOOL_WORDS[value.lower()]
        except KeyError:
            raise ConfigError(f"{key} wants a boolean, got {value!r}")
    if key in _STR_KEYS:
        return value
    raise ConfigError(f"unknown key {key!r}")


def apply_overrides(cfg: ModelConfig, overrides: dict) -> ModelConfig:
    """Layer parsed overrides (feature flags included) onto a config."""
    feats = dict(
        (f.name, getattr(cfg.features, f.name)) for f in fields(FeatureSet)
    )
    plain: dict = {}
    for key, value in overrides.items():
        if key == "preset":
            continue
        if key in _FEATURE_KEYS:
            feats[key] = value
        else:
            plain[key] = value
    return replace(cfg, features=FeatureSet(**feats), **plain)


def effective_config_text(cfg: ModelConfig) -> str:
    """Deterministic key = value rendering of the whole effective config."""
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "features":
            for ff in fields(FeatureSet):
                lines.append(f"{ff.name} = {str(getattr(v, ff.name)).lower()}")
            continue
        if f.name == "stop":
            val = int(v.value) if v.kind == "fixed_steps" else v.value
            lines.append(f"stop = {v.kind}:{val}")
            continue
        if isinstance(v, bool):
            v = str(v).lower()
        elif v is None:
            continue
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
