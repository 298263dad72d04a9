"""Shared helpers for the test suite."""

import dataclasses

from gridbugs.config import FeatureSet, ModelConfig, StopRule


def make_config(**overrides) -> ModelConfig:
    """A small, fast world: movement-only on a 20x20 torus unless overridden.

    Feature flags may be passed directly (growth=True, ...) alongside
    ModelConfig field names.
    """
    feature_names = {f.name for f in dataclasses.fields(FeatureSet)}
    flags = {k: overrides.pop(k) for k in list(overrides) if k in feature_names}
    cfg = ModelConfig(
        width=20,
        height=20,
        initial_bug_count=40,
        seed=1,
        stop=StopRule("fixed_steps", 10),
    )
    if flags:
        cfg = dataclasses.replace(cfg, features=dataclasses.replace(cfg.features, **flags))
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg.validate()


def digests_over(world, steps: int) -> list[int]:
    from gridbugs import engine

    out = []
    for _ in range(steps):
        engine.step(world)
        out.append(engine.state_digest(world))
    return out
