"""Experiment configuration loading and validation.

One YAML file per experiment: a ``kind`` key selects the experiment and the
rest is a key/value tree validated against the schema below.  Unknown keys
are rejected so typos fail fast.  Link and distribution descriptors are
shared across experiment kinds.
"""

from __future__ import annotations

from pathlib import Path

import yaml

from sphindex.links import LinkFunction
from sphindex.measures import InputDistribution, ScalarLaw


class ConfigError(ValueError):
    """Malformed experiment configuration."""


_LINK_KEYS = {"kind", "coeffs", "degree", "d", "radius", "normalize", "wiggle"}
_DIST_KEYS = {"kind", "d", "radius", "radii", "weights", "eta", "p"}
_SCHEDULE_KEYS = {"name", "eps", "s", "delta"}

SCHEMAS = {
    "landscape_curve": {
        "kind", "seed", "out", "plots", "degree", "d_list", "m_points", "max_degree",
    },
    "sgd_runs": {
        "kind", "seed", "out", "plots", "d", "link", "dist", "schedule", "steps",
        "trials", "record_points", "stop_level", "groups", "levels", "threads",
    },
    "scaling_sweep": {
        "kind", "seed", "out", "plots", "link", "dist", "schedule", "d_list",
        "trials", "horizon_factor", "weak_level", "strong_level", "threads",
    },
    "polynomial_audit": {
        "kind", "seed", "out", "plots", "j_max", "d_list", "n_nodes", "checks",
    },
    "perturbation_report": {
        "kind", "seed", "out", "plots", "d", "link", "dist", "n_samples",
        "m_grid", "stein_suite", "w1", "threads",
    },
}

_GROUP_KEYS = {"init", "m0", "label"}
_W1_KEYS = {"n_subspaces", "n_per_subspace", "exact_threshold"}


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            config = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config must be a key/value mapping")
    return validate_config(config)


def validate_config(config: dict) -> dict:
    kind = config.get("kind")
    if kind not in SCHEMAS:
        raise ConfigError(f"unknown or missing experiment kind {kind!r}; "
                          f"expected one of {sorted(SCHEMAS)}")
    _check_keys(config, SCHEMAS[kind], where="top level")
    if "link" in config:
        _check_keys(config["link"], _LINK_KEYS, where="link")
    if "dist" in config:
        _check_keys(config["dist"], _DIST_KEYS, where="dist")
    if "schedule" in config:
        _check_keys(config["schedule"], _SCHEDULE_KEYS, where="schedule")
    for group in config.get("groups", []):
        _check_keys(group, _GROUP_KEYS, where="groups[]")
    if "w1" in config:
        _check_keys(config["w1"], _W1_KEYS, where="w1")
    return config


def _check_keys(mapping, allowed, where):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def build_link(spec: dict, d: int | None = None) -> LinkFunction:
    kind = spec.get("kind")
    if kind == "hermite":
        return LinkFunction.from_hermite(spec["coeffs"])
    if kind == "gegenbauer":
        dim = spec.get("d", d)
        if dim is None:
            raise ConfigError("gegenbauer link needs a dimension")
        return LinkFunction.gegenbauer_pure(
            int(spec["degree"]), int(dim), spec.get("radius"),
            normalize=bool(spec.get("normalize", True)),
        )
    if kind == "identity":
        return LinkFunction.identity()
    if kind == "monotone_sine":
        return LinkFunction.monotone_sine(float(spec.get("wiggle", 0.1)))
    raise ConfigError(f"unknown link kind {kind!r}")


def build_dist(spec: dict, d: int | None = None) -> InputDistribution:
    kind = spec.get("kind")
    dim = int(spec.get("d", d) or 0)
    if dim < 3:
        raise ConfigError("distribution needs a dimension >= 3")
    if kind == "gaussian":
        return InputDistribution.gaussian(dim)
    if kind == "uniform_sphere":
        return InputDistribution.uniform_sphere(dim, spec.get("radius"))
    if kind == "radial_mixture":
        return InputDistribution.radial_mixture(dim, spec["radii"], spec["weights"])
    if kind == "product":
        eta = spec.get("eta", "uniform")
        if isinstance(eta, str):
            law = ScalarLaw(kind=eta, p=float(spec.get("p", 0.5)))
        else:
            raise ConfigError("eta must name a scalar law")
        return InputDistribution.product(dim, law)
    raise ConfigError(f"unknown distribution kind {kind!r}")


def schedule_args(spec: dict) -> dict:
    name = spec.get("name", "manual")
    out = {"schedule": name, "eps": float(spec.get("eps", 0.5))}
    if "s" in spec:
        out["s"] = int(spec["s"])
    if "delta" in spec:
        out["delta"] = float(spec["delta"])
    return out
