"""Flat ``key=value`` configuration files with command-line overrides."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

from .params import ConfigError, Params
from .sweep import DEFAULT_GAMMAS, SweepSpec, unit_grid

SWEEP_KEYS = {"step": float, "replications": int, "master_seed": int, "gammas": "floats"}


def parse_pairs(lines: Iterable[str], origin: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{n}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{origin}:{n}: empty key")
        out[key] = value
    return out


def _convert(key: str, value: str, kind) -> object:
    try:
        if kind == "floats":
            return tuple(float(v) for v in value.split(",") if v.strip())
        if kind is int:
            return int(value)
        if kind is float:
            return float(value)
        return value
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {value!r} as {getattr(kind, '__name__', kind)}") from exc


def load_values(path: str | Path | None, overrides: Iterable[str] = ()) -> dict[str, str]:
    """Raw string values: file first, then ``key=value`` overrides in order."""
    values: dict[str, str] = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc.strerror}") from exc
        values.update(parse_pairs(text.splitlines(), str(p)))
    values.update(parse_pairs(overrides, "--set"))
    return values


def build_params(values: dict[str, str], extra_keys: dict | None = None) -> Params:
    types = Params.field_types()
    allowed = set(types) | set(extra_keys or {})
    unknown = sorted(set(values) - allowed)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    kwargs = {k: _convert(k, v, types[k]) for k, v in values.items() if k in types}
    return Params(**kwargs)


def build_sweep(values: dict[str, str]) -> SweepSpec:
    base = build_params(values, SWEEP_KEYS)
    sv = {k: _convert(k, v, SWEEP_KEYS[k]) for k, v in values.items() if k in SWEEP_KEYS}
    grid = unit_grid(sv.get("step", 0.01))
    return SweepSpec(
        alphas=grid,
        sigmas=grid,
        gammas=sv.get("gammas", DEFAULT_GAMMAS),
        replications=sv.get("replications", 10),
        base_params=base,
        master_seed=sv.get("master_seed", 0),
    )


def parse_config(path: str | Path | None = None, overrides: Iterable[str] = (), kind: str = "params"):
    """Params (``kind="params"``) or SweepSpec (``kind="sweep"``) from a file plus overrides."""
    values = load_values(path, overrides)
    if kind == "params":
        return build_params(values)
    if kind == "sweep":
        return build_sweep(values)
    raise ValueError(f"unknown config kind {kind!r}")


def sweep_values(spec: SweepSpec) -> dict[str, object]:
    """Config values that rebuild ``spec`` through :func:`build_sweep`."""
    step = spec.alphas[1] - spec.alphas[0] if len(spec.alphas) > 1 else 1.0
    return {
        "step": round(step, 12),
        "gammas": ",".join(repr(g) for g in spec.gammas),
        "replications": spec.replications,
        "master_seed": spec.master_seed,
    }
