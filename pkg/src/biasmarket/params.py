"""Model configuration."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

PAIRING_MODES = ("revisers", "anyone")


class ConfigError(ValueError):
    """Raised when a parameter falls outside its admissible range."""


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class Params:
    n_agents: int = 1000
    alpha: float = 0.5
    sigma: float = 0.5
    gamma: float = 0.5
    cost: float = 0.005
    p0: float = 0.9
    w0: float = 1.0
    l0: float = 1.0
    max_steps: int = 100
    steady_tol: float = 1e-4
    seed: int = 0
    fundamental: float = 0.5
    # "revisers": revisers are matched among themselves; "anyone": each reviser
    # meets a random other agent who does not update.
    pairing: str = "revisers"

    def __post_init__(self) -> None:
        _check(isinstance(self.n_agents, int) and self.n_agents >= 1, "n_agents ≥ 1 (integer)")
        for name in ("alpha", "sigma", "gamma", "p0", "fundamental"):
            v = getattr(self, name)
            _check(0.0 <= v <= 1.0, f"{name} ∈ [0,1]")
        _check(0.0 < self.cost < 1.0, "cost ∈ (0,1)")
        _check(self.w0 > 0.0 and math.isfinite(self.w0), "w0 > 0")
        _check(0.0 < self.l0 <= self.w0, "l0 ∈ (0, w0]")
        _check(isinstance(self.max_steps, int) and self.max_steps >= 1, "max_steps ≥ 1 (integer)")
        _check(self.steady_tol > 0.0, "steady_tol > 0")
        _check(isinstance(self.seed, int) and 0 <= self.seed < 2**64, "seed ∈ [0, 2^64)")
        _check(self.pairing in PAIRING_MODES, f"pairing ∈ {{{', '.join(PAIRING_MODES)}}}")

    @property
    def n_revisers(self) -> int:
        return round_half_up(self.gamma * self.n_agents)

    def with_(self, **changes) -> "Params":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_types(cls) -> dict[str, type]:
        hints = {"int": int, "float": float, "str": str}
        return {f.name: hints[f.type] for f in fields(cls)}


def _check(ok: bool, bound: str) -> None:
    if not ok:
        raise ConfigError(f"parameter out of range: {bound}")
