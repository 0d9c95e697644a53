"""Labeled random streams.

Every random decision in a period is driven by uniform doubles taken from one
of four labeled sub-streams. Each label owns an independent PCG64 generator
spawned from the run seed, so the values a label yields do not depend on how
other labels are consumed, nor on how the draws are chunked. This is what lets
a recorded transcript be replayed by an implementation that asks for its
draws in a different order.

Uniforms map to discrete choices through :func:`pick`; a partial Fisher-Yates
pass with one uniform per selected element implements sampling without
replacement.
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np

REVISER_SELECTION = "reviser-selection"
PAIRING = "pairing"
RATIONING = "rationing"
RESPAWN = "respawn-expectation"
INITIAL = "initial-expectation"
STEP_LABELS = (REVISER_SELECTION, PAIRING, RATIONING, RESPAWN)
LABELS = STEP_LABELS + (INITIAL,)

CHUNK = 4096


class TranscriptExhausted(RuntimeError):
    """A replay asked for more draws under a label than were recorded."""


def pick(u: float, n: int) -> int:
    """Map a uniform in [0, 1) to an integer in [0, n)."""
    k = int(u * n)
    return k if k < n else n - 1


class RandomStream:
    """Per-label buffered uniform streams derived from a single seed."""

    def __init__(self, seed: int) -> None:
        children = np.random.SeedSequence(seed).spawn(len(LABELS))
        self._gens = {lab: np.random.Generator(np.random.PCG64(ss)) for lab, ss in zip(LABELS, children)}
        self._buf = {lab: np.empty(0) for lab in LABELS}
        self._pos = dict.fromkeys(LABELS, 0)
        self._transcript: list[tuple[str, np.ndarray]] | None = None

    # buffer management, used by the compiled kernels
    def reserve(self, label: str, n: int) -> None:
        buf, pos = self._buf[label], self._pos[label]
        if buf.size - pos >= n:
            return
        fresh = self._gens[label].random(max(n, CHUNK))
        self._buf[label] = np.concatenate([buf[pos:], fresh])
        self._pos[label] = 0

    def buffer(self, label: str) -> tuple[np.ndarray, int]:
        return self._buf[label], self._pos[label]

    def advance(self, label: str, new_pos: int) -> None:
        old = self._pos[label]
        if new_pos < old or new_pos > self._buf[label].size:
            raise ValueError(f"invalid cursor move on {label!r}: {old} -> {new_pos}")
        if self._transcript is not None and new_pos > old:
            self._transcript.append((label, self._buf[label][old:new_pos].copy()))
        self._pos[label] = new_pos

    def uniforms(self, label: str, n: int) -> np.ndarray:
        self.reserve(label, n)
        pos = self._pos[label]
        out = self._buf[label][pos : pos + n].copy()
        self.advance(label, pos + n)
        return out

    # transcript recording
    def start_recording(self) -> None:
        self._transcript = []

    def stop_recording(self) -> list[tuple[str, np.ndarray]]:
        out, self._transcript = self._transcript or [], None
        return out


class ReplayStream:
    """Serves draws from a recorded transcript, label by label."""

    def __init__(self, transcript: list[tuple[str, np.ndarray]]) -> None:
        parts: dict[str, list[np.ndarray]] = defaultdict(list)
        for label, values in transcript:
            parts[label].append(np.asarray(values, dtype=float))
        self._data = {lab: np.concatenate(v) for lab, v in parts.items()}
        self._pos: dict[str, int] = defaultdict(int)

    def uniforms(self, label: str, n: int) -> np.ndarray:
        data = self._data.get(label, np.empty(0))
        pos = self._pos[label]
        if pos + n > data.size:
            raise TranscriptExhausted(f"{label!r}: wanted {n} draws at {pos}, transcript holds {data.size}")
        self._pos[label] = pos + n
        return data[pos : pos + n]

    def uniform(self, label: str) -> float:
        return float(self.uniforms(label, 1)[0])

    def unused(self) -> dict[str, int]:
        return {lab: d.size - self._pos[lab] for lab, d in self._data.items() if d.size - self._pos[lab]}
