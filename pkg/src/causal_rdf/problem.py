"""Problem files: JSON documents describing a source, channel, distortion and sweep.

Example::

    {
      "horizon": 1,
      "alphabet": {"x": 2, "y": 2},
      "source": {"type": "iid", "pmf": [0.5, 0.5]},
      "channel": {"type": "memoryless", "matrix": [[0.9, 0.1], [0.1, 0.9]]},
      "distortion": [[0, 1], [1, 0]],
      "s_grid": [-4, -2, -1],
      "baa": {"tol_marginal": 1e-10, "max_iter": 10000},
      "output": {"csv": "curve.csv"}
    }

Source types are ``iid`` (``pmf``), ``markov`` (``initial``, ``transition``)
and ``explicit`` (``stages``, one nested list per stage in the kernel-table
layout of :mod:`causal_rdf.prob`).  Channels are ``memoryless`` (``matrix``)
or ``explicit``.  Numbers are plain JSON floats; rates in files are nats.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .prob import (
    CausalKernelFamily,
    KernelKind,
    family_from_stages,
    iid_source,
    indexers,
    markov_source,
    memoryless_channel,
)
from .rdf import BaaConfig, DistortionSpec, Init

_BAA_KEYS = {"tol_marginal", "tol_fixed_point", "max_iter", "init", "seed"}


class ProblemError(ValueError):
    """A problem file is malformed; ``where`` names the offending field or line."""

    def __init__(self, where: str, msg: str):
        super().__init__(f"{where}: {msg}")
        self.where = where


def _req(d: dict, key: str, where: str):
    if not isinstance(d, dict):
        raise ProblemError(where, "expected an object")
    if key not in d:
        raise ProblemError(f"{where}.{key}" if where else key, "missing required field")
    return d[key]


def _matrix(v, where: str, ndim: int | None = None) -> np.ndarray:
    try:
        arr = np.array(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemError(where, f"not a numeric array ({exc})") from None
    if ndim is not None and arr.ndim != ndim:
        raise ProblemError(where, f"expected a {ndim}-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ProblemError(where, "non-finite entry")
    return arr


def _int(v, where: str, minimum: int) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ProblemError(where, f"expected an integer >= {minimum}, got {v!r}")
    return v


@dataclass
class ProblemFile:
    horizon: int
    x_size: int
    y_size: int
    source: dict
    channel: dict | None = None
    distortion: list | None = None
    s_grid: list[float] = field(default_factory=list)
    baa: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    # -- parsing ---------------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "ProblemFile":
        if not isinstance(raw, dict):
            raise ProblemError("<root>", "expected a JSON object")
        horizon = _int(_req(raw, "horizon", ""), "horizon", 0)
        alpha = _req(raw, "alphabet", "")
        x_size = _int(_req(alpha, "x", "alphabet"), "alphabet.x", 1)
        y_size = _int(_req(alpha, "y", "alphabet"), "alphabet.y", 1)
        s_grid = raw.get("s_grid", [])
        if not isinstance(s_grid, list):
            raise ProblemError("s_grid", "expected a list of numbers")
        grid = []
        for k, s in enumerate(s_grid):
            if isinstance(s, bool) or not isinstance(s, (int, float)) or not math.isfinite(s):
                raise ProblemError(f"s_grid[{k}]", f"not a finite number: {s!r}")
            if s > 0:
                raise ProblemError(f"s_grid[{k}]", f"slope must be <= 0, got {s}")
            grid.append(float(s))
        baa = raw.get("baa", {})
        if not isinstance(baa, dict) or set(baa) - _BAA_KEYS:
            raise ProblemError("baa", f"allowed keys are {sorted(_BAA_KEYS)}")
        pf = cls(
            horizon=horizon,
            x_size=x_size,
            y_size=y_size,
            source=_req(raw, "source", ""),
            channel=raw.get("channel"),
            distortion=raw.get("distortion"),
            s_grid=grid,
            baa=dict(baa),
            output=dict(raw.get("output", {})),
        )
        # build everything once so that errors surface at load time
        pf.build_source()
        if pf.channel is not None:
            pf.build_channel()
        if pf.distortion is not None:
            pf.build_distortion()
        pf.baa_config()
        return pf

    @classmethod
    def loads(cls, text: str) -> "ProblemFile":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProblemError(f"line {exc.lineno} col {exc.colno}", exc.msg) from None
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path: str | Path) -> "ProblemFile":
        return cls.loads(Path(path).read_text())

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "horizon": self.horizon,
            "alphabet": {"x": self.x_size, "y": self.y_size},
            "source": self.source,
        }
        if self.channel is not None:
            out["channel"] = self.channel
        if self.distortion is not None:
            out["distortion"] = self.distortion
        out["s_grid"] = list(self.s_grid)
        if self.baa:
            out["baa"] = self.baa
        if self.output:
            out["output"] = self.output
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps() + "\n")

    # -- module inputs ---------------------------------------------------

    def build_source(self) -> CausalKernelFamily:
        src = self.source
        kind = _req(src, "type", "source")
        try:
            if kind == "iid":
                pmf = _matrix(_req(src, "pmf", "source"), "source.pmf", 1)
                self._check_len(pmf, self.x_size, "source.pmf")
                return iid_source(pmf, self.horizon, self.y_size)
            if kind == "markov":
                init = _matrix(_req(src, "initial", "source"), "source.initial", 1)
                trans = _matrix(_req(src, "transition", "source"), "source.transition", 2)
                self._check_len(init, self.x_size, "source.initial")
                return markov_source(init, trans, self.horizon, self.y_size)
            if kind == "explicit":
                return self._explicit(KernelKind.SOURCE_FB, _req(src, "stages", "source"), "source.stages")
        except ProblemError:
            raise
        except ValueError as exc:
            raise ProblemError("source", str(exc)) from None
        raise ProblemError("source.type", f"unknown source type {kind!r}")

    def build_channel(self) -> CausalKernelFamily:
        ch = self.channel
        if ch is None:
            raise ProblemError("channel", "this command needs a channel")
        kind = _req(ch, "type", "channel")
        try:
            if kind == "memoryless":
                m = _matrix(_req(ch, "matrix", "channel"), "channel.matrix", 2)
                if m.shape != (self.x_size, self.y_size):
                    raise ProblemError("channel.matrix", f"expected shape {(self.x_size, self.y_size)}, got {m.shape}")
                return memoryless_channel(m, self.horizon)
            if kind == "explicit":
                return self._explicit(KernelKind.CHANNEL_FF, _req(ch, "stages", "channel"), "channel.stages")
        except ProblemError:
            raise
        except ValueError as exc:
            raise ProblemError("channel", str(exc)) from None
        raise ProblemError("channel.type", f"unknown channel type {kind!r}")

    def build_distortion(self) -> DistortionSpec:
        if self.distortion is None:
            raise ProblemError("distortion", "this command needs a distortion matrix")
        rho = _matrix(self.distortion, "distortion", 2)
        if rho.shape != (self.x_size, self.y_size):
            raise ProblemError("distortion", f"expected shape {(self.x_size, self.y_size)}, got {rho.shape}")
        try:
            return DistortionSpec(self.horizon, rho)
        except ValueError as exc:
            raise ProblemError("distortion", str(exc)) from None

    def baa_config(self) -> BaaConfig:
        kw = dict(self.baa)
        if "init" in kw:
            try:
                kw["init"] = Init(kw["init"])
            except ValueError:
                raise ProblemError("baa.init", f"expected one of {[i.value for i in Init]}") from None
        try:
            return BaaConfig(**kw)
        except (TypeError, ValueError) as exc:
            raise ProblemError("baa", str(exc)) from None

    def _check_len(self, arr, n, where):
        if arr.shape[0] != n:
            raise ProblemError(where, f"expected {n} entries, got {arr.shape[0]}")

    def _explicit(self, kind: KernelKind, stages, where: str) -> CausalKernelFamily:
        if not isinstance(stages, list) or len(stages) != self.horizon + 1:
            raise ProblemError(where, f"expected a list of {self.horizon + 1} stage tables")
        xi, yi = indexers(self.horizon, self.x_size, self.y_size)
        arrs = [_matrix(st, f"{where}[{i}]") for i, st in enumerate(stages)]
        return family_from_stages(kind, arrs, xi, yi)
