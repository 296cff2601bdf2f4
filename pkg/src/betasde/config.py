"""JSON experiment configuration.

A config names the graph as a vertex list plus ``(i, j, w)`` edge triples
(``i == j`` is a self-loop) and carries the options shared by the CLI
commands::

    {
      "vertices": ["a", "b"],
      "edges": [["a", "b", 1.0]],
      "theta": [1.0, 1.0],
      "eta": [0.0, 1.0],
      "seed": 20240611,
      "replicas": 10000
    }
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from .errors import ConfigError
from .lattice import GraphPotentialParams

DEFAULT_SEED = 20240611
DEFAULT_LAMBDAS = [[0.5, 0.5], [1.0, 0.0], [0.0, 1.0], [1.0, 2.0], [2.0, 0.5]]


@dataclass
class ExperimentConfig:
    vertices: List[Union[str, int]]
    edges: List[Sequence] = field(default_factory=list)
    theta: List[float] = field(default_factory=list)
    eta: List[float] = field(default_factory=list)
    dt: float = 1e-3
    du: float = 1e-3
    u_max: float = 12.0
    replicas: int = 10000
    seed: int = DEFAULT_SEED
    lambda_grid: Optional[List[List[float]]] = None
    z: Optional[List[float]] = None
    u0: float = 1.0
    alpha: float = 0.01
    out: str = "out"

    def __post_init__(self):
        self.validate()

    # ------------------------------------------------------------ validation

    def _index(self, v, where: str) -> int:
        if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
            if not 0 <= v < len(self.vertices):
                raise ConfigError(f"{where}: vertex index {v} out of range")
            return int(v)
        try:
            return self.vertices.index(v)
        except ValueError:
            raise ConfigError(f"{where}: unknown vertex {v!r}") from None

    def _vector(self, name: str, value, n: int, positive: bool = False,
                nonneg: bool = False) -> np.ndarray:
        try:
            v = np.asarray(value, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError(f"{name}: not a numeric vector") from None
        if v.ndim != 1 or v.shape[0] != n:
            raise ConfigError(f"{name}: expected {n} entries, got {v.size}")
        for i, x in enumerate(v):
            if not math.isfinite(x):
                raise ConfigError(f"{name}[{i}]: must be finite")
            if positive and not x > 0:
                raise ConfigError(f"{name}[{i}]: must be > 0, got {x}")
            if nonneg and x < 0:
                raise ConfigError(f"{name}[{i}]: must be >= 0, got {x}")
        return v

    def validate(self):
        if not isinstance(self.vertices, list) or not self.vertices:
            raise ConfigError("vertices: need a nonempty list")
        if len(set(map(str, self.vertices))) != len(self.vertices):
            raise ConfigError("vertices: duplicate names")
        n = len(self.vertices)
        self._vector("theta", self.theta, n, positive=True)
        self._vector("eta", self.eta, n, nonneg=True)
        for k, e in enumerate(self.edges):
            if not isinstance(e, (list, tuple)) or len(e) != 3:
                raise ConfigError(f"edges[{k}]: expected a triple (i, j, w)")
            self._index(e[0], f"edges[{k}]")
            self._index(e[1], f"edges[{k}]")
            try:
                w = float(e[2])
            except (TypeError, ValueError):
                raise ConfigError(f"edges[{k}]: weight is not a number") from None
            if not (math.isfinite(w) and w >= 0):
                raise ConfigError(f"edges[{k}]: weight must be finite and >= 0")
        for name in ("dt", "du", "u_max", "u0"):
            x = getattr(self, name)
            if not (isinstance(x, (int, float)) and math.isfinite(x) and x > 0):
                raise ConfigError(f"{name}: must be a positive number, got {x!r}")
        if not (isinstance(self.replicas, (int, np.integer)) and self.replicas >= 1):
            raise ConfigError(f"replicas: must be an integer >= 1, got {self.replicas!r}")
        if not (isinstance(self.seed, (int, np.integer)) and 0 <= self.seed < 2**64):
            raise ConfigError(f"seed: must be a 64-bit unsigned integer, got {self.seed!r}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha: must lie in (0, 1), got {self.alpha!r}")
        if self.z is not None:
            self._vector("z", self.z, n, positive=True)
        if self.lambda_grid is not None:
            for k, lam in enumerate(self.lambda_grid):
                self._vector(f"lambda_grid[{k}]", lam, n, nonneg=True)
        try:
            self.params()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"edges: {exc}") from None

    # ------------------------------------------------------------ conversions

    @property
    def n(self) -> int:
        return len(self.vertices)

    def params(self) -> GraphPotentialParams:
        edges = [(self._index(i, "edges"), self._index(j, "edges"), float(w))
                 for i, j, w in self.edges]
        return GraphPotentialParams.from_edges(self.n, edges, self.theta, self.eta,
                                               labels=[str(v) for v in self.vertices])

    def lambdas(self) -> np.ndarray:
        if self.lambda_grid is not None:
            return np.asarray(self.lambda_grid, dtype=float)
        if self.n == 2:
            return np.asarray(DEFAULT_LAMBDAS, dtype=float)
        return np.array([[0.25], [0.5], [1.0], [2.0], [4.0]]) * np.ones((1, self.n))

    def z_vector(self) -> np.ndarray:
        return np.ones(self.n) if self.z is None else np.asarray(self.z, dtype=float)

    def replace(self, **kw) -> "ExperimentConfig":
        d = self.to_dict()
        d.update({k: v for k, v in kw.items() if v is not None})
        return ExperimentConfig.from_dict(d)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config: top level must be a JSON object")
        known = {f.name for f in fields(cls)}
        extra = sorted(set(d) - known)
        if extra:
            raise ConfigError(f"{extra[0]}: unknown field")
        if "vertices" not in d:
            raise ConfigError("vertices: missing")
        d = dict(d)
        if isinstance(d["vertices"], int):
            d["vertices"] = list(range(d["vertices"]))
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"config: {exc}") from None

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config: invalid JSON ({exc})") from None
        return cls.from_dict(d)


def reference_c1(**kw) -> ExperimentConfig:
    """One vertex, no conductance, ``theta = eta = 1``."""
    d = dict(vertices=[0], edges=[], theta=[1.0], eta=[1.0], z=[1.0])
    d.update(kw)
    return ExperimentConfig(**d)


def reference_c2(**kw) -> ExperimentConfig:
    """Two vertices joined by a unit edge, ``theta = (1, 1)``, ``eta = (0, 1)``."""
    d = dict(vertices=[0, 1], edges=[[0, 1, 1.0]], theta=[1.0, 1.0], eta=[0.0, 1.0],
             z=[1.0, 2.0])
    d.update(kw)
    return ExperimentConfig(**d)
