"""Experiment configuration: one strict JSON document per command.

Example::

    {
      "output_dir": "out",
      "prior": {"scenes": {"seeds": [0, 1, 2, 3], "variance": 0.001}},
      "task": {"kind": "gaussian_blur", "sigma": 1.5, "size": 5},
      "sampler": {"T": 200, "constraint_mode": "simplex"},
      "inputs": ["y_000.png"],
      "references": ["x_000.png"]
    }

Relative paths are resolved against the directory holding the config file.
Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError
from .prior import GaussianMixturePrior, load_gmm_json
from .sampler import SamplerConfig
from .scenes import scene_prior
from .synth import operator_from_dict, operator_to_dict

SCENE_KEYS = {"seeds", "variance", "standardized", "channels", "height", "width", "texture"}


@dataclass(frozen=True)
class ExperimentConfig:
    output_dir: str
    prior: dict | None = None
    task: dict | str = "blind"
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    inputs: tuple = ()
    references: tuple | None = None
    suite: str | None = None
    clean: tuple = ()
    draw: dict | None = None
    kernel_sizes: tuple = (1, 3, 5, 7, 9)
    save_models: bool = True
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        if not isinstance(self.output_dir, str) or not self.output_dir:
            raise ConfigurationError("output_dir must be a non-empty string")
        if self.task != "blind":
            if not isinstance(self.task, dict):
                raise ConfigurationError("task must be 'blind' or an operator object")
            # canonical form: every parameter spelled out
            object.__setattr__(self, "task", operator_to_dict(operator_from_dict(self.task, self.base_dir)))
        if self.prior is not None:
            _check_prior_spec(self.prior)
        if self.references is not None and len(self.references) != len(self.inputs):
            raise ConfigurationError("references must pair one-to-one with inputs")
        if self.suite is not None and (self.inputs or self.references):
            raise ConfigurationError("give either 'suite' or 'inputs'/'references', not both")
        if self.draw is not None:
            if set(self.draw) - {"count", "seed"} or "count" not in self.draw:
                raise ConfigurationError("draw takes {'count': n, 'seed': s}")
            if self.clean:
                raise ConfigurationError("give either 'clean' or 'draw', not both")
        for k in self.kernel_sizes:
            if int(k) != k or k < 1 or k % 2 == 0:
                raise ConfigurationError(f"kernel sizes must be positive odd integers, got {k}")

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def operator(self):
        return None if self.task == "blind" else operator_from_dict(self.task, self.base_dir)

    def build_prior(self) -> GaussianMixturePrior:
        if self.prior is None:
            raise ConfigurationError("this command needs a 'prior'")
        if "file" in self.prior:
            return load_gmm_json(self.path(self.prior["file"]))
        return scene_prior(**self.prior["scenes"])

    def to_dict(self) -> dict:
        out = {
            "output_dir": self.output_dir,
            "prior": self.prior,
            "task": self.task,
            "sampler": self.sampler.to_dict(),
            "inputs": list(self.inputs),
            "references": None if self.references is None else list(self.references),
            "suite": self.suite,
            "clean": list(self.clean),
            "draw": self.draw,
            "kernel_sizes": list(self.kernel_sizes),
            "save_models": self.save_models,
        }
        return out

    @classmethod
    def from_dict(cls, d: dict, base_dir=".") -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigurationError("config must be a JSON object")
        names = {f.name for f in dataclasses.fields(cls)} - {"base_dir"}
        unknown = set(d) - names
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        if "output_dir" not in d:
            raise ConfigurationError("config needs 'output_dir'")
        kw = dict(d)
        sampler = kw.pop("sampler", None) or {}
        if not isinstance(sampler, dict):
            raise ConfigurationError("sampler must be an object")
        try:
            kw["sampler"] = SamplerConfig.from_dict(sampler)
        except TypeError as exc:
            raise ConfigurationError(f"sampler: {exc}") from None
        for key in ("inputs", "clean", "kernel_sizes"):
            if key in kw:
                kw[key] = tuple(kw[key])
        if kw.get("references") is not None:
            kw["references"] = tuple(kw["references"])
        return cls(base_dir=str(base_dir), **kw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(doc, base_dir=path.parent)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _check_prior_spec(spec) -> None:
    if not isinstance(spec, dict) or len(spec) != 1 or not set(spec) <= {"file", "scenes"}:
        raise ConfigurationError("prior must be {'file': path} or {'scenes': {...}}")
    if "scenes" in spec:
        sc = spec["scenes"]
        if not isinstance(sc, dict) or "seeds" not in sc:
            raise ConfigurationError("prior.scenes needs 'seeds'")
        unknown = set(sc) - SCENE_KEYS
        if unknown:
            raise ConfigurationError(f"prior.scenes: unknown keys {sorted(unknown)}")
