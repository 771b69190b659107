"""Run-level configuration: one object unifying every subsystem's knobs.

Serializes to plain JSON and parses back to an equal value, so a config file
can be checked in, echoed into checkpoints, and diffed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

from .distribution import DistributionConfig
from .errors import InvalidInput
from .graph import MODALITIES, Modality
from .sampling import SamplerConfig
from .synth import SynthConfig
from .training import TrainerConfig

MODALITY_SUBSETS: dict[str, tuple[Modality, ...]] = {
    "fbv": MODALITIES,
    "fb": (Modality.FACE, Modality.BODY),
    "fv": (Modality.FACE, Modality.VOICE),
    "f": (Modality.FACE,),
}


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs: sampling, distribution, training, generation,
    clustering threshold, load-time noise, modality subset, and the root seed."""

    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    distribution: DistributionConfig = field(default_factory=DistributionConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    threshold: float = 0.5
    rho: float = 0.0
    modalities: str = "fbv"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise InvalidInput("threshold must be in (0, 1)")
        if not 0.0 <= self.rho <= 1.0:
            raise InvalidInput("rho must be in [0, 1]")
        if self.modalities not in MODALITY_SUBSETS:
            raise InvalidInput(
                f"modalities must be one of {sorted(MODALITY_SUBSETS)}"
            )

    def subset(self) -> tuple[Modality, ...]:
        return MODALITY_SUBSETS[self.modalities]

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _tupled(d: dict, keys: tuple[str, ...]) -> dict:
    out = dict(d)
    for k in keys:
        if out.get(k) is not None:
            out[k] = tuple(out[k])
    return out


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise InvalidInput("config root must be an object")
    known = {
        "sampler",
        "distribution",
        "trainer",
        "synth",
        "threshold",
        "rho",
        "modalities",
        "seed",
    }
    unknown = set(data) - known
    if unknown:
        raise InvalidInput(f"unknown config keys: {sorted(unknown)}")
    kwargs: dict = {}
    try:
        if "sampler" in data:
            kwargs["sampler"] = SamplerConfig(**data["sampler"])
        if "distribution" in data:
            kwargs["distribution"] = DistributionConfig(**data["distribution"])
        if "trainer" in data:
            kwargs["trainer"] = TrainerConfig(
                **_tupled(data["trainer"], ("mu_f", "mu_d"))
            )
        if "synth" in data:
            kwargs["synth"] = SynthConfig(
                **_tupled(
                    data["synth"], ("clues_face", "clues_body", "clues_voice")
                )
            )
    except TypeError as exc:
        raise InvalidInput(f"bad config field: {exc}") from None
    for k in ("threshold", "rho", "modalities", "seed"):
        if k in data:
            kwargs[k] = data[k]
    return RunConfig(**kwargs)


def config_loads(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"config is not valid JSON: {exc}") from None
    return config_from_dict(data)


def load_config(path) -> RunConfig:
    from .errors import IoError

    try:
        with open(path, "r", encoding="utf-8") as fh:
            return config_loads(fh.read())
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from None


def apply_overrides(cfg: RunConfig, **kw) -> RunConfig:
    """Rebuild the config with CLI-level overrides; None values are ignored.

    Accepted keys: seed, threshold, rho, modalities, eta, alpha, lambda_f,
    lambda_d, cycles, iterations, mode.
    """
    top = {
        k: v
        for k, v in kw.items()
        if k in ("seed", "threshold", "rho", "modalities") and v is not None
    }
    dist = {k: v for k, v in kw.items() if k in ("eta", "alpha") and v is not None}
    tr = {
        k: v
        for k, v in kw.items()
        if k in ("lambda_f", "lambda_d", "cycles", "iterations", "mode")
        and v is not None
    }
    out = cfg
    if top:
        out = replace(out, **top)
    if dist:
        out = replace(out, distribution=replace(out.distribution, **dist))
    if tr:
        out = replace(out, trainer=replace(out.trainer, **tr))
    return out
