"""Run configuration: one declarative document driving a whole run.

A RunConfig fully determines a run together with its seed; it is saved
next to every artifact, and its canonical-JSON hash stamps datasets,
checkpoints, and reports so artifacts can be traced to their config.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from .model import NetConfig
from .recursion import RecursionSchedule
from .training import TrainConfig


@dataclass
class RunConfig:
    net: NetConfig
    schedule: RecursionSchedule
    train: TrainConfig
    data_dir: str = ""
    out_dir: str = ""
    task: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        obj = json.loads(text)
        return cls(
            net=NetConfig(**obj["net"]),
            schedule=RecursionSchedule(**obj["schedule"]),
            train=TrainConfig(**obj["train"]),
            data_dir=obj.get("data_dir", ""),
            out_dir=obj.get("out_dir", ""),
            task=obj.get("task", ""),
        )

    def config_hash(self) -> str:
        """Hash of the semantic config; paths are excluded so the identity
        of a run does not depend on where its artifacts live."""
        obj = asdict(self)
        obj.pop("data_dir", None)
        obj.pop("out_dir", None)
        canonical = json.dumps(obj, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def config_hash_of(obj: dict) -> str:
    canonical = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]
