from dataclasses import dataclass
import hashlib
import json
import os
from typing import Tuple

from freeconv.errors import ParseError


@dataclass(frozen=True)
class RunConfig:
    command: str
    argv: Tuple[str, ...]

    @property
    def config_hash(self):
        hash_key = json.dumps({"command": self.command, "argv": list(self.argv)}, sort_keys=True)
        return hashlib.sha256(hash_key.encode()).hexdigest()

    def to_json(self) -> str:
        return json.dumps({"command": self.command, "argv": list(self.argv), "hash": self.config_hash}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
            config = cls(data["command"], tuple(str(arg) for arg in data["argv"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"not a run config: {exc}")
        if "hash" in data and data["hash"] != config.config_hash:
            raise ParseError(f"run config hash mismatch: stored {data['hash']}, computed {config.config_hash}")
        if not config.argv or config.argv[0] != config.command:
            raise ParseError(f"run config argv must start with its command {config.command!r}")
        return config

    def dump(self, path: str):
        with open(path, "w") as f:
            f.write(self.to_json())

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        if not os.path.exists(path):
            raise ParseError(f"run config {path!r} does not exist")
        with open(path) as f:
            return cls.from_json(f.read())
