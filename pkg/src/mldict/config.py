"""Run configuration shared by the CLI commands.

A config file holds ``key = value`` lines (``#`` starts a comment). Keys use
the long flag names with ``-`` or ``_``; ``codec`` may repeat. Flags given on
the command line override the file.
"""

from dataclasses import dataclass, field, fields

from .dictionary import CHUNK_SIZE, EPSILON, PrunePolicy
from .errors import InputError


@dataclass
class Config:
    dicts: str = "dicts"
    seed: int = 0
    chunk_size: int = CHUNK_SIZE
    mass_fraction: float = 0.99
    max_entries: int = 2 ** 20
    drop_unit: bool = True
    drop_unit_level4: bool = False
    track: int = 100
    epsilon: dict = field(default_factory=lambda: dict(EPSILON))
    codecs: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.chunk_size < 1:
            raise InputError("chunk_size must be >= 1")
        if not 0 < self.mass_fraction <= 1:
            raise InputError("mass_fraction must lie in (0, 1]")
        if self.max_entries < 1:
            raise InputError("max_entries must be >= 1")
        if any(e <= 0 for e in self.epsilon.values()):
            raise InputError("epsilon must be positive")

    def prune_policy(self):
        return PrunePolicy(drop_unit=self.drop_unit, drop_unit_level4=self.drop_unit_level4,
                           mass_fraction=self.mass_fraction, max_entries=self.max_entries)


_BOOL = {"1": True, "true": True, "yes": True, "on": True,
         "0": False, "false": False, "no": False, "off": False}


def _convert(name, raw):
    types = {f.name: f.type for f in fields(Config)}
    kind = types[name]
    try:
        if kind in (int, "int"):
            return int(raw)
        if kind in (float, "float"):
            return float(raw)
        if kind in (bool, "bool"):
            return _BOOL[raw.lower()]
    except (ValueError, KeyError):
        raise InputError(f"bad value {raw!r} for {name}") from None
    return raw


def parse_config_text(text):
    """Parse config file text into a dict of Config field overrides."""
    from .bench import parse_codec

    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InputError(f"config line {lineno}: expected key = value")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        if key == "codec":
            name, template = parse_codec(value)
            out.setdefault("codecs", {})[name] = template
        elif key.startswith("epsilon_"):
            try:
                level = int(key[len("epsilon_"):])
            except ValueError:
                raise InputError(f"config line {lineno}: bad key {key!r}") from None
            out.setdefault("epsilon", {})[level] = _convert("mass_fraction", value)
        elif key in {f.name for f in fields(Config)} and key not in ("codecs", "epsilon"):
            out[key] = _convert(key, value)
        else:
            raise InputError(f"config line {lineno}: unknown key {key!r}")
    return out


def load_config(path=None, **overrides):
    values = {}
    if path:
        with open(path) as f:
            values = parse_config_text(f.read())
    eps = {**EPSILON, **values.pop("epsilon", {})}
    codecs = values.pop("codecs", {})
    codecs.update(overrides.pop("codecs", None) or {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    return Config(epsilon=eps, codecs=codecs, **values)
