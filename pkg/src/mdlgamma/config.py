"""INI run configuration.

Example::

    [run]
    dim = 2
    seed = 0
    loss = neglog
    rho0 = 0.0
    c_star = 0.6
    h = 0.2, 0.1, 0.05, 0.025

    [windows]
    interior = quartic
    boundary = triangular

    [experiments]
    sections = windows, laws, calibration, rates, locality, scan, layers, uniqueness, smoothing, scaling
    scan_pairs = 10
    quasi_h = 0.01
    quasi_r = 4, 8, 16, 32
    smoothing_n = 1280
    smoothing_eps = 0.2, 0.1, 0.05, 0.025
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import re
from dataclasses import dataclass, field

from .errors import ConfigError
from .windows import NORMAL_PROFILES, RADIAL_PROFILES

ALL_SECTIONS = ("windows", "laws", "calibration", "rates", "locality", "scan", "layers",
                "uniqueness", "smoothing", "scaling", "recovery")
DIM3_SECTIONS = ("windows", "laws", "calibration", "rates", "scaling")


@dataclass
class RunConfig:
    dim: int = 2
    seed: int = 0
    loss: str = "neglog"
    rho0: float = 0.0
    c_star: float = 0.6
    h: tuple = (0.2, 0.1, 0.05, 0.025)
    interior: str = "quartic"
    boundary: str = "triangular"
    sections: tuple = ALL_SECTIONS[:-1]
    scan_pairs: int = 10
    quasi_h: float = 0.01
    quasi_r: tuple = (4, 8, 16, 32)
    smoothing_n: int = 1280
    smoothing_eps: tuple = (0.2, 0.1, 0.05, 0.025)
    extra: dict = field(default_factory=dict)

    @classmethod
    def for_dim(cls, dim):
        if dim == 3:
            return cls(dim=3, h=(0.2, 0.1, 0.05), sections=DIM3_SECTIONS)
        return cls(dim=dim)

    def validate(self, lines=None):
        """Check values; ``lines`` maps keys to source line numbers for error messages."""
        lines = lines or {}

        def bad(key, msg):
            raise ConfigError(msg, lines.get(key))
        if self.dim not in (2, 3):
            bad("dim", f"dim must be 2 or 3, got {self.dim}")
        if self.loss not in ("neglog", "quadratic"):
            bad("loss", f"unknown loss {self.loss!r}")
        if self.interior not in RADIAL_PROFILES:
            bad("interior", f"unknown interior profile {self.interior!r}")
        if self.boundary not in NORMAL_PROFILES:
            bad("boundary", f"unknown boundary profile {self.boundary!r}")
        if len(self.h) < 3 or any(x <= 0 for x in self.h):
            bad("h", "h needs at least three positive meshsizes")
        if not 0 < self.c_star < 1:
            bad("c_star", f"c_star must lie in (0, 1), got {self.c_star}")
        if self.scan_pairs < 1 or self.smoothing_n < 16:
            bad("scan_pairs" if self.scan_pairs < 1 else "smoothing_n", "sample sizes are too small")
        unknown = [s for s in self.sections if s not in ALL_SECTIONS]
        if unknown:
            bad("sections", f"unknown section(s) {', '.join(unknown)}")
        if self.dim == 3:
            planar = [s for s in self.sections if s not in DIM3_SECTIONS]
            if planar:
                bad("sections", f"section(s) {', '.join(planar)} are two-dimensional only")
        return self

    # -- INI ------------------------------------------------------------------

    _LAYOUT = {
        "run": ("dim", "seed", "loss", "rho0", "c_star", "h"),
        "windows": ("interior", "boundary"),
        "experiments": ("sections", "scan_pairs", "quasi_h", "quasi_r", "smoothing_n", "smoothing_eps"),
    }

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        for sec, keys in self._LAYOUT.items():
            cp[sec] = {k: _fmt(getattr(self, k)) for k in keys}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from None
        dim = 2
        if cp.has_option("run", "dim"):
            dim = _convert("dim", cp.get("run", "dim"), int, _lineno(text, "run", "dim"))
        cfg = cls.for_dim(dim)
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        lines = {}
        for sec in cp.sections():
            if sec not in cls._LAYOUT:
                raise ConfigError(f"unknown section [{sec}]", _lineno(text, sec, None))
            for key, raw in cp.items(sec):
                if key not in cls._LAYOUT[sec]:
                    raise ConfigError(f"unknown key {key!r} in [{sec}]", _lineno(text, sec, key))
                conv = _CONVERTERS[types[key]] if types[key] != "tuple" else _TUPLE_CONVERTERS[key]
                lines[key] = _lineno(text, sec, key)
                setattr(cfg, key, _convert(key, raw, conv, lines[key]))
        return cfg.validate(lines)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_ini(fh.read())

    def to_dict(self):
        d = dataclasses.asdict(self)
        d.pop("extra")
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _fmt(v):
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _floats(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


def _ints(s):
    return tuple(int(x) for x in s.split(",") if x.strip())


def _words(s):
    return tuple(x.strip() for x in s.split(",") if x.strip())


_CONVERTERS = {"int": int, "float": float, "str": str}
_TUPLE_CONVERTERS = {"h": _floats, "quasi_r": _ints, "smoothing_eps": _floats, "sections": _words}


def _convert(key, raw, conv, lineno):
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {key}", lineno) from None


def _lineno(text, section, key):
    """1-based line of ``key`` inside ``[section]`` (or of the header when key is None)."""
    cur = None
    for n, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            cur = m.group(1).strip()
            if key is None and cur == section:
                return n
            continue
        if cur == section and key is not None:
            m = re.match(r"\s*([^=:#;\s][^=:]*?)\s*[=:]", line)
            if m and m.group(1).strip().lower() == key:
                return n
    return None
