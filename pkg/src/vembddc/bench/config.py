"""Benchmark case configuration.

A config file holds ``key = value`` lines; ``#`` starts a comment and a
line ``---`` separates cases.  Unknown keys are errors.  Example::

    name = cube8
    mesh = cube
    n = 8
    k = 2
    subdomains = 2x2x2
    coarse = adaptive
    nu_tol = 2
"""
import math
from dataclasses import dataclass, fields, replace


@dataclass
class CaseConfig:
    name: str = "case"
    mesh: str = "cube"              # cube | octa | cvt
    n: int = 4                      # cells per side (cube, octa) or cell count (cvt)
    mesh_seed: int = 0
    k: int = 2
    problem: str = "manufactured"   # manufactured | sinker
    sinkers: int = 1
    dr: float = 1.0
    seed: int = 0
    nu: float = 1.0
    solver: str = "bddc"            # bddc | direct | gmres
    subdomains: str = "2x2x2"
    coarse: str = "minimal"         # minimal | fully_primal | adaptive
    nu_tol: float = math.inf
    scaling: str = "deluxe"         # deluxe | multiplicity
    edge_scaling: str = "multiplicity"
    convention: str = "standard"    # adaptive eigenvalue convention
    tol: float = 1e-8
    maxit: int = 2000
    gmres_restart: int = 200
    time_limit: float = math.inf    # seconds, GMRES baseline only
    threads: int = 1
    stab_sigma: float = 1.0
    errors: bool = True
    export_matrix: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self):
        choices = {
            "mesh": ("cube", "octa", "cvt"),
            "problem": ("manufactured", "sinker"),
            "solver": ("bddc", "direct", "gmres"),
            "coarse": ("minimal", "fully_primal", "adaptive"),
            "scaling": ("deluxe", "multiplicity"),
            "edge_scaling": ("deluxe", "multiplicity"),
            "convention": ("standard", "reciprocal"),
        }
        for key, allowed in choices.items():
            if getattr(self, key) not in allowed:
                raise ValueError(f"{key} must be one of {allowed}, got {getattr(self, key)!r}")
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if self.n < 1 or self.threads < 1:
            raise ValueError("n and threads must be positive")
        if self.dr < 1:
            raise ValueError("dr must be >= 1")
        if self.nu_tol < 1:
            raise ValueError("nu_tol must be >= 1")
        self.grid()

    def grid(self):
        parts = str(self.subdomains).lower().split("x")
        if len(parts) == 1:
            parts = parts * 3
        if len(parts) != 3:
            raise ValueError(f"subdomains must look like 2x2x2, got {self.subdomains!r}")
        g = tuple(int(p) for p in parts)
        if min(g) < 1:
            raise ValueError("subdomain counts must be positive")
        return g

    def with_(self, **kw):
        return replace(self, **kw)

    def to_text(self):
        return "\n".join(f"{f.name} = {_fmt(getattr(self, f.name))}" for f in fields(self))

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


_TYPES = {f.name: f.type for f in fields(CaseConfig)}


def _convert(key, raw):
    typ = _TYPES[key]
    raw = raw.strip()
    if typ is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"bad boolean for {key}: {raw!r}")
    if typ is int:
        return int(raw)
    if typ is float:
        return float(raw)
    return raw


def parse_assignments(lines, base=None):
    """Apply ``key = value`` lines on top of ``base`` (a CaseConfig)."""
    values = base.as_dict() if base is not None else {}
    for ln, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {ln}: expected key = value, got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ValueError(f"line {ln}: unknown key {key!r}")
        values[key] = _convert(key, val)
    return CaseConfig(**values)


def parse_config(text, base=None):
    """List of cases in a config text (cases separated by ``---``)."""
    cases, block = [], []
    for line in text.splitlines():
        if line.strip() == "---":
            if any(b.split("#", 1)[0].strip() for b in block):
                cases.append(parse_assignments(block, base))
            block = []
        else:
            block.append(line)
    if any(b.split("#", 1)[0].strip() for b in block) or not cases:
        cases.append(parse_assignments(block, base))
    return cases


def load_config(path, base=None):
    with open(path) as fh:
        return parse_config(fh.read(), base)
