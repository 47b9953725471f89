"""Run configuration: validation, config files and run manifests.

Config files are YAML or JSON (JSON is read by the YAML loader).  Scalars
are taken verbatim from the source text, so ``c: 8e16`` is the exact decimal
``8e16`` and never passes through a binary float.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from fractions import Fraction

import yaml

from ._validation import as_fraction, parse_shape
from .kernels import MultiquadricKernel
from .precision import MIN_DIGITS, PrecisionContext
from .problems import DEFAULTS, make_problem
from .search import SearchConfig, Step

MODES = ("solve", "sweep", "search")
MANIFEST_SCHEMA = "mqkansa.manifest/1"

_FIELDS = ("mode", "problem", "beta", "digits", "c", "c_list", "c0", "steps", "max_evals",
           "grid", "tests", "boundary_tests", "workers", "out")
_PROBLEM_FIELDS = ("name", "sigma", "a", "b", "dim", "points_per_axis", "n_test_domain",
                   "n_test_boundary")


class ConfigError(ValueError):
    """Invalid run configuration; ``field`` and ``line`` locate the problem."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass
class RunConfig:
    """Everything needed to reproduce a run.

    ``problem`` is ``"paper-1d"``, ``"paper-2d"`` or a mapping with keys
    ``sigma, a, b, dim, points_per_axis`` and optionally ``n_test_domain,
    n_test_boundary`` (the ``tests``/``boundary_tests`` fields take precedence).  Numbers may be given as exact
    decimal strings.  ``c`` is used by ``solve``, ``c_list`` by ``sweep``
    (and as an explicit candidate grid by ``search``), ``c0``/``steps``/
    ``max_evals`` by ``search``.
    """

    mode: str
    problem: object = "paper-1d"
    beta: str = "-1"
    digits: int | None = None
    c: str | None = None
    c_list: list | None = None
    c0: str | None = None
    steps: list = field(default_factory=list)
    max_evals: int = 50
    grid: int | None = None
    tests: int | None = None
    boundary_tests: int | None = None
    workers: int = 1
    out: str = "mqkansa-out"
    lines: dict = field(default_factory=dict, repr=False, compare=False)

    # -- validation -----------------------------------------------------
    def _err(self, msg, name):
        return ConfigError(msg, name, self.lines.get(name))

    def _int(self, name, minimum, value=None):
        v = getattr(self, name) if value is None else value
        try:
            iv = int(str(v))
        except (TypeError, ValueError):
            raise self._err(f"expected an integer, got {v!r}", name) from None
        if iv < minimum:
            raise self._err(f"must be >= {minimum}, got {iv}", name)
        return iv

    def validate(self) -> "RunConfig":
        """Normalize types in place and check every field; returns self."""
        if self.mode not in MODES:
            raise self._err(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}", "mode")
        if isinstance(self.problem, dict):
            unknown = set(self.problem) - set(_PROBLEM_FIELDS)
            if unknown:
                key = sorted(unknown)[0]
                raise self._err(f"unknown problem key {key!r}", f"problem.{key}")
        elif self.problem not in DEFAULTS:
            raise self._err(f"unknown problem {self.problem!r}; use paper-1d, paper-2d "
                            f"or an inline definition", "problem")
        try:
            self.beta = str(as_fraction(str(self.beta)))
        except (TypeError, ValueError):
            raise self._err(f"beta must be a number, got {self.beta!r}", "beta") from None
        if self.digits is None:
            if not isinstance(self.problem, dict):
                self.digits = DEFAULTS[self.problem]["digits"]
            else:
                raise self._err("custom problems need digits", "digits")
        self.digits = self._int("digits", MIN_DIGITS)
        self.workers = self._int("workers", 1)
        self.max_evals = self._int("max_evals", 3)
        for name in ("grid", "tests", "boundary_tests"):
            if getattr(self, name) is not None:
                setattr(self, name, self._int(name, 1))
        ctx = PrecisionContext(self.digits)
        if self.mode == "solve":
            if self.c is None:
                self.c = self._default_c0()
            self._shape(self.c, "c", ctx)
            self.c = str(self.c)
        if self.mode == "sweep" and not self.c_list:
            raise self._err("sweep needs a nonempty c_list", "c_list")
        if self.c_list is not None:
            if not isinstance(self.c_list, list):
                raise self._err("c_list must be a list", "c_list")
            self.c_list = [str(v) for v in self.c_list]
            for v in self.c_list:
                self._shape(v, "c_list", ctx)
        if self.mode == "search":
            if self.c0 is None:
                self.c0 = self._default_c0()
            self._shape(self.c0, "c0", ctx)
            self.c0 = str(self.c0)
            if not isinstance(self.steps, list):
                self.steps = [self.steps]
            self.steps = [str(s) for s in self.steps]
            try:
                self.search_config(ctx)
            except ValueError as exc:
                raise self._err(str(exc), "steps" if self.steps else "c_list") from None
        try:
            self.build_problem()
        except (TypeError, ValueError) as exc:
            raise self._err(str(exc), "problem") from None
        try:
            MultiquadricKernel(Fraction(self.beta), 1, self.build_problem().dim, ctx)
        except ValueError as exc:
            raise self._err(str(exc), "beta") from None
        return self

    def _default_c0(self):
        if isinstance(self.problem, dict):
            raise self._err("custom problems need an explicit c / c0", "c" if self.mode == "solve" else "c0")
        return DEFAULTS[self.problem]["c0"]

    def _shape(self, v, name, ctx):
        try:
            parse_shape(str(v), ctx)
        except (TypeError, ValueError) as exc:
            raise self._err(str(exc), name) from None

    # -- derived objects ------------------------------------------------
    def context(self) -> PrecisionContext:
        return PrecisionContext(int(self.digits))

    def build_problem(self):
        overrides = dict(points_per_axis=self.grid, n_test_domain=self.tests,
                         n_test_boundary=self.boundary_tests)
        if isinstance(self.problem, dict):
            p = dict(self.problem)
            name = p.pop("name", "custom")
            if "dim" in p:
                p["dim"] = int(str(p["dim"]))
            for key in ("points_per_axis", "n_test_domain", "n_test_boundary"):
                if key in p and overrides[key] is None:
                    overrides[key] = int(str(p[key]))
                p.pop(key, None)
            for k in ("sigma", "a", "b"):
                if k in p:
                    p[k] = as_fraction(str(p[k]))
            prob = make_problem("custom", **p, **overrides)
            return prob if name == "custom" else _renamed(prob, name)
        return make_problem(self.problem, **overrides)

    def search_config(self, ctx: PrecisionContext | None = None) -> SearchConfig:
        return SearchConfig(c0=str(self.c0), steps=[Step.parse(s) for s in self.steps],
                            grid=list(self.c_list) if self.c_list else None,
                            max_evals=int(self.max_evals))

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("lines")
        return d

    @classmethod
    def from_mapping(cls, data: dict, lines: dict | None = None) -> "RunConfig":
        lines = lines or {}
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        unknown = [k for k in data if k not in _FIELDS]
        if unknown:
            raise ConfigError(f"unknown field {unknown[0]!r}", unknown[0], lines.get(unknown[0]))
        if "mode" not in data:
            raise ConfigError("missing required field", "mode")
        cfg = cls(**{k: v for k, v in data.items()})
        cfg.lines = lines
        return cfg.validate()


def _renamed(problem, name):
    from dataclasses import replace
    return replace(problem, name=name)


# ---------------------------------------------------------------------------
# files

def _plain(node, lines: dict, prefix: str = ""):
    """YAML node -> Python with scalars as their source text; records key lines."""
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = k.value
            path = f"{prefix}{key}"
            lines[path] = k.start_mark.line + 1
            out[key] = _plain(v, lines, path + ".")
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_plain(v, lines, prefix) for v in node.value]
    if node.tag.endswith(":null") or (node.value in ("", "~", "null") and node.style is None):
        return None
    return node.value


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """Parse YAML/JSON config text; a run manifest is accepted as well."""
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = None if mark is None else mark.line + 1
        raise ConfigError(f"{source}: cannot parse ({getattr(exc, 'problem', exc)})", line=line) from None
    if node is None:
        raise ConfigError(f"{source}: empty config")
    lines: dict = {}
    data = _plain(node, lines)
    if isinstance(data, dict) and data.get("schema") == MANIFEST_SCHEMA:
        data = data.get("config")
        lines = {k[len("config."):]: v for k, v in lines.items() if k.startswith("config.")}
    return RunConfig.from_mapping(data, lines)


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), path)
