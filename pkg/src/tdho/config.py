"""Run configuration: a sectioned ``key = value`` text format.

Grammar (one item per line)::

    # comment            full-line comments start with '#' or ';'
    [section]            one of the sections below, each at most once
    key = value          value runs to the end of the line, outer blanks stripped

Every key has a default, so a file only lists what it changes.  Unknown
sections or keys are errors.  ``none`` (or an empty value) clears optional
entries.  Lists are comma separated.  Relative paths are resolved against the
directory of the config file.  ``serialize`` writes every key, and parsing its
output gives back an equal RunConfig.
"""
from __future__ import annotations

import dataclasses
import math
import os
import re
from dataclasses import dataclass, field, fields

from .errors import ConfigError, OutOfRange, ParseError, ValidationError
from .evolution import SolverSettings

EXPERIMENTS = ("classical", "params", "evolve", "verify_theorem", "picard")
SIGMA_KINDS = ("zero", "constant", "inverse_square", "tabulated", "power_law")


def _opt(conv):
    def parse(text):
        if text == "" or text.lower() == "none":
            return None
        return conv(text)

    parse.optional = True
    return parse


def _float(text):
    v = float(text)
    if math.isnan(v):
        raise ValueError("nan is not allowed")
    return v


def _int(text):
    return int(text)


def _str(text):
    if text == "":
        raise ValueError("empty value")
    return text


def _float_list(text):
    if text.strip() == "":
        return ()
    return tuple(_float(p.strip()) for p in text.split(","))


def _knots(text):
    if text.strip() == "":
        return ()
    out = []
    for part in text.split(","):
        t, s = part.split(":")
        out.append((_float(t.strip()), _float(s.strip())))
    return tuple(out)


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ", ".join(f"{a!r}:{b!r}" for a, b in v)
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


def _conv(**kw):
    return field(metadata={"conv": kw.pop("conv")}, **kw)


@dataclass(frozen=True)
class RunSection:
    experiment: str | None = _conv(default=None, conv=_opt(_str))
    seed: int = _conv(default=0, conv=_int)
    output_dir: str | None = _conv(default=None, conv=_opt(_str))


@dataclass(frozen=True)
class SigmaSection:
    kind: str = _conv(default="zero", conv=_str)
    value: float = _conv(default=0.0, conv=_float)
    sigma0: float = _conv(default=0.09, conv=_float)
    r0: float = _conv(default=1.0, conv=_float)
    lam: float = _conv(default=0.0, conv=_float)
    c2: float = _conv(default=1.0, conv=_float)
    knots: tuple = _conv(default=(), conv=_knots)
    knots_file: str | None = _conv(default=None, conv=_opt(_str))


@dataclass(frozen=True)
class ProfileSection:
    family: str = _conv(default="gaussian", conv=_str)
    amplitude: float = _conv(default=0.05, conv=_float)
    width: float = _conv(default=1.0, conv=_float)
    file: str | None = _conv(default=None, conv=_opt(_str))
    mu: float = _conv(default=0.01, conv=_float)
    n: int = _conv(default=1, conv=_int)
    points: int = _conv(default=4096, conv=_int)
    half_width: float = _conv(default=40.0, conv=_float)


@dataclass(frozen=True)
class SolverSection:
    dt_initial: float = _conv(default=1e-3, conv=_float)
    dt_control: str = _conv(default="fixed", conv=_str)
    mass_tol: float = _conv(default=1e-10, conv=_float)
    quadrature: str = _conv(default="simpson", conv=_str)
    t_truncate: float | None = _conv(default=None, conv=_opt(_float))
    frame: str = _conv(default="moving", conv=_str)
    nodes_per_decade: int = _conv(default=48, conv=_int)
    far_factor: float = _conv(default=100.0, conv=_float)
    rel_step: float = _conv(default=2e-3, conv=_float)


@dataclass(frozen=True)
class WindowSection:
    T: float = _conv(default=10.0, conv=_float)
    t_end: float = _conv(default=100.0, conv=_float)
    samples_per_decade: int = _conv(default=20, conv=_int)


@dataclass(frozen=True)
class ParametersSection:
    lam: float | None = _conv(default=None, conv=_opt(_float))
    alpha: float | None = _conv(default=None, conv=_opt(_float))
    b: float | None = _conv(default=None, conv=_opt(_float))
    alpha_n: float | None = _conv(default=None, conv=_opt(_float))


@dataclass(frozen=True)
class ClassicalSection:
    t_max: float | None = _conv(default=None, conv=_opt(_float))
    tol: float = _conv(default=1e-10, conv=_float)
    fit_lo: float | None = _conv(default=None, conv=_opt(_float))
    fit_hi: float | None = _conv(default=None, conv=_opt(_float))


@dataclass(frozen=True)
class PicardSection:
    n_iter: int = _conv(default=5, conv=_int)


@dataclass(frozen=True)
class VerifySection:
    b_tolerance: float = _conv(default=0.1, conv=_float)


@dataclass(frozen=True)
class SweepSection:
    parameter: str | None = _conv(default=None, conv=_opt(_str))
    values: tuple = _conv(default=(), conv=_float_list)


_SECTIONS = {
    "run": RunSection,
    "sigma": SigmaSection,
    "profile": ProfileSection,
    "solver": SolverSection,
    "window": WindowSection,
    "parameters": ParametersSection,
    "classical": ClassicalSection,
    "picard": PicardSection,
    "verify": VerifySection,
    "sweep": SweepSection,
}


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = RunSection()
    sigma: SigmaSection = SigmaSection()
    profile: ProfileSection = ProfileSection()
    solver: SolverSection = SolverSection()
    window: WindowSection = WindowSection()
    parameters: ParametersSection = ParametersSection()
    classical: ClassicalSection = ClassicalSection()
    picard: PicardSection = PicardSection()
    verify: VerifySection = VerifySection()
    sweep: SweepSection = SweepSection()

    @property
    def experiment(self):
        return self.run.experiment

    def solver_settings(self):
        s = self.solver
        return SolverSettings(**{f.name: getattr(s, f.name) for f in fields(s)})

    def with_value(self, dotted, value):
        """Copy with one ``section.key`` replaced (value given as text or typed)."""
        sec_name, key = _split_dotted(dotted)
        sec = getattr(self, sec_name)
        f = {g.name: g for g in fields(sec)}[key]
        if isinstance(value, str):
            value = f.metadata["conv"](value)
        elif isinstance(value, float) and f.metadata["conv"] in (_int,):
            value = int(value)
        new = dataclasses.replace(sec, **{key: value})
        return validate(dataclasses.replace(self, **{sec_name: new}))


def _split_dotted(dotted):
    if dotted.count(".") != 1:
        raise ValidationError(dotted, "expected section.key")
    sec_name, key = dotted.split(".")
    if sec_name not in _SECTIONS:
        raise ValidationError(dotted, f"unknown section {sec_name!r}")
    if key not in {f.name for f in fields(_SECTIONS[sec_name])}:
        raise ValidationError(dotted, f"unknown key {key!r}")
    return sec_name, key


_HEADER = re.compile(r"^\[\s*([A-Za-z_][A-Za-z0-9_]*)\s*\]\s*$")
_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def parse_config(text, base_dir=None):
    """Parse and validate; raises ParseError (with line/column) or ValidationError (naming the key)."""
    raw = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#;":
            continue
        indent = len(line) - len(line.lstrip())
        if stripped.startswith("["):
            m = _HEADER.match(stripped)
            if not m:
                raise ParseError("malformed section header", lineno, indent + 1)
            section = m.group(1)
            if section not in _SECTIONS:
                raise ValidationError(section, f"unknown section (line {lineno})")
            if section in raw:
                raise ParseError(f"duplicate section [{section}]", lineno, indent + 1)
            raw[section] = {}
            continue
        eq = line.find("=")
        if eq < 0:
            raise ParseError("expected 'key = value'", lineno, indent + 1)
        key = line[:eq].strip()
        if not _KEY.match(key):
            raise ParseError(f"invalid key {key!r}", lineno, indent + 1)
        if section is None:
            raise ParseError("key outside of any section", lineno, indent + 1)
        allowed = {f.name for f in fields(_SECTIONS[section])}
        if key not in allowed:
            raise ValidationError(f"{section}.{key}", f"unknown key (line {lineno})")
        if key in raw[section]:
            raise ParseError(f"duplicate key {key!r}", lineno, indent + 1)
        raw[section][key] = (line[eq + 1 :].strip(), lineno)

    parts = {}
    for name, cls in _SECTIONS.items():
        kwargs = {}
        for f in fields(cls):
            if f.name in raw.get(name, {}):
                text_value, lineno = raw[name][f.name]
                try:
                    kwargs[f.name] = f.metadata["conv"](text_value)
                except (ValueError, TypeError) as exc:
                    raise ValidationError(f"{name}.{f.name}", f"bad value {text_value!r} (line {lineno}): {exc}") from None
        parts[name] = cls(**kwargs)
    cfg = RunConfig(**parts)
    if base_dir is not None:
        cfg = _resolve_paths(cfg, base_dir)
    return validate(cfg)


def _resolve_paths(cfg, base_dir):
    def fix(p):
        return p if p is None or os.path.isabs(p) else os.path.normpath(os.path.join(base_dir, p))

    return dataclasses.replace(
        cfg,
        sigma=dataclasses.replace(cfg.sigma, knots_file=fix(cfg.sigma.knots_file)),
        profile=dataclasses.replace(cfg.profile, file=fix(cfg.profile.file)),
    )


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))


def serialize(cfg):
    out = []
    for name in _SECTIONS:
        sec = getattr(cfg, name)
        out.append(f"[{name}]")
        for f in fields(sec):
            out.append(f"{f.name} = {_fmt(getattr(sec, f.name))}")
        out.append("")
    return "\n".join(out)


def _is_pow2(k):
    return k >= 8 and (k & (k - 1)) == 0


def validate(cfg):
    """Check every cross-field rule; raises ValidationError naming the key."""
    def need(ok, key, msg):
        if not ok:
            raise ValidationError(key, msg)

    r, s, p, w = cfg.run, cfg.sigma, cfg.profile, cfg.window
    need(r.experiment is None or r.experiment in EXPERIMENTS, "run.experiment",
         f"must be one of {', '.join(EXPERIMENTS)}")
    need(s.kind in SIGMA_KINDS, "sigma.kind", f"must be one of {', '.join(SIGMA_KINDS)}")
    if s.kind == "inverse_square":
        need(0.0 < s.sigma0 < 0.25, "sigma.sigma0", "must lie in (0, 1/4)")
        need(s.r0 > 0, "sigma.r0", "must be positive")
    if s.kind == "constant":
        need(math.isfinite(s.value), "sigma.value", "must be finite")
    if s.kind == "power_law":
        need(0.0 <= s.lam < 0.5, "sigma.lam", "must lie in [0, 1/2)")
        need(s.c2 != 0 and math.isfinite(s.c2), "sigma.c2", "must be finite and nonzero")
    if s.kind == "tabulated":
        if s.knots_file is not None:
            need(os.path.isfile(s.knots_file), "sigma.knots_file", f"file not found: {s.knots_file}")
        else:
            need(len(s.knots) >= 2, "sigma.knots", "tabulated sigma needs at least two knots")
            need(all(b[0] > a[0] for a, b in zip(s.knots, s.knots[1:])), "sigma.knots",
                 "knot times must increase")
    need(p.family in ("gaussian", "snapshot"), "profile.family", "must be gaussian or snapshot")
    if p.family == "snapshot":
        need(p.file is not None, "profile.file", "required for family = snapshot")
        need(os.path.isfile(p.file), "profile.file", f"file not found: {p.file}")
    need(p.n in (1, 2, 3), "profile.n", "must be 1, 2 or 3")
    need(_is_pow2(p.points), "profile.points", "must be a power of two >= 8")
    need(p.half_width > 0, "profile.half_width", "must be positive")
    need(p.width > 0, "profile.width", "must be positive")
    need(math.isfinite(p.mu), "profile.mu", "must be finite")
    need(w.T >= 2.0, "window.T", "must be at least 2")
    need(w.t_end > w.T, "window.t_end", "must exceed window.T")
    need(w.samples_per_decade >= 5, "window.samples_per_decade", "must be at least 5")
    try:
        cfg.solver_settings()
    except OutOfRange as exc:
        key = re.search(r"setting (\w+)=", str(exc))
        raise ValidationError(f"solver.{key.group(1) if key else '?'}", str(exc)) from None
    q = cfg.parameters
    need(q.lam is None or 0.0 <= q.lam < 0.5, "parameters.lam", "must lie in [0, 1/2)")
    need(q.alpha is None or q.alpha > 0, "parameters.alpha", "must be positive")
    need(q.alpha_n is None or q.alpha_n > 2, "parameters.alpha_n", "must exceed 2")
    c = cfg.classical
    need(c.tol > 0, "classical.tol", "must be positive")
    need(c.t_max is None or c.t_max > 0, "classical.t_max", "must be positive")
    need(c.fit_lo is None or c.fit_lo > 0, "classical.fit_lo", "must be positive")
    need(c.fit_hi is None or c.fit_lo is None or c.fit_hi > c.fit_lo, "classical.fit_hi",
         "must exceed classical.fit_lo")
    need(cfg.picard.n_iter >= 1, "picard.n_iter", "must be at least 1")
    need(cfg.verify.b_tolerance >= 0, "verify.b_tolerance", "must be nonnegative")
    if cfg.sweep.parameter is not None:
        try:
            _split_dotted(cfg.sweep.parameter)
        except ValidationError as exc:
            raise ValidationError("sweep.parameter", str(exc)) from None
        need(not cfg.sweep.parameter.startswith("sweep."), "sweep.parameter", "cannot sweep the sweep section")
    return cfg


__all__ = ["RunConfig", "parse_config", "load_config", "serialize", "validate", "ConfigError", "EXPERIMENTS"]
