"""Device configuration files (YAML).

Schema::

    modes.{a,b,c}.{freq_ghz, kappa_mhz, kappa_ext_mhz}
    internal_loss.kappa_b_int_mhz
    pumps.{beta_ab, beta_bc, beta_ac, beta_bb}.{mag, phase_rad}
    targets.{target_gx_db, target_s, phi_loop_sign}
    chain_noise.{photons, err_minus, err_plus}
    sweep.{delta_mhz, lo_phase_rad, gain_db, loop_phase_rad}.{start, stop, points}

``kappa_ext_mhz`` defaults to ``kappa_mhz`` (no internal loss).  For mode b
the internal loss may instead be given as ``internal_loss.kappa_b_int_mhz``;
supplying both with different values is an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .coupled_modes import LABELS, ModeParams, PumpSet
from .errors import ParseError, ValidationError
from .noise import ChainNoise
from .tuning import TuningTargets

PUMP_NAMES = ("beta_ab", "beta_bc", "beta_ac", "beta_bb")
GRID_NAMES = ("delta_mhz", "lo_phase_rad", "gain_db", "loop_phase_rad")
BUNDLED = ("paper_device",)

DEFAULT_GRIDS = {
    "delta_mhz": (-20.0, 20.0, 401),
    "lo_phase_rad": (-math.pi, math.pi, 181),
    "gain_db": (0.0, 20.0, 41),
    "loop_phase_rad": (-math.pi, math.pi, 73),
}

_SCHEMA = {
    "modes": {lab: {"freq_ghz", "kappa_mhz", "kappa_ext_mhz"} for lab in LABELS},
    "internal_loss": {"kappa_b_int_mhz"},
    "pumps": {p: {"mag", "phase_rad"} for p in PUMP_NAMES},
    "targets": {"target_gx_db", "target_s", "phi_loop_sign"},
    "chain_noise": {"photons", "err_minus", "err_plus"},
    "sweep": {g: {"start", "stop", "points"} for g in GRID_NAMES},
}


@dataclass(frozen=True)
class ModeSpec:
    freq_ghz: float
    kappa_mhz: float
    kappa_ext_mhz: float | None = None


@dataclass(frozen=True)
class PumpSpec:
    mag: float
    phase_rad: float = 0.0

    @property
    def value(self) -> complex:
        return self.mag * complex(math.cos(self.phase_rad), math.sin(self.phase_rad))


@dataclass(frozen=True)
class GridSpec:
    start: float
    stop: float
    points: int

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class DeviceConfig:
    modes: dict[str, ModeSpec]
    pumps: dict[str, PumpSpec] | None = None
    targets: TuningTargets | None = None
    chain_noise: ChainNoise = field(default_factory=ChainNoise)
    sweep: dict[str, GridSpec] = field(
        default_factory=lambda: {k: GridSpec(*v) for k, v in DEFAULT_GRIDS.items()})
    kappa_b_int_mhz: float | None = None

    def mode_params(self) -> list[ModeParams]:
        out = []
        for lab in LABELS:
            m = self.modes[lab]
            kext = m.kappa_ext_mhz
            if lab == "b" and self.kappa_b_int_mhz is not None:
                kext = m.kappa_mhz - self.kappa_b_int_mhz
            out.append(ModeParams.from_lab_units(lab, m.freq_ghz, m.kappa_mhz, kext))
        return out

    def pump_set(self) -> PumpSet:
        if self.pumps is None:
            raise ValidationError(["config has no pumps section"])
        return PumpSet(**{k: v.value for k, v in self.pumps.items()})

    def grid(self, name: str) -> np.ndarray:
        return self.sweep[name].values()

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"modes": {}}
        for lab, m in self.modes.items():
            entry = {"freq_ghz": m.freq_ghz, "kappa_mhz": m.kappa_mhz}
            if m.kappa_ext_mhz is not None:
                entry["kappa_ext_mhz"] = m.kappa_ext_mhz
            d["modes"][lab] = entry
        if self.kappa_b_int_mhz is not None:
            d["internal_loss"] = {"kappa_b_int_mhz": self.kappa_b_int_mhz}
        if self.pumps is not None:
            d["pumps"] = {k: {"mag": p.mag, "phase_rad": p.phase_rad} for k, p in self.pumps.items()}
        if self.targets is not None:
            t = self.targets
            d["targets"] = {"target_gx_db": t.target_gx_db, "target_s": t.target_s,
                            "phi_loop_sign": t.phi_loop_sign}
        c = self.chain_noise
        d["chain_noise"] = {"photons": c.photons, "err_minus": c.err_minus, "err_plus": c.err_plus}
        d["sweep"] = {k: {"start": g.start, "stop": g.stop, "points": g.points}
                      for k, g in self.sweep.items()}
        return d


# -- parsing -------------------------------------------------------------------

def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _check_keys(raw: dict, problems: list[str]) -> None:
    for key, val in raw.items():
        if key not in _SCHEMA:
            problems.append(f"unknown key '{key}'")
            continue
        sub = _SCHEMA[key]
        if not isinstance(val, dict):
            problems.append(f"'{key}' must be a mapping")
            continue
        for k2, v2 in val.items():
            allowed = sub if isinstance(sub, set) else sub.keys()
            if k2 not in allowed:
                problems.append(f"unknown key '{key}.{k2}'")
                continue
            if isinstance(sub, dict):
                if not isinstance(v2, dict):
                    problems.append(f"'{key}.{k2}' must be a mapping")
                    continue
                for k3 in v2:
                    if k3 not in sub[k2]:
                        problems.append(f"unknown key '{key}.{k2}.{k3}'")


def _num(d: dict, key: str, where: str, problems: list[str], default=None, required=True):
    if key not in d:
        if required and default is None:
            problems.append(f"missing '{where}.{key}'")
        return default
    v = d[key]
    if not _is_number(v):
        problems.append(f"'{where}.{key}' must be a finite number, got {v!r}")
        return default
    return float(v)


def config_from_dict(raw: Any) -> DeviceConfig:
    """Validate a parsed tree; every violated invariant is reported at once."""
    if not isinstance(raw, dict):
        raise ValidationError(["config root must be a mapping"])
    problems: list[str] = []
    _check_keys(raw, problems)

    modes: dict[str, ModeSpec] = {}
    raw_modes = raw.get("modes") if isinstance(raw.get("modes"), dict) else {}
    if "modes" not in raw:
        problems.append("missing 'modes'")
    for lab in LABELS:
        m = raw_modes.get(lab)
        if not isinstance(m, dict):
            if "modes" in raw:
                problems.append(f"missing mode '{lab}'")
            continue
        where = f"modes.{lab}"
        f = _num(m, "freq_ghz", where, problems)
        k = _num(m, "kappa_mhz", where, problems)
        ke = _num(m, "kappa_ext_mhz", where, problems, required=False)
        if f is not None and f <= 0:
            problems.append(f"'{where}.freq_ghz' must be > 0, got {f}")
        if k is not None and k <= 0:
            problems.append(f"'{where}.kappa_mhz' must be > 0, got {k}")
        if ke is not None and (ke < 0 or (k is not None and ke > k)):
            problems.append(f"'{where}.kappa_ext_mhz' must lie in [0, kappa_mhz], got {ke}")
        if f is not None and k is not None:
            modes[lab] = ModeSpec(f, k, ke)

    kb_int = None
    if isinstance(raw.get("internal_loss"), dict):
        kb_int = _num(raw["internal_loss"], "kappa_b_int_mhz", "internal_loss", problems, required=False)
        b = modes.get("b")
        if kb_int is not None and b is not None:
            if not 0 <= kb_int <= b.kappa_mhz:
                problems.append(f"'internal_loss.kappa_b_int_mhz' must lie in [0, kappa_mhz], got {kb_int}")
            elif b.kappa_ext_mhz is not None and not math.isclose(
                    b.kappa_ext_mhz, b.kappa_mhz - kb_int, rel_tol=1e-12, abs_tol=1e-12):
                problems.append("'modes.b.kappa_ext_mhz' conflicts with 'internal_loss.kappa_b_int_mhz'")

    pumps = None
    if isinstance(raw.get("pumps"), dict):
        pumps = {}
        for name in PUMP_NAMES:
            p = raw["pumps"].get(name)
            if p is None:
                pumps[name] = PumpSpec(0.0, 0.0)
                continue
            if not isinstance(p, dict):
                continue
            mag = _num(p, "mag", f"pumps.{name}", problems)
            ph = _num(p, "phase_rad", f"pumps.{name}", problems, default=0.0)
            if mag is not None and mag < 0:
                problems.append(f"'pumps.{name}.mag' must be >= 0, got {mag}")
            if mag is not None:
                pumps[name] = PumpSpec(mag, ph)

    targets = None
    if isinstance(raw.get("targets"), dict):
        t = raw["targets"]
        gx = _num(t, "target_gx_db", "targets", problems)
        s = _num(t, "target_s", "targets", problems)
        sign = t.get("phi_loop_sign", 1)
        ok = gx is not None and s is not None
        if sign not in (1, -1) or isinstance(sign, bool):
            problems.append(f"'targets.phi_loop_sign' must be +1 or -1, got {sign!r}")
            ok = False
        if s is not None and not 0 < s < 1:
            problems.append(f"'targets.target_s' must lie in (0, 1), got {s}")
            ok = False
        if ok:
            targets = TuningTargets(gx, s, int(sign))

    if pumps is None and targets is None:
        problems.append("config needs 'pumps' or 'targets'")

    chain = ChainNoise()
    if isinstance(raw.get("chain_noise"), dict):
        c = raw["chain_noise"]
        vals = [_num(c, k, "chain_noise", problems, default=getattr(chain, k), required=False)
                for k in ("photons", "err_minus", "err_plus")]
        for k, v in zip(("photons", "err_minus", "err_plus"), vals):
            if v is not None and v < 0:
                problems.append(f"'chain_noise.{k}' must be >= 0, got {v}")
        chain = ChainNoise(*vals)

    grids = {k: GridSpec(*v) for k, v in DEFAULT_GRIDS.items()}
    if isinstance(raw.get("sweep"), dict):
        for name, g in raw["sweep"].items():
            if name not in GRID_NAMES or not isinstance(g, dict):
                continue
            where = f"sweep.{name}"
            start = _num(g, "start", where, problems)
            stop = _num(g, "stop", where, problems)
            pts = g.get("points")
            if not isinstance(pts, int) or isinstance(pts, bool) or pts < 2:
                problems.append(f"'{where}.points' must be an integer >= 2, got {pts!r}")
                continue
            if start is not None and stop is not None:
                if stop <= start:
                    problems.append(f"'{where}': stop must exceed start")
                else:
                    grids[name] = GridSpec(start, stop, pts)

    if problems:
        raise ValidationError(problems)
    return DeviceConfig(modes, pumps, targets, chain, grids, kb_int)


def _set_dotted(tree: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = tree
    for k in keys[:-1]:
        nxt = node.get(k)
        if not isinstance(nxt, dict):
            nxt = node[k] = {}
        node = nxt
    node[keys[-1]] = value


def apply_overrides(raw: dict, overrides: list[str] | None) -> dict:
    """Apply ``key.path=value`` strings; values are parsed as YAML scalars."""
    for item in overrides or []:
        if "=" not in item:
            raise ParseError(f"override {item!r} is not of the form key=value")
        key, text = item.split("=", 1)
        try:
            value = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ParseError(f"override {key}: cannot parse {text!r}: {exc}") from None
        _set_dotted(raw, key.strip(), value)
    return raw


def read_raw(source: str | Path) -> dict:
    """Parse a config path (or a bundled name) into a plain tree."""
    name = str(source)
    if name in BUNDLED and not Path(name).exists():
        text = (resources.files("fpja") / "configs" / f"{name}.yaml").read_text()
        origin = f"<bundled {name}>"
    else:
        try:
            text = Path(name).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read config {name}: {exc.strerror}") from None
        origin = name
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        problem = getattr(exc, "problem", None) or str(exc)
        raise ParseError(f"{origin}:{where}: {problem}") from None
    return {} if raw is None else raw


def load_config(source: str | Path, overrides: list[str] | None = None) -> DeviceConfig:
    """Load and validate a config file or a bundled config by name."""
    raw = read_raw(source)
    if not isinstance(raw, dict):
        raise ValidationError(["config root must be a mapping"])
    return config_from_dict(apply_overrides(raw, overrides))


def write_config(cfg: DeviceConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False))
