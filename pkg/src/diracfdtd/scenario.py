"""Scenario documents, the preset catalog and the run driver.

A scenario is an INI document with the sections [grid], [packet],
[potential], [stepper] and [run]. Every key carries its unit in its name.
Unknown keys, and keys that the chosen potential kind does not use, are
rejected.
"""

from __future__ import annotations

import configparser
import json
import math
import platform
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .classical import (ClassicalOracleError, ClassicalState, integrate_canonical_conservation,
                        integrate_dipole_parallel, integrate_dipole_perpendicular)
from .field import probability_density_slice
from .formats import write_series, write_snapshot
from .observables import SUPPORT_WIDTHS, PacketSpec, init_packet
from .potentials import (DipoleLineSpec, SingularPotentialError, SolenoidPairSpec, from_descriptor,
                         sample_on_grid)
from .stepper import MovingWindow, Observer, Stepper, StepperConfig, run
from .units import UNITS, GridSpec

__all__ = [
    "Scenario",
    "ScenarioError",
    "MARGIN_WIDTHS",
    "parse_scenario",
    "load_preset",
    "list_presets",
    "preset_text",
    "run_scenario",
    "boundary_ratio",
    "oracle_for",
    "overlay_gap",
]

MARGIN_WIDTHS = 8.0

_SCHEMA = {
    "grid": {
        "n_x": int, "n_y": int, "n_z": int, "delta_nm": float, "delta_t_nm_c": float,
        "cfl_safety": float, "center_x_nm": float, "center_y_nm": float, "center_z_nm": float,
    },
    "packet": {
        "momentum_x_mev_c": float, "momentum_y_mev_c": float, "momentum_z_mev_c": float,
        "center_x_nm": float, "center_y_nm": float, "center_z_nm": float,
        "width_nm": float, "momentum_spread": float, "spin": str,
    },
    "potential": {
        "kind": str, "b_tesla": float, "gauge": str, "gauge_center_x_nm": float,
        "gauge_center_z_nm": float, "line_density_cm_per_m": float, "half_separation_nm": float,
        "orientation": str, "sign": int, "flux_wb": float, "radius_nm": float,
        "center_x_nm": float, "center_z_nm": float,
    },
    "stepper": {
        "charge_e": float, "mass_mev": float, "boundary": str, "damping_width_cells": int,
        "damping_strength": float,
    },
    "run": {
        "name": str, "n_steps": int, "record_every": int, "snapshot_every": int,
        "snapshot_planes": str, "moving_window": bool, "oracle": bool, "oracle_x_end_nm": float,
    },
}

_KIND_KEYS = {
    "none": set(),
    "uniform_b": {"b_tesla", "gauge", "gauge_center_x_nm", "gauge_center_z_nm"},
    "dipole_lines": {"line_density_cm_per_m", "half_separation_nm", "orientation", "sign"},
    "solenoid_pair": {"flux_wb", "half_separation_nm", "radius_nm"},
    "solenoid_single": {"flux_wb", "radius_nm", "center_x_nm", "center_z_nm"},
}

_REQUIRED = {"grid": ("n_x", "n_y", "n_z", "delta_nm"), "run": ("n_steps",)}


class ScenarioError(ValueError):
    """Invalid scenario document; ``line`` and ``rule`` say where and why."""

    def __init__(self, message, line=None, rule=None):
        prefix = f"line {line}: " if line else ""
        tag = f"[{rule}] " if rule else ""
        super().__init__(prefix + tag + message)
        self.line = line
        self.rule = rule


@dataclass
class Scenario:
    name: str
    grid: GridSpec
    packet: PacketSpec
    potential: dict
    stepper: StepperConfig
    n_steps: int
    record_every: int = 1
    snapshot_every: int = 0
    snapshot_planes: list = field(default_factory=list)
    moving_window: bool = False
    oracle: bool = True
    oracle_x_end: float | None = None
    width_source: str = ""
    config: dict = field(default_factory=dict)

    def to_text(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for sec, items in self.config.items():
            cp[sec] = {k: v for k, v in items.items()}
        out = []
        for sec in cp.sections():
            out.append(f"[{sec}]")
            out.extend(f"{k} = {v}" for k, v in cp[sec].items())
            out.append("")
        return "\n".join(out)


# -- parsing -------------------------------------------------------------------

def _line_index(text: str) -> dict:
    """(section, key) -> 1-based line number, from a plain scan of the text."""
    index, section = {}, None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            index[(section, None)] = no
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            index.setdefault((section, m.group(1).strip().lower()), no)
    return index


def _convert(value: str, typ, where, line):
    try:
        if typ is bool:
            v = value.strip().lower()
            if v in ("1", "yes", "true", "on"):
                return True
            if v in ("0", "no", "false", "off"):
                return False
            raise ValueError(value)
        if typ is int:
            f = float(value)
            if f != int(f):
                raise ValueError(value)
            return int(f)
        if typ is float:
            f = float(value)
            if not math.isfinite(f):
                raise ValueError(value)
            return f
        return value.strip()
    except ValueError:
        raise ScenarioError(f"{where}: cannot read {value!r} as {typ.__name__}", line, "syntax") from None


def _apply_overrides(cp, overrides):
    for item in overrides or ():
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ScenarioError(f"override {item!r} must look like section.key=value", rule="syntax")
        lhs, value = item.split("=", 1)
        sec, key = lhs.strip().split(".", 1)
        if not cp.has_section(sec):
            cp.add_section(sec)
        cp[sec][key.strip()] = value.strip()


def _read_document(text: str, overrides):
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ScenarioError("key outside of any section", exc.lineno, "syntax") from None
    except configparser.DuplicateSectionError as exc:
        raise ScenarioError(f"duplicate section [{exc.section}]", exc.lineno, "syntax") from None
    except configparser.DuplicateOptionError as exc:
        raise ScenarioError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno, "syntax") from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ScenarioError("malformed line (expected key = value)", lineno, "syntax") from None
    _apply_overrides(cp, overrides)
    return cp


def parse_scenario(text: str, overrides=(), name: str | None = None) -> Scenario:
    """Parse and validate a scenario document.

    ``overrides`` are ``section.key=value`` strings applied on top of the
    document before validation.
    """
    lines = _line_index(text)
    cp = _read_document(text, overrides)
    vals: dict = {}
    for sec in cp.sections():
        if sec not in _SCHEMA:
            raise ScenarioError(f"unknown section [{sec}]", lines.get((sec, None)), "unknown-key")
        vals[sec] = {}
        for key, raw in cp[sec].items():
            line = lines.get((sec, key))
            if key not in _SCHEMA[sec]:
                raise ScenarioError(f"unknown key {sec}.{key}", line, "unknown-key")
            vals[sec][key] = _convert(raw, _SCHEMA[sec][key], f"{sec}.{key}", line)
    for sec, keys in _REQUIRED.items():
        for k in keys:
            if k not in vals.get(sec, {}):
                raise ScenarioError(f"missing required key {sec}.{k}", lines.get((sec, None)), "missing-key")
    for sec in _SCHEMA:
        vals.setdefault(sec, {})
    config = {sec: {k: cp[sec][k] for k in cp[sec]} for sec in cp.sections()}
    return _build(vals, lines, config, name)


def _build(v, lines, config, name) -> Scenario:
    g, pk, po, st, rn = (v[s] for s in ("grid", "packet", "potential", "stepper", "run"))

    def line(sec, key=None):
        return lines.get((sec, key)) or lines.get((sec, None))

    # grid
    try:
        safety = g.get("cfl_safety", 0.5)
        center = (g.get("center_x_nm", 0.0), g.get("center_y_nm", 0.0), g.get("center_z_nm", 0.0))
        grid = GridSpec.centered(g["n_x"], g["n_y"], g["n_z"], g["delta_nm"], center, safety)
        if "delta_t_nm_c" in g:
            grid = GridSpec(grid.n_x, grid.n_y, grid.n_z, grid.delta, g["delta_t_nm_c"], grid.origin, safety)
    except ValueError as exc:
        rule = "cfl" if "CFL" in str(exc) or "cfl" in str(exc) else "grid"
        raise ScenarioError(str(exc), line("grid"), rule) from None

    # stepper
    try:
        cfg = StepperConfig(charge=st.get("charge_e", -1.0), mass=st.get("mass_mev", UNITS.electron_rest_energy),
                            boundary=st.get("boundary", "reflecting"),
                            damping_width=st.get("damping_width_cells", 0),
                            damping_strength=st.get("damping_strength", 0.0))
        cfg.validate_for(grid)
    except ValueError as exc:
        raise ScenarioError(str(exc), line("stepper"), "stepper") from None

    # packet
    momentum = (pk.get("momentum_x_mev_c", 0.0), pk.get("momentum_y_mev_c", 0.0), pk.get("momentum_z_mev_c", 0.0))
    pcenter = (pk.get("center_x_nm", 0.0), pk.get("center_y_nm", 0.0), pk.get("center_z_nm", 0.0))
    if grid.planar:
        pcenter = (pcenter[0], grid.origin[1], pcenter[2])
        if momentum[1] != 0:
            raise ScenarioError("planar grid (n_y = 1) cannot carry momentum_y_mev_c", line("packet"), "planar")
    if "width_nm" in pk:
        width = pk["width_nm"]
        width_source = "width_nm"
    else:
        spread = pk.get("momentum_spread", 0.1)
        if not 0 < spread <= 0.1:
            raise ScenarioError("momentum_spread must lie in (0, 0.1]", line("packet", "momentum_spread"), "packet")
        try:
            width = PacketSpec.default_width(momentum, spread=spread)
        except ValueError as exc:
            raise ScenarioError(f"{exc}; give width_nm for a packet at rest", line("packet"), "packet") from None
        width_source = f"hbar/(2*{spread:g}*|p|)"
    try:
        packet = PacketSpec(width=width, momentum=momentum, center=pcenter, spin=pk.get("spin", "up"), mass=cfg.mass)
    except ValueError as exc:
        raise ScenarioError(str(exc), line("packet"), "packet") from None

    # potential
    kind = po.get("kind", "none")
    if kind not in _KIND_KEYS:
        raise ScenarioError(f"unknown potential kind {kind!r}", line("potential", "kind"), "potential")
    for key in po:
        if key != "kind" and key not in _KIND_KEYS[kind]:
            raise ScenarioError(f"key potential.{key} is not used by kind {kind!r}", line("potential", key),
                                "unknown-key")
    desc = _descriptor(kind, po, line)

    _validate_geometry(grid, packet, desc, line)

    # run
    n_steps = rn["n_steps"]
    if n_steps < 0:
        raise ScenarioError("n_steps must be >= 0", line("run", "n_steps"), "run")
    record_every = rn.get("record_every", 1)
    snapshot_every = rn.get("snapshot_every", 0)
    if record_every < 1 or snapshot_every < 0:
        raise ScenarioError("record_every must be >= 1 and snapshot_every >= 0", line("run"), "run")
    planes = _parse_planes(rn.get("snapshot_planes", ""), grid, line("run", "snapshot_planes"))
    return Scenario(
        name=rn.get("name", name or "scenario"), grid=grid, packet=packet, potential=desc, stepper=cfg,
        n_steps=n_steps, record_every=record_every, snapshot_every=snapshot_every, snapshot_planes=planes,
        moving_window=rn.get("moving_window", False), oracle=rn.get("oracle", True),
        oracle_x_end=rn.get("oracle_x_end_nm"), width_source=width_source, config=config)


def _descriptor(kind, po, line) -> dict:
    def need(key):
        if key not in po:
            raise ScenarioError(f"kind {kind!r} needs potential.{key}", line("potential"), "missing-key")
        return po[key]

    try:
        if kind == "none":
            return {"kind": "none"}
        if kind == "uniform_b":
            desc = {"kind": "uniform_b", "b_tesla": need("b_tesla"), "gauge": po.get("gauge", "symmetric"),
                    "center_x_nm": po.get("gauge_center_x_nm", 0.0),
                    "center_z_nm": po.get("gauge_center_z_nm", 0.0)}
        elif kind == "dipole_lines":
            spec = DipoleLineSpec(need("line_density_cm_per_m"), need("half_separation_nm"),
                                  po.get("orientation", "parallel"), po.get("sign", 1))
            desc = {"kind": "dipole_lines", "line_density": spec.line_density,
                    "half_separation": spec.half_separation, "orientation": spec.orientation, "sign": spec.sign}
        elif kind == "solenoid_pair":
            spec = SolenoidPairSpec(need("flux_wb"), need("half_separation_nm"), po.get("radius_nm"))
            desc = {"kind": "solenoid_pair", "flux": spec.flux, "half_separation": spec.half_separation,
                    "radius": spec.radius}
        else:
            desc = {"kind": "solenoid_single", "flux": need("flux_wb"), "radius": need("radius_nm"),
                    "center_x_nm": po.get("center_x_nm", 0.0), "center_z_nm": po.get("center_z_nm", 0.0)}
        from_descriptor(desc)
        return desc
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc), line("potential"), "potential") from None


def _keep_out(desc, width):
    """(x, z, radius) disks the initial packet support must avoid."""
    reach = SUPPORT_WIDTHS * width
    kind = desc["kind"]
    if kind == "solenoid_pair":
        a, r0 = desc["half_separation"], desc["radius"]
        return [(0.0, a, r0 + reach), (0.0, -a, r0 + reach)]
    if kind == "solenoid_single":
        return [(desc["center_x_nm"], desc["center_z_nm"], desc["radius"] + reach)]
    if kind == "dipole_lines":
        a = desc["half_separation"]
        return [(0.0, a, reach), (0.0, -a, reach)]
    return []


def _validate_geometry(grid, packet, desc, line):
    margin = MARGIN_WIDTHS * packet.width
    for ax in grid.spatial_axes():
        lo, hi = grid.extent(ax)
        c = packet.center[ax]
        if c - lo < margin or hi - c < margin:
            raise ScenarioError(
                f"packet center {c:.6g} nm on axis {'xyz'[ax]} is closer than {MARGIN_WIDTHS:g} widths "
                f"({margin:.6g} nm) to the grid boundary [{lo:.6g}, {hi:.6g}]", line("packet"), "packet-margin")
    cx, cz = packet.center[0], packet.center[2]
    for x, z, r in _keep_out(desc, packet.width):
        if math.hypot(cx - x, cz - z) <= r:
            raise ScenarioError(
                f"packet support (center +- {SUPPORT_WIDTHS:g} widths) overlaps the keep-out disk of radius "
                f"{r:.6g} nm around ({x:.6g}, {z:.6g})", line("packet"), "keep-out")


def _parse_planes(text, grid, line):
    planes = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        try:
            axis_name, idx = (s.strip() for s in part.split(":"))
            ax = "xyz".index(axis_name)
        except ValueError:
            raise ScenarioError(f"bad snapshot plane {part!r} (use e.g. y:mid or z:40)", line, "syntax") from None
        n = grid.shape[ax]
        index = n // 2 if idx == "mid" else _convert(idx, int, "snapshot_planes", line)
        if not 0 <= index < n:
            raise ScenarioError(f"snapshot plane {part!r} outside [0, {n})", line, "run")
        planes.append((ax, index))
    return planes


# -- presets ---------------------------------------------------------------------

def list_presets() -> list:
    root = resources.files("diracfdtd") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def preset_text(name: str) -> str:
    path = resources.files("diracfdtd") / "presets" / f"{name}.ini"
    if not path.is_file():
        raise ScenarioError(f"unknown preset {name!r}; available: {', '.join(list_presets())}", rule="preset")
    return path.read_text(encoding="utf-8")


def load_preset(name: str, overrides=()) -> Scenario:
    return parse_scenario(preset_text(name), overrides, name=name)


# -- running -----------------------------------------------------------------------

def boundary_ratio(field) -> float:
    """max |psi| on the layer next to each wall divided by max |psi| overall."""
    amp = np.sqrt(np.sum(np.abs(field.psi) ** 2, axis=0))
    peak = amp.max()
    if peak == 0:
        return 0.0
    edge = 0.0
    for ax in field.grid.spatial_axes():
        n = field.grid.shape[ax]
        for idx in (1, n - 2):
            edge = max(edge, float(np.take(amp, idx, axis=ax).max()))
    return edge / float(peak)


def oracle_for(scn: Scenario):
    """Classical midline trajectory matching the packet, or ``(None, reason)``."""
    desc = scn.potential
    kind = desc["kind"]
    if kind not in ("dipole_lines", "solenoid_pair"):
        return None, f"no classical oracle for kind {kind!r}"
    p = scn.packet.momentum
    if p[1] != 0 or p[2] != 0 or p[0] == 0 or scn.packet.center[2] != 0:
        return None, "oracle needs a packet on z = 0 moving along x"
    x0 = scn.packet.center[0]
    x_end = scn.oracle_x_end if scn.oracle_x_end is not None else -x0
    q, m = scn.stepper.charge, scn.stepper.mass
    try:
        if kind == "dipole_lines":
            spec = DipoleLineSpec(desc["line_density"], desc["half_separation"], desc["orientation"], desc["sign"])
            init = ClassicalState.from_momentum(x0, p[0], m)
            fn = integrate_dipole_parallel if spec.orientation == "parallel" else integrate_dipole_perpendicular
            traj = fn(spec, init, x_end, charge=q, mass=m)
            pc = traj.p
            energy = np.hypot(traj.p, m) + q * spec.a0_midline(traj.x)
        else:
            spec = SolenoidPairSpec(desc["flux"], desc["half_separation"], desc["radius"])
            # the packet phase fixes the canonical momentum; start from its mechanical part
            p_mech = p[0] - q * float(spec.ax_midline(x0))
            init = ClassicalState.from_momentum(x0, p_mech, m)
            traj = integrate_canonical_conservation(spec, init, x_end, charge=q, mass=m)
            pc = traj.p + q * spec.ax_midline(traj.x)
            energy = np.hypot(traj.p, m)
    except (ClassicalOracleError, ValueError) as exc:
        return None, f"oracle skipped: {exc}"
    zeros = np.zeros_like(traj.t)
    rows = np.column_stack([traj.t, np.ones_like(traj.t), traj.x, zeros, zeros, traj.v, zeros, zeros,
                            energy, traj.p, zeros, zeros, pc, zeros, zeros])
    return (traj, rows), ""


def overlay_gap(x, v, traj, v0=None) -> float:
    """RMS of v(x) - v_oracle(x) over the oracle's x range, relative to ``v0``."""
    x = np.asarray(x)
    v = np.asarray(v)
    lo, hi = traj.x.min(), traj.x.max()
    sel = (x >= lo) & (x <= hi)
    if sel.sum() < 2:
        raise ValueError("series does not overlap the oracle range")
    v0 = traj.v[0] if v0 is None else v0
    diff = v[sel] - traj.v_of_x(x[sel])
    return float(np.sqrt(np.mean(diff ** 2)) / abs(v0))


def _versions():
    import numba
    import scipy

    return {"diracfdtd": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def run_scenario(scn: Scenario, out_dir, progress=None) -> dict:
    """Run a scenario and write series.csv, snapshots, oracle.csv and manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    pot = from_descriptor(scn.potential)
    grid = scn.grid
    sampled = sample_on_grid(pot, grid)
    q = scn.stepper.charge
    try:
        a0c = pot.a0(scn.packet.center)
    except SingularPotentialError:
        a0c = 0.0
    field = init_packet(grid, scn.packet, potential_energy=q * a0c)
    stepper = Stepper(grid, sampled, scn.stepper)

    ratios = []
    observers = [Observer(scn.record_every, lambda f, i: ratios.append(boundary_ratio(f)))]
    snaps = []

    def snap(f, i):
        for ax, idx in scn.snapshot_planes:
            name = f"snap_{'xyz'[ax]}{idx:04d}_{i:07d}.bin"
            write_snapshot(out / name, probability_density_slice(f, ax, idx), f.time, ax, idx, scn.name)
            snaps.append(name)

    if scn.snapshot_every and scn.snapshot_planes:
        observers.append(Observer(scn.snapshot_every, snap))
    if progress is not None:
        observers.append(Observer(max(1, scn.n_steps // 20), progress))
    window = MovingWindow(pot, axis=0, threshold=32) if scn.moving_window else None

    series = run(field, sampled, scn.stepper, scn.n_steps, observers, scn.record_every, stepper, window=window)
    write_series(out / "series.csv", series)

    manifest = {
        "name": scn.name,
        "scenario": scn.config,
        "packet_width_nm": scn.packet.width,
        "packet_width_source": scn.width_source,
        "grid_shape": list(grid.shape),
        "delta_nm": grid.delta,
        "delta_t_nm_c": grid.delta_t,
        "n_steps": scn.n_steps,
        "steps_completed": field.step_count,
        "failed": series.failed,
        "failure": series.failure,
        "singular_cells": sampled.n_singular,
        "window_shifts": window.shifts if window else 0,
        "snapshots": snaps,
        "versions": _versions(),
    }
    manifest.update(_drift_metrics(series, scn))
    manifest["boundary_ratio_max"] = max(ratios) if ratios else 0.0

    if scn.oracle:
        result, reason = oracle_for(scn)
        if result is not None:
            traj, rows = result
            write_series(out / "oracle.csv", rows)
            manifest["oracle"] = {"file": "oracle.csv", "dt": traj.dt,
                                  "richardson_change": traj.richardson_change}
            if len(series) >= 3:
                try:
                    manifest["oracle"]["rms_gap"] = overlay_gap(series.centers[:, 0], series.velocities[:, 0], traj)
                except ValueError as exc:
                    manifest["oracle"]["rms_gap_error"] = str(exc)
        else:
            manifest["oracle"] = {"skipped": reason}
    manifest["wall_time_s"] = time.perf_counter() - started
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=float) + "\n")
    return manifest


def _drift_metrics(series, scn) -> dict:
    if len(series) == 0:
        return {}
    norms = series.norms
    e = series.energies
    pc = series.p_canon
    pm = series.p_mech
    pscale = math.sqrt(sum(c * c for c in scn.packet.momentum)) or 1.0
    return {
        "norm_drift": float(abs(norms[-1] - norms[0]) / norms[0]),
        "norm_max_excursion": float(np.abs(norms - norms[0]).max() / norms[0]),
        "energy_drift": float(np.abs(e - e[0]).max() / abs(e[0])),
        "canonical_momentum_drift": float(np.abs(pc - pc[0]).max() / pscale),
        "mechanical_momentum_variation": float(np.abs(pm - pm[0]).max() / pscale),
    }
