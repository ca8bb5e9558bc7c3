"""Command-line front end.

    maxwell-lab bands --lambda 0 --plane ky0 --res 101
    maxwell-lab maxwell-points --lambda 0
    maxwell-lab chern-lattice --lambda 0.5 --n-theta 64
    maxwell-lab chern-ramp --lambda 0 --t-ramp-us 0.6 --omega-mhz 15
    maxwell-lab sweep --command chern-lattice --lambdas 0:2:0.1

Options may also come from an INI-style file (``--config run.ini``) whose
sections mirror the run configuration: [model], [ramp], [decoherence],
[grid], [output], [run]. Flags win over file values. Unknown keys are
rejected.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .bands import ModelParams, bz_scan, maxwell_points
from .dynamics import DecoherenceParams, RampConfig, chern_from_ramp, transition_sweep
from .errors import ConfigError, DegeneracyError, ExportError, MaxwellError, NumericalError
from .export import dumps_json, export, sha256_file, write_atomic
from .topology import SWEEP_CRITICAL_TOL, VERTEX_TOL, chern_sphere, chern_vs_lambda, plaquette_field

COMMANDS = ("bands", "maxwell-points", "chern-lattice", "chern-ramp", "sweep")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

# section -> key -> (type, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "model": {
        "lambda": (float, 0.0),
        "omega01_mhz": (float, 7171.33),
        "omega_unit_mhz": (float, 10.0),
        "point": (str, "M+"),
    },
    "grid": {
        "plane": (str, "ky0"),
        "res": (str, "128"),
        "n_theta": (int, 64),
        "n_phi": (int, 64),
        "band": (str, "lowest"),
    },
    "ramp": {
        "t_ramp_us": (float, 0.6),
        "omega_mhz": (float, 15.0),
        "n_steps": (int, None),
        "phi0": (float, 0.0),
        "evolution": (str, "unitary"),
        "profile": (str, "linear"),
        "stride": (int, 1),
        "mode": (str, "continuous"),
        "shots": (int, None),
        "seed": (int, 0),
        "self_check": (bool, True),
    },
    "decoherence": {
        "t1_12": (float, 15.0),
        "t1_23": (float, 12.0),
        "t2s_12": (float, 4.3),
        "t2s_23": (float, 3.5),
    },
    "output": {
        "path": (str, None),
        "format": (str, None),
        "emit_plot_script": (bool, False),
    },
    "run": {
        "workers": (int, None),
        "lambdas": (str, None),
        "sweep_command": (str, "chern-lattice"),
    },
}

# flag dest -> (section, key)
FLAG_MAP = {
    "lam": ("model", "lambda"),
    "omega01_mhz": ("model", "omega01_mhz"),
    "omega_unit_mhz": ("model", "omega_unit_mhz"),
    "point": ("model", "point"),
    "plane": ("grid", "plane"),
    "res": ("grid", "res"),
    "n_theta": ("grid", "n_theta"),
    "n_phi": ("grid", "n_phi"),
    "band": ("grid", "band"),
    "t_ramp_us": ("ramp", "t_ramp_us"),
    "omega_mhz": ("ramp", "omega_mhz"),
    "n_steps": ("ramp", "n_steps"),
    "phi0": ("ramp", "phi0"),
    "evolution": ("ramp", "evolution"),
    "profile": ("ramp", "profile"),
    "stride": ("ramp", "stride"),
    "mode": ("ramp", "mode"),
    "shots": ("ramp", "shots"),
    "seed": ("ramp", "seed"),
    "no_self_check": ("ramp", "self_check"),
    "t1_12": ("decoherence", "t1_12"),
    "t1_23": ("decoherence", "t1_23"),
    "t2s_12": ("decoherence", "t2s_12"),
    "t2s_23": ("decoherence", "t2s_23"),
    "output": ("output", "path"),
    "format": ("output", "format"),
    "emit_plot_script": ("output", "emit_plot_script"),
    "workers": ("run", "workers"),
    "lambdas": ("run", "lambdas"),
    "sweep_command": ("run", "sweep_command"),
}


@dataclass(frozen=True)
class GridConfig:
    plane: str = "ky0"
    res: tuple = (128, 128)
    n_theta: int = 64
    n_phi: int = 64
    band: str = "lowest"


@dataclass(frozen=True)
class OutputConfig:
    path: str
    format: str
    emit_plot_script: bool = False


@dataclass(frozen=True)
class SweepConfig:
    command: str
    lambdas: tuple


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: ModelParams
    point: str
    grid: GridConfig
    output: OutputConfig
    ramp: Optional[RampConfig] = None
    decoherence: Optional[DecoherenceParams] = None
    sweep: Optional[SweepConfig] = None
    workers: int = 1
    resolved: Optional[dict] = None

    def echo(self) -> dict:
        """Every resolved setting, defaults included."""
        return {
            "command": self.command,
            "settings": self.resolved,
            "ramp": None if self.ramp is None else self.ramp.to_dict(),
            "decoherence": None if self.decoherence is None else dataclasses.asdict(self.decoherence),
            "sweep": None if self.sweep is None else {"command": self.sweep.command, "lambdas": list(self.sweep.lambdas)},
            "workers": self.workers,
        }


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(section: str, key: str, value):
    typ, _ = SCHEMA[section][key]
    if value is None:
        return None
    try:
        if typ is bool:
            return _parse_bool(value)
        if typ is str:
            return str(value).strip()
        return typ(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from exc


def parse_lambdas(text: str) -> tuple:
    """'start:stop:step' (inclusive) or a comma-separated list."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0:
                raise ValueError("step must be positive")
            n = int(math.floor((stop - start) / step + 1e-9))
            return tuple(round(start + i * step, 12) + 0.0 for i in range(n + 1))
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"--lambdas {text!r}: {exc}") from exc


def _parse_res(text: str, plane: str) -> tuple:
    try:
        parts = [int(x) for x in str(text).replace("x", ",").split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"--res {text!r}: {exc}") from exc
    dims = 2 if plane == "ky0" else 3
    if len(parts) == 1:
        parts = parts * dims
    if len(parts) != dims or any(p < 2 for p in parts):
        raise ConfigError(f"--res needs {dims} values >= 2 for plane {plane!r}, got {text!r}")
    return tuple(parts)


def _read_file(path: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    values: dict = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown config key [{section}] {key}")
            values[(section, key)] = _convert(section, key, raw)
    return values


def _add_common(p: argparse.ArgumentParser, command: str) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="INI-style config file")
    p.add_argument("--lambda", dest="lam", type=float, default=S, help="control parameter")
    p.add_argument("--output", "-o", default=S, help="output data file")
    p.add_argument("--format", choices=("csv", "json"), default=S)
    p.add_argument("--workers", type=int, default=S, help="worker count (default: MAXWELL_THREADS or all cores)")
    p.add_argument("--emit-plot-script", action="store_const", const=True, default=S)
    if command == "bands":
        p.add_argument("--plane", choices=("ky0", "3d"), default=S)
        p.add_argument("--res", default=S, help="points per axis, e.g. 101 or 101,201")
        p.add_argument("--omega01-mhz", type=float, default=S)
        p.add_argument("--omega-unit-mhz", type=float, default=S)
    if command in ("chern-lattice", "chern-ramp", "sweep"):
        p.add_argument("--point", choices=("M+", "M-"), default=S)
    if command in ("chern-lattice", "sweep"):
        p.add_argument("--band", choices=("lowest", "middle", "upper"), default=S)
        p.add_argument("--n-theta", type=int, default=S)
        p.add_argument("--n-phi", type=int, default=S)
    if command in ("chern-ramp", "sweep"):
        p.add_argument("--t-ramp-us", type=float, default=S)
        p.add_argument("--omega-mhz", type=float, default=S)
        p.add_argument("--n-steps", type=int, default=S)
        p.add_argument("--phi0", type=float, default=S)
        p.add_argument("--evolution", choices=("unitary", "lindblad"), default=S)
        p.add_argument("--profile", choices=("linear", "smooth"), default=S)
        p.add_argument("--stride", type=int, default=S)
        p.add_argument("--mode", choices=("continuous", "restart"), default=S)
        p.add_argument("--shots", type=int, default=S)
        p.add_argument("--seed", type=int, default=S)
        p.add_argument("--no-self-check", action="store_const", const=False, default=S)
        for name in ("t1-12", "t1-23", "t2s-12", "t2s-23"):
            p.add_argument(f"--{name}", type=float, default=S, help="decoherence time (us)")
    if command == "sweep":
        p.add_argument("--command", dest="sweep_command", choices=("chern-lattice", "chern-ramp"), default=S)
        p.add_argument("--lambdas", default=S, help="start:stop:step (inclusive) or a,b,c")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="maxwell-lab", description="Spin-1 Maxwell metal band and Chern-number laboratory.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for cmd in COMMANDS:
        _add_common(sub.add_parser(cmd), cmd)
    return parser


def default_workers() -> int:
    env = os.environ.get("MAXWELL_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"MAXWELL_THREADS={env!r} is not an integer") from exc
        if n < 1:
            raise ConfigError("MAXWELL_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    """Resolve defaults < config file < flags into a validated RunConfig."""
    ns = build_parser().parse_args(argv)
    flags = vars(ns)
    command = flags.pop("command")

    values = {(s, k): entry[1] for s, keys in SCHEMA.items() for k, entry in keys.items()}
    if "config" in flags:
        values.update(_read_file(flags.pop("config")))
    for dest, v in flags.items():
        section, key = FLAG_MAP[dest]
        values[(section, key)] = _convert(section, key, v)

    def get(section, key):
        return values[(section, key)]

    try:
        model = ModelParams(get("model", "lambda"), get("model", "omega01_mhz"), get("model", "omega_unit_mhz"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    point = get("model", "point")
    if point not in ("M+", "M-"):
        raise ConfigError(f"[model] point must be M+ or M-, got {point!r}")

    plane = get("grid", "plane")
    if plane not in ("ky0", "3d"):
        raise ConfigError(f"[grid] plane must be ky0 or 3d, got {plane!r}")
    if get("grid", "band") not in ("lowest", "middle", "upper"):
        raise ConfigError(f"[grid] band must be lowest, middle or upper, got {get('grid', 'band')!r}")
    grid = GridConfig(
        plane=plane,
        res=_parse_res(get("grid", "res"), plane),
        n_theta=get("grid", "n_theta"),
        n_phi=get("grid", "n_phi"),
        band=get("grid", "band"),
    )
    if grid.n_theta < 8 or grid.n_phi < 8:
        raise ConfigError("n_theta and n_phi must be at least 8")

    sweep = None
    inner = command
    if command == "sweep":
        inner = get("run", "sweep_command")
        if inner not in ("chern-lattice", "chern-ramp"):
            raise ConfigError(f"--command must be chern-lattice or chern-ramp, got {inner!r}")
        if get("run", "lambdas") is None:
            raise ConfigError("sweep needs --lambdas")
        lams = parse_lambdas(get("run", "lambdas"))
        if not lams:
            raise ConfigError("--lambdas is empty")
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise ConfigError("--lambdas must be strictly increasing")
        sweep = SweepConfig(inner, lams)

    if command == "chern-lattice" and abs(abs(model.lam) - 1.0) <= VERTEX_TOL:
        raise ConfigError(
            f"--lambda {model.lam}: refused, the degeneracy lies on the manifold (Chern number undefined)"
        )

    ramp = dec = None
    if inner == "chern-ramp":
        try:
            ramp = RampConfig(
                t_ramp=get("ramp", "t_ramp_us"),
                n_steps=get("ramp", "n_steps"),
                omega_unit=get("ramp", "omega_mhz"),
                lam=model.lam,
                phi0=get("ramp", "phi0"),
                point=point,
                evolution=get("ramp", "evolution"),
                profile=get("ramp", "profile"),
                record_stride=get("ramp", "stride"),
                mode=get("ramp", "mode"),
                self_check=get("ramp", "self_check"),
                shots=get("ramp", "shots"),
                seed=get("ramp", "seed"),
            )
            if ramp.evolution == "lindblad":
                dec = DecoherenceParams(*(get("decoherence", k) for k in ("t1_12", "t1_23", "t2s_12", "t2s_23")))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if command == "chern-ramp":
            ramp = ramp.resolved()

    fmt = get("output", "format") or ("json" if command == "maxwell-points" else "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"[output] format must be csv or json, got {fmt!r}")
    path = get("output", "path") or f"{command}.{fmt}"
    output = OutputConfig(path, fmt, get("output", "emit_plot_script"))

    workers = get("run", "workers")
    if workers is None:
        workers = default_workers()
    if workers < 1:
        raise ConfigError("--workers must be >= 1")

    resolved = {f"{s}.{k}": v for (s, k), v in sorted(values.items())}
    resolved["output.path"] = path
    resolved["output.format"] = fmt
    resolved["run.workers"] = workers
    return RunConfig(command, model, point, grid, output, ramp, dec, sweep, workers, resolved)


# ---------------------------------------------------------------------------
# execution

_PLOT_TEMPLATES = {
    "bands": '''
data = np.loadtxt(DATA, delimiter=",", skiprows=1)
kx, kz = data[:, 0], data[:, 2]
for col, label in ((3, "E-"), (4, "E0"), (5, "E+")):
    sel = np.abs(kx) == np.abs(kx).min()
    plt.plot(kz[sel], data[sel, col], ".", label=label)
plt.xlabel("kz"); plt.ylabel("E / Omega"); plt.legend()
''',
    "chern-lattice": '''
data = np.loadtxt(DATA, delimiter=",", skiprows=1)
sel = data[:, 1] == data[0, 1]
plt.plot(data[sel, 0], data[sel, 2])
plt.xlabel("theta"); plt.ylabel("F_theta_phi")
''',
    "chern-ramp": '''
data = np.loadtxt(DATA, delimiter=",", skiprows=1)
plt.plot(data[:, 1], data[:, 6])
plt.xlabel("theta"); plt.ylabel("F_theta_phi")
''',
    "sweep": '''
data = np.loadtxt(DATA, delimiter=",", skiprows=1)
plt.plot(data[:, 0], data[:, 1], "o-")
plt.xlabel("lambda"); plt.ylabel("C")
''',
}


def _plot_script(command: str, data_path: Path, fmt: str) -> str:
    body = _PLOT_TEMPLATES.get(command)
    if body is None or fmt != "csv":
        body = '\nprint(open(DATA).read()[:2000])\n'
    return (
        "import numpy as np\nimport matplotlib.pyplot as plt\n\n"
        f"DATA = {str(data_path.name)!r}\n" + body + "plt.savefig(DATA + '.png', dpi=150)\n"
    )


def _execute(cfg: RunConfig) -> tuple[Path, dict]:
    out, fmt = Path(cfg.output.path), cfg.output.format
    summary: dict = {}
    if cfg.command == "bands":
        surf = bz_scan(cfg.model, cfg.grid.plane, cfg.grid.res, workers=cfg.workers)
        gap, where = surf.min_gap_sample()
        summary = {"min_gap": gap, "min_gap_at": list(where), "samples": len(surf)}
        export(surf, out, fmt)
    elif cfg.command == "maxwell-points":
        pts = maxwell_points(cfg.model.lam)
        summary = {"points": [[p.kx, p.ky, p.kz] for p in pts]}
        export(pts, out, fmt, lam=cfg.model.lam)
    elif cfg.command == "chern-lattice":
        fld = plaquette_field(cfg.grid.band, cfg.model.lam, cfg.grid.n_theta, cfg.grid.n_phi, cfg.point, cfg.workers)
        res = chern_sphere(cfg.grid.band, cfg.model.lam, cfg.grid.n_theta, cfg.grid.n_phi, cfg.point, cfg.workers)
        summary = {"chern": res.raw, "rounded": res.rounded}
        export(fld, out, fmt, result=res)
    elif cfg.command == "chern-ramp":
        res = chern_from_ramp(cfg.ramp, cfg.decoherence)
        summary = {"chern": res.chern, "samples": len(res.trajectory)}
        export(res, out, fmt)
    else:
        lams = cfg.sweep.lambdas
        skipped: list = []
        if cfg.sweep.command == "chern-lattice":
            skipped = [x for x in lams if abs(abs(x) - 1.0) < SWEEP_CRITICAL_TOL]
            lams = tuple(x for x in lams if x not in skipped)
            sw = chern_vs_lambda(cfg.grid.band, lams, cfg.grid.n_theta, cfg.grid.n_phi, cfg.point, cfg.workers)
        else:
            sw = transition_sweep(lams, cfg.ramp, cfg.decoherence, cfg.workers)
        summary = {"points": len(sw), "skipped_lambdas": skipped}
        export(sw, out, fmt, meta={"skipped_lambdas": skipped})
    return out, summary


def _emit_error(kind: str, message: str, code: int) -> None:
    record = {"error": {"type": kind, "message": message, "exit_code": code}}
    sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")


def run(cfg: RunConfig) -> int:
    """Execute a parsed configuration, writing data, manifest and optional plot script."""
    start = time.perf_counter()
    try:
        out, summary = _execute(cfg)
        files = [out]
        if cfg.output.emit_plot_script:
            files.append(write_atomic(out.with_name(out.name + ".plot.py"), _plot_script(cfg.command, out, cfg.output.format)))
        manifest = {
            "schema_version": 1,
            "tool": "maxwell-lab",
            "version": __version__,
            "config": cfg.echo(),
            "summary": summary,
            "outputs": {p.name: sha256_file(p) for p in files},
            "wall_time_s": time.perf_counter() - start,
        }
        write_atomic(out.with_name(out.name + ".manifest.json"), dumps_json(manifest))
    except ConfigError as exc:
        _emit_error("ConfigError", str(exc), EXIT_CONFIG)
        return EXIT_CONFIG
    except (NumericalError, DegeneracyError) as exc:
        _emit_error(type(exc).__name__, str(exc), EXIT_NUMERICAL)
        return EXIT_NUMERICAL
    except (ExportError, OSError) as exc:
        _emit_error(type(exc).__name__, str(exc), EXIT_IO)
        return EXIT_IO
    print(json.dumps({"command": cfg.command, "output": str(out), **summary}, sort_keys=True))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        _emit_error("ConfigError", str(exc), EXIT_CONFIG)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    raise SystemExit(main())
