"""Command-line front end: config files, flag overrides, stable CSV/JSON output.

Config files are flat ``key = value`` text; ``#`` starts a comment.  All
lengths are SI meters, q0 is 1/m, cn2 is m^(-2/3).  Keys:

====================  =======================================================
r0                    aperture radius, m (required)
q0                    central wavenumber, 1/m (required)
z                     path length, m (required)
cn2                   structure constant, m^(-2/3) (required)
l0                    inner scale, m (required)
L0                    outer scale, m (required)
lambda_c              source coherence length, m; "inf" for a coherent beam
r1_ratio              alternative to lambda_c: target r1^2/r0^2 in (0, 1]
n                     grid points per side (default 512)
window                launch window, m, or "auto" (32 r0)
n_screens             phase screens along the path, or "auto"
n_atm                 atmosphere realizations (default 200)
n_src                 source draws per atmosphere (default 16)
master_seed           integer seed for the whole run (default 0)
workers               worker processes, or "auto" (BEAMWANDER_WORKERS / CPUs)
cn2_grid              sweep grid: "logspace:START:STOP:COUNT" or comma list
ratios                sweep coherence ratios r1^2/r0^2, comma list
screens               ensemble size for validate-screens (default 2000)
====================  =======================================================

``lambda_c`` and ``r1_ratio`` are mutually exclusive.  Unknown keys are
rejected by name.  Every output embeds the resolved config, so a stored
result is reproducible from its own header.

Exit codes: 0 success, 1 config error, 2 numerical or validity failure,
3 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

import numpy as np

from . import analytics
from .exceptions import (
    BeamwanderError,
    ConfigError,
    DegenerateInputError,
    NumericalAccuracyError,
    ParameterDomainError,
    ResolutionError,
    StepSizeError,
)
from .experiment import make_config, run_wander_experiment, sweep_cn2
from .phase_screen import (
    SimGrid,
    SourceParams,
    TurbulenceParams,
    generate_turbulence_screen,
    lambda_c_for_ratio,
    screen_structure_function,
    write_screen,
)
from .spectra import theoretical_phase_structure_function

CSV_SCHEMA_VERSION = "beamwander-csv v1"

SWEEP_COLUMNS = (
    "cn2",
    "r1_ratio",
    "rw2_mean",
    "rw2_se",
    "rb2_sim",
    "rb2_analytic",
    "ratio",
    "n_atm",
    "n_src",
    "seed",
    "status",
)

_REQUIRED_KEYS = ("r0", "q0", "z", "cn2", "l0", "L0")

_FLOAT_KEYS = ("r0", "q0", "z", "cn2", "l0", "L0", "lambda_c", "r1_ratio")
_INT_KEYS = ("n", "n_atm", "n_src", "master_seed", "screens")
_AUTO_KEYS = ("window", "n_screens", "workers")  # value or "auto"
_LIST_KEYS = ("cn2_grid", "ratios")

_KNOWN_KEYS = frozenset(_FLOAT_KEYS + _INT_KEYS + _AUTO_KEYS + _LIST_KEYS)

_DEFAULTS = {
    "lambda_c": None,
    "r1_ratio": None,
    "n": 512,
    "window": None,
    "n_screens": None,
    "n_atm": 200,
    "n_src": 16,
    "master_seed": 0,
    "workers": None,
    "cn2_grid": None,
    "ratios": None,
    "screens": 2000,
}


@dataclasses.dataclass
class RunConfig:
    """Fully resolved run parameters shared by all subcommands."""

    r0: float
    q0: float
    z: float
    cn2: float
    l0: float
    L0: float
    lambda_c: float
    n: int
    window: float | None
    n_screens: int | None
    n_atm: int
    n_src: int
    master_seed: int
    workers: int
    cn2_grid: list | None
    ratios: list | None
    screens: int

    def source(self) -> SourceParams:
        return SourceParams(r0=self.r0, q0=self.q0, lambda_c=self.lambda_c)

    def turbulence(self) -> TurbulenceParams:
        return TurbulenceParams(cn2=self.cn2, L0=self.L0, l0=self.l0)

    def geometry(self) -> analytics.GeometryParams:
        return analytics.GeometryParams(z=self.z)

    def echo(self) -> dict:
        """Resolved config as JSON-safe primitives (provenance block)."""
        d = {
            "r0": self.r0,
            "q0": self.q0,
            "z": self.z,
            "cn2": self.cn2,
            "l0": self.l0,
            "L0": self.L0,
            "lambda_c": "inf" if math.isinf(self.lambda_c) else self.lambda_c,
            "r1_ratio": self.r1_ratio_value(),
            "n": self.n,
            "window": "auto" if self.window is None else self.window,
            "n_screens": "auto" if self.n_screens is None else self.n_screens,
            "n_atm": self.n_atm,
            "n_src": self.n_src,
            "master_seed": self.master_seed,
            "workers": self.workers,
        }
        if self.cn2_grid is not None:
            d["cn2_grid"] = [float(v) for v in self.cn2_grid]
        if self.ratios is not None:
            d["ratios"] = [float(v) for v in self.ratios]
        return d

    def r1_ratio_value(self) -> float:
        if math.isinf(self.lambda_c):
            return 1.0
        return 1.0 / (1.0 + 2.0 * self.r0**2 / self.lambda_c**2)


def _parse_scalar(key: str, raw: str):
    raw = raw.strip()
    if key in _FLOAT_KEYS:
        if key == "lambda_c" and raw.lower() in ("inf", "infinity"):
            return float("inf")
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"config key {key!r}: not a number: {raw!r}", key=key)
    if key in _INT_KEYS:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"config key {key!r}: not an integer: {raw!r}", key=key)
    if key in _AUTO_KEYS:
        if raw.lower() == "auto":
            return None
        try:
            return int(raw) if key in ("n_screens", "workers") else float(raw)
        except ValueError:
            raise ConfigError(f"config key {key!r}: expected number or 'auto': {raw!r}", key=key)
    if key == "ratios":
        try:
            return [float(v) for v in raw.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"config key 'ratios': bad list: {raw!r}", key=key)
    if key == "cn2_grid":
        return _parse_cn2_grid(raw)
    raise ConfigError(f"unknown config key: {key!r}", key=key)


def _parse_cn2_grid(raw: str) -> list:
    raw = raw.strip()
    if raw.lower().startswith("logspace:"):
        parts = raw.split(":")
        if len(parts) != 4:
            raise ConfigError(
                f"cn2_grid: expected 'logspace:START:STOP:COUNT', got {raw!r}", key="cn2_grid"
            )
        try:
            start, stop, count = float(parts[1]), float(parts[2]), int(parts[3])
        except ValueError:
            raise ConfigError(f"cn2_grid: bad logspace spec {raw!r}", key="cn2_grid")
        if not (start > 0 and stop > start and count >= 2):
            raise ConfigError(f"cn2_grid: need 0 < START < STOP and COUNT >= 2, got {raw!r}", key="cn2_grid")
        return [float(v) for v in np.logspace(math.log10(start), math.log10(stop), count)]
    try:
        values = [float(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cn2_grid: bad list: {raw!r}", key="cn2_grid")
    if not values:
        raise ConfigError("cn2_grid: empty list", key="cn2_grid")
    return values


def _read_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key: {key!r}", key=key)
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate config key: {key!r}", key=key)
        values[key] = _parse_scalar(key, raw)
    return values


def _preset_path(name: str) -> str:
    from importlib import resources

    ref = resources.files("beamwander.presets").joinpath(f"{name}.cfg")
    if not ref.is_file():
        raise ConfigError(f"unknown preset: {name!r}")
    return str(ref)


def parse_config(path: str, overrides: dict) -> RunConfig:
    """Load a config file and apply flag overrides (flags win)."""
    values = _read_config_file(path)
    file_has_pair = "lambda_c" in values and "r1_ratio" in values
    if file_has_pair:
        raise ConfigError("lambda_c and r1_ratio are mutually exclusive", key="r1_ratio")
    over = {k: v for k, v in overrides.items() if v is not None}
    if "lambda_c" in over and "r1_ratio" in over:
        raise ConfigError("lambda_c and r1_ratio are mutually exclusive", key="r1_ratio")
    # A flag choosing one of the coherence pair displaces a file value of the other.
    if "lambda_c" in over:
        values.pop("r1_ratio", None)
    if "r1_ratio" in over:
        values.pop("lambda_c", None)
    values.update(over)

    for key in _REQUIRED_KEYS:
        if key not in values:
            raise ConfigError(f"missing required config key: {key!r}", key=key)

    merged = dict(_DEFAULTS)
    merged.update(values)

    r1_ratio = merged.pop("r1_ratio")
    lambda_c = merged.pop("lambda_c")
    if r1_ratio is not None:
        if not 0.0 < r1_ratio <= 1.0:
            raise ConfigError(f"r1_ratio must be in (0, 1], got {r1_ratio!r}", key="r1_ratio")
        lambda_c = lambda_c_for_ratio(merged["r0"], r1_ratio)
    elif lambda_c is None:
        lambda_c = float("inf")

    workers = merged.pop("workers")
    if workers is None:
        env = os.environ.get("BEAMWANDER_WORKERS", "").strip()
        workers = int(env) if env else (os.cpu_count() or 1)

    return RunConfig(lambda_c=lambda_c, workers=workers, **merged)


def _fmt(value) -> str:
    """Deterministic scalar formatting for CSV cells."""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _config_header_lines(cfg: RunConfig) -> list:
    lines = [f"# {CSV_SCHEMA_VERSION}"]
    for key, value in sorted(cfg.echo().items()):
        if isinstance(value, list):
            value = ",".join(_fmt(float(v)) for v in value)
        lines.append(f"# {key} = {_fmt(value)}")
    return lines


def cmd_analytic(cfg: RunConfig, fmt: str = "json") -> tuple[str, int]:
    """Closed-form wander, radius, and regime quantities for one parameter set."""
    src, turb, geom = cfg.source(), cfg.turbulence(), cfg.geometry()
    pred = analytics.wander_variance_weak(src, turb, geom)
    cond = analytics.strong_turbulence_condition(src, turb, geom)
    if cfg.cn2 > 0:
        cross = analytics.cross_correlation_wander(src, turb, geom).rw2_cross
    else:
        cross = 0.0
    report = {
        "a2": pred.a2,
        "classic_wander": analytics.classic_wander(cfg.cn2, cfg.z, cfg.r0),
        "config": cfg.echo(),
        "cross_correlation_wander": float(cross),
        "i1": pred.i1,
        "r1_squared": src.r1**2,
        "rb2_analytic": analytics.beam_radius_squared(src, turb, geom),
        "regime": pred.regime,
        "rw2_weak": pred.rw2,
        "strong_turbulence": cond.strong,
        "strong_turbulence_margin": cond.margin,
        "turbulence_spread": analytics.turbulence_spread(turb, geom),
    }
    if fmt == "csv":
        cols = [k for k in sorted(report) if k != "config"]
        lines = _config_header_lines(cfg)
        lines.append(",".join(cols))
        lines.append(",".join(_fmt(report[c]) for c in cols))
        return "\n".join(lines) + "\n", 0
    return _json_text(report), 0


def cmd_simulate(cfg: RunConfig) -> tuple[str, int]:
    """One Monte Carlo wander run; nonzero exit when the run is invalidated."""
    config = make_config(
        cfg.source(),
        cfg.turbulence(),
        cfg.geometry(),
        n=cfg.n,
        n_screens=cfg.n_screens,
        window=cfg.window,
        n_atm=cfg.n_atm,
        n_src=cfg.n_src,
        master_seed=cfg.master_seed,
        workers=cfg.workers,
    )
    stats = run_wander_experiment(config)
    report = {
        "config": cfg.echo(),
        "diagnostics": {k: v for k, v in sorted(stats.diagnostics.items())},
        "n_atm": stats.n_atm,
        "n_src": stats.n_src,
        "master_seed": stats.master_seed,
        "rb2_longterm": stats.rb2_longterm,
        "rb2_shortterm": stats.rb2_shortterm,
        "rw2_mean": stats.rw2_mean,
        "rw2_se": stats.rw2_se,
    }
    code = 2 if stats.diagnostics.get("window_overflow") else 0
    return _json_text(report), code


def cmd_sweep(cfg: RunConfig) -> tuple[str, int]:
    """cn2 sweep over the configured coherence ratios, emitted as CSV."""
    if not cfg.cn2_grid:
        raise ConfigError("sweep requires cn2_grid", key="cn2_grid")
    ratios = cfg.ratios if cfg.ratios else [cfg.r1_ratio_value()]
    config = make_config(
        cfg.source(),
        cfg.turbulence(),
        cfg.geometry(),
        n=cfg.n,
        n_screens=cfg.n_screens,
        window=cfg.window,
        n_atm=cfg.n_atm,
        n_src=cfg.n_src,
        master_seed=cfg.master_seed,
        workers=cfg.workers,
    )
    rows = sweep_cn2(config, cfg.cn2_grid, ratios)
    lines = _config_header_lines(cfg)
    lines.append(",".join(SWEEP_COLUMNS))
    for row in rows:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    row.cn2,
                    row.r1_ratio,
                    row.rw2_mean,
                    row.rw2_se,
                    row.rb2_sim,
                    row.rb2_analytic,
                    row.ratio,
                    row.n_atm,
                    row.n_src,
                    row.seed,
                    row.status,
                )
            )
        )
    return "\n".join(lines) + "\n", 0


def cmd_validate_screens(cfg: RunConfig, dump_dir: str | None = None) -> tuple[str, int]:
    """Empirical vs. theoretical structure function over a screen ensemble.

    Pass requires every bin with separation in [5 l0, min(L0, window) / 10]
    to match the quadrature curve within 10%.
    """
    window = cfg.window if cfg.window is not None else 32.0 * cfg.r0
    grid = SimGrid(n=cfg.n, dx=window / cfg.n)
    n_screens = cfg.n_screens
    if n_screens is None:
        n_screens = max(10, round(cfg.z / 500.0))
    dz = cfg.z / n_screens
    turb = cfg.turbulence()

    screens = []
    for i in range(cfg.screens):
        seed = np.random.SeedSequence(cfg.master_seed, spawn_key=(2, i))
        screen = generate_turbulence_screen(grid, turb, dz, cfg.q0, seed=seed)
        if dump_dir is not None:
            os.makedirs(dump_dir, exist_ok=True)
            write_screen(screen, os.path.join(dump_dir, f"screen_{i:05d}.bin"))
        screens.append(screen)
    table = screen_structure_function(screens)

    lo = 5.0 * cfg.l0
    hi = min(cfg.L0, window) / 10.0
    bins = []
    all_ok = True
    for sep, emp, se in zip(table.separation, table.d_phi, table.se):
        in_band = lo <= sep <= hi
        theory = theoretical_phase_structure_function(float(sep), turb, dz, cfg.q0) if cfg.cn2 > 0 else 0.0
        if theory > 0.0:
            rel = emp / theory - 1.0
            ok = abs(rel) <= 0.10
        else:
            rel = 0.0
            ok = abs(emp) < 1e-12
        if in_band and not ok:
            all_ok = False
        bins.append(
            {
                "separation": float(sep),
                "d_phi_empirical": float(emp),
                "d_phi_theory": float(theory),
                "se": float(se),
                "rel_error": float(rel),
                "in_band": bool(in_band),
                "ok": bool(ok),
            }
        )
    report = {
        "band": [lo, hi],
        "bins": bins,
        "config": cfg.echo(),
        "n_screens_ensemble": cfg.screens,
        "layer_thickness": dz,
        "pass": all_ok,
    }
    return _json_text(report), 0 if all_ok else 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beamwander",
        description="Laser beam wander in turbulence: analytics, Monte Carlo, sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("analytic", "closed-form wander and radius quantities"),
        ("simulate", "one Monte Carlo wander experiment"),
        ("sweep", "cn2 sweep over coherence ratios (CSV)"),
        ("validate-screens", "screen ensemble structure-function check"),
    ):
        p = sub.add_parser(name, help=help_text)
        source = p.add_mutually_exclusive_group(required=True)
        source.add_argument("--config", help="path to a key = value config file")
        source.add_argument("--preset", choices=("fig1", "fig3", "fig5"), help="bundled figure preset")
        p.add_argument("--out", default="-", help="output path, '-' for stdout")
        p.add_argument("--r0", type=float)
        p.add_argument("--q0", type=float)
        p.add_argument("--z", type=float)
        p.add_argument("--cn2", type=float)
        p.add_argument("--l0", type=float)
        p.add_argument("--L0", type=float)
        p.add_argument("--lambda-c", dest="lambda_c", help="coherence length, m, or 'inf'")
        p.add_argument("--r1-ratio", dest="r1_ratio", type=float, help="target r1^2/r0^2")
        p.add_argument("--n", type=int)
        p.add_argument("--window", help="launch window, m, or 'auto'")
        p.add_argument("--n-screens", dest="n_screens", help="screen count or 'auto'")
        p.add_argument("--n-atm", dest="n_atm", type=int)
        p.add_argument("--n-src", dest="n_src", type=int)
        p.add_argument("--seed", dest="master_seed", type=int)
        p.add_argument("--workers", help="worker count or 'auto'")
        if name == "analytic":
            p.add_argument("--format", choices=("json", "csv"), default="json")
        if name == "sweep":
            p.add_argument("--cn2-grid", dest="cn2_grid", help="logspace:START:STOP:COUNT or comma list")
            p.add_argument("--ratios", help="comma list of r1^2/r0^2 values")
        if name == "validate-screens":
            p.add_argument("--screens", type=int, help="ensemble size")
            p.add_argument("--dump-dir", dest="dump_dir", help="write every screen to this directory")
    return parser


_OVERRIDE_KEYS = (
    "r0",
    "q0",
    "z",
    "cn2",
    "l0",
    "L0",
    "lambda_c",
    "r1_ratio",
    "n",
    "window",
    "n_screens",
    "n_atm",
    "n_src",
    "master_seed",
    "workers",
    "cn2_grid",
    "ratios",
    "screens",
)


def _collect_overrides(args: argparse.Namespace) -> dict:
    overrides = {}
    for key in _OVERRIDE_KEYS:
        value = getattr(args, key, None)
        if value is None:
            continue
        overrides[key] = _parse_scalar(key, str(value)) if isinstance(value, str) else value
    return overrides


def _emit(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; that is a config error here.
        return 0 if exc.code in (0, None) else 1

    try:
        path = args.config if args.config else _preset_path(args.preset)
        cfg = parse_config(path, _collect_overrides(args))
        if args.command == "analytic":
            text, code = cmd_analytic(cfg, fmt=args.format)
        elif args.command == "simulate":
            text, code = cmd_simulate(cfg)
        elif args.command == "sweep":
            text, code = cmd_sweep(cfg)
        else:
            text, code = cmd_validate_screens(cfg, dump_dir=args.dump_dir)
        _emit(text, args.out)
        return code
    except (ConfigError, ParameterDomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (NumericalAccuracyError, StepSizeError, ResolutionError, DegenerateInputError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except BeamwanderError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - last-resort mapping
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
