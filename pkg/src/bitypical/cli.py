"""Command-line front end: ``bitypical verify`` and ``bitypical report``.

Exit codes: 0 when every asserted check passes, 1 when at least one fails,
2 on a configuration, dense-cap or cache-integrity error.
"""
from __future__ import annotations

import argparse
import csv
import importlib.resources
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, verification
from .cache import default_cache_dir, load_or_build
from .projectors import SerializationError
from .tensorspace import (
    ActionKind,
    CapExceededError,
    DEFAULT_DENSE_CAP,
    TensorSpace,
    marginals,
    random_density,
    validate_density,
)
from .typicality import check_record, run_grid

SCHEMA_VERSION = "1.0"
DEFAULT_GRID = (0.05, 0.2, 0.5, 1.0, 2.0)
SYMMETRIZER_MAX_N = 5
CHARACTER_ORACLE_MAX_N = 5

log = logging.getLogger("bitypical")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    d_A: int = 2
    d_B: int = 2
    n: list[int] = field(default_factory=lambda: [2])
    eps_list: list[float] = field(default_factory=lambda: list(DEFAULT_GRID))
    delta_list: list[float] = field(default_factory=lambda: list(DEFAULT_GRID))
    state_kind: str = "random"
    state_seed: int = 42
    spectrum: list[float] | None = None
    state_file: str | None = None
    dense_cap: int = DEFAULT_DENSE_CAP
    deterministic: bool = False
    cache_dir: str | None = None
    output: str | None = None
    csv_path: str | None = None
    refine_seed: int = 0
    kw_states: int = 20

    def validate(self) -> None:
        if self.d_A < 1 or self.d_B < 1:
            raise ConfigError(f"local dimensions must be positive, got {self.d_A}, {self.d_B}")
        if not self.n or min(self.n) < 1:
            raise ConfigError(f"n must be a positive integer, got {self.n}")
        for n in self.n:
            dim = (self.d_A * self.d_B) ** n
            if dim > self.dense_cap:
                raise ConfigError(
                    f"dense dimension {dim} at n={n} exceeds dense cap {self.dense_cap}"
                )
        for name, values in (("eps", self.eps_list), ("delta", self.delta_list)):
            if not values or any(v < 0 or not math.isfinite(v) for v in values):
                raise ConfigError(f"{name} values must be finite and >= 0, got {values}")
        if self.state_kind not in ("random", "spectrum", "explicit-file"):
            raise ConfigError(f"unknown state kind {self.state_kind}")
        if self.state_kind == "spectrum" and not self.spectrum:
            raise ConfigError("--state-kind spectrum needs --spectrum")
        if self.state_kind == "explicit-file" and not self.state_file:
            raise ConfigError("--state-kind explicit-file needs --state-file")


def load_state_file(path: str | Path) -> np.ndarray:
    """A density matrix from .npy, or JSON as a nested list or {"real": ..., "imag": ...}."""
    path = Path(path)
    if path.suffix == ".npy":
        return np.load(path)
    data = json.loads(path.read_text())
    if isinstance(data, dict):
        return np.asarray(data["real"], dtype=float) + 1j * np.asarray(data.get("imag", 0.0), dtype=float)
    return np.asarray(data, dtype=complex)


def build_state(cfg: RunConfig) -> np.ndarray:
    d = cfg.d_A * cfg.d_B
    try:
        if cfg.state_kind == "random":
            rho = random_density(d, cfg.state_seed)
        elif cfg.state_kind == "spectrum":
            rho = random_density(d, cfg.state_seed, cfg.spectrum)
        else:
            rho = load_state_file(cfg.state_file)
        rho = validate_density(rho)
    except (OSError, ValueError, KeyError) as err:
        raise ConfigError(f"invalid state: {err}") from err
    if rho.shape != (d, d):
        raise ConfigError(f"state has shape {rho.shape}, expected {(d, d)}")
    return rho


# --------------------------------------------------------------------------
# JSON


def jsonable(x: Any) -> Any:
    """Plain JSON types; non-finite floats become the strings "inf", "-inf", "nan"."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(x, complex):
        return [jsonable(x.real), jsonable(x.imag)]
    return x


def _sort_key(rec: dict) -> tuple:
    def num(v):
        return -1.0 if v is None else float(v)

    d = rec.get("details", {})
    return (
        rec.get("n") or 0,
        rec.get("name") or rec.get("id"),
        num(rec.get("eps")),
        num(rec.get("delta")),
        str(d.get("assignment", "")),
        str(d.get("side", "")),
    )


def provenance(cfg: RunConfig, rho: np.ndarray) -> dict[str, Any]:
    marg = marginals(rho, cfg.d_A, cfg.d_B)
    return {
        "package_version": __version__,
        "d_A": cfg.d_A,
        "d_B": cfg.d_B,
        "n": sorted(set(cfg.n)),
        "eps": sorted(set(cfg.eps_list)),
        "delta": sorted(set(cfg.delta_list)),
        "seeds": {"state": cfg.state_seed, "refinement": cfg.refine_seed},
        "state_kind": cfg.state_kind,
        "spectra": {"r": marg.r, "r_A": marg.r_A, "r_B": marg.r_B},
        "dense_cap": cfg.dense_cap,
        "deterministic": cfg.deterministic,
    }


def assemble_report(
    cfg: RunConfig,
    rho: np.ndarray,
    checks: list[dict],
    entries: list[dict],
    timing: dict[str, float] | None,
) -> dict[str, Any]:
    checks = sorted(checks, key=_sort_key)
    entries = sorted(entries, key=_sort_key)
    summary: dict[str, dict[str, int]] = {}
    for n in sorted(set(cfg.n)):
        cs = [c for c in checks if c.get("n") == n]
        summary[str(n)] = {
            "checks": len(cs),
            "failed": sum(not c["pass"] for c in cs),
            "margin_entries": sum(e.get("n") == n for e in entries),
        }
    return jsonable({
        "schema_version": SCHEMA_VERSION,
        "provenance": provenance(cfg, rho),
        "exact_checks": checks,
        "margin_entries": entries,
        "summary_by_n": summary,
        "timing": timing,
    })


def write_csv(path: str | Path, entries: list[dict]) -> None:
    cols = ["n", "eps", "delta", "id", "assignment", "side", "lhs", "rhs", "log2_margin", "hypothesis_met", "empty"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for e in entries:
            d = e.get("details", {})
            w.writerow([e.get("n"), e.get("eps"), e.get("delta"), e["id"], d.get("assignment", ""), d.get("side", ""),
                        e["lhs"], e["rhs"], e["log2_margin"], e["hypothesis_met"], e["empty"]])


# --------------------------------------------------------------------------
# commands


def _prepare(cfg: RunConfig, n: int, *, strict_cache: bool) -> TensorSpace:
    space = TensorSpace(cfg.d_A, cfg.d_B, n, cfg.dense_cap)
    for kind in (ActionKind.A, ActionKind.B, ActionKind.AB):
        load_or_build(space, kind, cfg.cache_dir, strict=strict_cache)
    return space


def _module_checks(cfg: RunConfig, n: int, space: TensorSpace) -> list[dict]:
    out = []
    suites = verification.symgroup_suite(n)
    if n <= CHARACTER_ORACLE_MAX_N and n**n <= cfg.dense_cap:
        suites += verification.character_oracle_suite(n, dense_cap=cfg.dense_cap)
    if n <= SYMMETRIZER_MAX_N:
        suites += verification.symmetrizer_suite(n)
    for d in sorted({cfg.d_A, cfg.d_B}):
        if d**n <= cfg.dense_cap:
            suites += verification.single_system_suite(d, n, cfg.kw_states, cfg.state_seed, dense_cap=cfg.dense_cap)
    suites += verification.bipartite_suite(space, cfg.refine_seed)
    for c in suites:
        out.append(check_record(c, n=n, eps=None, delta=None))
    return out


def run(cfg: RunConfig, *, modules: bool, margins: bool) -> tuple[dict[str, Any], int]:
    cfg.validate()
    rho = build_state(cfg)
    checks: list[dict] = []
    entries: list[dict] = []
    timing: dict[str, float] = {}
    start = time.perf_counter()
    for n in sorted(set(cfg.n)):
        t0 = time.perf_counter()
        space = _prepare(cfg, n, strict_cache=modules)
        if modules:
            checks += _module_checks(cfg, n, space)
        c, e = run_grid(rho, cfg.d_A, cfg.d_B, n, cfg.eps_list, cfg.delta_list,
                        seed=cfg.refine_seed, dense_cap=cfg.dense_cap, margins=margins)
        checks += c
        entries += e
        timing[f"n={n}"] = time.perf_counter() - t0
        log.info("n=%d done in %.2fs", n, timing[f"n={n}"])
    timing["total"] = time.perf_counter() - start
    report = assemble_report(cfg, rho, checks, entries, None if cfg.deterministic else timing)
    failed = [c for c in report["exact_checks"] if not c["pass"]]
    return report, 1 if failed else 0


def cmd_verify(cfg: RunConfig) -> tuple[dict[str, Any], int]:
    """Typicality exact suite plus every module invariant suite; cache errors are fatal here."""
    return run(cfg, modules=True, margins=True)


def cmd_report(cfg: RunConfig) -> tuple[dict[str, Any], int]:
    """Typicality exact suite and margin entries over the grid."""
    return run(cfg, modules=False, margins=True)


def schema_path():
    """Location of the JSON schema reports validate against."""
    return importlib.resources.files("bitypical") / "schema" / "report.schema.json"


def dumps(report: dict[str, Any]) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


# --------------------------------------------------------------------------
# argument parsing


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from err


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dA", type=int, default=2, help="local dimension of system A")
    common.add_argument("--dB", type=int, default=2, help="local dimension of system B")
    common.add_argument("--n", type=int, action="append", help="number of copies (repeatable)")
    common.add_argument("--eps", type=float, action="append", help="marginal radius (repeatable)")
    common.add_argument("--delta", type=float, action="append", help="joint radius (repeatable)")
    common.add_argument("--state-kind", choices=["random", "spectrum", "explicit-file"], default="random")
    common.add_argument("--state-seed", type=int, default=42)
    common.add_argument("--spectrum", type=_floats, help="comma separated, non-increasing, sums to 1")
    common.add_argument("--state-file", help=".npy or JSON density matrix")
    common.add_argument("--dense-cap", type=int, default=DEFAULT_DENSE_CAP)
    common.add_argument("--cache-dir", default=None, help="projector cache (default $SWTP_CACHE_DIR)")
    common.add_argument("--out", help="write the JSON report here instead of stdout")
    common.add_argument("--csv", help="also write the margin table as CSV")
    common.add_argument("--deterministic", action="store_true", help="omit timing so reruns are byte-identical")
    common.add_argument("--refine-seed", type=int, default=0)
    common.add_argument("--kw-states", type=int, default=20, help="random states per single-system Keyl-Werner sweep")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="bitypical", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="run every asserted check")
    sub.add_parser("report", parents=[common], help="exact checks plus margin entries")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cache_dir = args.cache_dir if args.cache_dir is not None else default_cache_dir()
    return RunConfig(
        d_A=args.dA,
        d_B=args.dB,
        n=args.n or [2],
        eps_list=args.eps or list(DEFAULT_GRID),
        delta_list=args.delta or list(DEFAULT_GRID),
        state_kind=args.state_kind,
        state_seed=args.state_seed,
        spectrum=args.spectrum,
        state_file=args.state_file,
        dense_cap=args.dense_cap,
        deterministic=args.deterministic,
        cache_dir=str(cache_dir) if cache_dir else None,
        output=args.out,
        csv_path=args.csv,
        refine_seed=args.refine_seed,
        kw_states=args.kw_states,
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    cfg = config_from_args(args)
    command = cmd_verify if args.command == "verify" else cmd_report
    try:
        report, status = command(cfg)
    except (ConfigError, CapExceededError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except SerializationError as err:
        print(f"cache integrity error: {err}", file=sys.stderr)
        return 2
    text = dumps(report)
    if cfg.output:
        Path(cfg.output).write_text(text)
    else:
        sys.stdout.write(text)
    if cfg.csv_path:
        write_csv(cfg.csv_path, report["margin_entries"])
    failed = [c["name"] for c in report["exact_checks"] if not c["pass"]]
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(sorted(set(failed)))}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
