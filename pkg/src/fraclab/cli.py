"""Command-line front end.

    fraclab compat   --bc dirichlet --a 0.5 --rhs const --n 4096 --out r.json
    fraclab power    --bc neumann --a 0.25 --rhs linear --n 1024
    fraclab boundary --a 0.25 --n 4096
    fraclab compare  --a 0.5 --nonlocal-n 512
    fraclab selftest

Exit codes: 0 every verdict passed, 1 some verdict failed, 2 usage or
configuration error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import parse_rhs
from .contour import apply_inverse_power_contour, build_rule
from .errors import (
    AssemblyError,
    CacheError,
    DomainError,
    FraclabError,
    InsufficientDataError,
    InvalidArgumentError,
    InvalidStateError,
    NumericalError,
)
from .grid_ops import BC, assemble_elliptic, build_uniform_grid, elliptic_spec
from .regularity import (
    compare_first_eigenvalues,
    compatibility_experiment,
    fit_boundary_exponent,
    fit_power_decay,
    predicted_boundary_exponent,
    prepare,
)
from .spectral import (
    apply_power,
    decompose,
    forward_coefficients,
    load_decomposition,
    save_decomposition,
    solve_power,
)

log = logging.getLogger("fraclab")

COMMANDS = ("power", "compat", "boundary", "compare", "selftest")
EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3

DEFAULT_TOLERANCES = {"beta": 0.15, "theta": 0.05, "residual": 1e-10, "contour": 1e-7}


@dataclass
class RunConfig:
    command: str
    bc: str = "dirichlet"
    a: float = 0.5
    rhs: str = "const"
    n: int = 1024
    coef: str = "const:1"
    quad_q: int = 200
    quad_step: float | None = None
    dump_coeffs: bool = False
    out: str | None = None
    cache_dir: str | None = None
    seed: int = 0
    nonlocal_n: int = 1024
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def validate(self):
        if self.command not in COMMANDS:
            raise InvalidArgumentError(f"unknown command {self.command!r}")
        if not 0 < self.a < 1:
            raise InvalidArgumentError("a must lie in (0,1)")
        n = self.n
        if not (isinstance(n, int) and 64 <= n <= 8192 and n & (n - 1) == 0):
            raise InvalidArgumentError(f"N must be a power of two in [64, 8192], got {n}")
        BC.parse(self.bc)
        if not 2 <= self.nonlocal_n <= 2048:
            raise InvalidArgumentError("--nonlocal-n must lie in [2, 2048]")
        if self.dump_coeffs and not self.out:
            raise InvalidArgumentError("--dump-coeffs needs --out")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise InvalidArgumentError(f"unknown tolerance keys {sorted(unknown)}")


@dataclass
class ExperimentReport:
    config: dict
    measured: dict = field(default_factory=dict)
    predicted: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def verdict(self, name, ok: bool, tolerance, tag: str):
        self.verdicts[name] = {"verdict": "pass" if ok else "fail", "tolerance": tolerance, "tag": tag}

    @property
    def passed(self) -> bool:
        return all(v["verdict"] == "pass" for v in self.verdicts.values())

    def to_json(self) -> str:
        return json.dumps(_encode(asdict(self)), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        return cls(**_decode(json.loads(text)))


def _encode(obj):
    # JSON has no inf/nan; store them as strings so reports stay portable
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    if obj in ("inf", "-inf", "nan"):
        return float(obj)
    return obj


# --- configuration -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fraclab", description="Fractional elliptic operator laboratory")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON config file (flags take precedence)")
    p.add_argument("--bc", choices=("dirichlet", "neumann"))
    p.add_argument("--a", type=float)
    p.add_argument("--rhs")
    p.add_argument("--n", type=int)
    p.add_argument("--coef", help="diffusion coefficient: const:v or affine:p,q")
    p.add_argument("--quad-q", type=int)
    p.add_argument("--quad-step", type=float)
    p.add_argument("--dump-coeffs", action="store_true", default=None)
    p.add_argument("--out")
    p.add_argument("--cache-dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol-beta", type=float)
    p.add_argument("--nonlocal-n", type=int)
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for a config batch")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if k == "tolerances":
            out["tolerances"] = {**out.get("tolerances", {}), **v}
        elif v is not None:
            out[k] = v
    return out


def resolve_configs(args: argparse.Namespace) -> list[RunConfig]:
    """defaults < config file < flags. A config file with a ``batch`` list
    yields one RunConfig per entry."""
    defaults = asdict(RunConfig(command=args.command))
    defaults["cache_dir"] = os.environ.get("FRACLAB_CACHE")
    file_cfg, batch = {}, [{}]
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidArgumentError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise InvalidArgumentError("config file must hold a JSON object")
        batch = file_cfg.pop("batch", None) or [{}]
    flags = {
        "bc": args.bc, "a": args.a, "rhs": args.rhs, "n": args.n, "coef": args.coef,
        "quad_q": args.quad_q, "quad_step": args.quad_step, "dump_coeffs": args.dump_coeffs,
        "out": args.out, "cache_dir": args.cache_dir, "seed": args.seed, "nonlocal_n": args.nonlocal_n,
        "tolerances": {"beta": args.tol_beta} if args.tol_beta is not None else {},
    }
    configs = []
    fields = set(defaults)
    for entry in batch:
        merged = _merge(_merge(defaults, file_cfg), entry)
        merged = _merge(merged, flags)
        merged["command"] = args.command
        unknown = set(merged) - fields
        if unknown:
            raise InvalidArgumentError(f"unknown config keys {sorted(unknown)}")
        cfg = RunConfig(**merged)
        cfg.validate()
        configs.append(cfg)
    if len(configs) > 1:
        outs = [c.out for c in configs]
        if None in outs or len(set(outs)) != len(outs):
            raise InvalidArgumentError("every batch entry needs its own 'out' path")
    return configs


# --- decompositions with caching -------------------------------------------


def _cache_path(cfg: RunConfig, method: str, alpha: float, beta: float) -> Path | None:
    if not cfg.cache_dir:
        return None
    key = f"{cfg.bc}|{cfg.coef}|{cfg.n}|{alpha!r}|{beta!r}|{method}"
    digest = hashlib.sha256(key.encode()).hexdigest()[:16]
    return Path(cfg.cache_dir) / f"{cfg.bc}-N{cfg.n}-{digest}.frlb"


def get_decomposition(cfg: RunConfig, alpha=0.0, beta=math.pi):
    spec = elliptic_spec(cfg.coef, cfg.bc)
    grid = build_uniform_grid(alpha, beta, cfg.n, spec.bc.layout)
    op = assemble_elliptic(spec, grid)
    method = "ql" if cfg.n <= 1024 else "lapack"
    path = _cache_path(cfg, method, alpha, beta)
    if path is not None and path.exists():
        try:
            dec = load_decomposition(path, method=method)
            if dec.n == cfg.n and dec.bc is spec.bc:
                log.info("loaded decomposition from %s", path)
                return spec, op, dec
            log.warning("cache entry %s does not match the request; recomputing", path)
        except CacheError as exc:
            log.warning("ignoring cache entry: %s", exc)
    dec = decompose(op, method=method)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_decomposition(dec, path)
        log.info("cached decomposition at %s", path)
    return spec, op, dec


# --- commands ------------------------------------------------------------------


def _config_echo(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d.pop("cache_dir")  # where the cache lives does not change any number
    d.pop("out")
    return d


def _dump_coefficients(path: Path, k, lam, cf, cu):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "lambda_k", "c_f", "c_u"])
        for row in zip(k, lam, cf, cu):
            w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])


def _coeff_path(cfg: RunConfig) -> Path:
    return Path(cfg.out).with_suffix(".coeffs.csv")


def cmd_compat(cfg: RunConfig, rep: ExperimentReport):
    spec, _, dec = get_decomposition(cfg)
    tol = cfg.tolerances["beta"]
    r = compatibility_experiment(cfg.bc, cfg.a, cfg.rhs, cfg.n, coef=cfg.coef, tol=tol, dec=dec, spec=spec)
    rep.measured.update(
        violation_index=r.violation_index, beta=r.measured_beta, s_max=r.measured_smax, r2=r.r2,
        mask=r.mask, window=list(r.window), note=r.note,
    )
    rep.predicted.update(beta=r.predicted_beta, s_max=r.predicted_smax)
    tag = "dirichlet-compatibility-threshold" if r.bc == "dirichlet" else "neumann-compatibility-threshold"
    rep.verdict("beta", r.verdict == "pass", tol, tag)
    if cfg.dump_coeffs:
        c = r.coefficients
        _dump_coefficients(_coeff_path(cfg), c["k"], c["lambda_k"], c["c_f"], c["c_u"])


def cmd_power(cfg: RunConfig, rep: ExperimentReport):
    spec, op, dec = get_decomposition(cfg)
    dec = prepare(dec, spec)
    f = parse_rhs(cfg.rhs).sample(dec.grid, dec)
    u = solve_power(dec, cfg.a, f)
    res = dec.grid.norm(apply_power(dec, cfg.a, u) - f) / dec.grid.norm(f)
    rep.measured.update(u_norm=dec.grid.norm(u), residual=res)
    rep.verdict("residual", res <= cfg.tolerances["residual"], cfg.tolerances["residual"], "power-homeomorphism")

    rule = build_rule(cfg.a, cfg.quad_q, cfg.quad_step)
    uc = apply_inverse_power_contour(op, rule, f, augmented=dec.augmentation.value != "none")
    dev = dec.grid.norm(uc - u) / dec.grid.norm(u)
    rep.measured.update(contour_deviation=dev, quad_q=rule.q, quad_step=rule.step)
    rep.verdict("contour", dev <= cfg.tolerances["contour"], cfg.tolerances["contour"], "resolvent-integral")

    cf, cu = forward_coefficients(dec, f), forward_coefficients(dec, u)
    k = np.arange(1, dec.n + 1) if dec.bc is BC.DIRICHLET else np.arange(dec.n)
    try:
        fit = fit_power_decay(cu[k >= 1], "nonzero", (8, max(dec.n // 8, 8)), k=k[k >= 1])
        rep.measured.update(beta=fit.exponent, r2=fit.r2)
    except InsufficientDataError as exc:
        rep.measured.update(beta=None, note=str(exc))
    if cfg.dump_coeffs:
        _dump_coefficients(_coeff_path(cfg), k, dec.eigenvalues, cf, cu)


def cmd_boundary(cfg: RunConfig, rep: ExperimentReport):
    if BC.parse(cfg.bc) is not BC.DIRICHLET:
        raise InvalidArgumentError("the boundary command needs --bc dirichlet")
    if cfg.a == 0.5:
        log.warning("a = 1/2 may carry a logarithmic boundary factor; the power-law fit is not sharp there")
    _, _, dec = get_decomposition(cfg)
    fit = fit_boundary_exponent(dec, cfg.a, cfg.rhs)
    theta = predicted_boundary_exponent(cfg.a)
    tol = cfg.tolerances["theta"]
    rep.measured.update(theta=fit.exponent, r2=fit.r2, window=list(fit.window), defined=fit.defined,
                        trace_ratio=fit.trace_ratio, note=fit.note)
    rep.predicted.update(theta=theta)
    ok = fit.defined and abs(fit.exponent - theta) <= tol
    rep.verdict("theta", ok, tol, "boundary-exponent")


def cmd_compare(cfg: RunConfig, rep: ExperimentReport):
    n = min(cfg.n, cfg.nonlocal_n)
    r = compare_first_eigenvalues(cfg.a, n)
    rep.measured.update(r, n=n)
    rep.predicted.update(ordering="restricted < spectral")
    rep.verdict("ordering", r["restricted"] < r["spectral"], 0.0, "eigenvalue-comparison")


def cmd_selftest(cfg: RunConfig, rep: ExperimentReport):
    from .selftest import run_all

    for name, ok, value, tol in run_all(cfg.seed):
        rep.measured[name] = value
        rep.verdict(name, ok, tol, "selftest")


_DISPATCH = {
    "power": cmd_power,
    "compat": cmd_compat,
    "boundary": cmd_boundary,
    "compare": cmd_compare,
    "selftest": cmd_selftest,
}


def run_config(cfg: RunConfig) -> tuple[int, ExperimentReport | None]:
    rep = ExperimentReport(config=_config_echo(cfg))
    t0 = time.perf_counter()
    try:
        _DISPATCH[cfg.command](cfg, rep)
    except (InvalidArgumentError, InvalidStateError, AssemblyError) as exc:
        print(f"fraclab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE, None
    except (NumericalError, DomainError, InsufficientDataError, CacheError, FloatingPointError) as exc:
        print(f"fraclab: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL, None
    rep.meta = {"tool": "fraclab", "version": __version__, "wall_time": time.perf_counter() - t0}
    text = rep.to_json()
    if cfg.out:
        Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    for name, v in rep.verdicts.items():
        log.info("%-24s %s (tol %s)", name, v["verdict"], v["tolerance"])
    return (EXIT_PASS if rep.passed else EXIT_FAIL), rep


def _run_config_code(cfg: RunConfig) -> int:
    return run_config(cfg)[0]


def run_command(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        configs = resolve_configs(args)
    except (InvalidArgumentError, FraclabError) as exc:
        print(f"fraclab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.jobs < 1:
        print("fraclab: error: --jobs must be positive", file=sys.stderr)
        return EXIT_USAGE
    if len(configs) == 1 or args.jobs == 1:
        codes = [_run_config_code(c) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(_run_config_code, configs))
    # usage beats numerical beats fail beats pass
    for code in (EXIT_USAGE, EXIT_NUMERICAL, EXIT_FAIL):
        if code in codes:
            return code
    return EXIT_PASS


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
