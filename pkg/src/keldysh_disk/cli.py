"""Command-line front end: ``keldysh-disk <eig|dn|krein|weyl|audit> ...``.

Output is JSON ``{"meta": {"version", "config", "seed"}, "rows": [...]}`` with
sorted keys and floats written with 17 significant digits, or CSV with one
header line; both are byte-for-byte reproducible for a fixed configuration.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .basis import RegimeError, ZernikeIndex, as_gamma, zernike_eigenvalue, zernike_norm_sq, zernike_profile
from .extensions import (
    FourierMultiplier, KreinCollisionError, SpectralCollisionError, dirichlet_eigenvalue,
    dn_map_mode, dn_map_mode_ode, krein_resolvent, robin_eigenvalue_scan, weyl_function,
)
from .basis import RadialProfile
from .operator import DEFAULT_C0, ConormalElement, apply_L
from .spaces import SpectralVector
from . import verify

EXIT_OK, EXIT_FAIL, EXIT_REGIME, EXIT_SPECTRAL, EXIT_KREIN, EXIT_USAGE = 0, 1, 2, 3, 4, 64


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    gamma: List[float] = field(default_factory=lambda: [0.0])
    N: int = 64
    M: int = 16
    lam: complex = 0.0
    c0: float = DEFAULT_C0
    seed: int = 0
    output: Optional[str] = None
    format: str = "json"
    B: str = "1"
    which: str = "all"

    def validate(self):
        if self.format not in ("json", "csv"):
            raise UsageError(f"unknown format {self.format!r}")
        if self.N < 0 or self.M < 0:
            raise UsageError("N and M must be nonnegative")
        for g in self.gamma:
            gp = as_gamma(g)
            if self.command in ("dn", "krein", "weyl"):
                gp.require_traces()
            if self.command == "eig" and gp.gamma <= -1.0:
                raise RegimeError(f"gamma={g}: no Dirichlet eigenbasis for gamma <= -1")
        return self

    def as_meta(self):
        d = asdict(self)
        d["lam"] = self.lam
        d.pop("output")
        return d


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def parse_gamma(text) -> List[float]:
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, list):
        return [float(v) for v in text]
    parts = str(text).split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise UsageError(f"gamma grid must be g1:g2:step, got {text!r}")
    g1, g2, st = (float(p) for p in parts)
    if st <= 0:
        raise UsageError("gamma grid step must be positive")
    n = int(math.floor((g2 - g1) / st + 1e-9)) + 1
    return [round(g1 + i * st, 12) for i in range(max(n, 0))]


def parse_lambda(text) -> complex:
    if isinstance(text, (int, float, complex)):
        return complex(text)
    if isinstance(text, list):
        return complex(float(text[0]), float(text[1]) if len(text) > 1 else 0.0)
    parts = str(text).split(",")
    try:
        re_ = float(parts[0])
        im_ = float(parts[1]) if len(parts) > 1 else 0.0
    except ValueError as e:
        raise UsageError(f"bad lambda {text!r}") from e
    return complex(re_, im_)


def _poly(coeffs, x):
    return sum(c * x ** i for i, c in enumerate(coeffs))


def parse_B(spec: str) -> FourierMultiplier:
    """B-spec: a constant ("0.5"), a JSON per-mode list/dict ("[b_0, b_1, ...]" indexed by |m|,
    or {"m": b}), or "rational:p0,p1,.../q0,q1,..." giving p(|m|)/q(|m|)."""
    spec = str(spec).strip()
    if spec.startswith("rational:"):
        body = spec[len("rational:"):]
        try:
            num, den = body.split("/")
            p = [float(Fraction(v)) for v in num.split(",")]
            q = [float(Fraction(v)) for v in den.split(",")]
        except ValueError as e:
            raise UsageError(f"bad rational B-spec {spec!r}") from e
        if any(_poly(q, abs(m)) == 0 for m in range(0, 1025)):
            raise UsageError("rational B-spec denominator vanishes on an integer |m|")
        return FourierMultiplier(lambda m: _poly(p, abs(m)) / _poly(q, abs(m)))
    if spec.startswith("[") or spec.startswith("{"):
        try:
            val = json.loads(spec)
        except json.JSONDecodeError as e:
            raise UsageError(f"bad B-spec {spec!r}") from e
        if isinstance(val, list):
            vals = [float(v) for v in val]
            return FourierMultiplier(lambda m: vals[abs(m)] if abs(m) < len(vals) else 0.0)
        table = {int(k): float(v) for k, v in val.items()}
        return FourierMultiplier(table)
    try:
        beta = float(Fraction(spec))
    except ValueError as e:
        raise UsageError(f"bad B-spec {spec!r}") from e
    return FourierMultiplier.constant(beta)


# ---------------------------------------------------------------------------
# deterministic emission
# ---------------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _plain(obj):
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    return obj


def dumps(obj) -> str:
    """JSON with sorted keys and 17-significant-digit floats."""
    obj = _plain(obj)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ", ".join(json.dumps(k) + ": " + dumps(v) for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj)}")


def _flatten_row(row: Dict) -> Dict:
    out = {}
    for k, v in row.items():
        v = _plain(v)
        if isinstance(v, dict):
            for kk, vv in v.items():
                out[f"{k}_{kk}"] = vv
        else:
            out[k] = v
    return out


def to_csv(rows: Sequence[Dict]) -> str:
    flat = [_flatten_row(r) for r in rows]
    keys = sorted({k for r in flat for k in r})
    lines = [",".join(keys)]
    for r in flat:
        cells = []
        for k in keys:
            v = r.get(k, "")
            if isinstance(v, bool):
                cells.append("true" if v else "false")
            elif isinstance(v, float):
                cells.append("" if not math.isfinite(v) else _fmt_float(v))
            elif isinstance(v, (list, dict)):
                cells.append('"' + dumps(v).replace('"', '""') + '"')
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def render(cfg: RunConfig, rows: List[Dict]) -> str:
    if cfg.format == "csv":
        return to_csv(rows)
    doc = {"meta": {"version": __version__, "config": cfg.as_meta(), "seed": cfg.seed}, "rows": rows}
    return dumps(doc) + "\n"


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("KELDYSH_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    items = list(items)
    n = _threads()
    if n == 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))      # ordered merge


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def eigen_residual(gamma: float, idx: ZernikeIndex) -> float:
    """max coefficient of (L - lambda) G / max coefficient of G, computed exactly in monomials."""
    g = abs(gamma)
    p = zernike_profile(g, idx)
    lam = zernike_eigenvalue(gamma, idx.n)
    zero = RadialProfile.zero(idx.m)
    elem = ConormalElement(gamma, idx.m, p, zero) if gamma >= 0 else ConormalElement(gamma, idx.m, zero, p)
    Le = apply_L(gamma, elem)
    r = (Le.smooth - elem.smooth.scale(lam)) if gamma >= 0 else (Le.singular - elem.singular.scale(lam))
    scale = lam * max(np.max(np.abs(p.coeffs)), 1e-300)
    extra = 0.0 if gamma >= 0 else float(np.max(np.abs(Le.smooth.coeffs)))
    return float(max(np.max(np.abs(r.coeffs)), extra) / scale)


def cmd_eig(cfg: RunConfig) -> List[Dict]:
    def one(g):
        rows = []
        for n in range(cfg.N + 1):
            for k in range(n + 1):
                idx = ZernikeIndex(n, k)
                rows.append({"gamma": g, "n": n, "k": k, "m": idx.m,
                             "eigenvalue": zernike_eigenvalue(g, n),
                             "norm_sq": zernike_norm_sq(abs(g), idx),
                             "residual": eigen_residual(g, idx)})
        return rows
    return [r for rows in _map(one, cfg.gamma) for r in rows]


def cmd_dn(cfg: RunConfig) -> List[Dict]:
    lam = cfg.lam

    def one(g):
        rows = []
        for m in range(-cfg.M, cfg.M + 1):
            res = dn_map_mode(g, lam, m, cfg.N, c0=cfg.c0)
            ode = dn_map_mode_ode(g, lam, m, cfg.c0)
            mirror = dn_map_mode(g, lam, -m, cfg.N, c0=cfg.c0).mu
            rows.append({"gamma": g, "m": m, "mu_re": res.mu.real, "mu_im": res.mu.imag,
                         "oracle_diff": abs(res.mu - ode), "truncation_estimate": res.truncation_estimate,
                         "symmetry_diff": abs(res.mu - mirror)})
        return rows
    return [r for rows in _map(one, cfg.gamma) for r in rows]


def cmd_krein(cfg: RunConfig) -> List[Dict]:
    B = parse_B(cfg.B)
    lam = cfg.lam

    def one(g):
        rng = np.random.default_rng(cfg.seed)
        rhs = SpectralVector.random(g, cfg.N, rng, modes=range(-cfg.M, cfg.M + 1))
        sol = krein_resolvent(g, lam, B, rhs, cfg.M, cfg.c0)
        norm_rhs = math.sqrt(sum(abs(v) ** 2 for v in rhs.entries.values()))
        kernel = {p.m: p for p in sol.kernel}
        rows = []
        for m in sorted(rhs.modes):
            uD = math.sqrt(sum(abs(v) ** 2 for i, v in sol.spectral.entries.items() if i.m == m))
            c = kernel[m].amp if m in kernel else 0.0
            rows.append({"kind": "mode", "gamma": g, "m": m, "B": B(m).real, "dirichlet_part_norm": uD,
                         "correction": complex(c)})
        rows.append({"kind": "certificate", "gamma": g, "rhs_norm": norm_rhs,
                     "operator_residual": sol.operator_residual,
                     "boundary_residual": sol.boundary_residual,
                     "pairing_crosscheck": sol.pairing_crosscheck})
        b0 = B(0).real
        if b0 > 0:
            rows.append({"kind": "eigenvalue_scan", "gamma": g, "m": 0, "B": b0,
                         "lower": dirichlet_eigenvalue(g, 0), "upper": dirichlet_eigenvalue(g, 2),
                         "robin_eigenvalue": robin_eigenvalue_scan(g, 0, b0, 0, cfg.c0)})
        return rows
    return [r for rows in _map(one, cfg.gamma) for r in rows]


WEYL_SWEEP_SHIFTS = (1.0, 3.0, 10.0, 30.0, 100.0)


def cmd_weyl(cfg: RunConfig) -> List[Dict]:
    """sup_{|m|<=M} |M_m(lambda)| along lambda = Re(lambda_0) - t; reported only, no claim checked."""
    def one(g):
        rows = []
        for t in WEYL_SWEEP_SHIFTS:
            lam = cfg.lam.real - t
            W = weyl_function(g, lam, cfg.M, cfg.N, cfg.c0)
            vals = {m: abs(W(m)) for m in range(-cfg.M, cfg.M + 1)}
            m_star = max(vals, key=lambda m: (vals[m], -abs(m), m))
            rows.append({"gamma": g, "lambda": lam, "sup_symbol": vals[m_star], "argmax_m": m_star,
                         "symbol_m0": W(0).real})
        return rows
    return [r for rows in _map(one, cfg.gamma) for r in rows]


def cmd_audit(cfg: RunConfig):
    names = sorted(verify.AUDITS) if cfg.which == "all" else [cfg.which]
    for n in names:
        if n not in verify.AUDITS:
            raise UsageError(f"unknown audit {n!r}; choose from {sorted(verify.AUDITS)} or 'all'")
    params = {"seed": cfg.seed, "c0": cfg.c0}
    if len(cfg.gamma) == 1 and cfg.gamma[0] != 0.0:
        params.update(gamma_1d=cfg.gamma[0] if -1 < cfg.gamma[0] < 0 else -0.5)
    reports = _map(lambda n: verify.AUDITS[n](params), names)
    rows = [{"name": r.name, "passed": r.passed, "worst_margin": r.worst_margin, "samples": r.samples,
             "parameters": r.parameters} for r in reports]
    return rows, all(r.passed for r in reports)


COMMANDS = {"eig": cmd_eig, "dn": cmd_dn, "krein": cmd_krein, "weyl": cmd_weyl}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="keldysh-disk", description="Spectral numerics for L_gamma on the unit disk.")
    p.add_argument("command", choices=["eig", "dn", "krein", "weyl", "audit"])
    p.add_argument("which", nargs="?", default=None, help="audit name or 'all' (audit only)")
    p.add_argument("--gamma", default=None, help="g or g1:g2:step")
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--lambda", dest="lam", default=None, help="re[,im]")
    p.add_argument("--c0", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--format", choices=["json", "csv"], default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--B", default=None, help="constant, JSON list/dict, or rational:p/q")
    p.add_argument("--config", default=None, help="JSON file with the same keys")
    return p


def make_config(args) -> RunConfig:
    conf = {}
    if args.config:
        try:
            with open(args.config) as fh:
                conf = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config: {e}") from e
        if not isinstance(conf, dict):
            raise UsageError("config must be a JSON object")

    def pick(name, cli_val, default, aliases=()):
        if cli_val is not None:
            return cli_val
        for k in (name,) + tuple(aliases):
            if k in conf:
                return conf[k]
        return default

    cfg = RunConfig(
        command=args.command,
        gamma=parse_gamma(pick("gamma", args.gamma, 0.0)),
        N=int(pick("N", args.N, 64 if args.command != "eig" else 4)),
        M=int(pick("M", args.M, 16)),
        lam=parse_lambda(pick("lambda", args.lam, 0.0, ("lam",))),
        c0=float(pick("c0", args.c0, DEFAULT_C0)),
        seed=int(pick("seed", args.seed, 0)),
        output=pick("out", args.out, None, ("output",)),
        format=str(pick("format", args.format, "json")),
        B=str(pick("B", args.B, "1")),
        which=str(pick("which", args.which, "all")),
    )
    if args.command != "audit" and args.which is not None:
        raise UsageError(f"unexpected argument {args.which!r}")
    return cfg.validate()


_VALUE_OPTIONS = ("--gamma", "--lambda", "--B", "--c0")


def _attach_negative_values(argv: Sequence[str]) -> List[str]:
    """Rewrite ``--gamma -0.5:0.5:0.1`` as ``--gamma=-0.5:0.5:0.1`` so argparse accepts it."""
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if a in _VALUE_OPTIONS and nxt and nxt.startswith("-") and nxt[1:2] in tuple("0123456789."):
            out.append(f"{a}={nxt}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def run(argv: Optional[Sequence[str]] = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(_attach_negative_values(argv))
    except SystemExit as e:             # usage errors (64) and --help (0)
        return int(e.code or 0)
    ok = True
    try:
        cfg = make_config(args)
        if cfg.command == "audit":
            rows, ok = cmd_audit(cfg)
        else:
            rows = COMMANDS[cfg.command](cfg)
    except UsageError as e:
        sys.stderr.write(f"keldysh-disk: usage error: {e}\n")
        return EXIT_USAGE
    except RegimeError as e:
        sys.stderr.write(f"keldysh-disk: regime error: {e}\n")
        return EXIT_REGIME
    except SpectralCollisionError as e:
        sys.stderr.write(f"keldysh-disk: spectral collision: {e}\n")
        return EXIT_SPECTRAL
    except KreinCollisionError as e:
        sys.stderr.write(f"keldysh-disk: Krein denominator collision (candidate eigenvalue): {e}\n")
        return EXIT_KREIN
    text = render(cfg, rows)
    if cfg.output:
        with open(cfg.output, "w", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return EXIT_OK if ok else EXIT_FAIL


def main(argv: Optional[Sequence[str]] = None) -> None:
    raise SystemExit(run(argv))


if __name__ == "__main__":  # pragma: no cover
    main()
