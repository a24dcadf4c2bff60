"""Command-line harness: config parsing, command dispatch and CSV reports.

Usage::

    renewtail COMMAND --config run.cfg [--out report.csv] [--seed N] [--workers N]

Commands are ``tilt``, ``oracle``, ``simulate``, ``predict``, ``compare``,
``srtc`` and ``calibrate``.  Output is CSV (header row, 17 significant
digits) written to ``--out``, ``output.path`` or stdout.  Nothing is written
when a command fails.

Exit codes: 0 success, 2 configuration error, 3 numerical certification
failure, 4 regime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np

from . import asym, mc, oracle
from .dist import (
    LatticePmf,
    PolyGeomLattice,
    RegVarExpLeft,
    StepDistribution,
    TwoSidedExponential,
    calibrate_boundary,
    polygeom_template,
    regvar_template,
)
from .errors import CertificationError, ConfigError, RegimeError
from .extreal import ExtendedReal
from .tilt import TiltParams, solve_tilt, tilt_step_law

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CERT = 3
EXIT_REGIME = 4

COMMANDS = ("tilt", "oracle", "simulate", "predict", "compare", "srtc", "calibrate")

# beyond this kappa * x the P-side table underflows; compare switches to the Q side
DEEP_X_EXPONENT = 500.0
# lattice margins (in units of 1/kappa) that push truncation remainders below ~1e-13
_MARGIN_NATS = 36.0

FAMILY_PARAMS = {
    "lattice_pmf": ("d",),
    "polygeom": ("C", "beta", "a", "d"),
    "two_sided_exp": ("p", "lam", "mu"),
    "regvar": ("alpha", "c", "kappa0", "t0", "b"),
}
# parameters a calibration template leaves free
FREE_PARAM = {"polygeom": "C", "regvar": "c"}


def _fmt(v) -> str:
    if isinstance(v, ExtendedReal):
        v = float(v)
    if v is None:
        return "none"
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


# -- configuration ----------------------------------------------------------

@dataclass(frozen=True)
class DistConfig:
    family: str
    params: tuple = ()          # sorted (name, value) pairs
    atoms: tuple = ()           # sorted (k, p) pairs
    residual_k: Optional[int] = None

    def param(self, name, default=None):
        return dict(self.params).get(name, default)

    def build(self) -> StepDistribution:
        missing = [n for n in FAMILY_PARAMS[self.family] if n != "d" and n not in dict(self.params)]
        if missing:
            raise ConfigError(f"family {self.family!r} is missing dist.{', dist.'.join(missing)}")
        try:
            return self._build()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"invalid {self.family} parameters: {exc}") from None

    def _build(self) -> StepDistribution:
        p = dict(self.params)
        f = self.family
        if f == "lattice_pmf":
            return LatticePmf(self.atoms, d=p.get("d", 1.0))
        if f == "polygeom":
            kw = dict(C=p["C"], beta=p["beta"], a=p["a"], d=p.get("d", 1.0))
            if self.residual_k is not None:
                return PolyGeomLattice.with_residual(residual_k=self.residual_k, atoms=self.atoms, **kw)
            return PolyGeomLattice(atoms=self.atoms, **kw)
        if f == "two_sided_exp":
            return TwoSidedExponential(p=p["p"], lam=p["lam"], mu=p["mu"])
        if f == "regvar":
            return RegVarExpLeft(**p)
        raise ConfigError(f"unknown dist.family {f!r}")


@dataclass(frozen=True)
class RunConfig:
    dist: DistConfig
    x_grid: tuple = ()
    window_T: float = 1.0
    tilt_tol: float = 1e-12
    oracle_tol: float = 1e-13
    oracle_side: str = "P"
    mc_method: str = "tilted"
    mc_seed: Optional[int] = None
    mc_paths: int = 100_000
    mc_horizon: int = 1000
    mc_eps_trunc: float = 1e-4
    mc_workers: int = 1
    srtc_delta: tuple = ()
    srtc_x: tuple = ()
    calibrate_theta: Optional[float] = None
    calibrate_target: float = 1.0
    calibrate_tol: float = 1e-13
    output_path: Optional[str] = None

    def to_text(self) -> str:
        """Serialise to the ``key=value`` format accepted by :func:`parse_config`."""
        lines = [f"dist.family={self.dist.family}"]
        lines += [f"dist.{k}={_fmt(v)}" for k, v in self.dist.params]
        if self.dist.residual_k is not None:
            lines.append(f"dist.residual_k={self.dist.residual_k}")
        lines += [f"dist.atom.{k}={_fmt(p)}" for k, p in self.dist.atoms]
        for key, attr in _SCALAR_KEYS.items():
            v = getattr(self, attr)
            if v is None:
                continue
            lines.append(f"{key}={v if isinstance(v, str) else _fmt(v)}")
        for key, attr in _LIST_KEYS.items():
            v = getattr(self, attr)
            if v:
                lines.append(f"{key}={','.join(_fmt(t) for t in v)}")
        return "\n".join(lines) + "\n"


_SCALAR_KEYS = {
    "grid.T": "window_T",
    "tilt.tol": "tilt_tol",
    "oracle.tol": "oracle_tol",
    "oracle.side": "oracle_side",
    "mc.method": "mc_method",
    "mc.seed": "mc_seed",
    "mc.paths": "mc_paths",
    "mc.horizon": "mc_horizon",
    "mc.eps_trunc": "mc_eps_trunc",
    "mc.workers": "mc_workers",
    "calibrate.theta": "calibrate_theta",
    "calibrate.target": "calibrate_target",
    "calibrate.tol": "calibrate_tol",
    "output.path": "output_path",
}
_LIST_KEYS = {"grid.x": "x_grid", "srtc.delta": "srtc_delta", "srtc.x": "srtc_x"}
_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _float(key: str, text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None
    if math.isnan(v):
        raise ConfigError(f"{key}: NaN is not allowed")
    return v


def _int(key: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _float_list(key: str, text: str) -> tuple:
    """Comma list, or ``start:stop:step`` with ``stop`` included."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"{key}: range must be start:stop:step")
        a, b, s = (_float(key, t) for t in parts)
        if s <= 0:
            raise ConfigError(f"{key}: range step must be positive")
        n = int(math.floor((b - a) / s + 1e-9)) + 1
        return tuple(a + i * s for i in range(max(n, 0)))
    return tuple(_float(key, t) for t in text.split(",") if t.strip())


def parse_config(text: str) -> RunConfig:
    """Parse flat ``key=value`` text (``#`` starts a comment)."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (t.strip() for t in line.split("=", 1))
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value

    family = raw.pop("dist.family", None)
    if family is None:
        raise ConfigError("dist.family is required")
    if family not in FAMILY_PARAMS:
        raise ConfigError(f"dist.family must be one of {sorted(FAMILY_PARAMS)}, got {family!r}")
    params, atoms, residual_k = {}, {}, None
    for key in [k for k in raw if k.startswith("dist.")]:
        value = raw.pop(key)
        name = key[len("dist."):]
        if name.startswith("atom."):
            k = _int(key, name[len("atom."):])
            p = _float(key, value)
            if p < 0:
                raise ConfigError(f"{key}: probability must be non-negative, got {p!r}")
            atoms[k] = p
        elif name == "residual_k":
            residual_k = _int(key, value)
        elif name in FAMILY_PARAMS[family]:
            params[name] = _float(key, value)
        else:
            raise ConfigError(f"{key}: not a parameter of family {family!r}")
    if atoms and family in ("two_sided_exp", "regvar"):
        raise ConfigError(f"family {family!r} takes no dist.atom.* keys")
    if residual_k is not None and family != "polygeom":
        raise ConfigError("dist.residual_k applies to the polygeom family only")
    dist = DistConfig(family, tuple(sorted(params.items())), tuple(sorted(atoms.items())), residual_k)

    kw = {}
    for key, attr in _SCALAR_KEYS.items():
        if key in raw:
            value = raw.pop(key)
            typ = _FIELD_TYPES[attr]
            if "str" in typ:
                kw[attr] = value
            elif "int" in typ:
                kw[attr] = _int(key, value)
            else:
                kw[attr] = _float(key, value)
    for key, attr in _LIST_KEYS.items():
        if key in raw:
            kw[attr] = _float_list(key, raw.pop(key))
    if raw:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(raw))}")
    cfg = RunConfig(dist=dist, **kw)
    _check(cfg)
    return cfg


def _check(cfg: RunConfig) -> None:
    for name, xs in (("grid.x", cfg.x_grid), ("srtc.x", cfg.srtc_x)):
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ConfigError(f"{name} must be strictly increasing")
    if any(x < 0 for x in cfg.x_grid):
        raise ConfigError("grid.x values must be non-negative")
    if cfg.oracle_side not in ("P", "Q"):
        raise ConfigError("oracle.side must be P or Q")
    if cfg.mc_method not in ("tilted", "naive"):
        raise ConfigError("mc.method must be tilted or naive")
    if cfg.mc_seed is not None and not 0 <= cfg.mc_seed < 2 ** 64:
        raise ConfigError("mc.seed must be a non-negative 64-bit integer")
    if cfg.mc_paths < 2 or cfg.mc_horizon < 1 or cfg.mc_workers < 1:
        raise ConfigError("mc.paths >= 2, mc.horizon >= 1 and mc.workers >= 1 are required")
    if not 0 < cfg.mc_eps_trunc < 1:
        raise ConfigError("mc.eps_trunc must lie in (0, 1)")
    if not cfg.window_T > 0:
        raise ConfigError("grid.T must be positive")
    for t in ("tilt_tol", "oracle_tol", "calibrate_tol"):
        if not getattr(cfg, t) > 0:
            raise ConfigError(f"{t.replace('_', '.', 1)} must be positive")
    if any(not 0 < d < 1 for d in cfg.srtc_delta):
        raise ConfigError("srtc.delta values must lie in (0, 1)")


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None


# -- reports ----------------------------------------------------------------

REPORT_HEADER = ["x", "oracle_value", "oracle_bound", "predicted", "ratio", "method",
                 "regime", "kappa", "rho", "g_prime_kappa", "span"]


@dataclass(frozen=True)
class ReportRow:
    x: float
    oracle_value: float
    oracle_bound: float
    predicted: float
    method: str

    @property
    def ratio(self) -> Optional[float]:
        return self.oracle_value / self.predicted if self.predicted > 0 else None


@dataclass(frozen=True)
class AsymptoteReport:
    """Oracle against prediction on an ``x`` grid.

    Values are multiplied by ``exp(kappa x)`` so deep-tail rows stay finite.
    """

    regime: asym.Regime
    tilt: TiltParams
    rows: tuple = field(default_factory=tuple)

    def csv_rows(self) -> list[list[str]]:
        tp = self.tilt
        tail = [str(self.regime), _fmt(tp.kappa), _fmt(tp.rho), _fmt(tp.g_prime_kappa), _fmt(tp.span)]
        out = []
        for r in self.rows:
            ratio = "" if r.ratio is None else _fmt(r.ratio)
            out.append([_fmt(r.x), _fmt(r.oracle_value), _fmt(r.oracle_bound), _fmt(r.predicted),
                        ratio, r.method] + tail)
        return out


# -- commands ---------------------------------------------------------------

def _tilt(cfg: RunConfig, dist: StepDistribution) -> TiltParams:
    tp = solve_tilt(dist, cfg.tilt_tol)
    if tp.ambiguous:
        regimes = ", ".join(str(r) for r in asym.applicable_regimes(tp))
        print(f"warning: g(theta_fin) is within 10*tol of 1; candidate regimes {regimes}; "
              f"reporting the rho = 1 branch", file=sys.stderr)
    return tp


def _x_grid(cfg: RunConfig) -> tuple:
    if not cfg.x_grid:
        raise ConfigError("grid.x is required for this command")
    return cfg.x_grid


def _need_lattice(dist: StepDistribution) -> None:
    if not dist.lattice:
        raise RegimeError(f"exact tables need a lattice law; {dist.family} is continuous")


def cmd_tilt(cfg, dist):
    tp = _tilt(cfg, dist)
    regimes = ";".join(str(r) for r in asym.applicable_regimes(tp))
    header = ["family", "kappa", "rho", "g_prime_kappa", "theta_fin", "span", "boundary", "ambiguous", "regime"]
    row = [dist.family, _fmt(tp.kappa), _fmt(tp.rho), _fmt(tp.g_prime_kappa), _fmt(tp.theta_fin),
           _fmt(tp.span), _fmt(tp.boundary), _fmt(tp.ambiguous), regimes]
    return header, [row]


def _p_table(dist, tp, x_max, tol):
    d = dist.d
    k_lo = -int(math.ceil(x_max / d)) - int(math.ceil(_MARGIN_NATS / (tp.kappa * d))) - 1
    return oracle.renewal_table(dist, 1.0, k_lo, 0, tol=tol)


def _q_table(q, tp, x_max, tol):
    d = q.d
    k_hi = int(math.ceil(x_max / d)) + int(math.ceil(_MARGIN_NATS / (tp.kappa * d))) + 1
    return oracle.renewal_table(q, tp.rho, 0, k_hi, tol=tol)


def cmd_oracle(cfg, dist):
    _need_lattice(dist)
    xs = _x_grid(cfg)
    tp = _tilt(cfg, dist)
    if cfg.oracle_side == "P":
        tab = _p_table(dist, tp, max(xs), cfg.oracle_tol)
    else:
        tab = _q_table(tilt_step_law(dist, tp), tp, max(xs), cfg.oracle_tol)
    buf = io.StringIO()
    tab.to_csv(buf)
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    return rows[0], rows[1:]


def _require_seed(cfg):
    if cfg.mc_seed is None:
        raise ConfigError("mc.seed (or --seed) is required for Monte Carlo commands")


def cmd_simulate(cfg, dist):
    _require_seed(cfg)
    xs = _x_grid(cfg)
    if cfg.mc_method == "naive":
        est = mc.estimate_naive_grid(dist, xs, cfg.mc_paths, cfg.mc_horizon, cfg.mc_seed, cfg.mc_workers)
    else:
        tp = _tilt(cfg, dist)
        est = mc.estimate_tilted_grid(dist, tp, xs, cfg.mc_paths, cfg.mc_seed, cfg.mc_eps_trunc,
                                      cfg.mc_workers)
    return mc.CSV_HEADER, [e.csv_row() for e in est]


def cmd_predict(cfg, dist):
    xs = _x_grid(cfg)
    tp = _tilt(cfg, dist)
    q = tilt_step_law(dist, tp)
    header = ["x", "regime", "predicted", "predicted_scaled", "window_limit"]
    rows = []
    for regime in asym.applicable_regimes(tp):
        # limit of e^{kappa x} H((-x - T, -x)), defined for the non-arithmetic branch
        window = _fmt(asym.predict_window(tp, cfg.window_T)) if regime is asym.Regime.A_I else ""
        for x in xs:
            try:
                v = asym.predict(dist, tp, x, scaled=True, regime=regime, q_dist=q)
            except RegimeError as exc:
                if not tp.ambiguous:
                    raise
                print(f"warning: {regime} branch skipped: {exc}", file=sys.stderr)
                break
            rows.append([_fmt(x), str(regime), _fmt(v * math.exp(-tp.kappa * x)), _fmt(v), window])
    return header, rows


def build_report(cfg: RunConfig, dist: StepDistribution) -> AsymptoteReport:
    xs = _x_grid(cfg)
    tp = _tilt(cfg, dist)
    regime = asym.classify(tp, allow_ambiguous=True)
    q = tilt_step_law(dist, tp)
    x_max = max(xs)

    oracle_rows = {}
    if dist.lattice:
        deep = [x for x in xs if tp.kappa * x > DEEP_X_EXPONENT]
        shallow = [x for x in xs if tp.kappa * x <= DEEP_X_EXPONENT]
        if shallow:
            tab_p = _p_table(dist, tp, max(shallow), cfg.oracle_tol)
            for x in shallow:
                tv = oracle.left_tail_direct(tab_p, x)
                f = math.exp(tp.kappa * x)
                oracle_rows[x] = (tv.value * f, tv.bound * f, "DP_P")
        if deep:
            tab_q = _q_table(q, tp, x_max, cfg.oracle_tol)
            for x in deep:
                tv = oracle.left_tail_from_q(tab_q, tp, x, scaled=True)
                oracle_rows[x] = (tv.value, tv.bound, "DP_Q")
    else:
        _require_seed(cfg)
        est = mc.estimate_tilted_grid(dist, tp, xs, cfg.mc_paths, cfg.mc_seed, cfg.mc_eps_trunc,
                                      cfg.mc_workers)
        for e in est:
            f = math.exp(tp.kappa * e.x)
            oracle_rows[e.x] = (e.value * f, e.std_error * f, "MC_TILTED")

    rows = []
    for x in xs:
        val, bound, method = oracle_rows[x]
        pred = asym.predict(dist, tp, x, scaled=True, regime=regime, q_dist=q)
        rows.append(ReportRow(x, val, bound, pred, method))
    return AsymptoteReport(regime, tp, tuple(rows))


def cmd_compare(cfg, dist):
    return REPORT_HEADER, build_report(cfg, dist).csv_rows()


def cmd_srtc(cfg, dist):
    if not cfg.srtc_delta or not cfg.srtc_x:
        raise ConfigError("srtc.delta and srtc.x are required")
    tp = _tilt(cfg, dist)
    q = tilt_step_law(dist, tp)
    rows = [[_fmt(dl), _fmt(x), _fmt(asym.srtc_integral(q, dl, x))]
            for dl in cfg.srtc_delta for x in cfg.srtc_x]
    return ["delta", "x", "integral"], rows


def calibrated_config(cfg: RunConfig) -> RunConfig:
    """Config whose distribution has ``g(calibrate.theta) = calibrate.target``."""
    fam = cfg.dist.family
    if fam not in FREE_PARAM:
        raise ConfigError(f"calibrate supports families {sorted(FREE_PARAM)}, not {fam!r}")
    p = dict(cfg.dist.params)
    if fam == "polygeom":
        if cfg.dist.atoms:
            raise ConfigError("calibrate builds the polygeom right side from dist.residual_k alone")
        tmpl = polygeom_template(p["beta"], p["a"], p.get("d", 1.0), cfg.dist.residual_k or 1)
    else:
        tmpl = regvar_template(p["alpha"], p["kappa0"], p["t0"], p["b"])
    theta = cfg.calibrate_theta
    if theta is None:
        if fam == "polygeom":
            theta = math.log(p["a"]) / p.get("d", 1.0)
        else:
            theta = p["kappa0"]
    dist = calibrate_boundary(tmpl, theta, cfg.calibrate_target, cfg.calibrate_tol)
    p[FREE_PARAM[fam]] = float(getattr(dist, FREE_PARAM[fam]))
    residual = cfg.dist.residual_k if fam != "polygeom" else (cfg.dist.residual_k or 1)
    return replace(cfg, dist=replace(cfg.dist, params=tuple(sorted(p.items())), residual_k=residual))


def cmd_calibrate(cfg, dist_unused):
    new = calibrated_config(cfg)
    dist = new.dist.build()
    theta = cfg.calibrate_theta
    rows = [[k, v] for k, v in (line.split("=", 1) for line in new.to_text().splitlines()
                                if line.startswith("dist."))]
    g = float(dist.laplace(theta if theta is not None else dist.theta_fin))
    rows.append(["g_at_theta", _fmt(g)])
    return ["key", "value"], rows


_DISPATCH = {
    "tilt": cmd_tilt,
    "oracle": cmd_oracle,
    "simulate": cmd_simulate,
    "predict": cmd_predict,
    "compare": cmd_compare,
    "srtc": cmd_srtc,
    "calibrate": cmd_calibrate,
}


# -- entry points -----------------------------------------------------------

def render_csv(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _write_atomic(path: str, text: str) -> None:
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".renewtail-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="renewtail",
        description="Left-tail asymptotics of renewal measures: tilt, exact oracles, Monte Carlo, predictions.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="flat key=value config file")
    ap.add_argument("--out", help="CSV output path (default: output.path, else stdout)")
    ap.add_argument("--seed", type=int, help="Monte Carlo seed; overrides mc.seed")
    ap.add_argument("--workers", type=int, help="Monte Carlo worker threads; overrides mc.workers")
    return ap


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and return its exit code."""
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        over = {}
        if args.seed is not None:
            over["mc_seed"] = args.seed
        if args.workers is not None:
            over["mc_workers"] = args.workers
        if over:
            cfg = replace(cfg, **over)
            _check(cfg)
        dist = None if args.command == "calibrate" else cfg.dist.build()
        header, rows = _DISPATCH[args.command](cfg, dist)
        text = render_csv(header, rows)
        out = args.out or cfg.output_path
        if out:
            _write_atomic(out, text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RegimeError as exc:
        print(f"regime error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except (CertificationError, ArithmeticError, IndexError) as exc:
        print(f"certification error: {exc}", file=sys.stderr)
        return EXIT_CERT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
