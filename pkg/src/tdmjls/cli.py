"""Command-line front end.

Subcommands: ``analyze``, ``simulate``, ``sweep`` and ``critical-alpha``.
Exit codes: 0 success, 1 invalid configuration, 2 analysis precondition
failed (e.g. instability), 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys as _sys
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis, mc
from .chain import MarkovChain, stationary_distribution
from .errors import (AnalysisError, ConfigError, ModelWarning, NumericalError,
                     ValidationError)
from .mjls import (JumpLinearSystem, initial_moments, mean_square_norm,
                   moment_recursion)
from .tdmodel import PolicyEvalProblem, build_td0

log = logging.getLogger("tdmjls")

TRAJECTORY_COLUMNS = ("k", "mse_exact", "mse_lower", "mse_upper")
MC_COLUMNS = ("mse_mc", "mse_mc_se")
SWEEP_COLUMNS = ("alpha", "sigma_H11", "sigma_H22", "sigma_pred_H22", "delta_inf")

_RAW_KEYS = {"kind", "n", "d", "A", "b", "P", "p0", "xi0"}
_MDP_KEYS = {"kind", "n_s", "P_s", "r", "gamma", "Phi", "s0", "theta0", "prune"}
_COMMON_KEYS = {"alpha", "mode", "horizon", "mc", "output"}


def fmt(x) -> str:
    """17 significant digits: lossless for doubles."""
    return format(float(x), ".17g")


def _tup(a):
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        return float(a)
    return tuple(_tup(x) for x in a)


@dataclass(frozen=True)
class ProblemConfig:
    """Validated problem description. Matrices are stored as nested tuples."""

    kind: str
    alpha: tuple
    mode: str = "markov"
    horizon: int = 100
    # raw
    A: Optional[tuple] = None
    b: Optional[tuple] = None
    P: Optional[tuple] = None
    p0: Optional[tuple] = None
    xi0: Optional[tuple] = None
    # mdp
    P_s: Optional[tuple] = None
    r: Optional[tuple] = None
    gamma: Optional[float] = None
    Phi: Optional[tuple] = None
    s0: Optional[tuple] = None
    theta0: Optional[tuple] = None
    prune: bool = True
    # mc / output
    mc_trajectories: int = 10000
    mc_seed: int = 0
    mc_workers: int = 1
    out_dir: Optional[str] = None

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "raw":
            out.update(n=len(self.A), d=len(self.A[0]), A=self.A, b=self.b,
                       P=self.P, p0=self.p0)
            if self.xi0 is not None:
                out["xi0"] = self.xi0
        else:
            out.update(n_s=len(self.P_s), P_s=self.P_s, r=self.r, gamma=self.gamma,
                       Phi=self.Phi, prune=self.prune)
            if self.s0 is not None:
                out["s0"] = self.s0
            if self.theta0 is not None:
                out["theta0"] = self.theta0
        out.update(alpha=list(self.alpha) if len(self.alpha) > 1 else self.alpha[0],
                   mode=self.mode, horizon=self.horizon,
                   mc={"trajectories": self.mc_trajectories, "seed": self.mc_seed,
                       "workers": self.mc_workers})
        if self.out_dir is not None:
            out["output"] = {"dir": self.out_dir}
        return json.loads(json.dumps(out))

    def build(self, alpha: Optional[float] = None):
        """Return ``(system, xi0, theta_star)``; ``theta_star`` is None for raw configs."""
        a = self.alpha[0] if alpha is None else alpha
        if self.kind == "raw":
            chain = MarkovChain(np.array(self.P), np.array(self.p0))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ModelWarning)
                sys = JumpLinearSystem(chain, np.array(self.A), np.array(self.b), a)
            xi0 = np.zeros(sys.d) if self.xi0 is None else np.array(self.xi0)
            return sys, xi0, None
        problem = PolicyEvalProblem(np.array(self.P_s), np.array(self.r), self.gamma,
                                    np.array(self.Phi))
        model = build_td0(problem, a, prune=self.prune,
                          state_p0=None if self.s0 is None else np.array(self.s0))
        theta0 = np.zeros(problem.d) if self.theta0 is None else np.array(self.theta0)
        return model.sys, theta0 - model.theta_star, model.theta_star


# ----------------------------------------------------------------- loading

def _matrix(errors, raw, name, shape=None):
    """Parse a nested numeric array, appending a message to ``errors`` on failure."""
    if raw is None:
        errors.append(f"{name}: missing")
        return None
    try:
        a = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        errors.append(f"{name}: not a rectangular numeric array")
        return None
    if not np.all(np.isfinite(a)):
        errors.append(f"{name}: contains non-finite values")
        return None
    if shape is not None and a.shape != shape:
        errors.append(f"{name}: expected shape {shape}, got {a.shape}")
        return None
    return a


def _check_stochastic_rows(errors, P, name):
    if np.any(P < 0) or np.any(P > 1):
        errors.append(f"{name}: entries must lie in [0, 1]")
    for i, s in enumerate(P.sum(axis=1)):
        if abs(s - 1.0) > 1e-12:
            errors.append(f"{name}: row {i} sums to {fmt(s)}, not 1")


def _check_prob(errors, p, name):
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        errors.append(f"{name}: must be a probability vector (nonnegative, sums to 1)")


def _int(errors, raw, name, minimum=0):
    if isinstance(raw, bool) or not isinstance(raw, int) or raw < minimum:
        errors.append(f"{name}: expected an integer >= {minimum}, got {raw!r}")
        return None
    return raw


def parse_config(data: dict) -> ProblemConfig:
    """Validate a decoded config mapping, reporting every problem at once."""
    errors = []
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object")
    kind = data.get("kind")
    if kind not in ("raw", "mdp"):
        raise ConfigError(f"kind: expected 'raw' or 'mdp', got {kind!r}")
    allowed = (_RAW_KEYS if kind == "raw" else _MDP_KEYS) | _COMMON_KEYS
    for key in sorted(set(data) - allowed):
        errors.append(f"{key}: unknown field for kind {kind!r}")

    alpha_raw = data.get("alpha")
    alphas = alpha_raw if isinstance(alpha_raw, list) else [alpha_raw]
    if not alphas or not all(isinstance(a, (int, float)) and not isinstance(a, bool)
                             and math.isfinite(a) and a >= 0 for a in alphas):
        errors.append(f"alpha: expected a nonnegative number or list of numbers, got {alpha_raw!r}")
        alphas = [0.0]
    mode = data.get("mode", "markov")
    if mode not in analysis.MODES:
        errors.append(f"mode: expected one of {analysis.MODES}, got {mode!r}")
    horizon = _int(errors, data.get("horizon", 100), "horizon")
    mc_raw = data.get("mc", {}) or {}
    if not isinstance(mc_raw, dict):
        errors.append("mc: expected an object")
        mc_raw = {}
    for key in sorted(set(mc_raw) - {"trajectories", "seed", "workers"}):
        errors.append(f"mc.{key}: unknown field")
    T = _int(errors, mc_raw.get("trajectories", 10000), "mc.trajectories", 1)
    seed = _int(errors, mc_raw.get("seed", 0), "mc.seed")
    if seed is not None and seed >= 2**64:
        errors.append("mc.seed: must fit in 64 bits")
    workers = _int(errors, mc_raw.get("workers", 1), "mc.workers", 1)
    out = data.get("output") or {}
    out_dir = out.get("dir") if isinstance(out, dict) else None

    fields = {}
    if kind == "raw":
        n = _int(errors, data.get("n"), "n", 1)
        d = _int(errors, data.get("d"), "d", 1)
        if n is not None and d is not None:
            A = _matrix(errors, data.get("A"), "A", (n, d, d))
            b = _matrix(errors, data.get("b"), "b", (n, d))
            P = _matrix(errors, data.get("P"), "P", (n, n))
            p0 = _matrix(errors, data.get("p0"), "p0", (n,))
            xi0 = None
            if "xi0" in data:
                xi0 = _matrix(errors, data["xi0"], "xi0", (d,))
            if P is not None:
                _check_stochastic_rows(errors, P, "P")
            if p0 is not None:
                _check_prob(errors, p0, "p0")
            fields = dict(A=A, b=b, P=P, p0=p0, xi0=xi0)
    else:
        n_s = _int(errors, data.get("n_s"), "n_s", 1)
        if n_s is not None:
            P_s = _matrix(errors, data.get("P_s"), "P_s", (n_s, n_s))
            r = _matrix(errors, data.get("r"), "r", (n_s,))
            Phi = _matrix(errors, data.get("Phi"), "Phi")
            if Phi is not None and (Phi.ndim != 2 or Phi.shape[0] != n_s):
                errors.append(f"Phi: expected shape ({n_s}, d), got {Phi.shape}")
                Phi = None
            gamma = data.get("gamma")
            if not isinstance(gamma, (int, float)) or isinstance(gamma, bool) or not 0 <= gamma < 1:
                errors.append(f"gamma: expected a number in [0, 1), got {gamma!r}")
                gamma = None
            if P_s is not None:
                _check_stochastic_rows(errors, P_s, "P_s")
            s0 = None
            if "s0" in data:
                s0 = _matrix(errors, data["s0"], "s0", (n_s,))
                if s0 is not None:
                    _check_prob(errors, s0, "s0")
            theta0 = None
            if "theta0" in data and Phi is not None:
                theta0 = _matrix(errors, data["theta0"], "theta0", (Phi.shape[1],))
            prune = data.get("prune", True)
            if not isinstance(prune, bool):
                errors.append("prune: expected true or false")
            fields = dict(P_s=P_s, r=r, Phi=Phi, s0=s0, theta0=theta0,
                          gamma=None if gamma is None else float(gamma), prune=bool(prune))
    if errors:
        raise ConfigError(errors)
    fields = {k: (_tup(v) if isinstance(v, np.ndarray) else v) for k, v in fields.items()}
    return ProblemConfig(kind=kind, alpha=tuple(float(a) for a in alphas), mode=mode,
                         horizon=horizon, mc_trajectories=T, mc_seed=seed,
                         mc_workers=workers, out_dir=out_dir, **fields)


def load_config(path) -> ProblemConfig:
    """Read and validate a JSON config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    cfg = parse_config(data)
    if cfg.kind == "mdp":
        # structural checks that need the full problem (rank, ergodicity)
        try:
            PolicyEvalProblem(np.array(cfg.P_s), np.array(cfg.r), cfg.gamma, np.array(cfg.Phi))
        except ValidationError as exc:
            raise ConfigError(str(exc)) from exc
    return cfg


# --------------------------------------------------------------------- run

@dataclass
class RunReport:
    command: str
    stability: Optional[dict] = None
    steady_state: Optional[dict] = None
    bounds: Optional[dict] = None
    trajectory: Optional[list] = None
    sweep: Optional[list] = None
    mc: Optional[dict] = None
    critical_alpha: Optional[float] = None
    files: tuple = ()


def _rate_dict(r):
    return {"spectral_radius": r.spectral_radius, "epsilon": r.epsilon,
            "dominant_semisimple": r.dominant_semisimple, "reported_rate": r.reported_rate}


def _stability_dict(rep):
    lam = rep.lambda_maxRe_Abar
    return {
        "mode": rep.mode, "stable": rep.stable, "marginal": rep.marginal,
        "sigma_H11": _rate_dict(rep.sigma_H11), "sigma_H22": _rate_dict(rep.sigma_H22),
        "sigma_H": _rate_dict(rep.sigma_H),
        "lambda_maxRe_Abar": None if lam is None else [lam.real, lam.imag],
        "perturbation_sigma_H11": rep.perturbation_sigma_H11,
        "perturbation_sigma_H22": rep.perturbation_sigma_H22,
        "perturbation_supported": rep.perturbation_supported,
        "notes": list(rep.notes),
    }


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([row[0]] + [fmt(x) for x in row[1:]])


def _exact_path(cfg, sys, xi0, k):
    """Exact MSE trajectory and, if stable, the fitted envelope."""
    rep = analysis.stability_report(sys, cfg.mode)
    if cfg.mode == "iid":
        model = analysis.build_iid_model(sys)
        if rep.stable:
            _, Qs, ss, bounds = analysis.iid_trajectory_with_limits(model, xi0, np.outer(xi0, xi0), k)
            return rep, np.trace(Qs, axis1=1, axis2=2), ss, bounds
        _, Qs = analysis.iid_forward(model, xi0, np.outer(xi0, xi0), k)
        return rep, np.trace(Qs, axis1=1, axis2=2), None, None
    if rep.stable:
        traj, ss, bounds = analysis.markov_trajectory_with_limits(sys, k=k, xi0=xi0)
    else:
        traj, ss, bounds = moment_recursion(sys, initial_moments(sys, xi0), k), None, None
    return rep, np.array([mean_square_norm(m) for m in traj]), ss, bounds


def _require_stable(rep):
    if not rep.stable:
        from .errors import InstabilityError
        s = rep.sigma_H22.spectral_radius
        raise InstabilityError(
            f"mean-square unstable: sigma(H22) = {s:.17g} >= 1", sigma=s)


def _single_alpha(cfg, command):
    if len(cfg.alpha) != 1:
        raise ConfigError(f"alpha: {command} needs a single value, got {len(cfg.alpha)}")
    return cfg.alpha[0]


def _steady_dict(ss):
    return None if ss is None else {
        "delta_inf": ss.delta_inf, "mean": ss.mean.tolist(),
        "second_moment": ss.second_moment.tolist()}


def _bounds_dict(b):
    return None if b is None else {
        "delta_inf": b.delta_inf, "rate": b.rate, "C0": b.C0, "floor": b.floor,
        "mixing_rate": b.mixing_rate, "boundary_case": b.boundary_case}


def run(command: str, cfg: ProblemConfig, out_dir: Path, stdout=None) -> RunReport:
    """Execute one subcommand; writes CSV/JSON into ``out_dir`` and a summary to ``stdout``."""
    stdout = stdout or _sys.stdout
    out_dir.mkdir(parents=True, exist_ok=True)
    report = RunReport(command=command)
    files = []

    if command in ("analyze", "simulate"):
        _single_alpha(cfg, command)
        sys, xi0, theta_star = cfg.build()
        k = cfg.horizon
        rep, mse, ss, bounds = _exact_path(cfg, sys, xi0, k)
        if command == "analyze":
            _require_stable(rep)
        report.stability = _stability_dict(rep)
        report.steady_state = _steady_dict(ss)
        report.bounds = _bounds_dict(bounds)
        lower = bounds.lower if bounds is not None else np.full(k + 1, np.nan)
        upper = bounds.upper if bounds is not None else np.full(k + 1, np.nan)
        cols = [list(range(k + 1)), mse, lower, upper]
        header = TRAJECTORY_COLUMNS
        if command == "simulate":
            msys = sys
            if cfg.mode == "iid":
                p = stationary_distribution(sys.chain).p_inf
                msys = sys.with_chain(MarkovChain.iid(p))
            mcfg = mc.MCConfig(cfg.mc_trajectories, k, cfg.mc_seed, None, cfg.mc_workers)
            est = mc.simulate_moments(msys, xi0, mcfg)
            se = est.msn_se if est.msn_se is not None else np.full(k + 1, np.nan)
            cols += [est.msn, se]
            header = TRAJECTORY_COLUMNS + MC_COLUMNS
            within = mc.within_se(mse, est.msn, se) if est.msn_se is not None else None
            report.mc = {"trajectories": est.trajectories, "seed": cfg.mc_seed,
                         "within_3se_fraction": None if within is None else float(within.mean()),
                         "overflow_step": est.overflow_step}
        rows = list(zip(*cols))
        report.trajectory = rows
        path = out_dir / "trajectory.csv"
        _write_csv(path, header, rows)
        files.append(path)
        print(f"sigma(H11) = {fmt(rep.sigma_H11.spectral_radius)}", file=stdout)
        print(f"sigma(H22) = {fmt(rep.sigma_H22.spectral_radius)}"
              f"  ({'stable' if rep.stable else 'unstable'})", file=stdout)
        print(f"sigma(H)   = {fmt(rep.sigma_H.spectral_radius)}", file=stdout)
        if rep.perturbation_sigma_H22 is not None:
            print(f"first-order sigma(H22) ~ {fmt(rep.perturbation_sigma_H22)}", file=stdout)
        if theta_star is not None:
            print(f"theta* = {[fmt(x) for x in theta_star]}", file=stdout)
        if ss is not None:
            print(f"delta_inf = {fmt(ss.delta_inf)}", file=stdout)
            print(f"rate = {fmt(bounds.rate)}  C0 = {fmt(bounds.C0)}", file=stdout)
        if report.mc is not None and report.mc["within_3se_fraction"] is not None:
            print(f"MC within 3 SE: {report.mc['within_3se_fraction']:.4f} of steps", file=stdout)

    elif command == "sweep":
        sys, _, _ = cfg.build(cfg.alpha[0])
        rows = analysis.alpha_sweep(sys, cfg.alpha, cfg.mode)
        table = [(fmt(r.alpha), r.sigma_H11, r.sigma_H22, r.sigma_pred_H22, r.delta_inf)
                 for r in rows]
        report.sweep = [asdict(r) for r in rows]
        path = out_dir / "sweep.csv"
        _write_csv(path, SWEEP_COLUMNS, table)
        files.append(path)
        for r in rows:
            flag = "" if r.stable else "  UNSTABLE"
            print(f"alpha = {fmt(r.alpha)}  sigma(H22) = {fmt(r.sigma_H22)}"
                  f"  delta_inf = {fmt(r.delta_inf)}{flag}", file=stdout)

    elif command == "critical-alpha":
        sys, _, _ = cfg.build()
        a_star = analysis.critical_alpha(sys, cfg.mode)
        report.critical_alpha = a_star
        print(f"critical alpha = {fmt(a_star)}", file=stdout)
    else:
        raise ValidationError(f"unknown command {command!r}")

    summary = {k: v for k, v in asdict(report).items() if k not in ("trajectory", "files")}
    path = out_dir / "report.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True, default=float) + "\n")
    files.append(path)
    report.files = tuple(files)
    return report


# -------------------------------------------------------------------- main

def _parser():
    p = argparse.ArgumentParser(prog="tdmjls", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("analyze", "stability, steady state, exact MSE trajectory and bounds"),
        ("simulate", "exact trajectory plus Monte Carlo comparison"),
        ("sweep", "stability and delta_inf over a list of step sizes"),
        ("critical-alpha", "step size where sigma(H22) crosses 1"),
    ]:
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, help="JSON problem file")
        s.add_argument("--out", help="output directory (default: config output.dir or ./out)")
        s.add_argument("--seed", type=int, help="Monte Carlo base seed (u64)")
        s.add_argument("--horizon", type=int, help="number of steps")
        s.add_argument("--alpha", help="step size or comma-separated list")
        s.add_argument("--mc-trajectories", type=int, help="Monte Carlo trajectory count")
        s.add_argument("--dump-config", action="store_true",
                       help="print the normalized config as JSON and exit")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def _apply_overrides(cfg: ProblemConfig, args) -> ProblemConfig:
    data = cfg.to_dict()
    if args.seed is not None:
        data["mc"]["seed"] = args.seed
    if args.horizon is not None:
        data["horizon"] = args.horizon
    if args.mc_trajectories is not None:
        data["mc"]["trajectories"] = args.mc_trajectories
    if args.alpha is not None:
        try:
            vals = [float(x) for x in args.alpha.split(",") if x.strip()]
        except ValueError as exc:
            raise ConfigError(f"--alpha: {exc}") from exc
        data["alpha"] = vals if len(vals) > 1 else (vals[0] if vals else None)
    if args.out is not None:
        data["output"] = {"dir": args.out}
    return parse_config(data)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if args.dump_config:
            print(json.dumps(cfg.to_dict(), indent=2))
            return 0
        out_dir = Path(cfg.out_dir or "out")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ModelWarning)
            run(args.command, cfg, out_dir)
        return 0
    except ValidationError as exc:
        errs = exc.errors if isinstance(exc, ConfigError) else [str(exc)]
        for e in errs:
            print(f"error: {e}", file=_sys.stderr)
        return 1
    except AnalysisError as exc:
        print(f"analysis error: {exc}", file=_sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=_sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
