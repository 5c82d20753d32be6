"""Command-line experiment runner.

    gapscreen solve   CONFIG [--seed N] [--no-screening]
    gapscreen compare CONFIG [--seed N] [--no-screening]
    gapscreen verify  CONFIG [--seed N] [--no-screening]
    gapscreen config-reference

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical error.
"""
import argparse
import copy
import csv
import json
import sys
import time
from dataclasses import dataclass, fields

import numpy as np

from . import problem as P
from .data_io import SyntheticSpec, from_barycentric, read_libsvm, synth_regression, to_barycentric
from .gaps import GapError, certify
from .geometry import InfeasibleDualError
from .objectives import DualInfeasibleError
from .reference import ReferenceBudgetError, check_safety, solve_reference
from .screening import REPORT_HEADER, ScreenMask, screen_l1_constrained, screen_simplex
from .solvers import SolverConfig, pairwise_frank_wolfe, solve

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# key -> (type, description); "number" keys must be positive unless noted
PROBLEM_KEYS = {
    "kind": (str, "one of: " + ", ".join(P.KINDS)),
    "lam": (float, "penalty weight (lasso, logistic_l1, group_lasso)"),
    "lam_ratio": (float, "penalty as a fraction of the smallest weight giving x = 0"),
    "lam1": (float, "L1 weight of the regression-form elastic net"),
    "lam2": (float, "squared-norm weight of the regression-form elastic net (>= 0)"),
    "alpha": (float, "elastic-net mixing in (0, 1] (ball) or (0, 1) (penalty)"),
    "scale": (float, "elastic-net ball level, default 1"),
    "ball_factor": (str, "'certified' (default) or 'unit_norm' for the elastic-net ball rule"),
    "C": (float, "box bound of the hinge SVM dual"),
    "improved": (bool, "hinge SVM: use radius sqrt(G) instead of sqrt(2G)"),
    "r": (float, "L1-ball radius"),
    "groups": (list, "group lengths, contiguous, covering all features"),
    "rho": (list, "per-group rho_g (default: group sizes)"),
}
SYNTH_KEYS = {
    "d": (int, "rows (samples)"),
    "n": (int, "columns (features)"),
    "support": (int, "nonzeros of the planted solution"),
    "noise_sigma": (float, "Gaussian noise level (>= 0), default 0"),
    "seed": (int, "generator seed (default: solver.seed)"),
}
DATA_KEYS = {
    "path": (str, "libsvm file (samples as rows)"),
    "expected_dim": (int, "feature dimension of the libsvm file"),
    "synthetic": (dict, "synthetic regression settings, see below"),
}
SOLVER_HELP = {
    "algorithm": "auto, pairwise_frank_wolfe, proximal_gradient or coordinate_descent_box",
    "max_iter": "iteration cap, default 20000",
    "gap_tol": "stop once the duality gap is at most this, default 1e-7",
    "screening_enabled": "run the screening rules, default true",
    "screening_period": "iterations between screening passes, default 10",
    "safety_slack": "extra margin every rule must clear (>= 0), default 0",
    "seed": "seed for data generation and solver tie-breaks, default 0",
    "trace_every": "iterations between trace rows, default 25",
    "loosen": "test hook that lowers every rule threshold (unsafe), default 0",
}
SOLVER_KEYS = {f.name: (f.type if isinstance(f.type, type) else type(f.default),
                        SOLVER_HELP[f.name]) for f in fields(SolverConfig)}
OUTPUT_KEYS = {
    "trace": (str, "trace CSV path"),
    "report": (str, "screening report CSV path"),
    "merged": (str, "compare: merged per-checkpoint CSV path"),
    "timing": (str, "compare: timing table CSV path"),
}
BLOCKS = {"problem": PROBLEM_KEYS, "data": DATA_KEYS, "solver": SOLVER_KEYS,
          "output": OUTPUT_KEYS}
REQUIRED = {
    "simplex_ls": (), "sq_hinge_svm": (), "meb": (),
    "l1_ls": ("r",), "elastic_ball_ls": ("alpha",), "box_svm_hinge": ("C",),
    "lasso": (("lam", "lam_ratio"),), "logistic_l1": (("lam", "lam_ratio"),),
    "group_lasso": ("groups", ("lam", "lam_ratio")),
    "elastic_net": (("lam1", "lam_ratio", "alpha"),),
}


def _check_type(block, key, value, kind):
    where = f"{block}.{key}"
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false")
    elif kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
    elif kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
    elif not isinstance(value, kind):
        raise ConfigError(f"{where} must be of type {kind.__name__}")


@dataclass
class RunConfig:
    """Parsed configuration. Blocks keep exactly the keys that were given."""

    problem: dict
    data: dict
    solver: dict
    output: dict

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        for key in raw:
            if key not in BLOCKS:
                raise ConfigError(f"unknown top-level key {key!r}")
        blocks = {}
        for name, spec in BLOCKS.items():
            block = raw.get(name, {})
            if not isinstance(block, dict):
                raise ConfigError(f"{name} must be an object")
            for key, value in block.items():
                if key not in spec:
                    raise ConfigError(f"unknown key {name}.{key}")
                _check_type(name, key, value, spec[key][0])
            blocks[name] = copy.deepcopy(block)
        cfg = cls(**blocks)
        cfg._validate()
        return cfg

    @classmethod
    def parse(cls, text):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                return cls.parse(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None

    def to_dict(self):
        return {name: copy.deepcopy(getattr(self, name)) for name in BLOCKS}

    def serialize(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def _validate(self):
        pb = self.problem
        if "kind" not in pb:
            raise ConfigError("missing problem.kind")
        if pb["kind"] not in P.KINDS:
            raise ConfigError(f"unknown problem.kind {pb['kind']!r}")
        for req in REQUIRED[pb["kind"]]:
            options = req if isinstance(req, tuple) else (req,)
            if not any(o in pb for o in options):
                raise ConfigError(f"problem.{options[0]} is required for kind {pb['kind']}")
        for key in ("lam", "lam_ratio", "lam1", "alpha", "scale", "C", "r"):
            if key in pb and not pb[key] > 0:
                raise ConfigError(f"problem.{key} must be positive")
        if "lam2" in pb and pb["lam2"] < 0:
            raise ConfigError("problem.lam2 must be non-negative")
        if pb.get("ball_factor", "certified") not in ("certified", "unit_norm"):
            raise ConfigError("problem.ball_factor must be 'certified' or 'unit_norm'")
        for key in ("groups", "rho"):
            if key in pb and (not pb[key] or not all(
                    isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0
                    for v in pb[key])):
                raise ConfigError(f"problem.{key} must be a non-empty list of positive numbers")
        if "groups" in pb and not all(isinstance(v, int) for v in pb["groups"]):
            raise ConfigError("problem.groups must hold integer lengths")
        db = self.data
        if ("path" in db) == ("synthetic" in db):
            raise ConfigError("data needs exactly one of data.path / data.synthetic")
        if "synthetic" in db:
            for key, value in db["synthetic"].items():
                if key not in SYNTH_KEYS:
                    raise ConfigError(f"unknown key data.synthetic.{key}")
                _check_type("data.synthetic", key, value, SYNTH_KEYS[key][0])
            for key in ("d", "n"):
                if key not in db["synthetic"]:
                    raise ConfigError(f"data.synthetic.{key} is required")
        try:
            self.solver_config()
            if "synthetic" in db:
                self.synthetic_spec()
        except ValueError as exc:
            raise ConfigError(f"invalid setting: {exc}") from None

    def solver_config(self, **overrides):
        kw = dict(self.solver)
        kw.update(overrides)
        return SolverConfig(**kw)

    def synthetic_spec(self):
        s = dict(self.data["synthetic"])
        s.setdefault("seed", self.solver.get("seed", 0))
        s.setdefault("support", min(s["n"], max(1, s["n"] // 10)))
        return SyntheticSpec(**s)

    def with_seed(self, seed):
        other = RunConfig(**self.to_dict())
        other.solver["seed"] = int(seed)
        if "synthetic" in other.data:
            other.data["synthetic"]["seed"] = int(seed)
        return other


def config_reference():
    """Markdown page documenting every configuration key."""
    lines = ["# Configuration keys", "",
             "A run is described by one JSON object with the blocks below.", ""]
    for name, spec in list(BLOCKS.items()) + [("data.synthetic", SYNTH_KEYS)]:
        lines += [f"## `{name}`", "", "| key | type | meaning |", "|---|---|---|"]
        for key, (kind, desc) in spec.items():
            lines.append(f"| `{key}` | {kind.__name__} | {desc} |")
        lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# building problems
# ---------------------------------------------------------------------------

def load_data(cfg):
    """Return ``(X, y, planted)`` with samples as rows of ``X``."""
    if "synthetic" in cfg.data:
        ds, planted = synth_regression(cfg.synthetic_spec())
        return ds.X, ds.y, planted
    try:
        ds = read_libsvm(cfg.data["path"], cfg.data.get("expected_dim"))
    except OSError as exc:
        raise ConfigError(f"cannot read data.path: {exc}") from None
    return ds.X, ds.y, None


def _labels(y):
    return np.where(y > 0, 1.0, -1.0)


def _lam(pb, lam_max, key="lam"):
    if key in pb:
        return float(pb[key])
    return float(pb["lam_ratio"]) * lam_max


def build_problem(cfg):
    pb = cfg.problem
    kind = pb["kind"]
    X, y, _ = load_data(cfg)
    if kind == "simplex_ls":
        return P.simplex_ls(X, y)
    if kind == "l1_ls":
        return P.l1_ls(X, y, pb["r"])
    if kind == "elastic_ball_ls":
        return P.elastic_ball_ls(X, y, pb["alpha"], pb.get("scale", 1.0),
                                 pb.get("ball_factor", "certified"))
    if kind == "box_svm_hinge":
        return P.box_svm_hinge(X, _labels(y), pb["C"], pb.get("improved", False))
    if kind == "sq_hinge_svm":
        return P.sq_hinge_svm(X, _labels(y))
    if kind == "meb":
        return P.meb(X)
    corr = np.abs(X.rmatvec(y))
    if kind == "lasso":
        return P.lasso(X, y, _lam(pb, corr.max()))
    if kind == "elastic_net":
        if "alpha" in pb:
            return P.elastic_net(X, y, alpha=pb["alpha"])
        return P.elastic_net(X, y, lam1=_lam(pb, corr.max(), "lam1"), lam2=pb.get("lam2", 0.0))
    if kind == "group_lasso":
        groups = pb["groups"]
        if sum(groups) != X.n_cols:
            raise ConfigError(f"problem.groups covers {sum(groups)} features, data has "
                              f"{X.n_cols}")
        rho = np.asarray(pb.get("rho", groups), dtype=np.float64)
        if rho.size != len(groups):
            raise ConfigError("problem.rho needs one entry per group")
        starts = np.concatenate([[0], np.cumsum(groups)[:-1]])
        block = np.sqrt(np.add.reduceat(corr ** 2, starts)) / np.sqrt(rho)
        return P.group_lasso(X, y, _lam(pb, block.max()), groups, rho)
    lab = _labels(y)
    lam_max = float(np.max(np.abs(X.rmatvec(0.5 * lab))))
    return P.logistic_l1(X, lab, _lam(pb, lam_max))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _write_reports(path, reports):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for rep in reports:
            writer.writerows(rep.rows())


def cmd_solve(cfg, out=None):
    out = out or sys.stdout
    problem = build_problem(cfg)
    res = solve(problem, cfg.solver_config())
    if "trace" in cfg.output:
        res.trace.write(cfg.output["trace"])
    if "report" in cfg.output:
        _write_reports(cfg.output["report"], res.reports)
    gap = float("nan") if res.gap is None else res.gap
    print(f"kind={problem.kind} gap={gap:.3e} iterations={res.n_iter} "
          f"elapsed={res.elapsed:.3f}s active={res.mask.n_active}/{problem.n} "
          f"converged={res.converged}", file=out)
    return EXIT_OK


class _CompareObserver:
    """Evaluates the L1 rule and the simplex rule on one shared iterate sequence."""

    def __init__(self, l1_problem, bary_problem, radius, cfg):
        self.l1 = l1_problem
        self.bary = bary_problem
        self.r = radius
        self.cfg = cfg
        n = l1_problem.n
        self.mask_l1 = ScreenMask(n)
        self.mask_sx = ScreenMask(2 * n)
        self.rows = []
        self.first_l1 = None
        self.first_sx = None

    def _commit(self, mask, report):
        fresh = [(i, s) for i, s in report.newly_fixed if mask.status[i] == 0]
        mask.commit(fresh)

    def __call__(self, k, lam, cert_sx):
        n = self.l1.n
        x = from_barycentric(lam, self.r)
        it_l1 = P.Iterate(self.l1, x)
        cert_l1 = certify(self.l1, it_l1, k)
        screening = self.cfg.screening_enabled and k % self.cfg.screening_period == 0
        if screening:
            rep = screen_l1_constrained(it_l1, cert_l1, None, tau=self.cfg.safety_slack,
                                        iteration=k)
            self._commit(self.mask_l1, rep)
            it_sx = P.Iterate(self.bary, lam)
            rep = screen_simplex(it_sx, cert_sx, None, tau=self.cfg.safety_slack,
                                 iteration=k)
            self._commit(self.mask_sx, rep)
        active_l1 = self.mask_l1.n_active / n
        st = self.mask_sx.status
        eliminated = (st[:n] != 0) & (st[n:] != 0)
        active_sx = 1.0 - eliminated.sum() / n
        if self.first_l1 is None and self.mask_l1.n_active < n:
            self.first_l1 = k
        if self.first_sx is None and eliminated.any():
            self.first_sx = k
        self.rows.append((k, cert_l1.wolfe_gap, cert_sx.wolfe_gap, active_l1, active_sx))


def compare_run(problem, cfg):
    """Shared-iterate comparison of the L1 and simplex rules on an l1_ls problem.

    Returns the observer holding the merged rows and first-firing iterations.
    """
    r = problem.constraint.radius
    M, _ = to_barycentric(problem.A, np.zeros(problem.n), r)
    bary = P.simplex_ls(M, problem.loss.b)
    observer = _CompareObserver(problem, bary, r, cfg)
    run_cfg = SolverConfig(**{**cfg.__dict__, "screening_enabled": False})
    pairwise_frank_wolfe(bary, run_cfg, callback=observer)
    return observer


def cmd_compare(cfg, out=None):
    out = out or sys.stdout
    problem = build_problem(cfg)
    if problem.kind != "l1_ls":
        raise ConfigError("compare needs problem.kind = l1_ls")
    scfg = cfg.solver_config()
    observer = compare_run(problem, scfg)
    merged = cfg.output.get("merged")
    if merged:
        with open(merged, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("iter", "gap", "gap_simplex", "active_frac_l1", "active_frac_simplex"))
            for row in observer.rows:
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
    r = problem.constraint.radius
    M, _ = to_barycentric(problem.A, np.zeros(problem.n), r)
    bary = P.simplex_ls(M, problem.loss.b)
    table = []
    for variant, prob in (("l1", problem), ("simplex", bary)):
        for enabled in (True, False):
            t0 = time.perf_counter()
            res = solve(prob, SolverConfig(**{**scfg.__dict__, "screening_enabled": enabled}))
            table.append((variant, "with" if enabled else "without",
                          time.perf_counter() - t0, res.n_iter, res.gap))
    if cfg.output.get("timing"):
        with open(cfg.output["timing"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("variant", "screening", "elapsed_s", "iterations", "final_gap"))
            for v, s, t, k, g in table:
                w.writerow((v, s, f"{t:.6f}", k, repr(float(g))))
    print(f"{'variant':<10}{'screening':<11}{'elapsed_s':>11}{'iterations':>12}"
          f"{'final_gap':>12}", file=out)
    for v, s, t, k, g in table:
        print(f"{v:<10}{s:<11}{t:>11.4f}{k:>12d}{g:>12.2e}", file=out)
    print(f"first firing: l1={observer.first_l1} simplex={observer.first_sx}", file=out)
    return EXIT_OK


def cmd_verify(cfg, out=None):
    out = out or sys.stdout
    if "synthetic" not in cfg.data:
        raise ConfigError("verify needs data.synthetic")
    problem = build_problem(cfg)
    res = solve(problem, cfg.solver_config())
    ref = solve_reference(problem)
    bad = check_safety(res.reports, ref.x_ref, problem.upper)
    n_fixed = sum(len(r.newly_fixed) for r in res.reports)
    if bad:
        for v in bad:
            print(f"VIOLATION iter={v.iteration} index={v.index} rule={v.rule_id} "
                  f"status={v.status} x_ref={v.x_ref_value:.3e}", file=out)
        return EXIT_VERIFY
    print(f"verified kind={problem.kind} fixed={n_fixed} reference_gap={ref.gap_ref:.2e} "
          "violations=0", file=out)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "compare": cmd_compare, "verify": cmd_verify}


def main(argv=None):
    parser = argparse.ArgumentParser(prog="gapscreen", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--no-screening", action="store_true")
    sub.add_parser("config-reference")
    args = parser.parse_args(argv)
    if args.command == "config-reference":
        print(config_reference())
        return EXIT_OK
    try:
        cfg = RunConfig.load(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.no_screening:
            cfg.solver["screening_enabled"] = False
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GapError, DualInfeasibleError, InfeasibleDualError, FloatingPointError,
            np.linalg.LinAlgError, ReferenceBudgetError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
