"""The ``gcx`` command line: named experiments over the built-in catalog."""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .builtins import BUILTINS, make_builtin
from .convexity import (PolyhedralSet, convex_hull, cut_decompose, embedded_samples,
                        level_connectivity_from_samples, theorem_a_report)
from .genlin import random_structure, validate_structure
from .geom import FrameDiscontinuity, integrability_residual
from .hamilton import (critical_set, hamiltonian_residual, hessian_report,
                       structural_identity_residuals, weak_nondegeneracy_report)
from .report import (EXIT_CONFIG_ERROR, FAIL, INCONCLUSIVE, PASS, Check, ConfigError,
                     ExperimentConfig, Report, build_config, emit_report, read_config_file)
from .sampling import task_rng
from .spinor import (MultiForm, one_form, purity_report, spinor_exp, spinor_of_structure,
                     structure_from_spinor, wedge_all)

LINT_CHECKS = ("axioms", "integrability", "hamiltonian", "weak-nondegeneracy")
MOMENT_ACTIONS = ("verify", "hull", "levels", "hessian")
SPINOR_ACTIONS = ("roundtrip", "purity")
COMPACT = ("cp2_fs",)

DEFAULT_N = {
    ("lint", ""): 20, ("moment", "verify"): 20, ("moment", "hull"): 20000,
    ("moment", "levels"): 20000, ("moment", "hessian"): 200, ("cut", ""): 4000,
}
DEFAULT_TOL = {
    "axioms": 1e-10, "integrability": 1e-5, "hamiltonian": 1e-6, "eq3": 1e-6,
    "roundtrip": 1e-9, "purity": 1e-9, "hull": 5e-3, "fixed_values": 1e-8,
}


def threads() -> int:
    try:
        return max(1, int(os.environ.get("GCX_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Ordered map over items, using up to GCX_THREADS worker threads."""
    items = list(items)
    n = threads()
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _verdict(residual, tol) -> str:
    if residual is None or not np.isfinite(residual):
        return INCONCLUSIVE
    return PASS if residual < tol else FAIL


def _tol(cfg: ExperimentConfig, key: str) -> float:
    return cfg.tol if cfg.tol is not None else DEFAULT_TOL[key]


def system_for(cfg: ExperimentConfig):
    if cfg.builtin is None:
        raise ConfigError("--builtin is required")
    if cfg.builtin not in BUILTINS:
        raise ConfigError(f"unknown built-in {cfg.builtin!r}; choose from {', '.join(BUILTINS)}")
    params = {}
    if cfg.w is not None:
        if cfg.builtin not in ("cp2_fs", "product_family"):
            raise ConfigError(f"built-in {cfg.builtin} takes no w parameter")
        if len(cfg.w) != 2:
            raise ConfigError("w needs two components")
        params["w"] = cfg.w
    if cfg.builtin == "r2n_symplectic" and cfg.d is not None:
        params["d"] = cfg.d
    try:
        return make_builtin(cfg.builtin, **params)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def xi_for(cfg: ExperimentConfig, sys_):
    if cfg.xi is None:
        return sys_.generic_xi()
    if len(cfg.xi) != sys_.m:
        raise ConfigError(f"xi needs {sys_.m} components for {sys_.name}")
    return np.asarray(cfg.xi, dtype=float)


def _n(cfg, command, action=""):
    return cfg.n if cfg.n is not None else DEFAULT_N[(command, action)]


# ---------------------------------------------------------------------------
# lint
# ---------------------------------------------------------------------------


def lint_axioms(sys_, X, C, tol):
    diags = [validate_structure(sys_.model.structure_mat(x, c), tol) for x, c in zip(X, C)]
    res = max(max(g.square_residual, g.orthogonality_residual) for g in diags)
    return Check("axioms", res, tol, _verdict(res, tol), "generalized complex structure axioms",
                 {"points": len(X)})


def lint_integrability(sys_, X, C, tol):
    vals, skipped = [], 0
    for x, c in zip(X, C):
        try:
            vals.append(integrability_residual(sys_.model, x, c))
        except FrameDiscontinuity:
            skipped += 1
    res = max(vals) if vals else None
    verdict = _verdict(res, tol) if not skipped else (FAIL if res is not None and res >= tol
                                                       else INCONCLUSIVE)
    return Check("integrability", res, tol, verdict, "closure of L under the twisted bracket",
                 {"points": len(X), "frame_discontinuities": skipped})


def lint_hamiltonian(sys_, X, C, xi, tol):
    rs = [hamiltonian_residual(sys_, xi, x, c) for x, c in zip(X, C)]
    res = max(r.max() for r in rs)
    data = {"xi": xi, "points": len(X),
            "condition1": max(r.condition1 for r in rs),
            "condition2": max(r.condition2 for r in rs),
            "isotropy_dmu": max(r.isotropy_dmu for r in rs),
            "isotropy_alpha": max(r.isotropy_alpha for r in rs)}
    blocks = {}
    for r in rs:
        for k, v in r.blocks.items():
            blocks[k] = max(blocks.get(k, 0.0), v)
    if blocks:
        data["blocks"] = dict(sorted(blocks.items()))
    return Check("hamiltonian", res, tol, _verdict(res, tol), "generalized moment map conditions",
                 data)


def lint_weak_nondegeneracy(sys_, xi, rng):
    rep = weak_nondegeneracy_report(sys_, xi, rng=rng)
    # the check reports the outcome; either outcome is a valid finding
    return Check("weak-nondegeneracy", None, None, PASS, "Crit(mu^xi) versus Fix(T^xi)",
                 {"outcome": rep["verdict"], **rep, "xi": xi})


def run_lint(cfg: ExperimentConfig) -> list:
    sys_ = system_for(cfg)
    if cfg.check in (None, "all"):
        names = ["axioms", "integrability", "hamiltonian"] + (
            ["weak-nondegeneracy"] if cfg.xi is not None else [])
    else:
        names = [c.strip() for c in cfg.check.split(",") if c.strip()]
        bad = [c for c in names if c not in LINT_CHECKS]
        if bad or not names:
            raise ConfigError(f"unknown check {cfg.check!r}; choose from {', '.join(LINT_CHECKS)}")
    xi = xi_for(cfg, sys_)
    X, C = sys_.model.sample(_n(cfg, "lint"), np.random.default_rng(cfg.seed))

    def one(item):
        i, name = item
        if name == "axioms":
            return lint_axioms(sys_, X, C, _tol(cfg, "axioms"))
        if name == "integrability":
            return lint_integrability(sys_, X, C, _tol(cfg, "integrability"))
        if name == "hamiltonian":
            return lint_hamiltonian(sys_, X, C, xi, _tol(cfg, "hamiltonian"))
        return lint_weak_nondegeneracy(sys_, xi, task_rng(cfg.seed, i))

    return parallel_map(one, enumerate(names))


# ---------------------------------------------------------------------------
# spinor
# ---------------------------------------------------------------------------


def _even_dim(cfg):
    d = 4 if cfg.d is None else cfg.d
    if d < 2 or d % 2:
        raise ConfigError("--d must be a positive even integer")
    return d


def run_spinor(cfg: ExperimentConfig) -> list:
    d = _even_dim(cfg)
    if cfg.action == "roundtrip":
        dev = []
        for t in range(cfg.trials):
            rng = task_rng(cfg.seed, t)
            S = random_structure(d, rng)
            phi = spinor_of_structure(S)
            back = structure_from_spinor(phi)
            dev.append(float(np.abs(back.mat - S.mat).max()))
        tol = _tol(cfg, "roundtrip")
        res = max(dev)
        return [Check("spinor-roundtrip", res, tol, _verdict(res, tol),
                      "structure to canonical line and back", {"trials": cfg.trials, "d": d})]
    if cfg.action == "purity":
        worst, impure, nondeg, types = 0.0, 0, 0, []
        for t in range(cfg.trials):
            rng = task_rng(cfg.seed, t)
            k = int(rng.integers(0, d // 2 + 1))
            B = rng.normal(size=(d, d))
            om = rng.normal(size=(d, d))
            Om = wedge_all([one_form(d, rng.normal(size=d) + 1j * rng.normal(size=d))
                            for _ in range(k)]) if k else MultiForm.scalar(d)
            rep = purity_report(spinor_exp(B - B.T, om - om.T, Om))
            worst = max(worst, rep.isotropy_residual)
            impure += not rep.is_pure
            nondeg += rep.nondegenerate
            types.append(rep.type_k)
        tol = _tol(cfg, "purity")
        verdict = FAIL if impure else _verdict(worst, tol)
        return [Check("spinor-purity", worst, tol, verdict, "exp(B + i omega) ^ Omega is pure",
                      {"trials": cfg.trials, "d": d, "not_pure": impure, "nondegenerate": nondeg,
                       "types": sorted(set(types))})]
    raise ConfigError(f"unknown spinor action {cfg.action!r}")


# ---------------------------------------------------------------------------
# moment
# ---------------------------------------------------------------------------


def moment_verify(cfg, sys_):
    xi = xi_for(cfg, sys_)
    X, C = sys_.model.sample(_n(cfg, "moment", "verify"), np.random.default_rng(cfg.seed))
    checks = [lint_hamiltonian(sys_, X, C, xi, _tol(cfg, "hamiltonian"))]
    try:
        e3 = max(structural_identity_residuals(sys_, xi, x, c, critical=False)["eq3"]
                 for x, c in zip(X, C))
    except np.linalg.LinAlgError:
        e3 = None
    tol = _tol(cfg, "eq3")
    checks.append(Check("eq3", e3, tol, _verdict(e3, tol),
                        "xi_M = (omega_+^-1 - omega_-^-1) d mu^xi / 2", {"points": len(X)}))
    return checks


def hull_tolerance(cfg, sys_) -> float:
    if cfg.tol is not None:
        return cfg.tol
    w = sys_.model.params.get("w")
    scale = max(1.0, float(np.max(np.abs(w)))) if w is not None else 1.0
    return DEFAULT_TOL["hull"] * scale


def moment_hull(cfg, sys_):
    if sys_.name not in COMPACT:
        return [Check("hull", None, None, INCONCLUSIVE, "image equals hull of fixed values",
                      {"note": "model is not compact"})]
    rng = np.random.default_rng(cfg.seed)
    rep = theorem_a_report(sys_, _n(cfg, "moment", "hull"), rng, xi=cfg.xi)
    tol = hull_tolerance(cfg, sys_)
    fixed = rep["fixed_hull"]
    checks = [Check("hull", rep["hausdorff"], tol, _verdict(rep["hausdorff"], tol),
                    "image equals hull of fixed values",
                    {"vertices": rep["image_hull"].vertices, "n": rep["image_hull"].n_input,
                     "fixed_vertices": fixed.vertices})]
    exact = getattr(sys_.model, "fixed_points", None)
    if exact is not None:
        ref = np.array([sys_.mu(p, c) for p, c in exact()])
        found = rep["fixed_values"]
        if len(found) == len(ref):
            res = max(float(np.min(np.linalg.norm(found - r, axis=1))) for r in ref)
        else:
            res = float("inf")
        tol_f = DEFAULT_TOL["fixed_values"]
        checks.append(Check("fixed-values", res, tol_f, FAIL if not np.isfinite(res)
                            else _verdict(res, tol_f), "fixed points map to hull vertices",
                            {"vertices": found, "found": len(found), "expected": len(ref)}))
    return checks


def interior_levels(values, count, eps, rng):
    """Random sample values at least 3 eps inside the planar image hull."""
    hull = convex_hull(values)
    if hull.dim != 2 or values.shape[1] != 2:
        raise ConfigError("random levels need a two-dimensional image")
    N = hull.normals
    off = np.einsum("ij,ij->i", N, hull.vertices)
    depth = np.min(off[None, :] - values @ N.T, axis=1)
    cand = np.flatnonzero(depth > 3 * eps)
    if len(cand) == 0:
        return np.zeros((0, 2))
    return values[rng.choice(cand, size=min(count, len(cand)), replace=False)]


def moment_levels(cfg, sys_):
    rng = np.random.default_rng(cfg.seed)
    emb, vals = embedded_samples(sys_, _n(cfg, "moment", "levels"), rng)
    if cfg.level is not None:
        if len(cfg.level) != sys_.m:
            raise ConfigError(f"level needs {sys_.m} components")
        levels = np.array([cfg.level])
    else:
        levels = interior_levels(vals, cfg.levels, cfg.eps, task_rng(cfg.seed, 1))
    level_dim = max(sys_.d - sys_.m, 1)
    reps = parallel_map(lambda a: level_connectivity_from_samples(emb, vals, a, cfg.eps, cfg.delta,
                                                                  level_dim=level_dim), levels)
    verdicts = [r["verdict"] for r in reps]
    bad = sum(v == "disconnected" for v in verdicts)
    if not reps:
        verdict = INCONCLUSIVE
    elif bad:
        verdict = FAIL
    elif any(v in ("inconclusive", "empty") for v in verdicts):
        verdict = INCONCLUSIVE
    else:
        verdict = PASS
    data = {"eps": cfg.eps, "levels": [
        {"a": a, "verdict": r["verdict"], "components": r["components"], "n_level": r["n_level"],
         "delta": r["delta"]} for a, r in zip(levels, reps)]}
    return [Check("level-connectivity", float(bad), 1.0, verdict, "connected level sets", data)]


def moment_hessian(cfg, sys_):
    xi = xi_for(cfg, sys_)
    search = critical_set(sys_, xi, _n(cfg, "moment", "hessian"), np.random.default_rng(cfg.seed))
    comps = []
    ok = True
    for comp in search.components:
        hessian_report(sys_, xi, comp)
        even = comp.index % 2 == 0 and comp.coindex % 2 == 0
        ok &= even and bool(comp.nullity_matches)
        comps.append({"value": comp.value, "tangent_dim": comp.tangent_dim, "index": comp.index,
                      "coindex": comp.coindex, "nullity": comp.nullity, "size": comp.size,
                      "even_eigenspaces": comp.even_eigenspaces})
    verdict = INCONCLUSIVE if not comps else (PASS if ok else FAIL)
    return [Check("bott-morse", None, None, verdict, "even index and coindex, nullity = dim",
                  {"xi": xi, "components": comps, "converged": search.n_converged,
                   "starts": search.n_start})]


def run_moment(cfg: ExperimentConfig) -> list:
    sys_ = system_for(cfg)
    actions = {"verify": moment_verify, "hull": moment_hull, "levels": moment_levels,
               "hessian": moment_hessian}
    if cfg.action not in actions:
        raise ConfigError(f"unknown moment action {cfg.action!r}")
    return actions[cfg.action](cfg, sys_)


# ---------------------------------------------------------------------------
# cut
# ---------------------------------------------------------------------------


def parse_polytope(text: str, m: int) -> PolyhedralSet:
    """Parse ``"v11,v12>=b1;v21,v22>=b2"`` into a polyhedral set."""
    if not text:
        raise ConfigError("--polytope is required")
    normals, offsets = [], []
    for part in text.split(";"):
        if not part.strip():
            continue
        try:
            lhs, rhs = part.split(">=")
            v = [float(t) for t in lhs.split(",")]
            b = float(rhs)
        except ValueError as exc:
            raise ConfigError(f"cannot parse inequality {part!r}") from exc
        if len(v) != m or any(a != round(a) for a in v):
            raise ConfigError(f"inequality {part!r} needs {m} integer coefficients")
        normals.append([int(round(a)) for a in v])
        offsets.append(b)
    try:
        return PolyhedralSet.from_lists(normals, offsets)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def run_cut(cfg: ExperimentConfig) -> list:
    sys_ = system_for(cfg)
    P = parse_polytope(cfg.polytope, sys_.m)
    rep = cut_decompose(sys_, P, _n(cfg, "cut"), np.random.default_rng(cfg.seed),
                        compact=sys_.name in COMPACT)
    d = rep.to_dict()
    checks = [Check("face-partition", None, None, PASS if rep.partition_ok else FAIL,
                    "faces of P partition the preimage", d)]
    conn = rep.connectivity
    if "equivalence_holds" in conn:
        v = PASS if conn["equivalence_holds"] else FAIL
    else:
        v = INCONCLUSIVE
    checks.append(Check("cut-connectivity", None, None, v,
                        "preimage connected iff image connected", conn))
    return checks


# ---------------------------------------------------------------------------
# Suite runner
# ---------------------------------------------------------------------------


RUNNERS = {"lint": run_lint, "spinor": run_spinor, "moment": run_moment, "cut": run_cut}


def run_suite(cfg: ExperimentConfig) -> Report:
    """Run one configured experiment; raises ConfigError for invalid configs."""
    if cfg.command not in RUNNERS:
        raise ConfigError(f"unknown operation {cfg.command!r}")
    start = time.perf_counter()
    checks = RUNNERS[cfg.command](cfg)
    wall = time.perf_counter() - start if cfg.timing else None
    return Report(cfg.echo(), checks, __version__, wall)


def run_config_file(path: str, overrides: dict) -> Report:
    """Run every ``[run.NAME]`` section of a config file over its ``[gcx]`` defaults."""
    sections = read_config_file(path)
    base = sections.get("gcx", {})
    runs = [(name[4:], sec) for name, sec in sections.items() if name.startswith("run.")]
    if not runs:
        raise ConfigError(f"{path} defines no [run.NAME] sections")
    unknown = [s for s in sections if s != "gcx" and not s.startswith("run.")]
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(unknown)}")
    cfgs = [(name, build_config({**base, **sec}, overrides)) for name, sec in runs]
    start = time.perf_counter()
    reports = parallel_map(lambda item: run_suite(item[1]), cfgs)
    checks = []
    for (name, _), rep in zip(cfgs, reports):
        for c in rep.checks:
            checks.append(Check(f"{name}/{c.name}", c.residual, c.tolerance, c.verdict, c.anchor,
                                c.data))
    timing = any(c.timing for _, c in cfgs) or overrides.get("timing")
    wall = time.perf_counter() - start if timing else None
    echo = {"file": os.path.basename(path), "runs": {n: c.echo() for n, c in cfgs}}
    return Report(echo, checks, __version__, wall)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG_ERROR, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--builtin", help=f"one of {', '.join(BUILTINS)}")
    p.add_argument("--w", help="weights, e.g. 1,1")
    p.add_argument("--xi", help="Lie algebra element, e.g. 1,0,0")
    p.add_argument("--n", type=int, help="sample or multistart count")
    p.add_argument("--seed", type=int)
    p.add_argument("--eps", type=float, help="level slab half width")
    p.add_argument("--delta", type=float, help="linking scale for level components")
    p.add_argument("--tol", type=float, help="override the check tolerance")
    p.add_argument("--out", help="write the report to this path")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--config", help="INI file with [gcx] defaults")
    p.add_argument("--timing", action="store_true", default=None, help="record wall time")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gcx", description="Numerical checks for generalized complex "
                     "structures and generalized moment maps.")
    parser.add_argument("--version", action="version", version=f"gcx {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("lint", help="check a built-in model")
    _common(p)
    p.add_argument("--check", help=f"one of {', '.join(LINT_CHECKS)} or all")

    p = sub.add_parser("spinor", help="spinor property suites")
    p.add_argument("action", choices=SPINOR_ACTIONS)
    _common(p)
    p.add_argument("--d", type=int)
    p.add_argument("--trials", type=int)

    p = sub.add_parser("moment", help="moment map experiments")
    p.add_argument("action", choices=MOMENT_ACTIONS)
    _common(p)
    p.add_argument("--level", help="single level value, e.g. -0.2,-0.1")
    p.add_argument("--levels", type=int, help="number of random interior levels")

    p = sub.add_parser("cut", help="face decomposition for a polyhedral set")
    _common(p)
    p.add_argument("--polytope", help='inequalities, e.g. "1,0>=-0.3;0,1>=-0.3"')

    p = sub.add_parser("report", help="run every [run.NAME] section of a config file")
    p.add_argument("config_file")
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--timing", action="store_true", default=None)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG_ERROR
    values = {k: v for k, v in vars(args).items() if v is not None}
    command = values.pop("command")
    out = values.get("out")
    fmt = values.get("format", "json")
    try:
        if command == "report":
            path = values.pop("config_file")
            overrides = {k: values[k] for k in ("format", "timing") if k in values}
            report = run_config_file(path, overrides)
        else:
            base = {}
            cfg_path = values.pop("config", None)
            if cfg_path:
                base = read_config_file(cfg_path).get("gcx", {})
            values["command"] = command
            cfg = build_config(base, values)
            out, fmt = cfg.out, cfg.format
            report = run_suite(cfg)
        text = emit_report(report, out, fmt)
    except ConfigError as exc:
        print(f"gcx: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except OSError as exc:
        print(f"gcx: cannot write report: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    if not out:
        sys.stdout.write(text)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
