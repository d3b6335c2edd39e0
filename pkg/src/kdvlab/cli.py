"""Batch runner: one subcommand per sweep, CSV out, manifest sidecars.

Exit codes: 0 success (including cost-guard skips, which are recorded in
the manifest), 2 config error (message names the failing schema path),
3 guard-only failures when --strict is set.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional

import jsonschema
import numpy as np

from . import __version__
from .bumps import default_eta
from .lattice import CoeffVector, DyadicBlock, TorusSpec
from .manifest import RunManifest, Stopwatch, derived_seed, format17, write_artifact
from .norms import CostGuardError, lp_exact_torus, lp_sampled

_COMMON_PROPS = {
    "seed": {"type": "integer", "minimum": 0},
    "shards": {"type": "integer", "minimum": 1, "maximum": 64},
    "eps": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5},
    "out": {"type": "string"},
    "strict": {"type": "boolean"},
}


def _schema(extra: Dict, required: Optional[List[str]] = None) -> Dict:
    props = dict(_COMMON_PROPS)
    props.update(extra)
    return {
        "type": "object",
        "properties": props,
        "required": required or [],
        "additionalProperties": False,
    }


SCHEMAS: Dict[str, Dict] = {
    "norm": _schema(
        {
            "infile": {"type": "string"},
            "p": {"type": "integer", "enum": [2, 4, 6, 8, 10, 12, 14, 16]},
            "method": {"type": "string", "enum": ["exact", "sampled"]},
            "t_samples": {"type": "integer", "minimum": 16},
        },
        required=["infile", "p"],
    ),
    "counterexample": _schema(
        {
            "N": {"type": "string"},
            "mcount_out": {"type": "string"},
            "mcount_N": {"type": "integer", "minimum": 1, "maximum": 128},
        },
        required=["N"],
    ),
    "mcount": _schema(
        {
            "N": {"type": "integer", "minimum": 1, "maximum": 128},
            "xi4_max": {"type": "integer", "minimum": 0},
        },
        required=["N"],
    ),
    "weyl": _schema(
        {"p_list": {"type": "string"}},
        required=["p_list"],
    ),
    "majorarc": _schema(
        {"Q_list": {"type": "string"}, "gamma_max": {"type": "integer", "minimum": 1}},
        required=["Q_list"],
    ),
    "scan": _schema(
        {
            "L": {"type": "string"},
            "N": {"type": "string"},
            "lambda": {"type": "string"},
            "data": {"type": "string", "enum": ["flat", "random"]},
            "n_t": {"type": "integer", "minimum": 16},
        },
        required=["L", "N", "lambda"],
    ),
    "levelset": _schema(
        {
            "L": {"type": "integer", "minimum": 1},
            "N": {"type": "integer", "minimum": 1},
            "lambda": {"type": "integer", "minimum": 1},
            "data": {"type": "string", "enum": ["flat", "random"]},
            "grid": {"type": "integer", "minimum": 64},
        },
        required=["L", "N", "lambda"],
    ),
    "extremize": _schema(
        {
            "N": {"type": "string"},
            "p": {"type": "integer", "enum": [4, 6, 8, 10, 12, 14, 16]},
            "restarts": {"type": "integer", "minimum": 1},
            "max_iters": {"type": "integer", "minimum": 1},
            "coeffs_out": {"type": "string"},
        },
        required=["N", "p"],
    ),
    "scaling": _schema(
        {
            "s": {"type": "number", "exclusiveMinimum": 0.5, "exclusiveMaximum": 1.0},
            "lambda_max_pow": {"type": "integer", "minimum": 0, "maximum": 12},
        },
        required=["s"],
    ),
    "identities": _schema(
        {"samples": {"type": "integer", "minimum": 1, "maximum": 10_000_000}},
    ),
}


def parse_int_list(spec: str) -> List[int]:
    """'1,2,4' or dyadic ranges '4..64' (powers of two inclusive)."""
    out: List[int] = []
    for part in spec.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            v = int(lo)
            while v <= int(hi):
                out.append(v)
                v *= 2
        elif part:
            out.append(int(part))
    return out


def _validate(sub: str, config: Dict) -> Optional[str]:
    try:
        jsonschema.validate(config, SCHEMAS[sub])
        return None
    except jsonschema.ValidationError as e:
        path = "/".join(str(p) for p in e.absolute_path) or "(root)"
        return f"config error at {path}: {e.message}"


def _csv(header: List[str], rows: List[List]) -> str:
    lines = [",".join(header)]
    for row in rows:
        cells = [format17(v) if isinstance(v, float) else str(v) for v in row]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _finish(args, sub, config, rows, header, watch, skips=None) -> int:
    manifest = RunManifest(
        command_line=" ".join(sys.argv),
        subcommand=sub,
        config=config,
        seed=config.get("seed", 0),
        shards=config.get("shards", 1),
        wall_time_seconds=watch.seconds,
        guards={
            "exact_support": 1200,
            "semi_analytic_pairs": 1e8,
            "mset_enum_N": 128,
            "weyl_length": 1e7,
        },
        profiles={"eta": default_eta().profile_id, "phi": "phi-moll-plateau[0.01,0.02]-support[0,0.03]-v1"},
        skips=skips or [],
    )
    write_artifact(Path(config["out"]), _csv(header, rows), manifest)
    if skips and config.get("strict"):
        return 3
    return 0


def _load_config(args, sub: str) -> Dict:
    config: Dict = {}
    if getattr(args, "config", None):
        config.update(json.loads(Path(args.config).read_text()))
    for key, val in vars(args).items():
        if key in ("func", "config", "print_schema", "subcommand"):
            continue
        if val is not None:
            config["lambda" if key == "lam" else key] = val
    config.setdefault("seed", 0)
    config.setdefault("shards", 1)
    config.setdefault("eps", 0.05)
    config.setdefault("out", f"{sub}.csv")
    return config


# ---------------------------------------------------------------------------
# subcommand bodies
# ---------------------------------------------------------------------------


def _run_norm(config) -> int:
    u = CoeffVector.from_json(Path(config["infile"]).read_text())
    p = config["p"]
    with Stopwatch() as w:
        if config.get("method", "exact") == "exact" and p <= 8:
            res = lp_exact_torus(u, p, shards=config["shards"])
        else:
            res = lp_sampled(u, p, t_samples=config.get("t_samples", 1024), seed=config["seed"])
    rows = [[p, res.method, float(res.value), float(res.std_error), len(u), u.torus.lam, w.seconds]]
    return _finish(None, "norm", config, rows, ["p", "method", "value", "std_error", "M", "lambda", "seconds"], w)


def _run_counterexample(config) -> int:
    from .counterexample import l8_ratio_sweep, m_set_histogram

    Ns = parse_int_list(config["N"])
    with Stopwatch() as w:
        sweep = l8_ratio_sweep(Ns, shards=config["shards"])
    rows = [
        [r.N, float(r.l8_eighth_power), float(r.ratio), float(sweep.fit_slope), float(sweep.fit_r2)]
        for r in sweep.rows
    ]
    mN = config.get("mcount_N", 8)
    hist, total = m_set_histogram(mN, 0)
    fixture = {
        "N": mN,
        "xi4": 0,
        "total": int(total),
        "counts_by_alpha": {str(i + 1): int(c) for i, c in enumerate(hist) if c},
    }
    out = Path(config.get("mcount_out", str(Path(config["out"]).with_suffix(".mcounts.json"))))
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(fixture, indent=2, sort_keys=True))
    return _finish(None, "counterexample", config, rows,
                   ["N", "l8_eighth_power", "ratio", "fit_slope", "fit_r2"], w)


def _run_mcount(config) -> int:
    from .counterexample import m_set_histogram

    N = config["N"]
    xi4_max = config.get("xi4_max", max(1, N // 8))
    rows = []
    with Stopwatch() as w:
        for xi4 in range(-xi4_max, xi4_max + 1):
            hist, total = m_set_histogram(N, xi4)
            for alpha, count in enumerate(hist, start=1):
                if count:
                    rows.append([N, xi4, alpha, int(count), int(total)])
    return _finish(None, "mcount", config, rows, ["N", "xi4", "alpha", "count", "total"], w)


def _run_weyl(config) -> int:
    from .arith import weyl_bound_ratio

    ps = parse_int_list(config["p_list"])
    rows = []
    with Stopwatch() as w:
        for p in ps:
            rep = weyl_bound_ratio(p, eps=config["eps"])
            t, a, q = rep.argmax
            rows.append([p, float(rep.eps), float(rep.max_ratio), float(t), a, q, rep.samples])
    return _finish(None, "weyl", config, rows,
                   ["p", "eps", "max_ratio", "t_argmax", "a", "q", "samples"], w)


def _run_majorarc(config) -> int:
    from .arith import farey_pairs, phi_fourier, phi_fourier_zero, totient_sum

    Qs = parse_int_list(config["Q_list"])
    gamma_max = config.get("gamma_max", 64)
    rows = []
    with Stopwatch() as w:
        for Q in Qs:
            sys_ = farey_pairs(Q)
            ts = totient_sum(Q)
            f0 = phi_fourier_zero(sys_)
            disjoint = int(sys_.arcs_disjoint())
            for gamma in range(0, gamma_max + 1):
                fg = phi_fourier(gamma, sys_)
                rows.append([Q, sys_.count(), float(ts), disjoint, gamma, float(abs(fg)), float(f0)])
    return _finish(None, "majorarc", config, rows,
                   ["Q", "pairs", "totient_sum", "arcs_disjoint", "gamma", "abs_F_Phi", "F_Phi_0"], w)


def _run_scan(config) -> int:
    from .scanner import scan

    with Stopwatch() as w:
        result = scan(
            parse_int_list(config["L"]),
            parse_int_list(config["N"]),
            parse_int_list(config["lambda"]),
            data_kind=config.get("data", "flat"),
            seed=config["seed"],
            eps=config["eps"],
            n_t=config.get("n_t", 1024),
            shards=config["shards"],
        )
    rows = []
    skips = []
    for c in result.cells:
        if c.skipped_reason:
            skips.append({"L": c.L, "N": c.N, "lambda": c.lam, "reason": c.skipped_reason})
            continue
        rows.append([c.L, c.N, c.lam, c.data_kind, float(c.lhs.pth_power()), float(c.rhs),
                     float(c.ratio), float(c.lhs.std_error)])
    return _finish(None, "scan", config, rows,
                   ["L", "N", "lambda", "kind", "lhs4", "rhs", "ratio", "stderr"], w, skips)


def _run_levelset(config) -> int:
    from .scanner import levelset_chain_check

    with Stopwatch() as w:
        rep = levelset_chain_check(
            config["L"], config["N"], config["lambda"],
            data_kind=config.get("data", "flat"),
            seed=config["seed"],
            grid=(config.get("grid", 512), config.get("grid", 512)),
            eps=config["eps"],
        )
    rows = [
        ["sup_bound", float(rep.sup_bound), 0.0],
        ["layercake_relerr", float(rep.layer_cake_rel_err), 0.0],
        ["in2_fitted", float(rep.in2_fitted), 0.0],
        ["in1_fitted", float(rep.in1_fitted), 0.0],
    ]
    for mu, e in zip(rep.table.thresholds, rep.table.measures):
        rows.append(["E_mu", float(mu), float(e)])
    return _finish(None, "levelset", config, rows, ["kind", "value1", "value2"], w)


def _run_extremize(config) -> int:
    from .extremizer import AscentConfig, ascend

    Ns = parse_int_list(config["N"])
    p = config["p"]
    cfg = AscentConfig(
        restarts=config.get("restarts", 4),
        max_iters=config.get("max_iters", 60),
        seed=config["seed"],
    )
    rows = []
    best_dump = {}
    with Stopwatch() as w:
        for N in Ns:
            res = ascend(N, p, cfg)
            rows.append([N, p, float(res.best_value), res.iters, res.restarts, config["seed"]])
            best_dump[str(N)] = res.best.to_json_dict()
    out = Path(config.get("coeffs_out", str(Path(config["out"]).with_suffix(".coeffs.json"))))
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(best_dump, indent=2, sort_keys=True))
    return _finish(None, "extremize", config, rows,
                   ["N", "p", "best_ratio", "iters", "restarts", "seed"], w)


def _run_scaling(config) -> int:
    from .lattice import CoeffVector, TorusSpec
    from .scaling import rescale, smallness_check

    s = config["s"]
    maxpow = config.get("lambda_max_pow", 8)
    u0 = CoeffVector(TorusSpec(1), {1: 0.5, -1: 0.5, 2: 0.25j, -2: -0.25j, 0: 0.3})
    rows = []
    with Stopwatch() as w:
        base = u0.l2_mass()
        for j in range(maxpow + 1):
            lam = 2**j
            ul = rescale(u0, lam)
            rows.append([lam, float(ul.l2_mass() / base), float(lam ** (-1.0 / 3.0)), s, 0.0, 0.0])
        rep = smallness_check(u0, s, lambdas=[2**j for j in range(maxpow + 1)])
        for r in rep.rows:
            rows.append([r.lam, 0.0, 0.0, s, float(r.hamiltonian_value), float(r.kinetic_proxy)])
    return _finish(None, "scaling", config, rows,
                   ["lambda", "mass_ratio", "expected_ratio", "s", "hamiltonian", "kinetic"], w)


def _run_identities(config) -> int:
    from .lattice import cubic_identity_check
    from .scaling import five_tuple_identity_check

    n = config.get("samples", 100_000)
    rng = np.random.default_rng(derived_seed(config["seed"], "identities"))
    with Stopwatch() as w:
        xs = rng.integers(-1000, 1001, size=(n, 4))
        ok = all(cubic_identity_check(*row) for row in xs[: min(n, 1000)])
        # vectorized remainder
        x1, x2, x3, x4 = (xs[:, i].astype(np.int64) for i in range(4))
        lhs = x1**3 - (x1 - x2) ** 3 + (x3 - x2 + x4) ** 3 - x3**3
        rhs = (
            x4**3
            + 3 * x4 * (x3 * (x3 - 2 * x2 + x4) + x2 * (x2 - x4))
            + 3 * x2 * (x1 - x3) * (x1 + x3 - x2)
        )
        all_ok = ok and bool(np.all(lhs == rhs))
        rows = [["cubic", n, int(all_ok), 0.0, 0.0]]
        for _ in range(32):
            xi = rng.integers(-64, 65, size=4)
            xi5 = -int(np.sum(xi))
            taus = rng.standard_normal(4)
            taus = np.append(taus, -np.sum(taus))
            resid, scale = five_tuple_identity_check(list(taus), [int(x) for x in xi] + [xi5])
            rows.append(["five_tuple", 1, 1, float(resid), float(scale)])
    return _finish(None, "identities", config, rows,
                   ["kind", "samples", "ok", "residual", "scale"], w)


_RUNNERS = {
    "norm": _run_norm,
    "counterexample": _run_counterexample,
    "mcount": _run_mcount,
    "weyl": _run_weyl,
    "majorarc": _run_majorarc,
    "scan": _run_scan,
    "levelset": _run_levelset,
    "extremize": _run_extremize,
    "scaling": _run_scaling,
    "identities": _run_identities,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kdvlab", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (merged under the flags)")
        p.add_argument("--seed", type=int)
        p.add_argument("--shards", type=int)
        p.add_argument("--eps", type=float)
        p.add_argument("--out")
        p.add_argument("--strict", action="store_const", const=True)
        p.add_argument("--print-schema", action="store_true")

    p = sub.add_parser("norm", help="one norm of a coefficient vector")
    common(p)
    p.add_argument("--in", dest="infile")
    p.add_argument("--p", type=int)
    p.add_argument("--method", choices=["exact", "sampled"])
    p.add_argument("--t-samples", dest="t_samples", type=int)

    p = sub.add_parser("counterexample", help="exact L8 ratio sweep of flat blocks")
    common(p)
    p.add_argument("--N", help="list/range of dyadic scales, e.g. 1..256")
    p.add_argument("--mcount-out", dest="mcount_out")
    p.add_argument("--mcount-N", dest="mcount_N", type=int)

    p = sub.add_parser("mcount", help="resonance shell cardinalities")
    common(p)
    p.add_argument("--N", type=int)
    p.add_argument("--xi4-max", dest="xi4_max", type=int)

    p = sub.add_parser("weyl", help="Weyl sum bound-ratio sweep")
    common(p)
    p.add_argument("--p-list", dest="p_list")

    p = sub.add_parser("majorarc", help="Farey arcs, totient sums, F Phi decay")
    common(p)
    p.add_argument("--Q-list", dest="Q_list")
    p.add_argument("--gamma-max", dest="gamma_max", type=int)

    p = sub.add_parser("scan", help="bilinear estimate sweep over (L, N, lambda)")
    common(p)
    p.add_argument("--L")
    p.add_argument("--N")
    p.add_argument("--lambda", dest="lam")
    p.add_argument("--data", choices=["flat", "random"])
    p.add_argument("--n-t", dest="n_t", type=int)

    p = sub.add_parser("levelset", help="level-set chain for one cell")
    common(p)
    p.add_argument("--L", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--lambda", dest="lam", type=int)
    p.add_argument("--data", choices=["flat", "random"])
    p.add_argument("--grid", type=int)

    p = sub.add_parser("extremize", help="gradient ascent for best constants")
    common(p)
    p.add_argument("--N")
    p.add_argument("--p", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--coeffs-out", dest="coeffs_out")

    p = sub.add_parser("scaling", help="rescaling laws and smallness sweep")
    common(p)
    p.add_argument("--s", type=float)
    p.add_argument("--lambda-max-pow", dest="lambda_max_pow", type=int)

    p = sub.add_parser("identities", help="algebraic identity sweeps")
    common(p)
    p.add_argument("--samples", type=int)

    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    sub = args.subcommand
    if getattr(args, "print_schema", False):
        print(json.dumps(SCHEMAS[sub], indent=2, sort_keys=True))
        return 0
    config = _load_config(args, sub)
    err = _validate(sub, config)
    if err:
        print(err, file=sys.stderr)
        return 2
    try:
        return _RUNNERS[sub](config)
    except CostGuardError as e:
        print(f"cost guard: {e}", file=sys.stderr)
        return 3 if config.get("strict") else 0


if __name__ == "__main__":
    sys.exit(main())
