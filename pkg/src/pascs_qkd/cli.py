"""Command-line front end: ``pascs-qkd {rate,optimize,sweep,compare,selftest}``.

Data goes to ``--output`` or stdout; summaries and diagnostics go to stderr.
Exit codes: 0 ok, 1 internal error or failed self-test, 2 invalid flags,
3 no secure operating point.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import (
    DEFAULT_ALPHA,
    DEFAULT_K_MIN,
    NoSecureKeyError,
    SweepSpec,
    compare_protocols,
    distance_grid,
    optimize_alpha,
    sweep_distance,
)
from .channel import (
    DEFAULT_LOSS_DB_PER_KM,
    ChannelParams,
    DetectionParams,
    SignConvention,
    bob_variance,
    condition_on_homodyne,
    propagate,
)
from .fock import TRUNCATION_ENV, TruncationError, coherent_coefficients, default_truncation, pascs_coefficients
from .gaussian import holevo_reverse_homodyne, symplectic_eigenvalues
from .keyrate import MutualInfoConvention, RatePoint, holevo_bound, key_rate
from .modulation import (
    CANCELLATION_THRESHOLD,
    ModulationEnsemble,
    StateFamily,
    correlation_gauss,
    correlation_numeric,
    correlation_z4_closed,
    eigenvalues_closed,
    modulation_variance_closed,
    spectral_numeric,
)

log = logging.getLogger("pascs_qkd")

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_INSECURE = 0, 1, 2, 3

COLUMNS = (
    "distance_km",
    "transmissivity",
    "excess_noise",
    "alpha",
    "v_a",
    "z",
    "i_ab_bits",
    "s_be_bits",
    "key_rate_bits",
)


class UsageError(ValueError):
    pass


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return format(float(x), ".12g")


def parse_range(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    try:
        if len(parts) == 1:
            v = float(parts[0])
            return v, v, 1.0
        if len(parts) == 3:
            start, stop, step = (float(p) for p in parts)
            return start, stop, step
    except ValueError:
        pass
    raise UsageError(f"expected NUMBER or START:STOP:STEP, got {text!r}")


def parse_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise UsageError("empty list")
    return values


def point_row(p: RatePoint) -> dict:
    return {
        "distance_km": p.distance_km,
        "transmissivity": p.channel.transmissivity,
        "excess_noise": p.channel.excess_noise,
        "alpha": p.alpha,
        "v_a": p.v_a,
        "z": p.z,
        "i_ab_bits": p.i_ab,
        "s_be_bits": p.s_be,
        "key_rate_bits": p.key_rate,
    }


def render_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row[c]) for c in columns])
    return buf.getvalue()


def metadata(args: argparse.Namespace, **extra) -> dict:
    meta = {
        "version": __version__,
        "command": args.command,
        "conventions": {
            "excess_noise_sign": args.convention,
            "mutual_information": args.iab,
            "log_base": 2,
            "detector_efficiency": "folded into transmissivity",
        },
        "truncation": args.truncation if args.truncation is not None else default_truncation(),
        "truncation_env": os.environ.get(TRUNCATION_ENV),
        "loss_db_per_km": args.loss,
        "beta": args.beta,
        "eta_det": args.eta_det,
    }
    meta.update(extra)
    return meta


def render(args: argparse.Namespace, rows: list[dict], columns: Sequence[str], **meta) -> str:
    if args.format == "csv":
        return render_csv(rows, columns)
    doc = {"metadata": metadata(args, **meta), "records": [{c: r[c] for c in columns} for r in rows]}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def emit(args: argparse.Namespace, text: str) -> None:
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def say(msg: str) -> None:
    print(msg, file=sys.stderr)


def rate_kwargs(args) -> dict:
    return dict(
        iab_convention=MutualInfoConvention(args.iab),
        sign_convention=SignConvention(args.convention),
        truncation=args.truncation,
    )


def _alpha_for(args, family: StateFamily) -> float:
    return DEFAULT_ALPHA[family] if args.alpha is None else args.alpha


def cmd_rate(args) -> int:
    family = StateFamily(args.protocol)
    alpha = _alpha_for(args, family)
    det = DetectionParams(args.beta, args.eta_det)
    start, stop, step = parse_range(args.distance)
    rows = []
    for xi in parse_list(args.xi):
        for d in distance_grid(start, stop, step):
            ch = ChannelParams.from_distance(float(d), xi, args.loss)
            rows.append(point_row(key_rate(alpha, family, ch, det, **rate_kwargs(args))))
    emit(args, render(args, rows, COLUMNS, protocol=family.value))
    for r in rows:
        say(f"{family.value} alpha={fmt(r['alpha'])} L={fmt(r['distance_km'])} km xi={fmt(r['excess_noise'])}: "
            f"K={fmt(r['key_rate_bits'])} bits/pulse")
    return EXIT_OK


def cmd_optimize(args) -> int:
    family = StateFamily(args.protocol)
    det = DetectionParams(args.beta, args.eta_det)
    lo, hi = (float(x) for x in args.bounds.split(":"))
    d = parse_range(args.distance)[0]
    rows = []
    for xi in parse_list(args.xi):
        ch = ChannelParams.from_distance(d, xi, args.loss)
        opt = optimize_alpha(family, ch, det, bounds=(lo, hi), tol=args.tol, **rate_kwargs(args))
        rows.append({
            "protocol": family.value,
            "distance_km": d,
            "transmissivity": ch.transmissivity,
            "excess_noise": xi,
            "alpha_opt": opt.alpha,
            "key_rate_bits": opt.key_rate,
        })
        say(f"{family.value} L={fmt(d)} km xi={fmt(xi)}: alpha_opt={opt.alpha:.4f} K={opt.key_rate:.6g}"
            + ("" if opt.unimodal else " (multimodal pre-scan)"))
    cols = ("protocol", "distance_km", "transmissivity", "excess_noise", "alpha_opt", "key_rate_bits")
    emit(args, render(args, rows, cols))
    return EXIT_OK


def build_spec(args, families) -> SweepSpec:
    alphas = {}
    for fam in families:
        explicit = getattr(args, f"alpha_{fam.value}", None)
        if explicit is None and len(families) == 1:
            explicit = args.alpha
        if explicit is not None:
            alphas[fam] = explicit
    return SweepSpec(
        families=tuple(families),
        alphas=alphas,
        distances=parse_range(args.distance),
        excess_noises=parse_list(args.xi),
        beta=args.beta,
        eta_det=args.eta_det,
        loss_db_per_km=args.loss,
        k_min=args.k_min,
        iab_convention=args.iab,
        sign_convention=args.convention,
        truncation=args.truncation,
        reoptimize=getattr(args, "reoptimize", False),
    )


def cmd_sweep(args) -> int:
    families = [StateFamily.PASCS, StateFamily.COHERENT] if args.protocol == "both" else [StateFamily(args.protocol)]
    spec = build_spec(args, families)
    result = sweep_distance(spec, workers=args.workers)
    rows = []
    failed = False
    for c in result.curves:
        if c.error:
            failed = True
            say(f"error: {c.family.value} xi={fmt(c.excess_noise)}: {c.error}")
        rows.extend({**point_row(p), "protocol": c.family.value} for p in c.points)
        say(f"{c.family.value} alpha={fmt(c.alpha)} xi={fmt(c.excess_noise)}: "
            f"cutoff K>0 {fmt(c.cutoff_positive)} km, K>={spec.k_min:g} {fmt(c.cutoff_threshold)} km")
    cols = COLUMNS if len(families) == 1 else ("protocol",) + COLUMNS
    cutoffs = [
        {"protocol": c.family.value, "alpha": c.alpha, "excess_noise": c.excess_noise,
         "cutoff_positive_km": c.cutoff_positive, "cutoff_threshold_km": c.cutoff_threshold,
         "error": c.error}
        for c in result.curves
    ]
    emit(args, render(args, rows, cols, k_min=spec.k_min, cutoffs=cutoffs))
    return EXIT_INTERNAL if failed else EXIT_OK


def cmd_compare(args) -> int:
    families = [StateFamily.PASCS, StateFamily.COHERENT]
    spec = build_spec(args, families)
    comp = compare_protocols(spec, workers=args.workers)
    rows = []
    for c in comp.result.curves:
        rows.extend({**point_row(p), "protocol": c.family.value} for p in c.points)
    summary = []
    for cc in comp.comparisons:
        n_bad = sum(not f for f in cc.dominance)
        verdict = "PASCS >= coherent at all points" if cc.dominates else (
            f"PASCS < coherent at {n_bad} of {len(cc.dominance)} points")
        entry = {
            "excess_noise": cc.excess_noise,
            "alpha_pascs": cc.first.alpha,
            "alpha_coherent": cc.second.alpha,
            "cutoff_positive_pascs_km": cc.first.cutoff_positive,
            "cutoff_positive_coherent_km": cc.second.cutoff_positive,
            "gap_positive_km": cc.gap_positive,
            "cutoff_threshold_pascs_km": cc.first.cutoff_threshold,
            "cutoff_threshold_coherent_km": cc.second.cutoff_threshold,
            "gap_threshold_km": cc.gap_threshold,
            "verdict": verdict,
        }
        summary.append(entry)
        say(f"xi={fmt(cc.excess_noise)}: cutoff K>0 PASCS {fmt(cc.first.cutoff_positive)} km, "
            f"coherent {fmt(cc.second.cutoff_positive)} km (gap {fmt(cc.gap_positive)} km); "
            f"K>={spec.k_min:g} PASCS {fmt(cc.first.cutoff_threshold)} km, "
            f"coherent {fmt(cc.second.cutoff_threshold)} km; {verdict}")
    emit(args, render(args, rows, ("protocol",) + COLUMNS, k_min=spec.k_min, comparison=summary))
    return EXIT_OK


# -- self-test ---------------------------------------------------------------

def _check(name, fn, results):
    t0 = time.perf_counter()
    try:
        status, detail = fn()
    except Exception as exc:  # a crashing check is a failing check
        status, detail = "FAIL", f"{type(exc).__name__}: {exc}"
    results.append((name, status, detail, time.perf_counter() - t0))


def _random_physical_inputs(rng: np.random.Generator, n: int):
    for _ in range(n):
        v_a = rng.uniform(0.01, 5.0)
        z = rng.uniform(0.0, 1.0) * correlation_gauss(v_a)
        t = rng.uniform(1e-3, 1.0)
        xi = rng.uniform(0.0, 0.1)
        yield v_a, z, t, xi


def selftest_checks(args) -> list:
    trunc = args.truncation if args.truncation is not None else default_truncation()
    grid = [0.01, 0.03, 0.05, 0.1, 0.13, 0.2, 0.3, 0.5, 0.7, 1.0]
    results: list = []

    def truncation_adequacy():
        pascs_coefficients(args.alpha, trunc)
        coherent_coefficients(args.alpha, trunc)
        return "PASS", f"alpha={args.alpha:g} fits N={trunc}"

    def eigen_closed_vs_numeric():
        worst = 0.0
        for a in grid:
            num = spectral_numeric(ModulationEnsemble(StateFamily.PASCS, a, 4, trunc)).eigenvalues
            clo = eigenvalues_closed(a)
            worst = max(worst, max(abs(c - n) / n for c, n in zip(clo, num)))
        return ("PASS" if worst <= 1e-10 else "FAIL"), f"max rel diff {worst:.2e} (tol 1e-10)"

    def trace_and_sign():
        worst = 0.0
        for a in grid:
            for lam in (eigenvalues_closed(a),
                        spectral_numeric(ModulationEnsemble(StateFamily.PASCS, a, 4, trunc)).eigenvalues):
                if min(lam) < -1e-12:
                    return "FAIL", f"negative eigenvalue at alpha={a}"
                worst = max(worst, abs(sum(lam) - 1.0))
        return ("PASS" if worst <= 1e-10 else "FAIL"), f"max |trace-1| {worst:.2e}"

    def z_closed_vs_numeric():
        worst = 0.0
        for a in grid:
            if a < CANCELLATION_THRESHOLD:
                continue
            zn = correlation_numeric(spectral_numeric(ModulationEnsemble(StateFamily.PASCS, a, 4, trunc)))
            worst = max(worst, abs(correlation_z4_closed(a) - zn) / zn)
        return ("PASS" if worst <= 1e-8 else "FAIL"), f"max rel diff {worst:.2e} (tol 1e-8)"

    def holevo_vs_oracle():
        rng = np.random.default_rng(args.seed)
        worst = 0.0
        for v_a, z, t, xi in _random_physical_inputs(rng, args.samples):
            ch = ChannelParams(t, xi)
            cm = propagate(v_a, z, ch).full()
            worst = max(worst, abs(holevo_bound(v_a, z, t, xi).s_be - holevo_reverse_homodyne(cm)))
        return ("PASS" if worst <= 1e-8 else "FAIL"), f"{args.samples} samples, max abs diff {worst:.2e}"

    def sign_convention():
        v_a = modulation_variance_closed(DEFAULT_ALPHA[StateFamily.PASCS])
        if SignConvention(args.convention) is SignConvention.PAPER_LITERAL:
            gb = bob_variance(v_a, 1.0, 2 * v_a, SignConvention.PAPER_LITERAL)
            return "FLAG", (f"literal -T*xi: gamma_B < 1 whenever xi > V_A "
                            f"(alpha=0.13: xi > {v_a:.4f}; e.g. gamma_B={gb:.4f} at xi=2V_A, T=1)")
        return "PASS", "gamma_B >= 1 for all xi >= 0"

    def conditioning():
        cm = propagate(0.5, correlation_gauss(0.5), ChannelParams(1.0, 0.0))
        v = condition_on_homodyne(cm)[0, 0]
        nu = symplectic_eigenvalues(cm.full())
        ok = abs(v - 2.0 / 3.0) < 1e-12 and np.allclose(nu, 1.0)
        return ("PASS" if ok else "FAIL"), f"V_A|B={v:.12g} (expect 2/3), pure-state nu={nu.round(12)}"

    _check("truncation-adequacy", truncation_adequacy, results)
    _check("eigenvalues-closed-vs-numeric", eigen_closed_vs_numeric, results)
    _check("unit-trace-nonnegative", trace_and_sign, results)
    _check("z4-closed-vs-purification", z_closed_vs_numeric, results)
    _check("holevo-closed-vs-symplectic", holevo_vs_oracle, results)
    _check("homodyne-conditioning", conditioning, results)
    _check("sign-convention", sign_convention, results)
    return results


def cmd_selftest(args) -> int:
    results = selftest_checks(args)
    width = max(len(r[0]) for r in results)
    for name, status, detail, dt in results:
        print(f"{name:<{width}}  {status:<4}  {detail}  [{dt:.2f}s]")
    failed = [r[0] for r in results if r[1] == "FAIL"]
    if failed:
        say("selftest failed: " + ", ".join(failed))
        return EXIT_INTERNAL
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--xi", default="0.002", help="excess noise, comma-separated list allowed")
    common.add_argument("--beta", type=float, default=1.0, help="reconciliation efficiency")
    common.add_argument("--eta-det", type=float, default=1.0, help="detector efficiency")
    common.add_argument("--loss", type=float, default=DEFAULT_LOSS_DB_PER_KM, help="fiber loss in dB/km")
    common.add_argument("--k-min", type=float, default=DEFAULT_K_MIN, help="rate floor for range reporting")
    common.add_argument("--convention", choices=[c.value for c in SignConvention], default="standard")
    common.add_argument("--iab", choices=[c.value for c in MutualInfoConvention], default="eb",
                        help="mutual-information convention")
    common.add_argument("--truncation", type=int, default=None,
                        help=f"Fock cutoff (default: ${TRUNCATION_ENV} or 60)")
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("--output", "-o", default=None, help="output file (default stdout)")
    common.add_argument("--workers", type=int, default=1, help="threads for sweep curves")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="pascs-qkd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", parents=[common], help="key rate at given distances")
    p.add_argument("--protocol", choices=["pascs", "coherent"], default="pascs")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--distance", default="0", help="km, NUMBER or START:STOP:STEP")

    p = sub.add_parser("optimize", parents=[common], help="optimal amplitude")
    p.add_argument("--protocol", choices=["pascs", "coherent"], default="pascs")
    p.add_argument("--distance", default="100")
    p.add_argument("--bounds", default="0.01:1.0", help="alpha search interval LO:HI")
    p.add_argument("--tol", type=float, default=1e-3)

    p = sub.add_parser("sweep", parents=[common], help="key rate versus distance")
    p.add_argument("--protocol", choices=["pascs", "coherent", "both"], default="pascs")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--distance", default="0:450:1")
    p.add_argument("--reoptimize", action="store_true", help="optimize alpha per curve")

    p = sub.add_parser("compare", parents=[common], help="PASCS versus coherent states")
    p.add_argument("--alpha-pascs", type=float, default=None)
    p.add_argument("--alpha-coherent", type=float, default=None)
    p.add_argument("--distance", default="0:450:1")
    p.add_argument("--reoptimize", action="store_true")

    p = sub.add_parser("selftest", parents=[common], help="cross-path consistency checks")
    p.add_argument("--alpha", type=float, default=1.0, help="amplitude for the truncation check")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=12345)
    return parser


def validate(args) -> None:
    if args.truncation is not None and args.truncation < 0:
        raise UsageError("--truncation must be >= 0")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    for name in ("beta", "eta_det", "loss", "k_min"):
        if not math.isfinite(getattr(args, name)):
            raise UsageError(f"--{name.replace('_', '-')} must be finite")
    DetectionParams(args.beta, args.eta_det)
    if args.loss <= 0:
        raise UsageError("--loss must be > 0")
    if args.k_min <= 0:
        raise UsageError("--k-min must be > 0")
    xis = parse_list(args.xi)
    if any(x < 0 for x in xis):
        raise UsageError("--xi must be >= 0")
    if hasattr(args, "distance"):
        start, stop, step = parse_range(args.distance)
        if start < 0 or stop < start or step <= 0:
            raise UsageError(f"bad distance range {args.distance!r}")
    if getattr(args, "alpha", None) is not None and not (0 < args.alpha <= 1.5):
        raise UsageError("--alpha must lie in (0, 1.5]")
    if args.command == "optimize":
        try:
            lo, hi = (float(x) for x in args.bounds.split(":"))
        except ValueError:
            raise UsageError(f"bad --bounds {args.bounds!r}") from None
        if not (0 < lo < hi <= 1.5):
            raise UsageError("--bounds must satisfy 0 < LO < HI <= 1.5")
    default_truncation()


COMMANDS = {
    "rate": cmd_rate,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "selftest": cmd_selftest,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version, or a usage error
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        validate(args)
    except ValueError as exc:
        say(f"error: {exc}")
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except NoSecureKeyError as exc:
        say(f"no secure operating point: {exc}")
        return EXIT_INSECURE
    except TruncationError as exc:
        say(f"error: {exc}")
        return EXIT_INTERNAL
    except Exception as exc:
        log.exception("internal error")
        say(f"internal error: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
