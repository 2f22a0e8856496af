"""Command-line entry point: ``causal-rdf <command> <problem.json> ...``.

Exit codes: 0 success (including flagged non-convergence), 2 validation
error, 3 I/O error.  Set ``CAUSAL_RDF_LOG`` (e.g. ``DEBUG``) for logging.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys

import numpy as np

from .directed import (
    LN2,
    directed_information,
    mutual_information,
    optimal_r_kernel,
    variational_A,
    variational_B,
)
from .oracle import OracleSizeError, classical_blahut, grid_lagrangian_min
from .prob import (
    KernelKind,
    causal_product,
    condition_joint,
    is_feedback_free,
    kl_divergence,
    marginals,
    random_family,
    random_pmf_rows,
)
from .problem import ProblemError, ProblemFile
from .rdf import BaaConfig, baa_run, curve_shape_violations, is_convex_curve, rd_curve

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 2, 3
CSV_HEADER = ["s", "D", "R_nats_per_letter", "R_bits_per_letter", "iterations", "residual", "converged"]

log = logging.getLogger("causal_rdf")


def _emit(text: str, out_path: str | None) -> None:
    print(text)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")


def cmd_dirinfo(pf: ProblemFile, out: str | None = None) -> int:
    p, q = pf.build_source(), pf.build_channel()
    rep = directed_information(p, q)
    mi = mutual_information(causal_product(p, q))
    lines = [
        f"I(X^n -> Y^n) = {rep.value_nats:.6f} nats = {rep.value_bits:.6f} bits",
        f"I(X^n ; Y^n)  = {mi:.6f} nats = {mi / LN2:.6f} bits",
        "per-stage I(X^i ; Y_i | Y^{i-1}):",
    ]
    for i, v in enumerate(rep.per_stage):
        lines.append(f"  stage {i}: {v:.6f} nats = {v / LN2:.6f} bits")
    lines.append(f"chain-rule residual: {rep.chain_check_residual:.3e}")
    _emit("\n".join(lines), out)
    return EXIT_OK


def check_variational(pf: ProblemFile, trials: int, seed: int) -> dict[str, float]:
    """Random-draw check of both variational characterisations on the problem instance."""
    p, q = pf.build_source(), pf.build_channel()
    rng = np.random.default_rng(seed)
    j = causal_product(p, q)
    di = directed_information(p, q).value_nats
    _, nu = marginals(j)
    worst_a, worst_a_gap, worst_b, worst_b_gap = math.inf, 0.0, math.inf, 0.0
    for _ in range(trials):
        nb = random_pmf_rows((nu.mass.size,), rng)
        gap = variational_A(p, q, nb) - di
        worst_a = min(worst_a, gap)
        worst_a_gap = max(worst_a_gap, abs(gap - kl_divergence(nu.mass, nb)))
        s = random_family(KernelKind.S_KIND, p.x_indexer, p.y_indexer, rng)
        r = random_family(KernelKind.R_KIND, p.x_indexer, p.y_indexer, rng)
        gap_b = di - variational_B(p, q, s, r)
        worst_b = min(worst_b, gap_b)
        sr = s.product_tensor() * r.product_tensor()
        worst_b_gap = max(worst_b_gap, abs(gap_b - kl_divergence(j.tensor, sr)))
    s_star = condition_joint(j, KernelKind.S_KIND)
    r_star = condition_joint(j, KernelKind.R_KIND)
    r_opt = optimal_r_kernel(p, q)
    r_match = 0.0
    for a, b, z in zip(r_opt.stages, r_star.stages, r_star.zero_rows):
        if (~z).any():
            r_match = max(r_match, float(np.abs(a - b)[~z].max()))
    return {
        "directed_information": di,
        "partA_min_gap": worst_a,
        "partA_gap_vs_divergence": worst_a_gap,
        "partA_achiever_residual": abs(variational_A(p, q, nu) - di),
        "partB_min_gap": worst_b,
        "partB_gap_vs_divergence": worst_b_gap,
        "partB_achiever_residual": abs(variational_B(p, q, s_star, r_star) - di),
        "r_kernel_mismatch": r_match,
    }


def cmd_check_variational(pf: ProblemFile, trials: int, seed: int) -> int:
    res = check_variational(pf, trials, seed)
    ok = (
        res["partA_min_gap"] >= -1e-12
        and res["partB_min_gap"] >= -1e-12
        and res["partA_achiever_residual"] <= 1e-10
        and res["partB_achiever_residual"] <= 1e-10
        and res["r_kernel_mismatch"] <= 1e-12
    )
    print(f"trials: {trials}  seed: {seed}")
    for k, v in res.items():
        print(f"{k}: {v:.6e}")
    print("PASS" if ok else "FAIL")
    return EXIT_OK


def format_curve_csv(points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for pt in points:
        w.writerow([
            f"{pt.s:.12f}",
            f"{pt.D_s:.12f}",
            f"{pt.R_per_letter:.12f}",
            f"{pt.R_bits_per_letter:.12f}",
            pt.iterations,
            f"{pt.residual:.12f}",
            "true" if pt.converged else "false",
        ])
    return buf.getvalue()


def cmd_rdf_curve(pf: ProblemFile, out: str | None, warm_start: bool, parallel: bool) -> int:
    if not pf.s_grid:
        raise ProblemError("s_grid", "rdf-curve needs a non-empty slope grid")
    src, d = pf.build_source(), pf.build_distortion()
    if not is_feedback_free(src):
        raise ProblemError("source", "rate-distortion needs a source without feedback")
    grid = sorted(pf.s_grid)
    points = rd_curve(src, d, grid, pf.baa_config(), warm_start=warm_start, parallel=parallel)
    text = format_curve_csv(points)
    out = out or pf.output.get("csv")
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    bad = [pt.s for pt in points if not pt.converged]
    if bad:
        print(f"warning: {len(bad)} point(s) did not converge: {bad}", file=sys.stderr)
    first, last = points[0], points[-1]
    print(f"points: {len(points)}", file=sys.stderr if not out else sys.stdout)
    summary = [
        f"first: s={first.s:.6f} D={first.D_s:.6f} R={first.R_per_letter:.6f} nats/letter",
        f"last:  s={last.s:.6f} D={last.D_s:.6f} R={last.R_per_letter:.6f} nats/letter",
        f"convex: {'true' if is_convex_curve(points) else 'false'}",
    ]
    viol = curve_shape_violations(points)
    summary.append("shape violations: " + ", ".join(f"{k}={v:.2e}" for k, v in viol.items()))
    print("\n".join(summary), file=sys.stderr if not out else sys.stdout)
    return EXIT_OK


def cmd_oracle_compare(pf: ProblemFile, step: float) -> int:
    src, d = pf.build_source(), pf.build_distortion()
    if not pf.s_grid:
        raise ProblemError("s_grid", "oracle-compare needs at least one slope")
    cfg = pf.baa_config()
    ok = True
    iid = _iid_letter(pf)
    for s in sorted(pf.s_grid):
        try:
            orc = grid_lagrangian_min(src, d, s, step)
        except OracleSizeError as exc:
            print(f"oracle limit: {exc}")
            return EXIT_VALIDATION
        trace = baa_run(src, d, s, cfg)
        baa_obj = trace.objectives[-1]
        gap = baa_obj - orc.value_nats
        passed = abs(gap) <= 3 * step
        ok &= passed
        print(f"s={s:.6f} baa={baa_obj:.9f} grid={orc.value_nats:.9f} gap={gap:.3e} "
              f"bound={3 * step:.3e} {'PASS' if passed else 'FAIL'}")
        if iid is not None:
            cb = classical_blahut(iid, d.rho, s)
            rate = (baa_obj + s * (pf.horizon + 1) * trace.iterates[-1].distortion) / (pf.horizon + 1)
            g2 = abs(rate - cb.value_nats)
            ok &= g2 <= 1e-8
            print(f"  classical Blahut-Arimoto: R={cb.value_nats:.12f} baa R={rate:.12f} gap={g2:.3e}")
    print("PASS" if ok else "FAIL")
    return EXIT_OK


def _iid_letter(pf: ProblemFile):
    if pf.source.get("type") == "iid":
        return np.asarray(pf.source["pmf"], dtype=float)
    return None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="causal-rdf", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("dirinfo", help="directed and mutual information of a source/channel pair")
    a.add_argument("file")
    a.add_argument("--out", help="also write the report here")

    a = sub.add_parser("check-variational", help="random-draw check of both variational equalities")
    a.add_argument("file")
    a.add_argument("--trials", type=int, default=100)
    a.add_argument("--seed", type=int, default=0)

    a = sub.add_parser("rdf-curve", help="sweep the slope grid and write the R(D) curve as CSV")
    a.add_argument("file")
    a.add_argument("--out", help="CSV path (default: output.csv in the problem file, else stdout)")
    a.add_argument("--no-warm-start", action="store_true")
    a.add_argument("--parallel", action="store_true", help="needs --no-warm-start")

    a = sub.add_parser("oracle-compare", help="compare BAA against the brute-force grid oracle")
    a.add_argument("file")
    a.add_argument("--step", type=float, default=0.01)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("CAUSAL_RDF_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        pf = ProblemFile.load(args.file)
        if args.command == "dirinfo":
            return cmd_dirinfo(pf, args.out)
        if args.command == "check-variational":
            return cmd_check_variational(pf, args.trials, args.seed)
        if args.command == "rdf-curve":
            if args.parallel and not args.no_warm_start:
                raise ProblemError("--parallel", "parallel evaluation requires --no-warm-start")
            return cmd_rdf_curve(pf, args.out, not args.no_warm_start, args.parallel)
        if args.command == "oracle-compare":
            return cmd_oracle_compare(pf, args.step)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
