"""Command-line driver: one scenario file, one command, artifact files.

Exit codes are a stable contract: 0 success (or property verified),
1 property not certified, 2 input error, 3 numerical failure.  Engine
errors print a single machine-parsable line `error:<module>:<kind> ...`.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .approx import BlockStructure, decompose, overapproximate_box
from .discretize import discretize, is_zero_set
from .emit import (
    tube_has_polygons,
    write_tube_csv,
    write_tube_poly,
    write_tube_svg,
)
from .errors import ContainmentError, EngineError, InputError
from .linalg import write_matrix_market
from .oracle import (
    decomposed_image,
    decomposed_map_error_bound,
    hausdorff_estimate,
    make_error_report,
    reach_nondecomposed,
    recurrence_error_bound,
)
from .reach import reach_decomposed, reach_decomposed_varying, check_property
from .scenario import parse_scenario, parse_scheme
from .sets import CartesianProduct, Hyperrectangle, LinearMap, Singleton

__all__ = ["main"]


def _discretized(sc):
    return discretize(sc.continuous_system(), sc.delta, sc.model)


def _tube(dsys, sc, bs, tracked, lazy=False):
    if dsys.constant_input:
        return reach_decomposed(dsys, sc.N, bs, tracked, sc.scheme, lazy=lazy)
    return reach_decomposed_varying(dsys, sc.N, bs, tracked, sc.scheme,
                                    lazy=lazy)


def _write_v_bounds(dsys, path):
    with open(path, "w") as fh:
        if dsys.constant_input:
            fh.write("var,lo,hi\n")
            box = overapproximate_box(dsys.v)
            for j, (lo, hi) in enumerate(zip(box.low, box.high)):
                fh.write(f"{j + 1},{float(lo)!r},{float(hi)!r}\n")
        else:
            fh.write("k,var,lo,hi\n")
            for k, vk in enumerate(dsys.v):
                box = overapproximate_box(vk)
                for j, (lo, hi) in enumerate(zip(box.low, box.high)):
                    fh.write(f"{k},{j + 1},{float(lo)!r},{float(hi)!r}\n")


def _cmd_discretize(sc, out, args):
    dsys = _discretized(sc)
    write_matrix_market(out / "phi.mtx", dsys.phi,
                        comment=f"transition matrix of {sc.name}, "
                                f"delta={sc.delta}, model={sc.model}")
    _write_v_bounds(dsys, out / "v_bounds.csv")
    print(f"discretized n={dsys.n} model={dsys.model} delta={dsys.delta} "
          f"-> {out}")
    return 0


def _cmd_reach(sc, out, args):
    dsys = _discretized(sc)
    bs = BlockStructure(dsys.n)
    tracked = sc.resolve_blocks(bs)
    tube = _tube(dsys, sc, bs, tracked)
    written = []
    if args.format in ("csv", "both"):
        write_tube_csv(tube, out / "tube.csv")
        written.append("tube.csv")
        if tube_has_polygons(tube):
            write_tube_poly(tube, out / "tube.poly")
            written.append("tube.poly")
    if args.format in ("svg", "both"):
        for i in tracked:
            write_tube_svg(tube, i, out / f"block_{i}.svg")
            written.append(f"block_{i}.svg")
    blocks = ",".join(str(i) for i in tracked)
    print(f"tube N={sc.N} blocks={blocks} -> {', '.join(written)}")
    return 0


def _cmd_check(sc, out, args):
    if sc.prop is None:
        raise InputError("scenario has no property to check", module="cli")
    dsys = _discretized(sc)
    bs = BlockStructure(dsys.n)
    res = check_property(dsys, sc.prop, sc.N, bs, sc.scheme)
    if res.verified:
        print(f"verified N={sc.N}")
        return 0
    print(f"violated k={res.step} value={res.value:.9g} atom={res.atom}")
    return 1


def _compare_directions(sc, bs, tracked):
    coords = np.concatenate([np.arange(*bs.blocks[i]) for i in tracked])
    eye = np.zeros((2 * len(coords), bs.n))
    for r, c in enumerate(coords):
        eye[2 * r, c] = 1.0
        eye[2 * r + 1, c] = -1.0
    rng = np.random.default_rng(sc.seed)
    R = rng.standard_normal((64, bs.n))
    mask = np.zeros(bs.n, dtype=bool)
    mask[coords] = True
    R[:, ~mask] = 0.0
    norms = np.abs(R).sum(axis=1)
    R = R[norms > 1e-12] / norms[norms > 1e-12, None]
    return np.vstack([eye, R]), len(eye)


def _cmd_compare(sc, out, args):
    dsys = _discretized(sc)
    bs = BlockStructure(dsys.n)
    tracked = sc.resolve_blocks(bs)
    tube = _tube(dsys, sc, bs, tracked)
    D, n_coord = _compare_directions(sc, bs, tracked)
    oracle_vals = reach_nondecomposed(dsys, sc.N, D)
    max_gap = 0.0
    for k in range(sc.N):
        diff = tube.support_batch(k, D) - oracle_vals[k]
        if diff.min() < -1e-9:
            raise ContainmentError(
                f"decomposed support below oracle by {-diff.min():.3e} "
                f"at step {k}", module="cli")
        gap = float(diff[:n_coord].max())
        haus = float(np.clip(diff, 0.0, None).max())
        max_gap = max(max_gap, gap)
        print(f"k={k} gap={gap:.6e} hausdorff={haus:.6e}")
    print(f"max_gap={max_gap:.6e}")
    return 0


def _decomposition_error(X, blocks):
    """Sampled distance between a set and its decomposition (zero for the
    exactly decomposable cases)."""
    if isinstance(X, (Hyperrectangle, Singleton)):
        return 0.0
    return hausdorff_estimate(X, CartesianProduct(blocks), p=np.inf, count=512)


def _cmd_bounds(sc, out, args):
    dsys = _discretized(sc)
    if not dsys.constant_input:
        raise InputError("bounds needs a constant input set", module="cli")
    bs = BlockStructure(dsys.n)
    x_blocks = decompose(dsys.x_init, bs)
    eps_x = _decomposition_error(dsys.x_init, x_blocks)
    if is_zero_set(dsys.v):
        v_blocks, eps_v = None, 0.0
    else:
        v_blocks = decompose(dsys.v, bs)
        eps_v = _decomposition_error(dsys.v, v_blocks)
    report = make_error_report(dsys.phi, x_blocks, v_blocks,
                               eps_x=eps_x, eps_v=eps_v)
    print(f"b={report.b} K={report.K:.6g} alpha_phi={report.alpha_phi:.6g} "
          f"eps_x={eps_x:.3e} eps_v={eps_v:.3e}")

    map_bound = decomposed_map_error_bound(dsys.phi, x_blocks, eps_x)
    exact_image = LinearMap(dsys.phi.data, dsys.x_init)
    dec_image = CartesianProduct(decomposed_image(dsys.phi, x_blocks, bs))
    map_gap = hausdorff_estimate(exact_image, dec_image, p=np.inf, count=512)
    print(f"map bound={map_bound:.6e} gap={map_gap:.6e}")

    tube = _tube(dsys, sc, bs, tuple(range(bs.b)), lazy=True)
    D, _ = _compare_directions(sc, bs, tuple(range(bs.b)))
    oracle_vals = reach_nondecomposed(dsys, sc.N, D)
    for k in range(sc.N):
        diff = tube.support_batch(k, D) - oracle_vals[k]
        gap = float(np.clip(diff, 0.0, None).max())
        print(f"k={k} bound={recurrence_error_bound(report, k):.6e} "
              f"gap={gap:.6e}")
    return 0


_DISPATCH = {
    "discretize": _cmd_discretize,
    "reach": _cmd_reach,
    "check": _cmd_check,
    "compare": _cmd_compare,
    "bounds": _cmd_bounds,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="reachdec",
        description="Reach-tube computation for linear systems by "
                    "decomposition into two-dimensional blocks.")
    parser.add_argument("command", choices=sorted(_DISPATCH))
    parser.add_argument("--scenario", required=True,
                        help="path to a scenario JSON file")
    parser.add_argument("--out", default=".",
                        help="directory for output artifacts")
    parser.add_argument("--format", choices=["csv", "svg", "both"],
                        default="csv", help="tube output format")
    parser.add_argument("--scheme", default=None,
                        help="override the scenario scheme: box or eps:<value>")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")
    args = parser.parse_args(argv)
    try:
        sc = parse_scenario(args.scenario)
        if args.scheme is not None:
            sc.scheme = parse_scheme(args.scheme, "--scheme")
        if args.seed is not None:
            if args.seed < 0:
                raise InputError(f"--seed must be nonnegative, got "
                                 f"{args.seed}", module="cli")
            sc.seed = args.seed
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return _DISPATCH[args.command](sc, out, args)
    except EngineError as e:
        print(f"{e.tag()} {e}")
        return 2 if e.category == "input" else 3
    except Exception as e:  # pragma: no cover - defensive
        print(f"error:cli:internal {e}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
