"""Batch command-line front end.

Verbs: synth, fit, sample, eval-stdf, eval-lambda, gof, transform. All
output files carry a comment line with the tool version, the command line
and the seed, so identical invocations are byte-identical. Errors are
reported as one-line JSON on stderr with exit code 1 (bad input),
2 (numeric failure) or 3 (configuration).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__, core, metrics, parametric, pipeline, sampler
from .errors import ArchimaxError, ConfigError, InvalidInputError, NumericError
from .radial_infer import phi_inverse_numeric_batch, williamson, williamson_deriv
from .stdf_infer import cfg_estimate


def _header(args: argparse.Namespace, seed) -> str:
    argv = " ".join(sys.argv[1:]) if sys.argv[1:] else args.verb
    return f"archimax {__version__} | cmd: {argv} | seed: {seed}"


def _open_out(path: str):
    if path == "-":
        return sys.stdout
    return open(path, "w", encoding="utf-8")


def _open_in(path: str):
    if path == "-":
        return sys.stdin
    return open(path, "r", encoding="utf-8")


def _write_rows(path, names, values, header):
    handle = _open_out(path)
    try:
        core.write_csv(handle, names, values, header_comment=header)
    finally:
        if handle is not sys.stdout:
            handle.close()


def _read_matrix(path):
    handle = _open_in(path)
    try:
        return core.read_csv(handle)
    finally:
        if handle is not sys.stdin:
            handle.close()


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {text!r}") from exc


def _load_model(path: str) -> sampler.ArchimaxModel:
    with open(path, "r", encoding="utf-8") as fh:
        return sampler.ArchimaxModel.from_json(fh.read())


def _model_stdf_evaluator(model: sampler.ArchimaxModel):
    spectral = model.spectral
    if isinstance(spectral, sampler.UniformSimplexSpectral):
        return lambda X: np.atleast_2d(np.asarray(X, float)).sum(axis=1)
    pool = spectral.eval_pool(0)
    from .stdf_infer import empirical_stdf

    return lambda X: np.atleast_1d(empirical_stdf(pool, X))


def _model_generator_callables(model: sampler.ArchimaxModel):
    radial = model.radial
    if isinstance(radial, sampler.ParametricRadial):
        gen = radial.generator
        return (lambda x: parametric.phi(gen, x),
                lambda x: parametric.phi_prime(gen, x),
                lambda w: parametric.phi_inverse(gen, w))
    if hasattr(radial, "support"):
        return radial.phi, radial.phi_prime, radial.phi_inverse
    pool = radial.eval_pool(0)
    d = model.d
    phi = lambda x: williamson(pool, x, d)
    return (phi,
            lambda x: williamson_deriv(pool, x, d),
            lambda w: phi_inverse_numeric_batch(phi, np.asarray(w, float)))


def _cmd_synth(args) -> int:
    nsd = None
    if args.nsd_alpha:
        nsd = parametric.NsdStdf(tuple(_parse_floats(args.nsd_alpha)), args.rho)
    theta = args.theta
    if theta is None and args.tau is not None:
        theta = parametric.theta_from_tau(args.family, args.tau)
    if theta is None:
        raise ConfigError("synth needs --theta or --tau")
    result = sampler.synth_dataset(args.family, theta, nsd, args.n, args.seed,
                                   d=args.d)
    names = [f"u{j + 1}" for j in range(result.data.values.shape[1])]
    _write_rows(args.out, names, result.data.values, _header(args, args.seed))
    if args.truth_out:
        doc = {
            "kind": "synth-truth",
            "family": result.generator.family,
            "theta": result.generator.theta,
            "nsd": None if result.nsd is None else
            {"alpha": list(result.nsd.alpha), "rho": result.nsd.rho},
            "n": args.n,
            "seed": args.seed,
        }
        with open(args.truth_out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
    return 0


def _cmd_fit(args) -> int:
    _, data = _read_matrix(args.input)
    cfg_doc = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg_doc = json.load(fh)
    cfg_doc["seed"] = args.seed
    overrides = {
        "n_r": args.n_r, "n_z": args.n_z,
        "max_alternations": args.max_alternations,
        "cvm_tolerance": args.cvm_tolerance,
    }
    for key, val in overrides.items():
        if val is not None:
            cfg_doc[key] = val
    if args.block_k is not None:
        cfg_doc.setdefault("block", {})["forced_k"] = args.block_k
    if args.stdf_iters is not None:
        cfg_doc.setdefault("stdf_train", {})["max_iters"] = args.stdf_iters
    if args.gen_iters is not None:
        cfg_doc.setdefault("gen_train", {})["max_iters"] = args.gen_iters
    config = pipeline.FitConfig.from_dict(cfg_doc)
    result = pipeline.fit(data, config)
    with open(args.model_out, "w", encoding="utf-8") as fh:
        fh.write(result.model.to_json())
    if args.diagnostics_out:
        with open(args.diagnostics_out, "w", encoding="utf-8") as fh:
            for entry in result.diagnostics:
                fh.write(json.dumps(entry) + "\n")
    return 0


def _cmd_sample(args) -> int:
    model = _load_model(args.model)
    values = sampler.sample_archimax(model, args.n, args.seed)
    names = [f"u{j + 1}" for j in range(model.d)]
    _write_rows(args.out, names, values, _header(args, args.seed))
    if args.svg:
        _write_scatter_svg(args.svg, values)
    return 0


def _cmd_eval_stdf(args) -> int:
    model = _load_model(args.model)
    with open(args.truth, "r", encoding="utf-8") as fh:
        truth_doc = json.load(fh)
    if not truth_doc.get("nsd"):
        raise ConfigError("truth document carries no NSD stdf")
    nsd = parametric.NsdStdf(tuple(truth_doc["nsd"]["alpha"]),
                             truth_doc["nsd"]["rho"])
    est = _model_stdf_evaluator(model)
    true = lambda X: parametric.nsd_stdf_batch(nsd, np.atleast_2d(X), args.seed)
    value = metrics.irae(true, est, model.d, mc=args.mc, seed=args.seed)
    _write_rows(args.out, ["metric", "value"],
                np.array([[0.0, value]]), _header(args, args.seed))
    print(f"IRAE {value:.6f}")
    return 0


def _cmd_eval_lambda(args) -> int:
    if args.model:
        model = _load_model(args.model)
        phi, phi_deriv, phi_inv = _model_generator_callables(model)
    else:
        if not args.family or args.theta is None:
            raise ConfigError("eval-lambda needs --model or --family/--theta")
        gen = parametric.ArchGeneratorFamily(args.family, args.theta)
        phi_deriv = lambda x: parametric.phi_prime(gen, x)
        phi_inv = lambda w: parametric.phi_inverse(gen, w)
    grid = metrics.default_lambda_grid(args.grid_points)
    curve = metrics.lambda_map(None, phi_deriv, phi_inv, grid, n=args.n)
    cols = [curve.grid, curve.values]
    names = ["w", "lambda"]
    if curve.band is not None:
        cols.append(curve.band)
        names.append("variance")
    _write_rows(args.out, names, np.column_stack(cols), _header(args, args.seed))
    if args.svg:
        _write_lambda_svg(args.svg, curve)
    return 0


def _cmd_gof(args) -> int:
    _, a = _read_matrix(args.a)
    _, b = _read_matrix(args.b)
    value = metrics.cvm(a, b, mc=args.mc, seed=args.seed)
    print(f"CvM {value:.8e}")
    if args.out:
        _write_rows(args.out, ["metric", "value"],
                    np.array([[0.0, value]]), _header(args, args.seed))
    return 0


def _cmd_transform(args) -> int:
    names, data = _read_matrix(args.input)
    if args.mode == "pseudo":
        out = core.rank_normalize(data).values
    elif args.mode == "blockmax":
        if args.k is None:
            raise ConfigError("blockmax transform needs --k")
        out = core.block_maxima(data, args.k).values
    else:
        raise ConfigError(f"unknown transform mode {args.mode!r}")
    _write_rows(args.out, names, out, _header(args, args.seed))
    return 0


def _write_scatter_svg(path: str, values: np.ndarray, cell: int = 110,
                       max_points: int = 500) -> None:
    """Scatter-matrix SVG of unit-hypercube samples, one panel per pair."""
    values = np.asarray(values, dtype=float)
    d = values.shape[1]
    pts = values[:max_points]
    pad = 6
    size = d * cell + 2 * pad
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for row in range(d):
        for col in range(d):
            x0 = pad + col * cell
            y0 = pad + row * cell
            parts.append(f'<rect x="{x0}" y="{y0}" width="{cell}" height="{cell}" '
                         'fill="none" stroke="#ccc"/>')
            if row == col:
                parts.append(f'<text x="{x0 + cell / 2}" y="{y0 + cell / 2}" '
                             'font-size="11" text-anchor="middle">'
                             f'u{row + 1}</text>')
                continue
            for px, py in zip(pts[:, col], pts[:, row]):
                cx = x0 + px * (cell - 4) + 2
                cy = y0 + (1.0 - py) * (cell - 4) + 2
                parts.append(f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="1" '
                             'fill="#1f4e9c"/>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def _write_lambda_svg(path: str, curve: metrics.LambdaCurve,
                      width: int = 480, height: int = 320) -> None:
    """Self-contained SVG rendering of a lambda curve with optional band."""
    pad = 40
    lo = float(min(curve.values.min(), -0.4))
    hi = 0.02

    def sx(w):
        return pad + (width - 2 * pad) * w

    def sy(v):
        return height - pad - (height - 2 * pad) * (v - lo) / (hi - lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{sy(0)}" x2="{width - pad}" y2="{sy(0)}" '
        'stroke="#999" stroke-dasharray="4 3"/>',
    ]
    if curve.band is not None:
        sd = np.sqrt(curve.band)
        upper = [f"{sx(w)},{sy(v + 2 * s)}" for w, v, s in
                 zip(curve.grid, curve.values, sd)]
        lower = [f"{sx(w)},{sy(v - 2 * s)}" for w, v, s in
                 zip(curve.grid[::-1], curve.values[::-1], sd[::-1])]
        parts.append('<polygon points="' + " ".join(upper + lower)
                     + '" fill="#cfe2ff" stroke="none"/>')
    pts = " ".join(f"{sx(w)},{sy(v)}" for w, v in zip(curve.grid, curve.values))
    parts.append(f'<polyline points="{pts}" fill="none" stroke="#1f4e9c" '
                 'stroke-width="1.5"/>')
    parts.append(f'<text x="{width / 2}" y="{height - 8}" font-size="12" '
                 'text-anchor="middle">w</text>')
    parts.append('</svg>')
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="archimax",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=1,
                        help="internal parallelism (1 keeps runs deterministic)")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("synth", help="generate a ground-truth dataset")
    p.add_argument("--family", required=True)
    p.add_argument("--theta", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--nsd-alpha", default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default="-")
    p.add_argument("--truth-out", default=None)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("fit", help="fit an Archimax model to CSV data")
    p.add_argument("--input", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--diagnostics-out", default=None)
    p.add_argument("--n-r", type=int, default=None)
    p.add_argument("--n-z", type=int, default=None)
    p.add_argument("--block-k", type=int, default=None)
    p.add_argument("--max-alternations", type=int, default=None)
    p.add_argument("--cvm-tolerance", type=float, default=None)
    p.add_argument("--stdf-iters", type=int, default=None)
    p.add_argument("--gen-iters", type=int, default=None)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("sample", help="sample a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default="-")
    p.add_argument("--svg", default=None)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("eval-stdf", help="IRAE of a model against NSD truth")
    p.add_argument("--model", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--mc", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_eval_stdf)

    p = sub.add_parser("eval-lambda", help="lambda curve of a generator")
    p.add_argument("--model", default=None)
    p.add_argument("--family", default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--grid-points", type=int, default=99)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.add_argument("--svg", default=None)
    p.set_defaults(func=_cmd_eval_lambda)

    p = sub.add_parser("gof", help="CvM distance between two sample files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--mc", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_gof)

    p = sub.add_parser("transform", help="pseudo-observations or block maxima")
    p.add_argument("--input", required=True)
    p.add_argument("--mode", choices=("pseudo", "blockmax"), required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_transform)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _emit_error(exc)
        return 3
    except InvalidInputError as exc:
        _emit_error(exc)
        return 1
    except NumericError as exc:
        _emit_error(exc)
        return 2
    except FileNotFoundError as exc:
        _emit_error(InvalidInputError(str(exc)))
        return 1
    except ArchimaxError as exc:
        _emit_error(exc)
        return 2


def _emit_error(exc: Exception) -> None:
    doc = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(doc), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
