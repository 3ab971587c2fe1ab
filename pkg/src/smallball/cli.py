"""Command-line front end: one command per invocation, one table out.

    smallball estimate --spectrum poly2.json --config grid.json --out est.csv

The config is a JSON object with the command's parameters (and optionally
the spectrum descriptor under "spectrum"). Every output file embeds the
resolved config and the tool version. Exit codes: 0 success, 2 bad
configuration, 3 computation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Any, Callable

from . import __version__
from . import asymptotics, gamma_class, inversion, kernel_stats, oracle, series
from .errors import ConfigError, SmallBallError
from .spectrum import EigenSpectrum, build_spectrum

EXIT_CONFIG = 2
EXIT_COMPUTE = 3

COMMANDS = (
    "mu",
    "psi",
    "I",
    "invert",
    "rho",
    "estimate",
    "oracle",
    "gamma-check",
    "self-neglect",
    "aux-estimate",
    "reconstruct",
    "repr2",
    "kernel",
)


# function sources


def _need(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing required key {key!r}")
    return cfg[key]


def _grid(cfg: dict, key: str, sort: bool = True) -> list[float]:
    v = _need(cfg, key)
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{key!r} must be a non-empty list")
    try:
        vals = [float(x) for x in v]
    except (TypeError, ValueError):
        raise ConfigError(f"{key!r} must contain numbers") from None
    return sorted(vals) if sort else vals


def make_rho(desc: Any, spectrum: EigenSpectrum | None) -> inversion.AuxFunction:
    """rho from {"source": "spectrum" | "power" | "log" | "norm", ...}."""
    if not isinstance(desc, dict) or "source" not in desc:
        raise ConfigError("rho needs a {'source': ...} descriptor")
    src = desc["source"]
    if src == "spectrum":
        if spectrum is None:
            raise ConfigError("rho source 'spectrum' needs a spectrum")
        return inversion.rho_function(spectrum)
    if src == "power":
        M, m = float(desc.get("coef", 1.0)), float(_need(desc, "exponent"))
        return inversion.AuxFunction(lambda t: M * t**m, "closed-form", math.inf, f"{M:g} t^{m:g}")
    if src == "log":
        M = float(desc.get("coef", 1.0))
        return inversion.AuxFunction(lambda t: -M * t / math.log(t), "closed-form", 1.0, f"-{M:g} t/log t")
    if src == "constant":
        c = float(_need(desc, "value"))
        return inversion.AuxFunction(lambda t: c, "closed-form", math.inf, f"{c:g}")
    if src == "norm":
        return asymptotics.norm_transform(make_rho(_need(desc, "of"), spectrum))
    raise ConfigError(f"unknown rho source {src!r}")


def make_log_F(desc: Any, spectrum: EigenSpectrum | None) -> Callable[[float], float]:
    """log F from {"source": "dmz" | "dmz-norm" | "exp-inverse-power" | "power" | "closed-form", ...}."""
    if not isinstance(desc, dict) or "source" not in desc:
        raise ConfigError("F needs a {'source': ...} descriptor")
    src = desc["source"]
    if src in ("dmz", "dmz-norm"):
        if spectrum is None:
            raise ConfigError(f"F source {src!r} needs a spectrum")
        lf = asymptotics.dmz_log_function(spectrum)
        return lf if src == "dmz" else (lambda s: lf(s * s))
    if src == "exp-inverse-power":
        k = float(desc.get("k", 1.0))
        return lambda s: -(s ** (-k)) if s > 0.0 else -math.inf
    if src == "power":
        d, C = float(_need(desc, "exponent")), float(desc.get("coef", 1.0))
        return lambda s: math.log(C) + d * math.log(s) if s > 0.0 else -math.inf
    if src == "closed-form":
        fam = asymptotics.ClosedFormFamily(
            _need(desc, "kind"), desc.get("beta"), desc.get("alpha"), float(desc.get("C1", 1.0)), float(desc.get("C2", 1.0))
        )
        return lambda s: asymptotics.closed_form_log(fam, s)
    raise ConfigError(f"unknown F source {src!r}")


def make_phi(desc: Any, spectrum: EigenSpectrum | None) -> Callable[[float], float]:
    if isinstance(desc, dict) and desc.get("source") == "rho":
        return make_rho(_need(desc, "rho"), spectrum)
    return make_rho(desc, spectrum)


# commands; each returns (header, rows, summary dict)


def _series_cmd(fn):
    def run(cfg, s, args):
        rows = []
        for th in _grid(cfg, "theta"):
            v = fn(s, th)
            rows.append([th, v.value, v.tail_error, v.terms_used])
        return ["theta", "value", "tail_error", "terms_used"], rows, {"points": len(rows)}

    return run


def cmd_invert(cfg, s, args):
    rows = []
    for e in _grid(cfg, "epsilon"):
        sol = inversion.invert_mu(s, e, cfg.get("tol"))
        rows.append([e, sol.theta, sol.residual, sol.iterations])
    return ["epsilon", "theta", "residual", "iterations"], rows, {"points": len(rows)}


def cmd_rho(cfg, s, args):
    rows = []
    for x in _grid(cfg, "s"):
        r = inversion.eval_rho(s, x)
        rows.append([x, r, math.log(r)])
    return ["s", "rho", "log_rho"], rows, {"points": len(rows)}


def cmd_estimate(cfg, s, args):
    rows = []
    for e in _grid(cfg, "epsilon"):
        est = asymptotics.dmz_estimate(s, e, cfg.get("tol"))
        rows.append([e, est.theta, est.I_value, est.psi_value, est.value, est.log_value])
    return ["epsilon", "theta", "I", "psi", "value", "log_value"], rows, {"points": len(rows)}


def cmd_oracle(cfg, s, args):
    method = cfg.get("method", "mc-tilted")
    eps = _grid(cfg, "epsilon")
    N = int(cfg.get("N") or oracle.default_terms(s, eps[0]))
    rows, out = [], []
    if method == "cf-inversion":
        out = [oracle.cf_inversion_cdf(s, e, N, float(cfg.get("quad_tol", 1e-10))) for e in eps]
    elif method in ("mc-plain", "mc-tilted"):
        seed = args.seed if args.seed is not None else cfg.get("seed")
        if seed is None:
            raise ConfigError("stochastic command needs a seed (--seed or 'seed')")
        samples = int(_need(cfg, "samples"))
        if method == "mc-plain":
            g = oracle.mc_grid(s, eps, [], N, samples, int(seed), args.threads)
            out = [g.plain[e] for e in eps]
        else:
            g = oracle.mc_grid(s, [], eps, N, samples, int(seed), args.threads)
            out = [g.tilted[e] for e in eps]
        cfg["seed"] = int(seed)
    else:
        raise ConfigError(f"unknown oracle method {method!r}")
    cfg["N"] = N
    for o in out:
        rows.append([o.epsilon, o.method, o.estimate, o.log_estimate, o.std_error, o.bracket[0], o.bracket[1], o.terms, o.samples, o.seed])
    header = ["epsilon", "method", "estimate", "log_estimate", "std_error", "bracket_lo", "bracket_hi", "N", "samples", "seed"]
    return header, rows, {"points": len(rows), "method": method, "N": N}


def _report_rows(rep: gamma_class.GammaCheckReport):
    rows = []
    for s, ratios, err in zip(rep.s_grid, rep.ratios, rep.max_rel_error):
        for x, r, t in zip(rep.x_grid, ratios, rep.targets):
            rows.append([s, x, r, t, err])
    return ["s", "x", "ratio", "target", "max_rel_error"], rows, {"verdict": rep.verdict, "final_max_rel_error": rep.max_rel_error[-1]}


def cmd_gamma_check(cfg, s, args):
    log_F = make_log_F(_need(cfg, "F"), s)
    rho = make_rho(_need(cfg, "rho"), s)
    rep = gamma_class.gamma_membership_check(log_F, rho, _grid(cfg, "s"), _grid(cfg, "x"), float(cfg.get("threshold", 0.05)))
    return _report_rows(rep)


def cmd_self_neglect(cfg, s, args):
    rho = make_rho(_need(cfg, "rho"), s)
    rep = gamma_class.self_neglect_check(rho, _grid(cfg, "s"), _grid(cfg, "x"), float(cfg.get("threshold", 0.05)))
    return _report_rows(rep)


def cmd_aux_estimate(cfg, s, args):
    log_F = make_log_F(_need(cfg, "F"), s)
    rows = []
    for x in _grid(cfg, "s"):
        a = gamma_class.estimate_aux(log_F, x, float(cfg.get("quad_tol", 1e-10)))
        rows.append([x, a, a / x])
    return ["s", "aux", "aux_over_s"], rows, {"points": len(rows)}


def cmd_reconstruct(cfg, s, args):
    rho = make_rho(_need(cfg, "rho"), s)
    spec = gamma_class.reconstruct_spectrum(rho, float(cfg.get("C", 1.0)), int(_need(cfg, "i_max")))
    rows = [[i + 1, v * v] for i, v in enumerate(spec.values)]
    return ["i", "a_sq"], rows, {"terms": len(rows), "tail_exponent": spec.tail_model.exponent}


def cmd_repr2(cfg, s, args):
    phi = make_phi(_need(cfg, "phi"), s)
    rho = make_rho(_need(cfg, "rho"), s)
    rep = gamma_class.build_self_neglect_repr(phi, rho, float(_need(cfg, "x0")), n_max=int(cfg.get("n_max", 60)))
    errs = rep.identity_errors()
    rows = []
    for n, x in enumerate(rep.grid_points):
        eps_max = rep.epsilon_values[n] if n < len(rep.epsilon_values) else math.nan
        rows.append([n, float(x), eps_max, float(errs[n])])
    summary = {"max_identity_error": float(errs.max()), "rho_check": rep.rho_check}
    return ["n", "x_n", "max_abs_eps_next_interval", "identity_error"], rows, summary


def cmd_kernel(cfg, s, args):
    log_F = make_log_F(_need(cfg, "F"), s)
    try:
        K = kernel_stats.build_kernel(_need(cfg, "kernel"))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad kernel descriptor: {exc}") from exc
    rows = []
    tol = float(cfg.get("quad_tol", 1e-10))
    for h in _grid(cfg, "h"):
        r = kernel_stats.kernel_ratio(log_F, K, h, tol)
        lF = log_F(h)
        rows.append([h, math.exp(lF) * r, lF + math.log(r) if r > 0 else -math.inf, r / K.K_at_1 if K.K_at_1 else math.nan])
    return ["h", "expectation", "log_expectation", "ratio_to_K1F"], rows, {"kernel": K.name}


HANDLERS = {
    "mu": _series_cmd(series.eval_mu),
    "psi": _series_cmd(series.eval_psi),
    "I": _series_cmd(series.eval_I),
    "invert": cmd_invert,
    "rho": cmd_rho,
    "estimate": cmd_estimate,
    "oracle": cmd_oracle,
    "gamma-check": cmd_gamma_check,
    "self-neglect": cmd_self_neglect,
    "aux-estimate": cmd_aux_estimate,
    "reconstruct": cmd_reconstruct,
    "repr2": cmd_repr2,
    "kernel": cmd_kernel,
}

NEEDS_SPECTRUM = {"mu", "psi", "I", "invert", "rho", "estimate", "oracle"}


# output


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return str(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return f"{v:.16e}"
    return str(v)


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def render(command: str, config: dict, header, rows, summary, fmt: str) -> str:
    if fmt == "json":
        doc = {
            "tool": "smallball",
            "version": __version__,
            "command": command,
            "config": config,
            "summary": summary,
            "records": [dict(zip(header, r)) for r in rows],
        }
        return json.dumps(_json_safe(doc), indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    buf.write(f"# tool: smallball {__version__}\n")
    buf.write(f"# command: {command}\n")
    buf.write(f"# config: {json.dumps(_json_safe(config), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _load_json(path: str, what: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{what} {path} must hold a JSON object")
    return data


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smallball", description="Gaussian small-ball probabilities in l2.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--spectrum", help="JSON spectrum descriptor file")
    p.add_argument("--config", help="JSON file with command parameters")
    p.add_argument("--out", help="output path (default: table on stdout, summary on stderr)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--seed", type=int, help="64-bit seed for stochastic commands")
    p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    p.add_argument("--version", action="version", version=f"smallball {__version__}")
    return p


def run(args: argparse.Namespace) -> int:
    try:
        cfg = _load_json(args.config, "config") if args.config else {}
        spec_desc = _load_json(args.spectrum, "spectrum") if args.spectrum else cfg.get("spectrum")
        spectrum = None
        if spec_desc is not None:
            try:
                spectrum = build_spectrum(spec_desc)
            except SmallBallError as exc:
                raise ConfigError(f"bad spectrum: {exc}") from exc
            cfg["spectrum"] = spectrum.to_dict()
        if args.command in NEEDS_SPECTRUM and spectrum is None:
            raise ConfigError(f"command {args.command!r} needs a spectrum (--spectrum or 'spectrum' in config)")
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be a 64-bit unsigned integer")
        header, rows, summary = HANDLERS[args.command](cfg, spectrum, args)
    except ConfigError as exc:
        print(f"smallball: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SmallBallError as exc:
        print(f"smallball: compute error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    text = render(args.command, cfg, header, rows, summary, args.format)
    line = f"{args.command}: {len(rows)} rows; " + ", ".join(f"{k}={v}" for k, v in summary.items())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(line)
    else:
        sys.stdout.write(text)
        print(line, file=sys.stderr)
    return 0


def main(argv: list[str] | None = None) -> int:
    return run(build_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
