"""``cobro`` command line: simulation benchmark, pricing, calibration and experiments.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.
"""
import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis, ctmc, plots, pricing, rng as rngmod, simulate
from .config import ConfigError, load, parse_rows, parse_vector
from .fourier import GridTooCoarseError, RainbowSpec, RainbowStyle

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
STYLES = [s.value for s in RainbowStyle]


def fmt(v, digits=10):
    """``digits`` significant digits; integers and strings pass through."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if np.isnan(v) else format(float(v), f".{digits}g")
    return str(v)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def _emit(header, rows, digits=10):
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v, digits) for v in row])


def _spec(cfg, args):
    style = args.style or cfg.get("price", "style")
    strike = args.strike if args.strike is not None else cfg.get_float("price", "strike")
    maturity = args.maturity if args.maturity is not None else cfg.get_float("price", "maturity")
    try:
        return RainbowSpec(style, strike, maturity)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_simulate(cfg, scheme="both", reps=None):
    """Common-decomposition endpoint vs Euler on the same grid: ``E[B_t + W_t]`` and draw counts."""
    reps = reps if reps is not None else cfg.get_int("simulate", "reps")
    if reps < 100:
        raise ConfigError("reps must be at least 100")
    horizon = cfg.get_float("simulate", "horizon")
    steps = cfg.get_int("simulate", "steps")
    schemes = ["cd", "euler"] if scheme == "both" else [scheme]
    rows, timing = [], []
    for name in schemes:
        start = time.perf_counter()
        if name == "cd":
            ep = simulate.simulate_cd_endpoints(cfg.regime, horizon, reps, cfg.seed, n_chain_steps=steps)
            total = ep.b_t + ep.w_t
            normals, chain = ep.rng_draws, ep.chain_draws
        elif name == "euler":
            pb = simulate.simulate_euler_paths(cfg.regime, simulate.TimeGrid.uniform(horizon, steps),
                                               reps, cfg.seed)
            total = pb.b[:, -1] + pb.w[:, -1]
            normals, chain = pb.rng_draws, pb.chain_draws
        else:
            raise ConfigError(f"unknown scheme {name!r}")
        wall = 1e3 * (time.perf_counter() - start)
        rows.append([name, reps, total.mean(), total.std(ddof=1) / np.sqrt(reps),
                     normals // reps, chain // reps, (normals + chain) // reps])
        timing.append([name, reps, wall])
    header = ["scheme", "reps", "mean", "stderr", "normal_draws", "chain_draws", "rng_draws"]
    path = write_csv(cfg.output_dir / f"simulate_{scheme}.csv", header, rows)
    write_csv(cfg.output_dir / f"simulate_{scheme}_timing.csv", ["scheme", "reps", "wall_ms"], timing)
    _emit(header + ["wall_ms"], [r + [t[2]] for r, t in zip(rows, timing)])
    return path


def cmd_price(cfg, spec, method="fourier", rho=None):
    if method == "fourier":
        res = pricing.rainbow_price_fourier(cfg.regime, cfg.market, spec, cfg.fourier)
    elif method == "mc":
        res = pricing.mc_price_rainbow(cfg.regime, cfg.market, spec, cfg.paths, cfg.seed)
    elif method == "constant":
        if rho is None:
            raise ConfigError("--method constant needs --rho")
        res = pricing.price_constant_rho(cfg.market, spec, rho, cfg.fourier)
    else:
        raise ConfigError(f"unknown method {method!r}")
    header = ["style", "strike", "maturity", "method", "value", "stderr"]
    row = [spec.style.value, spec.strike, spec.maturity, res.method, res.value,
           float("nan") if res.stderr is None else res.stderr]
    # full precision so that two methods can be compared from the printed lines
    _emit(header, [row], digits=17)
    return res


def _quotes_from_model(cfg, regime, style, maturity, strikes):
    prices = pricing.rainbow_prices_fourier(regime, cfg.market, style, strikes, maturity, cfg.fourier)
    return analysis.QuoteSet(list(zip(strikes, prices)), style, maturity, cfg.market)


def _read_quotes(path, cfg, style, maturity):
    rows = plots.read_csv(path)
    try:
        entries = [(float(r["strike"]), float(r["price"])) for r in rows]
        return analysis.QuoteSet(entries, style, maturity, cfg.market)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad quotes file {path}: {exc}") from exc


def cmd_calibrate(cfg, style, maturity, quotes_path=None):
    if quotes_path:
        quotes = _read_quotes(quotes_path, cfg, style, maturity)
    else:
        strikes = parse_vector(cfg.get("figures", "calibration_strikes"))
        quotes = _quotes_from_model(cfg, cfg.regime, style, maturity, strikes)
    res = analysis.calibrate_constant_rho(quotes, cfg.fourier)
    header = ["style", "maturity", "rho_star", "iterations", "final_gradient", "objective"]
    row = [quotes.style.value, maturity, res.rho_star, res.iterations, res.final_gradient, res.objective]
    write_csv(cfg.output_dir / f"calibrate_{quotes.style.value}.csv", header, [row])
    _emit(header, [row])
    return res


def cmd_implied_corr(cfg, spec, price=None):
    if price is None:
        price = pricing.rainbow_price_fourier(cfg.regime, cfg.market, spec, cfg.fourier).value
    rho = analysis.implied_correlation(price, cfg.market, spec, cfg.fourier)
    header = ["style", "strike", "maturity", "price", "rho_imp"]
    _emit(header, [[spec.style.value, spec.strike, spec.maturity, price, rho]])
    return rho


def _sweep(cfg):
    start = cfg.get_float("figures", "sweep_start")
    stop = cfg.get_float("figures", "sweep_stop")
    step = cfg.get_float("figures", "sweep_step")
    return np.arange(start, stop + 0.5 * step, step)


def _cases(cfg):
    out = []
    for item in cfg.get("figures", "cases").split(";"):
        if not item.strip():
            continue
        try:
            style, section = (s.strip() for s in item.split(":"))
            out.append((RainbowStyle(style), section))
        except ValueError as exc:
            raise ConfigError(f"bad figures case {item!r}") from exc
    return out


def exp_table5(cfg):
    sets = [s.strip() for s in cfg.get("table5", "sets").split(";") if s.strip()]
    taus = parse_vector(cfg.get("table5", "maturities"))
    rows = []
    for name in sets:
        reg = cfg.regime_named(name)
        for tau in taus:
            rows.append([name, " ".join(fmt(a) for a in reg.alpha), " ".join(fmt(q) for q in reg.q0),
                         tau, ctmc.expected_rho_bar(reg, tau)])
    path = write_csv(cfg.output_dir / "table5.csv", ["set", "alpha", "q0", "tau", "expected_rho_bar"], rows)
    return [path]


def exp_table4(cfg):
    q0 = parse_vector(cfg.get("table4", "q0"))
    spec = RainbowSpec(cfg.get("table4", "style"), cfg.get_float("table4", "strike"),
                       cfg.get_float("table4", "maturity"))
    grid = simulate.TimeGrid.uniform(cfg.get_float("table4", "history_horizon"),
                                     round(cfg.get_float("table4", "history_horizon")
                                           / cfg.get_float("table4", "history_step")))
    rows = []
    for i, alpha in enumerate(parse_rows(cfg.get("table4", "alphas"))):
        reg = ctmc.RegimeConfig(cfg.regime.generator, q0, alpha)
        true = pricing.rainbow_price_fourier(reg, cfg.market, spec, cfg.fourier).value
        path = simulate.simulate_cd_path(reg, grid, rngmod.substream(cfg.seed, i))
        rho_hat = float(simulate.estimate_rho_hat(path))
        const = pricing.price_constant_rho(cfg.market, spec, rho_hat, cfg.fourier).value
        rows.append([" ".join(fmt(a) for a in alpha), true, rho_hat, analysis.rho_hat_stationary(reg),
                     const, analysis.relative_error(const, true)])
    header = ["alpha", "true_price", "rho_hat", "rho_stationary", "price_rho_hat", "relative_error"]
    return [write_csv(cfg.output_dir / "table4.csv", header, rows)]


def exp_fig_errors(cfg):
    tau = cfg.get_float("figures", "maturity")
    strikes = parse_vector(cfg.get("figures", "calibration_strikes"))
    sweep = _sweep(cfg)
    rows = []
    for style, section in _cases(cfg):
        reg = cfg.regime_named(section)
        quotes = _quotes_from_model(cfg, reg, style, tau, strikes)
        res = analysis.calibrate_constant_rho(quotes, cfg.fourier)
        true = pricing.rainbow_prices_fourier(reg, cfg.market, style, sweep, tau, cfg.fourier)
        const = pricing.constant_rho_prices(cfg.market, style, sweep, tau, res.rho_star, cfg.fourier)
        for k, pt, pc in zip(sweep, true, const):
            rel = analysis.relative_error(pc, pt) if pt > 0 else float("nan")
            rows.append([style.value, section, res.rho_star, k, pt, pc, rel])
    header = ["style", "set", "rho_star", "strike", "true_price", "calibrated_price", "relative_error"]
    path = write_csv(cfg.output_dir / "fig_errors.csv", header, rows)
    svg = plots.line_chart(path, cfg.output_dir / "fig_errors.svg", "strike", "relative_error",
                           group="style", ylabel="relative error", title=f"tau = {fmt(tau)}")
    return [path, svg]


def exp_fig_impcorr(cfg):
    tau = cfg.get_float("figures", "maturity")
    sweep = _sweep(cfg)
    rows = []
    for style, section in _cases(cfg):
        reg = cfg.regime_named(section)
        true = pricing.rainbow_prices_fourier(reg, cfg.market, style, sweep, tau, cfg.fourier)
        for k, pt in zip(sweep, true):
            try:
                rho = analysis.implied_correlation(pt, cfg.market, RainbowSpec(style, k, tau), cfg.fourier)
            except analysis.UnattainablePriceError:
                rho = float("nan")
            rows.append([style.value, section, k, pt, rho, ctmc.expected_rho_bar(reg, tau)])
    header = ["style", "set", "strike", "true_price", "rho_imp", "expected_rho_bar"]
    path = write_csv(cfg.output_dir / "fig_impcorr.csv", header, rows)
    svg = plots.line_chart(path, cfg.output_dir / "fig_impcorr.svg", "strike", "rho_imp",
                           group="style", ylabel="implied correlation", title=f"tau = {fmt(tau)}")
    return [path, svg]


EXPERIMENTS = {"table4": exp_table4, "table5": exp_table5,
               "fig_errors": exp_fig_errors, "fig_impcorr": exp_fig_impcorr}


def cmd_experiment(cfg, which):
    if which not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {which!r}")
    paths = EXPERIMENTS[which](cfg)
    for p in paths:
        print(p)
    return paths


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file (default: bundled default.cfg)")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides [run] seed)")
    common.add_argument("--out", help="output directory (overrides [run] output_dir)")

    contract = argparse.ArgumentParser(add_help=False)
    contract.add_argument("--style", choices=STYLES)
    contract.add_argument("--strike", type=float)
    contract.add_argument("--maturity", type=float)

    p = argparse.ArgumentParser(prog="cobro", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", parents=[common], help="simulation benchmark")
    s.add_argument("--scheme", choices=["cd", "euler", "both"], default="both")
    s.add_argument("--reps", type=int)
    s = sub.add_parser("price", parents=[common, contract], help="price one rainbow option")
    s.add_argument("--method", choices=["fourier", "mc", "constant"], default="fourier")
    s.add_argument("--rho", type=float, help="correlation for --method constant")
    s = sub.add_parser("calibrate", parents=[common, contract], help="fit a constant correlation")
    s.add_argument("--quotes", help="CSV with strike,price columns (default: regime-model prices)")
    s = sub.add_parser("implied-corr", parents=[common, contract], help="implied correlation")
    s.add_argument("--price", type=float, help="observed price (default: regime-model price)")
    s = sub.add_parser("experiment", parents=[common], help="reproduce a table or figure")
    s.add_argument("which", choices=sorted(EXPERIMENTS))
    return p


def run(args):
    cfg = load(args.config, seed=args.seed, output_dir=args.out)
    if args.command == "simulate":
        cmd_simulate(cfg, args.scheme, args.reps)
    elif args.command == "price":
        cmd_price(cfg, _spec(cfg, args), args.method, args.rho)
    elif args.command == "calibrate":
        spec = _spec(cfg, args)
        cmd_calibrate(cfg, spec.style, spec.maturity, args.quotes)
    elif args.command == "implied-corr":
        cmd_implied_corr(cfg, _spec(cfg, args), args.price)
    else:
        cmd_experiment(cfg, args.which)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        run(args)
    except ConfigError as exc:
        print(f"cobro: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GridTooCoarseError, analysis.CalibrationError, analysis.UnattainablePriceError,
            FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"cobro: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"cobro: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
