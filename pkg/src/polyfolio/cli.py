"""Command-line entry point.

Subcommands: ingest, detect, cluster, strategies, score, score-dist,
alt-copula. Option precedence is flags > config file > defaults; defaults
follow the reference constants (grid 100, 500k samples, 60-day window,
+-10% band, 60/100 thresholds, 10^4 draws, behavioral ratio 10). Every
output file records the hash of the fully resolved configuration, and a
fixed seed reproduces outputs byte for byte.

Exit codes: 0 success, 2 input error, 3 numerical error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import svg
from .cluster import (cluster_report, corner_features, emd_matrix, kmedoids,
                      spectral_cluster)
from .copula import detect as run_detect
from .copula import estimate_copula, indicator
from .domain import build_domain
from .errors import (ConvergenceError, NumericalError, PolyfolioError,
                     StepSizeError)
from .market import ReturnsPanel, compound_returns, ingest_csv, panel_to_csv, \
    shrinkage_covariance
from .portfolios import (equal_weight, erc_portfolio, gmv_portfolio,
                         mv_portfolio_average_vol, single_asset)
from .sampler import SamplerConfig
from .score import (classic_measures, component_integrals,
                    min_max_mean_scores, mixed_strategy_copula,
                    parametric_score, score, score_distribution)
from .strategy import (BehavioralFunction, WeightRegion, behavioral_weights,
                       bias_vector, boltzmann_center, build_mixture,
                       temperature_sequence)

_INPUT_ERRORS = (PolyfolioError, FileNotFoundError, IsADirectoryError,
                 PermissionError, json.JSONDecodeError)
_NUMERICAL_ERRORS = (ConvergenceError, NumericalError, StepSizeError,
                     np.linalg.LinAlgError)

_DEFAULTS = {
    "format": "prices",
    "window": 60,
    "m": 100,
    "band": 0.10,
    "samples": 500_000,
    "warn_len": 60,
    "crisis_len": 100,
    "seed": 0,
    "threads": os.cpu_count() or 1,
    "k": 6,
    "stride": 5,
    "downsample": 20,
    "corner_size": 0.1,
    "mode": "emd",
    "m1": 3,
    "m2": 4,
    "est_len": 100,
    "eval_len": 10,
    "eps": 0.05,
    "ratio": 10.0,
    "norm_threshold": float(np.e),
    "delta": 0.1,
    "epsilon": 0.05,
    "portfolio": "mv",
    "bias": "medium",
    "temperatures": 4,
    "draws": 10_000,
    "dist_samples": 2000,
}


def _resolve(args, keys, overrides=None):
    """flags > config file > (per-command overrides >) defaults."""
    file_cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)
    defaults = dict(_DEFAULTS, **(overrides or {}))
    cfg = {}
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
        elif key in file_cfg:
            cfg[key] = file_cfg[key]
        else:
            cfg[key] = defaults[key]
    cfg["command"] = args.command
    cfg["input"] = getattr(args, "input", None)
    for extra in ("snapshot", "portfolio_file"):
        if getattr(args, extra, None) is not None:
            cfg[extra] = getattr(args, extra)
    return cfg


def _hash(cfg) -> str:
    canon = json.dumps(cfg, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _outdir(args):
    out = args.out or os.environ.get("POLYFOLIO_OUT") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path, doc, cfg_hash):
    doc = {"config_hash": cfg_hash, **doc}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_panel(cfg):
    return ingest_csv(cfg["input"], format=cfg["format"])


def cmd_ingest(args) -> int:
    cfg = _resolve(args, ["format", "seed"])
    h = _hash(cfg)
    out = _outdir(args)
    panel = _load_panel(cfg)
    panel_to_csv(panel, os.path.join(out, "panel.csv"), header_comment=f"config {h}")
    _write_json(os.path.join(out, "summary.json"), {
        "symbols": list(panel.symbols),
        "observations": len(panel),
        "start": panel.dates[0].isoformat(),
        "end": panel.dates[-1].isoformat(),
    }, h)
    return 0


def cmd_detect(args) -> int:
    cfg = _resolve(args, ["format", "window", "m", "band", "samples",
                          "warn_len", "crisis_len", "seed", "threads"])
    h = _hash(cfg)
    out = _outdir(args)
    panel = _load_panel(cfg)
    series = run_detect(panel, window=cfg["window"], m=cfg["m"],
                        band=cfg["band"], warn_len=cfg["warn_len"],
                        crisis_len=cfg["crisis_len"],
                        sample_count=cfg["samples"], seed=cfg["seed"],
                        threads=cfg["threads"])
    series.to_csv(os.path.join(out, "indicator.csv"), comment=f"config {h}")
    with open(os.path.join(out, "intervals.csv"), "w") as fh:
        fh.write(f"# config {h}\n")
        fh.write("start,end,severity,length\n")
        for iv in series.intervals:
            fh.write(f"{iv.start.isoformat()},{iv.end.isoformat()},"
                     f"{iv.severity},{iv.length}\n")
    svg.timeline(series.dates, series.values, series.intervals,
                 os.path.join(out, "timeline.svg"), comment=f"config {h}",
                 title="crisis indicator")
    date_index = {d.isoformat(): i for i, d in enumerate(panel.dates)}
    for snap in cfg.get("snapshot") or []:
        if snap not in date_index:
            raise PolyfolioError(f"snapshot date {snap} not in the panel")
        end = date_index[snap]
        win = panel.window(end, cfg["window"])
        R = compound_returns(win)
        Sigma = shrinkage_covariance(win).Sigma
        cop = estimate_copula(R, Sigma, m=cfg["m"],
                              sample_count=cfg["samples"], seed=cfg["seed"])
        cop.to_csv(os.path.join(out, f"copula_{snap}.csv"), comment=f"config {h}")
        svg.heatmap(cop.mass, os.path.join(out, f"copula_{snap}.svg"),
                    comment=f"config {h}", title=f"copula {snap}")
    return 0


def _rolling_copulae(panel, cfg):
    ends = list(range(cfg["window"] - 1, len(panel), cfg["stride"]))
    seeds = np.random.SeedSequence(cfg["seed"]).spawn(len(ends))
    cops = []
    for end, ss in zip(ends, seeds):
        win = panel.window(end, cfg["window"])
        R = compound_returns(win)
        Sigma = shrinkage_covariance(win).Sigma
        cops.append(estimate_copula(R, Sigma, m=cfg["m"],
                                    sample_count=cfg["samples"],
                                    seed=np.random.default_rng(ss)))
    dates = [panel.dates[e] for e in ends]
    return dates, cops


def cmd_cluster(args) -> int:
    cfg = _resolve(args, ["format", "window", "m", "band", "samples", "seed",
                          "threads", "k", "stride", "downsample",
                          "corner_size", "mode"])
    h = _hash(cfg)
    out = _outdir(args)
    panel = _load_panel(cfg)
    dates, cops = _rolling_copulae(panel, cfg)
    if cfg["mode"] == "emd":
        dm = emd_matrix(cops, downsample_to=cfg["downsample"],
                        threads=cfg["threads"])
        dm.to_csv(os.path.join(out, "distance.csv"), comment=f"config {h}")
        labels = spectral_cluster(dm, cfg["k"], seed=cfg["seed"])
        sigma = float(dm.off_diagonal().std())
        medoids = None
    elif cfg["mode"] == "features":
        feats = np.array([corner_features(c, corner_size=cfg["corner_size"])
                          for c in cops])
        labels, medoids = kmedoids(feats, cfg["k"], seed=cfg["seed"])
        sigma = None
    else:
        raise PolyfolioError(f"unknown cluster mode {cfg['mode']!r}")
    with open(os.path.join(out, "labels.csv"), "w") as fh:
        fh.write(f"# config {h}\n")
        fh.write("date,label\n")
        for d, lab in zip(dates, labels):
            fh.write(f"{d.isoformat()},{int(lab)}\n")
    report = cluster_report(cops, labels, medoids, sigma=sigma,
                            band=cfg["band"])
    _write_json(os.path.join(out, "report.json"), report, h)
    return 0


def _estimation(panel, cfg):
    need = cfg["est_len"] + cfg["eval_len"]
    if len(panel) < need:
        raise PolyfolioError(
            f"panel has {len(panel)} rows; {need} required for the windows")
    est = ReturnsPanel(panel.symbols, panel.dates[:cfg["est_len"]],
                       panel.returns[:cfg["est_len"]])
    ev = ReturnsPanel(panel.symbols,
                      panel.dates[cfg["est_len"]:need],
                      panel.returns[cfg["est_len"]:need])
    Sigma = shrinkage_covariance(est).Sigma
    mu = est.returns.mean(axis=0)
    return est, ev, Sigma, mu


def _resolve_portfolio(cfg, panel, domain, Sigma, mu):
    name = cfg["portfolio"]
    n = panel.n_assets
    if name == "mv":
        x, _ = mv_portfolio_average_vol(domain, Sigma, mu)
        return x
    if name == "erc":
        return erc_portfolio(Sigma)
    if name == "btc":
        idx = panel.symbols.index("BTC") if "BTC" in panel.symbols else 0
        return single_asset(n, idx)
    if name == "equal":
        return equal_weight(n)
    with open(name) as fh:
        x = np.asarray(json.load(fh), dtype=float)
    if x.shape != (n,) or abs(x.sum() - 1.0) > 1e-9:
        raise PolyfolioError("portfolio file must hold n weights summing to 1")
    return x


_BIAS_SHAPES = {
    "low": lambda ratio: BehavioralFunction(kind="falling", x0=0.5, ratio=ratio),
    "medium": lambda ratio: BehavioralFunction(kind="bump", x0=0.5, ratio=ratio),
    "high": lambda ratio: BehavioralFunction(kind="rising", x0=0.5, ratio=ratio),
}


def _mixture_and_region(domain, Sigma, mu, cfg):
    scfg = SamplerConfig(seed=cfg["seed"])
    mixture = build_mixture(domain, Sigma, mu, cfg["m1"], cfg["m2"], scfg,
                            norm_threshold=cfg["norm_threshold"],
                            delta=cfg["delta"], epsilon=cfg["epsilon"])
    region = WeightRegion(M=mixture.M)
    return mixture, region, scfg


def _behavioral_grid(mixture, cfg):
    vols = mixture.proposal_volatilities()
    v_bounds = (vols.min(), vols.max())
    alpha_grid = mixture.alpha_grid()
    f_alpha = [_BIAS_SHAPES["high"](cfg["ratio"]) for _ in range(mixture.M1)]
    weights = {}
    biases = {}
    for name in ("low", "medium", "high"):
        f_q = _BIAS_SHAPES[name](cfg["ratio"])
        weights[name] = behavioral_weights(vols, v_bounds, alpha_grid, f_q,
                                           f_alpha)
        biases[name] = bias_vector(vols, v_bounds, alpha_grid, f_q, f_alpha)
    return weights, biases


def cmd_strategies(args) -> int:
    cfg = _resolve(args, ["format", "est_len", "eval_len", "m1", "m2",
                          "norm_threshold", "delta", "epsilon", "seed"])
    h = _hash(cfg)
    out = _outdir(args)
    panel = _load_panel(cfg)
    _, _, Sigma, mu = _estimation(panel, cfg)
    domain = build_domain(panel.n_assets)
    mixture, _, _ = _mixture_and_region(domain, Sigma, mu, cfg)
    doc = json.loads(mixture.to_json())
    _write_json(os.path.join(out, "mixture.json"), doc, h)
    return 0


def cmd_score(args) -> int:
    cfg = _resolve(args, ["format", "est_len", "eval_len", "m1", "m2", "eps",
                          "ratio", "norm_threshold", "delta", "epsilon",
                          "portfolio", "bias", "temperatures", "seed"])
    h = _hash(cfg)
    out = _outdir(args)
    panel = _load_panel(cfg)
    est, ev, Sigma, mu = _estimation(panel, cfg)
    domain = build_domain(panel.n_assets)
    x = _resolve_portfolio(cfg, panel, domain, Sigma, mu)
    R_eval = ev.returns.mean(axis=0)
    r_star = float(R_eval @ x)
    mixture, region, scfg = _mixture_and_region(domain, Sigma, mu, cfg)
    ints = component_integrals(mixture, R_eval, r_star, eps=cfg["eps"],
                               seed=cfg["seed"], config=scfg)
    weights, biases = _behavioral_grid(mixture, cfg)
    mmm = min_max_mean_scores(ints, region, config=scfg)
    named_scores = {name: score(ints, w) for name, w in weights.items()}
    r_bias = biases[cfg["bias"]]
    temps = temperature_sequence(region, r_bias, scfg, M=cfg["temperatures"],
                                 norm_threshold=cfg["norm_threshold"],
                                 delta=cfg["delta"], epsilon=cfg["epsilon"])
    curve = parametric_score(ints, region, r_bias, temps, config=scfg)
    gmv = gmv_portfolio(domain, Sigma)
    measures = classic_measures(x, ev, gmv=gmv, eval_returns=R_eval)
    _write_json(os.path.join(out, "score_report.json"), {
        "portfolio": x.tolist(),
        "portfolio_kind": cfg["portfolio"],
        "return_threshold": r_star,
        "component_integrals": ints.c.tolist(),
        "component_stderr": ints.stderr.tolist(),
        "empty_section": ints.empty_section,
        "s_min": mmm.s_min,
        "s_max": mmm.s_max,
        "s_mean": mmm.s_mean,
        "s_mean_stderr": mmm.se_mean,
        "scores": {k: {"value": v.value, "stderr": v.stderr}
                   for k, v in named_scores.items()},
        "bias": cfg["bias"],
        "parametric": [{"T": p.T, "score": p.score, "stderr": p.stderr}
                       for p in curve],
    }, h)
    with open(os.path.join(out, "parametric_curve.csv"), "w") as fh:
        fh.write(f"# config {h}\n")
        fh.write("T,score,stderr\n")
        for p in curve:
            fh.write(f"{format(p.T, '.17g')},{format(p.score, '.17g')},"
                     f"{format(p.stderr, '.17g')}\n")
    svg.line_plot([p.T for p in curve], [p.score for p in curve],
                  os.path.join(out, "parametric_curve.svg"),
                  comment=f"config {h}", title="parametric score",
                  xlabel="temperature", ylabel="score")
    _write_json(os.path.join(out, "classic_measures.json"), measures, h)
    return 0


def cmd_score_dist(args) -> int:
    cfg = _resolve(args, ["format", "est_len", "eval_len", "m1", "m2",
                          "ratio", "norm_threshold", "delta", "epsilon",
                          "portfolio", "bias", "draws", "dist_samples",
                          "seed"])
    h = _hash(cfg)
    out = _outdir(args)
    panel = _load_panel(cfg)
    est, ev, Sigma, mu = _estimation(panel, cfg)
    domain = build_domain(panel.n_assets)
    x = _resolve_portfolio(cfg, panel, domain, Sigma, mu)
    mixture, region, scfg = _mixture_and_region(domain, Sigma, mu, cfg)
    if cfg["bias"] == "equal":
        w = mixture.weights
    else:
        weights, _ = _behavioral_grid(mixture, cfg)
        w = weights[cfg["bias"]]
    dens = score_distribution(x, mu, Sigma, mixture, draws=cfg["draws"],
                              seed=cfg["seed"], config=scfg, weights=w,
                              samples_per_component=cfg["dist_samples"])
    with open(os.path.join(out, "density.csv"), "w") as fh:
        fh.write(f"# config {h}\n")
        fh.write("score,density\n")
        for g, d in zip(dens.grid, dens.density):
            fh.write(f"{format(g, '.17g')},{format(d, '.17g')}\n")
    svg.line_plot(dens.grid, dens.density, os.path.join(out, "density.svg"),
                  comment=f"config {h}", title="score distribution",
                  xlabel="score", ylabel="density")
    return 0


def cmd_alt_copula(args) -> int:
    cfg = _resolve(args, ["format", "est_len", "eval_len", "m", "m1", "m2",
                          "samples", "ratio", "norm_threshold", "delta",
                          "epsilon", "band", "bias", "temperatures", "seed"],
                   overrides={"eval_len": 60})
    h = _hash(cfg)
    out = _outdir(args)
    panel = _load_panel(cfg)
    est, ev, Sigma, mu = _estimation(panel, cfg)
    domain = build_domain(panel.n_assets)
    mixture, region, scfg = _mixture_and_region(domain, Sigma, mu, cfg)
    R_eval = compound_returns(ev)
    Sigma_eval = shrinkage_covariance(ev).Sigma
    _, biases = _behavioral_grid(mixture, cfg)
    r_bias = biases[cfg["bias"]]
    temps = temperature_sequence(region, r_bias, scfg,
                                 M=cfg["temperatures"],
                                 norm_threshold=cfg["norm_threshold"],
                                 delta=cfg["delta"], epsilon=cfg["epsilon"])
    inds = []
    sample_count = max(cfg["samples"] // 5, 10 * cfg["m"] ** 2)
    for t_idx, T in enumerate(temps, start=1):
        center, _ = boltzmann_center(region, r_bias, T, scfg)
        center = np.clip(center, 0.0, None)
        center = center / center.sum()
        mix_t = mixture.reweighted(center)
        cop = mixed_strategy_copula(mix_t, R_eval, Sigma_eval, m=cfg["m"],
                                    sample_count=sample_count,
                                    seed=cfg["seed"] + t_idx, config=scfg)
        cop.to_csv(os.path.join(out, f"copula_t{t_idx}.csv"),
                   comment=f"config {h}")
        svg.heatmap(cop.mass, os.path.join(out, f"copula_t{t_idx}.svg"),
                    comment=f"config {h}",
                    title=f"mixed-strategy copula T{t_idx}")
        inds.append(indicator(cop, band=cfg["band"]))
    _write_json(os.path.join(out, "report.json"), {
        "temperatures": [float(t) for t in temps],
        "indicators": [float(v) for v in inds],
    }, h)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="polyfolio",
        description="Polytope portfolio analytics: crisis detection, "
                    "strategy mixtures, and portfolio scores.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, input_required=True):
        if input_required:
            sp.add_argument("--input", required=True, help="panel CSV path")
        sp.add_argument("--format", choices=["prices", "returns"])
        sp.add_argument("--out", help="output directory "
                                      "(default $POLYFOLIO_OUT or .)")
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int)

    sp = sub.add_parser("ingest", help="normalise a panel CSV to returns")
    common(sp)
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("detect", help="rolling crisis indicator")
    common(sp)
    sp.add_argument("--window", type=int)
    sp.add_argument("--m", type=int)
    sp.add_argument("--band", type=float)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--warn-len", dest="warn_len", type=int)
    sp.add_argument("--crisis-len", dest="crisis_len", type=int)
    sp.add_argument("--threads", type=int)
    sp.add_argument("--snapshot", action="append",
                    help="ISO date; write this date's copula (repeatable)")
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("cluster", help="cluster rolling copulae")
    common(sp)
    sp.add_argument("--mode", choices=["emd", "features"])
    sp.add_argument("--k", type=int)
    sp.add_argument("--stride", type=int)
    sp.add_argument("--window", type=int)
    sp.add_argument("--m", type=int)
    sp.add_argument("--band", type=float)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--downsample", type=int)
    sp.add_argument("--corner-size", dest="corner_size", type=float)
    sp.add_argument("--threads", type=int)
    sp.set_defaults(func=cmd_cluster)

    sp = sub.add_parser("strategies", help="build the strategy mixture grid")
    common(sp)
    sp.add_argument("--est-len", dest="est_len", type=int)
    sp.add_argument("--eval-len", dest="eval_len", type=int)
    sp.add_argument("--m1", type=int)
    sp.add_argument("--m2", type=int)
    sp.add_argument("--norm-threshold", dest="norm_threshold", type=float)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--epsilon", type=float)
    sp.set_defaults(func=cmd_strategies)

    sp = sub.add_parser("score", help="score a portfolio against the mixture")
    common(sp)
    for flag, kind in [("--est-len", int), ("--eval-len", int), ("--m1", int),
                       ("--m2", int), ("--eps", float), ("--ratio", float),
                       ("--norm-threshold", float), ("--delta", float),
                       ("--epsilon", float), ("--temperatures", int)]:
        sp.add_argument(flag, dest=flag[2:].replace("-", "_"), type=kind)
    sp.add_argument("--portfolio", help="mv|erc|btc|equal|<weights.json>")
    sp.add_argument("--bias", choices=["low", "medium", "high"])
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("score-dist", help="distribution of a portfolio's score")
    common(sp)
    for flag, kind in [("--est-len", int), ("--eval-len", int), ("--m1", int),
                       ("--m2", int), ("--ratio", float),
                       ("--norm-threshold", float), ("--delta", float),
                       ("--epsilon", float), ("--draws", int),
                       ("--dist-samples", int)]:
        sp.add_argument(flag, dest=flag[2:].replace("-", "_"), type=kind)
    sp.add_argument("--portfolio", help="mv|erc|btc|equal|<weights.json>")
    sp.add_argument("--bias", choices=["equal", "low", "medium", "high"])
    sp.set_defaults(func=cmd_score_dist)

    sp = sub.add_parser("alt-copula",
                        help="copulae under mixed strategies per temperature")
    common(sp)
    for flag, kind in [("--est-len", int), ("--eval-len", int), ("--m", int),
                       ("--m1", int), ("--m2", int), ("--samples", int),
                       ("--ratio", float), ("--norm-threshold", float),
                       ("--delta", float), ("--epsilon", float),
                       ("--band", float), ("--temperatures", int)]:
        sp.add_argument(flag, dest=flag[2:].replace("-", "_"), type=kind)
    sp.add_argument("--bias", choices=["low", "medium", "high"])
    sp.set_defaults(func=cmd_alt_copula)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _NUMERICAL_ERRORS as exc:
        print(f"polyfolio: numerical error: {exc}", file=sys.stderr)
        return 3
    except _INPUT_ERRORS as exc:
        print(f"polyfolio: input error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
