"""``amenet`` command line front end.

Exit codes: 0 success, 1 invalid input or usage, 2 numerical failure.
All randomness derives from ``--seed`` through named substreams.
"""
from __future__ import annotations

import argparse
import io
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from ._rng import DEFAULT_SEED, substream
from .data import balance_randomization_test, cycle_census, expected_balance_under_independence, load_dataset
from .diagnostics import dic, dic_alt, posterior_predictive_balance, summarize
from .errors import DataError, NumericalError
from .latent import MarkedPointPattern, align_samples, k_randomization_envelope, posterior_mean_positions
from .model import ModelSpec, Priors, TrueParams, parse_config, read_config, simulate_network
from .sampler import ChainConfig, PosteriorSamples, run_chains
from .samples_io import fmt, load_samples, read_index, write_csv, write_meta, write_samples

log = logging.getLogger("amenet")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _add_data_args(p, required=True):
    p.add_argument("--edges", required=required, help="edge CSV: actor_id,event_id[,weight]")
    p.add_argument("--actors", required=required, help="actor CSV: actor_id,<covariates...>[,mark]")
    p.add_argument("--events", required=required, help="event CSV: event_id,<covariates...>")
    p.add_argument("--group", default=None, help="grouping map CSV: event_id,group")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="amenet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"amenet {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    p = sub.add_parser("balance", help="tie density, tetrad balance and randomization null")
    _add_data_args(p)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None, help="directory for balance.csv (default: print to stdout)")

    p = sub.add_parser("fit", help="run the Metropolis-within-Gibbs sampler")
    _add_data_args(p)
    p.add_argument("--config", default=None, help="key = value model configuration")
    p.add_argument("--t", type=int, default=None, help="latent dimension (overrides the config)")
    p.add_argument("--iters", type=int, default=6000)
    p.add_argument("--burn", type=int, default=3000)
    p.add_argument("--thin", type=int, default=3)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1, help="worker processes for chains")
    p.add_argument("--out", required=True)

    p = sub.add_parser("summarize", help="posterior summary table")
    p.add_argument("--samples", required=True)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--out", default=None, help="output directory (default: the samples directory)")

    p = sub.add_parser("dic", help="DIC and alternative DIC")
    p.add_argument("--samples", required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("ppc", help="posterior predictive check of tetrad balance")
    p.add_argument("--samples", required=True)
    _add_data_args(p)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default=None)

    p = sub.add_parser("kfunc", help="multi-type K-functions of aligned actor positions")
    p.add_argument("--samples", required=True)
    p.add_argument("--actors", required=True, help="actor CSV carrying a 'mark' column")
    p.add_argument("--races", required=True, help="two marks, comma separated: r1,r2")
    p.add_argument("--hmax", type=float, default=3.0)
    p.add_argument("--hsteps", type=int, default=60)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--draws", type=int, default=10, help="posterior draws (evenly spaced) to analyse")
    p.add_argument("--window", default="-3,3,-3,3", help="xmin,xmax,ymin,ymax")
    p.add_argument("--sweeps", type=int, default=2, help="Procrustes reference iterations")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default=None)

    p = sub.add_parser("positions", help="aligned posterior mean latent positions")
    p.add_argument("--samples", required=True)
    p.add_argument("--sweeps", type=int, default=2)
    p.add_argument("--out", default=None)

    p = sub.add_parser("simulate", help="simulate a network from the model")
    p.add_argument("--na", type=int, required=True)
    p.add_argument("--ne", type=int, required=True)
    p.add_argument("--t", type=int, default=2)
    p.add_argument("--beta-d", type=float, default=-1.5)
    p.add_argument("--sigma2-a", type=float, default=0.5)
    p.add_argument("--sigma2-e", type=float, default=0.5)
    p.add_argument("--sigma2-u", type=float, default=1.0)
    p.add_argument("--sigma2-v", type=float, default=1.0)
    p.add_argument("--sigma2-gamma", type=float, default=1.0)
    p.add_argument("--marks", default="A:0.5,B:0.5", help="mark:probability list for actors")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    return parser


# ---------------------------------------------------------------- commands


def _load(args, base_levels=None):
    return load_dataset(args.edges, args.actors, args.events, args.group, base_levels)


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_balance(args):
    ds = _load(args)
    census = cycle_census(ds)
    res = balance_randomization_test(ds, n_reps=args.reps, seed=args.seed, n_jobs=args.jobs)
    q = res.quantiles()
    rows = [
        ("n_actors", ds.n_actors),
        ("n_events", ds.n_events),
        ("p0", res.p0),
        ("p", res.observed),
        ("pi", expected_balance_under_independence(res.p0)),
        ("total_tetrads", census.total_tetrads),
        *((f"tetrads_{name}", n) for name, n in census.configurations.items()),
        ("null_reps", args.reps),
        ("null_min", q[0.0]),
        ("null_q025", q[0.025]),
        ("null_median", q[0.5]),
        ("null_q975", q[0.975]),
        ("null_max", q[1.0]),
        ("p_value", res.p_value),
        ("seed", args.seed),
    ]
    if args.out:
        write_csv(_outdir(args.out) / "balance.csv", ["statistic", "value"], rows)
    else:
        buf = io.StringIO()
        buf.write("statistic,value\n")
        for k, v in rows:
            buf.write(f"{k},{fmt(v)}\n")
        sys.stdout.write(buf.getvalue())


def _spec_from_config(path, t_override=None):
    spec, beta_sd, ig = read_config(path) if path else parse_config("")
    if t_override is not None:
        spec = ModelSpec(t=t_override, family=spec.family, sigma_gamma_fixed=spec.sigma_gamma_fixed,
                         base_levels=spec.base_levels)
    return spec, beta_sd, ig


def _summary_rows(summary):
    return [(name, p.mean, p.sd, p.lower, p.upper) for name, p in summary.parameters.items()]


def _write_summary(out, pooled, level):
    s = summarize(pooled, level)
    write_csv(out / "summary.csv", ["parameter", "mean", "sd", "lower", "upper"], _summary_rows(s))
    return s


def _dic_rows(chains):
    rows = []
    targets = [(str(c.chain + 1), c) for c in chains]
    if len(chains) > 1:
        targets.append(("pooled", PosteriorSamples.pool(chains)))
    for label, c in targets:
        d, da = dic(c), dic_alt(c)
        rows.append((label, c.n_draws, d["mean_deviance"], -d["mean_deviance"] / 2, d["deviance_at_mean"],
                     d["p_d"], d["dic"], da["p_d_alt"], da["dic_alt"]))
    return rows


DIC_HEADER = ["chain", "n_draws", "mean_deviance", "mean_loglik", "deviance_at_mean", "p_d", "dic", "p_d_alt", "dic_alt"]


def cmd_fit(args):
    spec, beta_sd, ig = _spec_from_config(args.config, args.t)
    config = ChainConfig(n_iter=args.iters, burn_in=args.burn, thin=args.thin, seed=args.seed,
                         n_chains=args.chains)
    ds = _load(args, spec.base_levels)
    priors = Priors.for_dataset(ds, beta_sd=beta_sd, ig=ig)
    chains = run_chains(ds, spec, priors, config, n_jobs=args.jobs)
    out = _outdir(args.out)
    meta = {
        "n_actors": ds.n_actors, "n_events": ds.n_events, "t": spec.t, "family": spec.family,
        "sigma_gamma": spec.sigma_gamma_fixed, "r_d": ds.dyad_covariates.shape[2],
        "r_a": ds.actor_covariates.shape[1], "r_e": ds.event_covariates.shape[1],
        "iters": config.n_iter, "burn": config.burn_in, "thin": config.thin,
        "draws_per_chain": config.n_retained, "chains": config.n_chains, "seed": args.seed,
        "prior.beta.sd": beta_sd,
        **{f"prior.ig.{n}": f"{a!r},{b!r}" for n, (a, b) in priors.ig.items()},
        **{f"acceptance_rate_chain{c.chain + 1}": c.acceptance_rate_theta for c in chains},
    }
    write_samples(out, chains, ds, meta)
    pooled = PosteriorSamples.pool(chains)
    _write_summary(out, pooled, 0.95)
    write_csv(out / "dic.csv", DIC_HEADER, _dic_rows(chains))
    print(f"wrote {config.n_chains} chain(s) x {config.n_retained} draws to {out}; "
          f"theta acceptance {pooled.acceptance_rate_theta:.3f}")


def cmd_summarize(args):
    chains, _ = load_samples(args.samples)
    out = _outdir(args.out or args.samples)
    s = _write_summary(out, PosteriorSamples.pool(chains), args.level)
    print(f"wrote {out / 'summary.csv'} ({len(s.parameters)} parameters, {s.n_draws} draws)")


def cmd_dic(args):
    chains, _ = load_samples(args.samples)
    out = _outdir(args.out or args.samples)
    rows = _dic_rows(chains)
    write_csv(out / "dic.csv", DIC_HEADER, rows)
    print(f"DIC = {rows[-1][6]:.2f}, DIC_alt = {rows[-1][8]:.2f}")


def _check_ids(samples_dir, ds):
    ids, _ = read_index(Path(samples_dir) / "actors.csv", "actor_id")
    ev, _ = read_index(Path(samples_dir) / "events.csv", "event_id")
    if tuple(ids) != ds.actor_ids or tuple(ev) != ds.event_ids:
        raise DataError("dataset actor/event ids do not match the samples directory")


def cmd_ppc(args):
    base_levels = _spec_from_config(args.config)[0].base_levels if args.config else None
    ds = _load(args, base_levels)
    _check_ids(args.samples, ds)
    chains, _ = load_samples(args.samples)
    pooled = PosteriorSamples.pool(chains)
    res = posterior_predictive_balance(pooled, ds, seed=args.seed)
    out = _outdir(args.out or args.samples)
    obs = res["observed"]
    write_csv(out / "ppc.csv", ["draw", "replicated", "observed", "exceeds"],
              [(s, x, obs, int(x >= obs)) for s, x in enumerate(res["replicated_stats"])])
    print(f"observed balance {obs:.4f}; posterior predictive p-value {res['p_value']:.3f}")


def _aligned(chains, sweeps):
    pooled = PosteriorSamples.pool(chains)
    if pooled.t < 1:
        raise DataError("latent positions need a fit with t >= 1")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        u, v, res = align_samples(pooled.u, pooled.v, max_sweeps=sweeps)
    for w in caught:
        log.warning(str(w.message))
    return u, v


def cmd_positions(args):
    chains, _ = load_samples(args.samples)
    u, v = _aligned(chains, args.sweeps)
    mu, mv = posterior_mean_positions(u, v)
    d = Path(args.samples)
    actor_ids, marks = read_index(d / "actors.csv", "actor_id")
    event_ids, _ = read_index(d / "events.csv", "event_id")
    out = _outdir(args.out or args.samples)
    dims = [f"dim{j + 1}" for j in range(mu.shape[1])]
    write_csv(out / "positions_u.csv", ["actor_id", "mark", *dims],
              [(a, (marks or [""] * len(actor_ids))[i], *mu[i]) for i, a in enumerate(actor_ids)])
    write_csv(out / "positions_v.csv", ["event_id", *dims], [(e, *mv[k]) for k, e in enumerate(event_ids)])
    print(f"wrote {out / 'positions_u.csv'} and {out / 'positions_v.csv'}")


def cmd_kfunc(args):
    races = [r.strip() for r in args.races.split(",")]
    if len(races) != 2 or not all(races):
        raise DataError("--races expects two marks separated by a comma")
    try:
        window = tuple(float(x) for x in args.window.split(","))
    except ValueError:
        raise DataError(f"--window must be four numbers, got {args.window!r}") from None
    if len(window) != 4:
        raise DataError("--window must be xmin,xmax,ymin,ymax")
    if args.hsteps < 1 or args.hmax <= 0:
        raise DataError("--hsteps must be >= 1 and --hmax > 0")
    chains, _ = load_samples(args.samples)
    sample_ids, _ = read_index(Path(args.samples) / "actors.csv", "actor_id")
    ids, marks = read_index(args.actors, "actor_id")
    if marks is None:
        raise DataError(f"{args.actors}: no 'mark' column")
    mark_of = dict(zip(ids, marks))
    missing = [a for a in sample_ids if a not in mark_of]
    if missing:
        raise DataError(f"{args.actors}: no mark for actor '{missing[0]}'")
    marks = np.array([mark_of[a] for a in sample_ids])
    for r in races:
        if not np.any(marks == r):
            raise DataError(f"mark '{r}' not present among actors")

    u, _ = _aligned(chains, args.sweeps)
    if u.shape[2] < 2:
        raise DataError("K-functions need a fit with t >= 2")
    M = u.shape[0]
    take = np.unique(np.linspace(0, M - 1, min(args.draws, M)).round().astype(int))
    h = np.linspace(0.0, args.hmax, args.hsteps + 1)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        patterns = [MarkedPointPattern(u[m, :, :2], marks, window) for m in take]
    if caught:
        log.warning("%s (first of %d draws with outside points)", caught[0].message, len(caught))
    env = k_randomization_envelope(patterns, races[0], races[1], h, args.reps, seed=args.seed)
    rows = []
    for j, m in enumerate(take):
        rows += [(hv, int(m), "observed", k, "") for hv, k in zip(h, env.observed[j])]
        for r in range(args.reps):
            rows += [(hv, int(m), "null", k, r) for hv, k in zip(h, env.null[j, r])]
    out = _outdir(args.out or args.samples)
    path = out / f"kfunc_{races[0]}_{races[1]}.csv"
    write_csv(path, ["h", "draw_id", "curve_type", "K", "rep"], rows)
    print(f"wrote {path}; {int(env.inside.sum())}/{len(take)} observed curves inside the randomization envelope")


def _parse_marks(spec):
    names, probs = [], []
    for part in spec.split(","):
        try:
            name, p = part.split(":")
            names.append(name.strip())
            probs.append(float(p))
        except ValueError:
            raise DataError(f"--marks expects name:prob pairs, got {part!r}") from None
    probs = np.array(probs)
    if np.any(probs < 0) or not np.isclose(probs.sum(), 1.0):
        raise DataError("--marks probabilities must be nonnegative and sum to 1")
    return names, probs


def cmd_simulate(args):
    if args.na < 1 or args.ne < 1:
        raise DataError("--na and --ne must be >= 1")
    spec = ModelSpec(t=args.t)
    params = TrueParams(beta_d=(args.beta_d,), sigma2_a=args.sigma2_a, sigma2_e=args.sigma2_e,
                        sigma2_gamma=args.sigma2_gamma, sigma2_u=args.sigma2_u, sigma2_v=args.sigma2_v)
    names, probs = _parse_marks(args.marks)
    marks = tuple(substream(args.seed, "marks").choice(names, size=args.na, p=probs))
    sim = simulate_network(spec, params, args.na, args.ne, seed=args.seed, actor_marks=marks)
    ds, truth = sim
    out = _outdir(args.out)
    write_csv(out / "edges.csv", ["actor_id", "event_id"],
              [(ds.actor_ids[i], ds.event_ids[k]) for i, k in zip(*np.nonzero(ds.Y))])
    write_csv(out / "actors.csv", ["actor_id", "mark"], list(zip(ds.actor_ids, marks)))
    write_csv(out / "events.csv", ["event_id"], [(e,) for e in ds.event_ids])
    write_csv(out / "truth_scalars.csv", ["parameter", "value"], [
        ("beta_d", args.beta_d), *((f"sigma2_{n}", getattr(truth, f"sigma2_{n}")) for n in ("a", "e", "gamma", "u", "v")),
        ("tie_density", float(ds.Y.mean())),
    ])
    dims = [f"dim{j + 1}" for j in range(args.t)]
    write_csv(out / "truth_u.csv", ["actor_id", "mu_a", *dims],
              [(a, truth.mu_a[i], *truth.u[i]) for i, a in enumerate(ds.actor_ids)])
    write_csv(out / "truth_v.csv", ["event_id", "mu_e", *dims],
              [(e, truth.mu_e[k], *truth.v[k]) for k, e in enumerate(ds.event_ids)])
    (out / "model.cfg").write_text(f"t = {args.t}\n", encoding="utf-8")
    print(f"simulated {args.na} x {args.ne} network (tie density {ds.Y.mean():.4f}) in {out}")


COMMANDS = {
    "balance": cmd_balance,
    "fit": cmd_fit,
    "summarize": cmd_summarize,
    "dic": cmd_dic,
    "ppc": cmd_ppc,
    "kfunc": cmd_kfunc,
    "positions": cmd_positions,
    "simulate": cmd_simulate,
}


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (DataError, FileNotFoundError, ValueError) as exc:
        print(f"amenet {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"amenet {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv=None):
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()
