"""CSV layout of a samples directory written by ``amenet fit``.

    meta.txt                  key = value lines (dimensions, seed, acceptance)
    actors.csv, events.csv    index -> id (and mark) in matrix order
    y.csv                     observed affiliation matrix
    chain<c>_scalars.csv      draw, iteration, betas, variances, deviance
    chain<c>_u.csv / _v.csv   draw, then the latent matrix flattened row-major
    chain<c>_mu.csv           draw, mu_a[0..n_a), mu_e[0..n_e)
    chain<c>_theta_mean.csv   posterior mean of theta, one row per actor

Chains are numbered from 1 in file names.
"""
from __future__ import annotations

import csv
import datetime as _dt
from pathlib import Path

import numpy as np

from .errors import DataError
from .sampler import PosteriorSamples


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) for x in r])


def read_csv(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    return rows[0], rows[1:]


def _read_matrix(path, skip_cols=1):
    header, body = read_csv(path)
    width = len(header) - skip_cols
    if width == 0:
        return header, np.zeros((len(body), 0))
    return header, np.array([[float(x) for x in r[skip_cols:]] for r in body]).reshape(len(body), width)


def write_meta(path, items: dict, timestamp=True):
    lines = [f"{k} = {fmt(v)}" for k, v in items.items()]
    if timestamp:
        lines.append(f"created = {_dt.datetime.now().isoformat(timespec='seconds')}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_meta(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    out = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def write_samples(out_dir, chains: list[PosteriorSamples], dataset, meta: dict):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_a, n_e = dataset.Y.shape
    marks = dataset.actor_marks or ("",) * n_a
    write_csv(out / "actors.csv", ["index", "actor_id", "mark"],
              [(i, a, m) for i, (a, m) in enumerate(zip(dataset.actor_ids, marks))])
    write_csv(out / "events.csv", ["index", "event_id"], list(enumerate(dataset.event_ids)))
    write_csv(out / "y.csv", ["actor_index", *[f"e{k}" for k in range(n_e)]],
              [(i, *row) for i, row in enumerate(dataset.Y.tolist())])
    for ch in chains:
        c = ch.chain + 1
        cols = ch.scalar_columns()
        write_csv(out / f"chain{c}_scalars.csv", ["draw", "iteration", *cols],
                  [(s, ch.iteration[s], *(col[s] for col in cols.values())) for s in range(ch.n_draws)])
        t = ch.t
        for name, arr in (("u", ch.u), ("v", ch.v)):
            n = arr.shape[1]
            header = ["draw", *[f"{name}_{i}_{d}" for i in range(n) for d in range(t)]]
            write_csv(out / f"chain{c}_{name}.csv", header,
                      [(s, *arr[s].reshape(-1)) for s in range(ch.n_draws)])
        header = ["draw", *[f"mu_a_{i}" for i in range(n_a)], *[f"mu_e_{k}" for k in range(n_e)]]
        write_csv(out / f"chain{c}_mu.csv", header,
                  [(s, *ch.mu_a[s], *ch.mu_e[s]) for s in range(ch.n_draws)])
        write_csv(out / f"chain{c}_theta_mean.csv", ["actor_index", *[f"e{k}" for k in range(n_e)]],
                  [(i, *row) for i, row in enumerate(ch.theta_mean)])
    write_meta(out / "meta.txt", meta)


def load_samples(samples_dir) -> tuple[list[PosteriorSamples], dict]:
    """Read every chain in a samples directory. Returns (chains, meta)."""
    d = Path(samples_dir)
    meta = read_meta(d / "meta.txt")
    try:
        n_a, n_e, t = int(meta["n_actors"]), int(meta["n_events"]), int(meta["t"])
        n_chains = int(meta["chains"])
    except KeyError as exc:
        raise DataError(f"{d / 'meta.txt'}: missing key {exc}") from None
    _, y = _read_matrix(d / "y.csv")
    chains = []
    for c in range(1, n_chains + 1):
        header, body = read_csv(d / f"chain{c}_scalars.csv")
        S = len(body)
        arr = np.array([[float(x) for x in r] for r in body]).reshape(S, -1)
        col = {h: arr[:, j] for j, h in enumerate(header)}
        blocks, names = {}, {}
        for block in ("beta_d", "beta_a", "beta_e"):
            keys = [h for h in header if h.startswith(block + "[")]
            names[block] = [h[len(block) + 1:-1] for h in keys]
            blocks[block] = np.column_stack([col[k] for k in keys]) if keys else np.zeros((S, 0))
        _, u = _read_matrix(d / f"chain{c}_u.csv")
        _, v = _read_matrix(d / f"chain{c}_v.csv")
        _, mu = _read_matrix(d / f"chain{c}_mu.csv")
        _, theta_mean = _read_matrix(d / f"chain{c}_theta_mean.csv")
        chains.append(PosteriorSamples(
            **blocks,
            mu_a=mu[:, :n_a], mu_e=mu[:, n_a:],
            **{f"sigma2_{n}": col[f"sigma2_{n}"] for n in ("a", "e", "gamma", "u", "v")},
            u=u.reshape(S, n_a, t), v=v.reshape(S, n_e, t),
            deviance=col["deviance"], theta_mean=theta_mean, y=y.astype(np.int8),
            acceptance_rate_theta=float(meta.get(f"acceptance_rate_chain{c}", "nan")),
            iteration=col["iteration"].astype(np.int64), beta_names=names, chain=c - 1,
        ))
    return chains, meta


def read_index(path, id_column):
    header, body = read_csv(path)
    j = header.index(id_column)
    m = header.index("mark") if "mark" in header else None
    ids = [r[j] for r in body]
    marks = [r[m] for r in body] if m is not None else None
    return ids, marks
