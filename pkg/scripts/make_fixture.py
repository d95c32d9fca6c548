"""Build the synthetic 905 x 37 school-activity fixture and freeze oracle values.

The activity catalogue mirrors a real yearbook roster: raw club ids are
grouped into 37 activities by ``grouping.csv``. Ties are drawn from a
bilinear logit model on the grouped matrix, the total is trimmed to
exactly 2361 (tie density 0.0705), and each grouped tie is spread over
one or more raw member clubs so that OR-merging reproduces it.

Expected statistics are computed here by brute force on the grouped
matrix held in memory, independently of ``amenet``.

    python3 scripts/make_fixture.py [outdir]
"""
import csv
import json
import sys
from math import comb
from pathlib import Path

import numpy as np

GROUPS = {
    "language": {
        "Asian": ["Asian"],
        "Spanish": ["Hispanic.Club", "Spanish.Club", "Spanish.Club..high.", "Spanish.NHS"],
        "Latin": ["Latin"],
        "French": ["French.Club..low.", "French.Club..high.", "French.NHS"],
        "German": ["German.Club", "German.NHS"],
    },
    "academic": {
        "Debate": ["Debate"],
        "Forensics": ["Forensics", "Forensics..National.Forensics.League."],
        "Chess": ["Chess"],
        "Science.Olympiad": ["Science.Olympiad"],
        "Quiz.Bowl": ["Quiz.Bowl"],
        "Academic.Decathalon": ["Academic.Decathalon"],
    },
    "news": {"Newspaper": ["Newspaper"], "Yearbook": ["Yearbook.Contributors", "Yearbook.Staff"]},
    "cheer": {
        "Pep": ["Pep.Club", "Pep.Club.Officers"],
        "Drill": ["Drill"],
        "Cheer": ["Cheerleaders..8th", "Cheerleaders..9th", "Cheerleaders..Spirit.Squad",
                  "Cheerleaders..JV", "Cheerleaders..V"],
    },
    "service": {
        "National.Honor.Society": ["National.Honor.Society"],
        "Drunk.Driving": ["Drunk.Driving", "Drunk.Driving.Officers"],
        "Key": ["Key"],
    },
    "art": {"Art": ["Art"], "Theatre": ["Theatre"], "Thespian": ["Thespian"]},
    "music": {
        "Band": ["Band..8th", "Band..Marching..Symphonic.", "Band..Jazz"],
        "Orchestra": ["Orchestra..8th", "Orchestra..Full.Concert", "Orchestra..Symphonic"],
        "Choir": ["Choir..treble", "Choir..concert", "Choir..women.s.ensemble", "Choir..a.capella",
                  "Choir..chamber.singers", "Choir..vocal.ensemble..4.women.", "Choir..barbershop.quartet..4.men."],
    },
    "sports": {
        "Football": ["Football..8th", "Football..9th", "Football..V"],
        "Soccer": ["Soccer"],
        "Volleyball": ["Volleyball..8th", "Volleyball..9th", "Volleyball..JV", "Volleyball..V"],
        "Basketball": [f"Basketball..{s}.{l}" for s in ("boys", "girls") for l in ("8th", "9th", "JV", "V")],
        "Baseball": ["Baseball..JV..10th.", "Baseball..V"],
        "Softball": ["Softball..JV..10th.", "Softball..V"],
        "Cross.Country": ["Cross.Country..boys.8th", "Cross.Country..girls.8th",
                          "Cross.Country..boys.V", "Cross.Country..girls.V"],
        "Golf": ["Golf"],
        "Swim": ["Swim...Dive.Team..boys", "Swim...Dive.Team..girls"],
        "Tennis": ["Tennis..boys.V", "Tennis.girls.V"],
        "Track": ["Track..boys.8th", "Track..girls.8th", "Track..boys.V", "Track..girls.V"],
        "Wrestling": ["Wrestling..8th", "Wrestling..V"],
    },
}
RACES = {"white": 518, "black": 314, "Hispanic": 54, "Asian": 19}
N_TIES = 2361
SEED = 1996


def naive_census(Y):
    """Count tetrads by tie count, looping over event pairs and all actor pairs."""
    n_a, n_e = Y.shape
    ia, ja = np.triu_indices(n_a, 1)
    by_count = np.zeros(5, dtype=np.int64)
    shared_actor = shared_event = 0
    for k in range(n_e):
        for l in range(k + 1, n_e):
            a, b, c, d = Y[ia, k], Y[ia, l], Y[ja, k], Y[ja, l]
            n = a + b + c + d
            by_count += np.bincount(n, minlength=5)
            two = n == 2
            shared_actor += int(np.sum(two & (((a == 1) & (b == 1)) | ((c == 1) & (d == 1)))))
            shared_event += int(np.sum(two & (((a == 1) & (c == 1)) | ((b == 1) & (d == 1)))))
    disjoint = int(by_count[2]) - shared_actor - shared_event
    return by_count, shared_actor, shared_event, disjoint


def main(out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(SEED)
    groups = [(cat, g, members) for cat, gs in GROUPS.items() for g, members in gs.items()]
    assert len(groups) == 37

    n_a = sum(RACES.values())
    race = np.array([r for r, n in RACES.items() for _ in range(n)])
    rng.shuffle(race)
    gender = np.where(rng.random(n_a) < 0.58, "girl", "boy")
    grade = rng.integers(8, 13, size=n_a)

    # bilinear logit draw; intercept tuned so the expected density is near target
    n_e = len(groups)
    mu_a = 1.2 * rng.standard_normal(n_a) - 0.8 * (rng.random(n_a) < 0.28) * 3
    mu_e = 0.8 * rng.standard_normal(n_e)
    u = rng.standard_normal((n_a, 2))
    v = 1.1 * rng.standard_normal((n_e, 2))
    eta = mu_a[:, None] + mu_e[None, :] + u @ v.T + rng.standard_normal((n_a, n_e))
    lo, hi = -15.0, 5.0
    for _ in range(60):
        mid = (lo + hi) / 2
        if (1 / (1 + np.exp(-(eta + mid)))).sum() > N_TIES:
            hi = mid
        else:
            lo = mid
    Y = (rng.random((n_a, n_e)) < 1 / (1 + np.exp(-(eta + lo)))).astype(np.int8)
    ties = np.flatnonzero(Y)
    if ties.size > N_TIES:
        Y.flat[rng.choice(ties, ties.size - N_TIES, replace=False)] = 0
    elif ties.size < N_TIES:
        Y.flat[rng.choice(np.flatnonzero(Y == 0), N_TIES - ties.size, replace=False)] = 1
    assert int(Y.sum()) == N_TIES

    actor_ids = [f"s{i + 1:04d}" for i in range(n_a)]
    with open(out / "actors.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["actor_id", "gender", "race", "grade", "mark"])
        for i in range(n_a):
            w.writerow([actor_ids[i], gender[i], race[i], int(grade[i]), race[i]])
    with open(out / "events.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["event_id", "category"])
        for cat, _, members in groups:
            for m in members:
                w.writerow([m, cat])
    with open(out / "grouping.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["event_id", "group"])
        for _, g, members in groups:
            for m in members:
                w.writerow([m, g])
    n_edges = 0
    with open(out / "edges.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["actor_id", "event_id"])
        for i, k in zip(*np.nonzero(Y)):
            members = groups[k][2]
            take = rng.random(len(members)) < 0.3
            take[rng.integers(len(members))] = True
            for m, keep in zip(members, take):
                if keep:
                    w.writerow([actor_ids[i], m])
                    n_edges += 1

    by_count, shared_actor, shared_event, disjoint = naive_census(Y)
    total = comb(n_a, 2) * comb(n_e, 2)
    assert int(by_count.sum()) == total
    balanced = int(by_count[0] + by_count[2] + by_count[4])
    expected = {
        "n_actors": n_a,
        "n_events": n_e,
        "n_ties": N_TIES,
        "n_raw_edges": n_edges,
        "event_ids": [g for _, g, _ in groups],
        "tie_density": N_TIES / (n_a * n_e),
        "total_tetrads": total,
        "balanced_tetrads": balanced,
        "balance_proportion": balanced / total,
        "by_tie_count": [int(x) for x in by_count],
        "two_tie": {"disjoint": disjoint, "shared_actor": shared_actor, "shared_event": shared_event},
        "actor_degree_sum_check": int(Y.sum(axis=1).sum()),
        "event_degrees": [int(x) for x in Y.sum(axis=0)],
        "isolates": int((Y.sum(axis=1) == 0).sum()),
    }
    (out / "expected.json").write_text(json.dumps(expected, indent=1) + "\n")
    print(json.dumps({k: expected[k] for k in ("tie_density", "balance_proportion", "isolates", "n_raw_edges")}))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "magnet_synth")
