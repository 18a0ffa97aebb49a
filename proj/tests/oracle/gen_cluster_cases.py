#!/usr/bin/env python3
"""Regenerate tests/fixtures/cluster_cases.json with scikit-learn as reference.

Features: char 3-5-grams plus token 1-3-grams, smoothed idf, one joint L2
normalization. Clustering: sklearn HDBSCAN (min_cluster_size=3,
min_samples=1, EOM) on the precomputed cosine distance matrix. When no
cluster is found the single-cluster variant is used instead.
"""
import json
import pathlib
import random
import re

import numpy as np
from scipy.sparse import hstack
from sklearn.cluster import HDBSCAN
from sklearn.feature_extraction.text import TfidfVectorizer
from sklearn.preprocessing import normalize


def tokens(name):
    out = []
    for part in re.split(r"[^0-9A-Za-z\x80-￿]+", name):
        out.extend(re.findall(r"[0-9]+|[^0-9]+", part))
    return [t for t in out if t]


def token_ngrams(name):
    t = tokens(name)
    return [" ".join(t[i:i + n]) for n in (1, 2, 3) for i in range(len(t) - n + 1)]


def vectors(names):
    char = TfidfVectorizer(analyzer="char", ngram_range=(3, 5), norm=None, lowercase=False)
    tok = TfidfVectorizer(analyzer=token_ngrams, norm=None, lowercase=False)
    blocks = []
    for v in (char, tok):
        try:
            blocks.append(v.fit_transform(names))
        except ValueError:  # empty vocabulary
            pass
    return normalize(hstack(blocks).tocsr())


def cluster(names):
    names = sorted(names)
    if len(names) < 3:
        return names, [-1] * len(names)
    x = vectors(names)
    d = np.clip(1.0 - (x @ x.T).toarray(), 0.0, None)
    np.fill_diagonal(d, 0.0)
    labels = None
    for single in (False, True):
        labels = HDBSCAN(min_cluster_size=3, min_samples=1, metric="precomputed",
                         cluster_selection_method="eom",
                         allow_single_cluster=single).fit(d).labels_
        if (labels >= 0).any():
            break
    remap, out = {}, []
    for l in labels:
        if l < 0:
            out.append(-1)
        else:
            out.append(remap.setdefault(int(l), len(remap)))
    return names, out


WORDS = ["proc", "inject", "mutex", "beacon", "dns", "dga", "drop", "temp", "exe", "run",
         "key", "persist", "shadow", "copy", "delete", "hook", "keylog", "defender",
         "disable", "startup", "folder", "registry", "network", "c2", "ip", "http",
         "upload", "token", "privilege", "service", "driver", "wmi", "task", "sched"]


def planted(seed, groups=5, noise=20):
    rng = random.Random(seed)
    names = []
    bases = set()
    for g in range(groups):
        while True:
            base = "_".join(rng.sample(WORDS, 3))
            if base not in bases:
                bases.add(base)
                break
        size = rng.randint(3, 10)
        variants = {base}
        while len(variants) < size:
            variants.add(f"{base}_{rng.randint(1, 99)}")
        for v in variants:
            names.append(v)
    used = set(names)
    for i in range(noise):
        while True:
            n = "_".join(rng.sample(WORDS, 2)) + f"_{rng.choice('abcdefghijklmnop')}{i}"
            if n not in used:
                used.add(n)
                names.append(n)
                break
    return names


def main():
    fixtures = [
        ["drop_temp_exe_1", "drop_temp_exe_2", "drop_temp_exe", "beacon_dns"],
        ["c2_known_ip", "persistence_run_key"],
        ["x"] * 1 + ["y_1", "y_2"],
        ["same_name_a", "same_name_b", "same_name_c", "other_thing_x", "other_thing_y",
         "other_thing_z"],
    ]
    for seed in range(6):
        fixtures.append(planted(seed))
    cases = []
    for names in fixtures:
        n, labels = cluster(names)
        cases.append({"names": n, "labels": labels})
    dest = pathlib.Path(__file__).resolve().parent.parent / "fixtures" / "cluster_cases.json"
    dest.write_text(json.dumps(cases, indent=1) + "\n")
    print(f"wrote {len(cases)} cases to {dest}")


if __name__ == "__main__":
    main()
