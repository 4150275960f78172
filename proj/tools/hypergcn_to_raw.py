#!/usr/bin/env python3
"""Dump a HyperGCN-style pickle directory to the raw text files read by
`hypersage convert`.

Input directory (e.g. cocitation/cora):
    features.pickle    scipy sparse or dense matrix, one row per node
    hypergraph.pickle  dict: edge key -> iterable of node ids
    labels.pickle      sequence of class ids

Output: edges.txt, features.txt ("node col value" triples, 0-indexed),
labels.txt, plus the matching convert command on stdout.
"""

import argparse
import pickle
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("src", type=Path, help="directory holding the three pickles")
    ap.add_argument("dst", type=Path, help="directory for the raw text files")
    ap.add_argument("--name", default=None, help="dataset name (default: source directory name)")
    args = ap.parse_args()

    def load(name):
        with open(args.src / name, "rb") as f:
            return pickle.load(f)

    features = sp.csr_matrix(load("features.pickle"))
    hypergraph = load("hypergraph.pickle")
    labels = np.asarray(load("labels.pickle"))
    labels = labels.argmax(axis=1) if labels.ndim == 2 else labels.reshape(-1)

    args.dst.mkdir(parents=True, exist_ok=True)
    with open(args.dst / "edges.txt", "w") as f:
        for members in hypergraph.values():
            f.write(" ".join(str(int(v)) for v in sorted(set(members))) + "\n")
    coo = features.tocoo()
    with open(args.dst / "features.txt", "w") as f:
        for r, c, v in zip(coo.row, coo.col, coo.data):
            f.write(f"{r} {c} {float(v)!r}\n")
    with open(args.dst / "labels.txt", "w") as f:
        f.writelines(f"{int(y)}\n" for y in labels)

    name = args.name or args.src.name
    print(
        f"hypersage convert --edges {args.dst / 'edges.txt'} --features {args.dst / 'features.txt'} "
        f"--labels {args.dst / 'labels.txt'} --sparse --num-features {features.shape[1]} "
        f"--name {name} --out <data-root>/{name}"
    )


if __name__ == "__main__":
    main()
