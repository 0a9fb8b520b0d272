#!/usr/bin/env python3
"""One-time converter from public multiple-instance datasets to bag-CSV.

Output layout (one instance per line, no header):

    bag_id,label,f1,f2,...,fd

Supported inputs:

  musk-c45      UCI MUSK ``clean1.data`` / ``clean2.data``:
                molecule_name,conformation_name,166 features,class
  generic-c45   bag_id,instance_id,features...,class (feature count inferred)
  svmlight-mil  one instance per line: ``label bag:instance idx:val ...``
                (1-based sparse indices; pass --dim for the dense width)
  matlab        .mat files holding an instance matrix, a bag-id vector and
                a per-bag or per-instance label vector (requires scipy);
                variable names are guessed but can be forced with --keys

Examples:

    python3 tools/convert_mil_datasets.py musk-c45 clean1.data data/musk1.csv
    python3 tools/convert_mil_datasets.py musk-c45 clean2.data data/musk2.csv
    python3 tools/convert_mil_datasets.py svmlight-mil elephant.svm data/elephant.csv --dim 230
    python3 tools/convert_mil_datasets.py matlab elephant_100x100_matlab.mat data/elephant.csv
"""

import argparse
import sys


def write_rows(rows, out_path):
    with open(out_path, "w") as fh:
        for bag_id, label, feats in rows:
            fh.write(f"{bag_id},{label}," + ",".join(repr(float(v)) for v in feats) + "\n")
    print(f"wrote {len(rows)} instances to {out_path}")


def convert_musk_c45(path, expect_features=166):
    rows = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip().rstrip(".")
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            if len(fields) != expect_features + 3:
                raise SystemExit(
                    f"{path}:{line_no}: expected {expect_features + 3} fields, got {len(fields)}"
                )
            molecule = fields[0]
            feats = [float(v) for v in fields[2:-1]]
            label = int(float(fields[-1]))
            rows.append((molecule, label, feats))
    return rows


def convert_generic_c45(path):
    rows = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip().rstrip(".")
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            if len(fields) < 4:
                raise SystemExit(f"{path}:{line_no}: too few fields")
            bag_id = fields[0]
            feats = [float(v) for v in fields[2:-1]]
            label = int(float(fields[-1]))
            rows.append((bag_id, label, feats))
    return rows


def convert_svmlight_mil(path, dim):
    if dim is None:
        raise SystemExit("svmlight-mil needs --dim (dense feature width)")
    rows = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.split("#")[0].strip()
            if not line:
                continue
            parts = line.split()
            label_raw = float(parts[0])
            label = 1 if label_raw > 0 else 0
            bag_id = parts[1].split(":")[0] if ":" in parts[1] else parts[1]
            feats = [0.0] * dim
            start = 2 if ":" in parts[1] else 1
            for tok in parts[start:]:
                if ":" not in tok:
                    continue
                idx, val = tok.split(":")
                idx = int(idx)
                if not 1 <= idx <= dim:
                    raise SystemExit(f"{path}:{line_no}: index {idx} outside 1..{dim}")
                feats[idx - 1] = float(val)
            rows.append((bag_id, label, feats))
    return rows


def convert_matlab(path, keys):
    try:
        import numpy as np
        from scipy.io import loadmat
        from scipy.sparse import issparse
    except ImportError:
        raise SystemExit("matlab input needs scipy (pip install scipy)")

    mat = {k: v for k, v in loadmat(path).items() if not k.startswith("__")}
    if keys:
        x_key, bag_key, label_key = keys.split(",")
    else:
        # Guess: the widest 2-D numeric array is the instance matrix; the
        # integer vector matching its row count is the bag ids; the
        # remaining +/-1 or 0/1 vector is the labels.
        x_key = max(
            (k for k, v in mat.items() if getattr(v, "ndim", 0) == 2 and min(v.shape) > 1),
            key=lambda k: mat[k].shape[0] * mat[k].shape[1],
        )
        n = mat[x_key].shape[0]
        vectors = [
            k
            for k, v in mat.items()
            if k != x_key and getattr(v, "size", 0) in (n,) and k != x_key
        ]
        if len(vectors) < 2:
            raise SystemExit(
                f"could not guess variables, found {list(mat)}; use --keys x,bags,labels"
            )
        # Bag ids repeat; labels have at most a handful of distinct values
        # but bag ids have more.
        counts = {k: len(set(np.asarray(mat[k]).ravel().tolist())) for k in vectors}
        bag_key = max(counts, key=counts.get)
        label_key = min(counts, key=counts.get)

    x = mat[x_key]
    if issparse(x):
        x = x.toarray()
    x = np.asarray(x, dtype=float)
    bags = np.asarray(mat[bag_key]).ravel()
    labels = np.asarray(mat[label_key]).ravel()
    rows = []
    if labels.size == x.shape[0]:
        inst_labels = [1 if v > 0 else 0 for v in labels]
    else:
        # Per-bag labels: broadcast by bag id order of appearance.
        by_bag = {}
        order = []
        for b in bags:
            if b not in by_bag:
                by_bag[b] = len(order)
                order.append(b)
        inst_labels = [1 if labels[by_bag[b]] > 0 else 0 for b in bags]
    for i in range(x.shape[0]):
        rows.append((str(bags[i]), inst_labels[i], x[i].tolist()))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("format", choices=["musk-c45", "generic-c45", "svmlight-mil", "matlab"])
    ap.add_argument("input")
    ap.add_argument("output")
    ap.add_argument("--dim", type=int, default=None, help="dense width for svmlight-mil")
    ap.add_argument("--keys", default=None, help="matlab: x_key,bag_key,label_key")
    args = ap.parse_args()

    if args.format == "musk-c45":
        rows = convert_musk_c45(args.input)
    elif args.format == "generic-c45":
        rows = convert_generic_c45(args.input)
    elif args.format == "svmlight-mil":
        rows = convert_svmlight_mil(args.input, args.dim)
    else:
        rows = convert_matlab(args.input, args.keys)
    if not rows:
        sys.exit("no instances parsed")
    write_rows(rows, args.output)


if __name__ == "__main__":
    main()
