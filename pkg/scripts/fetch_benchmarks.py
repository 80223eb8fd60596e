#!/usr/bin/env python3
"""Download the benchmark datasets into data/ (needs network access).

Creates:
  data/california_housing.csv   header: MedInc,...,Longitude,MedHouseVal
  data/winequality-red.csv      UCI file converted from ';' to ',' separators
  data/winequality-white.csv    likewise
  data/mnist/                   the four IDX files, gunzipped

The acceptance tests for the California Housing and Wine Quality criteria
run automatically once the CSV files exist (override the location with
$RLPROJ_DATA).
"""

import csv
import gzip
import sys
import urllib.request
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "data"

WINE_URLS = {
    "winequality-red.csv": "https://archive.ics.uci.edu/ml/machine-learning-databases/wine-quality/winequality-red.csv",
    "winequality-white.csv": "https://archive.ics.uci.edu/ml/machine-learning-databases/wine-quality/winequality-white.csv",
}

MNIST_URLS = {
    "train-images-idx3-ubyte": "https://storage.googleapis.com/cvdf-datasets/mnist/train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte": "https://storage.googleapis.com/cvdf-datasets/mnist/train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte": "https://storage.googleapis.com/cvdf-datasets/mnist/t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte": "https://storage.googleapis.com/cvdf-datasets/mnist/t10k-labels-idx1-ubyte.gz",
}


def fetch_california():
    out = DATA / "california_housing.csv"
    if out.exists():
        print(f"exists: {out}")
        return
    from sklearn.datasets import fetch_california_housing

    ds = fetch_california_housing()
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.feature_names) + ["MedHouseVal"])
        for x, y in zip(ds.data, ds.target):
            writer.writerow([f"{v:.17g}" for v in x] + [f"{y:.17g}"])
    print(f"wrote {out}")


def fetch_wine():
    for name, url in WINE_URLS.items():
        out = DATA / name
        if out.exists():
            print(f"exists: {out}")
            continue
        raw = urllib.request.urlopen(url, timeout=60).read().decode()
        # UCI ships semicolon separators and quoted headers; normalize to
        # plain comma-separated with bare column names
        rows = [r for r in csv.reader(raw.splitlines(), delimiter=";")]
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([c.strip().strip('"') for c in rows[0]])
            writer.writerows(rows[1:])
        print(f"wrote {out}")


def fetch_mnist():
    mdir = DATA / "mnist"
    mdir.mkdir(exist_ok=True)
    for name, url in MNIST_URLS.items():
        out = mdir / name
        if out.exists():
            print(f"exists: {out}")
            continue
        blob = urllib.request.urlopen(url, timeout=120).read()
        out.write_bytes(gzip.decompress(blob))
        print(f"wrote {out}")


def main():
    DATA.mkdir(exist_ok=True)
    failures = []
    for job in (fetch_california, fetch_wine, fetch_mnist):
        try:
            job()
        except Exception as e:  # keep going; report at the end
            failures.append(f"{job.__name__}: {e}")
    if failures:
        print("some downloads failed:", *failures, sep="\n  ", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
