#!/usr/bin/env python3
"""Write data/california_housing.csv.

The StatLib California Housing table (20640 block groups, 8 features,
median house value in units of $100k) is taken from the copy bundled in the
pytorch-widedeep 1.7.0 wheel, which installs from any PyPI mirror. The wheel
and the resulting CSV are both checked against pinned SHA-256 digests.

Usage: python3 scripts/fetch_california.py [--wheel PATH] [--out PATH]
"""

import argparse
import hashlib
import io
import pathlib
import subprocess
import sys
import tempfile
import zipfile

WHEEL = "pytorch_widedeep-1.7.0-py3-none-any.whl"
WHEEL_SHA256 = "b3dd4f344680fed047a7ffe3b78b3b65d171521ccdec99eee45513070e6d7187"
MEMBER = "pytorch_widedeep/datasets/data/california_housing.parquet.brotli"
CSV_SHA256 = "6c920b8ea6eae64f9e0a29ec8cc9c82ccd01d977bd1dcad4a8c15ab1fe30978a"
COLUMNS = [
    "MedInc", "HouseAge", "AveRooms", "AveBedrms",
    "Population", "AveOccup", "Latitude", "Longitude", "MedHouseVal",
]


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def download_wheel(dest: pathlib.Path) -> pathlib.Path:
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "--only-binary=:all:",
         "-d", str(dest), "pytorch-widedeep==1.7.0"],
        check=True,
    )
    return dest / WHEEL


def main() -> int:
    root = pathlib.Path(__file__).resolve().parent.parent
    ap = argparse.ArgumentParser()
    ap.add_argument("--wheel", type=pathlib.Path)
    ap.add_argument("--out", type=pathlib.Path, default=root / "data" / "california_housing.csv")
    args = ap.parse_args()

    import pandas as pd

    with tempfile.TemporaryDirectory() as tmp:
        wheel = args.wheel or download_wheel(pathlib.Path(tmp))
        raw = wheel.read_bytes()
        if sha256(raw) != WHEEL_SHA256:
            print(f"checksum mismatch for {wheel}", file=sys.stderr)
            return 1
        table = zipfile.ZipFile(io.BytesIO(raw)).read(MEMBER)

    df = pd.read_parquet(io.BytesIO(table))[COLUMNS]
    lines = [",".join(COLUMNS)]
    for row in df.itertuples(index=False):
        lines.append(",".join(repr(float(v)) for v in row))
    body = ("\n".join(lines) + "\n").encode()
    if sha256(body) != CSV_SHA256:
        print("checksum mismatch for generated csv", file=sys.stderr)
        return 1
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_bytes(body)
    print(f"wrote {args.out} ({len(df)} rows, sha256 {sha256(body)})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
