#!/usr/bin/env python3
"""Write data/ccpp.csv.

The Combined Cycle Power Plant table (9568 hourly rows: AT, V, AP, RH and
the net electrical output PE) is read from the UCI archive zip, sheet
"Sheet1" of Folds5x2_pp.xlsx. Needs network access to archive.ics.uci.edu,
pandas and openpyxl.

No digest is pinned for the archive. The script prints the SHA-256 of the zip
and of the generated CSV; pass them back with --zip-sha256 / --csv-sha256 to
make later fetches verify against the first one.

Usage: python3 scripts/fetch_ccpp.py [--zip PATH] [--out PATH]
                                     [--zip-sha256 HEX] [--csv-sha256 HEX]
"""

import argparse
import hashlib
import io
import pathlib
import sys
import urllib.request
import zipfile

URL = "https://archive.ics.uci.edu/static/public/294/combined+cycle+power+plant.zip"
MEMBER = "CCPP/Folds5x2_pp.xlsx"
COLUMNS = ["AT", "V", "AP", "RH", "PE"]
ROWS = 9568


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def main() -> int:
    root = pathlib.Path(__file__).resolve().parent.parent
    ap = argparse.ArgumentParser()
    ap.add_argument("--zip", type=pathlib.Path, help="use a local copy of the archive")
    ap.add_argument("--out", type=pathlib.Path, default=root / "data" / "ccpp.csv")
    ap.add_argument("--zip-sha256")
    ap.add_argument("--csv-sha256")
    args = ap.parse_args()

    import pandas as pd

    if args.zip:
        raw = args.zip.read_bytes()
    else:
        with urllib.request.urlopen(URL, timeout=60) as resp:
            raw = resp.read()
    if args.zip_sha256 and sha256(raw) != args.zip_sha256:
        print("checksum mismatch for archive", file=sys.stderr)
        return 1

    archive = zipfile.ZipFile(io.BytesIO(raw))
    name = next((n for n in archive.namelist() if n.endswith("Folds5x2_pp.xlsx")), MEMBER)
    df = pd.read_excel(io.BytesIO(archive.read(name)), sheet_name=0)
    if list(df.columns) != COLUMNS or len(df) != ROWS:
        print(f"unexpected table: columns {list(df.columns)}, {len(df)} rows", file=sys.stderr)
        return 1

    lines = [",".join(COLUMNS)]
    for row in df.itertuples(index=False):
        lines.append(",".join(repr(float(v)) for v in row))
    body = ("\n".join(lines) + "\n").encode()
    if args.csv_sha256 and sha256(body) != args.csv_sha256:
        print("checksum mismatch for generated csv", file=sys.stderr)
        return 1
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_bytes(body)
    print(f"wrote {args.out} ({len(df)} rows)")
    print(f"zip sha256 {sha256(raw)}")
    print(f"csv sha256 {sha256(body)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
