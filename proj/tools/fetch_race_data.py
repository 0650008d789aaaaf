"""Download the 24-hour race lap counts and write them as a mixmem dataset CSV.

usage: fetch_race_data.py OUT.csv [--url URL | --xlsx LOCAL.xlsx]

Reading the spreadsheet needs pandas and openpyxl. The table must come out
as 260 runners x 24 hourly lap counts; anything else is rejected rather than
guessed at. Columns are kept in the order they appear.
"""

import argparse
import io
import sys

import pandas as pd

DEFAULT_URL = "http://mathsci.ucd.ie/~brendan/data/24H.xlsx"
EXPECTED_ROWS, EXPECTED_COLS = 260, 24


def load_table(raw: bytes) -> pd.DataFrame:
    frame = pd.read_excel(io.BytesIO(raw), header=0)
    frame = frame.dropna(how="all").dropna(axis=1, how="all")
    numeric = frame.select_dtypes("number")
    # A leading runner-number column is treated as the id when 25 numeric columns remain.
    if numeric.shape[1] == EXPECTED_COLS + 1:
        ids = numeric.iloc[:, 0].astype("int64").astype(str)
        numeric = numeric.iloc[:, 1:]
    else:
        ids = pd.Series([f"runner{i + 1}" for i in range(len(numeric))], index=numeric.index)
    if numeric.shape != (EXPECTED_ROWS, EXPECTED_COLS):
        raise ValueError(f"expected {EXPECTED_ROWS} x {EXPECTED_COLS} lap counts, found {numeric.shape[0]} x {numeric.shape[1]}")
    if numeric.isna().any().any():
        raise ValueError("missing lap counts in the table")
    counts = numeric.round().astype("int64")
    if (counts < 0).any().any() or not (counts == numeric).all().all():
        raise ValueError("lap counts must be non-negative integers")
    counts.columns = [f"h{m + 1}" for m in range(EXPECTED_COLS)]
    counts.insert(0, "runner", ids.values)
    return counts


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("out")
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--url", default=DEFAULT_URL)
    source.add_argument("--xlsx", help="use an already downloaded spreadsheet")
    args = parser.parse_args()

    try:
        if args.xlsx:
            with open(args.xlsx, "rb") as fh:
                raw = fh.read()
        else:
            import requests

            response = requests.get(args.url, timeout=60)
            response.raise_for_status()
            raw = response.content
        table = load_table(raw)
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero
        print(f"fetch_race_data: {exc}", file=sys.stderr)
        return 1
    table.to_csv(args.out, index=False, lineterminator="\n")
    print(f"wrote {len(table)} x {EXPECTED_COLS} table to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
