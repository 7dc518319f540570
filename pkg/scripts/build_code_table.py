"""Regenerate src/adaptfec/data/codes.txt by search.

Usage: python3 scripts/build_code_table.py [MAX_T] [--stats FILE] [--seeds S]

Every seed is searched so the statistics cover S runs per triple; the table
keeps the lowest seed that succeeded.
"""

import argparse
import time
from pathlib import Path

from adaptfec.blockcode import (
    MAX_T,
    CodeConstructionError,
    CodeParams,
    format_code_table,
    search_code,
    verify_block_code,
)

OUT = Path(__file__).resolve().parents[1] / "src" / "adaptfec" / "data" / "codes.txt"


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("max_t", type=int, nargs="?", default=MAX_T)
    ap.add_argument("--stats", type=Path)
    ap.add_argument("--seeds", type=int, default=4)
    args = ap.parse_args()
    codes = []
    stats_lines = ["T,B,N,seed,draws,restarts,moves,initial_failures,seconds"]
    for T in range(1, args.max_t + 1):
        for B in range(1, T + 1):
            for N in range(1, B + 1):
                params = CodeParams(T, B, N)
                found = None
                for seed in range(args.seeds):
                    t0 = time.time()
                    try:
                        code, st = search_code(params, seed)
                    except CodeConstructionError as exc:
                        print(exc, flush=True)
                        continue
                    assert verify_block_code(code)
                    dt = time.time() - t0
                    line = f"{T},{B},{N},{seed},{st.draws},{st.restarts},{st.moves},{st.initial_failures},{dt:.2f}"
                    stats_lines.append(line)
                    print(line, flush=True)
                    found = found or code
                if found is not None:
                    codes.append(found)
    OUT.write_text(format_code_table(codes))
    if args.stats:
        args.stats.write_text("\n".join(stats_lines) + "\n")


if __name__ == "__main__":
    main()
