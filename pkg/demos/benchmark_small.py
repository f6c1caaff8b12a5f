"""Run a small benchmark matrix through the CLI and show the aggregate table.

The full matrix (both synthetic signals, four SNR levels, both correlation
settings, ten seeds) is the CLI default; this keeps it small enough to finish
in about a minute.
"""

import subprocess
import sys
import tempfile
from pathlib import Path

out = Path(tempfile.mkdtemp(prefix="mvdenoise_bench_"))
cmd = [
    sys.executable, "-m", "mvdenoise.cli", "benchmark",
    "--signals", "heavydoppler3",
    "--snrs", "0,5",
    "--rhos", "0,0.75",
    "--methods", "mgwd,baseline",
    "--seeds", "3",
    "--n", "2048",
    "--calib-reps", "300",
    "--seed", "1",
    "--out", str(out),
]
subprocess.run(cmd, check=True)

print(f"\noutputs in {out}:")
for p in sorted(out.iterdir()):
    print(" ", p.name)
print("\naggregate table:")
print((out / "aggregate.txt").read_text())
