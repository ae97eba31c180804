"""The command-line workflow end to end, driven from Python.

Equivalent shell session:

    adaptnav generate --output-dir out --presets corridor --seeds 0-1
    adaptnav run --output-dir out --presets corridor --seeds 0-1 --strategies fixed-baseline adaptive-heuristic
    adaptnav compare out/metrics.csv out/metrics.csv
    adaptnav train --output-dir out/train --steps 2048
"""

import tempfile
from pathlib import Path

from adaptnav.cli import main

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "out"
    main(["generate", "--output-dir", str(out), "--presets", "corridor", "--seeds", "0-1"])
    main(["run", "--output-dir", str(out), "--presets", "corridor", "--seeds", "0-1",
          "--strategies", "fixed-baseline", "adaptive-heuristic"])
    csv_path = str(out / "metrics.csv")
    main(["compare", csv_path, csv_path])
    main(["train", "--output-dir", str(out / "train"), "--steps", "2048", "--quiet"])
    print(sorted(p.name for p in (out / "train").iterdir()))
