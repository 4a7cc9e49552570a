"""The same pipeline through the command line interface.

Equivalent shell session:
    monoproj simulate --truth sinusoidal --n 100 --seed 1 --out data.csv
    monoproj fit --data data.csv --out estimate.csv --seed 2
    monoproj benchmark --truths flat,linear --replicates 2 --seed 3 --out table.csv

Run: python demos/06_command_line.py   (about 30 seconds)
"""
import json
import tempfile
from pathlib import Path

from monoproj.cli import main

out = Path(tempfile.mkdtemp())
main(["simulate", "--truth", "sinusoidal", "--n", "100", "--seed", "1", "--out", str(out / "data.csv")])
main(["fit", "--data", str(out / "data.csv"), "--out", str(out / "estimate.csv"), "--seed", "2"])
print((out / "estimate.csv").read_text().splitlines()[:3])
diag = json.loads((out / "estimate.json").read_text())
print("sigma_bar %.3f, ESS(beta) %.0f" % (diag["sigma_bar"], diag["chain"]["traces"]["beta"]["ess"]))

main(["benchmark", "--truths", "flat,linear", "--replicates", "2", "--seed", "3",
      "--out", str(out / "table.csv")])
print((out / "table.csv").read_text())
