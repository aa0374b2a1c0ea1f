"""
End-to-end command-line pipeline
================================

The same steps a shell user would run, driven through ``cli.main``:
generate a corpus, train, re-run from the manifest, export maps, evaluate,
and merge rounds into one CSV. Output lands in ``demo_out/pipeline``.

Shell equivalent::

    noisy-saliency synth --out data --count 16
    noisy-saliency train --data data --out run --rounds 3
    noisy-saliency export --checkpoint run/round_3.ckpt --data data --out pred
    noisy-saliency eval --pred pred --gt data/gt --out scores
    noisy-saliency report run --out fig4.csv
"""

from pathlib import Path

from noisy_saliency.cli import main

root = Path("demo_out/pipeline")
data, run, again = root / "data", root / "run", root / "again"

main(["synth", "--out", str(data), "--count", "16", "--seed", "1"])
main(["train", "--data", str(data), "--out", str(run), "--rounds", "3"])

###############################################################################
# A manifest pins config, seed and dataset fingerprint; replaying it
# reproduces every checkpoint byte for byte.

main(["train", "--manifest", str(run / "manifest.json"), "--out", str(again)])
same = (run / "round_3.ckpt").read_bytes() == (again / "round_3.ckpt").read_bytes()
print("replayed checkpoint identical:", same)

main(["export", "--checkpoint", str(run / "round_3.ckpt"), "--data", str(data),
      "--out", str(root / "pred"), "--variances"])
main(["eval", "--pred", str(root / "pred"), "--gt", str(data / "gt"),
      "--out", str(root / "scores")])
main(["report", str(run), "--out", str(root / "fig4.csv")])
print((root / "fig4.csv").read_text())
