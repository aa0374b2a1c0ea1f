"""
Joint training against the three baselines
==========================================

Trains on a biased synthetic corpus (each labeller adds its own spatial
bias field plus noise) and scores every model on a held-out corpus:

* BL1 fits all raw labels,
* BL2 fits their per-pixel mean,
* BL3 fits the ground truth (an upper bound),
* the joint model alternates predictor rounds with noise-variance updates.
"""

from noisy_saliency.synthetic import CorpusSpec, make_corpus
from noisy_saliency.trainer import TrainConfig, run, run_baseline

spec = dict(count=32, size=16, labellers=4, bias="fields")
train, _ = make_corpus(CorpusSpec(seed=0, **spec))
held, _ = make_corpus(CorpusSpec(seed=1000, **spec))
cfg = TrainConfig()

###############################################################################
# Baselines: one round each, no noise model.

for mode in ("BL1", "BL2", "BL3"):
    _, hist = run_baseline(train, mode, cfg, eval_set=held)
    r = hist.rounds[0]
    print(f"{mode}: MAE {r['mae']:.4f}  mean F {r['mean_f']:.4f}  ({r['epochs']} epochs)")

###############################################################################
# Joint model, round by round. Round 1 starts from zero variance and so
# repeats BL1; later rounds train under noise drawn from the updated bank.

_, bank, hist = run(train, cfg, eval_set=held)
for r in hist.rounds:
    print(f"round {r['round']}: MAE {r['mae']:.4f}  mean F {r['mean_f']:.4f}  "
          f"mean sigma {r['mean_sigma']:.4f}  noise loss {r['noise_loss']:.1f}")
