"""
Training the ranking predictor on synthetic labels
==================================================

The predictor never needs true accuracies at this scale: a deterministic
surrogate labeler gives every cell a plausible score, which is enough to
watch the pairwise-ranking pipeline learn an ordering end to end.
"""

from renas.datastore import sample_cells, split, synthetic_store
from renas.pipeline import TrainConfig, evaluate, train_predictor

# Sample distinct random cells and label them with the surrogate.
records = synthetic_store(sample_cells(600, seed=42))
train, holdout = split(records, 0.7, strategy="random", seed=0)
print(f"{len(train)} training cells, {len(holdout)} holdout cells")

# A short run is enough for a visible ranking signal.  The combined
# loss couples the score-order hinge with the embedding-continuity
# term; swap loss="mse" below to see plain regression do worse.
cfg = TrainConfig(epochs=40, batch=128, seed=0, loss="combined", eval_every=10)
model, log = train_predictor(train, cfg, eval_records=holdout)

for entry in log:
    line = f"epoch {entry['epoch']:3d}  loss {entry['loss']:.4f}"
    if "ktau" in entry:
        line += f"  holdout ktau {entry['ktau']:.4f}"
    print(line)

# The report counts every pair of holdout cells and checks whether the
# predicted order agrees with the label order.
report = evaluate(model, holdout)
print(f"final: {report.concordant} concordant / {report.discordant} discordant"
      f" -> ktau {report.ktau:.4f}")
