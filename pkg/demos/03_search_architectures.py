"""
Searching the cell space with a trained predictor
=================================================

Once a predictor ranks cells well, an evolutionary loop can hunt the
space for high scorers without evaluating a single real network.  On a
small space we can also brute-force every cell and see how close the
evolved answer comes to the true optimum.
"""

from renas.cellgraph import cell_id
from renas.datastore import split, synthetic_store
from renas.evosearch import EaConfig, ea_search, enumerate_space, exhaustive_search
from renas.pipeline import TrainConfig, train_predictor

# Every canonical cell with at most five nodes: small enough to list.
space = enumerate_space(5)
records = synthetic_store(space)
print(f"searchable space: {len(space)} cells")

# Train on a 20% sample of the space, keeping true labels aside.
train, _ = split(records, 0.2, strategy="random", seed=0)
model, _ = train_predictor(train, TrainConfig(epochs=60, batch=128, seed=0))
truth = {r.id: r.val_acc for r in records}

# Exhaustive ranking by predictor score is the reference answer.
best_by_model = exhaustive_search(model, space, top_k=5)
print("\npredictor's exhaustive top 5:")
for cell, score in best_by_model:
    print(f"  {cell_id(cell)}  score {score:+.4f}  true {truth[cell_id(cell)]:.4f}")

# The evolutionary loop only ever sees predictor scores.
cfg = EaConfig(generations=40, population=64, seed=0, top_k=5, max_nodes=5)
evolved = ea_search(model, cfg)
print("\nevolved top 5:")
for cell, score in evolved:
    print(f"  {cell_id(cell)}  score {score:+.4f}  true {truth[cell_id(cell)]:.4f}")

# Where does the evolved winner sit in the true ranking of the space?
ranked = sorted(records, key=lambda r: -r.val_acc)
winner = max(evolved, key=lambda pair: truth[cell_id(pair[0])])
rank = next(i for i, r in enumerate(ranked, 1) if r.id == cell_id(winner[0]))
print(f"\nbest evolved cell is #{rank} of {len(space)} by true label")
