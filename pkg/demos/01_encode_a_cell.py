"""
Encoding a cell into its feature tensor
=======================================

A cell is a small DAG: node 0 is the input, the last node is the output,
and interior nodes are 3x3 convs, 1x1 convs, or 3x3 max-pools.  This
script builds one by hand, canonicalizes it, and walks through the
19x7x7 tensor the predictor consumes.
"""

import numpy as np

from renas.cellgraph import cell_id, io_distance, validate
from renas.costmodel import Skeleton
from renas.encoder import fit_scaler, pad7
from renas.pipeline import encode_cell

# A five-node cell: input feeds two parallel convs, both feed a pool,
# and the pool feeds the output.  Adjacency is given row -> column.
adj = [
    [0, 1, 1, 0, 0],
    [0, 0, 0, 1, 0],
    [0, 0, 0, 1, 0],
    [0, 0, 0, 0, 1],
    [0, 0, 0, 0, 0],
]
ops = ["INPUT", "CONV3X3", "CONV1X1", "MAXPOOL3X3", "OUTPUT"]

cell = validate(adj, ops)
print("canonical text:")
print(cell.to_text())
print("id:", cell_id(cell))
print("input-to-output distance:", io_distance(cell))

# Cells smaller than seven nodes are padded with zero rows and columns
# just before the output index, so the output always sits at index 6.
adj7, types7, pad_idx = pad7(cell)
print("padded at indices:", pad_idx)
print("padded type vector:", types7.tolist())

# The tensor has one op-type channel followed by nine FLOP channels and
# nine parameter channels, one per slot of the fixed host skeleton.
sk = Skeleton()
tensor = encode_cell(cell, sk)
print("tensor shape:", tensor.shape)
print("type channel:")
print(tensor[0])

# Raw FLOP counts grow with the slot's channel width; compare the first
# and last compute slots.
print("FLOPs channel, slot 0 nonzeros:", np.unique(tensor[1][tensor[1] != 0]))
print("FLOPs channel, slot 8 nonzeros:", np.unique(tensor[9][tensor[9] != 0]))

# Training normalizes each channel group to [-1, 1] by the maxima seen
# in the training set.  With a single cell the maxima come from itself.
scaler = fit_scaler([encode_cell(cell, sk)])
scaled = encode_cell(cell, sk, scaler)
print("after scaling, global max:", scaled.max())
