"""
DFA-GNN: backpropagation-free training of graph convolutional networks.

Sub-packages:
  core      numerical kernels and graph operators
  data      dataset ingestion, splits, synthetic graphs
  models    the GCN forward model
  pipeline  optimizer, BP / DFA trainers, pseudo-error generator
  analysis  accuracy and alignment diagnostics
  api       result records and experiment commands
"""

__version__ = "0.1.0"
