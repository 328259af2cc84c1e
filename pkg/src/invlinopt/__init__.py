"""Data-driven inverse linear optimization.

Estimate the cost vector of a linear program from noisy observations of
optimal solutions collected across experiments, with sequential, online and
adaptive-experiment-selection variants, on top of self-contained LP / MILP /
QP kernels.
"""

__version__ = "0.1.0"
