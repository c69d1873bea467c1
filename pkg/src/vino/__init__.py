"""Neural operators trained by minimizing FEM-discretized energy functionals,
with data-driven and strong-form baselines, reference solvers, and dataset
tooling."""

__version__ = "0.1.0"
