"""Simulation and inference toolkit for contextual multi-layer stochastic
block models.

Submodules
----------
model       parameters, seeded samplers for the planted/null models, centering
thresholds  closed-form feasibility quantities (F, interaction matrix, sigma+)
families    decorated cycle/path families via color words, Xi weights, beta
statistics  detection statistic and recovery matrix (exact + transfer backends)
rounding    PSD/unit-diagonal projection, sign rounding, evaluation metrics
oracles     independent brute-force implementations used as ground truth
harness     seeded batch experiments (ROC/AUC, cosine curves, CSV/SVG output)
cli         command-line entry point
"""

__version__ = "0.1.0"

_SUBMODULES = (
    "model",
    "thresholds",
    "families",
    "statistics",
    "rounding",
    "oracles",
    "harness",
    "cli",
    "errors",
)

# Lazy submodule loading keeps `import cmsbm` free of numpy so that entry
# points can configure BLAS threading env vars before any array code loads.
def __getattr__(name):
    if name in _SUBMODULES:
        import importlib

        module = importlib.import_module(f".{name}", __name__)
        globals()[name] = module
        return module
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
