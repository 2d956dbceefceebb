"""Dynamic ordered logit with fixed effects: simulation, composite conditional ML, inference, oracle checks."""

__version__ = "0.1.0"

from .core import (
    Bernoulli,
    ConstantAlpha,
    CorrelatedAlpha,
    DgpConfig,
    DiscreteUniform,
    Gaussian,
    GaussianAlpha,
    ModelShape,
    PanelDataset,
    Params,
    Spell,
    category_probability,
    indicator,
    simulate,
)
from .events import BandwidthConfig, CellRecord, CutoffPair, classify, enumerate_cutoff_pairs, stayer_weight
from .likelihood import (
    CompositeLikelihood,
    cell_loglik,
    composite_hessian,
    composite_loglik,
    composite_score,
    design_row,
)
from .estimator import (
    BootstrapResult,
    FitConfig,
    FitResult,
    bootstrap,
    fit,
    fit_pooled,
    interpret,
    sandwich_vcov,
)
from .api import DynamicOrderedLogit, PooledOrderedLogit

__all__ = [name for name in dir() if not name.startswith("_")]
