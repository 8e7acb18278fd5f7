"""Numerical laboratory for plug-in density level-set estimation."""

from .boxes import Box
from .densities import (
    DensityModel,
    HolderParams,
    Sample,
    gamma_exponent_empirical,
    make_cone_1d,
    make_plateau,
    make_uniform_box,
    model_from_id,
    sample,
)
from .kde import (
    KdeEstimator,
    Schedules,
    backend_name,
    bandwidth,
    bias_bound,
    kde_eval,
    kde_eval_grid,
    lemma_constants,
    offset,
)
from .kernels import (
    Kernel1D,
    KernelD,
    KernelValidityReport,
    legendre_kernel,
    product_kernel,
    rectangular_kernel,
    validate_kernel,
)
from .levelset import FunctionEstimator, GridRaster, LevelSetEstimate, plugin_estimate, rasterize
from .metrics import MetricReport, d_h, excess_mass, metric_report, prop21_check, propA1_check, sym_diff

__version__ = "0.1.0"
