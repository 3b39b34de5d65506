"""Phase-type distribution modelling: evaluation, sampling, EM fitting,
goodness of fit, a batch CLI and an HTTP fitting service."""

from .dataio import Dataset, GroupedDataset, PlotRequest, plot_series, read_dataset
from .fit import (FitOptions, FitResult, aic, compare_ocp, em_fit_group,
                  em_fit_point, fit_density, fit_ocp, loglik, sweep_states)
from .gof import (GoFReport, ad_pvalue, ad_statistic, empirical_cum_hazard,
                  empirical_moments, gof_report)
from .matfun import conv_integral, expm, expm_action
from .ocp import (OneCutPointPhaseType, erlang_zones, ocp_cdf, ocp_cum_hazard,
                  ocp_hazard, ocp_moments, ocp_pdf, ocp_sample, ocp_survival)
from .phd import (PhaseType, StructureSpec, cdf, cum_hazard, hazard,
                  make_structure, moments, pdf, sample, survival)

__version__ = "0.1.0"

__all__ = [
    "Dataset", "GroupedDataset", "PlotRequest", "plot_series", "read_dataset",
    "FitOptions", "FitResult", "aic", "compare_ocp", "em_fit_group",
    "em_fit_point", "fit_density", "fit_ocp", "loglik", "sweep_states",
    "GoFReport", "ad_pvalue", "ad_statistic", "empirical_cum_hazard",
    "empirical_moments", "gof_report",
    "conv_integral", "expm", "expm_action",
    "OneCutPointPhaseType", "erlang_zones", "ocp_cdf", "ocp_cum_hazard",
    "ocp_hazard", "ocp_moments", "ocp_pdf", "ocp_sample", "ocp_survival",
    "PhaseType", "StructureSpec", "cdf", "cum_hazard", "hazard",
    "make_structure", "moments", "pdf", "sample", "survival",
    "__version__",
]
