"""Bayesian Weibull reliability modeling for interval-censored test data.

Subpackages by topic:

* :mod:`intervalweib.dataset` -- records, splitting, standardization, CSV IO
* :mod:`intervalweib.datagen` -- synthetic benchmarks and clinical ingestion
* :mod:`intervalweib.survival` -- hazards, survival, interval log-likelihood
* :mod:`intervalweib.nn` -- rate network, backprop, Adam MAP training
* :mod:`intervalweib.laplace` -- GGN Laplace posterior and predictives
* :mod:`intervalweib.mcmc` -- NUTS, model priors, diagnostics, PIPs
* :mod:`intervalweib.metrics` -- ROC/PR AUC, Kaplan-Meier, reliability curves
* :mod:`intervalweib.cli` -- the ``intervalweib`` command
"""

from .dataset import (
    DatasetError,
    IntervalDataset,
    Standardizer,
    TestRecord,
    apply_standardizer,
    fit_standardizer,
    read_dataset,
    split_by_item,
    write_dataset,
)
from .datagen import (
    CensorWindowSpec,
    WeibullClassSpec,
    chunk_into_intervals,
    generate_synthetic_1,
    generate_synthetic_2,
    ingest_heartfailure,
    make_banana,
    make_moons,
    sample_weibull_times,
)
from .survival import (
    conditional_survival,
    cumulative_hazard,
    interval_failure_probability,
    interval_log_likelihood,
    rate_from_reliability,
)
from .nn import MapResult, MlpSpec, TrainConfig, adam_step, map_train
from .laplace import (
    LaplacePosterior,
    PredictiveConfig,
    bnn_predict,
    fit_laplace,
    ggn_covariance,
    glm_predict,
    link_hessian,
    log_marginal_likelihood,
    tune_precision,
)
from .mcmc import (
    BaselinePriors,
    NutsConfig,
    PosteriorSamples,
    SpikeSlabConfig,
    compute_pip,
    diagnostics,
    fit_baseline,
    fit_linear_mvn,
    fit_spike_slab,
    nuts_sample,
)
from .metrics import (
    KaplanMeierCurve,
    ReliabilityCurve,
    kaplan_meier,
    pr_auc,
    reliability_curves,
    roc_auc,
)

__version__ = "0.1.0"
