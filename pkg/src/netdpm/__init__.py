"""Network-coupled nonparametric mixtures for feature and subnetwork selection.

The package fits a two-class mixture to large-scale per-feature
statistics while a weighted Ising prior over a feature network couples
the selection labels of connected features.  Three samplers are
provided (the full infinite-mixture Gibbs sampler, a finite-mixture
variant, and a fast density-guided label sampler), together with the
ordered density clustering used to split mixture fits into the two
classes, hyperparameter model averaging, a simulation harness, and a
command-line interface.
"""

from .core import (
    BasePrior,
    IsingPriorConfig,
    MixtureComponent,
    MixtureState,
    SelectionReport,
    StatisticsVector,
    class_density,
    conjugate_mean_update,
    conjugate_variance_update,
    hard_labels,
    marginal_density,
    new_component_marginal,
    transform_pvalues,
)
from .errors import (
    ConfigError,
    DomainError,
    IngestionError,
    InvalidStateError,
    NetdpmError,
    NumericalError,
)
from .fastapprox import (
    GuidedDensityPair,
    HyperGrid,
    build_guided_pairs,
    model_average,
    net_dpm3_run,
    pick_sure_selected,
    std_dpm_hodc_select,
)
from .hodc import (
    HODCPartition,
    OrderedDensitySet,
    estimate_component_counts,
    hodc_run,
    mixture_l2_distance,
)
from .network import (
    FeatureNetwork,
    Subnetwork,
    build_network,
    extract_subnetworks,
    ising_conditional,
    ising_flip_delta,
    ising_log_prior,
    load_network,
)
from .samplers import (
    PosteriorDraws,
    SamplerConfig,
    StdDpmDraws,
    net_dpm1_run,
    net_dpm2_run,
    posterior_summary,
    std_dpm_run,
)
from .simulate import (
    DataSpec,
    DistributionSpec,
    GroundTruth,
    SelectionMetrics,
    aggregate_metrics,
    build_designed_network,
    generate_scale_free,
    generate_statistics,
    sample_ising_labels,
    score_selection,
    simulation1_ground_truth,
    simulation2_ground_truth,
)

__version__ = "0.1.0"
