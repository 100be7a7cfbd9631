"""Copula-based shuffling (COBASE) and baseline methods for multivariate
ensemble postprocessing."""

__version__ = "0.1.0"

from .copulas import (
    CopulaModel,
    Family,
    fit_archimedean,
    fit_gaussian_copula,
    gca_transform,
    pit_to_normal_scores,
    sample_copula,
)
from .datasets import (
    Archive,
    ForecastCase,
    MarginId,
    ObservationVector,
    SyntheticConfig,
    generate_synthetic,
    load_archive,
    write_archive,
)
from .emos import EmosCoefficients, GaussianMargin, fit_emos, gaussian_crps, predict_margin
from .sampling import MarginSample, Strategy, random_sample, uniform_quantiles
from .scoring import ScoreKind, ScoreSeries, crps_ensemble, dm_statistic, energy_score, variogram_score
from .shuffling import (
    METHODS,
    RankMatrix,
    cobase_reference,
    ecc_reference,
    postprocess_multivariate,
    ranks_of,
    schaake_reference,
    shuffle_to_ranks,
    similarity_delta,
    simschaake_reference,
)
