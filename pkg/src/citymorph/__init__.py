"""Settlement morphology metrics, radial-profile validation, and road-density regression."""

from .correlation import chatterjee, correlation_matrix, pearson
from .errors import (
    CityMorphError,
    EmptyClassError,
    GridFormatError,
    ManifestError,
    ProjectionError,
    SingularSystemError,
)
from .metrics import (
    HSI_COLUMNS,
    HsiExtractor,
    HsiVector,
    PatchLabeling,
    compute_aggregation,
    compute_ca,
    compute_hsi,
    compute_lpi,
    label_patches,
)
from .models import (
    FeatureStandardizer,
    KernelRidgeRegression,
    LinearRegression,
    RegressionDataset,
    RidgeRegression,
    evaluate,
    grid_search_cv,
    load_model,
    rbf_kernel,
    save_model,
    train_test_split,
)
from .radial import (
    DistributionReport,
    PeakSet,
    ProfileKMeans,
    RadialProfile,
    compare_distributions,
    elbow_curve,
    find_peaks,
    kmeans_profiles,
    radial_profile,
)
from .raster import (
    CityManifest,
    ManifestEntry,
    SettlementRaster,
    load_manifest,
    load_raster,
    save_raster,
)
from .roads import (
    DescriptiveStats,
    RoadNetwork,
    TransportIndex,
    load_roads,
    network_density,
    summarize_lengths,
    total_length_km,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
