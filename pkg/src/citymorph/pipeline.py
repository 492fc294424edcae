"""Config-driven batch stages: corpus tables, correlation, fitting, prediction,
and generated-scene validation.

Every stage isolates per-city failures (one bad raster never aborts the
batch), writes its artifacts under ``output_dir``, and drops a run manifest
holding the config hash, seeds, and input digests so a rerun can be checked
for bit-identical output.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .correlation import correlation_matrix
from .errors import CityMorphError
from .metrics import HSI_COLUMNS, compute_hsi
from .models import (
    DEFAULT_GAMMA_GRID,
    DEFAULT_LAMBDA_GRID,
    FeatureStandardizer,
    KernelRidgeRegression,
    LinearRegression,
    RegressionDataset,
    RidgeRegression,
    evaluate,
    grid_search_cv,
    load_model,
    ridge_to_raw_space,
    save_model,
    train_test_split,
)
from .radial import (
    compare_distributions,
    elbow_curve,
    find_peaks,
    geometric_center,
    half_side_length,
    pad_profiles,
    radial_profile,
    urban_centroid,
    ProfileKMeans,
)
from .raster import CityManifest, load_manifest, load_raster
from .roads import load_roads, network_density, total_length_km

log = logging.getLogger("citymorph")

_CONFIG_SECTION = "citymorph"


@dataclass
class PipelineConfig:
    manifest_path: str = ""
    generated_dir: str = ""
    output_dir: str = "out"
    connectivity: int = 8
    ring_width: int = 1
    height_fraction: float = 0.8
    min_distance_m: float = 430.0
    k: int = 10
    restarts: int = 10
    test_fraction: float = 0.2
    seed: int = 0
    folds: int = 5
    cv_repeats: int = 1
    lambda_grid: tuple = tuple(DEFAULT_LAMBDA_GRID)
    gamma_grid: tuple = tuple(DEFAULT_GAMMA_GRID)
    # NLSI is excluded by default: whenever the occupied class covers at most
    # half the scene, NLSI == 1 - AI/100 exactly (both normalizations share
    # the same near-square packing bound), so keeping both makes the
    # unregularized model singular. Opt back in via `features` if only
    # regularized models are wanted.
    features: tuple = tuple(c for c in HSI_COLUMNS if c != "NLSI")
    center_mode: str = "geometric"

    def validate(self) -> "PipelineConfig":
        if self.connectivity not in (4, 8):
            raise ValueError(f"connectivity must be 4 or 8, got {self.connectivity}")
        if self.ring_width < 1:
            raise ValueError("ring_width must be >= 1")
        if not 0 < self.height_fraction <= 1:
            raise ValueError("height_fraction must be in (0, 1]")
        if self.min_distance_m <= 0:
            raise ValueError("min_distance_m must be positive")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must be in (0, 1)")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.cv_repeats < 1:
            raise ValueError("cv_repeats must be >= 1")
        if self.center_mode not in ("geometric", "centroid"):
            raise ValueError(f"unknown center_mode {self.center_mode!r}")
        unknown = set(self.features) - set(HSI_COLUMNS)
        if unknown:
            raise ValueError(f"unknown feature names: {sorted(unknown)}")
        if not self.features:
            raise ValueError("feature subset is empty")
        return self


def write_config(config: PipelineConfig, path) -> None:
    parser = configparser.ConfigParser()
    parser[_CONFIG_SECTION] = {}
    section = parser[_CONFIG_SECTION]
    for f in fields(config):
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            section[f.name] = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        else:
            section[f.name] = repr(value) if isinstance(value, float) else str(value)
    with open(path, "w") as fh:
        parser.write(fh)


def read_config(path) -> PipelineConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")
    if not parser.has_section(_CONFIG_SECTION):
        raise ValueError(f"{path}: missing [{_CONFIG_SECTION}] section")
    section = parser[_CONFIG_SECTION]
    kwargs = {}
    for f in fields(PipelineConfig):
        if f.name not in section:
            continue
        raw = section[f.name].strip()
        default = getattr(PipelineConfig(), f.name)
        if isinstance(default, tuple):
            parts = [p for p in raw.split(",") if p.strip()]
            if f.name == "features":
                kwargs[f.name] = tuple(p.strip() for p in parts)
            else:
                kwargs[f.name] = tuple(float(p) for p in parts)
        elif isinstance(default, bool):
            kwargs[f.name] = section.getboolean(f.name)
        elif isinstance(default, int):
            kwargs[f.name] = int(raw)
        elif isinstance(default, float):
            kwargs[f.name] = float(raw)
        else:
            kwargs[f.name] = raw
    return PipelineConfig(**kwargs).validate()


def config_hash(config: PipelineConfig) -> str:
    doc = {f.name: list(v) if isinstance(v := getattr(config, f.name), tuple) else v
           for f in fields(config)}
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


@dataclass
class StageResult:
    stage: str
    processed: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    outputs: list = field(default_factory=list)

    def fail(self, city_id: str, message: str) -> None:
        log.warning("%s: %s: %s", self.stage, city_id, message)
        self.failures.append((city_id, message))

    @property
    def exit_code(self) -> int:
        if not self.processed:
            return 2
        return 1 if self.failures else 0


def _format_value(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_format_value(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _read_table(path: Path) -> list[dict]:
    import csv as _csv

    with open(path, newline="") as fh:
        return list(_csv.DictReader(fh))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_run_manifest(config: PipelineConfig, result: StageResult, inputs) -> None:
    out_dir = Path(config.output_dir)
    doc = {
        "stage": result.stage,
        "config_hash": config_hash(config),
        "seed": config.seed,
        "inputs": {str(p): _sha256(Path(p)) for p in sorted(set(map(str, inputs)))},
        "outputs": sorted(str(Path(o).name) for o in result.outputs),
        "processed": sorted(result.processed),
        "failures": sorted([city, msg] for city, msg in result.failures),
    }
    path = out_dir / f"run_{result.stage.replace('-', '_')}.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    result.outputs.append(path)


def _ensure_outdir(config: PipelineConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest_inputs(manifest_path: Path, manifest: CityManifest, roads: bool = False):
    inputs = [manifest_path]
    for entry in manifest:
        inputs.append(entry.raster_path)
        if roads and entry.road_path is not None:
            inputs.append(entry.road_path)
    return inputs


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------


def run_hsi(config: PipelineConfig) -> StageResult:
    """Settlement-index table for every manifest city."""
    config.validate()
    out = _ensure_outdir(config)
    result = StageResult(stage="hsi")
    manifest = load_manifest(config.manifest_path)
    if len(manifest) == 0:
        raise CityMorphError(f"{config.manifest_path}: empty manifest")
    rows = []
    for entry in manifest:
        try:
            raster = load_raster(entry.raster_path)
            hsi = compute_hsi(raster, connectivity=config.connectivity)
        except (CityMorphError, ValueError) as exc:
            result.fail(entry.city_id, str(exc))
            continue
        rows.append((entry.city_id, *hsi.as_row()))
        result.processed.append(entry.city_id)
    table = out / "hsi.csv"
    _write_csv(table, ("city_id", *HSI_COLUMNS), rows)
    result.outputs.append(table)
    _write_run_manifest(config, result, _manifest_inputs(Path(config.manifest_path), manifest))
    return result


def run_transport(config: PipelineConfig) -> StageResult:
    """Road length, area, and network density for every city with a road file."""
    config.validate()
    out = _ensure_outdir(config)
    result = StageResult(stage="transport")
    manifest = load_manifest(config.manifest_path)
    rows = []
    for entry in manifest:
        if entry.road_path is None:
            log.info("transport: %s: no road file, skipped", entry.city_id)
            continue
        try:
            network = load_roads(entry.road_path)
            length_km = total_length_km(network)
            if entry.area_km2 is not None:
                area = entry.area_km2
            else:
                area = load_raster(entry.raster_path).extent_km2
            ti = network_density(length_km, area)
        except (CityMorphError, ValueError) as exc:
            result.fail(entry.city_id, str(exc))
            continue
        rows.append((entry.city_id, ti.road_length_km, ti.area_km2, ti.density))
        result.processed.append(entry.city_id)
    table = out / "transport.csv"
    _write_csv(table, ("city_id", "L_km", "A_km2", "ND"), rows)
    result.outputs.append(table)
    _write_run_manifest(
        config, result, _manifest_inputs(Path(config.manifest_path), manifest, roads=True)
    )
    return result


def _joined_table(config: PipelineConfig):
    """Inner join of the HSI and transport tables on city_id, in manifest order."""
    out = Path(config.output_dir)
    hsi_rows = {r["city_id"]: r for r in _read_table(out / "hsi.csv")}
    ti_rows = {r["city_id"]: r for r in _read_table(out / "transport.csv")}
    joined = []
    dropped = 0
    for city_id, hsi in hsi_rows.items():
        ti = ti_rows.get(city_id)
        if ti is None:
            dropped += 1
            continue
        joined.append((city_id, hsi, ti))
    if dropped:
        log.info("join: dropped %d cities without transport rows", dropped)
    return joined


def _require_tables(config: PipelineConfig) -> None:
    out = Path(config.output_dir)
    for name, runner in (("hsi.csv", run_hsi), ("transport.csv", run_transport)):
        if not (out / name).is_file():
            runner(config)


def run_correlate(config: PipelineConfig) -> StageResult:
    """Pearson and Chatterjee matrices over the six indices plus RL and ND."""
    config.validate()
    out = _ensure_outdir(config)
    _require_tables(config)
    result = StageResult(stage="correlate")
    joined = _joined_table(config)
    if len(joined) < 3:
        raise CityMorphError(f"need >= 3 joined rows to correlate, got {len(joined)}")
    names = (*HSI_COLUMNS, "RL", "ND")
    columns = {name: [] for name in names}
    for city_id, hsi, ti in joined:
        for name in HSI_COLUMNS:
            columns[name].append(float(hsi[name]))
        columns["RL"].append(float(ti["L_km"]))
        columns["ND"].append(float(ti["ND"]))
    arrays = {name: np.asarray(vals) for name, vals in columns.items()}

    long_rows = []
    for method, filename in (("pearson", "pcc.csv"), ("chatterjee", "ccc.csv")):
        matrix = correlation_matrix(arrays, method=method, seed=config.seed)
        path = out / filename
        _write_csv(
            path,
            ("", *matrix.names),
            [(name, *matrix.values[i]) for i, name in enumerate(matrix.names)],
        )
        result.outputs.append(path)
        long_rows.extend(matrix.to_long_rows())
    plot_path = out / "correlation_long.csv"
    _write_csv(plot_path, ("x", "y", "method", "value"), long_rows)
    result.outputs.append(plot_path)
    result.processed = [city_id for city_id, _, _ in joined]
    _write_run_manifest(config, result, [out / "hsi.csv", out / "transport.csv"])
    return result


def _dataset_from_join(config: PipelineConfig) -> RegressionDataset:
    joined = _joined_table(config)
    if len(joined) < 2:
        raise CityMorphError(f"need >= 2 joined rows to fit, got {len(joined)}")
    features = []
    targets = []
    ids = []
    for city_id, hsi, ti in joined:
        features.append([float(hsi[name]) for name in config.features])
        targets.append(float(ti["ND"]))
        ids.append(city_id)
    return RegressionDataset(
        feature_names=tuple(config.features),
        features=np.asarray(features),
        targets=np.asarray(targets),
        city_ids=tuple(ids),
    )


def fit_models(dataset: RegressionDataset, config: PipelineConfig):
    """LR / ridge-CV / KRR-CV on a split of the dataset.

    The linear models are fitted on standardized features (the index columns
    span eight orders of magnitude) with coefficients re-expressed in raw
    units afterwards; kernel ridge standardizes internally per fit.

    Returns (per-model metrics dict, fitted models dict, split, cv choices).
    """
    train, test = train_test_split(dataset, config.test_fraction, config.seed)
    p = len(dataset.feature_names)

    scaler = FeatureStandardizer().fit(train.features)
    scaled_train = RegressionDataset(
        feature_names=train.feature_names,
        features=scaler.transform(train.features),
        targets=train.targets.copy(),
        city_ids=train.city_ids,
    )

    models = {}
    models["LR"] = ridge_to_raw_space(
        LinearRegression().fit(scaled_train.features, train.targets), scaler
    )

    rr_search = grid_search_cv(
        scaled_train, lambda_grid=config.lambda_grid, gamma_grid=None,
        folds=config.folds, seed=config.seed, repeats=config.cv_repeats,
    )
    models["RR"] = ridge_to_raw_space(
        RidgeRegression(lam=rr_search.best_lambda).fit(scaled_train.features, train.targets),
        scaler,
    )

    krr_search = grid_search_cv(
        train, lambda_grid=config.lambda_grid, gamma_grid=config.gamma_grid,
        folds=config.folds, seed=config.seed, repeats=config.cv_repeats,
    )
    models["KRR"] = KernelRidgeRegression(
        lam=krr_search.best_lambda, gamma=krr_search.best_gamma
    ).fit(train.features, train.targets)

    metrics = {
        name: evaluate(model.predict(test.features), test.targets, p)
        for name, model in models.items()
    }
    choices = {
        "rr_lambda": rr_search.best_lambda,
        "krr_lambda": krr_search.best_lambda,
        "krr_gamma": krr_search.best_gamma,
    }
    return metrics, models, (train, test), choices


def run_fit(config: PipelineConfig) -> StageResult:
    """Fit LR/RR/KRR, report test metrics, persist the best model."""
    config.validate()
    out = _ensure_outdir(config)
    _require_tables(config)
    result = StageResult(stage="fit")
    dataset = _dataset_from_join(config)
    metrics, models, (train, test), choices = fit_models(dataset, config)

    table = out / "metrics.csv"
    _write_csv(
        table,
        ("model", "MSE", "MAE", "R2", "AdjR2"),
        [(name, *metrics[name].as_row()) for name in ("LR", "RR", "KRR")],
    )
    result.outputs.append(table)

    best_name = min(("LR", "RR", "KRR"), key=lambda name: metrics[name].mse)
    split_hash = hashlib.sha256(",".join(test.city_ids).encode()).hexdigest()
    model_path = out / "model.json"
    save_model(
        models[best_name],
        model_path,
        feature_names=dataset.feature_names,
        metadata={
            "best_model": best_name,
            "seed": config.seed,
            "test_fraction": config.test_fraction,
            "split_hash": split_hash,
            "cv": choices,
            "test_mse": metrics[best_name].mse,
        },
    )
    result.outputs.append(model_path)
    result.processed = list(dataset.city_ids)
    _write_run_manifest(config, result, [out / "hsi.csv", out / "transport.csv"])
    return result


def _generated_rasters(config: PipelineConfig):
    gen_dir = Path(config.generated_dir)
    if not gen_dir.is_dir():
        raise CityMorphError(f"generated_dir does not exist: {gen_dir}")
    paths = sorted(gen_dir.glob("*.asc")) + sorted(gen_dir.glob("*.txt"))
    if not paths:
        raise CityMorphError(f"no grid files (*.asc, *.txt) in {gen_dir}")
    return paths


def run_predict(config: PipelineConfig, model_path) -> StageResult:
    """Predict network density for every generated scene."""
    config.validate()
    out = _ensure_outdir(config)
    result = StageResult(stage="predict")
    saved = load_model(model_path)
    unknown = set(saved.feature_names) - set(HSI_COLUMNS)
    if unknown:
        raise CityMorphError(
            f"model features {sorted(unknown)} are not settlement-index columns"
        )
    paths = _generated_rasters(config)
    rows = []
    for path in paths:
        scene_id = path.stem
        try:
            raster = load_raster(path)
            hsi = compute_hsi(raster, connectivity=config.connectivity)
        except (CityMorphError, ValueError) as exc:
            result.fail(scene_id, str(exc))
            continue
        by_name = dict(zip(HSI_COLUMNS, hsi.as_row()))
        x = np.asarray([[by_name[name] for name in saved.feature_names]])
        pred = float(saved.estimator.predict(x)[0])
        rows.append((scene_id, *hsi.as_row(), pred))
        result.processed.append(scene_id)
    table = out / "predictions.csv"
    _write_csv(table, ("scene_id", *HSI_COLUMNS, "ND_pred"), rows)
    result.outputs.append(table)
    _write_run_manifest(config, result, [model_path, *paths])
    return result


def _profile_for(config: PipelineConfig, raster):
    center = geometric_center(raster) if config.center_mode == "geometric" else urban_centroid(raster)
    return radial_profile(raster, center=center, ring_width=config.ring_width)


def run_validate_gan(config: PipelineConfig) -> StageResult:
    """Radial-profile comparison of the real corpus against generated scenes."""
    config.validate()
    out = _ensure_outdir(config)
    result = StageResult(stage="validate-gan")
    manifest = load_manifest(config.manifest_path)
    gen_paths = _generated_rasters(config)

    populations = {"real": [], "generated": []}
    sides = []
    for kind, sources in (("real", list(manifest)), ("generated", gen_paths)):
        for source in sources:
            city_id = source.city_id if kind == "real" else source.stem
            try:
                raster = load_raster(source.raster_path if kind == "real" else source)
                profile = _profile_for(config, raster)
                peaks = find_peaks(
                    profile,
                    height_fraction=config.height_fraction,
                    min_distance_m=config.min_distance_m,
                    cell_size=raster.cell_size,
                )
            except (CityMorphError, ValueError) as exc:
                result.fail(city_id, str(exc))
                continue
            populations[kind].append((city_id, profile, peaks.count))
            sides.append(max(raster.width, raster.height))
            result.processed.append(city_id)
    if not populations["real"] or not populations["generated"]:
        raise CityMorphError("validate-gan needs at least one usable raster per population")

    length = max(half_side_length(side, config.ring_width) for side in sides)
    real_matrix = pad_profiles([p for _, p, _ in populations["real"]], length=length)
    gen_matrix = pad_profiles([p for _, p, _ in populations["generated"]], length=length)

    for name, matrix, rows in (
        ("profiles_real.csv", real_matrix, populations["real"]),
        ("profiles_generated.csv", gen_matrix, populations["generated"]),
    ):
        path = out / name
        header = ("city_id", *(f"d{i}" for i in range(matrix.shape[1])))
        _write_csv(path, header, [(rows[i][0], *matrix[i]) for i in range(len(rows))])
        result.outputs.append(path)

    model = ProfileKMeans(n_clusters=config.k, seed=config.seed, restarts=config.restarts)
    model.fit(real_matrix)
    real_classes = model.labels_
    gen_classes = model.predict(gen_matrix)

    peak_report = compare_distributions(
        [c for _, _, c in populations["real"]], [c for _, _, c in populations["generated"]]
    )
    class_report = compare_distributions(real_classes, gen_classes)
    elbow = elbow_curve(
        real_matrix, k_max=min(15, len(real_matrix)), seed=config.seed, restarts=config.restarts
    ) if len(real_matrix) >= 2 else []

    doc = {
        "k": config.k,
        "seed": config.seed,
        "ring_width": config.ring_width,
        "height_fraction": config.height_fraction,
        "min_distance_m": config.min_distance_m,
        "inertia": model.inertia_,
        "peak_count": {
            "real": {str(k): v for k, v in peak_report.real_freq.items()},
            "generated": {str(k): v for k, v in peak_report.generated_freq.items()},
            "tv_distance": peak_report.tv_distance,
        },
        "profile_class": {
            "real": {str(k): v for k, v in class_report.real_freq.items()},
            "generated": {str(k): v for k, v in class_report.generated_freq.items()},
            "tv_distance": class_report.tv_distance,
        },
        "elbow": [[k, inertia, fraction] for k, inertia, fraction in elbow],
        "centroids": model.cluster_centers_.tolist(),
        "assignments": {
            "real": {populations["real"][i][0]: int(real_classes[i]) for i in range(len(real_classes))},
            "generated": {populations["generated"][i][0]: int(gen_classes[i]) for i in range(len(gen_classes))},
        },
    }
    report = out / "validation.json"
    report.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    result.outputs.append(report)
    _write_run_manifest(
        config, result,
        _manifest_inputs(Path(config.manifest_path), manifest) + list(gen_paths),
    )
    return result
