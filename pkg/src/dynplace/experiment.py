"""Scenario runner: synthetic and gridded-data experiments, baselines, outputs."""
import csv
import dataclasses
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dictlearn import LearnerState, learn_step, svd_dictionary
from .filters import FilterSpec, sensing_matrix
from .graph import GraphError, knn_graph, random_sensor_graph
from .placement import PlacementError, PlacementState, step
from .sampling import SamplingOperator, build_Z, greedy_select, reconstruct, sample
from .signals import (
    BandlimitedModel,
    PiecewiseConstantModel,
    TimeGrid,
    add_noise,
    random_connected_partition,
    signal_matrix,
)

log = logging.getLogger(__name__)

SCENARIOS = ("synthetic-bl", "synthetic-pc", "real")
METHODS = ("dynamic", "dynamic-pinf", "static1", "static2")


class InvariantViolation(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    scenario: str = "synthetic-bl"
    n_nodes: int = 256
    knn: int = 6
    sensors: int = 8
    window: int = 20
    n_train: int = 20
    n_test: int = 20
    sampling_period: float = math.pi / 30
    bandwidth: int | None = None  # defaults to N // 16
    clusters: int = 3
    noise_variance: float = 0.1
    gamma: float = 1e-4
    eta: float = 3.0
    mu: float = 1.0
    epsilon: float = 1e-8
    max_iters: int = 1000
    hop_limit: float | None = 1
    filter_kind: str = "lowpass-cosine"
    chebyshev_order: int = 20
    methods: tuple = METHODS
    replicates: int = 50
    seed: int = 0
    workers: int = 1  # threads for the per-sensor relocation loop
    jobs: int = 1  # processes for replicates
    data_path: str | None = None
    bbox: tuple | None = None  # (lat_min, lat_max, lon_min, lon_max)
    out_dir: str | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}")
        self.methods = tuple(self.methods)
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}")
        if isinstance(self.hop_limit, str):
            self.hop_limit = math.inf if self.hop_limit.lower() in ("inf", "infinity") else int(self.hop_limit)
        if self.bbox is not None:
            self.bbox = tuple(float(v) for v in self.bbox)
        for name in ("n_nodes", "sensors", "window", "n_train", "n_test", "replicates", "max_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.sensors > self.n_nodes:
            raise ValueError("more sensors than nodes")
        if self.window > self.n_train:
            raise ValueError("window cannot exceed the number of training signals")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be >= 0")

    @property
    def band(self):
        return self.bandwidth if self.bandwidth is not None else max(1, self.n_nodes // 16)

    @property
    def filter_spec(self):
        return FilterSpec(self.filter_kind, self.chebyshev_order)

    @classmethod
    def synthetic(cls, model="bl", **overrides):
        return cls(scenario=f"synthetic-{model}", **overrides)

    @classmethod
    def real(cls, data_path=None, **overrides):
        base = dict(
            scenario="real",
            n_nodes=100,
            knn=5,
            sensors=10,
            window=5,
            n_train=5,
            n_test=55,
            gamma=1e-3,
            eta=1.0,
            mu=1.0,
            hop_limit=1,
            data_path=data_path,
        )
        base.update(overrides)
        return cls(**base)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def as_dict(self):
        d = dataclasses.asdict(self)
        d["methods"] = list(self.methods)
        if d["hop_limit"] is not None and math.isinf(d["hop_limit"]):
            d["hop_limit"] = "inf"
        if d["bbox"] is not None:
            d["bbox"] = list(d["bbox"])
        return d


# dotted config-file keys -> ExperimentConfig fields
CONFIG_KEYS = {
    "scenario": "scenario",
    "model": None,
    "graph.n_nodes": "n_nodes",
    "graph.knn": "knn",
    "sensors.count": "sensors",
    "window": "window",
    "horizon.n_train": "n_train",
    "horizon.n_test": "n_test",
    "sampling_period": "sampling_period",
    "bandwidth": "bandwidth",
    "clusters": "clusters",
    "noise_variance": "noise_variance",
    "learning.gamma": "gamma",
    "learning.eta": "eta",
    "learning.mu": "mu",
    "learning.epsilon": "epsilon",
    "learning.max_iters": "max_iters",
    "placement.hop_limit": "hop_limit",
    "placement.workers": "workers",
    "filter.kind": "filter_kind",
    "filter.chebyshev_order": "chebyshev_order",
    "methods": "methods",
    "replicates": "replicates",
    "seed": "seed",
    "jobs": "jobs",
    "data.path": "data_path",
    "data.bbox": "bbox",
    "output.dir": "out_dir",
}


def _flatten(mapping, prefix=""):
    out = {}
    for key, val in mapping.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            out.update(_flatten(val, name + "."))
        else:
            out[name] = val
    return out


def config_from_mapping(mapping, base=None):
    """Overlay a (possibly nested) key/value mapping onto ``base``."""
    flat = _flatten(mapping)
    changes = {}
    for key, val in flat.items():
        if key not in CONFIG_KEYS:
            raise KeyError(f"unknown config key {key!r}")
        if key == "model":
            changes["scenario"] = "synthetic-" + str(val)
            continue
        changes[CONFIG_KEYS[key]] = val
    scenario = changes.get("scenario", base.scenario if base else "synthetic-bl")
    if base is None:
        base = ExperimentConfig.real() if scenario == "real" else ExperimentConfig(scenario=scenario)
    return dataclasses.replace(base, **changes)


def load_config(path, base=None):
    import yaml

    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    return config_from_mapping(data, base)


# ---------------------------------------------------------------------------
# gridded data
# ---------------------------------------------------------------------------


def read_grid_csv(path):
    """Parse ``lat,lon,t_0,...`` rows; missing values are ``NaN`` or empty."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip().lower() for h in header[:2]] != ["lat", "lon"]:
            raise ValueError(f"{path}: header must start with lat,lon")
        rows = [[float(v) if v.strip() else math.nan for v in row] for row in reader if row]
    arr = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return arr[:, 0], arr[:, 1], arr[:, 2:]


def ingest_grid_csv(path, n_nodes, knn, seed=None, bbox=None, max_attempts=100):
    """Sample ``n_nodes`` complete locations and join them in a k-NN graph.

    Returns ``(graph, values)`` with ``values`` of shape ``n_nodes x T``.
    Locations with any missing value are never sampled. Disconnected draws
    are resampled up to ``max_attempts`` times.
    """
    lat, lon, values = read_grid_csv(path)
    ok = np.all(np.isfinite(values), axis=1)
    if bbox is not None:
        lat_min, lat_max, lon_min, lon_max = bbox
        ok &= (lat >= lat_min) & (lat <= lat_max) & (lon >= lon_min) & (lon <= lon_max)
    valid = np.flatnonzero(ok)
    if valid.size < n_nodes:
        raise ValueError(f"{path}: only {valid.size} valid locations, need {n_nodes}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    for _ in range(max_attempts):
        pick = np.sort(rng.choice(valid, size=n_nodes, replace=False))
        xy = np.column_stack([lon[pick], lat[pick]])
        try:
            graph = knn_graph(xy, knn)
        except GraphError:
            continue
        return graph, values[pick]
    raise GraphError(f"no connected {knn}-NN graph from {path} after {max_attempts} draws")


def synthetic_sst_grid(path, seed=0, n_months=60, lat_range=(30, 49), lon_range=(-130, -116)):
    """Write a smooth seasonal temperature field on a 1-degree grid.

    Stand-in for a sea-surface-temperature extract: warmer and more seasonal
    to the south, a coastal strip of missing (land) cells to the east.
    """
    rng = np.random.default_rng(seed)
    lats = np.arange(lat_range[0], lat_range[1] + 1, dtype=float)
    lons = np.arange(lon_range[0], lon_range[1] + 1, dtype=float)
    la, lo = np.meshgrid(lats, lons, indexing="ij")
    la, lo = la.ravel(), lo.ravel()
    months = np.arange(n_months)
    south = (lat_range[1] - la) / (lat_range[1] - lat_range[0])
    base = 10.0 + 8.0 * south + 0.15 * (lo - lon_range[0])
    amp = 1.5 + 3.0 * south
    phase = 0.03 * (lo - lon_range[0])
    season = np.sin(2 * np.pi * (months[None, :] - 5.0) / 12.0 + phase[:, None])
    blobs = np.zeros((la.size, n_months))
    for _ in range(4):
        c_lat, c_lon = rng.uniform(lat_range[0], lat_range[1]), rng.uniform(*lon_range)
        bump = np.exp(-((la - c_lat) ** 2 + (lo - c_lon) ** 2) / 18.0)
        blobs += bump[:, None] * rng.normal(0, 0.8) * np.sin(2 * np.pi * months / rng.uniform(18, 40))[None, :]
    values = base[:, None] + amp[:, None] * season + blobs
    values += rng.normal(0, 0.05, size=values.shape)
    coast = lon_range[1] - 2 + (la - lat_range[0]) * 0.1
    values[lo > coast] = np.nan
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lat", "lon"] + [f"t_{m}" for m in months])
        for i in range(la.size):
            w.writerow([f"{la[i]:g}", f"{lo[i]:g}"] + ["NaN" if np.isnan(v) else f"{v:.4f}" for v in values[i]])
    return path


# ---------------------------------------------------------------------------
# replicate setup
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class Scenario:
    graph: object
    G: np.ndarray
    truth: np.ndarray  # N x (n_train + n_test), noiseless
    X0: np.ndarray  # noisy training signals
    A0: np.ndarray  # initial dictionary (N x D)
    sensors0: np.ndarray  # initial placement, shared by every method
    noise_seed: np.random.SeedSequence
    replicate: int


def _replicate_seeds(cfg):
    return np.random.SeedSequence(cfg.seed).spawn(cfg.replicates)


_GRID_CACHE = {}


def make_scenario(cfg, replicate=0, truth=None, graph=None):
    """Build the graph, ground truth and shared initial state for a replicate.

    ``truth`` / ``graph`` may be injected (tests use this for special
    signals); otherwise they are generated from the scenario settings.
    """
    ss = _replicate_seeds(cfg)[replicate]
    g_seed, p_seed, train_seed, noise_seed = ss.spawn(4)
    T = cfg.n_train + cfg.n_test
    if cfg.scenario == "real":
        if graph is None:
            path = cfg.data_path
            if path is None:
                raise ValueError("real scenario needs data_path")
            graph, values = ingest_grid_csv(path, cfg.n_nodes, cfg.knn, np.random.default_rng(g_seed), cfg.bbox)
            if values.shape[1] < T:
                raise ValueError(f"grid has {values.shape[1]} time steps, need {T}")
            if truth is None:
                truth = values[:, :T]
    else:
        if graph is None:
            graph = random_sensor_graph(cfg.n_nodes, np.random.default_rng(g_seed))
        if truth is None:
            times = TimeGrid(cfg.sampling_period, cfg.n_train, cfg.n_test).times()
            if cfg.scenario == "synthetic-bl":
                model = BandlimitedModel.from_graph(graph, cfg.band)
            else:
                parts = random_connected_partition(graph, cfg.clusters, np.random.default_rng(p_seed))
                model = PiecewiseConstantModel.from_clusters(parts, graph.n_nodes)
            truth = signal_matrix(model, times)
    truth = np.asarray(truth, dtype=float)
    if truth.shape != (graph.n_nodes, T):
        raise ValueError(f"truth must be {graph.n_nodes}x{T}, got {truth.shape}")
    G = sensing_matrix(graph, cfg.filter_spec)
    X0 = add_noise(truth[:, : cfg.n_train], cfg.noise_variance, np.random.default_rng(train_seed))
    A0 = svd_dictionary(X0, cfg.window, truncate=False)
    sensors0 = greedy_select(build_Z(A0, G), cfg.sensors, fill=True)
    return Scenario(graph, G, truth, X0, A0, sensors0, noise_seed, replicate)


# ---------------------------------------------------------------------------
# methods
# ---------------------------------------------------------------------------


@dataclass
class RunRecord:
    method: str
    replicate: int
    mse: np.ndarray
    positions: list  # Q_1 .. Q_{T+1}
    moves: list  # per step, list of SensorMove
    ista_iters: list
    wall_time: float
    warnings: list = field(default_factory=list)

    def check(self, n_test):
        if self.mse.shape != (n_test,):
            raise InvariantViolation(f"{self.method}: MSE series has length {self.mse.size}, expected {n_test}")
        if not np.all(np.isfinite(self.mse)) or np.any(self.mse < 0):
            raise InvariantViolation(f"{self.method}: MSE not finite and nonnegative")
        for q in self.positions:
            if np.unique(q).size != q.size:
                raise InvariantViolation(f"{self.method}: colliding sensor positions {q.tolist()}")


def _mse(x, xr):
    return float(np.mean((x - xr) ** 2))


def run_dynamic(cfg, replicate=0, hop_limit="config", scenario=None, dictionary=None):
    """Learn, sample, reconstruct, slide the window, relocate; once per test step.

    ``dictionary`` pins a fixed dictionary instead of learning one (used to
    check the perfect-recovery path).
    """
    scn = scenario or make_scenario(cfg, replicate)
    P = cfg.hop_limit if hop_limit == "config" else hop_limit
    method = "dynamic-pinf" if P is None or math.isinf(P) else "dynamic"
    t0 = time.perf_counter()
    learner = LearnerState(
        scn.A0,
        np.ones((cfg.window, cfg.window)),
        scn.X0[:, -cfg.window :],
        mu=cfg.mu,
        eta=cfg.eta,
        gamma=cfg.gamma,
        epsilon=cfg.epsilon,
        max_iters=cfg.max_iters,
    )
    state = PlacementState(scn.sensors0, P)
    rng = np.random.default_rng(scn.noise_seed)
    mse, positions, moves, iters = [], [state.positions.copy()], [], []
    for t in range(1, cfg.n_test + 1):
        x = scn.truth[:, cfg.n_train + t - 1]
        if dictionary is None:
            A = learn_step(learner, t)
            iters.append(learner.last_iters)
        else:
            A = dictionary
            iters.append(0)
        op = SamplingOperator(state.positions, scn.G)
        c = sample(op, x, cfg.noise_variance, rng)
        xr = reconstruct(op, A, c)
        learner.push(xr)
        mse.append(_mse(x, xr))
        state, mv = step(state, scn.graph, A, scn.G, workers=cfg.workers)
        positions.append(state.positions.copy())
        moves.append(mv)
    return RunRecord(
        method, scn.replicate, np.array(mse), positions, moves, iters, time.perf_counter() - t0, list(learner.warnings)
    )


def run_static(cfg, variant, replicate=0, scenario=None):
    """Fixed sensors; ``static1`` keeps the initial SVD dictionary,
    ``static2`` recomputes it from the current window every step after the
    first (which, like the dynamic method, starts from the initial one)."""
    if variant not in ("static1", "static2"):
        raise ValueError(f"unknown static variant {variant!r}")
    scn = scenario or make_scenario(cfg, replicate)
    t0 = time.perf_counter()
    op = SamplingOperator(scn.sensors0, scn.G)
    rng = np.random.default_rng(scn.noise_seed)
    window = scn.X0[:, -cfg.window :].copy()
    mse = []
    for t in range(1, cfg.n_test + 1):
        x = scn.truth[:, cfg.n_train + t - 1]
        if variant == "static1" or t == 1:
            A = scn.A0
        else:
            A = svd_dictionary(window, cfg.window, truncate=True)
        c = sample(op, x, cfg.noise_variance, rng)
        xr = reconstruct(op, A, c)
        window = np.column_stack([window[:, 1:], xr])
        mse.append(_mse(x, xr))
    positions = [scn.sensors0.copy() for _ in range(cfg.n_test + 1)]
    return RunRecord(
        variant, scn.replicate, np.array(mse), positions, [[] for _ in range(cfg.n_test)],
        [0] * cfg.n_test, time.perf_counter() - t0,
    )


def run_method(cfg, method, scenario):
    if method == "dynamic":
        return run_dynamic(cfg, scenario=scenario)
    if method == "dynamic-pinf":
        return run_dynamic(cfg, hop_limit=math.inf, scenario=scenario)
    return run_static(cfg, method, scenario=scenario)


def run_replicate(cfg, replicate):
    """Every configured method on one replicate; failures become aborted entries."""
    try:
        scn = make_scenario(cfg, replicate)
    except Exception as exc:
        log.error("replicate %d: setup failed: %s", replicate, exc)
        return [], [(replicate, "setup", repr(exc))]
    records, aborted = [], []
    for method in cfg.methods:
        try:
            rec = run_method(cfg, method, scn)
            rec.check(cfg.n_test)
        except (InvariantViolation, PlacementError) as exc:
            raise InvariantViolation(f"replicate {replicate}, {method}: {exc}") from exc
        except Exception as exc:
            log.error("replicate %d, %s aborted: %s", replicate, method, exc)
            aborted.append((replicate, method, repr(exc)))
            continue
        records.append(rec)
    return records, aborted


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list
    aborted: list

    def by_method(self, method):
        return [r for r in self.records if r.method == method]

    def mse_matrix(self, method):
        """Replicates x steps."""
        recs = sorted(self.by_method(method), key=lambda r: r.replicate)
        return np.vstack([r.mse for r in recs]) if recs else np.empty((0, self.config.n_test))

    def summary(self):
        rows = []
        for method in self.config.methods:
            M = self.mse_matrix(method)
            if not M.size:
                continue
            mean, std = M.mean(axis=0), M.std(axis=0)
            for t in range(M.shape[1]):
                rows.append((t + 1, method, float(mean[t]), float(std[t])))
        return rows


def run_experiment(cfg):
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            parts = list(pool.map(run_replicate, [cfg] * cfg.replicates, range(cfg.replicates)))
    else:
        parts = [run_replicate(cfg, r) for r in range(cfg.replicates)]
    records = [rec for recs, _ in parts for rec in recs]
    aborted = [a for _, ab in parts for a in ab]
    return ExperimentResult(cfg, records, aborted)


def sweep_k(cfg, k_values, method="dynamic"):
    """Average test-horizon MSE for each sensor count; rows ``(K, mean, std)``."""
    rows = []
    for k in k_values:
        if k > cfg.n_nodes:
            raise ValueError(f"K={k} exceeds N={cfg.n_nodes}")
        res = run_experiment(cfg.replace(sensors=int(k), methods=(method,)))
        per_rep = res.mse_matrix(method).mean(axis=1)
        rows.append((int(k), float(per_rep.mean()), float(per_rep.std())))
    return rows


# ---------------------------------------------------------------------------
# output files
# ---------------------------------------------------------------------------


def _fmt(v):
    return repr(float(v))


def write_mse_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "method", "mean_mse", "std_mse"])
        for t, method, mean, std in rows:
            w.writerow([t, method, _fmt(mean), _fmt(std)])


def write_sweep_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["K", "mean_mse", "std_mse"])
        for k, mean, std in rows:
            w.writerow([k, _fmt(mean), _fmt(std)])


def trajectory_lines(records):
    for rec in sorted(records, key=lambda r: (r.replicate, METHODS.index(r.method))):
        for t, mv in enumerate(rec.moves, start=1):
            yield json.dumps(
                {
                    "t": t,
                    "method": rec.method,
                    "replicate": rec.replicate,
                    "positions": rec.positions[t - 1].tolist(),
                    "moves": [m.as_dict() for m in mv],
                },
                sort_keys=True,
            )


def write_trajectory(path, records):
    with open(path, "w") as fh:
        for line in trajectory_lines(records):
            fh.write(line + "\n")


def write_config_echo(path, cfg):
    with open(path, "w") as fh:
        json.dump(cfg.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_outputs(result, out_dir):
    import os

    os.makedirs(out_dir, exist_ok=True)
    write_mse_csv(os.path.join(out_dir, "mse.csv"), result.summary())
    write_trajectory(os.path.join(out_dir, "trajectory.jsonl"), result.records)
    write_config_echo(os.path.join(out_dir, "config.echo"), result.config)
