"""End-to-end experiment orchestration: scan pipeline, SNR sweep, ROC, CRB export.

Everything here is plumbing around the core modules. Experiments take an
ExperimentConfig (loadable from JSON), derive every random stream from the
run seed plus fixed tags, and write plot-ready CSVs plus a JSON manifest
(seed, config hash, library version, per-stage wall time). Reruns with the
same config and seed produce byte-identical CSVs; threads only change the
execution order, never the results.

CSV schemas (the compatibility contract):
    plan.csv        b, theta_deg, halfwidth_deg
    spectrum.csv    b, theta_deg, power
    estimates.csv   b, theta_deg, range_m, speed_mps, psi_s, psi_r, psi_d
    detections.csv  b, theta_deg, range_m, speed_mps, t, gamma, decision
    sweep.csv       snr_db, param, mse, crb
    roc.csv         snr_db, gamma, p_fa, p_d
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import signal

from . import beams, clutter, crb, detector, music
from ._version import __version__
from .echo import EchoTensor, synthesize_echo, write_tensor
from .scene import (Scene, SystemConfig, complex_normal, generate_scene,
                    reference_scene, scene_to_json)

_CALIB_TAG = 90001
_SWEEP_TAG = 90002


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class SceneSpec:
    kind: str = "reference"        # "reference" | "random" | "empty"
    n_targets: int = 2
    n_scatterers: int = 400
    seed: int = 7
    min_separation_deg: float = 4.0

    def __post_init__(self):
        if self.kind not in ("reference", "random", "empty"):
            raise ValueError(f"unknown scene kind {self.kind!r}")
        if self.n_scatterers < 0 or self.n_targets < 0:
            raise ValueError("scene counts must be nonnegative")


@dataclass(frozen=True)
class ScanSpec:
    n_beams: int = 61
    span_deg: float = 60.0

    def __post_init__(self):
        if self.n_beams < 1:
            raise ValueError("n_beams must be >= 1")
        if not 0.0 < self.span_deg < 90.0:
            raise ValueError("span_deg must lie in (0, 90)")


@dataclass(frozen=True)
class FilterSpec:
    order: int = clutter.DEFAULT_ORDER
    cutoff: float = clutter.DEFAULT_CUTOFF
    warmup: int | None = None      # None -> 3 * order

    def build(self) -> clutter.IirFilter:
        return clutter.design_butterworth_highpass(self.order, self.cutoff)


@dataclass(frozen=True)
class DetectorSpec:
    n_range: int = detector.DEFAULT_N_RANGE
    n_angle: int = detector.DEFAULT_N_ANGLE
    r_max: float = detector.DEFAULT_R_MAX
    p_fa: float = 0.01
    calib_trials: int = 500
    n_thresholds: int = 101

    def __post_init__(self):
        if not 0.0 < self.p_fa < 1.0:
            raise ValueError("p_fa must lie in (0, 1)")
        if self.calib_trials < 10:
            raise ValueError("calib_trials must be >= 10")


@dataclass(frozen=True)
class SweepSpec:
    n_sym_synth: int = 64          # symbols synthesized before the frame window


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    scene: SceneSpec = field(default_factory=SceneSpec)
    scan: ScanSpec = field(default_factory=ScanSpec)
    filter: FilterSpec = field(default_factory=FilterSpec)
    detector: DetectorSpec = field(default_factory=DetectorSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    search_rel_threshold: float = 3.0
    snr_list_db: tuple[float, ...] = (-30.0, -20.0, -10.0, 0.0, 10.0, 20.0)
    n_trials: int = 100
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


_SECTION_TYPES = {
    "system": SystemConfig,
    "scene": SceneSpec,
    "scan": ScanSpec,
    "filter": FilterSpec,
    "detector": DetectorSpec,
    "sweep": SweepSpec,
}


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a config from (possibly partial) nested dicts; unknown keys raise."""
    kwargs = {}
    for key, value in raw.items():
        if key in _SECTION_TYPES:
            cls = _SECTION_TYPES[key]
            if not isinstance(value, dict):
                raise ValueError(f"config section {key!r} must be an object")
            names = cls.__dataclass_fields__.keys()
            unknown = set(value) - set(names)
            if unknown:
                raise ValueError(f"unknown keys in {key!r}: {sorted(unknown)}")
            kwargs[key] = cls(**value)
        elif key in ("search_rel_threshold", "n_trials", "seed"):
            kwargs[key] = value
        elif key == "snr_list_db":
            kwargs[key] = tuple(float(s) for s in value)
        else:
            raise ValueError(f"unknown config key {key!r}")
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def build_scene(config: ExperimentConfig, cfg: SystemConfig, seed: int) -> Scene:
    spec = config.scene
    if spec.kind == "reference":
        return reference_scene(cfg, n_scatterers=spec.n_scatterers, seed=spec.seed)
    if spec.kind == "empty":
        return Scene(targets=(), scatterers=())
    return generate_scene(cfg, spec.n_targets, spec.n_scatterers, seed=(seed, spec.seed),
                          min_separation=math.radians(spec.min_separation_deg))


# ---------------------------------------------------------------------------
# small helpers

def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_manifest(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _map_beams(fn, n_beams: int, threads: int) -> list:
    if threads <= 1:
        return [fn(b) for b in range(n_beams)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_beams)))


def _base_manifest(config: ExperimentConfig, seed: int) -> dict:
    return {
        "library_version": __version__,
        "seed": seed,
        "config_hash": config.config_hash(),
        "config": config.to_dict(),
    }


# ---------------------------------------------------------------------------
# scan pipeline

_STAGE_ORDER = ("synthesize", "filter", "spectrum", "estimate", "detect")


def run_pipeline(config: ExperimentConfig, out_dir, seed: int | None = None,
                 threads: int = 1, last_stage: str = "detect") -> dict:
    """Full scan pipeline: synth -> normalize -> filter -> spectrum -> peaks ->
    estimate -> GLRT detect. Writes plan.csv, spectrum.csv, estimates.csv,
    detections.csv and manifest.json into out_dir and returns the manifest.

    A failure while processing one scan's candidate is recorded in the report
    and aborts only that scan's downstream stages.
    """
    if last_stage not in _STAGE_ORDER:
        raise ValueError(f"unknown stage {last_stage!r}")
    last_idx = _STAGE_ORDER.index(last_stage)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = config.seed if seed is None else seed
    cfg = config.system
    plan = beams.default_plan(cfg, n_beams=config.scan.n_beams,
                              span_deg=config.scan.span_deg)
    scene = build_scene(config, cfg, seed)
    filt = config.filter.build()
    warmup = config.filter.warmup
    errors: list[dict] = []
    stage_seconds: dict[str, float] = {}
    t_start = time.perf_counter()

    _write_csv(out / "plan.csv", ("b", "theta_deg", "halfwidth_deg"),
               beams.plan_summary_rows(plan))

    tic = time.perf_counter()
    raw = _map_beams(lambda b: synthesize_echo(scene, plan, b, cfg, seed=seed),
                     plan.n_beams, threads)
    stage_seconds["synthesize"] = time.perf_counter() - tic

    manifest = _base_manifest(config, seed)
    manifest["scene"] = json.loads(scene_to_json(scene))
    outputs = ["plan.csv"]

    checked: list[EchoTensor] = []
    if last_idx >= 1:
        tic = time.perf_counter()
        checked = _map_beams(
            lambda b: clutter.filter_symbols(
                clutter.normalize_by_gain(raw[b], plan), filt, warmup=warmup),
            plan.n_beams, threads)
        stage_seconds["filter"] = time.perf_counter() - tic

    candidates: list[int] = []
    if last_idx >= 2:
        tic = time.perf_counter()
        spectrum = clutter.scan_spectrum(checked)
        rows = [(b, math.degrees(plan.directions[b]), float(spectrum[b]))
                for b in range(plan.n_beams)]
        _write_csv(out / "spectrum.csv", ("b", "theta_deg", "power"), rows)
        outputs.append("spectrum.csv")
        candidates = clutter.find_peaks(spectrum, config.search_rel_threshold)
        manifest["candidates"] = candidates
        stage_seconds["spectrum"] = time.perf_counter() - tic

    estimates: list[music.EstimationResult] = []
    if last_idx >= 3:
        tic = time.perf_counter()
        est_rows = []
        for b in candidates:
            try:
                res = music.estimate_candidate(checked[b], b, cfg)
            except Exception as exc:   # noqa: BLE001 - per-scan isolation
                errors.append({"scan": b, "stage": "estimate",
                               "error": type(exc).__name__, "message": str(exc)})
                continue
            estimates.append(res)
            est_rows.append((b, math.degrees(res.theta_hat), res.range_hat,
                             res.speed_hat, res.psi_s_hat, res.psi_r_hat,
                             res.psi_d_hat))
        _write_csv(out / "estimates.csv",
                   ("b", "theta_deg", "range_m", "speed_mps",
                    "psi_s", "psi_r", "psi_d"), est_rows)
        outputs.append("estimates.csv")
        stage_seconds["estimate"] = time.perf_counter() - tic

    if last_idx >= 4:
        tic = time.perf_counter()
        det_rows = []
        h0_scene = scene.without_targets()
        dspec = config.detector
        for res in estimates:
            b = res.scan_index
            # Scanning ghosts: a beam pointed near (but not at) a target still
            # shows a spectrum bump, yet its angle estimate falls outside the
            # beam's own coverage. Those candidates are dropped before the GLRT.
            if not beams.angle_in_coverage(plan, b, res.theta_hat):
                continue
            try:
                grid = detector.sample_grid(b, plan, cfg, n_range=dspec.n_range,
                                            n_angle=dspec.n_angle, r_max=dspec.r_max)
                cand = (res.psi_d_hat, res.psi_r_hat, res.psi_s_hat)
                gamma = detector.calibrate_gamma(
                    h0_scene, plan, b, cand, grid, cfg, dspec.p_fa,
                    n_trials=dspec.calib_trials, seed=(seed, _CALIB_TAG, b))
                outcome = detector.glr_statistic(raw[b], cand, grid, plan, cfg)
                decision = detector.detect(outcome, gamma)
            except Exception as exc:   # noqa: BLE001 - per-scan isolation
                errors.append({"scan": b, "stage": "detect",
                               "error": type(exc).__name__, "message": str(exc)})
                continue
            det_rows.append((b, math.degrees(res.theta_hat), res.range_hat,
                             res.speed_hat, outcome.statistic, gamma,
                             int(decision)))
        _write_csv(out / "detections.csv",
                   ("b", "theta_deg", "range_m", "speed_mps",
                    "t", "gamma", "decision"), det_rows)
        outputs.append("detections.csv")
        manifest["n_detections"] = sum(r[-1] for r in det_rows)
        stage_seconds["detect"] = time.perf_counter() - tic

    manifest["stage_seconds"] = stage_seconds
    manifest["wall_seconds"] = time.perf_counter() - t_start
    manifest["errors"] = errors
    manifest["outputs"] = outputs
    _write_manifest(out / "manifest.json", manifest)
    return manifest


def simulate_experiment(config: ExperimentConfig, out_dir, seed: int | None = None,
                        threads: int = 1) -> dict:
    """Synthesize raw echo tensors for every scan and write them as binary files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = config.seed if seed is None else seed
    cfg = config.system
    plan = beams.default_plan(cfg, n_beams=config.scan.n_beams,
                              span_deg=config.scan.span_deg)
    scene = build_scene(config, cfg, seed)
    tic = time.perf_counter()

    def _one(b: int) -> str:
        y = synthesize_echo(scene, plan, b, cfg, seed=seed)
        name = f"echo_b{b:03d}.bin"
        write_tensor(y, out / name)
        return name

    outputs = _map_beams(_one, plan.n_beams, threads)
    manifest = _base_manifest(config, seed)
    manifest["scene"] = json.loads(scene_to_json(scene))
    manifest["outputs"] = outputs + ["plan.csv"]
    manifest["stage_seconds"] = {"synthesize": time.perf_counter() - tic}
    _write_csv(out / "plan.csv", ("b", "theta_deg", "halfwidth_deg"),
               beams.plan_summary_rows(plan))
    _write_manifest(out / "manifest.json", manifest)
    return manifest


# ---------------------------------------------------------------------------
# SNR sweep (estimation MSE vs CRB)

def _sweep_filtered_stack(noiseless: np.ndarray, gains: np.ndarray,
                          noise: np.ndarray | None, filt: clutter.IirFilter,
                          warmup: int) -> np.ndarray:
    """Normalize and high-pass a (B, M_r, L, P_synth) stack in one shot."""
    y = noiseless if noise is None else noiseless + noise
    y = y / gains[:, None, None, None]
    zi_unit = signal.lfilter_zi(filt.num_coeffs, filt.den_coeffs).astype(complex)
    zi = zi_unit[None, None, None, :] * y[:, :, :, :1]
    filtered, _ = signal.lfilter(filt.num_coeffs, filt.den_coeffs, y, axis=3, zi=zi)
    return filtered


def _match_peaks_to_targets(peaks: list[int], scene: Scene, plan: beams.BeamPlan,
                            max_steps: int = 2) -> list[int]:
    """Beam index to estimate each target at: nearest reported peak if it lies
    within max_steps beams of the target's true angle, else the covering beam
    (so a botched search shows up as estimation error, not a crash)."""
    out = []
    for target in scene.targets:
        b_true = beams.beam_for_angle(plan, target.theta)
        best = None
        for b in peaks:
            if abs(b - b_true) <= max_steps and (
                    best is None or abs(b - b_true) < abs(best - b_true)):
                best = b
        out.append(b_true if best is None else best)
    return out


def sweep_snr(config: ExperimentConfig, out_dir, seed: int | None = None,
              threads: int = 1) -> dict:
    """Monte-Carlo MSE per target parameter vs the CRB over config.snr_list_db.

    Each trial synthesizes a longer frame (sweep.n_sym_synth symbols), runs the
    clutter filter over all of it and estimates on the last n_sym symbols, so
    the filter transient has fully decayed and the estimation window length
    matches the CRB's. The bound for each target is its own single-target FIM
    at the beam covering it: that is the data the per-beam estimator actually
    sees. (Summing information over the whole sweep would credit the bound
    with cross-beam amplitude-pattern information no per-beam estimator uses;
    scatterers are likewise absent from the FIM because the filter removes
    them rather than estimating them.)

    Writes sweep.csv (snr_db, param, mse, crb) and manifest.json.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = config.seed if seed is None else seed
    cfg = config.system
    n_synth = config.sweep.n_sym_synth
    if n_synth <= cfg.n_sym:
        raise ValueError("sweep.n_sym_synth must exceed system.n_sym")
    warmup = n_synth - cfg.n_sym
    cfg_synth = replace(cfg, n_sym=n_synth)
    plan = beams.default_plan(cfg, n_beams=config.scan.n_beams,
                              span_deg=config.scan.span_deg)
    scene = build_scene(config, cfg, seed)
    if not scene.targets:
        raise ValueError("the sweep needs at least one target in the scene")
    filt = config.filter.build()
    n_t = len(scene.targets)
    truth = np.array([[t.theta, t.range, t.speed] for t in scene.targets])
    t_start = time.perf_counter()

    noiseless = np.stack([
        synthesize_echo(scene, plan, b, cfg_synth, seed=seed, noise_var=0.0).data
        for b in range(plan.n_beams)
    ])
    gains = np.array([beams.g_tilde(plan, b, cfg) for b in range(plan.n_beams)])
    mask = np.zeros(n_synth, dtype=bool)
    mask[:warmup] = True

    def _trial(args) -> np.ndarray:
        k, trial, sigma2 = args
        rng = np.random.default_rng((seed, _SWEEP_TAG, k, trial))
        noise = complex_normal(rng, sigma2, noiseless.shape)
        filtered = _sweep_filtered_stack(noiseless, gains, noise, filt, warmup)
        power = np.sum(np.abs(filtered) ** 2, axis=(1, 2, 3))
        peaks = clutter.top_local_maxima(power, n_t)
        sq = np.empty((n_t, 3))
        for i, b in enumerate(_match_peaks_to_targets(peaks, scene, plan)):
            tensor = EchoTensor(data=filtered[b], scan_index=b, cfg=cfg_synth,
                                stage="filtered", transient_mask=mask)
            res = music.estimate_candidate(tensor, b, cfg)
            sq[i] = [(res.theta_hat - truth[i, 0]) ** 2,
                     (res.range_hat - truth[i, 1]) ** 2,
                     (res.speed_hat - truth[i, 2]) ** 2]
        return sq

    matched_beams = [beams.beam_for_angle(plan, t.theta) for t in scene.targets]
    rows = []
    for k, snr_db in enumerate(config.snr_list_db):
        sigma2 = 10.0 ** (-snr_db / 10.0)
        jobs = [(k, trial, sigma2) for trial in range(config.n_trials)]
        if threads <= 1:
            sq_all = [_trial(j) for j in jobs]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                sq_all = list(pool.map(_trial, jobs))
        mse = np.mean(sq_all, axis=0)            # (n_t, 3)

        for i, target in enumerate(scene.targets):
            solo = Scene(targets=(target,), scatterers=())
            blocks = crb.fim_blocks(matched_beams[i], solo, plan, cfg,
                                    sigma2=sigma2)
            bound = crb.crb_eta_t(blocks)
            for j, name in enumerate(("theta", "range", "speed")):
                rows.append((float(snr_db), f"{name}_{i + 1}", float(mse[i, j]),
                             float(bound.crb_matrix[j, j])))

    _write_csv(out / "sweep.csv", ("snr_db", "param", "mse", "crb"), rows)
    manifest = _base_manifest(config, seed)
    manifest["scene"] = json.loads(scene_to_json(scene))
    manifest["outputs"] = ["sweep.csv"]
    manifest["stage_seconds"] = {"sweep": time.perf_counter() - t_start}
    manifest["n_trials"] = config.n_trials
    _write_manifest(out / "manifest.json", manifest)
    return manifest


# ---------------------------------------------------------------------------
# ROC and CRB experiments

def roc_experiment(config: ExperimentConfig, out_dir, seed: int | None = None,
                   threads: int = 1) -> dict:
    """ROC curves per SNR for the first reference target; writes roc.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = config.seed if seed is None else seed
    cfg = config.system
    plan = beams.default_plan(cfg, n_beams=config.scan.n_beams,
                              span_deg=config.scan.span_deg)
    scene_h1 = build_scene(config, cfg, seed)
    scene_h0 = scene_h1.without_targets()
    dspec = config.detector
    t_start = time.perf_counter()
    curves = detector.roc_curve(
        scene_h0, scene_h1, cfg, plan, config.snr_list_db,
        n_trials=config.n_trials, n_thresholds=dspec.n_thresholds, seed=seed,
        n_range=dspec.n_range, n_angle=dspec.n_angle, r_max=dspec.r_max)
    rows = [
        (snr_db, gamma, p_fa, p_d)
        for snr_db in sorted(curves)
        for gamma, p_fa, p_d in curves[snr_db]
    ]
    _write_csv(out / "roc.csv", ("snr_db", "gamma", "p_fa", "p_d"), rows)
    manifest = _base_manifest(config, seed)
    manifest["outputs"] = ["roc.csv"]
    manifest["stage_seconds"] = {"roc": time.perf_counter() - t_start}
    manifest["n_trials"] = config.n_trials
    _write_manifest(out / "manifest.json", manifest)
    return manifest


def crb_experiment(config: ExperimentConfig, out_dir, seed: int | None = None,
                   include_scatterers: bool = False) -> dict:
    """CRB standard deviations per SNR for the configured scene's targets.

    By default the FIM treats scatterers as absent (the filter removes them
    before estimation); include_scatterers=True keeps their amplitudes as
    nuisances, which is much slower for dense scenes. Writes crb.json.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = config.seed if seed is None else seed
    cfg = config.system
    plan = beams.default_plan(cfg, n_beams=config.scan.n_beams,
                              span_deg=config.scan.span_deg)
    scene = build_scene(config, cfg, seed)
    if not scene.targets:
        raise ValueError("the CRB experiment needs at least one target")
    if not include_scatterers:
        scene = Scene(targets=scene.targets, scatterers=())
    t_start = time.perf_counter()
    records = []
    for snr_db in config.snr_list_db:
        sigma2 = 10.0 ** (-snr_db / 10.0)
        blocks = crb.total_fim(scene, plan, cfg, sigma2=sigma2)
        records.append(crb.crb_result_to_dict(crb.crb_eta_t(blocks), float(snr_db)))
    with open(out / "crb.json", "w") as fh:
        json.dump(records, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest = _base_manifest(config, seed)
    manifest["scene"] = json.loads(scene_to_json(scene))
    manifest["outputs"] = ["crb.json"]
    manifest["include_scatterers"] = include_scatterers
    manifest["stage_seconds"] = {"crb": time.perf_counter() - t_start}
    _write_manifest(out / "manifest.json", manifest)
    return manifest
