"""Batch experiment runner behind the `redlab` console command.

Subcommands:

* ``redlab run <config>``       - validate, execute, write CSVs + summary;
* ``redlab validate <config>``  - validate only, touch nothing;
* ``redlab list-experiments``   - print the experiment registry.

Configs are flat key-value text with ``[section]`` headers (INI syntax,
no interpolation, full-line ``#``/``;`` comments).  Unknown sections or
keys are rejected so typos fail loudly.  Every experiment requires an
integer ``seed``; all randomness flows through it, so a fixed config
reproduces byte-identical outputs.  Wall-clock timing is off by default
for the same reason.

Exit codes: 0 success, 2 validation or input error (nothing is written),
3 numerical divergence.  The ``REDLAB_OUT`` environment variable
overrides the configured output directory.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import os
import re
import sys
from collections.abc import Callable
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .denoisers import (
    BernoulliMmseDenoiser,
    Denoiser,
    GmmMmseDenoiser,
    LinearSymmetricDenoiser,
    MedianFilterDenoiser,
    NlmDenoiser,
    TdtDenoiser,
)
from .diagnostics import (
    DEFAULT_EPSILON,
    RedProblem,
    cost_red,
    cost_slice,
    grad_error,
    grad_red_lh,
    grad_red_romano,
    grad_red_true,
    js_error,
    lh_error_1,
    lh_error_2,
    numerical_gradient_rho,
    numerical_jacobian,
)
from .equilibrium import consensus_residual, denoising_equilibria, red_pg_pair
from .errors import (
    ConfigError,
    DivergenceError,
    NonConvergenceError,
    RedlabError,
)
from .image import Image, awgn, extract_center_patch, load_pgm
from .losses import QuadraticLoss, make_uniform_blur
from .operators import IdentityOperator, operator_matrix
from .scenes import diagnostic_patches, solver_scene
from .smd import KdePrior, TweedieRegularizer
from .solvers import SOLVERS, SolverConfig, Trajectory, red_pg

__all__ = ["EXPERIMENTS", "main"]

# Assumed denoiser input noise variance when a config does not set one.
DEFAULT_NOISE_VARIANCE = 3.25**2

EXPERIMENTS = {
    "jacobian-report": "Jacobian symmetry-error table over noisy patches",
    "gradient-report": "error table for the three candidate gradient expressions",
    "lh-report": "local-homogeneity error table",
    "trajectory": "one solver run with a per-iteration CSV log",
    "cost-slice": "2-D objective and slope slice around a solver fixed point",
    "deblur": "all seven solvers on uniform-blur recovery with an exact linear oracle",
    "tweedie-check": "analytic vs numeric gradient of the smoothed-prior regularizer",
    "equilibrium-check": "consensus residuals at a fixed point plus the denoising mirror identity",
}

_DENOISER_KINDS = ("tdt", "median", "nlm", "linear", "gmm", "bernoulli")
_REPORT_METRICS = {
    "jacobian-report": ("e_J",),
    "gradient-report": ("e_grad_romano", "e_grad_lh", "e_grad_true"),
    "lh-report": ("e_LH1", "e_LH2"),
}
_REPORT_HEADER = [
    "image",
    "denoiser",
    "e_J",
    "e_grad_romano",
    "e_grad_lh",
    "e_grad_true",
    "e_LH1",
    "e_LH2",
]
_DEBLUR_ORDER = ("sd", "admm", "admm_i1", "fp", "pg", "dpg", "apg")
_LABEL_RE = re.compile(r"^[a-z0-9][a-z0-9_-]*$")


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


class _ConfigReader:
    """Typed access to parsed sections with consumption tracking.

    Every key actually read is marked; `finish` rejects whatever is left
    over, so a misspelled or misplaced key can never be silently ignored.
    """

    def __init__(self, sections: dict[str, dict[str, str]]):
        self._sections = sections
        self._seen_sections: set[str] = set()
        self._seen_keys: dict[str, set[str]] = {name: set() for name in sections}

    def has_section(self, name: str) -> bool:
        if name in self._sections:
            self._seen_sections.add(name)
            return True
        return False

    def _raw(self, section: str, key: str, required: bool) -> str | None:
        data = self._sections.get(section)
        if data is None:
            if required:
                raise ConfigError(f"missing section [{section}] (required key {key!r})")
            return None
        self._seen_sections.add(section)
        if key in data:
            self._seen_keys[section].add(key)
            return data[key]
        if required:
            raise ConfigError(f"[{section}] is missing required key {key!r}")
        return None

    def get_str(self, section: str, key: str, default: str | None = None,
                required: bool = False) -> str | None:
        raw = self._raw(section, key, required)
        return default if raw is None else raw.strip()

    def get_int(self, section: str, key: str, default: int | None = None,
                minimum: int | None = None, required: bool = False) -> int | None:
        raw = self._raw(section, key, required)
        if raw is None:
            return default
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(
                f"[{section}] {key}: expected an integer, got {raw!r}"
            ) from None
        if minimum is not None and value < minimum:
            raise ConfigError(f"[{section}] {key}: must be >= {minimum}, got {value}")
        return value

    def get_float(self, section: str, key: str, default: float | None = None,
                  positive: bool = False, required: bool = False) -> float | None:
        raw = self._raw(section, key, required)
        if raw is None:
            return default
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(
                f"[{section}] {key}: expected a number, got {raw!r}"
            ) from None
        if positive and value <= 0:
            raise ConfigError(f"[{section}] {key}: must be > 0, got {value}")
        return value

    def get_bool(self, section: str, key: str, default: bool = False) -> bool:
        raw = self._raw(section, key, required=False)
        if raw is None:
            return default
        lowered = raw.strip().lower()
        if lowered in ("on", "true", "yes", "1"):
            return True
        if lowered in ("off", "false", "no", "0"):
            return False
        raise ConfigError(f"[{section}] {key}: expected on/off, got {raw!r}")

    def get_list(self, section: str, key: str,
                 default: list[str] | None = None) -> list[str] | None:
        raw = self._raw(section, key, required=False)
        if raw is None:
            return default
        items = [item.strip() for item in raw.split(",") if item.strip()]
        if not items:
            raise ConfigError(f"[{section}] {key}: expected a comma-separated list")
        return items

    def finish(self, experiment: str) -> None:
        for name in self._sections:
            if name not in self._seen_sections:
                raise ConfigError(
                    f"section [{name}] is not used by experiment {experiment!r}"
                )
            leftover = sorted(set(self._sections[name]) - self._seen_keys[name])
            if leftover:
                raise ConfigError(
                    f"unknown key(s) in [{name}]: {', '.join(leftover)}"
                )


# ---------------------------------------------------------------------------
# Denoiser and problem construction


@dataclass(frozen=True)
class _DenoiserSpec:
    label: str
    kind: str
    params: dict


def _read_denoiser_spec(reader: _ConfigReader, section: str, label: str,
                        default_kind: str | None = None) -> _DenoiserSpec:
    kind = reader.get_str(section, "kind", default=default_kind)
    if kind is None:
        raise ConfigError(
            f"[{section}] needs a 'kind' key (one of: {', '.join(_DENOISER_KINDS)})"
        )
    if kind not in _DENOISER_KINDS:
        raise ConfigError(
            f"unknown denoiser kind {kind!r}; valid kinds: {', '.join(_DENOISER_KINDS)}"
        )
    params: dict = {}
    if kind == "tdt":
        params["threshold"] = reader.get_float(
            section, "threshold", default=0.001, positive=True
        )
    elif kind == "median":
        window = reader.get_int(section, "window", default=3, minimum=1)
        if window % 2 == 0:
            raise ConfigError(f"[{section}] window: must be odd, got {window}")
        params["window"] = window
    elif kind == "nlm":
        params["patch_radius"] = reader.get_int(
            section, "patch_radius", default=1, minimum=0
        )
        params["search_radius"] = reader.get_int(
            section, "search_radius", default=5, minimum=0
        )
        params["noise_variance"] = reader.get_float(
            section, "noise_variance", default=DEFAULT_NOISE_VARIANCE, positive=True
        )
        params["bandwidth"] = reader.get_float(section, "bandwidth", positive=True)
    elif kind == "gmm":
        params["components"] = reader.get_int(
            section, "components", default=5, minimum=1
        )
        params["center_scale"] = reader.get_float(
            section, "center_scale", default=2.0, positive=True
        )
        params["center_seed"] = reader.get_int(
            section, "center_seed", default=1, minimum=0
        )
        params["noise_variance"] = reader.get_float(
            section, "noise_variance", default=DEFAULT_NOISE_VARIANCE, positive=True
        )
    elif kind == "bernoulli":
        params["noise_variance"] = reader.get_float(
            section, "noise_variance", default=DEFAULT_NOISE_VARIANCE, positive=True
        )
    return _DenoiserSpec(label=label, kind=kind, params=params)


def _build_denoiser(spec: _DenoiserSpec, shape: tuple[int, int]) -> Denoiser:
    if spec.kind == "tdt":
        if not (_is_pow2(shape[0]) and _is_pow2(shape[1])):
            raise ConfigError(
                f"denoiser 'tdt' needs power-of-two image sides, got {shape}"
            )
        return TdtDenoiser(threshold=spec.params["threshold"])
    if spec.kind == "median":
        return MedianFilterDenoiser(window=spec.params["window"])
    if spec.kind == "nlm":
        if spec.params["bandwidth"] is not None:
            return NlmDenoiser(
                patch_radius=spec.params["patch_radius"],
                search_radius=spec.params["search_radius"],
                bandwidth=spec.params["bandwidth"],
            )
        return NlmDenoiser(
            patch_radius=spec.params["patch_radius"],
            search_radius=spec.params["search_radius"],
            noise_variance=spec.params["noise_variance"],
        )
    if spec.kind == "linear":
        return LinearSymmetricDenoiser.local_average(shape)
    if spec.kind == "gmm":
        rng = np.random.default_rng(spec.params["center_seed"])
        centers = rng.normal(
            0.0, spec.params["center_scale"],
            size=(spec.params["components"], shape[0] * shape[1]),
        )
        return GmmMmseDenoiser(centers, spec.params["noise_variance"])
    return BernoulliMmseDenoiser(spec.params["noise_variance"])


@dataclass(frozen=True)
class _ProblemSpec:
    size: int
    scene_index: int
    image_path: Path | None
    blur: int
    noise_variance: float
    weight: float


def _read_problem(reader: _ConfigReader, config_dir: Path,
                  default_blur: int) -> _ProblemSpec:
    size = reader.get_int("problem", "size", default=64, minimum=4)
    scene_index = reader.get_int("problem", "scene", default=0, minimum=0)
    image = reader.get_str("problem", "image")
    image_path = None
    if image is not None:
        image_path = (config_dir / image).resolve()
        if not image_path.is_file():
            raise ConfigError(f"[problem] image: file not found: {image_path}")
    blur = reader.get_int("problem", "blur", default=default_blur, minimum=1)
    if blur % 2 == 0:
        raise ConfigError(f"[problem] blur: width must be odd, got {blur}")
    noise_variance = reader.get_float(
        "problem", "noise_variance", default=2.0, positive=True
    )
    weight = reader.get_float("problem", "weight", default=0.02, positive=True)
    return _ProblemSpec(size, scene_index, image_path, blur, noise_variance, weight)


def _build_problem(ps: _ProblemSpec, spec: _DenoiserSpec,
                   seed: int) -> tuple[RedProblem, Image]:
    if ps.image_path is not None:
        truth = load_pgm(str(ps.image_path))
    else:
        truth = solver_scene(size=ps.size, index=ps.scene_index)
    shape = truth.pixels.shape
    op = make_uniform_blur(ps.blur) if ps.blur > 1 else IdentityOperator()
    y = awgn(op.apply(truth), ps.noise_variance, seed=seed)
    denoiser = _build_denoiser(spec, shape)
    problem = RedProblem(
        operator=op,
        y=y,
        noise_variance=ps.noise_variance,
        weight=ps.weight,
        denoiser=denoiser,
    )
    return problem, truth


@dataclass(frozen=True)
class _SolverSpec:
    method: str | None
    iterations: int
    beta: float
    l_scale: float
    l_apg: float
    l_initial: float
    l_final: float
    inner_iterations: int
    sd_step: float | None
    stop_fp_residual: float | None
    timing: bool


def _read_solver(reader: _ConfigReader, *, with_method: bool,
                 default_iterations: int, default_inner: int = 1,
                 read_l_apg: bool = False) -> _SolverSpec:
    method = None
    if with_method:
        method = reader.get_str("solver", "method", default="pg")
        if method not in SOLVERS:
            raise ConfigError(
                f"[solver] method: unknown solver {method!r}; "
                f"valid methods: {', '.join(SOLVERS)}"
            )
    default_l = 1.0 if method == "apg" else 1.01
    spec = _SolverSpec(
        method=method,
        iterations=reader.get_int(
            "solver", "iterations", default=default_iterations, minimum=1
        ),
        beta=reader.get_float("solver", "beta", default=0.001, positive=True),
        l_scale=reader.get_float("solver", "l", default=default_l, positive=True),
        l_apg=(
            reader.get_float("solver", "l_apg", default=1.0, positive=True)
            if read_l_apg
            else 1.0
        ),
        l_initial=reader.get_float("solver", "l_initial", default=0.2, positive=True),
        l_final=reader.get_float("solver", "l_final", default=2.0, positive=True),
        inner_iterations=reader.get_int(
            "solver", "inner_iterations", default=default_inner, minimum=1
        ),
        sd_step=reader.get_float("solver", "sd_step", positive=True),
        stop_fp_residual=reader.get_float(
            "solver", "stop_fp_residual", positive=True
        ),
        timing=reader.get_bool("solver", "timing", default=False),
    )
    return spec


def _solver_config(ss: _SolverSpec) -> SolverConfig:
    return SolverConfig(
        iterations=ss.iterations,
        beta=ss.beta,
        step_scale=ss.l_scale,
        l_initial=ss.l_initial,
        l_final=ss.l_final,
        inner_iterations=ss.inner_iterations,
        sd_step=ss.sd_step,
        stop_fp_residual=ss.stop_fp_residual,
        record_timing=ss.timing,
    )


# ---------------------------------------------------------------------------
# Output helpers

Outputs = tuple[list[tuple[str, str]], str]


def _csv_text(header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _text_table(header: list[str], rows: list[list[str]]) -> str:
    widths = [
        max(len(header[i]), max((len(r[i]) for r in rows), default=0))
        for i in range(len(header))
    ]
    lines = ["  ".join(header[i].ljust(widths[i]) for i in range(len(header))).rstrip()]
    for r in rows:
        lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(r))).rstrip())
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Experiment planners: validate eagerly, return a deferred execute()


def _plan_report(which: str) -> Callable:
    metrics = _REPORT_METRICS[which]

    def planner(reader: _ConfigReader, config_dir: Path, seed: int):
        image_names = reader.get_list("experiment", "images")
        patches_key = reader.get_int("experiment", "patches", minimum=1)
        if image_names is not None and patches_key is not None:
            raise ConfigError("[experiment] set either 'patches' or 'images', not both")
        count = 10 if patches_key is None else patches_key
        patch_size = reader.get_int("experiment", "patch_size", default=16, minimum=4)
        noise_variance = reader.get_float(
            "experiment", "noise_variance", default=DEFAULT_NOISE_VARIANCE,
            positive=True,
        )
        epsilon = reader.get_float(
            "experiment", "epsilon", default=DEFAULT_EPSILON, positive=True
        )
        labels = reader.get_list(
            "experiment", "denoisers", default=["tdt", "median", "nlm"]
        )
        if len(set(labels)) != len(labels):
            raise ConfigError("[experiment] denoisers: labels must be unique")
        image_paths: list[Path] | None = None
        if image_names is not None:
            image_paths = []
            for name in image_names:
                path = (config_dir / name).resolve()
                if not path.is_file():
                    raise ConfigError(f"[experiment] images: file not found: {path}")
                image_paths.append(path)
            if patch_size > 32:
                raise ConfigError("[experiment] patch_size: must be <= 32")
        elif patch_size > 16:
            # Procedural patches are rank-equalized, which caps the pixel count.
            raise ConfigError(
                "[experiment] patch_size: must be <= 16 without explicit images"
            )
        specs = []
        for label in labels:
            if not _LABEL_RE.match(label):
                raise ConfigError(f"invalid denoiser label {label!r}")
            if reader.has_section(label) or label in _DENOISER_KINDS:
                default_kind = label if label in _DENOISER_KINDS else None
                specs.append(_read_denoiser_spec(reader, label, label, default_kind))
            else:
                raise ConfigError(
                    f"denoiser label {label!r} has no [{label}] section and is not "
                    f"a known kind"
                )
        if any(s.kind == "tdt" for s in specs) and not _is_pow2(patch_size):
            raise ConfigError(
                "[experiment] patch_size: 'tdt' needs a power of two"
            )

        def execute() -> Outputs:
            if image_paths is not None:
                clean = [
                    (path.stem, extract_center_patch(load_pgm(str(path)), patch_size))
                    for path in image_paths
                ]
            else:
                clean = [
                    (f"patch{i:02d}", img)
                    for i, img in enumerate(
                        diagnostic_patches(count=count, size=patch_size)
                    )
                ]
            points = [
                (name, awgn(img, noise_variance, seed=seed + i))
                for i, (name, img) in enumerate(clean)
            ]
            files = []
            summary_rows = []
            for spec in specs:
                f = _build_denoiser(spec, (patch_size, patch_size))
                rows = []
                sums = dict.fromkeys(metrics, 0.0)
                for name, x in points:
                    values = _report_metrics(which, f, x, epsilon)
                    cells = [name, spec.label]
                    for column in _REPORT_HEADER[2:]:
                        cells.append(
                            repr(values[column]) if column in values else ""
                        )
                    rows.append(cells)
                    for metric in metrics:
                        sums[metric] += values[metric]
                files.append(
                    (f"{which}_{spec.label}.csv", _csv_text(_REPORT_HEADER, rows))
                )
                for metric in metrics:
                    summary_rows.append(
                        [spec.label, metric, f"{sums[metric] / len(points):.6e}"]
                    )
            head = (
                f"{which}: mean errors over {len(points)} noisy {patch_size}x"
                f"{patch_size} patches (noise variance {noise_variance}, "
                f"seed {seed}, probe step {epsilon})"
            )
            table = _text_table(["denoiser", "metric", "mean"], summary_rows)
            return files, head + "\n\n" + table

        return execute

    return planner


def _report_metrics(which: str, f: Denoiser, x: Image, epsilon: float) -> dict:
    if which == "jacobian-report":
        return {"e_J": js_error(numerical_jacobian(f, x, epsilon))}
    if which == "gradient-report":
        estimate = numerical_jacobian(f, x, epsilon)
        numeric = numerical_gradient_rho(f, x, epsilon)
        return {
            "e_grad_romano": grad_error(grad_red_romano(f, x), numeric),
            "e_grad_lh": grad_error(grad_red_lh(f, x, estimate), numeric),
            "e_grad_true": grad_error(grad_red_true(f, x, estimate), numeric),
        }
    estimate = numerical_jacobian(f, x, epsilon)
    return {
        "e_LH1": lh_error_1(f, x, epsilon),
        "e_LH2": lh_error_2(f, x, epsilon, jacobian=estimate),
    }


def _plan_trajectory(reader: _ConfigReader, config_dir: Path, seed: int):
    problem_spec = _read_problem(reader, config_dir, default_blur=1)
    denoiser_spec = _read_denoiser_spec(reader, "denoiser", label="", default_kind="tdt")
    solver_spec = _read_solver(reader, with_method=True, default_iterations=500)
    _check_tdt_size(denoiser_spec, problem_spec)
    label = denoiser_spec.kind

    def execute() -> Outputs:
        problem, truth = _build_problem(problem_spec, denoiser_spec, seed)
        solver = SOLVERS[solver_spec.method]
        _, trajectory = solver(problem, _solver_config(solver_spec), truth=truth)
        last = trajectory.records[-1]
        summary = "\n".join(
            [
                f"trajectory: {solver_spec.method} with {label}, "
                f"{len(trajectory)} iterations (seed {seed})",
                "",
                _text_table(
                    ["iterations", "psnr_db", "cost_red", "fp_residual"],
                    [
                        [
                            str(last.iteration),
                            f"{last.psnr_db:.4f}",
                            f"{last.cost_red:.6e}",
                            f"{last.fp_residual:.6e}",
                        ]
                    ],
                ),
            ]
        )
        return [(f"trajectory_{label}.csv", trajectory.csv_text())], summary

    return execute


def _plan_cost_slice(reader: _ConfigReader, config_dir: Path, seed: int):
    problem_spec = _read_problem(reader, config_dir, default_blur=1)
    denoiser_spec = _read_denoiser_spec(reader, "denoiser", label="", default_kind="tdt")
    solver_spec = _read_solver(reader, with_method=True, default_iterations=200)
    radius = reader.get_float("slice", "radius", default=2.0, positive=True)
    points = reader.get_int("slice", "points", default=21, minimum=2)
    _check_tdt_size(denoiser_spec, problem_spec)
    label = denoiser_spec.kind

    def execute() -> Outputs:
        problem, _ = _build_problem(problem_spec, denoiser_spec, seed)
        solver = SOLVERS[solver_spec.method]
        center, _ = solver(problem, _solver_config(solver_spec))
        rng = np.random.default_rng(seed + 1)
        e1 = rng.standard_normal(center.size)
        e1 /= np.linalg.norm(e1)
        e2 = rng.standard_normal(center.size)
        e2 -= (e2 @ e1) * e1
        e2 /= np.linalg.norm(e2)
        grid = np.linspace(-radius, radius, points)
        samples = cost_slice(problem, center, e1, e2, grid, grid)
        rows = [
            [
                repr(s.alpha),
                repr(s.beta),
                repr(s.cost),
                repr(s.grad_e1),
                repr(s.grad_e2),
            ]
            for s in samples
        ]
        best = min(samples, key=lambda s: s.cost)
        center_cost = cost_red(problem, center)
        summary = "\n".join(
            [
                f"cost-slice: {points}x{points} grid, radius {radius}, around a "
                f"{solver_spec.method}/{label} fixed point (seed {seed})",
                "",
                f"cost at center: {center_cost:.6e}",
                f"grid minimum:   {best.cost:.6e} at "
                f"(alpha={best.alpha:g}, beta={best.beta:g})",
            ]
        )
        header = ["alpha", "beta", "cost_red", "grad_e1", "grad_e2"]
        return [(f"cost-slice_{label}.csv", _csv_text(header, rows))], summary

    return execute


def _plan_deblur(reader: _ConfigReader, config_dir: Path, seed: int):
    problem_spec = _read_problem(reader, config_dir, default_blur=9)
    denoiser_spec = _read_denoiser_spec(
        reader, "denoiser", label="linear", default_kind="linear"
    )
    if denoiser_spec.kind != "linear":
        raise ConfigError(
            "deblur computes an exact oracle gap and therefore requires the "
            "linear denoiser; use the trajectory experiment for other kinds"
        )
    solver_spec = _read_solver(
        reader, with_method=False, default_iterations=500, default_inner=20,
        read_l_apg=True,
    )

    def execute() -> Outputs:
        problem, truth = _build_problem(problem_spec, denoiser_spec, seed)
        shape = truth.pixels.shape
        n = truth.size
        a = operator_matrix(problem.operator, shape)
        w = problem.denoiser.matrix
        sigma2 = problem.noise_variance
        normal = a.T @ a / sigma2 + problem.weight * (np.eye(n) - w)
        x_star = np.linalg.solve(normal, a.T @ problem.y.flat / sigma2)
        star_norm = float(np.linalg.norm(x_star))

        base = _solver_config(solver_spec)
        configs = dict.fromkeys(_DEBLUR_ORDER, base)
        configs["apg"] = replace(base, step_scale=solver_spec.l_apg)

        files = []
        summary_rows = []
        header = Trajectory.CSV_HEADER + ["oracle_gap"]
        for name in _DEBLUR_ORDER:
            gaps: list[float] = []

            def observer(k: int, x: Image, gaps: list[float] = gaps) -> None:
                gaps.append(float(np.linalg.norm(x.flat - x_star)) / star_norm)

            _, trajectory = SOLVERS[name](
                problem, configs[name], truth=truth, observer=observer
            )
            rows = [
                cells + [repr(gap)]
                for cells, gap in zip(trajectory.csv_rows(), gaps)
            ]
            files.append((f"deblur_linear_{name}.csv", _csv_text(header, rows)))
            last = trajectory.records[-1]
            summary_rows.append(
                [
                    name,
                    str(last.iteration),
                    f"{last.psnr_db:.4f}",
                    f"{last.fp_residual:.6e}",
                    f"{gaps[-1]:.6e}",
                ]
            )
        head = (
            f"deblur: {shape[0]}x{shape[1]}, {problem_spec.blur}x{problem_spec.blur} "
            f"uniform blur, noise variance {sigma2}, weight {problem.weight}, "
            f"seed {seed}; oracle gap is ||x_k - x*|| / ||x*|| against the direct "
            f"linear solve"
        )
        table = _text_table(
            ["solver", "iterations", "psnr_db", "fp_residual", "oracle_gap"],
            summary_rows,
        )
        return files, head + "\n\n" + table

    return execute


def _plan_tweedie(reader: _ConfigReader, config_dir: Path, seed: int):
    instances = reader.get_int("experiment", "instances", default=20, minimum=1)
    epsilon = reader.get_float("experiment", "epsilon", default=1e-5, positive=True)

    def execute() -> Outputs:
        rng = np.random.default_rng(seed)
        rows = []
        worst = 0.0
        for index in range(instances):
            n = int(rng.choice([2, 4, 8]))
            centers = rng.normal(0.0, 1.0, size=(5, n))
            nu = float(rng.uniform(0.3, 2.0))
            r = rng.normal(0.0, 1.5, size=n)
            regularizer = TweedieRegularizer(KdePrior(centers, nu))
            analytic = regularizer.gradient(r)
            numeric = np.empty(n)
            for j in range(n):
                shifted = r.copy()
                shifted[j] = r[j] + epsilon
                upper = regularizer.value(shifted)
                shifted[j] = r[j] - epsilon
                lower = regularizer.value(shifted)
                numeric[j] = (upper - lower) / (2.0 * epsilon)
            rel = float(np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric))
            worst = max(worst, rel)
            rows.append([str(index), repr(rel)])
        summary = "\n".join(
            [
                f"tweedie-check: {instances} random mixture instances "
                f"(seed {seed}, probe step {epsilon})",
                "",
                f"worst relative error: {worst:.6e}",
            ]
        )
        header = ["instance", "relative_error"]
        return [("tweedie-check_gmm.csv", _csv_text(header, rows))], summary

    return execute


def _plan_equilibrium(reader: _ConfigReader, config_dir: Path, seed: int):
    denoising_variance = reader.get_float(
        "experiment", "denoising_variance", default=100.0, positive=True
    )
    problem_spec = _read_problem(reader, config_dir, default_blur=9)
    denoiser_spec = _read_denoiser_spec(reader, "denoiser", label="", default_kind="tdt")
    solver_spec = _read_solver(reader, with_method=False, default_iterations=2000)
    _check_tdt_size(denoiser_spec, problem_spec)
    label = denoiser_spec.kind

    def execute() -> Outputs:
        problem, truth = _build_problem(problem_spec, denoiser_spec, seed)
        l_scale = solver_spec.l_scale
        x_hat, _ = red_pg(problem, _solver_config(solver_spec))
        f = problem.denoiser
        fx_hat = f.apply(x_hat)
        u_hat = Image((fx_hat.pixels - x_hat.pixels) / l_scale)
        loss = QuadraticLoss(problem.operator, problem.y, problem.noise_variance)
        pair = red_pg_pair(loss, f, problem.weight, l_scale)
        res_f, res_g = consensus_residual(pair, x_hat, u_hat)

        y2 = awgn(truth, denoising_variance, seed=seed + 1)
        x_pnp, x_red = denoising_equilibria(f, y2)
        mirror = float(
            np.linalg.norm(
                (y2.flat - x_red.flat) - (x_red.flat - f.apply(x_red).flat)
            )
        )
        pnp_matches = bool(np.array_equal(x_pnp.pixels, f.apply(y2).pixels))

        rows = [
            ["consensus_residual_f", repr(res_f)],
            ["consensus_residual_g", repr(res_g)],
            ["denoising_mirror_gap", repr(mirror)],
            ["pnp_matches_denoiser_output", "1" if pnp_matches else "0"],
        ]
        summary = "\n".join(
            [
                f"equilibrium-check: {label} fixed point after "
                f"{solver_spec.iterations} iterations (L = {l_scale}, seed {seed}), "
                f"then pure denoising at variance {denoising_variance}",
                "",
                _text_table(["quantity", "value"], rows),
            ]
        )
        csv_name = f"equilibrium-check_{label}.csv"
        return [(csv_name, _csv_text(["quantity", "value"], rows))], summary

    return execute


def _check_tdt_size(denoiser_spec: _DenoiserSpec, problem_spec: _ProblemSpec) -> None:
    if (
        denoiser_spec.kind == "tdt"
        and problem_spec.image_path is None
        and not _is_pow2(problem_spec.size)
    ):
        raise ConfigError("[problem] size: 'tdt' needs a power of two")


_PLANNERS: dict[str, Callable] = {
    "jacobian-report": _plan_report("jacobian-report"),
    "gradient-report": _plan_report("gradient-report"),
    "lh-report": _plan_report("lh-report"),
    "trajectory": _plan_trajectory,
    "cost-slice": _plan_cost_slice,
    "deblur": _plan_deblur,
    "tweedie-check": _plan_tweedie,
    "equilibrium-check": _plan_equilibrium,
}


# ---------------------------------------------------------------------------
# Config loading and command dispatch


@dataclass(frozen=True)
class _Plan:
    name: str
    output: str
    execute: Callable[[], Outputs]


def _load_plan(config_path: str) -> _Plan:
    path = Path(config_path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {config_path}")
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    try:
        parser.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    if parser.defaults():
        raise ConfigError("a [DEFAULT] section is not supported")
    sections = {name: dict(parser.items(name)) for name in parser.sections()}
    reader = _ConfigReader(sections)
    name = reader.get_str("experiment", "name", required=True)
    if name not in EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment {name!r}; valid names: {', '.join(EXPERIMENTS)}"
        )
    seed = reader.get_int("experiment", "seed", required=True, minimum=0)
    output = reader.get_str("experiment", "output", default=".")
    execute = _PLANNERS[name](reader, path.parent, seed)
    reader.finish(name)
    return _Plan(name=name, output=output, execute=execute)


def _cmd_run(config_path: str) -> int:
    plan = _load_plan(config_path)
    files, summary = plan.execute()
    files = list(files) + [(f"{plan.name}_summary.txt", summary + "\n")]
    outdir = os.environ.get("REDLAB_OUT") or plan.output
    os.makedirs(outdir, exist_ok=True)
    for filename, text in files:
        target = os.path.join(outdir, filename)
        with open(target, "w", newline="") as fh:
            fh.write(text)
        print(f"wrote {target}")
    print()
    print(summary)
    return 0


def _cmd_validate(config_path: str) -> int:
    plan = _load_plan(config_path)
    print(f"config ok: experiment {plan.name!r}")
    return 0


def _cmd_list() -> int:
    width = max(len(name) for name in EXPERIMENTS)
    for name, description in EXPERIMENTS.items():
        print(f"{name.ljust(width)}  {description}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="redlab",
        description="Denoiser-driven recovery experiments with CSV output.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_parser = sub.add_parser("run", help="validate and execute a config")
    run_parser.add_argument("config", help="path to an experiment config file")
    validate_parser = sub.add_parser(
        "validate", help="check a config without running or writing anything"
    )
    validate_parser.add_argument("config", help="path to an experiment config file")
    sub.add_parser("list-experiments", help="print the experiment registry")
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args.config)
        if args.command == "validate":
            return _cmd_validate(args.config)
        return _cmd_list()
    except (DivergenceError, NonConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except RedlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
