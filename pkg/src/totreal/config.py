"""Scenario configuration: sectioned key=value files resolved to built-ins.

A scenario file has a [scenario] section naming the task, a [chart] and an
[immersion] section building the geometry, an optional [perturbation]
section building a one-parameter family, and a [task] section of parameters
consumed by the task runner.  Unknown sections and keys are hard errors so
that typos surface as ConfigError instead of silently running defaults.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

from .errors import ConfigError
from .immersion import (
    GridImmersion,
    circle,
    clifford_torus,
    core_geodesic,
    linear_torus,
    random_torus,
)
from .isotopy import FormFamily
from .kahler import (
    CylinderPotential,
    FlatChart,
    FubiniStudyChart,
    HyperbolicBallChart,
    KahlerChart,
    PolyPotential,
    UpperHalfPlaneChart,
)

__all__ = [
    "Scenario",
    "bundled_scenario_names",
    "load_scenario",
    "resolve_scenario_path",
]

TASKS = ("validate", "maslov", "linearize", "moser", "persist")

_SECTION_KEYS = {
    "scenario": {"name", "task", "seed", "out"},
    "chart": {"kind", "dim", "c", "ell"},
    "immersion": {
        "family",
        "resolution",
        "radius",
        "radii",
        "periods",
        "amplitude",
        "seed",
        "scale",
    },
    "perturbation": {
        "potential",
        "mode",
        "form",
        "ell",
        "radial_coef",
        "radial_mode",
        "angular_coef",
        "angular_mode",
        # poly terms are numbered term_1, term_2, ... and checked separately
    },
    "task": {
        "tol",
        "steps",
        "t_end",
        "count",
        "dump_matrix",
        "operator",
        "newton_tol",
        "certificate_tol",
        "critical_tol",
        "min_step",
        "trials",
        "probe_scale",
        "kernel",
        "modules",
    },
}


@dataclass(frozen=True)
class Scenario:
    """A parsed scenario: resolved geometry plus raw task parameters."""

    name: str
    task: str
    seed: int
    out_dir: Path
    chart: KahlerChart
    immersion: GridImmersion
    family: FormFamily | None
    params: Mapping[str, str] = field(default_factory=dict)


# --- typed getters ------------------------------------------------------------


def _get(cp, section, key, default=None, required=False):
    if cp.has_option(section, key):
        return cp.get(section, key)
    if required:
        raise ConfigError(section, key, "missing required key")
    return default


def _get_int(cp, section, key, default=None, required=False):
    raw = _get(cp, section, key, required=required)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(section, key, f"expected an integer, got {raw!r}") from None


def _get_float(cp, section, key, default=None, required=False):
    raw = _get(cp, section, key, required=required)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(section, key, f"expected a number, got {raw!r}") from None


def _get_complex(cp, section, key, default=0.0):
    raw = _get(cp, section, key)
    if raw is None:
        return complex(default)
    try:
        return complex(raw.replace(" ", ""))
    except ValueError:
        raise ConfigError(
            section, key, f"expected a complex number like 0.1+0.07j, got {raw!r}"
        ) from None


def _get_floats(cp, section, key, default=None, required=False):
    raw = _get(cp, section, key, required=required)
    if raw is None:
        return default
    try:
        return tuple(float(v) for v in raw.split())
    except ValueError:
        raise ConfigError(
            section, key, f"expected space-separated numbers, got {raw!r}"
        ) from None


def _resolution(cp, section, n_axes):
    vals = _get(cp, section, "resolution")
    if vals is None:
        raise ConfigError(section, "resolution", "missing required key")
    try:
        parts = tuple(int(v) for v in vals.split())
    except ValueError:
        raise ConfigError(
            section, "resolution", f"expected integers, got {vals!r}"
        ) from None
    if len(parts) == 1:
        parts = parts * n_axes
    if len(parts) != n_axes:
        raise ConfigError(
            section,
            "resolution",
            f"expected {n_axes} axis counts, got {len(parts)}",
        )
    return parts


# --- section builders ----------------------------------------------------------


def _check_keys(cp, section):
    if not cp.has_section(section):
        return
    allowed = _SECTION_KEYS[section]
    for key in cp.options(section):
        if key in allowed:
            continue
        if section == "perturbation" and key.startswith("term_"):
            continue
        raise ConfigError(section, key, "unknown key")


def _build_chart(cp) -> KahlerChart:
    kind = _get(cp, "chart", "kind", required=True)
    dim = _get_int(cp, "chart", "dim", default=1)
    c = _get_float(cp, "chart", "c", default=1.0)
    if kind == "flat":
        return FlatChart(dim)
    if kind == "fubini_study":
        return FubiniStudyChart(dim, c=c)
    if kind == "hyperbolic_ball":
        return HyperbolicBallChart(dim, c=c)
    if kind == "upper_half_plane":
        return UpperHalfPlaneChart(c=c)
    if kind == "hyperbolic_cylinder":
        ell = _get_float(cp, "chart", "ell", required=True)
        return UpperHalfPlaneChart.cylinder(c=c, ell=ell)
    raise ConfigError("chart", "kind", f"unknown chart kind {kind!r}")


def _build_immersion(cp, chart: KahlerChart) -> GridImmersion:
    family = _get(cp, "immersion", "family", required=True)
    if family == "circle":
        (res,) = _resolution(cp, "immersion", 1)
        radius = _get_float(cp, "immersion", "radius", default=1.0)
        return circle(radius, res, chart=chart)
    if family == "clifford":
        res = _resolution(cp, "immersion", 2)
        radii = _get_floats(cp, "immersion", "radii", default=(1.0, 1.0))
        if len(radii) != 2:
            raise ConfigError("immersion", "radii", "expected two radii")
        return clifford_torus(radii, res, chart=chart)
    if family == "linear-torus":
        res = _resolution(cp, "immersion", 2)
        raw = _get(cp, "immersion", "periods", required=True)
        rows = raw.split(";")
        if len(rows) != 2:
            raise ConfigError(
                "immersion", "periods", "expected two generators separated by ';'"
            )
        try:
            periods = tuple(
                tuple(complex(v.replace(" ", "")) for v in row.split(","))
                for row in rows
            )
        except ValueError:
            raise ConfigError(
                "immersion",
                "periods",
                "expected 'w11, w12 ; w21, w22' with complex entries",
            ) from None
        return linear_torus(periods, res)
    if family == "random-torus":
        res = _resolution(cp, "immersion", 2)
        return random_torus(
            seed=_get_int(cp, "immersion", "seed", default=0),
            amplitude=_get_float(cp, "immersion", "amplitude", default=0.05),
            resolution=res,
            scale=_get_float(cp, "immersion", "scale", default=1.0),
            chart=chart,
        )
    if family == "core-geodesic":
        if _get(cp, "chart", "kind") != "hyperbolic_cylinder":
            raise ConfigError(
                "immersion", "family", "core-geodesic needs a hyperbolic_cylinder chart"
            )
        (res,) = _resolution(cp, "immersion", 1)
        return core_geodesic(
            c=_get_float(cp, "chart", "c", default=1.0),
            ell=_get_float(cp, "chart", "ell", required=True),
            resolution=res,
        )
    raise ConfigError("immersion", "family", f"unknown immersion family {family!r}")


def _build_perturbation(cp):
    kind = _get(cp, "perturbation", "potential", required=True)
    if kind == "cylinder":
        return CylinderPotential(
            ell=_get_float(cp, "perturbation", "ell", required=True),
            radial_coef=_get_complex(cp, "perturbation", "radial_coef"),
            radial_mode=_get_int(cp, "perturbation", "radial_mode", default=1),
            angular_coef=_get_complex(cp, "perturbation", "angular_coef"),
            angular_mode=_get_int(cp, "perturbation", "angular_mode", default=2),
        )
    if kind == "poly":
        terms = []
        for key in sorted(k for k in cp.options("perturbation") if k.startswith("term_")):
            raw = cp.get("perturbation", key)
            parts = [p.strip() for p in raw.split("|")]
            if len(parts) != 3:
                raise ConfigError(
                    "perturbation", key, "expected 'coef | mu exponents | nu exponents'"
                )
            try:
                coef = complex(parts[0].replace(" ", ""))
                mu = tuple(int(v) for v in parts[1].split())
                nu = tuple(int(v) for v in parts[2].split())
            except ValueError:
                raise ConfigError(
                    "perturbation", key, f"malformed monomial term {raw!r}"
                ) from None
            terms.append((coef, mu, nu))
        if not terms:
            raise ConfigError("perturbation", "term_1", "poly potential has no terms")
        return PolyPotential(terms)
    raise ConfigError("perturbation", "potential", f"unknown potential {kind!r}")


def _build_family(cp, chart: KahlerChart) -> FormFamily | None:
    if not cp.has_section("perturbation"):
        return None
    pert = _build_perturbation(cp)
    mode = _get(cp, "perturbation", "mode", default="potential")
    form = _get(cp, "perturbation", "form", default="kahler-form")
    try:
        return FormFamily(chart, pert, mode, form)
    except ValueError as exc:
        raise ConfigError("perturbation", "mode", str(exc)) from None


# --- entry points ---------------------------------------------------------------


def bundled_scenario_names() -> tuple[str, ...]:
    """Names of the scenario files shipped inside the package."""
    root = resources.files("totreal") / "scenarios"
    return tuple(sorted(p.name[: -len(".cfg")] for p in root.iterdir() if p.name.endswith(".cfg")))


def resolve_scenario_path(name_or_path: str) -> Path:
    """A filesystem path wins; otherwise fall back to the bundled scenarios."""
    direct = Path(name_or_path)
    if direct.exists():
        return direct
    bundled = resources.files("totreal") / "scenarios" / f"{name_or_path}.cfg"
    with resources.as_file(bundled) as concrete:
        if concrete.exists():
            return concrete
    raise ConfigError(
        "scenario",
        None,
        f"no file {name_or_path!r} and no bundled scenario of that name "
        f"(bundled: {', '.join(bundled_scenario_names())})",
    )


def load_scenario(
    path: str | Path, overrides: Mapping[str, str] | None = None
) -> Scenario:
    """Parse and resolve a scenario file.

    ``overrides`` maps a dotted "section.key" to a replacement value and is
    how command-line flags reach into the file before anything is built.
    """
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            cp.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError("scenario", None, f"cannot read {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError("scenario", None, f"parse failure: {exc}") from None

    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, value)

    for section in cp.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(section, None, "unknown section")
        _check_keys(cp, section)
    if not cp.has_section("scenario"):
        raise ConfigError("scenario", None, "missing [scenario] section")

    task = _get(cp, "scenario", "task", required=True)
    if task not in TASKS:
        raise ConfigError(
            "scenario", "task", f"unknown task {task!r}; expected one of {TASKS}"
        )
    name = _get(cp, "scenario", "name", default=Path(path).stem)
    seed = _get_int(cp, "scenario", "seed", default=0)
    out_dir = Path(_get(cp, "scenario", "out", default=f"runs/{name}"))

    if task == "validate":
        # geometry sections are not consulted; the suites build their own
        chart = FlatChart(1)
        immersion = circle(1.0, 8, chart=chart)
        family = None
    else:
        if not cp.has_section("chart"):
            raise ConfigError("chart", None, "missing [chart] section")
        if not cp.has_section("immersion"):
            raise ConfigError("immersion", None, "missing [immersion] section")
        chart = _build_chart(cp)
        immersion = _build_immersion(cp, chart)
        family = _build_family(cp, chart)

    params = dict(cp.items("task")) if cp.has_section("task") else {}
    return Scenario(
        name=name,
        task=task,
        seed=seed,
        out_dir=out_dir,
        chart=chart,
        immersion=immersion,
        family=family,
        params=params,
    )
