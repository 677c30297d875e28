"""Scenario files: flat INI-style key = value configuration for the CLI.

A scenario bundles geometry, excitation, frequency, formulation and solver
settings plus the far-field outputs and the reference used for error
reporting.  See README for a complete example.
"""

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    """Invalid or inconsistent scenario file (CLI exit code 2)."""


@dataclass
class Scenario:
    geometry_kind: str
    geometry: dict
    frequency: float
    k_dir: np.ndarray
    polarization: np.ndarray
    amplitude: float
    kinds: list
    gamma: float = 0.5
    alpha_cfie: float = 0.5
    beta_cs: float = 10.0
    inner_tol: float = 1e-10
    gram_mode: str = "cg"
    solver_tol: float = 1e-4
    solver_maxit: int = 2000
    solver_method: str = "gmres"
    reference_kind: str = "none"
    reference_radius: str = "area"
    reference_path: str = ""
    phi_cuts: tuple = (0.0, 90.0)
    n_theta: int = 181
    base_dir: Path = field(default_factory=Path)

    def mie_radius(self, mesh):
        """Resolve the Mie reference radius: mesh-area equivalent, ideal, or a number."""
        spec = str(self.reference_radius).strip().lower()
        if spec == "area":
            return float(np.sqrt(mesh.areas.sum() / (4.0 * np.pi)))
        if spec == "ideal":
            if self.geometry_kind != "sphere":
                raise ConfigError("radius = ideal requires sphere geometry")
            return 0.5 * self.geometry["diameter"]
        try:
            return float(spec)
        except ValueError as exc:
            raise ConfigError(f"bad reference radius {self.reference_radius!r}") from exc

    def cut_grid(self):
        theta = np.linspace(0.0, 180.0, self.n_theta)
        thetas, phis = [], []
        for phi in self.phi_cuts:
            thetas.append(theta)
            phis.append(np.full_like(theta, phi))
        return np.concatenate(thetas), np.concatenate(phis)


_GEOMETRY_KEYS = {
    "sphere": ("diameter",),
    "cube": ("side",),
    "pyramid": ("base", "height"),
    "wedge": ("length", "base", "height"),
}

_VALID_KINDS = ("EFIE", "MFIE", "WMFIE1", "WMFIE2", "WMFIE3", "CFIE", "WCFIE", "CSIE")


def _floats(text):
    return [float(tok) for tok in text.replace(",", " ").split()]


def parse_scenario(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"scenario file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse scenario: {exc}") from exc

    try:
        geo = cp["geometry"]
        kind = geo.get("kind", "").strip()
        geometry = {}
        if kind == "file":
            geometry["path"] = geo.get("path", "")
            geometry["format"] = geo.get("format", None)
            if not geometry["path"]:
                raise ConfigError("geometry kind = file requires a path")
        elif kind in _GEOMETRY_KEYS:
            for key in _GEOMETRY_KEYS[kind]:
                if key not in geo:
                    raise ConfigError(f"{kind} geometry needs {key}")
                geometry[key] = geo.getfloat(key)
            geometry["target_edge"] = geo.getfloat("target_edge")
            if kind == "wedge" and "grading" in geo:
                geometry["grading"] = geo.getfloat("grading")
        else:
            raise ConfigError(f"unknown geometry kind {kind!r}")

        exc_sec = cp["excitation"] if cp.has_section("excitation") else {}
        k_dir = np.array(_floats(exc_sec.get("direction", "0 0 -1")))
        pol = np.array(_floats(exc_sec.get("polarization", "1 0 0")))
        amplitude = float(exc_sec.get("amplitude", "1.0"))
        if amplitude <= 0.0:
            raise ConfigError("amplitude must be positive")

        freq = cp.getfloat("frequency", "hz", fallback=None)
        if freq is None or freq <= 0.0:
            raise ConfigError("frequency section must set hz > 0")

        form = cp["formulations"] if cp.has_section("formulations") else {}
        kinds = form.get("kinds", "EFIE").split()
        for k in kinds:
            if k not in _VALID_KINDS:
                raise ConfigError(
                    f"unknown formulation {k!r}; valid kinds: {', '.join(_VALID_KINDS)}"
                )

        sol = cp["solver"] if cp.has_section("solver") else {}
        ref = cp["reference"] if cp.has_section("reference") else {}
        ref_kind = ref.get("kind", "none").strip()
        if ref_kind not in ("mie", "file", "none"):
            raise ConfigError(f"unknown reference kind {ref_kind!r}")
        if ref_kind == "file" and not ref.get("path", ""):
            raise ConfigError("reference kind = file requires a path")

        out = cp["output"] if cp.has_section("output") else {}
        phi_cuts = tuple(_floats(out.get("phi_cuts", "0 90")))
        n_theta = int(out.get("n_theta", "181"))
        if n_theta < 2:
            raise ConfigError("n_theta must be at least 2")

        return Scenario(
            geometry_kind=kind,
            geometry=geometry,
            frequency=freq,
            k_dir=k_dir,
            polarization=pol,
            amplitude=amplitude,
            kinds=kinds,
            gamma=float(form.get("gamma", "0.5")),
            alpha_cfie=float(form.get("alpha_cfie", "0.5")),
            beta_cs=float(form.get("beta_cs", "10.0")),
            inner_tol=float(form.get("inner_tol", "1e-10")),
            gram_mode=form.get("gram_mode", "cg").strip(),
            solver_tol=float(sol.get("tol", "1e-4")),
            solver_maxit=int(sol.get("maxit", "2000")),
            solver_method=sol.get("method", "gmres").strip(),
            reference_kind=ref_kind,
            reference_radius=ref.get("radius", "area"),
            reference_path=ref.get("path", ""),
            phi_cuts=phi_cuts,
            n_theta=n_theta,
            base_dir=path.parent,
        )
    except ConfigError:
        raise
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc


def build_mesh(scenario):
    from momscat import mesh as mesh_mod

    g = scenario.geometry
    kind = scenario.geometry_kind
    if kind == "file":
        p = Path(g["path"])
        if not p.is_absolute():
            p = scenario.base_dir / p
        return mesh_mod.load_mesh(p, fmt=g.get("format") or None)
    if kind == "sphere":
        return mesh_mod.generate_sphere(g["diameter"], g["target_edge"])
    return mesh_mod.generate_canonical(kind, g, g["target_edge"])


def plane_wave(scenario, frequency=None):
    from momscat.operators import PlaneWave

    return PlaneWave(
        k_hat=scenario.k_dir,
        e0=scenario.amplitude * scenario.polarization / np.linalg.norm(scenario.polarization),
        frequency=scenario.frequency if frequency is None else frequency,
    )


def formulation_config(scenario, kind):
    from momscat.formulations import FormulationConfig

    return FormulationConfig(
        kind=kind,
        gamma=scenario.gamma,
        alpha_cfie=scenario.alpha_cfie,
        beta_cs=scenario.beta_cs,
        inner_tol=scenario.inner_tol,
        gram_mode=scenario.gram_mode,
    )
