"""Simulation preset files (JSON) and their conversion to model objects."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from fgarch.basis import BasisSet, make_basis, reconstruct_curve, reconstruct_kernel
from fgarch.function_space import Curve, Grid
from fgarch.model import FGarchSpec, InnovationGen

__all__ = ["SimConfig", "load_preset", "preset_from_dict", "PRESET_KEYS"]

PRESET_KEYS = {"grid_T", "basis", "delta", "alpha_coefs", "beta_coefs", "innovation", "n", "burnin"}


@dataclass(frozen=True)
class SimConfig:
    spec: FGarchSpec
    gen: InnovationGen
    basis: BasisSet
    n: int
    burnin: int
    raw: dict

    @property
    def grid(self) -> Grid:
        return self.spec.grid


def preset_from_dict(cfg: dict, grid_T: int | None = None, seed: int | None = None) -> SimConfig:
    """
    Build a :class:`SimConfig` from preset fields.

    ``delta`` is either a scalar (constant curve) or a list of basis
    coefficients; ``alpha_coefs`` and ``beta_coefs`` are ``M x M`` coefficient
    matrices in the basis named by ``basis.kind``.
    """
    unknown = set(cfg) - PRESET_KEYS
    if unknown:
        raise ValueError(f"unknown preset keys: {sorted(unknown)}")
    T = int(grid_T if grid_T is not None else cfg.get("grid_T", 285))
    grid = Grid(T)
    A = np.atleast_2d(np.asarray(cfg["alpha_coefs"], dtype=float))
    B = np.atleast_2d(np.asarray(cfg["beta_coefs"], dtype=float))
    basis_cfg = dict(cfg.get("basis", {"kind": "poly"}))
    M = int(basis_cfg.get("M", A.shape[0]))
    basis = make_basis(basis_cfg.get("kind", "poly"), M, grid)

    delta = cfg.get("delta", 0.0)
    if np.ndim(delta) == 0:
        delta_curve = Curve.constant(grid, float(delta))
    else:
        delta_curve = reconstruct_curve(delta, basis)
    # exact zeros of nonnegative analytic kernels can come out as -1e-18 after Gram-Schmidt
    alpha = reconstruct_kernel(A, basis)
    beta = reconstruct_kernel(B, basis)
    spec = FGarchSpec(delta_curve, alpha, beta)

    inn = dict(cfg.get("innovation", {}))
    bad = set(inn) - {"kind", "rate", "seed"}
    if bad:
        raise ValueError(f"unknown innovation keys: {sorted(bad)}")
    gen = InnovationGen(
        kind=inn.get("kind", "ou_bridge"),
        rate=float(inn.get("rate", 200.0)),
        seed=seed if seed is not None else inn.get("seed"),
    )
    return SimConfig(spec, gen, basis, int(cfg.get("n", 1200)), int(cfg.get("burnin", 1000)), dict(cfg))


def load_preset(name_or_path: str, grid_T: int | None = None, seed: int | None = None) -> SimConfig:
    """Load a shipped preset by name (``paper_sim``) or a preset JSON file by path."""
    path = Path(name_or_path)
    if path.suffix == ".json" and path.exists():
        text = path.read_text(encoding="utf-8")
    else:
        ref = resources.files(__name__).joinpath(f"{name_or_path}.json")
        if not ref.is_file():
            raise FileNotFoundError(f"no preset named {name_or_path!r}")
        text = ref.read_text(encoding="utf-8")
    return preset_from_dict(json.loads(text), grid_T=grid_T, seed=seed)
