"""INI run configurations: flat key-value sections, field data in HMF1 files.

Example::

    [problem]
    n = 3
    sizes = 32,1,32,1,1,1
    variant = psi
    rhs_volume = omega_n
    omega = fields/omega.hmf1     ; optional, flat when absent
    omega0 = fields/omega0.hmf1   ; optional, flat when absent
    F = fields/F.hmf1             ; optional, zero when absent

    [solver]
    newton_tol = 1e-11
    continuity_steps = 0,0.5,1

    [outputs]
    report = out/report.json
    records = out/records.jsonl
    u = out/u.hmf1

    [run]
    seed = 7
    threads = 0                   ; 0 = all cores; TORMA_THREADS overrides
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import equations as eq
from . import grid as gr
from . import hmf1
from .errors import ValidationError
from .solver import SolverConfig


@dataclass
class RunConfig:
    spec: eq.ProblemSpec
    solver: SolverConfig
    outputs: dict
    seed: int
    threads: int
    dealias_check: bool = False
    base_dir: Path = field(default_factory=Path)


def _parse_floats(text):
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def _parse_ints(text):
    return tuple(int(x) for x in text.replace(";", ",").split(",") if x.strip())


def _load_field(base, grid, path_text, what, extra_shape):
    path = base / path_text
    if not path.exists():
        raise ValidationError(f"[problem] {what}: field file {path} does not exist")
    fgrid, values = hmf1.read_field(path)
    if fgrid.sizes != grid.sizes or fgrid.n != grid.n:
        raise ValidationError(
            f"[problem] {what}: grid {fgrid.sizes} in {path} does not match "
            f"the configured grid {grid.sizes}"
        )
    want = grid.sizes + extra_shape
    if values.shape != want:
        raise ValidationError(f"[problem] {what}: payload shape {values.shape} != {want}")
    return values


def load_config(path):
    """Parse and validate a run configuration; all field files are read here."""
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ValidationError(f"config file {path} not found or unreadable")
    base = path.parent

    if "problem" not in parser:
        raise ValidationError("config is missing the [problem] section")
    prob = parser["problem"]
    try:
        n = prob.getint("n")
        sizes = _parse_ints(prob.get("sizes"))
        grid = gr.TorusGrid(n, sizes)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"[problem] bad n/sizes: {exc}") from exc

    variant_text = prob.get("variant", "psi").strip().lower()
    try:
        variant = eq.Variant(variant_text)
    except ValueError as exc:
        raise ValidationError(f"[problem] variant must be psi or phi, got {variant_text!r}") from exc
    volume_text = prob.get("rhs_volume", "omega_n").strip().lower()
    try:
        rhs_volume = eq.RhsVolume(volume_text)
    except ValueError as exc:
        raise ValidationError(
            f"[problem] rhs_volume must be omega_n or omega_h_n, got {volume_text!r}"
        ) from exc

    flat = np.broadcast_to(np.eye(n, dtype=complex), grid.sizes + (n, n)).copy()
    omega = flat
    omega0 = flat.copy()
    datum = np.zeros(grid.sizes)
    if prob.get("omega"):
        omega = _load_field(base, grid, prob.get("omega"), "omega", (n, n))
    if prob.get("omega0"):
        omega0 = _load_field(base, grid, prob.get("omega0"), "omega0", (n, n))
    if prob.get("F"):
        datum = _load_field(base, grid, prob.get("F"), "F", ()).real
    spec = eq.ProblemSpec(
        grid=grid, variant=variant, omega0=omega0, omega=omega, F=datum,
        rhs_volume=rhs_volume,
    )

    solver_kwargs = {}
    if "solver" in parser:
        sol = parser["solver"]
        for key in ("newton_tol", "min_t_step", "min_damping", "linear_tol",
                    "stagnation_factor"):
            if sol.get(key) is not None:
                solver_kwargs[key] = sol.getfloat(key)
        for key in ("max_newton", "linear_restart", "linear_maxiter",
                    "stagnation_window"):
            if sol.get(key) is not None:
                solver_kwargs[key] = sol.getint(key)
        if sol.get("continuity_steps") is not None:
            solver_kwargs["continuity_steps"] = _parse_floats(sol.get("continuity_steps"))
    solver = SolverConfig(**solver_kwargs)

    outputs = dict(parser["outputs"]) if "outputs" in parser else {}
    run = parser["run"] if "run" in parser else {}
    seed = int(run.get("seed", 0))
    threads = int(os.environ.get("TORMA_THREADS", run.get("threads", 0)))
    dealias = str(run.get("dealias", "false")).strip().lower() in ("1", "true", "yes")
    return RunConfig(
        spec=spec, solver=solver, outputs=outputs, seed=seed, threads=threads,
        dealias_check=dealias, base_dir=base,
    )
