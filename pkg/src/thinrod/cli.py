"""Command-line front end.

Commands (all driven by one JSON configuration document):

    thinrod section   --config cfg.json --out DIR
    thinrod solve     --config cfg.json --model nonlinear|linear|extensional|coupled
    thinrod decompose --config cfg.json --field field.csv
    thinrod gamma     --config cfg.json

Exit codes: 0 success, 2 validation failure, 3 numerical non-convergence.
Outputs are deterministic: identical configs give byte-identical files
(--threads is accepted for interface stability; computations are serial).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io
from .decompose import decompose, estimate_report
from .energy3d import gamma_check
from .errors import NumericsError, ValidationError
from .geometry import RodChart, build_frame, build_middle_line
from .limits import (Material, SolverOptions, linear_correctors, nonlinear_correctors,
                     solve_coupled, solve_extensional, solve_linear, solve_nonlinear)
from .loads import assemble_load_matrix, load_profile_from_config
from .section import build_section, section_constants
from .so3 import log_rotation


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc


class Problem:
    """Everything the commands share, built once from the config."""

    def __init__(self, cfg: dict, need_geometry: bool = True):
        if "section" not in cfg:
            raise ValidationError("config misses the 'section' block")
        self.section = build_section(cfg["section"])
        self.constants = None
        self.line = None
        self.frame = None
        self.material = None
        self.loads = None
        solver = cfg.get("solver", {})
        self.options = SolverOptions(
            n_intervals=int(solver.get("n_intervals", 128)),
            damping=float(solver.get("damping", 0.5)),
            tol=float(solver.get("tol", 1e-10)),
            max_iter=int(solver.get("max_iter", 500)),
        )
        self.deltas = list(solver.get("deltas", [0.2, 0.1, 0.05, 0.025]))
        if need_geometry:
            if "geometry" not in cfg:
                raise ValidationError("config misses the 'geometry' block")
            self.line = build_middle_line(cfg["geometry"])
            self.frame = build_frame(self.line, cfg["geometry"].get("frame", "analytic"))
            if "material" in cfg:
                self.material = Material.from_config(cfg["material"])
            if "loads" in cfg:
                self.loads = load_profile_from_config(cfg["loads"], self.line.length)

    def with_constants(self):
        if self.constants is None:
            self.constants = section_constants(self.section)
        return self.constants

    def require_material(self):
        if self.material is None:
            raise ValidationError("config misses the 'material' block")
        return self.material

    def require_loads(self):
        if self.loads is None:
            raise ValidationError("config misses the 'loads' block")
        return self.loads


def cmd_section(cfg, out: Path) -> int:
    prob = Problem(cfg, need_geometry=False)
    sc = prob.with_constants()
    payload = {
        "area": sc.area,
        "I1": sc.I1,
        "I2": sc.I2,
        "K": sc.K,
        "torsion_identity_residual": sc.torsion_residual,
        "n_nodes": int(len(prob.section.nodes)),
        "n_triangles": int(len(prob.section.tris)),
        "kind": prob.section.kind,
    }
    io.write_json(out / "constants.json", payload)
    rows = [(n[0], n[1], c) for n, c in zip(prob.section.nodes, sc.chi)]
    io.write_csv(out / "chi.csv", ["S1", "S2", "chi"], rows)
    print(f"section: area={sc.area:.6g} I1={sc.I1:.6g} I2={sc.I2:.6g} K={sc.K:.6g}")
    return 0


def _gate_payload(gate):
    if gate is None:
        return None
    return {"norm": gate.norm, "threshold": gate.threshold, "passed": gate.passed}


def cmd_solve(cfg, out: Path, model: str) -> int:
    prob = Problem(cfg)
    mat = prob.require_material()
    sc = prob.with_constants()
    summary = {"model": model,
               "frame": {"method": prob.frame.method,
                         "orientation": prob.frame.orientation}}
    if model == "nonlinear":
        sol = solve_nonlinear(prob.loads, prob.line, prob.frame, prob.section, sc,
                              mat, prob.options)
        rows = []
        for i, s3 in enumerate(sol.grid):
            axis, theta = log_rotation(sol.rotation.values[i])
            rows.append((s3, *(theta * axis), *sol.V[i], 0.0, 0.0, 0.0))
        io.write_csv(out / "solution_nonlinear.csv",
                     ["s3", "w1", "w2", "w3", "V1", "V2", "V3", "VS1", "VS2", "VS3"],
                     rows)
        summary.update(energy=sol.energy, residual=sol.residual,
                       iterations=sol.iterations, converged=sol.converged,
                       gate=_gate_payload(sol.gate))
        io.write_json(out / "summary_nonlinear.json", summary)
        if not sol.converged:
            print(f"nonlinear solve did not converge: residual {sol.residual:.3e}",
                  file=sys.stderr)
            return 3
        print(f"nonlinear: m2={sol.energy:.9g} iters={sol.iterations}")
        return 0
    if model == "linear":
        sol = solve_linear(prob.loads, prob.line, prob.frame, prob.section, sc, mat,
                           prob.options.n_intervals)
        rows = [(s3, *sol.U[i], *sol.rvec[i]) for i, s3 in enumerate(sol.grid)]
        io.write_csv(out / "solution_linear.csv",
                     ["s3", "U1", "U2", "U3", "R1", "R2", "R3"], rows)
        summary.update(energy=sol.energy, residual=sol.residual)
        io.write_json(out / "summary_linear.json", summary)
        print(f"linear: m_kappa={sol.energy:.9g}")
        return 0
    if model == "extensional":
        sol = solve_extensional(prob.require_loads(), prob.line, prob.section, mat,
                                prob.options.n_intervals)
        rows = [(s3, *sol.UE[i]) for i, s3 in enumerate(sol.grid)]
        io.write_csv(out / "solution_extensional.csv", ["s3", "UE1", "UE2", "UE3"], rows)
        summary.update(energy=sol.energy, warnings=list(sol.warnings))
        io.write_json(out / "summary_extensional.json", summary)
        print(f"extensional: m_kappa={sol.energy:.9g}")
        return 0
    if model == "coupled":
        sol = solve_coupled(prob.require_loads(), prob.line, prob.frame, prob.section,
                            sc, mat, prob.options.n_intervals)
        lin = sol.linear
        rows = [(s3, *lin.U[i], *lin.rvec[i], *sol.UE[i])
                for i, s3 in enumerate(lin.grid)]
        io.write_csv(out / "solution_coupled.csv",
                     ["s3", "U1", "U2", "U3", "R1", "R2", "R3", "UE1", "UE2", "UE3"],
                     rows)
        summary.update(energy=sol.energy, residual=lin.residual)
        io.write_json(out / "summary_coupled.json", summary)
        print(f"coupled: m3={sol.energy:.9g}")
        return 0
    raise ValidationError(f"unknown model '{model}'")


def cmd_decompose(cfg, out: Path, field_path: str, clamp_left: bool) -> int:
    prob = Problem(cfg)
    if "delta" not in cfg.get("geometry", {}):
        raise ValidationError("decompose needs geometry.delta (the section scale)")
    chart = RodChart(prob.line, prob.frame, prob.section, float(cfg["geometry"]["delta"]))
    field = io.read_field_csv(field_path, chart)
    dec = decompose(field, clamp_left=clamp_left)
    rows = []
    for i, s3 in enumerate(dec.field.axial_grid):
        axis, theta = log_rotation(dec.rotation.at(float(s3)))
        rows.append((s3, *(theta * axis), *dec.V[i], *dec.VB[i], *dec.VS[i]))
    io.write_csv(out / "decomposition_line.csv",
                 ["s3", "w1", "w2", "w3", "V1", "V2", "V3",
                  "VB1", "VB2", "VB3", "VS1", "VS2", "VS3"], rows)
    nodes = chart.section.nodes
    wrows = []
    for a, s3 in enumerate(dec.field.axial_grid):
        for p in range(len(nodes)):
            wrows.append((nodes[p, 0], nodes[p, 1], s3, *dec.warping[a, p]))
    io.write_csv(out / "decomposition_warping.csv",
                 ["S1", "S2", "s3", "w1", "w2", "w3"], wrows)
    n = dec.norms
    io.write_json(out / "decomposition_summary.json", {
        "delta": chart.delta,
        "dist_l2": n.dist_l2,
        "norms": {
            "warping_l2": n.warping_l2,
            "warping_grad_l2": n.warping_grad_l2,
            "rotation_rate_l2": n.rotation_rate_l2,
            "line_rate_gap_l2": n.line_rate_gap_l2,
            "gradient_gap_l2": n.gradient_gap_l2,
        },
        "ratios": estimate_report(dec),
    })
    print(f"decompose: dist={n.dist_l2:.6g} warping_l2={n.warping_l2:.6g}")
    return 0


def cmd_gamma(cfg, out: Path) -> int:
    prob = Problem(cfg)
    mat = prob.require_material()
    sc = prob.with_constants()
    loads = prob.loads
    kappa = loads.kappa if loads is not None else float(
        cfg.get("loads", {}).get("kappa", 2))
    lm = None
    if loads is not None:
        lm = assemble_load_matrix(loads, prob.line, prob.frame, prob.section)
    if kappa == 2:
        sol = solve_nonlinear(loads, prob.line, prob.frame, prob.section, sc, mat,
                              prob.options, load_matrix=lm)
        if not sol.converged:
            print("gamma: nonlinear solve did not converge", file=sys.stderr)
            return 3
        bundle = nonlinear_correctors(sol, prob.frame, prob.line, sc, mat)
        regime = "nonlinear"
    else:
        sol = solve_linear(loads, prob.line, prob.frame, prob.section, sc, mat,
                           prob.options.n_intervals, load_matrix=lm)
        bundle = linear_correctors(sol, prob.frame, prob.line, sc, mat)
        regime = "linear"
    rep = gamma_check(regime, sol, bundle, loads, lm, prob.line, prob.frame,
                      prob.section, sc, mat, prob.deltas, kappa)
    rows = [(d, q, g, tg) for d, q, g, tg in
            zip(rep.deltas, rep.quotients, rep.gaps, rep.tensor_gaps)]
    io.write_csv(out / "gamma.csv", ["delta", "quotient", "gap", "tensor_gap"], rows)
    io.write_json(out / "gamma_summary.json", {
        "kappa": rep.kappa,
        "limit_energy": rep.limit_energy,
        "slope": rep.slope,
        "tensor_slope": rep.tensor_slope,
        "monotone": rep.monotone,
        "dropped": rep.dropped,
        "frame": {"method": prob.frame.method,
                  "orientation": prob.frame.orientation},
    })
    print(f"gamma: limit={rep.limit_energy:.9g} slope={rep.slope:.3f} "
          f"tensor_slope={rep.tensor_slope:.3f}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thinrod",
                                description="1D limit models of thin elastic rods")
    p.add_argument("--threads", type=int, default=1,
                   help="reserved; all computations run serially for determinism")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("section", "solve", "decompose", "gamma"):
        q = sub.add_parser(name)
        q.add_argument("--config", required=True)
        q.add_argument("--out", default=".")
        q.add_argument("--threads", type=int, default=1)
        if name == "solve":
            q.add_argument("--model", required=True,
                           choices=["nonlinear", "linear", "extensional", "coupled"])
        if name == "decompose":
            q.add_argument("--field", required=True)
            q.add_argument("--clamp-left", action="store_true")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = _load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "section":
            return cmd_section(cfg, out)
        if args.command == "solve":
            return cmd_solve(cfg, out, args.model)
        if args.command == "decompose":
            return cmd_decompose(cfg, out, args.field, args.clamp_left)
        if args.command == "gamma":
            return cmd_gamma(cfg, out)
        raise ValidationError(f"unknown command {args.command}")
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
