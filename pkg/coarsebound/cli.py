import hashlib
import json
import sys
from collections import Counter
from collections.abc import Callable
from dataclasses import asdict, dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any

import click
import typer
from pydantic import BaseModel, Field
from rich.console import Console

from . import metrics
from .certify import (
    CutWitness,
    DivergenceProblem,
    SupplyKind,
    build_supply,
    bww_check,
    solve,
    transfer_pipeline,
    vanishing_evidence,
    witness_audit,
)
from .chains import (
    Chain,
    ChainDump,
    boundary,
    format_chain,
    growth_constant,
    growth_diagnostics,
    parse_chain,
    parse_growth,
    propagation,
    pushforward,
)
from .config import configure_logging, get_settings
from .constructions import coset_chain, round_and_extract_tails, spread_tail_sum
from .errors import CoarseBoundError, ValidationFailure
from .profiles import ProfileMode, ball_around, coarea_validate, isodiametric_profile, iso_ratio, profile_cell
from .spaces import Space, axis_distortion, ball as build_ball, parse_space
from .spectral import VertexWeight, dirichlet_gap, gap_cell, induced_isoperimetric_constant
from .sweeps import run_sweep_sync

console = Console(stderr=True)


class OutputFormat(str, Enum):
    JSON = "json"
    TSV = "tsv"


class RunConfig(BaseModel):
    command: str
    params: dict[str, Any] = Field(default_factory=dict)
    seed: int = 0
    scale: int | None = None
    jobs: int = 1
    out: Path | None = None
    output_format: OutputFormat = OutputFormat.JSON
    metrics_out: Path | None = None
    log_level: str | None = None


@dataclass
class Output:
    payload: dict
    header: tuple[str, ...] | None = None
    rows: list[tuple] | None = None


def q(v: Fraction) -> str:
    v = Fraction(v)
    return f"{v.numerator}/{v.denominator}"


def _default(obj):
    if isinstance(obj, Fraction):
        return q(obj)
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def render_json(payload: dict) -> str:
    body = json.dumps(payload, indent=2, sort_keys=True, default=_default)
    checksum = hashlib.sha256(body.encode()).hexdigest()[:16]
    return json.dumps({**payload, "checksum": checksum}, indent=2, sort_keys=True, default=_default) + "\n"


def render_tsv(output: Output) -> str:
    lines = ["\t".join(output.header)]
    for row in output.rows:
        lines.append("\t".join(q(v) if isinstance(v, Fraction) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _emit(output: Output, config: RunConfig) -> None:
    if config.output_format == OutputFormat.TSV and output.rows is not None:
        text = render_tsv(output)
    else:
        text = render_json(output.payload)
    if config.out:
        config.out.write_text(text)
    else:
        sys.stdout.write(text)


def _write_chain(path, c: Chain, space: Space, radius: int | None) -> None:
    if path:
        Path(path).write_text(format_chain(c, space, radius))


def _read_dump(path) -> ChainDump:
    return parse_chain(Path(path).read_text())


def _dump_ball(dump: ChainDump, radius: int | None):
    R = radius if radius is not None else dump.radius
    if R is not None:
        return build_ball(dump.space, R)
    support = dump.chain.support()
    return ball_around(dump.space, support) if support else build_ball(dump.space, 1)


def _outcome_payload(outcome, space: Space) -> dict:
    if isinstance(outcome, CutWitness):
        audit = witness_audit(outcome)
        return {
            "feasible": False,
            "K": outcome.K,
            "sign": outcome.sign,
            "size": len(outcome.points),
            "supply_sum": outcome.supply_sum,
            "edge_capacity_sum": outcome.edge_capacity_sum,
            "vertex_form_sum": outcome.vertex_form_sum,
            "violation": outcome.violation,
            "scale": outcome.scale,
            "points": [space.format_point(p) for p in outcome.points],
            "audit": {
                "strict": audit.strict,
                "vertex_ratio": audit.vertex_ratio,
                "conversion_factor": audit.conversion_factor,
            },
        }
    return {
        "feasible": True,
        "K": outcome.K_used,
        "slack": outcome.slack,
        "flow_value": outcome.flow_value,
        "scale": outcome.scale,
        "supply_rounded": outcome.supply_rounded,
        "edges": len(outcome.chain),
    }


# handlers


def _space_ball(config: RunConfig) -> Output:
    p = config.params
    space = parse_space(p["space"])
    b = build_ball(space, p["radius"])
    spheres = Counter(b.lengths)
    rows, total = [], 0
    for r in range(b.radius + 1):
        total += spheres[r]
        rows.append((r, spheres[r], total))
    payload = {
        "space": space.spec,
        "radius": b.radius,
        "size": len(b),
        "interior": len(b.interior_indices()),
        "max_degree": b.max_degree(),
        "spheres": [{"r": r, "size": s} for r, s, _ in rows],
    }
    if p.get("points"):
        payload["points"] = [space.format_point(x) for x in b.points]
    return Output(payload, ("r", "sphere", "ball"), rows)


def _space_distortion(config: RunConfig) -> Output:
    p = config.params
    space = parse_space(p["space"])
    table = axis_distortion(space, p["generator"], p["radius"])
    payload = {
        "space": space.spec,
        "generator": p["generator"],
        "radius": p["radius"],
        "powers": [{"n": n, "length": length} for n, length in table],
    }
    return Output(payload, ("n", "length"), table)


def _tails_spread(config: RunConfig) -> Output:
    p = config.params
    space = parse_space(p["space"])
    report = spread_tail_sum(space, build_ball(space, p["radius"]))
    _write_chain(p.get("chain_out"), report.chain, space, p["radius"])
    if p.get("check") and not report.ok:
        raise ValidationFailure(
            f"spread tail check failed: {report.boundary_defects} core defects, "
            f"{report.bound_violations} coefficients over the linear bound",
            contract="spread tail boundary is 1 on the core with linear coefficients",
        )
    payload = {
        "space": space.spec,
        "radius": report.radius,
        "core_radius": report.core_radius,
        "edges": len(report.chain),
        "boundary_defects": report.boundary_defects,
        "frontier_defects": report.frontier_defects,
        "bound_violations": report.bound_violations,
        "max_linear_ratio": report.max_linear_ratio,
        "propagation": report.propagation,
        "ok": report.ok,
    }
    return Output(payload)


def _tails_coset(config: RunConfig) -> Output:
    p = config.params
    space = parse_space(p["space"])
    b = build_ball(space, p["radius"])
    cc = coset_chain(space, p["radius"], b)
    d = boundary(cc.chain, b) if cc.chain else Chain(0)
    defects = sum(1 for x in cc.core if d.value(x) != 1)
    _write_chain(p.get("chain_out"), cc.chain, space, p["radius"])
    if p.get("check") and defects:
        raise ValidationFailure(f"{defects} core points with boundary != 1", contract="coset chain boundary on the core")
    payload = {
        "space": space.spec,
        "radius": p["radius"],
        "cosets": len(cc.windows),
        "core_size": len(cc.core),
        "core_defects": defects,
        "edges": len(cc.chain),
        "max_coefficient": max((abs(v) for _, v in cc.chain.items()), default=Fraction(0)),
    }
    return Output(payload)


def _tails_round(config: RunConfig) -> Output:
    p = config.params
    dump = _read_dump(p["chain"])
    b = _dump_ball(dump, p.get("radius"))
    td = round_and_extract_tails(dump.chain, Fraction(p["lower"]), b)
    _write_chain(p.get("chain_out"), td.rounded, dump.space, b.radius)
    payload = {
        "space": dump.space.spec,
        "radius": b.radius,
        "kappa": td.kappa,
        "multiplicity": td.multiplicity,
        "tails": len(td.tails),
        "longest_tail": max((len(path) - 1 for path in td.tails.values()), default=0),
        "remainder_edges": len(td.remainder),
    }
    return Output(payload)


def _cert_vanish(config: RunConfig) -> Output:
    p = config.params
    space = parse_space(p["space"])
    f = parse_growth(p["f"])
    ev = vanishing_evidence(space, f, p["rmax"], p.get("rel_tol"), p.get("rmin", 1), config.jobs, config.scale)
    rows = [(R, K, float(K)) for R, K in ev.table]
    payload = {
        "space": ev.space,
        "f": ev.f,
        "verdict": ev.verdict,
        "slope": ev.slope,
        "table": [{"R": R, "K": K, "K_value": float(K)} for R, K in ev.table],
    }
    return Output(payload, ("R", "K_R", "K_R_value"), rows)


def _cert_solve(config: RunConfig) -> Output:
    p = config.params
    space = parse_space(p["space"])
    b = build_ball(space, p["radius"])
    f = parse_growth(p["f"]) if p.get("f") else None
    supply = build_supply(b, SupplyKind(p.get("supply", "one")), f)
    g = parse_growth(p.get("g") or "const")
    outcome = solve(DivergenceProblem(b, supply, Fraction(p["K"]), g, config.scale))
    if outcome.feasible:
        _write_chain(p.get("chain_out"), outcome.chain, space, p["radius"])
    return Output({"space": space.spec, "radius": p["radius"], "g": g.spec, **_outcome_payload(outcome, space)})


def _cert_bww(config: RunConfig) -> Output:
    p = config.params
    space = parse_space(p["space"])
    b = build_ball(space, p["radius"])
    if p.get("chain"):
        c = parse_chain(Path(p["chain"]).read_text(), space).chain
    else:
        c = Chain.zero_chain({x: Fraction(1) for x in b.points})
    outcome = bww_check(space, c, p["radius"], Fraction(p["K"]), b, config.scale)
    if outcome.feasible:
        _write_chain(p.get("chain_out"), outcome.chain, space, p["radius"])
    return Output({"space": space.spec, "radius": p["radius"], **_outcome_payload(outcome, space)})


def _cert_transfer(config: RunConfig) -> Output:
    p = config.params
    space = parse_space(p["space"])
    f = parse_growth(p["f"])
    report = transfer_pipeline(space, f, p["radius"], Fraction(p.get("target", "1/2")), p.get("rel_tol"))
    t = report.transfer
    _write_chain(p.get("chain_out"), report.tails.rounded, space, p["radius"])
    payload = {
        "space": space.spec,
        "f": f.spec,
        "radius": p["radius"],
        "K": report.K,
        "target": t.target,
        "min_boundary": t.min_boundary,
        "threshold_radius": t.threshold_radius,
        "inspected": len(t.inspected),
        "slow_growth_epsilon": t.slow_growth_epsilon,
        "growth_constant_psi": t.growth_constant_psi,
        "growth_constant_phi": t.growth_constant_phi,
        "kappa": report.tails.kappa,
        "tails": len(report.tails.tails),
    }
    return Output(payload)


def _profile_isodiametric(config: RunConfig) -> Output:
    p = config.params
    space = parse_space(p["space"])
    mode = ProfileMode.EXACT if p.get("exact") else ProfileMode.CANDIDATES
    if p.get("sweep"):
        cells = {r: (space.spec, r, mode.value) for r in range(p["r"] + 1)}
        results = run_sweep_sync(profile_cell, cells, config.jobs)
        rows = [(r, Fraction(v), family) for r, v, family in results.values()]
        payload = {
            "space": space.spec,
            "exact": mode == ProfileMode.EXACT,
            "profile": [{"r": r, "value": v, "family": fam} for r, v, fam in rows],
        }
        return Output(payload, ("r", "D", "family"), rows)
    point = isodiametric_profile(space, p["r"], mode)
    payload = {
        "space": space.spec,
        "r": point.r,
        "value": point.value,
        "value_float": float(point.value),
        "exact": point.exact,
        "family": point.family,
        "centered": point.centered,
        "homogeneous": point.homogeneous,
        "witness": [space.format_point(x) for x in point.witness_set],
    }
    return Output(payload, ("r", "D", "family"), [(point.r, point.value, point.family)])


def _profile_ratio(config: RunConfig) -> Output:
    p = config.params
    space = parse_space(p["space"])
    f = parse_growth(p["f"])
    if p.get("points"):
        A = {space.parse_point(t) for t in p["points"]}
    else:
        b = build_ball(space, p.get("ball") or 0)
        A = set(b.points)
    ratio = iso_ratio(space, A, f)
    return Output({"space": space.spec, "f": f.spec, "size": len(A), "ratio": ratio, "ratio_float": float(ratio)})


def _profile_coarea(config: RunConfig) -> Output:
    p = config.params
    space = parse_space(p["space"])
    f = parse_growth(p["f"])
    report = coarea_validate(space, f, p["trials"], config.seed, p.get("radius", 5))
    if report.violations:
        raise ValidationFailure(
            f"{report.violations} of {report.trials} trials broke the level-set decomposition; "
            f"first: {report.failures[0]}",
            contract="co-area decomposition of the functional inequality",
        )
    payload = {
        "space": space.spec,
        "f": f.spec,
        "seed": config.seed,
        "trials": report.trials,
        "violations": report.violations,
        "functional_constant": report.functional_constant,
        "set_constant": report.set_constant,
    }
    return Output(payload)


def _spec_gap(config: RunConfig) -> Output:
    p = config.params
    space = parse_space(p["space"])
    f = parse_growth(p.get("f") or "const")
    vw = VertexWeight(p.get("vertex_weight", "const"))
    if p.get("rmin") is not None:
        cells = {R: (space.spec, R, f.spec, vw.value) for R in range(p["rmin"], p["radius"] + 1)}
        results = run_sweep_sync(gap_cell, cells, config.jobs)
        rows = list(results.values())
        payload = {
            "space": space.spec,
            "edge_weight": f.spec,
            "vertex_weight": vw.value,
            "gaps": [{"R": R, "lambda_min": lam, "iterations": it, "residual": res} for R, lam, it, res in rows],
        }
        return Output(payload, ("R", "lambda_min", "iterations", "residual"), rows)
    gap = dirichlet_gap(space, p["radius"], f, vw)
    payload = {**asdict(gap), "induced_constant": induced_isoperimetric_constant(gap)}
    return Output(payload, ("R", "lambda_min", "iterations", "residual"), [(gap.R, gap.lambda_min, gap.iterations, gap.residual)])


def _chain_boundary(config: RunConfig) -> Output:
    p = config.params
    dump = _read_dump(p["chain"])
    b = _dump_ball(dump, p.get("radius"))
    d = boundary(dump.chain, b)
    _write_chain(p.get("chain_out"), d, dump.space, b.radius)
    return Output({
        "space": dump.space.spec,
        "dimension": d.dimension,
        "terms": len(d),
        "dump": format_chain(d, dump.space, b.radius),
    })


def _chain_growth(config: RunConfig) -> Output:
    p = config.params
    dump = _read_dump(p["chain"])
    b = _dump_ball(dump, p.get("radius"))
    f = parse_growth(p.get("f") or "const")
    return Output({
        "space": dump.space.spec,
        "f": f.spec,
        "growth_constant": growth_constant(dump.chain, f, b),
        "propagation": propagation(dump.chain, b) if dump.chain and dump.chain.dimension else 0,
    })


def _chain_push(config: RunConfig) -> Output:
    p = config.params
    dump = _read_dump(p["chain"])
    target = parse_space(p["target"])
    point_map = {}
    for line in Path(p["map"]).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        src, dst = line.split()
        point_map[dump.space.parse_point(src)] = target.parse_point(dst)
    b = build_ball(target, p["radius"])
    result = pushforward(dump.chain, point_map, b)
    _write_chain(p.get("chain_out"), result.chain, target, b.radius)
    return Output({
        "space": target.spec,
        "terms": len(result.chain),
        "degenerate_dropped": result.degenerate_dropped,
        "dump": format_chain(result.chain, target, b.radius),
    })


def _chain_fcheck(config: RunConfig) -> Output:
    p = config.params
    diag = growth_diagnostics(parse_growth(p["f"]), p["tmax"], p.get("t0"))
    payload = {
        "f": diag.spec,
        "t_max": diag.t_max,
        "shift_constants": {str(k): v for k, v in diag.shift_constants.items()},
        "dilation_constants": {str(k): v for k, v in diag.dilation_constants.items()},
        "slow_growth_epsilon": diag.slow_growth_epsilon,
    }
    return Output(payload)


COMMANDS: dict[str, Callable[[RunConfig], Output]] = {
    "space ball": _space_ball,
    "space distortion": _space_distortion,
    "tails spread": _tails_spread,
    "tails coset": _tails_coset,
    "tails round": _tails_round,
    "cert vanish": _cert_vanish,
    "cert solve": _cert_solve,
    "cert bww": _cert_bww,
    "cert transfer": _cert_transfer,
    "profile isodiametric": _profile_isodiametric,
    "profile ratio": _profile_ratio,
    "profile coarea": _profile_coarea,
    "spec gap": _spec_gap,
    "chain boundary": _chain_boundary,
    "chain growth": _chain_growth,
    "chain push": _chain_push,
    "chain fcheck": _chain_fcheck,
}


def run(config: RunConfig) -> int:
    """Dispatch one command; 0 on success, 2 on validation failure, 1 on usage error."""
    configure_logging(config.log_level)
    handler = COMMANDS.get(config.command)
    if handler is None:
        console.print(f"[red]unknown command[/red] {config.command!r}")
        return 1
    try:
        _emit(handler(config), config)
        return 0
    except ValidationFailure as e:
        console.print(f"[red]validation failed[/red] [{e.contract}] {e}")
        return 2
    except (CoarseBoundError, ValueError, KeyError, OSError) as e:
        contract = getattr(e, "contract", "usage")
        console.print(f"[yellow]usage error[/yellow] [{contract}] {e}")
        return 1
    finally:
        if config.metrics_out:
            metrics.write_metrics(str(config.metrics_out))


app = typer.Typer(help="Certificates for vanishing of the fundamental class in controlled coarse homology.")
space_app = typer.Typer(help="Balls and word lengths.")
tails_app = typer.Typer(help="Spread tails, coset chains and tail extraction.")
cert_app = typer.Typer(help="Flow certificates and cut witnesses.")
profile_app = typer.Typer(help="Isodiametric profiles and isoperimetric ratios.")
spec_app = typer.Typer(help="Dirichlet spectral gaps.")
chain_app = typer.Typer(help="Chain dumps: boundary, growth, pushforward.")
app.add_typer(space_app, name="space")
app.add_typer(tails_app, name="tails")
app.add_typer(cert_app, name="cert")
app.add_typer(profile_app, name="profile")
app.add_typer(spec_app, name="spec")
app.add_typer(chain_app, name="chain")


@app.callback()
def global_options(
    ctx: typer.Context,
    seed: int | None = typer.Option(None, help="Seed for randomized validations."),
    scale: int | None = typer.Option(None, help="Flow fixed-point scale S."),
    jobs: int | None = typer.Option(None, help="Parallel sweep cells."),
    out: Path | None = typer.Option(None, help="Write the artifact here instead of stdout."),
    output_format: OutputFormat = typer.Option(OutputFormat.JSON, "--format", help="json or tsv."),
    metrics_out: Path | None = typer.Option(None, "--metrics-out", help="Prometheus textfile output."),
    log_level: str | None = typer.Option(None, "--log-level"),
):
    settings = get_settings()
    ctx.obj = {
        "seed": settings.seed if seed is None else seed,
        "scale": scale,
        "jobs": settings.jobs if jobs is None else jobs,
        "out": out,
        "output_format": output_format,
        "metrics_out": metrics_out,
        "log_level": log_level,
    }


def _dispatch(ctx: typer.Context, command: str, **params) -> None:
    code = run(RunConfig(command=command, params=params, **(ctx.obj or {})))
    if code:
        raise typer.Exit(code)


SPACE = typer.Option(..., "--space", help="Space spec, e.g. zd:2, free:2, heis, lamp:1, bs:1:2, lumberjack.")


@space_app.command("ball")
def space_ball(ctx: typer.Context, space: str = SPACE, radius: int = typer.Option(..., "--radius"),
               points: bool = typer.Option(False, "--points")):
    _dispatch(ctx, "space ball", space=space, radius=radius, points=points)


@space_app.command("distortion")
def space_distortion(ctx: typer.Context, space: str = SPACE, generator: str = typer.Option(..., "--generator"),
                     radius: int = typer.Option(..., "--radius")):
    _dispatch(ctx, "space distortion", space=space, generator=generator, radius=radius)


@tails_app.command("spread")
def tails_spread(ctx: typer.Context, space: str = SPACE, radius: int = typer.Option(..., "--radius"),
                 check: bool = typer.Option(False, "--check"), chain_out: Path | None = typer.Option(None, "--chain-out")):
    _dispatch(ctx, "tails spread", space=space, radius=radius, check=check, chain_out=chain_out)


@tails_app.command("coset")
def tails_coset(ctx: typer.Context, space: str = SPACE, radius: int = typer.Option(..., "--radius"),
                check: bool = typer.Option(False, "--check"), chain_out: Path | None = typer.Option(None, "--chain-out")):
    _dispatch(ctx, "tails coset", space=space, radius=radius, check=check, chain_out=chain_out)


@tails_app.command("round")
def tails_round(ctx: typer.Context, chain: Path = typer.Option(..., "--chain"), lower: str = typer.Option(..., "--lower"),
                radius: int | None = typer.Option(None, "--radius"), chain_out: Path | None = typer.Option(None, "--chain-out")):
    _dispatch(ctx, "tails round", chain=chain, lower=lower, radius=radius, chain_out=chain_out)


@cert_app.command("vanish")
def cert_vanish(ctx: typer.Context, space: str = SPACE, f: str = typer.Option("const", "--f"),
                rmax: int = typer.Option(..., "--rmax"), rmin: int = typer.Option(1, "--rmin"),
                rel_tol: float | None = typer.Option(None, "--tol", "--rel-tol")):
    _dispatch(ctx, "cert vanish", space=space, f=f, rmax=rmax, rmin=rmin, rel_tol=rel_tol)


@cert_app.command("solve")
def cert_solve(ctx: typer.Context, space: str = SPACE, radius: int = typer.Option(..., "--radius"),
               K: str = typer.Option(..., "--k", "--K"), supply: SupplyKind = typer.Option(SupplyKind.ONE, "--supply"),
               g: str = typer.Option("const", "--g"), f: str | None = typer.Option(None, "--f"),
               chain_out: Path | None = typer.Option(None, "--chain-out")):
    _dispatch(ctx, "cert solve", space=space, radius=radius, K=K, supply=supply.value, g=g, f=f, chain_out=chain_out)


@cert_app.command("bww")
def cert_bww(ctx: typer.Context, space: str = SPACE, radius: int = typer.Option(..., "--radius"),
             K: str = typer.Option(..., "--k", "--K"), chain: Path | None = typer.Option(None, "--chain"),
             chain_out: Path | None = typer.Option(None, "--chain-out")):
    _dispatch(ctx, "cert bww", space=space, radius=radius, K=K, chain=chain, chain_out=chain_out)


@cert_app.command("transfer")
def cert_transfer(ctx: typer.Context, space: str = SPACE, f: str = typer.Option("linear", "--f"),
                  radius: int = typer.Option(..., "--radius"), target: str = typer.Option("1/2", "--target"),
                  rel_tol: float | None = typer.Option(None, "--tol", "--rel-tol"), chain_out: Path | None = typer.Option(None, "--chain-out")):
    _dispatch(ctx, "cert transfer", space=space, f=f, radius=radius, target=target, rel_tol=rel_tol, chain_out=chain_out)


@profile_app.command("isodiametric")
def profile_isodiametric(ctx: typer.Context, space: str = SPACE, r: int = typer.Option(..., "--r"),
                         exact: bool = typer.Option(False, "--exact"), sweep: bool = typer.Option(False, "--sweep")):
    _dispatch(ctx, "profile isodiametric", space=space, r=r, exact=exact, sweep=sweep)


@profile_app.command("ratio")
def profile_ratio(ctx: typer.Context, space: str = SPACE, f: str = typer.Option("const", "--f"),
                  point: list[str] | None = typer.Option(None, "--point"), ball: int | None = typer.Option(None, "--ball")):
    _dispatch(ctx, "profile ratio", space=space, f=f, points=point or [], ball=ball)


@profile_app.command("coarea")
def profile_coarea(ctx: typer.Context, space: str = SPACE, f: str = typer.Option("const", "--f"),
                   trials: int = typer.Option(100, "--trials"), radius: int = typer.Option(5, "--radius")):
    _dispatch(ctx, "profile coarea", space=space, f=f, trials=trials, radius=radius)


@spec_app.command("gap")
def spec_gap(ctx: typer.Context, space: str = SPACE, radius: int = typer.Option(..., "--radius"),
             f: str = typer.Option("const", "--f"), vertex_weight: VertexWeight = typer.Option(VertexWeight.CONST, "--vertex-weight"),
             rmin: int | None = typer.Option(None, "--rmin")):
    _dispatch(ctx, "spec gap", space=space, radius=radius, f=f, vertex_weight=vertex_weight.value, rmin=rmin)


@chain_app.command("boundary")
def chain_boundary(ctx: typer.Context, chain: Path = typer.Option(..., "--chain"),
                   radius: int | None = typer.Option(None, "--radius"), chain_out: Path | None = typer.Option(None, "--chain-out")):
    _dispatch(ctx, "chain boundary", chain=chain, radius=radius, chain_out=chain_out)


@chain_app.command("growth")
def chain_growth(ctx: typer.Context, chain: Path = typer.Option(..., "--chain"), f: str = typer.Option("const", "--f"),
                 radius: int | None = typer.Option(None, "--radius")):
    _dispatch(ctx, "chain growth", chain=chain, f=f, radius=radius)


@chain_app.command("push")
def chain_push(ctx: typer.Context, chain: Path = typer.Option(..., "--chain"), map_file: Path = typer.Option(..., "--map"),
               target: str = typer.Option(..., "--target"), radius: int = typer.Option(..., "--radius"),
               chain_out: Path | None = typer.Option(None, "--chain-out")):
    _dispatch(ctx, "chain push", chain=chain, map=map_file, target=target, radius=radius, chain_out=chain_out)


@chain_app.command("fcheck")
def chain_fcheck(ctx: typer.Context, f: str = typer.Option(..., "--f"), tmax: int = typer.Option(32, "--tmax"),
                 t0: int | None = typer.Option(None, "--t0")):
    _dispatch(ctx, "chain fcheck", f=f, tmax=tmax, t0=t0)


def main() -> None:
    try:
        code = app(standalone_mode=False)
    except click.exceptions.UsageError as e:
        e.show()
        sys.exit(1)
    except click.exceptions.Abort:
        sys.exit(1)
    sys.exit(code or 0)
