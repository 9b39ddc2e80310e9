"""Command-line client for the solver service.

Commands dispatch to the service handlers in-process by default; pass
--server URL to talk to a running instance over HTTP instead.  Exit codes:
0 success, 2 validation failure, 3 no valid constants, 4 contraction
failure, 5 missing parameter bindings under --strict-params, 6 solution /
problem hash mismatch, 1 anything else.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import SolverError
from .service import handlers
from .service.schemas import (
    AnalyzeRequest,
    AsymptoticsRequest,
    ProblemModel,
    SolveRequest,
    VerifyRequest,
)

EXIT_CODES = {
    "validation-failed": 2,
    "no-valid-constants": 3,
    "contraction-failure": 4,
    "missing-parameters": 5,
    "hash-mismatch": 6,
}


class CliFailure(click.ClickException):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.exit_code = EXIT_CODES.get(code, 1)
        self.code = code

    def format_message(self):
        return f"[{self.code}] {super().format_message()}"


def _load_problem(path: str) -> ProblemModel:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliFailure("problem-format", f"cannot read problem file: {exc}")
    try:
        return ProblemModel.model_validate(doc)
    except Exception as exc:
        raise CliFailure("problem-format", f"bad problem document: {exc}")


def _dispatch(server: str | None, endpoint: str, request, handler, response_cls):
    if server is None:
        try:
            return handler(request)
        except SolverError as exc:
            raise CliFailure(handlers.error_code(exc), str(exc))
    import httpx

    response = httpx.post(
        f"{server.rstrip('/')}{endpoint}",
        json=request.model_dump(mode="json"),
        timeout=300.0,
    )
    if response.status_code != 200:
        try:
            body = response.json()
            raise CliFailure(body.get("code", "solver-error"), body.get("message", response.text))
        except (ValueError, KeyError):
            raise CliFailure("solver-error", f"HTTP {response.status_code}: {response.text}")
    return response_cls.model_validate(response.json())


def _emit_json(payload) -> None:
    click.echo(json.dumps(payload, sort_keys=True, indent=2))


@click.group()
def main():
    """Solve first-kind Volterra equations with piecewise polynomial kernels
    in the class of delta-plus-regular generalized solutions."""


_server_option = click.option("--server", default=None, help="Service URL (default: in-process)")
_json_option = click.option("--json", "as_json", is_flag=True, help="Emit the full JSON report")


@main.command()
@click.argument("problem_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--grid-points", default=2048, show_default=True)
@click.option("--target-q", default=0.5, show_default=True)
@click.option("--scan-bound", default=6, show_default=True, help="Characteristic scan bound N")
@_json_option
@_server_option
def analyze(problem_file, grid_points, target_q, scan_bound, as_json, server):
    """Validate a problem and report certificates and classification."""
    request = AnalyzeRequest(
        problem=_load_problem(problem_file),
        grid_points=grid_points,
        target_q=target_q,
        scan_bound=scan_bound,
    )
    from .service.schemas import AnalyzeResponse

    resp = _dispatch(server, "/analyze", request, handlers.analyze, AnalyzeResponse)
    if as_json:
        _emit_json(resp.model_dump(mode="json"))
    else:
        for check in resp.validation["checks"]:
            mark = "ok " if check["passed"] else "FAIL"
            click.echo(f"  [{mark}] {check['name']}" + (f" ({check.get('detail')})" if check.get("detail") else ""))
        if resp.status == "validation-failed":
            click.echo("validation failed")
        else:
            click.echo(f"|A(0)| = {resp.weight_at_zero:.6g}")
            if resp.constants:
                c = resp.constants
                click.echo(
                    f"constants: q={_fmt(c['q'])} c={_fmt(c['c'])} h1={_fmt(c['h1'])} "
                    f"h={_fmt(c['h'])} eps={_fmt(c['eps'])}"
                )
                click.echo(
                    f"attenuation: eps_bound={_fmt(c['eps_bound'])} Nstar={c['Nstar']} "
                    f"horizon={_fmt(c['attenuation_horizon'])} q={_fmt(c['q_atten'])}"
                )
            if resp.characteristic:
                roots = resp.characteristic["roots"]
                click.echo(
                    f"characteristic roots: {roots or 'none'} "
                    f"(free constants: {resp.characteristic['free_constants']})"
                )
                for warning in resp.characteristic["warnings"]:
                    click.echo(f"  warning: {warning}")
            click.echo(f"recommended path: {', '.join(resp.paths) or 'none'}")
    if resp.status != "ok":
        sys.exit(EXIT_CODES.get(resp.status, 1))


def _fmt(value) -> str:
    return "-" if value is None else f"{value:.6g}"


@main.command()
@click.argument("problem_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--order", default=2, show_default=True, help="Expansion order N")
@_json_option
@_server_option
def asympt(problem_file, order, as_json, server):
    """Print the log-power expansion of the regular part near t = 0."""
    request = AsymptoticsRequest(problem=_load_problem(problem_file), order=order)
    from .service.schemas import AsymptoticsResponse

    resp = _dispatch(server, "/asymptotics", request, handlers.asymptotics, AsymptoticsResponse)
    if as_json:
        _emit_json(resp.model_dump(mode="json"))
    else:
        click.echo(f"x(t) ~ {resp.expansion} + o(t^{resp.order})")
        if resp.free_parameters:
            click.echo(f"free parameters: {', '.join(resp.free_parameters)}")


def _parse_params(pairs) -> dict[str, float]:
    out = {}
    for pair in pairs:
        name, _, value = pair.partition("=")
        if not _ or not name:
            raise CliFailure("bad-parameters", f"--param expects name=value, got {pair!r}")
        try:
            out[name] = float(value)
        except ValueError:
            raise CliFailure("bad-parameters", f"--param {name}: {value!r} is not a number")
    return out


@main.command()
@click.argument("problem_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--tol", default=1e-10, show_default=True)
@click.option("--nodes", default=17, show_default=True, help="Nodes per subinterval")
@click.option("--order", default=None, type=int, help="Expansion order (theorem-2 path)")
@click.option("--param", "params", multiple=True, help="Bind a free parameter: name=value")
@click.option("--path", default="auto", type=click.Choice(["auto", "theorem-1", "theorem-2"]), show_default=True)
@click.option("--strict-params", is_flag=True, help="Fail instead of defaulting unbound parameters to 0")
@click.option("--out", default=None, type=click.Path(dir_okay=False), help="Solution JSON path")
@click.option("--csv", "csv_path", default=None, type=click.Path(dir_okay=False), help="Samples CSV path")
@_json_option
@_server_option
def solve(problem_file, tol, nodes, order, params, path, strict_params, out, csv_path, as_json, server):
    """Solve a problem and write the solution document plus samples."""
    request = SolveRequest(
        problem=_load_problem(problem_file),
        tol=tol,
        nodes=nodes,
        order=order,
        params=_parse_params(params),
        strict_params=strict_params,
        path=path,
    )
    from .service.schemas import SolveResponse

    resp = _dispatch(server, "/solve", request, handlers.solve, SolveResponse)
    out = Path(out) if out else Path(problem_file).with_suffix(".solution.json")
    out.write_text(json.dumps(resp.solution, sort_keys=True, indent=2) + "\n")
    csv_file = Path(csv_path) if csv_path else out.with_suffix(".csv")
    lines = ["t,x"] + [f"{t!r},{x!r}" for t, x in resp.samples]
    csv_file.write_text("\n".join(lines) + "\n")
    if as_json:
        _emit_json(resp.model_dump(mode="json"))
    else:
        click.echo(f"path: {resp.path}")
        click.echo(f"a = {resp.a_exact} (delta amplitude)")
        if resp.expansion:
            click.echo(f"x(t) ~ {resp.expansion}")
        if resp.parameters:
            click.echo(f"parameters: {resp.parameters}")
        for warning in resp.warnings:
            click.echo(f"warning: {warning}")
        click.echo(f"max residual on report grid: {resp.residual['max_abs']:.3e}")
        click.echo(f"solution written to {out}, samples to {csv_file}")


@main.command()
@click.argument("problem_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--solution", "solution_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--threshold", default=1e-6, show_default=True)
@click.option("--points", default=17, show_default=True, help="Residual grid size")
@click.option("--report", "report_csv", default=None, type=click.Path(dir_okay=False), help="Write residual CSV")
@_json_option
@_server_option
def verify(problem_file, solution_file, threshold, points, report_csv, as_json, server):
    """Recompute residuals of a stored solution; exit 0 iff below threshold."""
    try:
        solution_doc = json.loads(Path(solution_file).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliFailure("problem-format", f"cannot read solution file: {exc}")
    request = VerifyRequest(
        problem=_load_problem(problem_file),
        solution=solution_doc,
        threshold=threshold,
        points=points,
    )
    from .service.schemas import VerifyResponse

    resp = _dispatch(server, "/verify", request, handlers.verify, VerifyResponse)
    if report_csv:
        from .verifier import ResidualReport

        Path(report_csv).write_text(
            ResidualReport(
                grid=tuple(resp.report["grid"]),
                first_kind=tuple(resp.report["first_kind"]),
                second_kind=tuple(resp.report["second_kind"]),
                representation=tuple(resp.report["representation"]),
                max_abs=resp.max_residual,
                decay=resp.report["decay"],
            ).to_csv_text()
        )
    if as_json:
        _emit_json(resp.model_dump(mode="json"))
    else:
        verdict = "PASS" if resp.ok else "FAIL"
        click.echo(
            f"{verdict}: max residual {resp.max_residual:.3e} vs threshold {resp.threshold:.3e}"
        )
    sys.exit(0 if resp.ok else 1)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
