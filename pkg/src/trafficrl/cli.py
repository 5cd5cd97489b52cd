"""Command-line client: runs operations in-process or against a server."""

from __future__ import annotations

import json
import sys

import click
from pydantic import BaseModel

from trafficrl.errors import TrafficRLError
from trafficrl.service import schemas


def _dispatch(ctx: click.Context, endpoint: str, request: BaseModel, response_model: type[BaseModel]) -> None:
    server = ctx.obj.get("server")
    try:
        if server:
            import httpx

            r = httpx.post(f"{server.rstrip('/')}/{endpoint}", json=request.model_dump(), timeout=None)
            if r.status_code != 200:
                raise click.ClickException(f"server returned {r.status_code}: {r.text}")
            response = response_model.model_validate(r.json())
        else:
            from trafficrl.service import operations

            response = getattr(operations, endpoint)(request)
    except TrafficRLError as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}") from None
    click.echo(json.dumps(response.model_dump(), indent=2))


@click.group()
@click.option("--server", envvar="TRAFFICRL_SERVER", default=None, help="Service URL; runs locally when omitted.")
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """Signal-timing reinforcement learning on a point-queue simulator."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


@main.command()
@click.option("--regime", type=click.Choice(["single", "inrl", "shared_async"]), default=None)
@click.option("--coordination", type=click.Choice(["off", "on"]), default=None)
@click.option("--scenario", required=True, help="Built-in name or YAML file.")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None)
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.pass_context
def train(ctx, regime, coordination, scenario, config_path, seed, out):
    """Train agents and write checkpoints, metrics.csv and manifest.json."""
    req = schemas.TrainRequest(scenario=scenario, regime=regime, coordination=coordination,
                               config=config_path, seed=seed, out=out)
    _dispatch(ctx, "train", req, schemas.TrainResponse)


@main.command()
@click.option("--checkpoint", required=True, help="Checkpoint file or training output directory.")
@click.option("--scenario", required=True)
@click.option("--episodes", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=1, show_default=True, help="Seed of the first episode.")
@click.option("--window", type=float, default=90.0, show_default=True)
@click.option("--sample", is_flag=True, help="Sample actions instead of taking the argmax.")
@click.option("--out", default=None, type=click.Path(file_okay=False), help="Write per-episode metric CSVs here.")
@click.pass_context
def evaluate(ctx, checkpoint, scenario, episodes, seed, window, sample, out):
    """Run a trained policy on fresh seeds."""
    req = schemas.EvaluateRequest(checkpoint=checkpoint, scenario=scenario, episodes=episodes, seed=seed,
                                  window=window, greedy=not sample, out=out)
    _dispatch(ctx, "evaluate", req, schemas.EvaluateResponse)


@main.command()
@click.option("--fst", required=True, help="Green per approach in seconds, e.g. 60 or FST60.")
@click.option("--scenario", required=True)
@click.option("--seed", "seeds", type=int, multiple=True, default=(0,), show_default=True)
@click.option("--window", type=float, default=90.0, show_default=True)
@click.option("--out", default=None, type=click.Path(file_okay=False))
@click.pass_context
def baseline(ctx, fst, scenario, seeds, window, out):
    """Run a fixed signal timing controller."""
    req = schemas.BaselineRequest(fst=fst, scenario=scenario, seeds=list(seeds), window=window, out=out)
    _dispatch(ctx, "baseline", req, schemas.BaselineResponse)


@main.command()
@click.option("--spec", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.pass_context
def experiment(ctx, spec, out):
    """Run a paired multi-controller comparison."""
    _dispatch(ctx, "experiment", schemas.ExperimentRequest(spec=spec, out=out), schemas.ExperimentResponse)


@main.command()
@click.option("--dir", "directory", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--reference", default="FST60", show_default=True)
@click.option("--out", default=None, type=click.Path(dir_okay=False), help="Also write the table as CSV.")
@click.pass_context
def summarize(ctx, directory, reference, out):
    """Tabulate mean/sd and percent change against a reference controller."""
    req = schemas.SummarizeRequest(dir=directory, reference=reference, out=out)
    _dispatch(ctx, "summarize", req, schemas.SummarizeResponse)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Start the HTTP service."""
    import uvicorn

    uvicorn.run("trafficrl.service.app:app", host=host, port=port)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
