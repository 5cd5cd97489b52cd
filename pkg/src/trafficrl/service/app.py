"""HTTP front end: one POST endpoint per operation."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from trafficrl import __version__
from trafficrl.errors import TrafficRLError
from trafficrl.service import operations, schemas

app = FastAPI(title="trafficrl", version=__version__)


@app.exception_handler(TrafficRLError)
async def domain_error(request: Request, exc: TrafficRLError) -> JSONResponse:
    body = schemas.ErrorResponse(error=str(exc), kind=type(exc).__name__)
    return JSONResponse(status_code=422, content=body.model_dump())


@app.get("/health")
def health() -> dict[str, str]:
    return {"status": "ok", "version": __version__}


@app.post("/train", response_model=schemas.TrainResponse)
def train(req: schemas.TrainRequest) -> schemas.TrainResponse:
    return operations.train(req)


@app.post("/evaluate", response_model=schemas.EvaluateResponse)
def evaluate(req: schemas.EvaluateRequest) -> schemas.EvaluateResponse:
    return operations.evaluate(req)


@app.post("/baseline", response_model=schemas.BaselineResponse)
def baseline(req: schemas.BaselineRequest) -> schemas.BaselineResponse:
    return operations.baseline(req)


@app.post("/experiment", response_model=schemas.ExperimentResponse)
def experiment(req: schemas.ExperimentRequest) -> schemas.ExperimentResponse:
    return operations.experiment(req)


@app.post("/summarize", response_model=schemas.SummarizeResponse)
def summarize(req: schemas.SummarizeRequest) -> schemas.SummarizeResponse:
    return operations.summarize(req)
