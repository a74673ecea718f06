"""HTTP service exposing environment generation, indexing, runs, and checks."""

from __future__ import annotations

from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from . import arms, envgen, harness, mdp, verify, whittle

SCHEMA_VERSION = harness.SCHEMA_VERSION

app = FastAPI(title="rblab", version="0.1.0")


class GenEnvRequest(BaseModel):
    kind: str
    n: int = Field(ge=1)
    S: int = Field(ge=2)
    seed: int
    d: Optional[float] = None


class ModelResponse(BaseModel):
    model_config = ConfigDict(protected_namespaces=())
    schema_version: str = SCHEMA_VERSION
    model: dict


class WhittleRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())
    model: dict
    arm: Optional[int] = None


class WhittleResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    indices: dict  # arm id (as str) -> list of per-state indices


class RunRequest(BaseModel):
    config: dict
    outdir: str


class RunResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    outdir: str
    files: list
    violations: list
    summary: list  # rows of {n, algorithm, regret_T}


class VerifyRequest(BaseModel):
    suite: str
    seed: int = 0
    instances: Optional[int] = None
    count: Optional[int] = None


class VerifyResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    report: dict
    passed: bool


class FitRequest(BaseModel):
    points: list  # [n, regret] pairs


class FitResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    fits: dict


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "schema_version": SCHEMA_VERSION}


@app.post("/gen-env", response_model=ModelResponse)
def gen_env(req: GenEnvRequest) -> ModelResponse:
    try:
        rng = np.random.default_rng(np.random.SeedSequence(req.seed))
        inst = envgen.make_environment(req.kind, req.n, req.S, rng, d=req.d)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return ModelResponse(model=arms.instance_to_dict(inst))


@app.post("/whittle", response_model=WhittleResponse)
def whittle_endpoint(req: WhittleRequest) -> WhittleResponse:
    try:
        inst = arms.instance_from_dict(req.model)
    except (ValueError, KeyError, arms.ValidationError) as exc:
        raise HTTPException(status_code=422, detail=f"bad model document: {exc}")
    which = range(inst.num_arms) if req.arm is None else [req.arm]
    out = {}
    for i in which:
        if not 0 <= i < inst.num_arms:
            raise HTTPException(status_code=422, detail=f"arm {i} out of range")
        try:
            out[str(i)] = whittle.whittle_indices(inst.arms[i]).tolist()
        except (whittle.DegenerateArmError, mdp.MultichainError) as exc:
            raise HTTPException(
                status_code=422, detail=f"index computation failed on arm {i}: {exc}"
            )
    return WhittleResponse(indices=out)


@app.post("/run", response_model=RunResponse)
def run(req: RunRequest) -> RunResponse:
    doc = dict(req.config)
    doc["outdir"] = req.outdir
    try:
        config = harness.ExperimentConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=f"bad config: {exc}")
    result = harness.run_experiment(config)
    files = harness.emit_results(result, req.outdir)
    summary = [
        {"n": n, "algorithm": alg, "regret_T": result.curves[(n, alg)].final_regret}
        for (n, alg) in sorted(result.curves)
    ]
    return RunResponse(
        outdir=req.outdir, files=files, violations=result.violations, summary=summary
    )


@app.post("/verify", response_model=VerifyResponse)
def verify_endpoint(req: VerifyRequest) -> VerifyResponse:
    try:
        report = verify.run_suite(
            req.suite, seed=req.seed, instances=req.instances, count=req.count
        )
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return VerifyResponse(report=report, passed=report["passed"])


@app.post("/fit", response_model=FitResponse)
def fit(req: FitRequest) -> FitResponse:
    try:
        fits = harness.fit_scaling(req.points)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return FitResponse(fits=fits)
