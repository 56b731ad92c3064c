"""HTTP endpoints wrapping the solver pipelines."""
from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..controls import ControlExprError
from ..runner import run_ivp, run_solve, run_sweep
from .schemas import (
    IvpRequest,
    IvpResponse,
    SolveRequest,
    SolveResponse,
    SweepRequest,
    SweepResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(
        title="pscolloc",
        description=(
            "Trajectory optimization with first- and second-order "
            "Legendre-Gauss pseudospectral collocation"
        ),
        version=__version__,
    )

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/solve", response_model=SolveResponse)
    def solve_endpoint(req: SolveRequest):
        try:
            return run_solve(req)
        except (ValueError, TypeError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/sweep", response_model=SweepResponse)
    def sweep_endpoint(req: SweepRequest):
        try:
            return run_sweep(req)
        except (ValueError, TypeError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/ivp", response_model=IvpResponse)
    def ivp_endpoint(req: IvpRequest):
        try:
            return run_ivp(req)
        except ControlExprError as exc:
            raise HTTPException(
                status_code=422,
                detail={"error": str(exc), "position": exc.position},
            )
        except (ValueError, TypeError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    return app


app = create_app()
