"""FastAPI service exposing benchmark solves, sweeps, and IVP checks."""

__all__ = ["create_app"]


def __getattr__(name):
    # imported lazily: schemas must be loadable without pulling in the app,
    # which imports the runner and would close an import cycle
    if name == "create_app":
        from .app import create_app

        return create_app
    raise AttributeError(name)
