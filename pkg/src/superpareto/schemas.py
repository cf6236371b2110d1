"""Validated experiment descriptors.

A descriptor names one experiment ``kind``, its ``parameters``, a mandatory
``seed`` and the Monte Carlo size.  Each kind has its own parameter model;
loss, copula, risk-measure and cost sub-objects are checked by building the
corresponding library object.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Any, Literal, Optional

from pydantic import AfterValidator, BaseModel, ConfigDict, Field, ValidationError, WithJsonSchema, model_validator

from .dependence import copula_from_dict
from .distributions import loss_from_dict
from .dominance import CountLaw, check_simplex
from .equilibrium import cost_from_dict
from .risk_measures import risk_measure_from_dict

__all__ = [
    "KINDS",
    "Descriptor",
    "PARAM_MODELS",
    "DescriptorError",
    "parse_descriptor",
    "validate_parameters",
    "example_descriptor",
    "json_schemas",
    "write_schemas",
    "ValidationError",
]

MAX_SEED = 2**64 - 1


class DescriptorError(ValueError):
    """Descriptor failed validation."""


def _builder(fn, what: str):
    def check(v: dict[str, Any]) -> dict[str, Any]:
        try:
            fn(v)
        except (KeyError, TypeError) as exc:
            raise ValueError(f"invalid {what}: missing or malformed field {exc}") from None
        return v

    return check


def _object(what: str) -> dict[str, Any]:
    return {"type": "object", "required": ["kind"], "properties": {"kind": {"type": "string"}},
            "description": f"{what} descriptor"}


LossDesc = Annotated[dict[str, Any], AfterValidator(_builder(loss_from_dict, "loss")), WithJsonSchema(_object("loss"))]
CopulaDesc = Annotated[dict[str, Any], AfterValidator(_builder(copula_from_dict, "copula")), WithJsonSchema(_object("copula"))]
RiskDesc = Annotated[dict[str, Any], AfterValidator(_builder(risk_measure_from_dict, "risk measure")),
                     WithJsonSchema(_object("risk measure"))]
CostDesc = Annotated[dict[str, Any], AfterValidator(_builder(cost_from_dict, "cost")), WithJsonSchema(_object("cost"))]
CountDesc = Annotated[dict[str, Any], AfterValidator(_builder(CountLaw.from_dict, "count law")),
                      WithJsonSchema(_object("count law"))]

Weights = Annotated[list[float], AfterValidator(lambda t: (check_simplex(t), t)[1])]


class _Params(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DominanceParams(_Params):
    marginal: LossDesc
    copula: CopulaDesc = Field(default_factory=lambda: {"kind": "independence"})
    theta: Weights
    grid: Optional[list[float]] = None
    coupled: bool = True


class TruncatedParams(_Params):
    marginal: LossDesc
    copula: CopulaDesc = Field(default_factory=lambda: {"kind": "independence"})
    theta: Weights
    c_levels: list[float]
    grid: Optional[list[float]] = None
    p_levels: Optional[list[float]] = None


class CollectiveParams(_Params):
    marginal: LossDesc
    weight_law: Optional[LossDesc] = None
    count_law: CountDesc
    grid: Optional[list[float]] = None


class ConstraintDesc(_Params):
    kind: Literal["fixed_total", "free"]
    w: Optional[float] = None
    w_max: float = 1e3

    @model_validator(mode="after")
    def _need_w(self):
        if self.kind == "fixed_total" and not (self.w is not None and self.w > 0):
            raise ValueError("fixed_total needs a positive w")
        if self.w_max <= 0:
            raise ValueError("w_max must be positive")
        return self


class CompensationDesc(_Params):
    kind: Literal["zero", "linear", "affine", "quadratic"] = "zero"
    gamma: float = 0.0
    intercept: float = 0.0
    kappa: float = 0.0


class PortfolioParams(_Params):
    marginal: LossDesc
    copula: CopulaDesc = Field(default_factory=lambda: {"kind": "independence"})
    n_assets: int = Field(ge=1)
    rho: RiskDesc
    compensation: CompensationDesc = Field(default_factory=CompensationDesc)
    constraint: ConstraintDesc
    positions: list[list[float]] = Field(default_factory=list)


class SuperaddParams(_Params):
    losses: list[LossDesc] = Field(min_length=1)
    theta: Weights
    p_grid: list[float] = Field(min_length=1)

    @model_validator(mode="after")
    def _lengths(self):
        if len(self.theta) != len(self.losses):
            raise ValueError("theta needs one weight per loss")
        if any(not 0 < p < 1 for p in self.p_grid):
            raise ValueError("p levels must lie in (0, 1)")
        return self


class InternalParams(_Params):
    a: list[float] = Field(min_length=1)
    risk_values: Optional[list[float]] = None
    rho: Optional[list[RiskDesc]] = None
    marginal: Optional[LossDesc] = None
    costs: list[CostDesc]
    price: Optional[float] = None

    @model_validator(mode="after")
    def _source(self):
        if (self.risk_values is None) == (self.rho is None):
            raise ValueError("give exactly one of risk_values or rho (+ marginal)")
        if self.rho is not None and self.marginal is None:
            raise ValueError("rho needs a marginal")
        m = len(self.risk_values if self.risk_values is not None else self.rho)
        if not (len(self.a) == m == len(self.costs)):
            raise ValueError("a, risk values and costs must have the same length")
        return self


class ExternalParams(_Params):
    n: int = Field(ge=1)
    k: int = Field(ge=1)
    a: float = Field(gt=0)
    rho_i: float
    rho_e: float
    cost_i: CostDesc
    cost_e: CostDesc
    tol: Optional[float] = Field(default=None, gt=0)


class EsParams(_Params):
    a: list[float] = Field(min_length=1)
    marginal: LossDesc
    q: float = Field(gt=0, lt=1)


class DataSource(_Params):
    path: Optional[str] = None
    sample: Optional[list[float]] = None
    column: Optional[str | int] = None
    delimiter: str = ","
    header: bool = True
    scale: float = Field(default=1.0, gt=0)
    nonpositive: Literal["reject", "drop"] = "reject"

    @model_validator(mode="after")
    def _one(self):
        if (self.path is None) == (self.sample is None):
            raise ValueError("give exactly one of path or sample")
        return self


class HillParams(_Params):
    data: DataSource
    k: Optional[int] = Field(default=None, ge=2)
    k_min: Optional[int] = Field(default=None, ge=2)
    k_max: Optional[int] = Field(default=None, ge=2)

    @model_validator(mode="after")
    def _range(self):
        if (self.k_min is None) != (self.k_max is None):
            raise ValueError("k_min and k_max go together")
        if self.k_min is not None and self.k_min > self.k_max:
            raise ValueError("k_min must not exceed k_max")
        return self


class EmpiricalParams(_Params):
    first: DataSource
    second: DataSource
    n_out: int = Field(default=10**4, ge=1)
    test: bool = False
    n_boot: int = Field(default=999, ge=100)


PARAM_MODELS: dict[str, type[_Params]] = {
    "dominance": DominanceParams,
    "truncated": TruncatedParams,
    "collective": CollectiveParams,
    "portfolio": PortfolioParams,
    "superadd": SuperaddParams,
    "equilibrium_internal": InternalParams,
    "equilibrium_external": ExternalParams,
    "equilibrium_es": EsParams,
    "hill": HillParams,
    "empirical_compare": EmpiricalParams,
}
KINDS = tuple(PARAM_MODELS)


class Descriptor(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal[KINDS]  # type: ignore[valid-type]
    parameters: dict[str, Any]
    seed: int = Field(ge=0, le=MAX_SEED)
    n_mc: int = Field(default=10**6, ge=1)
    output: Optional[str] = None

    @model_validator(mode="after")
    def _params(self):
        PARAM_MODELS[self.kind].model_validate(self.parameters)
        return self


def _format_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err.get("loc", ())) or "<root>"
        parts.append(f"{loc}: {err.get('msg')}")
    return "; ".join(parts)


def validate_parameters(kind: str, params: dict[str, Any]) -> _Params:
    if kind not in PARAM_MODELS:
        raise DescriptorError(f"unknown kind '{kind}' (expected one of {', '.join(KINDS)})")
    try:
        return PARAM_MODELS[kind].model_validate(params)
    except ValidationError as exc:
        raise DescriptorError(f"{kind} parameters: {_format_error(exc)}") from None


def parse_descriptor(data: dict[str, Any] | str | Path) -> Descriptor:
    """Validate a descriptor given as a mapping, JSON text or a file path."""
    if isinstance(data, Path) or (isinstance(data, str) and not data.lstrip().startswith("{")):
        try:
            data = json.loads(Path(data).read_text())
        except OSError as exc:
            raise DescriptorError(f"cannot read descriptor: {exc}") from None
        except json.JSONDecodeError as exc:
            raise DescriptorError(f"descriptor is not valid JSON: {exc}") from None
    elif isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise DescriptorError(f"descriptor is not valid JSON: {exc}") from None
    try:
        return Descriptor.model_validate(data)
    except ValidationError as exc:
        raise DescriptorError(_format_error(exc)) from None


_PARETO1 = {"kind": "pareto", "alpha": 1.0}

EXAMPLES: dict[str, dict[str, Any]] = {
    "dominance": {"marginal": _PARETO1, "theta": [0.5, 0.5], "grid": [1.25, 2.0, 5.0]},
    "truncated": {"marginal": _PARETO1, "theta": [0.5, 0.5], "c_levels": [10.0, 10.0],
                  "grid": [1.5, 2.0, 3.0, 4.0, 5.0], "p_levels": [0.75, 0.9]},
    "collective": {"marginal": _PARETO1, "count_law": {"kind": "uniform", "lo": 1, "hi": 2}, "grid": [2.0, 4.0, 8.0]},
    "portfolio": {"marginal": _PARETO1, "n_assets": 2, "rho": {"kind": "var", "p": 0.5},
                  "constraint": {"kind": "fixed_total", "w": 1.0}, "positions": [[1.0, 0.0], [0.5, 0.5]]},
    "superadd": {
        "losses": [{"kind": "gpd", "xi": xi, "beta": b} for xi, b in
                   zip((1.19, 1.17, 1.01, 1.39, 1.23, 1.22), (774.0, 254.0, 233.0, 412.0, 107.0, 243.0))],
        "theta": [1 / 6] * 6,
        "p_grid": [0.95, 0.96, 0.97, 0.98, 0.99],
    },
    "equilibrium_internal": {"a": [1.0, 2.0, 3.0], "rho": [{"kind": "var", "p": 0.95}] * 3,
                             "marginal": {"kind": "pareto", "alpha": 0.8}, "costs": [{"kind": "zero"}] * 3},
    "equilibrium_external": {"n": 1, "k": 1, "a": 2.0, "rho_i": 4.0, "rho_e": 2.0,
                             "cost_i": {"kind": "quadratic", "lam": 1.0}, "cost_e": {"kind": "quadratic", "lam": 1.0}},
    "equilibrium_es": {"a": [1.0, 1.0], "marginal": {"kind": "normal", "mu": 0.0, "sigma": 1.0}, "q": 0.9},
    "hill": {"data": {"sample": [1.0, 2.718281828459045, 7.38905609893065, 20.085536923187668]}, "k": 3},
    "empirical_compare": {"first": {"sample": [1.0, 2.0, 4.0, 8.0]}, "second": {"sample": [1.5, 3.0, 6.0]},
                          "n_out": 1000},
}


def example_descriptor(kind: str, seed: int = 20240101, n_mc: int = 10**6) -> dict[str, Any]:
    if kind not in EXAMPLES:
        raise DescriptorError(f"unknown kind '{kind}'")
    return {"kind": kind, "parameters": json.loads(json.dumps(EXAMPLES[kind])), "seed": seed, "n_mc": n_mc}


def json_schemas() -> dict[str, dict[str, Any]]:
    out = {"descriptor": Descriptor.model_json_schema()}
    for kind, model in PARAM_MODELS.items():
        out[kind] = model.model_json_schema()
    return out


def write_schemas(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, schema in json_schemas().items():
        p = directory / f"{name}.schema.json"
        p.write_text(json.dumps(schema, indent=2, sort_keys=True) + "\n")
        paths.append(p)
    return paths
