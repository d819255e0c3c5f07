"""Strict parsing of the JSON run configuration

Every command reads one JSON object. Unknown keys are rejected, and values are
checked by constructing the library objects they describe, so a config that
loads is a config that runs. The schema is documented in ``docs/formats.md``.
"""

__all__ = [
    "COMMANDS",
    "ConfigError",
    "RunConfig",
    "load_config",
    "parse_config",
]

import json
import math
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any, Optional, Union

import equinox as eqx
import numpy as np

from encrelay.arrivals import Exponential, arrival_model_from_dict
from encrelay.model import EncPolicy
from encrelay.optimizer import EnergyBudget, lossy_policy, optimal_policy
from encrelay.proto import ArrivalModel

COMMANDS = (
    "analyze",
    "optimize",
    "tradeoff",
    "simulate",
    "overflow",
    "reproduce-fig",
)

# top-level keys accepted by every command
COMMON_KEYS = frozenset({"command", "csv_precision", "output_path", "seed"})

COMMAND_KEYS: dict[str, frozenset[str]] = {
    "analyze": frozenset({"K", "lambda", "epsilon", "policy"}),
    "optimize": frozenset({"K", "lambda", "e_max", "xi"}),
    "tradeoff": frozenset({"K", "lambda", "e_grid"}),
    "simulate": frozenset(
        {
            "K",
            "lambda",
            "policy",
            "arrivals_a",
            "arrivals_b",
            "horizon",
            "warmup",
            "replications",
            "buffer_mode",
        }
    ),
    "overflow": frozenset({"K", "q_total", "trials"}),
    "reproduce-fig": frozenset(
        {
            "figure",
            "K",
            "lambda",
            "horizon",
            "replications",
            "sample_period",
            "xi_points",
            "e_step",
        }
    ),
}

NAMED_POLICIES = ("conventional", "fcfs", "always_send")


class ConfigError(ValueError):
    """An invalid run configuration"""


class RunConfig(eqx.Module):
    """A parsed configuration

    Args:
        command: One of :data:`COMMANDS`
        params: Command parameters with defaults filled in, still as plain
            JSON values
        output_path: Where to write the CSV (a directory for
            ``reproduce-fig``); ``None`` means standard output
        csv_precision: Significant digits of floats in the CSV
        seed: The top-level seed of every random quantity
    """

    command: str = eqx.field(static=True)
    params: dict[str, Any]
    output_path: Optional[str] = eqx.field(static=True, default=None)
    csv_precision: int = eqx.field(static=True, default=9)
    seed: int = eqx.field(static=True, default=0)


def load_config(path: Union[str, Path], command: str) -> RunConfig:
    """Read and validate the JSON config at ``path`` for ``command``"""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config file '{path}': {e.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(
            f"Config file '{path}' is not valid JSON: {e.msg} at line {e.lineno}"
        ) from None
    return parse_config(data, command)


def parse_config(data: Any, command: str) -> RunConfig:
    """Validate an already decoded config object for ``command``"""
    if command not in COMMANDS:
        raise ConfigError(f"Unknown command {command!r}")
    if not isinstance(data, Mapping):
        raise ConfigError("The config must be a JSON object")
    declared = data.get("command", command)
    if declared != command:
        raise ConfigError(
            f"The config is for command {declared!r} but {command!r} was requested"
        )
    unknown = sorted(set(data) - COMMON_KEYS - COMMAND_KEYS[command])
    if unknown:
        raise ConfigError(f"Unknown keys for command {command!r}: {unknown}")

    precision = _integer(data.get("csv_precision", 9), "csv_precision", 1, 17)
    seed = _integer(data.get("seed", 0), "seed", 0, (1 << 64) - 1)
    output_path = data.get("output_path")
    if output_path is not None and not isinstance(output_path, str):
        raise ConfigError("'output_path' must be a string")

    params = {key: value for key, value in data.items() if key not in COMMON_KEYS}
    params = _VALIDATORS[command](params)
    return RunConfig(
        command=command,
        params=params,
        output_path=output_path,
        csv_precision=precision,
        seed=seed,
    )


def _require(params: Mapping[str, Any], *names: str) -> None:
    missing = [name for name in names if name not in params]
    if missing:
        raise ConfigError(f"Missing required keys: {missing}")


def _integer(value: Any, name: str, minimum: int, maximum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{name}' must be an integer; got {value!r}")
    if value < minimum or (maximum is not None and value > maximum):
        bound = f"[{minimum}, {maximum}]" if maximum is not None else f">= {minimum}"
        raise ConfigError(f"'{name}' must be {bound}; got {value}")
    return value


def _number(value: Any, name: str, *, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{name}' must be a number; got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"'{name}' must be finite")
    if positive and not value > 0:
        raise ConfigError(f"'{name}' must be positive; got {value!r}")
    return value


def _sizes(value: Any, name: str = "K", minimum: int = 1) -> list[int]:
    if isinstance(value, Sequence) and not isinstance(value, str):
        if not value:
            raise ConfigError(f"'{name}' must not be an empty list")
        return [_integer(v, name, minimum) for v in value]
    return [_integer(value, name, minimum)]


def _grid(value: Any, name: str) -> list[float]:
    if isinstance(value, Mapping):
        unknown = sorted(set(value) - {"start", "stop", "step"})
        if unknown:
            raise ConfigError(f"Unknown keys in '{name}': {unknown}")
        _require(value, "start", "stop", "step")
        start = _number(value["start"], f"{name}.start", positive=True)
        stop = _number(value["stop"], f"{name}.stop", positive=True)
        step = _number(value["step"], f"{name}.step", positive=True)
        if stop < start:
            raise ConfigError(f"'{name}.stop' must not be below '{name}.start'")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    if isinstance(value, Sequence) and not isinstance(value, str) and value:
        return [_number(v, name, positive=True) for v in value]
    raise ConfigError(f"'{name}' must be a non-empty list or a start/stop/step object")


def _check(fn: Any, *args: Any, **kwargs: Any) -> Any:
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from None


def build_policy(form: Any, K: int, lam: float) -> EncPolicy:
    """An :class:`EncPolicy` from its config form

    Accepted forms are a name (``"conventional"``, ``"fcfs"`` or
    ``"always_send"``), ``{"g": [...], "f": [...]}``,
    ``{"optimal": {"e_max": ...}}`` and ``{"lossy": {"xi": ..., "variant": ...}}``.
    """
    if isinstance(form, str):
        if form not in NAMED_POLICIES:
            raise ConfigError(
                f"Unknown policy {form!r}; expected one of {list(NAMED_POLICIES)}"
            )
        return getattr(EncPolicy, form)(K)
    if not isinstance(form, Mapping):
        raise ConfigError(f"A policy must be a name or an object; got {form!r}")
    if "optimal" in form:
        if set(form) != {"optimal"}:
            raise ConfigError("An optimal policy takes no other keys")
        inner = form["optimal"]
        if not isinstance(inner, Mapping) or set(inner) != {"e_max"}:
            raise ConfigError("'optimal' must be an object with exactly 'e_max'")
        e_max = _number(inner["e_max"], "optimal.e_max", positive=True)
        point = _check(optimal_policy, e_max, K, lam)
        if point.policy is None:
            raise ConfigError(
                f"No loss-free policy meets e_max={e_max!r} with K={K}"
            )
        return point.policy
    if "lossy" in form:
        if set(form) != {"lossy"}:
            raise ConfigError("A lossy policy takes no other keys")
        inner = form["lossy"]
        if not isinstance(inner, Mapping) or not set(inner) <= {"xi", "variant"}:
            raise ConfigError("'lossy' must be an object with 'xi' and 'variant'")
        _require(inner, "xi")
        xi = _number(inner["xi"], "lossy.xi")
        return _check(lossy_policy, xi, K, inner.get("variant", "proof"))
    unknown = sorted(set(form) - {"g", "f"})
    if unknown:
        raise ConfigError(f"Unknown policy keys: {unknown}")
    _require(form, "g")
    g = _vector(form["g"], "g")
    f = None if form.get("f") is None else _vector(form["f"], "f")
    return _check(EncPolicy, K, g, f)


def _vector(value: Any, name: str) -> np.ndarray:
    if not isinstance(value, Sequence) or isinstance(value, str):
        raise ConfigError(f"'{name}' must be a list of numbers")
    return np.array([_number(v, name) for v in value])


def build_arrivals(form: Any, lam: float) -> ArrivalModel:
    """An arrival model from its config form; ``None`` means Poisson at ``lam``"""
    if form is None:
        return Exponential(lam)
    return _check(arrival_model_from_dict, form)


def _analyze(params: dict[str, Any]) -> dict[str, Any]:
    _require(params, "K", "lambda", "policy")
    K = _integer(params["K"], "K", 1)
    lam = _number(params["lambda"], "lambda", positive=True)
    epsilon = _number(params.get("epsilon", 1.0), "epsilon", positive=True)
    build_policy(params["policy"], K, lam)
    return {"K": K, "lambda": lam, "epsilon": epsilon, "policy": params["policy"]}


def _optimize(params: dict[str, Any]) -> dict[str, Any]:
    _require(params, "K", "lambda", "e_max")
    K = _integer(params["K"], "K", 1)
    lam = _number(params["lambda"], "lambda", positive=True)
    e_max = _number(params["e_max"], "e_max", positive=True)
    xi = _number(params.get("xi", 0.0), "xi")
    _check(EnergyBudget, e_max, K, lam, xi)
    return {"K": K, "lambda": lam, "e_max": e_max, "xi": xi}


def _tradeoff(params: dict[str, Any]) -> dict[str, Any]:
    _require(params, "K", "lambda", "e_grid")
    K = _integer(params["K"], "K", 1)
    lam = _number(params["lambda"], "lambda", positive=True)
    return {"K": K, "lambda": lam, "e_grid": _grid(params["e_grid"], "e_grid")}


def _simulate(params: dict[str, Any]) -> dict[str, Any]:
    _require(params, "K", "lambda", "policy", "horizon")
    sizes = _sizes(params["K"])
    lam = _number(params["lambda"], "lambda", positive=True)
    horizon = _number(params["horizon"], "horizon", positive=True)
    warmup = params.get("warmup")
    if warmup is not None:
        warmup = _number(warmup, "warmup")
        if not 0 <= warmup < horizon:
            raise ConfigError("'warmup' must lie in [0, horizon)")
    replications = _integer(params.get("replications", 1), "replications", 1)
    mode = params.get("buffer_mode", "finite")
    if mode not in ("finite", "unbounded"):
        raise ConfigError(
            f"'buffer_mode' must be 'finite' or 'unbounded'; got {mode!r}"
        )
    for K in sizes:
        build_policy(params["policy"], K, lam)
    build_arrivals(params.get("arrivals_a"), lam)
    build_arrivals(params.get("arrivals_b"), lam)
    return {
        "K": sizes,
        "lambda": lam,
        "policy": params["policy"],
        "arrivals_a": params.get("arrivals_a"),
        "arrivals_b": params.get("arrivals_b"),
        "horizon": horizon,
        "warmup": warmup,
        "replications": replications,
        "buffer_mode": mode,
    }


def _overflow(params: dict[str, Any]) -> dict[str, Any]:
    _require(params, "K", "q_total", "trials")
    sizes = _sizes(params["K"], minimum=0)
    return {
        "K": sizes,
        "q_total": _integer(params["q_total"], "q_total", 100),
        "trials": _integer(params["trials"], "trials", 1000),
    }


def _reproduce_fig(params: dict[str, Any]) -> dict[str, Any]:
    _require(params, "figure")
    figure = _integer(params["figure"], "figure", 4, 7)
    defaults: dict[int, dict[str, Any]] = {
        4: {"K": 20, "lambda": 1.0, "horizon": 1000.0, "sample_period": 1.0},
        5: {
            "K": [1, 2, 3],
            "lambda": 1.0,
            "horizon": 100000.0,
            "replications": 4,
            "xi_points": 5,
        },
        6: {
            "K": list(range(1, 21)),
            "lambda": 1.0,
            "horizon": 100000.0,
            "replications": 4,
        },
        7: {
            "K": 3,
            "lambda": 1.0,
            "horizon": 100000.0,
            "replications": 4,
            "e_step": 0.01,
        },
    }[figure]
    unknown = sorted(set(params) - {"figure"} - set(defaults))
    if unknown:
        raise ConfigError(f"Unknown keys for figure {figure}: {unknown}")
    out = {"figure": figure, **defaults}
    for key, value in params.items():
        if key != "figure":
            out[key] = value
    out["lambda"] = _number(out["lambda"], "lambda", positive=True)
    out["horizon"] = _number(out["horizon"], "horizon", positive=True)
    if isinstance(defaults["K"], list):
        out["K"] = _sizes(out["K"])
    else:
        out["K"] = _integer(out["K"], "K", 1)
    if "replications" in out:
        out["replications"] = _integer(out["replications"], "replications", 1)
    if "sample_period" in out:
        out["sample_period"] = _number(
            out["sample_period"], "sample_period", positive=True
        )
    if "xi_points" in out:
        out["xi_points"] = _integer(out["xi_points"], "xi_points", 2)
    if "e_step" in out:
        out["e_step"] = _number(out["e_step"], "e_step", positive=True)
    return out


_VALIDATORS = {
    "analyze": _analyze,
    "optimize": _optimize,
    "tradeoff": _tradeoff,
    "simulate": _simulate,
    "overflow": _overflow,
    "reproduce-fig": _reproduce_fig,
}
