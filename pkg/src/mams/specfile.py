"""System spec documents: a small JSON schema describing one queueing system.

A spec contains either an explicit pair of marked chains::

    {
      "arrival_chain":    {"states": ["H", "L"],
                           "transitions": [{"from": "H", "to": "H", "mark": 1, "rate": 2.0}, ...]},
      "completion_chain": {"states": ["X"],
                           "transitions": [{"from": "X", "to": "X", "mark": 1, "rate": 1.0}]}
    }

or a two-level block::

    {"two_level": {"lambda_h": 2.0, "lambda_l": 0.2, "alpha_h": 0.5, "alpha_l": 0.1, "mu": 1.0}}

plus optional "simulation" overrides (seed, num_events, warmup_fraction,
num_batches, initial_state) and an optional "sweep" block::

    {"sweep": {"parameter": "two_level.alpha_l",
               "values": [0.1, 1.0],
               "linked": [{"parameter": "two_level.alpha_h", "ratio": 5.0}]}}

Sweep parameters are dotted paths into the document; integer components
index lists, so chain rates are addressable as
"arrival_chain.transitions.0.rate". Linked parameters are set to
ratio * swept value at every point.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator

from .chain import MarkedChain
from .errors import SpecError
from .two_level import TwoLevelParams, to_mams

_SIM_KEYS = {"seed", "num_events", "warmup_fraction", "num_batches", "initial_state"}
_TWO_LEVEL_KEYS = {"lambda_h", "lambda_l", "alpha_h", "alpha_l", "mu"}


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple[float, ...]
    linked: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class SystemSpec:
    """Parsed spec plus the normalized document it round-trips through."""

    document: dict
    arrival_chain: MarkedChain | None
    completion_chain: MarkedChain | None
    two_level: TwoLevelParams | None
    sim_overrides: dict
    sweep: SweepSpec | None

    @property
    def is_two_level(self) -> bool:
        return self.two_level is not None

    def chains(self) -> tuple[MarkedChain, MarkedChain]:
        """The (arrival, completion) pair, expanding a two-level block."""
        if self.two_level is not None:
            return to_mams(self.two_level)
        return self.arrival_chain, self.completion_chain


def _require_number(value, where, positive=True) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(f"{where}: expected a number, got {value!r}")
    if positive and not value > 0:
        raise SpecError(f"{where}: expected a positive number, got {value!r}")
    return float(value)


def _parse_chain(block, where) -> MarkedChain:
    if not isinstance(block, dict):
        raise SpecError(f"{where}: expected an object")
    states = block.get("states")
    if not isinstance(states, list) or not states or not all(isinstance(s, str) for s in states):
        raise SpecError(f"{where}.states: expected a nonempty list of labels")
    if len(set(states)) != len(states):
        raise SpecError(f"{where}.states: duplicate labels")
    index = {s: i for i, s in enumerate(states)}
    raw = block.get("transitions")
    if not isinstance(raw, list):
        raise SpecError(f"{where}.transitions: expected a list")
    transitions = []
    for k, tr in enumerate(raw):
        at = f"{where}.transitions[{k}]"
        if not isinstance(tr, dict):
            raise SpecError(f"{at}: expected an object")
        for key in ("from", "to", "mark", "rate"):
            if key not in tr:
                raise SpecError(f"{at}: missing field {key!r}")
        src, dst = tr["from"], tr["to"]
        if src not in index:
            raise SpecError(f"{at}.from: unknown state label {src!r}")
        if dst not in index:
            raise SpecError(f"{at}.to: unknown state label {dst!r}")
        mark = tr["mark"]
        if mark not in (0, 1) or isinstance(mark, bool):
            raise SpecError(f"{at}.mark: expected 0 or 1, got {mark!r}")
        rate = _require_number(tr["rate"], f"{at}.rate")
        transitions.append((index[src], index[dst], int(mark), rate))
    unknown = set(block) - {"states", "transitions"}
    if unknown:
        raise SpecError(f"{where}: unknown fields {sorted(unknown)}")
    return MarkedChain(states, transitions)


def _parse_two_level(block, where) -> TwoLevelParams:
    if not isinstance(block, dict):
        raise SpecError(f"{where}: expected an object")
    unknown = set(block) - _TWO_LEVEL_KEYS
    if unknown:
        raise SpecError(f"{where}: unknown fields {sorted(unknown)}")
    missing = _TWO_LEVEL_KEYS - set(block)
    if missing:
        raise SpecError(f"{where}: missing fields {sorted(missing)}")
    values = {k: _require_number(block[k], f"{where}.{k}") for k in _TWO_LEVEL_KEYS}
    return TwoLevelParams(**values)


def _parse_sim(block, where) -> dict:
    if not isinstance(block, dict):
        raise SpecError(f"{where}: expected an object")
    unknown = set(block) - _SIM_KEYS
    if unknown:
        raise SpecError(f"{where}: unknown fields {sorted(unknown)}")
    out = dict(block)
    if "initial_state" in out:
        init = out["initial_state"]
        if not (isinstance(init, list) and len(init) == 3 and all(isinstance(x, int) for x in init)):
            raise SpecError(f"{where}.initial_state: expected [q0, arrival_index, completion_index]")
        out["initial_state"] = tuple(init)
    return out


def _parse_sweep(block, where) -> SweepSpec:
    if not isinstance(block, dict):
        raise SpecError(f"{where}: expected an object")
    param = block.get("parameter")
    if not isinstance(param, str) or not param:
        raise SpecError(f"{where}.parameter: expected a dotted path string")
    values = block.get("values")
    if not isinstance(values, list) or not values:
        raise SpecError(f"{where}.values: expected a nonempty list of numbers")
    values = tuple(_require_number(v, f"{where}.values[{i}]", positive=False) for i, v in enumerate(values))
    linked = []
    for i, entry in enumerate(block.get("linked", [])):
        at = f"{where}.linked[{i}]"
        if not isinstance(entry, dict) or "parameter" not in entry or "ratio" not in entry:
            raise SpecError(f"{at}: expected an object with 'parameter' and 'ratio'")
        linked.append((str(entry["parameter"]), _require_number(entry["ratio"], f"{at}.ratio", positive=False)))
    unknown = set(block) - {"parameter", "values", "linked"}
    if unknown:
        raise SpecError(f"{where}: unknown fields {sorted(unknown)}")
    return SweepSpec(param, values, tuple(linked))


def parse_spec(document: dict, source: str = "<dict>") -> SystemSpec:
    """Validate and build a SystemSpec from a parsed JSON document."""
    if not isinstance(document, dict):
        raise SpecError(f"{source}: top level must be an object")
    unknown = set(document) - {"arrival_chain", "completion_chain", "two_level", "simulation", "sweep"}
    if unknown:
        raise SpecError(f"{source}: unknown top-level fields {sorted(unknown)}")

    has_chains = "arrival_chain" in document or "completion_chain" in document
    has_two_level = "two_level" in document
    if has_chains and has_two_level:
        raise SpecError(f"{source}: give either a chain pair or a two_level block, not both")
    if not has_chains and not has_two_level:
        raise SpecError(f"{source}: missing system definition (chain pair or two_level block)")

    arrival = completion = None
    two_level = None
    if has_two_level:
        two_level = _parse_two_level(document["two_level"], "two_level")
    else:
        if "arrival_chain" not in document or "completion_chain" not in document:
            raise SpecError(f"{source}: both arrival_chain and completion_chain are required")
        arrival = _parse_chain(document["arrival_chain"], "arrival_chain")
        completion = _parse_chain(document["completion_chain"], "completion_chain")

    sim = _parse_sim(document.get("simulation", {}), "simulation")
    sweep = _parse_sweep(document["sweep"], "sweep") if "sweep" in document else None
    return SystemSpec(
        document=copy.deepcopy(document),
        arrival_chain=arrival,
        completion_chain=completion,
        two_level=two_level,
        sim_overrides=sim,
        sweep=sweep,
    )


def load_spec(path: str | Path) -> SystemSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpecError(f"{path}: cannot read spec file: {exc}") from exc
    return loads_spec(text, source=str(path))


def loads_spec(text: str, source: str = "<string>") -> SystemSpec:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_spec(document, source=source)


def spec_to_dict(spec: SystemSpec) -> dict:
    """Normalized document form; parsing it back yields an identical system."""
    doc: dict[str, Any] = {}
    if spec.two_level is not None:
        p = spec.two_level
        doc["two_level"] = {
            "lambda_h": p.lambda_h,
            "lambda_l": p.lambda_l,
            "alpha_h": p.alpha_h,
            "alpha_l": p.alpha_l,
            "mu": p.mu,
        }
    else:
        doc["arrival_chain"] = _chain_to_dict(spec.arrival_chain)
        doc["completion_chain"] = _chain_to_dict(spec.completion_chain)
    if spec.sim_overrides:
        sim = dict(spec.sim_overrides)
        if "initial_state" in sim:
            sim["initial_state"] = list(sim["initial_state"])
        doc["simulation"] = sim
    if spec.sweep is not None:
        doc["sweep"] = {
            "parameter": spec.sweep.parameter,
            "values": list(spec.sweep.values),
            "linked": [{"parameter": p, "ratio": r} for p, r in spec.sweep.linked],
        }
    return doc


def _chain_to_dict(chain: MarkedChain) -> dict:
    return {
        "states": list(chain.states),
        "transitions": [
            {
                "from": chain.states[t.source],
                "to": chain.states[t.target],
                "mark": t.mark,
                "rate": t.rate,
            }
            for t in chain.transitions
        ],
    }


def dump_spec(spec: SystemSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(spec_to_dict(spec), indent=2) + "\n")


def _set_path(document: dict, path: str, value) -> None:
    parts = path.split(".")
    node: Any = document
    for i, part in enumerate(parts[:-1]):
        where = ".".join(parts[: i + 1])
        if isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError) as exc:
                raise SpecError(f"sweep path {path!r}: bad list index at {where!r}") from exc
        elif isinstance(node, dict):
            if part not in node:
                raise SpecError(f"sweep path {path!r}: no field {where!r} in spec")
            node = node[part]
        else:
            raise SpecError(f"sweep path {path!r}: {where!r} is not indexable")
    leaf = parts[-1]
    if isinstance(node, list):
        try:
            node[int(leaf)] = value
        except (ValueError, IndexError) as exc:
            raise SpecError(f"sweep path {path!r}: bad list index {leaf!r}") from exc
    elif isinstance(node, dict):
        if leaf not in node:
            raise SpecError(f"sweep path {path!r}: no field {leaf!r} in spec")
        node[leaf] = value
    else:
        raise SpecError(f"sweep path {path!r}: cannot assign into {type(node).__name__}")


def sweep_points(spec: SystemSpec) -> Iterator[tuple[float, SystemSpec]]:
    """Yield (swept value, fully parsed point spec) for each sweep value.

    The sweep block itself is stripped from the generated points. Invalid
    points raise SpecError from the parse; callers decide whether to stop
    or record the failure and continue.
    """
    if spec.sweep is None:
        raise SpecError("spec has no sweep block")
    base = {k: v for k, v in spec.document.items() if k != "sweep"}
    for value in spec.sweep.values:
        doc = copy.deepcopy(base)
        _set_path(doc, spec.sweep.parameter, value)
        for path, ratio in spec.sweep.linked:
            _set_path(doc, path, ratio * value)
        yield value, parse_spec(doc, source=f"sweep point {spec.sweep.parameter}={value:.12g}")
