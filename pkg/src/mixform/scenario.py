"""Scenario files and the three built-in four-arm square cases.

A scenario file is JSON::

    {
      "schema_version": 1,
      "name": "case1",
      "agents": [
        {"mode": "fa", "params": {"m1": 1.2, ...}, "base": [0, 0],
         "q0": [-1.5708, 1.0472], "qdot0": [0, 0]},
        ...
      ],
      "graph": {"edges": [[1, 2], ...], "d_star": [0.4, ...]},
      "gains": {"kp": 800, "kd": 600},
      "sim": {"dt": 0.001, "t_final": 30, "log_stride": 1, "hold": "stage"}
    }

Edges are ``[tail, head]`` pairs of one-based agent indices.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import jsonschema

from .control import Gains
from .dynamics import JointState, ManipulatorParams
from .errors import ScenarioError
from .formation import FormationSpec
from .kinematics import BasePose
from .network import FA, PA, Agent, Network
from .sim import Scenario, SimConfig

__all__ = [
    "SCHEMA_VERSION",
    "SCENARIO_SCHEMA",
    "BUILTIN_CASES",
    "ARM_PARAMS",
    "builtin_case",
    "scenario_from_dict",
    "scenario_to_dict",
    "load_scenario",
    "save_scenario",
]

SCHEMA_VERSION = 1

_vec2 = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_param_names = ["m1", "m2", "I1", "I2", "L1", "L2", "l1", "l2"]

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "agents", "graph", "gains", "sim"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "agents": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["mode", "params", "base", "q0", "qdot0"],
                "properties": {
                    "mode": {"enum": [FA, PA]},
                    "params": {
                        "type": "object",
                        "required": _param_names,
                        "properties": {k: {"type": "number"} for k in _param_names},
                        "additionalProperties": False,
                    },
                    "base": _vec2,
                    "q0": _vec2,
                    "qdot0": _vec2,
                },
                "additionalProperties": False,
            },
        },
        "graph": {
            "type": "object",
            "required": ["edges", "d_star"],
            "properties": {
                "edges": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
                },
                "d_star": {"type": "array", "items": {"type": "number"}},
            },
            "additionalProperties": False,
        },
        "gains": {
            "type": "object",
            "required": ["kp", "kd"],
            "properties": {"kp": {"type": "number"}, "kd": {"type": "number"}},
            "additionalProperties": False,
        },
        "sim": {
            "type": "object",
            "required": ["dt", "t_final"],
            "properties": {
                "dt": {"type": "number"},
                "t_final": {"type": "number"},
                "log_stride": {"type": "integer"},
                "hold": {"enum": ["stage", "step"]},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

ARM_PARAMS = ManipulatorParams(m1=1.2, m2=1.0, I1=0.2250, I2=0.1875, L1=1.5, L2=1.5, l1=0.75, l2=0.75)

_BASES = ((0.0, 0.0), (5.0, 0.0), (5.0, 3.0), (0.0, 3.0))
_Q0 = (
    (-math.pi / 2, math.pi / 3),
    (math.pi / 6, math.pi / 3),
    (math.pi / 2, math.pi / 3),
    (-math.pi / 2, -math.pi / 3),
)
# four sides of the square, then the diagonal 1-3
_EDGES = ((1, 2), (2, 3), (3, 4), (4, 1), (1, 3))
_SIDE = 0.4
_D_STAR = (_SIDE, _SIDE, _SIDE, _SIDE, _SIDE * math.sqrt(2.0))

BUILTIN_CASES = {
    "case1": (4,),
    "case2": (3, 4),
    "case3": (2, 3, 4),
}


def builtin_case(name: str) -> Scenario:
    """Four arms driving their end effectors to a 0.4 m square.

    The cases differ only in which arms (one-based) are passive-active.
    """
    try:
        pa_agents = BUILTIN_CASES[name]
    except KeyError:
        raise ScenarioError(f"unknown built-in case {name!r}; choose from {sorted(BUILTIN_CASES)}") from None
    agents = [
        Agent(
            mode=PA if i in pa_agents else FA,
            params=ARM_PARAMS,
            base=BasePose(base),
            q0=JointState(q0, (0.0, 0.0)),
        )
        for i, (base, q0) in enumerate(zip(_BASES, _Q0), start=1)
    ]
    network = Network(agents, FormationSpec(4, _EDGES, _D_STAR))
    config = SimConfig(gains=Gains(800.0, 600.0), dt=1e-3, t_final=30.0, log_stride=1)
    return Scenario(network, config, name)


def scenario_from_dict(doc: dict) -> Scenario:
    try:
        jsonschema.validate(doc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"scenario field {where}: {exc.message}") from None
    try:
        agents = []
        for i, a in enumerate(doc["agents"], start=1):
            try:
                agents.append(
                    Agent(
                        mode=a["mode"],
                        params=ManipulatorParams(**a["params"]),
                        base=BasePose(a["base"]),
                        q0=JointState(a["q0"], a["qdot0"]),
                    )
                )
            except ScenarioError as exc:
                raise type(exc)(f"agents/{i - 1}: {exc}") from None
            except ValueError as exc:
                raise ScenarioError(f"agents/{i - 1}: {exc}") from None
        graph = doc["graph"]
        formation = FormationSpec(len(agents), tuple(map(tuple, graph["edges"])), tuple(graph["d_star"]))
        network = Network(agents, formation)
        s = doc["sim"]
        config = SimConfig(
            gains=Gains(doc["gains"]["kp"], doc["gains"]["kd"]),
            dt=float(s["dt"]),
            t_final=float(s["t_final"]),
            log_stride=int(s.get("log_stride", 1)),
            hold=s.get("hold", "stage"),
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    return Scenario(network, config, doc.get("name", "custom"))


def scenario_to_dict(scenario: Scenario) -> dict:
    net = scenario.network
    cfg = scenario.config
    return {
        "schema_version": SCHEMA_VERSION,
        "name": scenario.name,
        "agents": [
            {
                "mode": a.mode,
                "params": a.params.to_dict(),
                "base": a.base.x0.tolist(),
                "q0": a.q0.q.tolist(),
                "qdot0": a.q0.qdot.tolist(),
            }
            for a in net.agents
        ],
        "graph": {
            "edges": [list(e) for e in net.formation.edges],
            "d_star": list(net.formation.d_star),
        },
        "gains": {"kp": cfg.gains.kp, "kd": cfg.gains.kd},
        "sim": {"dt": cfg.dt, "t_final": cfg.t_final, "log_stride": int(cfg.log_stride), "hold": cfg.hold},
    }


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from None
    try:
        return scenario_from_dict(doc)
    except ScenarioError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def save_scenario(scenario: Scenario, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")
    return path
