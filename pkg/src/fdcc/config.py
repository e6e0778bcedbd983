"""Declarative configuration: chain files, experiment suites, hashing, printing.

Both file kinds are TOML.  A chain file is a list of [[link]] tables plus a
[tip] table; a suite file holds shared physics sections and a [[scenario]]
list.  parse/print round-trip exactly and a content hash over every physical
parameter backs the mode-comparison checks.
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .kinematics import KinematicChain, Link, Transform

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# chain files


def _chain_from_dict(doc: dict, name_hint: str) -> KinematicChain:
    if doc.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError(f"unsupported chain schema_version {doc.get('schema_version')}")
    links_doc = doc.get("link")
    if not links_doc:
        raise ConfigError("chain file needs at least one [[link]] table")
    links = []
    for i, ld in enumerate(links_doc):
        try:
            inertia = np.diag([float(x) for x in ld.get("inertia_diag", (0.0, 0.0, 0.0))])
            links.append(
                Link(
                    parent_offset=Transform.from_xyz_rpy(
                        ld.get("offset_xyz", (0.0, 0.0, 0.0)),
                        ld.get("offset_rpy", (0.0, 0.0, 0.0)),
                    ),
                    joint_axis=np.asarray(ld.get("axis", (0.0, 0.0, 1.0)), dtype=float),
                    mass=float(ld.get("mass", 0.0)),
                    inertia_tensor=inertia,
                    com_offset=np.asarray(ld.get("com", (0.0, 0.0, 0.0)), dtype=float),
                )
            )
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"link {i}: {exc}") from exc
    tip_doc = doc.get("tip", {})
    probe = float(tip_doc.get("probe_length", 0.0))
    tip = Transform.from_xyz_rpy(
        tip_doc.get("offset_xyz", (0.0, 0.0, 0.0)), tip_doc.get("offset_rpy", (0.0, 0.0, 0.0))
    )
    if probe != 0.0:
        # probe extends along the tool z axis beyond the tip offset
        tip = Transform(tip.rotation, tip.translation + tip.rotation @ np.array([0.0, 0.0, probe]))
    return KinematicChain(tuple(links), tip_offset=tip, name=doc.get("name", name_hint))


def load_chain(path) -> KinematicChain:
    """Parse a chain definition file."""
    p = Path(path)
    try:
        doc = tomllib.loads(p.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read chain file {p}: {exc}") from exc
    try:
        return _chain_from_dict(doc, p.stem)
    except ConfigError as exc:
        raise ConfigError(f"{p}: {exc}") from exc


def builtin_chain(name: str = "ur10e") -> KinematicChain:
    """Load one of the chain definitions shipped with the package."""
    ref = resources.files("fdcc.data").joinpath(f"{name}.toml")
    doc = tomllib.loads(ref.read_text())
    return _chain_from_dict(doc, name)
