"""Deterministic file outputs: CSV tables, key-value summaries, manifests."""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .flow import Orbit
from .geometry import PeriodicGrid, ScalarField
from .variational import ActionTable


def fmt(value: float) -> str:
    return f"{float(value):.17g}"


def write_field_csv(path: str, fld: ScalarField) -> None:
    """Field format: header "x,value", one row per node in index order."""
    with open(path, "w") as fh:
        fh.write("x,value\n")
        for x, v in zip(fld.grid.nodes, fld.values):
            fh.write(f"{fmt(x)},{fmt(v)}\n")


def read_field_csv(path: str) -> ScalarField:
    xs, vs = [], []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "x,value":
            raise ValueError(f"unexpected field header {header!r}")
        for line in fh:
            a, b = line.strip().split(",")
            xs.append(float(a))
            vs.append(float(b))
    grid = PeriodicGrid(len(xs))
    if not np.allclose(grid.nodes, xs, atol=1e-12):
        raise ValueError("field nodes are not the canonical grid")
    return ScalarField(grid, np.asarray(vs))


def write_orbit_csv(path: str, orbit: Orbit, thin: int = 1) -> None:
    """Orbit format: header "t,x,u,p,H", thinned by the given factor."""
    H = orbit.energies()
    with open(path, "w") as fh:
        fh.write("t,x,u,p,H\n")
        for k in range(0, len(orbit.ts), max(1, thin)):
            x, u, p = orbit.states[k]
            fh.write(f"{fmt(orbit.ts[k])},{fmt(x)},{fmt(u)},{fmt(p)},{fmt(H[k])}\n")


def write_table_csv(path: str, table: ActionTable) -> None:
    """Action table format: header "k,i,x,h,backpointer"."""
    nodes = table.grid.nodes
    with open(path, "w") as fh:
        fh.write("k,i,x,h,backpointer\n")
        for k in range(table.steps + 1):
            for i in range(table.grid.n):
                bp = 0 if k == 0 else int(table.backpointers[k - 1][i])
                fh.write(f"{k},{i},{fmt(nodes[i])},{fmt(table.layers[k][i])},{bp}\n")


def write_keyvalues(path: str, entries: dict) -> None:
    with open(path, "w") as fh:
        for key, value in entries.items():
            if isinstance(value, float):
                fh.write(f"{key} = {fmt(value)}\n")
            else:
                fh.write(f"{key} = {value}\n")


def read_keyvalues(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            if "=" in line:
                key, value = line.split("=", 1)
                out[key.strip()] = value.strip()
    return out


def write_manifest(out_dir: str, command: str, config_hash: str,
                   inputs: list[str], outputs: list[str]) -> str:
    """Manifest listing the inputs, config hash and produced files."""
    entries = []
    for name in sorted(outputs):
        full = os.path.join(out_dir, name)
        digest = ""
        if os.path.exists(full):
            with open(full, "rb") as fh:
                digest = hashlib.sha256(fh.read()).hexdigest()
        entries.append({"file": name, "sha256": digest})
    doc = {
        "command": command,
        "config_sha256": config_hash,
        "inputs": sorted(inputs),
        "outputs": entries,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
