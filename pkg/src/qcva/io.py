"""CSV and JSON formats for matrices, vectors, instances, tables and run manifests."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    """Shortest round-tripping text for a number; deterministic across runs."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return "" if x is None else str(x)


def write_matrix_csv(M, path) -> None:
    """Header `# rows=R,cols=C`, then one row per line."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="") as fh:
        fh.write(f"# rows={M.shape[0]},cols={M.shape[1]}\n")
        w = csv.writer(fh, lineterminator="\n")
        for row in M:
            w.writerow([fmt(x) for x in row])


def read_matrix_csv(path) -> np.ndarray:
    with open(path) as fh:
        head = fh.readline().strip()
        if not head.startswith("# rows="):
            raise ValueError(f"{path}: missing '# rows=R,cols=C' header")
        dims = dict(kv.split("=") for kv in head[2:].split(","))
        rows, cols = int(dims["rows"]), int(dims["cols"])
        data = [[float(x) for x in line] for line in csv.reader(fh) if line]
    M = np.array(data, dtype=float).reshape(len(data), -1) if data else np.zeros((0, cols))
    if M.shape != (rows, cols):
        raise ValueError(f"{path}: header says {rows}x{cols}, found {M.shape}")
    return M


def write_vector_csv(v, path) -> None:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    with open(path, "w") as fh:
        fh.write(f"# n={v.size}\n")
        fh.writelines(fmt(x) + "\n" for x in v)


def read_vector_csv(path) -> np.ndarray:
    with open(path) as fh:
        head = fh.readline().strip()
        if not head.startswith("# n="):
            raise ValueError(f"{path}: missing '# n=N' header")
        n = int(head[4:])
        v = np.array([float(x) for x in fh.read().split()], dtype=float)
    if v.size != n:
        raise ValueError(f"{path}: header says {n} entries, found {v.size}")
    return v


def write_table(rows: list[dict], path, columns=None) -> None:
    columns = columns or (list(rows[0]) if rows else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r.get(c)) for c in columns])


def read_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    return x


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def save_instance(inst, directory) -> None:
    """Q.csv and V.csv (T x N) plus instance.json with R, phi, q_norm and parameters."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(inst.Q, d / "Q.csv")
    write_matrix_csv(inst.V, d / "V.csv")
    meta = {
        "R": inst.R,
        "q_norm": inst.q_norm,
        "default_probs": inst.default_probs,
        "times": inst.times,
        "params": inst.params.to_dict() if inst.params else None,
        "discounted": inst.discounted,
    }
    write_json(meta, d / "instance.json")


def load_instance(directory):
    from .finance import BsmParams, CvaInstance

    d = Path(directory)
    meta = read_json(d / "instance.json")
    Q, V = read_matrix_csv(d / "Q.csv"), read_matrix_csv(d / "V.csv")
    params = BsmParams(**meta["params"]) if meta.get("params") else None
    phi = np.asarray(meta["default_probs"]) if meta.get("default_probs") is not None else None
    times = np.asarray(meta["times"]) if meta.get("times") is not None else None
    return CvaInstance(Q, V, meta["R"], meta["q_norm"], times, None, params, phi, meta.get("discounted", True))
