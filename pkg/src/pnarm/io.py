"""File formats: counts/edges/population CSVs, JSON-lines draws, reports.

Counts CSV: header row ``node`` followed by time labels; one row per node,
first column the node id, remaining cells nonnegative integers. Edge list
CSV: header plus two node-id columns, undirected, duplicates collapsed.
Population CSV: header plus ``node,population`` rows. Draws are stored as
line-delimited JSON so long runs can be streamed and inspected.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .graph import Network
from .mcmc import AcceptanceStats, PosteriorSamples


class DataFormatError(Exception):
    """An input file exists but cannot be parsed as its schema."""


class ArtifactMismatchError(Exception):
    """Samples and data files that are supposed to match do not."""


def read_counts_csv(path) -> tuple[list[str], list[str], np.ndarray]:
    """Read a counts CSV; returns (node ids, time labels, (N, T) int matrix)."""
    rows = _read_rows(path)
    if len(rows) < 2:
        raise DataFormatError(f"{path}: need a header row and at least one node row")
    header = rows[0]
    if len(header) < 2:
        raise DataFormatError(f"{path}: need at least one time column")
    time_labels = [h.strip() for h in header[1:]]
    node_ids = []
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataFormatError(
                f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}"
            )
        node_ids.append(row[0].strip())
        try:
            vals = [int(cell) for cell in row[1:]]
        except ValueError as exc:
            raise DataFormatError(f"{path}:{lineno}: non-integer count cell: {exc}") from exc
        if any(v < 0 for v in vals):
            raise DataFormatError(f"{path}:{lineno}: negative count")
        data.append(vals)
    if len(set(node_ids)) != len(node_ids):
        raise DataFormatError(f"{path}: duplicate node ids")
    return node_ids, time_labels, np.asarray(data, dtype=np.int64)


def write_counts_csv(path, node_ids, counts: np.ndarray, time_labels=None):
    counts = np.asarray(counts)
    if time_labels is None:
        time_labels = [str(t + 1) for t in range(counts.shape[1])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", *time_labels])
        for node, row in zip(node_ids, counts):
            writer.writerow([node, *[int(v) for v in row]])


def read_edges_csv(path) -> list[tuple[str, str]]:
    """Read an undirected edge list; self-loops rejected, duplicates collapsed."""
    rows = _read_rows(path)
    if not rows:
        raise DataFormatError(f"{path}: empty edge file")
    edges = []
    seen = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) < 2:
            raise DataFormatError(f"{path}:{lineno}: expected two node columns")
        a, b = row[0].strip(), row[1].strip()
        if a == b:
            raise DataFormatError(f"{path}:{lineno}: self-loop on {a!r}")
        key = (min(a, b), max(a, b))
        if key in seen:
            continue
        seen.add(key)
        edges.append(key)
    return edges


def read_population_csv(path) -> dict[str, float]:
    rows = _read_rows(path)
    if len(rows) < 2:
        raise DataFormatError(f"{path}: need header and at least one row")
    out: dict[str, float] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) < 2:
            raise DataFormatError(f"{path}:{lineno}: expected node,population")
        node = row[0].strip()
        try:
            pop = float(row[1])
        except ValueError as exc:
            raise DataFormatError(f"{path}:{lineno}: bad population: {exc}") from exc
        if pop <= 0:
            raise DataFormatError(f"{path}:{lineno}: population must be positive")
        if node in out:
            raise DataFormatError(f"{path}:{lineno}: duplicate node {node!r}")
        out[node] = pop
    return out


def build_network(
    node_ids: list[str],
    edges: list[tuple[str, str]],
    population: dict[str, float] | None = None,
) -> Network:
    """Assemble a Network from parsed files, validating id cross-references."""
    index = {node: i for i, node in enumerate(node_ids)}
    n = len(node_ids)
    adj = np.zeros((n, n), dtype=bool)
    for a, b in edges:
        if a not in index or b not in index:
            missing = a if a not in index else b
            raise DataFormatError(f"edge references unknown node {missing!r}")
        adj[index[a], index[b]] = True
        adj[index[b], index[a]] = True
    pop_arr = None
    if population is not None:
        missing = [node for node in node_ids if node not in population]
        if missing:
            raise DataFormatError(f"population missing for nodes {missing}")
        pop_arr = np.array([population[node] for node in node_ids], dtype=float)
    return Network(node_ids=list(node_ids), adjacency=adj, population=pop_arr)


def write_draws_jsonl(path, samples: PosteriorSamples):
    """One JSON record per retained draw: labels, per-cluster triples, log post."""
    with open(path, "w") as fh:
        for m in range(samples.m):
            rec = {
                "draw": m,
                "labels": samples.labels[m].tolist(),
                "thetas": samples.thetas[m].tolist(),
                "log_post": float(samples.log_posts[m]),
            }
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_draws_jsonl(path, acceptance: AcceptanceStats | None = None) -> PosteriorSamples:
    labels = []
    thetas = []
    log_posts = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                labels.append(rec["labels"])
                thetas.append(np.asarray(rec["thetas"], dtype=float))
                log_posts.append(float(rec["log_post"]))
            except (KeyError, ValueError, TypeError) as exc:
                raise DataFormatError(f"{path}:{lineno}: bad draw record: {exc}") from exc
    if not labels:
        raise DataFormatError(f"{path}: no draw records")
    widths = {len(row) for row in labels}
    if len(widths) != 1:
        raise DataFormatError(f"{path}: inconsistent label lengths {sorted(widths)}")
    return PosteriorSamples(
        labels=np.asarray(labels, dtype=np.int64),
        thetas=thetas,
        log_posts=np.asarray(log_posts),
        acceptance=acceptance or AcceptanceStats(proposed=0, accepted=0),
    )


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_matrix_csv(path, node_ids, matrix: np.ndarray, fmt: str = "%.10g"):
    """Square matrix with node-id row and column labels."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", *node_ids])
        for node, row in zip(node_ids, np.asarray(matrix)):
            writer.writerow([node, *[fmt % v for v in row]])


def write_table_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _read_rows(path) -> list[list[str]]:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with open(p, newline="") as fh:
        return [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]
