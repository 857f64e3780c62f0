"""Synthetic population generators, IDX ingestion, and population snapshots.

Generators are pure functions of (spec, seed). Hidden truths (the global and
per-client parameters behind the synthetic data) live on the Population
object, not on client datasets, so training code paths never see them; only
the evaluation helpers in `simulate` read them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .config import PoolSpec, PopulationKind, PopulationSpec
from .models import (
    ClientRecord,
    LabeledExamples,
    LocalDataset,
    LossKind,
    PointSamples,
    RegressionSamples,
)
from .rng import stream


class IdxParseError(ValueError):
    pass


@dataclass
class Population:
    kind: LossKind
    clients: List[ClientRecord]
    dim: int  # model dimension
    n_classes: int = 0
    truth_global: Optional[np.ndarray] = None
    truth_clients: Optional[List[np.ndarray]] = None
    client_tests: Optional[List[LabeledExamples]] = None
    server_test: Optional[LabeledExamples] = None


def _privacy_flags(n: int, n_np: int, rng: np.random.Generator) -> np.ndarray:
    """Fixed random opt-out assignment: True where the client stays private."""
    flags = np.ones(n, dtype=bool)
    flags[rng.permutation(n)[:n_np]] = False
    return flags


def gen_point_population(spec: PopulationSpec) -> Population:
    if spec.kind is not PopulationKind.POINT_ESTIMATION:
        raise ValueError("spec kind must be point_estimation")
    rng = stream(spec.seed, "population")
    n, n_s, d = spec.n_clients, spec.samples_per_client, spec.d
    phi = rng.normal(0.0, 1.0, d)
    phi_j = phi + rng.normal(0.0, np.sqrt(spec.tau2), (n, d))
    obs = phi_j[:, None, :] + rng.normal(0.0, np.sqrt(spec.beta2), (n, n_s, d))
    flags = _privacy_flags(n, spec.n_np, rng)
    clients = [
        ClientRecord(j, bool(flags[j]), PointSamples(obs[j, :, 0] if d == 1 else obs[j]))
        for j in range(n)
    ]
    return Population(
        kind=LossKind.POINT_ESTIMATION,
        clients=clients,
        dim=d,
        truth_global=phi,
        truth_clients=[phi_j[j] for j in range(n)],
    )


def gen_regression_population(spec: PopulationSpec) -> Population:
    if spec.kind is not PopulationKind.LINEAR_REGRESSION:
        raise ValueError("spec kind must be linear_regression")
    if spec.samples_per_client < spec.d:
        raise ValueError(
            f"infeasible design: need samples_per_client >= d, got "
            f"{spec.samples_per_client} < {spec.d}"
        )
    rng = stream(spec.seed, "population")
    n, n_s, d = spec.n_clients, spec.samples_per_client, spec.d
    phi = rng.normal(0.0, 1.0, d)
    phi_j = phi + rng.normal(0.0, np.sqrt(spec.tau2), (n, d))
    clients_data = []
    for j in range(n):
        # orthonormal columns scaled by sqrt(n_s) give F^T F = n_s I exactly
        q, rr = np.linalg.qr(rng.normal(size=(n_s, d)))
        q = q * np.sign(np.diag(rr))
        F = np.sqrt(n_s) * q
        x = F @ phi_j[j] + rng.normal(0.0, np.sqrt(spec.beta2), n_s)
        clients_data.append(RegressionSamples(F, x))
    flags = _privacy_flags(n, spec.n_np, rng)
    clients = [ClientRecord(j, bool(flags[j]), clients_data[j]) for j in range(n)]
    return Population(
        kind=LossKind.LINEAR_REGRESSION,
        clients=clients,
        dim=d,
        truth_global=phi,
        truth_clients=[phi_j[j] for j in range(n)],
    )


def gen_blob_pool(
    n_classes: int, per_class: int, dim: int, spread: float, seed: int
) -> LabeledExamples:
    """Gaussian class blobs: unit within-class noise around seeded centers."""
    rng = stream(seed, "pool")
    centers = rng.normal(0.0, spread, (n_classes, dim))
    labels = np.repeat(np.arange(n_classes), per_class)
    feats = centers[labels] + rng.normal(0.0, 1.0, (labels.size, dim))
    return LabeledExamples(feats, labels)


def gen_label_shard_population(spec: PopulationSpec, source: LabeledExamples) -> Population:
    """One label per client, drawn from the per-label subsets of ``source``.

    Each client's draw is split 80/20 into train/test; the server test set
    pools every client's test split. With a skew label set, all opted-out
    clients are drawn from the clients holding that label.
    """
    if spec.kind is not PopulationKind.LABEL_SHARD:
        raise ValueError("spec kind must be label_shard")
    rng = stream(spec.seed, "population")
    n, n_samp = spec.n_clients, spec.samples_per_client
    labels_present = np.unique(source.labels)
    by_label = {int(lab): np.flatnonzero(source.labels == lab) for lab in labels_present}
    for lab, idx in by_label.items():
        if idx.size < n_samp:
            raise ValueError(
                f"insufficient pool: label {lab} has {idx.size} examples, "
                f"need >= {n_samp} per client"
            )
    shard_labels = rng.choice(labels_present, size=n)
    n_test = max(1, round(0.2 * n_samp))
    train_sets, test_sets = [], []
    for j in range(n):
        picked = rng.choice(by_label[int(shard_labels[j])], size=n_samp, replace=False)
        train_idx, test_idx = picked[: n_samp - n_test], picked[n_samp - n_test :]
        train_sets.append(LabeledExamples(source.features[train_idx], source.labels[train_idx]))
        test_sets.append(LabeledExamples(source.features[test_idx], source.labels[test_idx]))

    if spec.skew_label is not None:
        candidates = np.flatnonzero(shard_labels == spec.skew_label)
        if candidates.size < spec.n_np:
            raise ValueError(
                f"only {candidates.size} clients hold skew label {spec.skew_label}, "
                f"need {spec.n_np} opted-out clients"
            )
        np_ids = rng.choice(candidates, size=spec.n_np, replace=False)
        flags = np.ones(n, dtype=bool)
        flags[np_ids] = False
    else:
        flags = _privacy_flags(n, spec.n_np, rng)

    clients = [ClientRecord(j, bool(flags[j]), train_sets[j]) for j in range(n)]
    n_classes = int(labels_present.max()) + 1
    server_test = LabeledExamples(
        np.concatenate([t.features for t in test_sets]),
        np.concatenate([t.labels for t in test_sets]),
    )
    return Population(
        kind=LossKind.SOFTMAX_CLASSIFICATION,
        clients=clients,
        dim=n_classes * (source.dim + 1),
        n_classes=n_classes,
        client_tests=test_sets,
        server_test=server_test,
    )


def build_population(spec: PopulationSpec) -> Population:
    if spec.kind is PopulationKind.POINT_ESTIMATION:
        return gen_point_population(spec)
    if spec.kind is PopulationKind.LINEAR_REGRESSION:
        return gen_regression_population(spec)
    pool = spec.pool or PoolSpec()
    if pool.idx_images is not None:
        source = load_idx_pair(pool.idx_images, pool.idx_labels)
    else:
        source = gen_blob_pool(
            pool.classes, pool.per_class, pool.feature_dim, pool.spread, spec.seed
        )
    return gen_label_shard_population(spec, source)


# --- IDX binary container -------------------------------------------------

_IDX_IMAGES_MAGIC = 0x00000803
_IDX_LABELS_MAGIC = 0x00000801


def _read_u32(data: bytes, offset: int, path: str) -> int:
    if len(data) < offset + 4:
        raise IdxParseError(f"{path}: truncated header at byte {len(data)}")
    return int.from_bytes(data[offset : offset + 4], "big")


def load_idx_images(path: str) -> np.ndarray:
    """Images from an IDX file as float rows in [0, 1], shape (n, rows*cols)."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic = _read_u32(data, 0, path)
    if magic != _IDX_IMAGES_MAGIC:
        raise IdxParseError(f"{path}: bad magic 0x{magic:08x} at byte 0")
    n = _read_u32(data, 4, path)
    rows = _read_u32(data, 8, path)
    cols = _read_u32(data, 12, path)
    expected = 16 + n * rows * cols
    if len(data) < expected:
        raise IdxParseError(
            f"{path}: truncated at byte {len(data)}, expected {expected} bytes"
        )
    pixels = np.frombuffer(data, dtype=np.uint8, count=n * rows * cols, offset=16)
    return pixels.reshape(n, rows * cols).astype(np.float64) / 255.0


def load_idx_labels(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    magic = _read_u32(data, 0, path)
    if magic != _IDX_LABELS_MAGIC:
        raise IdxParseError(f"{path}: bad magic 0x{magic:08x} at byte 0")
    n = _read_u32(data, 4, path)
    expected = 8 + n
    if len(data) < expected:
        raise IdxParseError(
            f"{path}: truncated at byte {len(data)}, expected {expected} bytes"
        )
    labels = np.frombuffer(data, dtype=np.uint8, count=n, offset=8).astype(np.int64)
    if labels.size and labels.max() > 9:
        raise IdxParseError(f"{path}: label {labels.max()} outside [0, 9]")
    return labels


def load_idx_pair(images_path: str, labels_path: str) -> LabeledExamples:
    images = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxParseError(
            f"image/label count mismatch: {images.shape[0]} images, {labels.size} labels"
        )
    return LabeledExamples(images, labels)


# --- population snapshots ---------------------------------------------------


def _dataset_to_obj(data: LocalDataset) -> dict:
    if isinstance(data, PointSamples):
        return {"type": "point", "observations": data.observations.tolist()}
    if isinstance(data, RegressionSamples):
        return {
            "type": "regression",
            "features": data.features.tolist(),
            "responses": data.responses.tolist(),
        }
    return {"type": "labeled", "features": data.features.tolist(), "labels": data.labels.tolist()}


def _dataset_from_obj(obj: dict) -> LocalDataset:
    if obj["type"] == "point":
        return PointSamples(np.array(obj["observations"]))
    if obj["type"] == "regression":
        return RegressionSamples(np.array(obj["features"]), np.array(obj["responses"]))
    return LabeledExamples(np.array(obj["features"]), np.array(obj["labels"], dtype=np.int64))


def population_to_json(pop: Population) -> str:
    """Snapshot a population (including the privacy split) for exact reuse."""
    obj = {
        "kind": pop.kind.value,
        "dim": pop.dim,
        "n_classes": pop.n_classes,
        "clients": [
            {"id": c.id, "is_private": c.is_private, "dataset": _dataset_to_obj(c.dataset)}
            for c in pop.clients
        ],
        "truth_global": None if pop.truth_global is None else pop.truth_global.tolist(),
        "truth_clients": None
        if pop.truth_clients is None
        else [t.tolist() for t in pop.truth_clients],
        "client_tests": None
        if pop.client_tests is None
        else [_dataset_to_obj(t) for t in pop.client_tests],
        "server_test": None if pop.server_test is None else _dataset_to_obj(pop.server_test),
    }
    return json.dumps(obj)


def population_from_json(blob: str) -> Population:
    obj = json.loads(blob)
    return Population(
        kind=LossKind(obj["kind"]),
        clients=[
            ClientRecord(c["id"], c["is_private"], _dataset_from_obj(c["dataset"]))
            for c in obj["clients"]
        ],
        dim=obj["dim"],
        n_classes=obj["n_classes"],
        truth_global=None if obj["truth_global"] is None else np.array(obj["truth_global"]),
        truth_clients=None
        if obj["truth_clients"] is None
        else [np.array(t) for t in obj["truth_clients"]],
        client_tests=None
        if obj["client_tests"] is None
        else [_dataset_from_obj(t) for t in obj["client_tests"]],
        server_test=None if obj["server_test"] is None else _dataset_from_obj(obj["server_test"]),
    )
