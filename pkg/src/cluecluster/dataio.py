"""File formats: dataset directories, checkpoints, assignments, tables.

Dataset directory: one text file per modality (face.txt, body.txt,
voice.txt), one record per clue: clue_id, track_id, identity (-1 when
unknown), then the feature floats, all space-separated; manifest.json
records the feature width per modality and the counts.

Checkpoint: 8-byte magic, little-endian uint32 header length, UTF-8 JSON
header (format version, config echo, sizes, named array directory), then
every array's float64 bytes little-endian C-order, concatenated in
directory order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .blocks import PhiParams, SigmaParams
from .config import RunConfig, config_from_dict
from .errors import InvalidInput, IoError
from .graph import MODALITIES, Clue, Modality, Track
from .optim import AdamState
from .synth import Dataset
from .training import ModelParams, params_to_dict

MANIFEST_NAME = "manifest.json"
MODALITY_FILES = {
    Modality.FACE: "face.txt",
    Modality.BODY: "body.txt",
    Modality.VOICE: "voice.txt",
}
DATASET_FORMAT_VERSION = 1
CHECKPOINT_MAGIC = b"CLUECKPT"
CHECKPOINT_FORMAT_VERSION = 1


def _fmt(x: float) -> str:
    # repr of a Python float is the shortest digit string that parses back
    # to the same bits
    return repr(float(x))


# ------------------------------------------------------------------ dataset


def write_dataset(ds: Dataset, outdir) -> None:
    out = Path(outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from None
    counts = {}
    try:
        for m in MODALITIES:
            lines = []
            for t in ds.tracks:
                for c in t.clues[m]:
                    ident = -1 if c.identity is None else c.identity
                    feats = " ".join(_fmt(v) for v in c.feature)
                    lines.append(f"{c.clue_id} {c.track_id} {ident} {feats}\n")
            counts[m.name.lower()] = len(lines)
            (out / MODALITY_FILES[m]).write_text("".join(lines), encoding="ascii")
        manifest = {
            "format_version": DATASET_FORMAT_VERSION,
            "feat_dim": {m.name.lower(): ds.feat_dim for m in MODALITIES},
            "n_tracks": ds.n_tracks,
            "n_identities": ds.n_identities,
            "counts": counts,
        }
        (out / MANIFEST_NAME).write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="ascii"
        )
    except OSError as exc:
        raise IoError(f"cannot write dataset to {out}: {exc}") from None


def read_dataset(indir) -> Dataset:
    src = Path(indir)
    manifest_path = src / MANIFEST_NAME
    try:
        manifest = json.loads(manifest_path.read_text(encoding="ascii"))
    except OSError as exc:
        raise IoError(f"cannot read {manifest_path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"manifest is not valid JSON: {exc}") from None
    dims = manifest.get("feat_dim", {})
    widths = {dims.get(m.name.lower()) for m in MODALITIES if m.name.lower() in dims}
    if len(widths) != 1:
        raise InvalidInput("this pipeline requires one shared feature width")
    feat_dim = widths.pop()
    clues_by_track: dict[int, dict[Modality, list[Clue]]] = {}
    for m in MODALITIES:
        path = src / MODALITY_FILES[m]
        if not path.exists():
            continue
        try:
            text = path.read_text(encoding="ascii")
        except OSError as exc:
            raise IoError(f"cannot read {path}: {exc}") from None
        for ln, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3 + feat_dim:
                raise InvalidInput(
                    f"{path.name}:{ln}: expected {3 + feat_dim} fields, got {len(parts)}"
                )
            try:
                clue_id, track_id, ident = (int(p) for p in parts[:3])
                feat = np.array([float(p) for p in parts[3:]])
            except ValueError as exc:
                raise InvalidInput(f"{path.name}:{ln}: {exc}") from None
            clue = Clue(
                clue_id=clue_id,
                track_id=track_id,
                modality=m,
                feature=feat,
                identity=None if ident < 0 else ident,
            )
            clues_by_track.setdefault(track_id, {m2: [] for m2 in MODALITIES})[
                m
            ].append(clue)
    if not clues_by_track:
        raise InvalidInput(f"no clues found under {src}")
    tracks = []
    for tid in sorted(clues_by_track):
        per_mod = {
            m: sorted(clues_by_track[tid][m], key=lambda c: c.clue_id)
            for m in MODALITIES
        }
        tracks.append(Track(track_id=tid, clues=per_mod))
    idents = {t.identity() for t in tracks if t.identity() is not None}
    return Dataset(
        tracks=tracks,
        feat_dim=feat_dim,
        n_identities=manifest.get("n_identities", len(idents)),
    )


# --------------------------------------------------------------- checkpoint


def write_checkpoint(
    path, cfg: RunConfig, model: ModelParams, adam: AdamState | None = None
) -> None:
    arrays = dict(params_to_dict(model))
    adam_step = 0
    if adam is not None:
        adam_step = adam.step
        for name, arr in adam.m.items():
            arrays[f"adam.m.{name}"] = arr
        for name, arr in adam.v.items():
            arrays[f"adam.v.{name}"] = arr
    order = sorted(arrays)
    header = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": cfg.to_dict(),
        "n_input": model.n_input,
        "feat_dim": model.feat_dim,
        "cycles": model.cycles,
        "hidden": model.hidden,
        "adam_step": adam_step,
        "arrays": [
            {"name": n, "shape": list(arrays[n].shape)} for n in order
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            for n in order:
                fh.write(np.ascontiguousarray(arrays[n], dtype="<f8").tobytes("C"))
    except OSError as exc:
        raise IoError(f"cannot write checkpoint {path}: {exc}") from None


def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read checkpoint {path}: {exc}") from None
    if raw[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise IoError(f"{path} is not a checkpoint (bad magic)")
    off = len(CHECKPOINT_MAGIC)
    (hlen,) = struct.unpack_from("<I", raw, off)
    off += 4
    try:
        header = json.loads(raw[off : off + hlen].decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise IoError(f"{path}: corrupt header: {exc}") from None
    off += hlen
    if header.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise IoError(f"{path}: unsupported format version")
    arrays: dict[str, np.ndarray] = {}
    for ent in header["arrays"]:
        shape = tuple(ent["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if off + nbytes > len(raw):
            raise IoError(f"{path}: truncated array {ent['name']}")
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=off)
        arrays[ent["name"]] = arr.reshape(shape).astype(np.float64)
        off += nbytes
    if off != len(raw):
        raise IoError(f"{path}: trailing bytes after arrays")
    return header, arrays


def checkpoint_config(header: dict) -> RunConfig:
    return config_from_dict(header["config"])


def model_from_checkpoint(header: dict, arrays: dict[str, np.ndarray]) -> ModelParams:
    cycles = header["cycles"]
    sigmas = []
    phis = []
    try:
        for l in range(1, cycles + 1):
            sigmas.append(
                SigmaParams(
                    W1=arrays[f"sigma.{l}.W1"].copy(),
                    b1=arrays[f"sigma.{l}.b1"].copy(),
                    W2=arrays[f"sigma.{l}.W2"].copy(),
                    b2=arrays[f"sigma.{l}.b2"].copy(),
                )
            )
            per_mod = {}
            for m in MODALITIES:
                key = f"phi.{l}.{m.name.lower()}"
                per_mod[m] = PhiParams(
                    Wt=arrays[f"{key}.Wt"].copy(),
                    bt=arrays[f"{key}.bt"].copy(),
                    Wg=arrays[f"{key}.Wg"].copy(),
                    bg=arrays[f"{key}.bg"].copy(),
                )
            phis.append(per_mod)
    except KeyError as exc:
        raise IoError(f"checkpoint is missing array {exc}") from None
    return ModelParams(
        n_input=header["n_input"],
        feat_dim=header["feat_dim"],
        cycles=cycles,
        hidden=header["hidden"],
        sigmas=sigmas,
        phis=phis,
    )


def adam_from_checkpoint(
    header: dict, arrays: dict[str, np.ndarray], lr: float
) -> AdamState:
    state = AdamState(lr=lr)
    state.step = header.get("adam_step", 0)
    for name, arr in arrays.items():
        if name.startswith("adam.m."):
            state.m[name[len("adam.m.") :]] = arr.copy()
        elif name.startswith("adam.v."):
            state.v[name[len("adam.v.") :]] = arr.copy()
    return state


# ------------------------------------------------------- delimited outputs


def write_table(path, header: list[str], rows: list[list]) -> None:
    """CSV with '.' decimal floats, comma separator, one header row."""
    lines = [",".join(header)]
    for row in rows:
        cells = [_fmt(v) if isinstance(v, float) else str(v) for v in row]
        lines.append(",".join(cells))
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def read_table(path) -> tuple[list[str], list[list[str]]]:
    try:
        text = Path(path).read_text(encoding="ascii")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InvalidInput(f"{path} is empty")
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


def write_assignment(path, assignment: dict[int, int]) -> None:
    rows = [[tid, assignment[tid]] for tid in sorted(assignment)]
    write_table(path, ["track_id", "cluster_id"], rows)


def read_assignment(path) -> dict[int, int]:
    header, rows = read_table(path)
    if header != ["track_id", "cluster_id"]:
        raise InvalidInput(f"{path}: unexpected header {header}")
    out = {}
    for row in rows:
        tid, cid = int(row[0]), int(row[1])
        if tid in out:
            raise InvalidInput(f"{path}: duplicate track {tid}")
        out[tid] = cid
    return out


def write_metrics_report(path, metrics: dict[str, float]) -> None:
    write_table(path, ["metric", "value"], [[k, float(v)] for k, v in metrics.items()])
