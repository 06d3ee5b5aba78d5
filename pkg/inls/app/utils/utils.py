import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, List, Sequence
import numpy as np
from pydantic import BaseModel
from app.schemas import ExperimentReport, GridSpec
from app.spectral import Trajectory

logger = logging.getLogger(__name__)

TRAJECTORY_DTYPE = "<f8"
TRAJECTORY_LAYOUT = "interleaved-re-im,row-major"


# Serialization


def to_jsonable(obj):
    """
    Convert nested values to plain JSON types.

    Fractions become "p/q" strings, pydantic models become dicts, numpy
    scalars become Python numbers and non-finite floats become None.
    """
    if isinstance(obj, BaseModel):
        return to_jsonable(obj.dict(by_alias=True))
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2)


def write_report(report: ExperimentReport, out_dir) -> Path:
    """
    Write report.json and timing.json into `out_dir`.

    The wall-clock runtime goes to timing.json only, so report.json is
    byte-identical across repeated runs with the same seed.

    :param report: ExperimentReport
    :param out_dir: output directory, created if missing

    :returns: path of report.json
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    path.write_text(dumps(report.dict(exclude={"runtime_ms"})) + "\n")
    timing = {"experiment": report.experiment, "runtime_ms": report.runtime_ms}
    (out / "timing.json").write_text(dumps(timing) + "\n")
    logger.info("Wrote %s", path)
    return path


def write_csv(path, columns: Sequence[str], rows: Iterable[dict]) -> Path:
    """
    Write rows with a fixed column order. Missing entries are left blank.

    :param path: output file
    :param columns: header, in order
    :param rows: dicts keyed by column name

    :returns: Path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(
            f, fieldnames=list(columns), extrasaction="ignore", restval=""
        )
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {
                    k: "" if v is None else v
                    for k, v in to_jsonable(row).items()
                }
            )
    return path


def read_csv(path) -> List[dict]:
    with Path(path).open(newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


# Trajectory dump


def dump_trajectory(traj: Trajectory, path) -> Path:
    """
    Binary dump: one JSON header line, then every snapshot as little-endian
    float64 with real and imaginary parts interleaved, row-major.

    :param traj: Trajectory
    :param path: output file

    :returns: Path
    """
    grid = traj.grid
    header = {
        "dimension": grid.dimension,
        "points_per_axis": grid.points_per_axis,
        "half_length": grid.half_length,
        "times": traj.times,
        "shape": [len(traj.times), *grid.shape],
        "dtype": TRAJECTORY_DTYPE,
        "layout": TRAJECTORY_LAYOUT,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(traj.values, dtype="<c16")
    with path.open("wb") as f:
        f.write(json.dumps(to_jsonable(header), sort_keys=True).encode())
        f.write(b"\n")
        f.write(data.tobytes(order="C"))
    return path


def read_trajectory(path) -> Trajectory:
    """
    Inverse of dump_trajectory.

    :raises: ValueError if the header does not describe the payload.
    """
    raw = Path(path).read_bytes()
    line, _, payload = raw.partition(b"\n")
    header = json.loads(line)
    if header.get("dtype") != TRAJECTORY_DTYPE:
        raise ValueError(f"Unsupported trajectory dtype {header.get('dtype')}")
    grid = GridSpec(
        dimension=header["dimension"],
        points_per_axis=header["points_per_axis"],
        half_length=header["half_length"],
    )
    shape = tuple(header["shape"])
    values = np.frombuffer(payload, dtype="<c16")
    if values.size != int(np.prod(shape)):
        raise ValueError("Trajectory payload does not match its header")
    return Trajectory(
        grid=grid,
        times=np.asarray(header["times"], dtype=float),
        values=values.reshape(shape).astype(complex),
    )


# Seeding and fan-out


def spawn_seeds(seed: int, n: int) -> List[np.random.SeedSequence]:
    """
    n independent child seeds of `seed`. A generator built from the same
    child always replays the same stream.
    """
    return np.random.SeedSequence(seed).spawn(n)


def spawn_generators(seed: int, n: int) -> List[np.random.Generator]:
    return [np.random.default_rng(child) for child in spawn_seeds(seed, n)]


def run_parallel(func: Callable, items: Sequence, workers: int = 1) -> list:
    """
    Map `func` over `items` on a thread pool. Results keep the order of
    `items` whatever the completion order.
    """
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
