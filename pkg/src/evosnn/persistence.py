"""Bit-exact file formats for networks, ensembles, datasets, and reports.

Structured artifacts are canonical JSON: keys sorted, two-space indent,
one trailing newline, neurons and synapses in their normalized order.
Byte equality of two network files is therefore exactly semantic
equality of (network, encoder, provenance).  Tabular artifacts (runs,
ROC sweeps, histories, traces) are plain CSV.  All load errors raise
FormatError with enough context to name the offending file and field.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoding import EncoderSpec, VariableRange
from .ensemble import Ensemble, EnsembleMember
from .evolution import EpochStats, ScoredNetwork
from .inference import Dataset, Run, StepTrace
from .metrics import RocCurve
from .network import Network, Neuron, Synapse, check_valid, validate

NETWORK_FORMAT_VERSION = 1
DATASET_FORMAT_VERSION = 1
ENSEMBLE_FORMAT_VERSION = 1
POPULATION_FORMAT_VERSION = 1

_RUN_FILE_RE = re.compile(r"^[A-Za-z0-9._-]+$")


class FormatError(ValueError):
    """A file does not conform to its declared format."""


def _dump_canonical(obj, path: Path) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n")


def _load_json(path: Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise FormatError(f"{path}: {e.strerror or e}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(
            f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None
    if not isinstance(obj, dict):
        raise FormatError(f"{path}: top level is not an object")
    return obj


def _check_header(obj: dict, where: str, fmt: str, version: int) -> None:
    got = obj.get("format")
    if got != fmt:
        raise FormatError(f"{where}: not a {fmt} file (format={got!r})")
    got_v = obj.get("format_version")
    if got_v != version:
        raise FormatError(
            f"{where}: unsupported {fmt} format version {got_v!r}")


def _field(obj: dict, key: str, kinds, where: str):
    if key not in obj:
        raise FormatError(f"{where}: missing field {key!r}")
    value = obj[key]
    # bool passes isinstance checks against int; only accept it when asked for
    wants_bool = kinds is bool or (isinstance(kinds, tuple) and bool in kinds)
    if not isinstance(value, kinds) or (isinstance(value, bool) and not wants_bool):
        raise FormatError(f"{where}: field {key!r} has the wrong type")
    return value


def _int_field(obj: dict, key: str, where: str) -> int:
    return _field(obj, key, int, where)


# --- networks ---------------------------------------------------------------


@dataclass
class NetworkFile:
    """A loaded network plus its embedded encoder and provenance."""

    network: Network
    encoder: EncoderSpec | None
    provenance: dict | None


def encoder_to_dict(spec: EncoderSpec) -> dict:
    return {
        "scheme": spec.scheme,
        "tau": spec.tau,
        "bins_per_variable": spec.bins_per_variable,
        "flip_flop": spec.flip_flop,
        "ranges": [{"min": r.min, "max": r.max} for r in spec.ranges],
    }


def encoder_from_dict(obj: dict, where: str) -> EncoderSpec:
    ranges = _field(obj, "ranges", list, where)
    try:
        return EncoderSpec(
            scheme=_field(obj, "scheme", str, where),
            tau=_int_field(obj, "tau", where),
            bins_per_variable=_int_field(obj, "bins_per_variable", where),
            flip_flop=_field(obj, "flip_flop", bool, f"{where}"),
            ranges=tuple(
                VariableRange(_field(r, "min", (int, float), where),
                              _field(r, "max", (int, float), where))
                for r in ranges),
        )
    except FormatError:
        raise
    except (ValueError, TypeError, AttributeError) as e:
        raise FormatError(f"{where}: bad encoder ({e})") from None


def network_to_dict(network: Network) -> dict:
    return {
        "neurons": [{"id": n.id, "kind": n.kind, "threshold": n.threshold,
                     "axon_delay": n.axon_delay} for n in network.neurons],
        "synapses": [{"pre": s.pre, "post": s.post, "weight": s.weight}
                     for s in network.synapses],
        "input_order": list(network.input_order),
        "output": network.output,
    }


def network_from_dict(obj: dict, where: str) -> Network:
    neurons = []
    for i, rec in enumerate(_field(obj, "neurons", list, where)):
        if not isinstance(rec, dict):
            raise FormatError(f"{where}: neuron {i} is not an object")
        at = f"{where}: neuron {i}"
        neurons.append(Neuron(id=_int_field(rec, "id", at),
                              threshold=_int_field(rec, "threshold", at),
                              axon_delay=_int_field(rec, "axon_delay", at),
                              kind=_field(rec, "kind", str, at)))
    synapses = []
    for i, rec in enumerate(_field(obj, "synapses", list, where)):
        if not isinstance(rec, dict):
            raise FormatError(f"{where}: synapse {i} is not an object")
        at = f"{where}: synapse {i}"
        synapses.append(Synapse(pre=_int_field(rec, "pre", at),
                                post=_int_field(rec, "post", at),
                                weight=_int_field(rec, "weight", at)))
    order = _field(obj, "input_order", list, where)
    if not all(isinstance(i, int) and not isinstance(i, bool) for i in order):
        raise FormatError(f"{where}: input_order must hold integers")
    network = Network(neurons=neurons, synapses=synapses,
                      input_order=list(order),
                      output=_int_field(obj, "output", where))
    violations = validate(network)
    if violations:
        raise FormatError(f"{where}: " + "; ".join(violations))
    return network


def save_network(network: Network, path, encoder: EncoderSpec | None = None,
                 provenance: dict | None = None) -> None:
    check_valid(network)
    obj = {
        "format": "network",
        "format_version": NETWORK_FORMAT_VERSION,
        **network_to_dict(network),
        "encoder": None if encoder is None else encoder_to_dict(encoder),
        "provenance": provenance,
    }
    _dump_canonical(obj, path)


def load_network(path) -> NetworkFile:
    where = str(path)
    obj = _load_json(path)
    _check_header(obj, where, "network", NETWORK_FORMAT_VERSION)
    network = network_from_dict(obj, where)
    enc = obj.get("encoder")
    encoder = None if enc is None else encoder_from_dict(enc, where)
    provenance = obj.get("provenance")
    if provenance is not None and not isinstance(provenance, dict):
        raise FormatError(f"{where}: provenance must be an object")
    return NetworkFile(network=network, encoder=encoder, provenance=provenance)


# --- datasets ---------------------------------------------------------------


def _run_file_name(run: Run, index: int) -> str:
    name = run.id if run.id else f"run-{index:03d}"
    if not _RUN_FILE_RE.match(name):
        raise FormatError(f"run id {name!r} is not usable as a file name")
    return f"{name}.csv"


def _format_value(v: float) -> str:
    f = float(v)
    return str(int(f)) if f == int(f) else repr(f)


def save_dataset(dataset: Dataset, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    n = dataset.n_variables
    index = []
    seen = set()
    for i, run in enumerate(dataset.runs):
        if run.n_variables != n:
            raise FormatError(
                f"run {run.id!r} has {run.n_variables} variables, dataset has {n}")
        fname = _run_file_name(run, i)
        if fname in seen:
            raise FormatError(f"duplicate run file name {fname!r}")
        seen.add(fname)
        index.append({
            "file": fname,
            "id": run.id if run.id else fname[:-4],
            "n_steps": run.n_steps,
            "n_positive": int(np.count_nonzero(run.labels)),
            "snr": run.snr,
        })
        header = "t," + ",".join(f"x_{v + 1}" for v in range(n)) + ",label"
        lines = [header]
        for t in range(run.n_steps):
            cells = [str(t)]
            cells += [_format_value(x) for x in run.observations[t]]
            cells.append(str(int(run.labels[t])))
            lines.append(",".join(cells))
        (directory / fname).write_text("\n".join(lines) + "\n")
    manifest = {
        "format": "dataset",
        "format_version": DATASET_FORMAT_VERSION,
        "n_variables": n,
        "stride_seconds": dataset.stride_seconds,
        "ranges": [{"min": r.min, "max": r.max} for r in dataset.ranges],
        "runs": index,
    }
    _dump_canonical(manifest, directory / "manifest.json")


def _parse_run_csv(path: Path, n_variables: int, stride_seconds: float,
                   run_id: str, snr) -> Run:
    where = str(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as e:
        raise FormatError(f"{where}: {e.strerror or e}") from None
    if not lines:
        raise FormatError(f"{where}: empty run file")
    expected_header = ("t," + ",".join(f"x_{v + 1}"
                                       for v in range(n_variables)) + ",label")
    if lines[0] != expected_header:
        raise FormatError(
            f"{where}: header {lines[0]!r} does not match the manifest's "
            f"{n_variables} variables")
    observations = []
    labels = []
    last_t = None
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != n_variables + 2:
            raise FormatError(
                f"{where}: line {lineno}: expected {n_variables + 2} columns, "
                f"got {len(cells)}")
        try:
            t = int(cells[0])
            values = [float(c) for c in cells[1:-1]]
            label = int(cells[-1])
        except ValueError:
            raise FormatError(f"{where}: line {lineno}: unparseable cell") from None
        if last_t is not None and t <= last_t:
            raise FormatError(f"{where}: line {lineno}: non-monotone t")
        last_t = t
        if not all(np.isfinite(values)):
            raise FormatError(f"{where}: line {lineno}: non-finite value")
        if label not in (0, 1):
            raise FormatError(
                f"{where}: line {lineno}: label outside {{0, 1}}: {label}")
        observations.append(values)
        labels.append(label)
    if not observations:
        raise FormatError(f"{where}: run has no steps")
    return Run(observations=np.asarray(observations),
               labels=np.asarray(labels), stride_seconds=stride_seconds,
               id=run_id, snr=snr)


def load_run(path, n_variables: int, stride_seconds: float = 1.0,
             run_id: str = "", snr: float | None = None) -> Run:
    """Load one standalone run CSV (same layout as dataset run files)."""
    return _parse_run_csv(Path(path), n_variables, stride_seconds, run_id, snr)


def load_dataset(directory) -> Dataset:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    where = str(manifest_path)
    obj = _load_json(manifest_path)
    _check_header(obj, where, "dataset", DATASET_FORMAT_VERSION)
    n = _int_field(obj, "n_variables", where)
    stride = float(_field(obj, "stride_seconds", (int, float), where))
    try:
        ranges = tuple(
            VariableRange(_field(r, "min", (int, float), where),
                          _field(r, "max", (int, float), where))
            for r in _field(obj, "ranges", list, where))
    except FormatError:
        raise
    except (ValueError, TypeError, AttributeError) as e:
        raise FormatError(f"{where}: bad ranges ({e})") from None
    if len(ranges) != n:
        raise FormatError(f"{where}: {len(ranges)} ranges for {n} variables")
    runs = []
    for i, rec in enumerate(_field(obj, "runs", list, where)):
        if not isinstance(rec, dict):
            raise FormatError(f"{where}: run entry {i} is not an object")
        at = f"{where}: run entry {i}"
        fname = _field(rec, "file", str, at)
        snr = rec.get("snr")
        if snr is not None:
            snr = float(_field(rec, "snr", (int, float), at))
        runs.append(_parse_run_csv(directory / fname, n, stride,
                                   _field(rec, "id", str, at), snr))
    return Dataset(runs=runs, ranges=ranges, stride_seconds=stride)


# --- ensembles --------------------------------------------------------------


def save_ensemble(ensemble: Ensemble, path,
                  encoder: EncoderSpec | None = None) -> None:
    """Write the ensemble file plus one network file per member.

    Member files land in a sibling directory named after the ensemble
    file; the ensemble file references them by relative path.
    """
    path = Path(path)
    member_dir = path.parent / (path.stem + "_members")
    member_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for i, member in enumerate(ensemble.members):
        rel = f"{member_dir.name}/member-{i}.json"
        save_network(member.network, member_dir / f"member-{i}.json",
                     encoder=encoder)
        records.append({"file": rel, "theta": member.theta})
    obj = {
        "format": "ensemble",
        "format_version": ENSEMBLE_FORMAT_VERSION,
        "vote": ensemble.vote,
        "members": records,
    }
    _dump_canonical(obj, path)


def load_ensemble(path) -> tuple[Ensemble, EncoderSpec | None]:
    path = Path(path)
    where = str(path)
    obj = _load_json(path)
    _check_header(obj, where, "ensemble", ENSEMBLE_FORMAT_VERSION)
    vote = _field(obj, "vote", str, where)
    members = []
    encoders = []
    for i, rec in enumerate(_field(obj, "members", list, where)):
        if not isinstance(rec, dict):
            raise FormatError(f"{where}: member {i} is not an object")
        at = f"{where}: member {i}"
        loaded = load_network(path.parent / _field(rec, "file", str, at))
        theta = _int_field(rec, "theta", at)
        if theta < 0:
            raise FormatError(f"{at}: negative theta")
        members.append(EnsembleMember(network=loaded.network, theta=theta))
        encoders.append(loaded.encoder)
    for enc in encoders[1:]:
        if enc != encoders[0]:
            raise FormatError(f"{where}: members disagree on the encoder")
    try:
        ensemble = Ensemble(members=members, vote=vote)
    except ValueError as e:
        raise FormatError(f"{where}: {e}") from None
    return ensemble, encoders[0] if encoders else None


# --- populations ------------------------------------------------------------


@dataclass
class PopulationFile:
    members: list[ScoredNetwork]
    encoder: EncoderSpec | None
    epoch: int | None


def save_population(scored, path, encoder: EncoderSpec | None = None,
                    epoch: int | None = None) -> None:
    records = []
    for s in scored:
        records.append({
            "fitness": s.fitness,
            "metrics": dict(s.metrics),
            "network": network_to_dict(s.network),
        })
    obj = {
        "format": "population",
        "format_version": POPULATION_FORMAT_VERSION,
        "epoch": epoch,
        "encoder": None if encoder is None else encoder_to_dict(encoder),
        "members": records,
    }
    _dump_canonical(obj, path)


def load_population(path) -> PopulationFile:
    where = str(path)
    obj = _load_json(path)
    _check_header(obj, where, "population", POPULATION_FORMAT_VERSION)
    members = []
    for i, rec in enumerate(_field(obj, "members", list, where)):
        if not isinstance(rec, dict):
            raise FormatError(f"{where}: member {i} is not an object")
        at = f"{where}: member {i}"
        metrics = _field(rec, "metrics", dict, at)
        members.append(ScoredNetwork(
            network=network_from_dict(_field(rec, "network", dict, at), at),
            fitness=float(_field(rec, "fitness", (int, float), at)),
            metrics={str(k): float(v) for k, v in metrics.items()}))
    enc = obj.get("encoder")
    encoder = None if enc is None else encoder_from_dict(enc, where)
    epoch = obj.get("epoch")
    if epoch is not None and not isinstance(epoch, int):
        raise FormatError(f"{where}: epoch must be an integer")
    return PopulationFile(members=members, encoder=encoder, epoch=epoch)


# --- tabular writers --------------------------------------------------------


def write_roc_csv(roc: RocCurve, path) -> None:
    lines = ["theta,far_per_hour,tpr"]
    for p in roc.points:
        lines.append(f"{p.theta},{repr(p.far_per_hour)},{repr(p.tpr)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_history_csv(history: list[EpochStats], path) -> None:
    lines = ["epoch,best_fitness,mean_fitness,best_neurons,best_synapses"]
    for st in history:
        lines.append(f"{st.epoch},{repr(st.best_fitness)},"
                     f"{repr(st.mean_fitness)},{st.best_neurons},"
                     f"{st.best_synapses}")
    Path(path).write_text("\n".join(lines) + "\n")


def format_trace_csv(traces: list[StepTrace], runs) -> str:
    lines = ["run_id,t,z,y,label"]
    for trace, run in zip(traces, runs):
        rid = trace.run_id or run.id
        for t in range(len(trace.z)):
            lines.append(f"{rid},{t},{int(trace.z[t])},{int(trace.y[t])},"
                         f"{int(run.labels[t])}")
    return "\n".join(lines) + "\n"


def write_trace_csv(traces: list[StepTrace], runs, path) -> None:
    Path(path).write_text(format_trace_csv(traces, runs))


def write_raster_csv(raster, path) -> None:
    lines = ["neuron_id,cycle"]
    for nid in sorted(raster.fired):
        for cycle in raster.fired[nid]:
            lines.append(f"{nid},{cycle}")
    Path(path).write_text("\n".join(lines) + "\n")


def format_report(fields: dict) -> str:
    """Render a report as aligned `key: value` lines."""
    return "\n".join(f"{k}: {v}" for k, v in fields.items()) + "\n"
