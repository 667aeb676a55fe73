"""Instance construction: WSC-challenge XML, network augmentation, synthetic
generation and the JSON instance bundle."""

from __future__ import annotations

import csv
import hashlib
import json
import xml.etree.ElementTree as ET
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .model import (
    DataItem,
    InstanceError,
    NetworkModel,
    ProblemInstance,
    Service,
    Task,
    Taxonomy,
)

SCHEMA = "dwsc-instance/1"

TIME_ATTRS = ("Res", "res", "responseTime", "ResponseTime", "time")
COST_ATTRS = ("Cost", "cost", "Price", "price")


class ParseError(InstanceError):
    pass


@dataclass(frozen=True)
class AugmentationParams:
    seed: int = 0
    data_size: float = 3.0
    bandwidth_mean: float = 0.5
    bandwidth_std: float = 0.15
    items_per_service: tuple[int, int] = (1, 1)
    coordinate_source: str = "synthetic-uniform"

    def __post_init__(self):
        if self.data_size <= 0:
            raise ValueError("data_size must be positive")
        if self.bandwidth_std <= 0:
            if not 0.0 < self.bandwidth_mean <= 1.0:
                raise ValueError("degenerate bandwidth distribution outside (0, 1]")
        elif _unit_mass(self.bandwidth_mean, self.bandwidth_std) < 1e-3:
            raise ValueError("bandwidth distribution puts almost no mass on (0, 1]")
        lo, hi = self.items_per_service
        if lo < 0 or hi < lo:
            raise ValueError(f"bad items_per_service range {self.items_per_service}")


def _unit_mass(mean: float, std: float) -> float:
    from scipy.stats import norm

    return float(norm.cdf(1.0, mean, std) - norm.cdf(0.0, mean, std))


# -- WSC XML -----------------------------------------------------------------


def _load_xml(doc) -> ET.Element:
    if isinstance(doc, ET.Element):
        return doc
    try:
        if isinstance(doc, (str, bytes)) and str(doc).lstrip().startswith("<"):
            return ET.fromstring(doc)
        return ET.parse(doc).getroot()
    except ET.ParseError as exc:
        raise ParseError(f"malformed XML: {exc}") from exc


def parse_taxonomy(doc) -> tuple[Taxonomy, dict[str, str]]:
    """Concept tree plus the instance -> concept map."""
    root = _load_xml(doc)
    parents: dict[str, Optional[str]] = {}
    instances: dict[str, str] = {}

    def walk(elem: ET.Element, parent: Optional[str]) -> None:
        for child in elem:
            tag = child.tag.lower()
            name = child.get("name")
            if tag == "concept":
                if name is None:
                    raise ParseError("concept without a name")
                parents[name] = parent
                walk(child, name)
            elif tag == "instance":
                if parent is None or name is None:
                    raise ParseError("instance outside a concept")
                instances[name] = parent
            else:
                walk(child, parent)

    walk(root, None)
    return Taxonomy(parents), instances


def _resolve(name: str, taxonomy: Taxonomy, instances: dict[str, str]) -> str:
    if name in instances:
        return instances[name]
    if name in taxonomy:
        return name
    raise ParseError(f"unknown instance: {name}")


def _names(elem: Optional[ET.Element]) -> list[str]:
    if elem is None:
        return []
    return [e.get("name") for e in elem if e.get("name") is not None]


def _find(elem: ET.Element, tag: str) -> Optional[ET.Element]:
    for child in elem.iter():
        if child.tag.lower() == tag:
            return child
    return None


def _minmax(values: Sequence[float]) -> list[float]:
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.0] * len(values)
    return [(v - lo) / (hi - lo) for v in values]


def parse_wsc(services_doc, taxonomy_doc, problem_doc) -> tuple[tuple[Service, ...], Taxonomy, Task]:
    """Read a WSC-challenge triplet (services, taxonomy, task).

    Service QoS is read from ``Res``/``Cost`` style attributes and min-max
    normalised into [0, 1].
    """
    taxonomy, instances = parse_taxonomy(taxonomy_doc)
    root = _load_xml(services_doc)
    raw = []
    missing_qos = []
    for elem in root.iter():
        if elem.tag.lower() != "service":
            continue
        sid = elem.get("name")
        if sid is None:
            raise ParseError("service without a name")
        ins = {_resolve(n, taxonomy, instances) for n in _names(_find(elem, "inputs"))}
        outs = {_resolve(n, taxonomy, instances) for n in _names(_find(elem, "outputs"))}
        t = next((elem.get(a) for a in TIME_ATTRS if elem.get(a) is not None), None)
        c = next((elem.get(a) for a in COST_ATTRS if elem.get(a) is not None), None)
        if t is None or c is None:
            missing_qos.append(sid)
            continue
        raw.append((sid, frozenset(ins), frozenset(outs), float(t), float(c)))
    if missing_qos:
        raise ParseError(f"services missing QoS attributes: {', '.join(missing_qos)}")
    if not raw:
        raise ParseError("empty service repository")
    times = _minmax([r[3] for r in raw])
    costs = _minmax([r[4] for r in raw])
    repo = tuple(
        Service(sid, ins, outs, proc_time=t, service_cost=c)
        for (sid, ins, outs, _, _), t, c in zip(raw, times, costs)
    )

    proot = _load_xml(problem_doc)
    provided = {_resolve(n, taxonomy, instances) for n in _names(_find(proot, "provided"))}
    wanted = {_resolve(n, taxonomy, instances) for n in _names(_find(proot, "wanted"))}
    return repo, taxonomy, Task(frozenset(provided), frozenset(wanted))


def read_coordinates(path: Union[str, Path]) -> list[tuple[float, float]]:
    """Coordinates CSV with columns id,lat,lon (header optional)."""
    coords = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            try:
                coords.append((float(row[1]), float(row[2])))
            except (ValueError, IndexError):
                if coords:
                    raise ParseError(f"bad coordinate row: {row}")
    return coords


# -- augmentation --------------------------------------------------------------


def _unit_open(rng: np.random.Generator) -> float:
    # uniform on (0, 1]
    return float(1.0 - rng.random())


def _bandwidth(rng: np.random.Generator, mean: float, std: float) -> float:
    if std <= 0:
        return mean
    while True:
        b = float(rng.normal(mean, std))
        if 0.0 < b <= 1.0:
            return b


def augment(
    repository: Sequence[Service], params: AugmentationParams
) -> tuple[NetworkModel, tuple[Service, ...]]:
    """Place services and their data items and draw link bandwidths.

    Draw order, all from one stream seeded by ``params.seed``: service
    coordinates (synthetic mode only), then per service in repository order
    the item count followed by, per item, access latency, provision cost,
    location and bandwidth.
    """
    rng = np.random.default_rng(params.seed)
    n = len(repository)
    if params.coordinate_source == "synthetic-uniform":
        table = None
        service_xy = [(float(x), float(y)) for x, y in rng.random((n, 2))]
    else:
        table = read_coordinates(params.coordinate_source)
        if len(table) < n:
            raise InstanceError(f"coordinate file has {len(table)} rows for {n} services")
        service_xy = table[:n]

    lo, hi = params.items_per_service
    out = []
    locations: dict[str, tuple[float, float]] = {}
    bandwidth: dict[tuple[str, str], float] = {}
    for s, xy in zip(repository, service_xy):
        m = int(rng.integers(lo, hi + 1))
        items = []
        for j in range(m):
            tsal = _unit_open(rng)
            cprov = _unit_open(rng)
            if table is None:
                dxy = (float(rng.random()), float(rng.random()))
            else:
                dxy = table[int(rng.integers(len(table)))]
            did = f"{s.id}#d{j}"
            items.append(DataItem(did, cprov, params.data_size, dxy, tsal))
            locations[did] = dxy
            key = (did, s.id) if did <= s.id else (s.id, did)
            bandwidth[key] = _bandwidth(rng, params.bandwidth_mean, params.bandwidth_std)
        locations[s.id] = xy
        out.append(replace(s, location=xy, data_items=tuple(items)))
    return NetworkModel(locations, bandwidth), tuple(out)


def build_instance(
    repository: Sequence[Service],
    taxonomy: Taxonomy,
    task: Task,
    params: AugmentationParams,
    **options,
) -> ProblemInstance:
    network, repo = augment(repository, params)
    meta = {"augmentation": _params_to_json(params)}
    return ProblemInstance(repo, taxonomy, task, network, meta=meta, **options)


# -- synthetic instances -------------------------------------------------------


def generate_synthetic(
    n_services: int,
    n_concepts: int,
    layers: int,
    items_per_service: Union[int, tuple[int, int]] = 1,
    seed: int = 0,
    **options,
) -> ProblemInstance:
    """Layered instance that is feasible by construction.

    Concepts are split into ``layers + 1`` groups; group 0 holds the task
    inputs and the last group the wanted outputs.  One backbone service per
    layer reads the first concept of group k-1 and writes all of group k.
    The remaining services are alternatives reading part of group k-1 and
    writing part of group k; about one in ten of them also needs a concept
    nobody produces.
    Within each group a third of the concepts get a parent in the same
    group, so subsumption is exercised.
    """
    if n_services < 1 or layers < 1:
        raise InstanceError("need at least one service and one layer")
    if n_services < layers:
        raise InstanceError(f"{n_services} services cannot host a chain of {layers} layers")
    if n_concepts < layers + 1:
        raise InstanceError(f"{n_concepts} concepts cannot host {layers} layers")
    if isinstance(items_per_service, int):
        items_per_service = (items_per_service, items_per_service)
    rng = np.random.default_rng(seed)

    n_orphans = 1 if n_services > layers and n_concepts > layers + 1 else 0
    names = [f"c{i}" for i in range(n_concepts - n_orphans)]
    groups = [list(g) for g in np.array_split(np.array(names, dtype=object), layers + 1)]
    parents: dict[str, Optional[str]] = {}
    for g in groups:
        for i, c in enumerate(g):
            parents[c] = None
            if i > 0 and rng.random() < 1 / 3:
                parents[c] = g[int(rng.integers(i))]
    orphan = None
    if n_orphans:
        orphan = f"c{n_concepts - 1}"
        parents[orphan] = None
    taxonomy = Taxonomy(parents)

    def pick(group: list[str], k_max: int) -> frozenset[str]:
        k = int(rng.integers(1, min(k_max, len(group)) + 1))
        return frozenset(rng.choice(group, size=k, replace=False).tolist())

    provided = frozenset(groups[0])
    wanted = pick(groups[-1], 3)

    specs: list[tuple[frozenset, frozenset]] = []
    for k in range(1, layers + 1):
        specs.append((frozenset(groups[k - 1][:1]), frozenset(groups[k])))
    for _ in range(n_services - layers):
        k = int(rng.integers(1, layers + 1))
        ins = pick(groups[k - 1], 3)
        outs = pick(groups[k], 3)
        if orphan is not None and rng.random() < 0.1:
            ins = ins | {orphan}
        specs.append((ins, outs))
    order = rng.permutation(len(specs))
    repo = tuple(
        Service(
            f"s{j}",
            specs[i][0],
            specs[i][1],
            proc_time=_unit_open(rng),
            service_cost=_unit_open(rng),
        )
        for j, i in enumerate(order)
    )
    task = Task(provided, wanted)
    params = AugmentationParams(seed=seed, items_per_service=tuple(items_per_service))
    inst = build_instance(repo, taxonomy, task, params, **options)
    meta = dict(inst.meta)
    meta["generator"] = {
        "n_services": n_services,
        "n_concepts": n_concepts,
        "layers": layers,
        "items_per_service": list(items_per_service),
        "seed": seed,
    }
    return replace(inst, meta=meta)


# -- JSON bundle -------------------------------------------------------------


def _params_to_json(params: AugmentationParams) -> dict:
    d = asdict(params)
    d["items_per_service"] = list(params.items_per_service)
    return d


def to_bundle(instance: ProblemInstance) -> dict:
    net = instance.network
    return {
        "schema": SCHEMA,
        "taxonomy": dict(instance.taxonomy.parents),
        "task": {
            "provided": sorted(instance.task.provided),
            "wanted": sorted(instance.task.wanted),
        },
        "services": [
            {
                "id": s.id,
                "inputs": sorted(s.inputs),
                "outputs": sorted(s.outputs),
                "proc_time": s.proc_time,
                "service_cost": s.service_cost,
                "location": list(s.location),
                "data_items": [
                    {
                        "id": d.id,
                        "provision_cost": d.provision_cost,
                        "size": d.size,
                        "location": list(d.location),
                        "access_latency": d.access_latency,
                    }
                    for d in s.data_items
                ],
            }
            for s in instance.repository
        ],
        "network": {
            "bandwidth": [[a, b, bw] for (a, b), bw in sorted(net.bandwidth.items())],
            "propagation_factor": net.propagation_factor,
            "comm_cost_factor": net.comm_cost_factor,
        },
        "weights": list(instance.weights),
        "meta": dict(instance.meta),
    }


def from_bundle(data: dict, **options) -> ProblemInstance:
    if data.get("schema") != SCHEMA:
        raise ParseError(f"unsupported bundle schema {data.get('schema')!r}")
    try:
        taxonomy = Taxonomy(data["taxonomy"])
        task = Task(frozenset(data["task"]["provided"]), frozenset(data["task"]["wanted"]))
        repo = []
        locations: dict[str, tuple[float, float]] = {}
        for s in data["services"]:
            items = tuple(
                DataItem(
                    d["id"],
                    float(d["provision_cost"]),
                    float(d["size"]),
                    tuple(d["location"]),
                    float(d["access_latency"]),
                )
                for d in s.get("data_items", ())
            )
            svc = Service(
                s["id"],
                frozenset(s["inputs"]),
                frozenset(s["outputs"]),
                float(s["proc_time"]),
                float(s["service_cost"]),
                items,
                tuple(s["location"]),
            )
            repo.append(svc)
            locations[svc.id] = svc.location
            for d in items:
                locations[d.id] = d.location
        if not repo:
            raise ParseError("empty service repository")
        net_d = data.get("network", {})
        network = NetworkModel(
            locations,
            {(a, b) if a <= b else (b, a): float(bw) for a, b, bw in net_d.get("bandwidth", [])},
            float(net_d.get("propagation_factor", 1.0)),
            float(net_d.get("comm_cost_factor", 1.0)),
        )
        weights = tuple(data.get("weights", (0.5, 0.5)))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed instance bundle: {exc!r}") from exc
    return ProblemInstance(
        tuple(repo), taxonomy, task, network, weights=weights, meta=data.get("meta", {}), **options
    )


def save_bundle(instance: ProblemInstance, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(to_bundle(instance), indent=1) + "\n")


def load_bundle(path: Union[str, Path], **options) -> ProblemInstance:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return from_bundle(data, **options)


def digest(instance: ProblemInstance) -> str:
    blob = json.dumps(to_bundle(instance), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
