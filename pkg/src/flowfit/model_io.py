"""Model file formats: CSV data tables, YAML model spec, scenario edits, exports.

Schemas (all CSV files carry a header row; links are directed, so a two-way
road appears as two rows):

    zones.csv:  zone_id,name,x,y,anchor_node,attr:<name>...
    nodes.csv:  node_id,x,y
    links.csv:  link_id,from_node,to_node,t0_min,capacity_veh24h,alpha1,alpha2[,length_km]
    counts.csv: link_id,observed_veh24h[,bidirectional]

A bidirectional count is split 50/50 onto the named link and its reverse.
The model spec and scenarios are single YAML files; see data/toy/model.yaml.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .assignment import AssignmentResult
from .calibrate import CalibrationResult
from .demand import DEFAULT_JOBS_CUTOFF, DemandStratum, Zone, derive_jobs
from .metrics import EvaluationReport, SplitExperimentResult, TrafficCount
from .network import DEFAULT_ALPHA1, DEFAULT_ALPHA2, Link, Network, Node, validate

logger = logging.getLogger(__name__)

ATTR_PREFIX = "attr:"


class ModelLoadError(Exception):
    """Aggregated load failure; stage is "parse" or "validation"."""

    def __init__(self, stage: str, diagnostics: list[str]):
        self.stage = stage
        self.diagnostics = list(diagnostics)
        lines = "\n  ".join(self.diagnostics)
        super().__init__(f"{stage} failed with {len(self.diagnostics)} issue(s):\n  {lines}")


@dataclass
class AssignmentOptions:
    mode: str = "iterative"  # "oneoff" | "iterative"
    n_outer: int = 5
    gap_tol: float = 1e-3


@dataclass
class CalibrationOptions:
    method: str = "nelder_mead"  # | "simulated_annealing"
    seed: int = 0
    max_evals: int = 2000
    xatol: float = 1e-6
    fatol: float = 1e-8
    # inner-loop assignment during optimization; the final report re-runs
    # the calibrated weights through the configured assignment mode
    assignment_mode: str = "oneoff"
    bounds: dict = field(default_factory=dict)  # param -> [lo, hi]
    bound_overrides: dict = field(default_factory=dict)  # "stratum.param" -> [lo, hi]
    sa: dict = field(default_factory=dict)  # simulated-annealing options


@dataclass
class DerivationRule:
    attribute: str
    method: str
    source: str
    cutoff: float = DEFAULT_JOBS_CUTOFF


@dataclass
class ModelSpec:
    base_dir: Path
    zones_path: Path
    nodes_path: Path
    links_path: Path
    counts_path: Path | None
    strata: list[DemandStratum]
    derivations: list[DerivationRule]
    assignment: AssignmentOptions
    calibration: CalibrationOptions


@dataclass
class LoadedModel:
    spec: ModelSpec
    zones: list[Zone]
    network: Network
    counts: list[TrafficCount]
    strata: list[DemandStratum]

    @property
    def assignment(self) -> AssignmentOptions:
        return self.spec.assignment

    @property
    def calibration(self) -> CalibrationOptions:
        return self.spec.calibration


@dataclass
class LinkEdit:
    action: str  # "add_link" | "remove_link" | "modify_link"
    link_id: str
    fields: dict


@dataclass
class Scenario:
    name: str
    edits: list[LinkEdit]


def _fmt(value) -> str:
    """Stable scalar formatting: shortest round-trip repr for floats."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


class _RowReader:
    """CSV reader that records per-row diagnostics instead of raising."""

    def __init__(self, path: Path, required: list[str], diagnostics: list[str]):
        self.path = path
        self.required = required
        self.diagnostics = diagnostics
        self.ok = True
        if not path.is_file():
            diagnostics.append(f"{path}: file not found")
            self.ok = False
            return
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            self.fieldnames = reader.fieldnames or []
            missing = [c for c in required if c not in self.fieldnames]
            if missing:
                diagnostics.append(f"{path}: missing column(s) {missing}")
                self.ok = False
                self.rows = []
            else:
                self.rows = list(reader)

    def __iter__(self):
        # header is line 1, first data row line 2
        for lineno, row in enumerate(self.rows, start=2):
            if row.get(None) or any(v is None for v in row.values()):
                self.error(lineno, f"expected {len(self.fieldnames)} columns")
                continue
            yield lineno, row

    def error(self, lineno: int, message: str):
        self.diagnostics.append(f"{self.path}:{lineno}: {message}")

    def number(self, lineno: int, row: dict, column: str, default=None):
        raw = (row.get(column) or "").strip()
        if raw == "":
            if default is not None:
                return default
            self.error(lineno, f"column {column!r} is empty")
            return None
        try:
            return float(raw)
        except ValueError:
            self.error(lineno, f"column {column!r}: not a number: {raw!r}")
            return None


def load_zone_rows(path: Path, diagnostics: list[str]):
    """Returns (zones, anchors, linenos) parsed from zones.csv."""
    reader = _RowReader(path, ["zone_id", "name", "x", "y", "anchor_node"], diagnostics)
    zones: list[Zone] = []
    anchors: dict[str, str] = {}
    linenos: dict[str, int] = {}
    if not reader.ok:
        return zones, anchors, linenos
    attr_cols = [c for c in reader.fieldnames if c.startswith(ATTR_PREFIX)]
    for lineno, row in reader:
        zid = (row.get("zone_id") or "").strip()
        if not zid:
            reader.error(lineno, "empty zone_id")
            continue
        if zid in linenos:
            reader.error(lineno, f"duplicate zone_id {zid!r}")
            continue
        linenos[zid] = lineno
        x = reader.number(lineno, row, "x", 0.0)
        y = reader.number(lineno, row, "y", 0.0)
        attrs = {}
        for col in attr_cols:
            raw = (row.get(col) or "").strip()
            if raw == "":
                continue
            value = reader.number(lineno, row, col)
            if value is not None:
                attrs[col[len(ATTR_PREFIX):]] = value
        if x is None or y is None:
            continue
        zones.append(Zone(zid, (row.get("name") or "").strip(), x, y, attrs))
        anchors[zid] = (row.get("anchor_node") or "").strip()
    return zones, anchors, linenos


def load_node_rows(path: Path, diagnostics: list[str]) -> list[Node]:
    reader = _RowReader(path, ["node_id", "x", "y"], diagnostics)
    nodes: list[Node] = []
    if not reader.ok:
        return nodes
    seen = set()
    for lineno, row in reader:
        nid = (row.get("node_id") or "").strip()
        if not nid:
            reader.error(lineno, "empty node_id")
            continue
        if nid in seen:
            reader.error(lineno, f"duplicate node_id {nid!r}")
            continue
        seen.add(nid)
        x = reader.number(lineno, row, "x", 0.0)
        y = reader.number(lineno, row, "y", 0.0)
        if x is None or y is None:
            continue
        nodes.append(Node(nid, x, y))
    return nodes


def load_link_rows(path: Path, diagnostics: list[str]):
    """Returns (links, linenos) parsed from links.csv."""
    reader = _RowReader(
        path,
        ["link_id", "from_node", "to_node", "t0_min", "capacity_veh24h"],
        diagnostics,
    )
    links: list[Link] = []
    linenos: dict[str, int] = {}
    if not reader.ok:
        return links, linenos
    for lineno, row in reader:
        lid = (row.get("link_id") or "").strip()
        if not lid:
            reader.error(lineno, "empty link_id")
            continue
        if lid in linenos:
            reader.error(lineno, f"duplicate link_id {lid!r}")
            continue
        linenos[lid] = lineno
        t0 = reader.number(lineno, row, "t0_min")
        q_max = reader.number(lineno, row, "capacity_veh24h")
        alpha1 = reader.number(lineno, row, "alpha1", DEFAULT_ALPHA1)
        alpha2 = reader.number(lineno, row, "alpha2", DEFAULT_ALPHA2)
        length_raw = (row.get("length_km") or "").strip()
        length = reader.number(lineno, row, "length_km") if length_raw else None
        if t0 is None or q_max is None or alpha1 is None or alpha2 is None:
            continue
        links.append(Link(
            lid, (row.get("from_node") or "").strip(), (row.get("to_node") or "").strip(),
            t0, q_max, alpha1, alpha2, length,
        ))
    return links, linenos


def load_count_rows(path: Path, diagnostics: list[str]) -> list[dict]:
    reader = _RowReader(path, ["link_id", "observed_veh24h"], diagnostics)
    rows: list[dict] = []
    if not reader.ok:
        return rows
    for lineno, row in reader:
        lid = (row.get("link_id") or "").strip()
        observed = reader.number(lineno, row, "observed_veh24h")
        if not lid:
            reader.error(lineno, "empty link_id")
            continue
        if observed is None:
            continue
        if observed < 0:
            reader.error(lineno, f"negative observed flow {observed!r}")
            continue
        bidi = (row.get("bidirectional") or "").strip() in ("1", "true", "yes")
        rows.append({"lineno": lineno, "link_id": lid, "observed": observed,
                     "bidirectional": bidi})
    return rows


def _resolve_counts(rows, network: Network, source: Path, diagnostics: list[str]):
    """Directional counts; bidirectional rows split 50/50 with the reverse link."""
    reverse_of: dict[tuple[str, str], str] = {}
    for lid, link in network.links.items():
        reverse_of[(link.from_node, link.to_node)] = lid
    counts: list[TrafficCount] = []
    for row in rows:
        lid = row["link_id"]
        link = network.links.get(lid)
        if link is None:
            diagnostics.append(f"{source}:{row['lineno']}: unknown link {lid!r}")
            continue
        if not row["bidirectional"]:
            counts.append(TrafficCount(lid, row["observed"]))
            continue
        rev = reverse_of.get((link.to_node, link.from_node))
        if rev is None or rev == lid:
            diagnostics.append(
                f"{source}:{row['lineno']}: bidirectional count on {lid!r} "
                "but no reverse link exists"
            )
            continue
        counts.append(TrafficCount(lid, row["observed"] / 2.0))
        counts.append(TrafficCount(rev, row["observed"] / 2.0))
    return counts


_DERIVATION_METHODS = {"jobs_from_population"}


def _parse_spec(path: Path) -> ModelSpec:
    diagnostics: list[str] = []
    if not path.is_file():
        raise ModelLoadError("parse", [f"{path}: file not found"])
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
    except yaml.YAMLError as exc:
        raise ModelLoadError("parse", [f"{path}: invalid YAML: {exc}"]) from exc
    if not isinstance(raw, dict):
        raise ModelLoadError("parse", [f"{path}: expected a mapping at top level"])

    base = path.parent
    files = raw.get("files") or {}
    for key in ("zones", "nodes", "links"):
        if key not in files:
            diagnostics.append(f"{path}: files.{key} is required")

    strata: list[DemandStratum] = []
    if not raw.get("strata"):
        diagnostics.append(f"{path}: at least one stratum is required")
    for i, s in enumerate(raw.get("strata") or []):
        try:
            strata.append(DemandStratum(
                name=str(s["name"]),
                production_attr=str(s["production_attr"]),
                attraction_attr=str(s["attraction_attr"]),
                mu=float(s["mu"]),
                beta=float(s["beta"]),
                deterrence_kind=str(s.get("deterrence", "exponential")),
                occupancy=float(s.get("occupancy", 1.0)),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            diagnostics.append(f"{path}: strata[{i}]: {exc}")

    derivations: list[DerivationRule] = []
    for i, d in enumerate(raw.get("derivations") or []):
        try:
            rule = DerivationRule(
                attribute=str(d["attribute"]),
                method=str(d["method"]),
                source=str(d["source"]),
                cutoff=float(d.get("cutoff", DEFAULT_JOBS_CUTOFF)),
            )
            if rule.method not in _DERIVATION_METHODS:
                diagnostics.append(
                    f"{path}: derivations[{i}]: unknown method {rule.method!r}"
                )
            else:
                derivations.append(rule)
        except (KeyError, TypeError, ValueError) as exc:
            diagnostics.append(f"{path}: derivations[{i}]: {exc}")

    try:
        assignment = AssignmentOptions(**(raw.get("assignment") or {}))
    except TypeError as exc:
        diagnostics.append(f"{path}: assignment: {exc}")
        assignment = AssignmentOptions()
    if assignment.mode not in ("oneoff", "iterative"):
        diagnostics.append(f"{path}: assignment.mode must be oneoff or iterative")

    cal_raw = dict(raw.get("calibration") or {})
    bounds = {k: tuple(v) for k, v in (cal_raw.pop("bounds", None) or {}).items()}
    overrides = {k: tuple(v) for k, v in (cal_raw.pop("bound_overrides", None) or {}).items()}
    sa = dict(cal_raw.pop("sa", None) or {})
    try:
        calibration = CalibrationOptions(
            **cal_raw, bounds=bounds, bound_overrides=overrides, sa=sa
        )
    except TypeError as exc:
        diagnostics.append(f"{path}: calibration: {exc}")
        calibration = CalibrationOptions()

    if diagnostics:
        raise ModelLoadError("parse", diagnostics)
    counts_path = base / files["counts"] if files.get("counts") else None
    return ModelSpec(
        base_dir=base,
        zones_path=base / files["zones"],
        nodes_path=base / files["nodes"],
        links_path=base / files["links"],
        counts_path=counts_path,
        strata=strata,
        derivations=derivations,
        assignment=assignment,
        calibration=calibration,
    )


def _apply_derivations(zones: list[Zone], rules: list[DerivationRule]) -> list[Zone]:
    out = []
    for zone in zones:
        attrs = dict(zone.attributes)
        for rule in rules:
            attrs[rule.attribute] = derive_jobs(attrs.get(rule.source, 0.0), rule.cutoff)
        out.append(dataclasses.replace(zone, attributes=attrs))
    return out


def load_model(path) -> LoadedModel:
    """Parse, derive attributes, and validate a complete model instance.

    Parse problems raise ModelLoadError(stage="parse"); semantic problems
    (dangling references, invariant violations) are aggregated and raised
    as ModelLoadError(stage="validation").
    """
    path = Path(path)
    spec = _parse_spec(path)

    parse_diag: list[str] = []
    zones, anchors, zone_lines = load_zone_rows(spec.zones_path, parse_diag)
    nodes = load_node_rows(spec.nodes_path, parse_diag)
    links, link_lines = load_link_rows(spec.links_path, parse_diag)
    count_rows = []
    if spec.counts_path is not None:
        count_rows = load_count_rows(spec.counts_path, parse_diag)
    if parse_diag:
        raise ModelLoadError("parse", parse_diag)

    zones = _apply_derivations(zones, spec.derivations)

    # cross-reference checks first, with file and row attached
    diagnostics: list[str] = []
    node_ids = {n.node_id for n in nodes}
    for link in links:
        for attr in ("from_node", "to_node"):
            nid = getattr(link, attr)
            if nid not in node_ids:
                diagnostics.append(
                    f"{spec.links_path}:{link_lines[link.link_id]}: "
                    f"link {link.link_id!r}: unknown {attr} {nid!r}"
                )
    for zone in zones:
        anchor = anchors.get(zone.zone_id, "")
        if anchor not in node_ids:
            diagnostics.append(
                f"{spec.zones_path}:{zone_lines[zone.zone_id]}: "
                f"zone {zone.zone_id!r}: unknown anchor node {anchor!r}"
            )
        for attr, value in zone.attributes.items():
            if value < 0:
                diagnostics.append(
                    f"{spec.zones_path}:{zone_lines[zone.zone_id]}: "
                    f"attribute {attr!r} is negative ({value!r})"
                )
    known_attrs = {a for z in zones for a in z.attributes}
    for s in spec.strata:
        for attr in (s.production_attr, s.attraction_attr):
            if attr not in known_attrs:
                diagnostics.append(
                    f"stratum {s.name!r}: attribute {attr!r} is neither declared "
                    "on any zone nor derived"
                )
    try:
        network = Network.from_parts(nodes, links, anchors)
    except ValueError as exc:
        diagnostics.append(str(exc))
        raise ModelLoadError("validation", diagnostics) from exc
    counts = _resolve_counts(count_rows, network, spec.counts_path, diagnostics)
    # reference errors were already reported above with file:line attached;
    # validate() adds invariant and connectivity findings on top
    diagnostics.extend(
        d for d in validate(network)
        if "is not a known node" not in d
    )
    if diagnostics:
        raise ModelLoadError("validation", diagnostics)
    return LoadedModel(spec, zones, network, counts, spec.strata)


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ModelLoadError("parse", [f"{path}: file not found"])
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
    except yaml.YAMLError as exc:
        raise ModelLoadError("parse", [f"{path}: invalid YAML: {exc}"]) from exc
    diagnostics: list[str] = []
    edits: list[LinkEdit] = []
    for i, e in enumerate(raw.get("edits") or []):
        action = e.get("action")
        if action not in ("add_link", "remove_link", "modify_link"):
            diagnostics.append(f"{path}: edits[{i}]: unknown action {action!r}")
            continue
        if not e.get("link_id"):
            diagnostics.append(f"{path}: edits[{i}]: link_id is required")
            continue
        fields = {k: v for k, v in e.items() if k not in ("action", "link_id")}
        edits.append(LinkEdit(action, str(e["link_id"]), fields))
    if diagnostics:
        raise ModelLoadError("parse", diagnostics)
    return Scenario(name=str(raw.get("name", path.stem)), edits=edits)


_LINK_FIELD_MAP = {
    "from_node": "from_node",
    "to_node": "to_node",
    "t0_min": "t0",
    "capacity_veh24h": "q_max",
    "alpha1": "alpha1",
    "alpha2": "alpha2",
    "length_km": "length",
}


def apply_scenario(network: Network, scenario: Scenario) -> Network:
    """Edited copy of the network; the base network is never touched.

    The edited network is revalidated; any violated invariant raises
    ModelLoadError(stage="validation").
    """
    links = dict(network.links)
    diagnostics: list[str] = []
    for edit in scenario.edits:
        if edit.action == "add_link":
            if edit.link_id in links:
                diagnostics.append(f"add_link: link {edit.link_id!r} already exists")
                continue
            try:
                links[edit.link_id] = Link(
                    link_id=edit.link_id,
                    from_node=str(edit.fields["from_node"]),
                    to_node=str(edit.fields["to_node"]),
                    t0=float(edit.fields["t0_min"]),
                    q_max=float(edit.fields["capacity_veh24h"]),
                    alpha1=float(edit.fields.get("alpha1", DEFAULT_ALPHA1)),
                    alpha2=float(edit.fields.get("alpha2", DEFAULT_ALPHA2)),
                    length=float(edit.fields["length_km"]) if "length_km" in edit.fields else None,
                )
            except (KeyError, TypeError, ValueError) as exc:
                diagnostics.append(f"add_link {edit.link_id!r}: {exc}")
        elif edit.action == "remove_link":
            if edit.link_id not in links:
                diagnostics.append(f"remove_link: unknown link {edit.link_id!r}")
                continue
            del links[edit.link_id]
        elif edit.action == "modify_link":
            if edit.link_id not in links:
                diagnostics.append(f"modify_link: unknown link {edit.link_id!r}")
                continue
            updates = {}
            for key, value in edit.fields.items():
                if key not in _LINK_FIELD_MAP:
                    diagnostics.append(
                        f"modify_link {edit.link_id!r}: unknown field {key!r}"
                    )
                    break
                attr = _LINK_FIELD_MAP[key]
                updates[attr] = str(value) if attr in ("from_node", "to_node") else float(value)
            else:
                links[edit.link_id] = dataclasses.replace(links[edit.link_id], **updates)
    if diagnostics:
        raise ModelLoadError("validation", diagnostics)
    edited = Network(dict(network.nodes), links, dict(network.zone_anchors))
    issues = validate(edited)
    if issues:
        raise ModelLoadError("validation", issues)
    return edited


# ---------------------------------------------------------------------------
# Writers. All CSVs use "\n" line endings and round-trip float formatting so
# identical runs produce byte-identical outputs.

def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_model(
    directory,
    zones,
    network: Network,
    counts,
    strata,
    assignment: AssignmentOptions | None = None,
    calibration: CalibrationOptions | None = None,
) -> Path:
    """Write a complete model instance; returns the model.yaml path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    attr_names = sorted({a for z in zones for a in z.attributes})

    with open(directory / "zones.csv", "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["zone_id", "name", "x", "y", "anchor_node"]
                   + [ATTR_PREFIX + a for a in attr_names])
        for z in zones:
            w.writerow([z.zone_id, z.name, _fmt(z.x), _fmt(z.y),
                        network.zone_anchors[z.zone_id]]
                       + [_fmt(z.attributes[a]) if a in z.attributes else ""
                          for a in attr_names])

    with open(directory / "nodes.csv", "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["node_id", "x", "y"])
        for nid in sorted(network.nodes):
            n = network.nodes[nid]
            w.writerow([n.node_id, _fmt(n.x), _fmt(n.y)])

    with open(directory / "links.csv", "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["link_id", "from_node", "to_node", "t0_min",
                    "capacity_veh24h", "alpha1", "alpha2", "length_km"])
        for lid in sorted(network.links):
            l = network.links[lid]
            w.writerow([l.link_id, l.from_node, l.to_node, _fmt(l.t0),
                        _fmt(l.q_max), _fmt(l.alpha1), _fmt(l.alpha2),
                        _fmt(l.length)])

    with open(directory / "counts.csv", "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["link_id", "observed_veh24h"])
        for c in counts:
            w.writerow([c.link_id, _fmt(c.observed)])

    assignment = assignment or AssignmentOptions()
    calibration = calibration or CalibrationOptions()
    config = {
        "files": {
            "zones": "zones.csv",
            "nodes": "nodes.csv",
            "links": "links.csv",
            "counts": "counts.csv",
        },
        "strata": [
            {
                "name": s.name,
                "production_attr": s.production_attr,
                "attraction_attr": s.attraction_attr,
                "mu": float(s.mu),
                "beta": float(s.beta),
                "deterrence": s.deterrence_kind,
                "occupancy": float(s.occupancy),
            }
            for s in strata
        ],
        "assignment": {
            "mode": assignment.mode,
            "n_outer": assignment.n_outer,
            "gap_tol": assignment.gap_tol,
        },
        "calibration": {
            "method": calibration.method,
            "seed": calibration.seed,
            "max_evals": calibration.max_evals,
            "xatol": calibration.xatol,
            "fatol": calibration.fatol,
            "assignment_mode": calibration.assignment_mode,
        },
    }
    spec_path = directory / "model.yaml"
    with open(spec_path, "w") as fh:
        yaml.safe_dump(config, fh, sort_keys=False)
    return spec_path


def write_flows_csv(path, result: AssignmentResult) -> None:
    stratum_names = sorted(result.per_stratum_flows)
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["link_id", "flow_total"] + [f"flow:{s}" for s in stratum_names])
        for lid in sorted(result.flows):
            w.writerow([lid, _fmt(result.flows[lid])]
                       + [_fmt(result.per_stratum_flows[s][lid]) for s in stratum_names])


def write_scatter_csv(path, report: EvaluationReport) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["link_id", "observed_veh24h", "predicted_veh24h", "geh_hourly"])
        for e in report.per_link:
            w.writerow([e.link_id, _fmt(e.observed), _fmt(e.predicted), _fmt(e.geh)])


def write_history_csv(path, result: CalibrationResult) -> None:
    names = [f"{e.stratum}.{e.param}" for e in result.best_weights.entries]
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["evaluation", "objective"] + names)
        for idx, objective, x in result.history:
            w.writerow([idx, _fmt(objective)] + [_fmt(float(v)) for v in x])


def write_split_csv(path, results: list[SplitExperimentResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["fraction", "seed", "train_geh", "test_geh"])
        for r in results:
            w.writerow([_fmt(r.split_fraction), r.seed,
                        _fmt(r.train_geh), _fmt(r.test_geh)])


def write_compare_csv(path, base_flows, scenario_flows) -> None:
    """Per-link flow deltas; links absent from one side count as zero flow."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["link_id", "flow_base", "flow_scenario", "delta"])
        for lid in sorted(set(base_flows) | set(scenario_flows)):
            qb = base_flows.get(lid, 0.0)
            qs = scenario_flows.get(lid, 0.0)
            w.writerow([lid, _fmt(qb), _fmt(qs), _fmt(qs - qb)])


def write_weights_yaml(path, strata) -> None:
    """Calibrated strata in the model.yaml `strata:` format, ready to paste back."""
    payload = {
        "strata": [
            {
                "name": s.name,
                "production_attr": s.production_attr,
                "attraction_attr": s.attraction_attr,
                "mu": float(s.mu),
                "beta": float(s.beta),
                "deterrence": s.deterrence_kind,
                "occupancy": float(s.occupancy),
            }
            for s in strata
        ]
    }
    with open(path, "w") as fh:
        yaml.safe_dump(payload, fh, sort_keys=False)
