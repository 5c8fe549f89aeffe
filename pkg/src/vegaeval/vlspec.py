"""Parse, validate, canonicalize and serialize Vega-Lite (v5 subset) specs.

The supported subset is a single-view spec plus row/column faceting.  The
closed enums (marks, channels, aggregates, time units, transform ops) are
vendored in ``data/vl5_subset.json`` so validation is reproducible offline.

Normalization produces a canonical in-memory form in which every inline
``aggregate`` / ``bin`` / ``timeUnit`` has been hoisted into the transform
list and the encoding references the derived field, so that a spec written
with inline shorthand and one written with an explicit top-level transform
array expose the same comparison surface.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from importlib import resources

from . import expr as _expr
from . import predicates as _pred
from .errors import MalformedDocument, UnsupportedFeature, UnsupportedTransform


@lru_cache(maxsize=1)
def subset_schema() -> dict:
    """The vendored supported-subset schema."""
    text = resources.files("vegaeval").joinpath("data/vl5_subset.json").read_text("utf-8")
    return json.loads(text)


def _schema(key: str) -> tuple:
    return tuple(subset_schema()[key])


# Canonical channel ordering used for stable iteration.
CHANNEL_ORDER = ("x", "y", "theta", "radius", "color", "size", "shape",
                 "opacity", "detail", "text", "tooltip", "row", "column")

# Channels whose bare value literals are stylistic (excluded from scoring).
_STYLISTIC_VALUE_CHANNELS = ("color", "size", "shape", "opacity")

_AGGREGATE_ALIASES = {"average": "mean"}


# ---------------------------------------------------------------------------
# Raw specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RawSpec:
    """A parsed specification document alongside its source text."""

    text: str
    parsed: object

    @staticmethod
    def from_value(value: object) -> "RawSpec":
        return RawSpec(json.dumps(value), value)


def parse_spec(text: str) -> RawSpec:
    """Parse a JSON spec document; raise MalformedDocument with line/column."""
    try:
        parsed = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(
            f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}",
            line=exc.lineno, column=exc.colno) from exc
    return RawSpec(text, parsed)


def _doc_of(spec) -> object:
    if isinstance(spec, RawSpec):
        return spec.parsed
    return spec


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationIssue:
    path: str
    message: str
    severity: str  # "error" | "warning"


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[ValidationIssue, ...]

    @property
    def valid(self) -> bool:
        return not any(i.severity == "error" for i in self.errors)

    @property
    def error_count(self) -> int:
        return sum(1 for i in self.errors if i.severity == "error")

    @property
    def trace_text(self) -> str:
        if not self.errors:
            return "Specification conforms to the supported Vega-Lite v5 subset."
        lines = [f"Found {len(self.errors)} issue(s) in the specification:"]
        for issue in self.errors:
            lines.append(f"  {issue.path}: {issue.message} [{issue.severity}]")
        return "\n".join(lines)


class _Collector:
    def __init__(self):
        self.issues: list[ValidationIssue] = []

    def error(self, path: str, message: str) -> None:
        self.issues.append(ValidationIssue(path, message, "error"))

    def warning(self, path: str, message: str) -> None:
        self.issues.append(ValidationIssue(path, message, "warning"))


def validate_schema(spec) -> ValidationReport:
    """Check a parsed spec against the supported v5 subset.

    Failures are reported, never raised; ``report.valid`` is false iff any
    issue has severity ``error`` and ``report.trace_text`` lists every
    violation with its path.
    """
    doc = _doc_of(spec)
    out = _Collector()
    if not isinstance(doc, dict):
        out.error("$", f"specification must be a JSON object, got {type(doc).__name__}")
        return ValidationReport(tuple(out.issues))

    for key in _schema("composition_keys"):
        if key in doc:
            out.error(f"$.{key}", "layered/concatenated/repeated and geoshape-style "
                                  "composed views are outside the supported subset")
    for key in _schema("interactive_keys"):
        if key in doc:
            out.warning(f"$.{key}", "interactive selection/param blocks are ignored")

    known_top = set(_schema("top_level_keys")) | set(_schema("composition_keys")) \
        | set(_schema("interactive_keys"))
    for key in doc:
        if key not in known_top:
            out.warning(f"$.{key}", "unknown top-level key; preserved but not scored")

    _validate_mark(doc, out)
    _validate_encoding(doc.get("encoding"), out)
    _validate_transforms(doc.get("transform"), out)
    _validate_data(doc.get("data"), out)
    return ValidationReport(tuple(out.issues))


def mark_kind(doc: dict) -> str | None:
    mark = doc.get("mark")
    if isinstance(mark, str):
        return mark
    if isinstance(mark, dict) and isinstance(mark.get("type"), str):
        return mark["type"]
    return None


def _validate_mark(doc: dict, out: _Collector) -> None:
    if "mark" not in doc:
        if not any(k in doc for k in _schema("composition_keys")):
            out.error("$.mark", "specification has no mark")
        return
    kind = mark_kind(doc)
    if kind is None:
        out.error("$.mark", "mark must be a string or an object with a 'type'")
        return
    if kind not in _schema("marks"):
        out.error("$.mark", f"unknown mark kind {kind!r} "
                            f"(expected one of: {', '.join(_schema('marks'))})")


def _validate_encoding(enc: object, out: _Collector) -> None:
    if enc is None:
        return
    if not isinstance(enc, dict):
        out.error("$.encoding", "encoding must be an object")
        return
    for channel, cdef in enc.items():
        path = f"$.encoding.{channel}"
        if channel not in _schema("channels"):
            out.error(path, f"unknown encoding channel {channel!r}")
            continue
        if not isinstance(cdef, dict):
            out.error(path, "channel definition must be an object")
            continue
        _validate_channel_def(channel, cdef, path, out)


def _validate_channel_def(channel: str, cdef: dict, path: str, out: _Collector) -> None:
    allowed = set(_schema("channel_def_keys")) | set(_schema("channel_stylistic_keys"))
    for key in cdef:
        if key not in allowed:
            out.error(f"{path}.{key}", f"unknown key {key!r} in channel definition")

    has_field = "field" in cdef
    has_value = "value" in cdef
    aggregate = cdef.get("aggregate")

    if has_field and not isinstance(cdef["field"], str):
        out.error(f"{path}.field", "field must be a column name string")
        has_field = False
    if has_field and has_value:
        out.error(path, "channel cannot carry both a field and a value literal")
    if has_value and any(k in cdef for k in ("aggregate", "bin", "timeUnit")):
        out.error(path, "value-literal channels cannot carry aggregate/bin/timeUnit")
    if not has_field and not has_value and aggregate != "count":
        out.error(path, "channel needs a field or a value (only aggregate 'count' may omit the field)")

    if "type" in cdef and cdef["type"] not in _schema("field_types"):
        out.error(f"{path}.type", f"unknown field type {cdef['type']!r}")
    if aggregate is not None:
        if aggregate not in _schema("aggregates"):
            hint = " (did you mean 'mean'?)" if aggregate == "avg" else ""
            out.error(f"{path}.aggregate", f"{aggregate!r} is not a supported aggregate{hint}")
        if channel in ("row", "column"):
            out.error(f"{path}.aggregate", "facet channels cannot be aggregated")
    if "bin" in cdef:
        bin_value = cdef["bin"]
        if isinstance(bin_value, dict):
            maxbins = bin_value.get("maxbins")
            if maxbins is not None and (not isinstance(maxbins, int) or maxbins < 1):
                out.error(f"{path}.bin.maxbins", "maxbins must be a positive integer")
        elif not isinstance(bin_value, bool):
            out.error(f"{path}.bin", "bin must be true, false, or a parameter object")
    if "timeUnit" in cdef and cdef["timeUnit"] not in _schema("time_units"):
        out.error(f"{path}.timeUnit", f"unsupported time unit {cdef['timeUnit']!r}")
    if "sort" in cdef and not isinstance(cdef["sort"], (str, dict, list, type(None))):
        out.error(f"{path}.sort", "sort must be a string, object, list, or null")


def _validate_transforms(transforms: object, out: _Collector) -> None:
    if transforms is None:
        return
    if not isinstance(transforms, list):
        out.error("$.transform", "transform must be an array")
        return
    for i, entry in enumerate(transforms):
        path = f"$.transform[{i}]"
        if not isinstance(entry, dict):
            out.error(path, "transform entry must be an object")
            continue
        ops = [k for k in entry if k in _schema("transform_ops")]
        if not ops:
            present = ", ".join(sorted(entry)) or "nothing"
            out.error(path, f"no supported transform op found (got {present}); "
                            f"supported: {', '.join(_schema('transform_ops'))}")
            continue
        if len(ops) > 1:
            out.error(path, f"transform entry mixes several ops: {sorted(ops)}")
            continue
        op = ops[0]
        if op == "filter":
            try:
                _pred.parse_predicate(entry["filter"])
            except (UnsupportedTransform, MalformedDocument) as exc:
                out.error(f"{path}.filter", str(exc))
        elif op == "aggregate":
            _validate_aggregate_transform(entry, path, out)
        elif op == "bin":
            if not isinstance(entry.get("field"), str):
                out.error(f"{path}.field", "bin transform needs a field")
            as_value = entry.get("as")
            if not (isinstance(as_value, str)
                    or (isinstance(as_value, list) and len(as_value) == 2
                        and all(isinstance(a, str) for a in as_value))):
                out.error(f"{path}.as", "bin transform needs 'as' (a name or [start, end] pair)")
        elif op == "timeUnit":
            if entry.get("timeUnit") not in _schema("time_units"):
                out.error(f"{path}.timeUnit", f"unsupported time unit {entry.get('timeUnit')!r}")
            if not isinstance(entry.get("field"), str):
                out.error(f"{path}.field", "timeUnit transform needs a field")
            if not isinstance(entry.get("as"), str):
                out.error(f"{path}.as", "timeUnit transform needs an 'as' output name")
        elif op == "calculate":
            if not isinstance(entry.get("as"), str):
                out.error(f"{path}.as", "calculate transform needs an 'as' output name")
            try:
                _expr.parse_expression(entry.get("calculate", ""))
            except MalformedDocument as exc:
                out.error(f"{path}.calculate", str(exc))


def _validate_aggregate_transform(entry: dict, path: str, out: _Collector) -> None:
    specs = entry.get("aggregate")
    if not isinstance(specs, list) or not specs:
        out.error(f"{path}.aggregate", "aggregate transform needs a non-empty list of measures")
        return
    for j, measure in enumerate(specs):
        mpath = f"{path}.aggregate[{j}]"
        if not isinstance(measure, dict):
            out.error(mpath, "aggregate measure must be an object")
            continue
        op = measure.get("op")
        if op not in _schema("aggregates"):
            out.error(f"{mpath}.op", f"{op!r} is not a supported aggregate")
        if op != "count" and not isinstance(measure.get("field"), str):
            out.error(f"{mpath}.field", "aggregate measure needs a field (except count)")
        if "as" in measure and not isinstance(measure["as"], str):
            out.error(f"{mpath}.as", "aggregate 'as' must be a string")
    groupby = entry.get("groupby", [])
    if not isinstance(groupby, list) or not all(isinstance(g, str) for g in groupby):
        out.error(f"{path}.groupby", "groupby must be a list of field names")


def _validate_data(data: object, out: _Collector) -> None:
    if data is None:
        return
    if not isinstance(data, dict):
        out.error("$.data", "data must be an object")
        return
    if not any(k in data for k in ("values", "url", "name")):
        out.warning("$.data", "data block has neither inline values nor a url")
    if "values" in data and not isinstance(data["values"], list):
        out.error("$.data.values", "inline data values must be an array")


# ---------------------------------------------------------------------------
# Normalized form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarkType:
    kind: str
    params: tuple[tuple[str, object], ...] = ()

    def params_dict(self) -> dict:
        return dict(self.params)


@dataclass(frozen=True)
class ChannelDef:
    channel: str
    field: str | None = None
    field_type: str | None = None
    aggregate: str | None = None
    bin: int | None = None          # maxbins when binned inline (pre-hoist only)
    time_unit: str | None = None
    value: object = None
    sort: object = None


@dataclass(frozen=True)
class FacetField:
    field: str
    field_type: str | None
    original_axis: str  # "row" | "column"


@dataclass(frozen=True)
class TransformDef:
    op: str  # filter | aggregate | bin | timeUnit | calculate
    field: str | None = None
    predicate: object = None
    group_by: tuple[str, ...] | None = None
    derived_field: str | None = None
    end_field: str | None = None
    params: tuple[tuple[str, object], ...] = ()

    def params_dict(self) -> dict:
        return dict(self.params)

    def comparison_key(self) -> tuple:
        # Predicate AST nodes are frozen and hashable, so they can sit in the
        # key directly; canonicalization already sorted and/or children.
        return (self.op, self.field, self.predicate, self.group_by,
                self.params, self.derived_field)

    def sort_key(self) -> tuple:
        primary = self.field
        if primary is None and self.predicate is not None:
            fields = sorted(_pred.predicate_fields(self.predicate))
            primary = fields[0] if fields else ""
        return (self.op, primary or "", repr(self.params), repr(self.derived_field))


@dataclass(frozen=True)
class EncodingItem:
    """Canonical comparison key for one encoding channel."""

    channel: str
    field: str | None
    field_type: str | None
    aggregate: str | None
    bin: int | None
    time_unit: str | None
    value: object = None


@dataclass(frozen=True)
class NormalizedSpec:
    mark: MarkType
    encodings: tuple[ChannelDef, ...]
    transforms: tuple[TransformDef, ...]
    facet: tuple[FacetField, ...] = ()
    data_ref: object = None
    extras: dict = dc_field(default_factory=dict)

    def encoding_items(self) -> tuple[EncodingItem, ...]:
        return _encoding_items(self)

    def transform_items(self) -> tuple[tuple, ...]:
        """Deduplicated, canonically ordered transform keys (comparison surface)."""
        seen = []
        for t in sorted(self.transforms, key=TransformDef.sort_key):
            key = t.comparison_key()
            if key not in seen:
                seen.append(key)
        return tuple(seen)

    def comparison_surface(self) -> tuple:
        return (self.mark.kind,
                frozenset(self.encoding_items()),
                frozenset(self.transform_items()))


def _canonical_aggregate(op: str) -> str:
    return _AGGREGATE_ALIASES.get(op, op)


def derived_name(kind: str, op_or_unit: str | None, base: str | None) -> str:
    if kind == "aggregate":
        if op_or_unit == "count" or base is None:
            return "count"
        return f"{op_or_unit}_{base}"
    if kind == "bin":
        return f"bin_{base}"
    return f"{op_or_unit}_{base}"


def _maxbins_of(bin_value) -> int:
    if isinstance(bin_value, dict) and isinstance(bin_value.get("maxbins"), int):
        return bin_value["maxbins"]
    return 10  # materialized default


class _Normalizer:
    def __init__(self, doc: dict):
        self.doc = doc
        self.renames: dict[str, str] = {}
        self.transforms: list[TransformDef] = []
        self.extras: dict = {"top_level": {}, "channel_styles": {}, "value_channels": {}}

    def run(self) -> NormalizedSpec:
        doc = self.doc
        for key in _schema("composition_keys"):
            if key in doc:
                raise UnsupportedFeature(f"composed view ({key!r}) is outside the supported subset")
        kind = mark_kind(doc)
        if kind is None or kind not in _schema("marks"):
            raise UnsupportedFeature(f"unsupported mark kind {kind!r}")
        mark = self._mark(doc["mark"], kind)
        self._collect_extras(doc)
        for entry in doc.get("transform", []) or []:
            self._explicit_transform(entry)
        encodings, facet = self._encodings(doc.get("encoding", {}) or {})
        transforms = self._dedup(self.transforms)
        return NormalizedSpec(mark=mark,
                              encodings=tuple(encodings),
                              transforms=tuple(transforms),
                              facet=tuple(facet),
                              data_ref=doc.get("data"),
                              extras=self.extras)

    @staticmethod
    def _mark(mark_value, kind: str) -> MarkType:
        if isinstance(mark_value, dict):
            params = tuple(sorted((k, v) for k, v in mark_value.items() if k != "type"))
            return MarkType(kind, params)
        return MarkType(kind)

    def _collect_extras(self, doc: dict) -> None:
        structural = {"mark", "encoding", "transform", "data"}
        for key, value in doc.items():
            if key not in structural:
                self.extras["top_level"][key] = value

    # -- explicit top-level transforms ------------------------------------

    def _explicit_transform(self, entry: dict) -> None:
        if "filter" in entry:
            pred = _pred.parse_predicate(entry["filter"])
            pred = _pred.rename_fields(_pred.canonicalize(pred), self.renames)
            self.transforms.append(TransformDef(op="filter", predicate=pred))
            return
        if "aggregate" in entry:
            groupby = tuple(sorted(self.renames.get(g, g) for g in entry.get("groupby", [])))
            for measure in entry["aggregate"]:
                op = _canonical_aggregate(measure["op"])
                base = measure.get("field")
                base = self.renames.get(base, base) if base else None
                if op == "count":
                    base = None
                name = derived_name("aggregate", op, base)
                if measure.get("as") and measure["as"] != name:
                    self.renames[measure["as"]] = name
                self.transforms.append(TransformDef(
                    op="aggregate", field=base, group_by=groupby,
                    derived_field=name, params=(("op", op),)))
            return
        if "bin" in entry:
            base = self.renames.get(entry["field"], entry["field"])
            start = derived_name("bin", None, base)
            end = f"{start}_end"
            as_value = entry.get("as")
            if isinstance(as_value, str):
                if as_value != start:
                    self.renames[as_value] = start
                    self.renames[f"{as_value}_end"] = end
            elif isinstance(as_value, list) and len(as_value) == 2:
                if as_value[0] != start:
                    self.renames[as_value[0]] = start
                if as_value[1] != end:
                    self.renames[as_value[1]] = end
            self.transforms.append(TransformDef(
                op="bin", field=base, derived_field=start, end_field=end,
                params=(("maxbins", _maxbins_of(entry["bin"])),)))
            return
        if "timeUnit" in entry:
            unit = entry["timeUnit"]
            base = self.renames.get(entry["field"], entry["field"])
            name = derived_name("timeUnit", unit, base)
            if entry.get("as") and entry["as"] != name:
                self.renames[entry["as"]] = name
            self.transforms.append(TransformDef(
                op="timeUnit", field=base, derived_field=name, params=(("unit", unit),)))
            return
        if "calculate" in entry:
            ast = _expr.rename_fields(_expr.parse_expression(entry["calculate"]), self.renames)
            self.transforms.append(TransformDef(
                op="calculate", derived_field=entry["as"],
                params=(("expr", _expr.canonical_text(ast)),)))
            return
        raise UnsupportedFeature(f"unsupported transform entry: {sorted(entry)}")

    # -- encodings ---------------------------------------------------------

    def _encodings(self, enc: dict) -> tuple[list[ChannelDef], list[FacetField]]:
        ordered = sorted(enc.items(), key=lambda kv: _channel_rank(kv[0]))
        staged: list[dict] = []
        for channel, cdef in ordered:
            if not isinstance(cdef, dict):
                raise UnsupportedFeature(f"channel {channel!r} definition is not an object")
            info = self._stage_channel(channel, dict(cdef))
            if info is not None:
                staged.append(info)

        # Hoist bin/timeUnit first: their derived fields join the groupby of
        # any hoisted aggregate, mirroring implicit Vega-Lite semantics.
        for info in staged:
            self._hoist_bin_timeunit(info)
        group_fields = sorted({info["field"] for info in staged
                               if info["field"] is not None and not info["aggregate"]})
        for info in staged:
            self._hoist_aggregate(info, tuple(group_fields))

        encodings: list[ChannelDef] = []
        facet: list[FacetField] = []
        for info in staged:
            if info["channel"] in ("row", "column"):
                facet.append(FacetField(info["field"], info["type"], info["channel"]))
            else:
                encodings.append(ChannelDef(
                    channel=info["channel"], field=info["field"], field_type=info["type"],
                    value=info["value"], sort=info["sort"]))
        return encodings, facet

    def _stage_channel(self, channel: str, cdef: dict) -> dict | None:
        styles = {k: cdef.pop(k) for k in list(cdef) if k in _schema("channel_stylistic_keys")}
        if styles:
            self.extras["channel_styles"][channel] = styles
        if "value" in cdef and "field" not in cdef:
            if channel in _STYLISTIC_VALUE_CHANNELS:
                self.extras["value_channels"][channel] = {**cdef, **styles}
                return None
            return {"channel": channel, "field": None, "type": None,
                    "aggregate": None, "bin": None, "time_unit": None,
                    "value": cdef["value"], "sort": cdef.get("sort")}
        field = cdef.get("field")
        field = self.renames.get(field, field) if field else None
        return {"channel": channel, "field": field, "type": cdef.get("type"),
                "aggregate": cdef.get("aggregate"), "bin": cdef.get("bin"),
                "time_unit": cdef.get("timeUnit"), "value": None, "sort": cdef.get("sort")}

    def _hoist_bin_timeunit(self, info: dict) -> None:
        if info.get("bin"):
            start = derived_name("bin", None, info["field"])
            self.transforms.append(TransformDef(
                op="bin", field=info["field"], derived_field=start, end_field=f"{start}_end",
                params=(("maxbins", _maxbins_of(info["bin"])),)))
            info["field"] = start
            info["bin"] = None
        elif info.get("time_unit"):
            unit = info["time_unit"]
            name = derived_name("timeUnit", unit, info["field"])
            self.transforms.append(TransformDef(
                op="timeUnit", field=info["field"], derived_field=name,
                params=(("unit", unit),)))
            info["field"] = name
            info["time_unit"] = None

    def _hoist_aggregate(self, info: dict, group_fields: tuple[str, ...]) -> None:
        if not info.get("aggregate"):
            return
        op = _canonical_aggregate(info["aggregate"])
        base = info["field"] if op != "count" else None
        name = derived_name("aggregate", op, base)
        self.transforms.append(TransformDef(
            op="aggregate", field=base, group_by=group_fields,
            derived_field=name, params=(("op", op),)))
        info["field"] = name
        info["aggregate"] = None

    @staticmethod
    def _dedup(transforms: list[TransformDef]) -> list[TransformDef]:
        seen: set = set()
        out: list[TransformDef] = []
        for t in transforms:
            key = t.comparison_key()
            if key not in seen:
                seen.add(key)
                out.append(t)
        return out


def _channel_rank(channel: str) -> tuple[int, str]:
    try:
        return (CHANNEL_ORDER.index(channel), channel)
    except ValueError:
        return (len(CHANNEL_ORDER), channel)


def normalize(spec) -> NormalizedSpec:
    """Canonicalize a schema-valid spec; raises UnsupportedFeature otherwise."""
    doc = _doc_of(spec)
    if not isinstance(doc, dict):
        raise UnsupportedFeature("specification must be a JSON object")
    return _Normalizer(doc).run()


# ---------------------------------------------------------------------------
# Encoding comparison surface
# ---------------------------------------------------------------------------


def _derived_map(nspec: NormalizedSpec) -> dict[str, tuple[str | None, str, object]]:
    out: dict[str, tuple[str | None, str, object]] = {}
    for t in nspec.transforms:
        params = t.params_dict()
        if t.op == "aggregate" and t.derived_field:
            out[t.derived_field] = (t.field, "aggregate", params["op"])
        elif t.op == "bin" and t.derived_field:
            out[t.derived_field] = (t.field, "bin", params["maxbins"])
            if t.end_field:
                out[t.end_field] = (t.field, "bin", params["maxbins"])
        elif t.op == "timeUnit" and t.derived_field:
            out[t.derived_field] = (t.field, "time_unit", params["unit"])
    return out


def resolve_field(nspec: NormalizedSpec, field: str | None):
    """Trace a (possibly derived) field back to its base column and modifiers."""
    derived = _derived_map(nspec)
    aggregate = bin_param = time_unit = None
    seen: set[str] = set()
    while field in derived and field not in seen:
        seen.add(field)
        base, kind, param = derived[field]
        if kind == "aggregate":
            aggregate = param
        elif kind == "bin":
            bin_param = param
        else:
            time_unit = param
        if base is None:
            field = None
            break
        field = base
    return field, aggregate, bin_param, time_unit


def _encoding_items(nspec: NormalizedSpec) -> tuple[EncodingItem, ...]:
    items: list[EncodingItem] = []
    for cdef in nspec.encodings:
        if cdef.field is None and cdef.value is not None:
            items.append(EncodingItem(cdef.channel, None, None, None, None, None, cdef.value))
            continue
        base, aggregate, bin_param, time_unit = resolve_field(nspec, cdef.field)
        items.append(EncodingItem(cdef.channel, base, cdef.field_type,
                                  aggregate, bin_param, time_unit))
    for facet in nspec.facet:
        base, aggregate, bin_param, time_unit = resolve_field(nspec, facet.field)
        items.append(EncodingItem("facet", base, facet.field_type,
                                  aggregate, bin_param, time_unit))
    return tuple(items)


# ---------------------------------------------------------------------------
# Serialization back to Vega-Lite JSON
# ---------------------------------------------------------------------------


def serialize(nspec: NormalizedSpec) -> dict:
    """Render the normalized form back to a Vega-Lite document."""
    doc: dict = {}
    doc.update(nspec.extras.get("top_level", {}))
    if nspec.data_ref is not None:
        doc["data"] = nspec.data_ref
    if nspec.mark.params:
        doc["mark"] = {"type": nspec.mark.kind, **nspec.mark.params_dict()}
    else:
        doc["mark"] = nspec.mark.kind
    rendered = _render_transforms(nspec.transforms)
    if rendered:
        doc["transform"] = rendered
    encoding: dict = {}
    styles = nspec.extras.get("channel_styles", {})
    for cdef in nspec.encodings:
        entry: dict = {}
        if cdef.field is not None:
            entry["field"] = cdef.field
        if cdef.field_type is not None:
            entry["type"] = cdef.field_type
        if cdef.value is not None:
            entry["value"] = cdef.value
        if cdef.sort is not None:
            entry["sort"] = cdef.sort
        entry.update(styles.get(cdef.channel, {}))
        encoding[cdef.channel] = entry
    for facet in nspec.facet:
        entry = {"field": facet.field}
        if facet.field_type is not None:
            entry["type"] = facet.field_type
        entry.update(styles.get(facet.original_axis, {}))
        encoding[facet.original_axis] = entry
    for channel, cdef in nspec.extras.get("value_channels", {}).items():
        encoding[channel] = cdef
    if encoding:
        doc["encoding"] = encoding
    return doc


def _render_transforms(transforms: tuple[TransformDef, ...]) -> list[dict]:
    out: list[dict] = []
    pending_agg: list[TransformDef] = []

    def flush() -> None:
        if not pending_agg:
            return
        out.append({
            "aggregate": [
                {"op": t.params_dict()["op"],
                 **({"field": t.field} if t.field else {}),
                 "as": t.derived_field}
                for t in pending_agg
            ],
            "groupby": list(pending_agg[0].group_by or ()),
        })
        pending_agg.clear()

    for t in transforms:
        if t.op == "aggregate":
            if pending_agg and pending_agg[0].group_by != t.group_by:
                flush()
            pending_agg.append(t)
            continue
        flush()
        if t.op == "filter":
            out.append({"filter": _pred.to_json(t.predicate)})
        elif t.op == "bin":
            out.append({"bin": {"maxbins": t.params_dict()["maxbins"]},
                        "field": t.field, "as": [t.derived_field, t.end_field]})
        elif t.op == "timeUnit":
            out.append({"timeUnit": t.params_dict()["unit"],
                        "field": t.field, "as": t.derived_field})
        elif t.op == "calculate":
            out.append({"calculate": t.params_dict()["expr"], "as": t.derived_field})
    flush()
    return out


ISO_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
