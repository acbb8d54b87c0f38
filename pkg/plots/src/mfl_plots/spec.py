"""Plot specification files (YAML), strictly validated."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

KINDS = ("decay", "compare", "config-scatter")
COLUMNS = ("G", "H", "F")


class PlotSpecError(ValueError):
    pass


@dataclass(frozen=True)
class CurveGroup:
    label: str
    traces: tuple[str, ...]


@dataclass(frozen=True)
class PlotSpec:
    kind: str
    output: str
    normalize: bool = False
    column: str = "F"
    curves: tuple[CurveGroup, ...] = ()
    snapshot: str = ""
    target: str = ""


def _check_keys(node: dict, allowed: set[str], where: str) -> None:
    unknown = set(node) - allowed
    if unknown:
        raise PlotSpecError(f"unknown key {where}.{sorted(unknown)[0]}")


def _curve_group(node, where: str) -> CurveGroup:
    if not isinstance(node, dict):
        raise PlotSpecError(f"{where} must be a mapping")
    _check_keys(node, {"label", "traces"}, where)
    label = node.get("label")
    traces = node.get("traces")
    if not isinstance(label, str) or not label:
        raise PlotSpecError(f"{where}.label must be a nonempty string")
    if (not isinstance(traces, list) or not traces
            or not all(isinstance(t, str) for t in traces)):
        raise PlotSpecError(f"{where}.traces must be a nonempty list of paths")
    missing = [t for t in traces if not Path(t).exists()]
    if missing:
        raise PlotSpecError(f"{where}: input does not exist: {missing[0]}")
    return CurveGroup(label=label, traces=tuple(traces))


def parse_plot_spec(doc) -> PlotSpec:
    if not isinstance(doc, dict):
        raise PlotSpecError("plot spec must be a mapping")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise PlotSpecError(f"kind must be one of {KINDS}")
    output = doc.get("output")
    if not isinstance(output, str) or not output:
        raise PlotSpecError("output must be a path string")
    column = doc.get("column", "F" if kind == "decay" else "G")
    if column not in COLUMNS:
        raise PlotSpecError(f"column must be one of {COLUMNS}")

    if kind == "decay":
        _check_keys(doc, {"kind", "output", "normalize", "column", "curves"}, "spec")
        normalize = doc.get("normalize", False)
        if not isinstance(normalize, bool):
            raise PlotSpecError("normalize must be a boolean")
        raw = doc.get("curves")
        if not isinstance(raw, list) or not raw:
            raise PlotSpecError("decay spec needs a nonempty curves list")
        curves = tuple(_curve_group(c, f"curves[{i}]") for i, c in enumerate(raw))
        return PlotSpec(kind=kind, output=output, normalize=normalize,
                        column=column, curves=curves)

    if kind == "compare":
        _check_keys(doc, {"kind", "output", "column", "arms"}, "spec")
        arms = doc.get("arms")
        if not isinstance(arms, dict) or len(arms) != 2:
            raise PlotSpecError("compare spec needs exactly two arms")
        curves = tuple(_curve_group(arms[name], f"arms.{name}")
                       for name in sorted(arms))
        return PlotSpec(kind=kind, output=output, column=column, curves=curves)

    _check_keys(doc, {"kind", "output", "snapshot", "target"}, "spec")
    snapshot = doc.get("snapshot")
    if not isinstance(snapshot, str) or not snapshot:
        raise PlotSpecError("config-scatter spec needs a snapshot path")
    if not Path(snapshot).exists():
        raise PlotSpecError(f"input does not exist: {snapshot}")
    target = doc.get("target", "")
    if target and not Path(target).exists():
        raise PlotSpecError(f"input does not exist: {target}")
    return PlotSpec(kind=kind, output=output, snapshot=snapshot, target=target)


def load_plot_spec(path) -> PlotSpec:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise PlotSpecError(f"cannot read spec {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise PlotSpecError(f"spec parse error: {exc}") from None
    return parse_plot_spec(doc)
