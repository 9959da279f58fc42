"""Model files (TOML) and CSV exchange formats.

Model file layout::

    [graph]
    sites = ["x", "y", "z"]
    edges = [["x", "y"], ["y", "z"]]

    [alphabet]
    size = 2

    [potentials.self]
    "*" = [0.0, 0.0]                 # default for sites not listed
    x = [0.0, "inf"]

    [potentials.pair]
    "*" = [[-0.5, 0.5], [0.5, -0.5]] # default for edges not listed
    "x,y" = [[0.0, 0.0], [0.0, "inf"]]

    [blocks]                         # optional, kept in file order
    left = { sites = ["x", "y"], weight = 1.0 }

Energies are numbers or the string ``"inf"``.  Pair tables are indexed
``[value of first, value of second]`` for the key's endpoint order; a key
naming an edge in the reverse of its declared order is transposed.

CSV formats (all with a header row, floats at 17 significant digits):

* distribution: ``index,configuration,probability`` (every state);
* coupling: ``row,col,mass`` (nonzero entries, row-major);
* kernel: ``row,col,probability`` (nonzero entries, row-major).

A configuration is written ``site=value`` joined by ``;``.
"""
from __future__ import annotations

import csv
import io
import math
import sys
from collections.abc import Mapping
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .couplings import Coupling
from .dynamics import BlockKernel, BlockSystem
from .errors import ModelError
from .model import PairPotentialModel, SpinGraph, validate_model
from .spaces import ConfigSpace, FiniteDistribution, format_configuration


class ConfigError(ModelError):
    """A model file or CSV input is malformed."""


def fmt(x: float) -> str:
    """17 significant digits; lowercase scientific when ``|x| < 1e-4`` or ``|x| >= 1e6``."""
    x = float(x)
    if x == 0:
        return "0"
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if 1e-4 <= abs(x) < 1e6:
        return f"{x:.17g}"
    return f"{x:.16e}"


# ---------------------------------------------------------------------------
# Model files


def _energy(value, where: str) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "+inf"):
            return math.inf
        raise ConfigError(f"{where}: energy must be a number or \"inf\", got {value!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: energy must be a number or \"inf\", got {value!r}")
    return float(value)


def _table(raw, shape: tuple, where: str) -> np.ndarray:
    if len(shape) == 1:
        if not isinstance(raw, list) or len(raw) != shape[0]:
            raise ConfigError(f"{where}: expected a list of {shape[0]} energies")
        return np.array([_energy(v, f"{where}[{k}]") for k, v in enumerate(raw)])
    if not isinstance(raw, list) or len(raw) != shape[0]:
        raise ConfigError(f"{where}: expected {shape[0]} rows of {shape[1]} energies")
    return np.vstack([_table(row, shape[1:], f"{where}[{k}]") for k, row in enumerate(raw)])


def parse_model(text: str, source: str = "<model>") -> tuple[PairPotentialModel, BlockSystem | None]:
    """Parse a model file; the block section, if any, is returned as a block system over all sites."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    graph = doc.get("graph")
    if not isinstance(graph, dict) or "sites" not in graph:
        raise ConfigError(f"{source}: [graph] section with a 'sites' list is required")
    sites = graph["sites"]
    if not isinstance(sites, list) or not all(isinstance(s, str) and s for s in sites):
        raise ConfigError(f"{source}: [graph].sites must be a list of non-empty strings")
    for s in sites:
        if any(c in s for c in ",;= "):
            raise ConfigError(f"{source}: [graph].sites: site name {s!r} may not contain ',', ';', '=' or spaces")
    edges = graph.get("edges", [])
    if not isinstance(edges, list):
        raise ConfigError(f"{source}: [graph].edges must be a list of site pairs")
    for k, e in enumerate(edges):
        if not isinstance(e, list) or len(e) != 2 or not all(isinstance(s, str) for s in e):
            raise ConfigError(f"{source}: [graph].edges[{k}] must be a pair of site names")
    alphabet = doc.get("alphabet", {})
    q = alphabet.get("size") if isinstance(alphabet, dict) else None
    if not isinstance(q, int) or isinstance(q, bool) or q < 1:
        raise ConfigError(f"{source}: [alphabet].size must be a positive integer")

    pots = doc.get("potentials", {})
    selfs_raw = dict(pots.get("self", {}))
    pairs_raw = dict(pots.get("pair", {}))
    default_self = selfs_raw.pop("*", None)
    default_pair = pairs_raw.pop("*", None)

    selfs = {}
    for s in sites:
        if s in selfs_raw:
            selfs[s] = _table(selfs_raw.pop(s), (q,), f"{source}: [potentials.self].{s}")
        elif default_self is not None:
            selfs[s] = _table(default_self, (q,), f"{source}: [potentials.self].*")
        else:
            selfs[s] = np.zeros(q)
    if selfs_raw:
        raise ConfigError(f"{source}: [potentials.self]: undeclared sites {sorted(selfs_raw)}")

    declared = [tuple(e) for e in edges]
    pairs = {}
    given = {}
    for key, raw in pairs_raw.items():
        ends = tuple(key.split(","))
        where = f"{source}: [potentials.pair].\"{key}\""
        if len(ends) != 2:
            raise ConfigError(f"{where}: key must be \"site,site\"")
        given[ends] = _table(raw, (q, q), where)
    for e in declared:
        if e in given:
            pairs[e] = given.pop(e)
        elif e[::-1] in given:
            pairs[e] = given.pop(e[::-1]).T
        elif default_pair is not None:
            pairs[e] = _table(default_pair, (q, q), f"{source}: [potentials.pair].*")
        else:
            pairs[e] = np.zeros((q, q))
    if given:
        raise ConfigError(f"{source}: [potentials.pair]: not declared edges {sorted(','.join(k) for k in given)}")

    model = PairPotentialModel(SpinGraph(sites, declared), q, selfs, pairs)
    problems = validate_model(model)
    if problems:
        raise ConfigError(f"{source}: " + "; ".join(problems))

    blocks = None
    raw_blocks = doc.get("blocks")
    if raw_blocks:
        names, members, weights = [], [], []
        for name, spec in raw_blocks.items():
            where = f"{source}: [blocks].{name}"
            if not isinstance(spec, dict) or not isinstance(spec.get("sites"), list):
                raise ConfigError(f"{where}: expected {{ sites = [...], weight = w }}")
            unknown = [s for s in spec["sites"] if s not in set(sites)]
            if unknown:
                raise ConfigError(f"{where}: unknown sites {unknown}")
            w = spec.get("weight", 1.0)
            if isinstance(w, bool) or not isinstance(w, (int, float)) or not w > 0:
                raise ConfigError(f"{where}: weight must be a positive number")
            names.append(name)
            members.append(tuple(spec["sites"]))
            weights.append(float(w))
        blocks = BlockSystem(tuple(sites), tuple(members), tuple(weights), require_cover=False)
    return model, blocks


def load_model(path: str | Path) -> tuple[PairPotentialModel, BlockSystem | None]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read model file {path}: {exc.strerror}") from None
    return parse_model(text, str(path))


def _toml_str(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _toml_energy(x: float) -> str:
    return '"inf"' if x == math.inf else fmt(x)


def _toml_row(t) -> str:
    return "[" + ", ".join(_toml_energy(v) for v in t) + "]"


def dump_model(model: PairPotentialModel, blocks: BlockSystem | None = None) -> str:
    """Serialise a model with every table written out explicitly."""
    out = ["[graph]"]
    out.append("sites = [" + ", ".join(_toml_str(s) for s in model.sites) + "]")
    out.append("edges = [" + ", ".join(f"[{_toml_str(x)}, {_toml_str(y)}]" for x, y in model.graph.edges) + "]")
    out += ["", "[alphabet]", f"size = {model.q}", "", "[potentials.self]"]
    for s in model.sites:
        out.append(f"{_toml_str(s)} = {_toml_row(model.self_potentials[s])}")
    out += ["", "[potentials.pair]"]
    for e in model.graph.edges:
        rows = ", ".join(_toml_row(r) for r in model.pair_potentials[e])
        out.append(f"{_toml_str(e[0] + ',' + e[1])} = [{rows}]")
    if blocks is not None:
        out += ["", "[blocks]"]
        for i, (b, w) in enumerate(zip(blocks.blocks, blocks.weights)):
            members = ", ".join(_toml_str(s) for s in b)
            out.append(f"b{i} = {{ sites = [{members}], weight = {fmt(w)} }}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# CSV


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def distribution_csv(mu: FiniteDistribution) -> str:
    space = mu.space
    return _csv_text(
        ["index", "configuration", "probability"],
        ((k, space.label(k), fmt(p)) for k, p in enumerate(mu.probs)),
    )


def coupling_csv(Q: Coupling) -> str:
    return _csv_text(["row", "col", "mass"], ((r, c, fmt(m)) for r, c, m in Q.nonzero()))


def kernel_csv(K: BlockKernel) -> str:
    return _csv_text(["row", "col", "probability"], ((r, c, fmt(m)) for r, c, m in K.nonzero()))


def _parse_config_label(label: str, where: str) -> tuple[tuple, tuple]:
    if label == "":
        return (), ()
    sites, values = [], []
    for part in label.split(";"):
        name, sep, val = part.partition("=")
        if not sep or not name:
            raise ConfigError(f"{where}: malformed configuration {label!r}")
        try:
            values.append(int(val))
        except ValueError:
            raise ConfigError(f"{where}: non-integer spin in {label!r}") from None
        sites.append(name)
    return tuple(sites), tuple(values)


def parse_distribution_csv(text: str, source: str = "<csv>") -> FiniteDistribution:
    """Read a dense distribution CSV; the alphabet size is inferred from the row count."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [h.strip() for h in rows[0]] != ["index", "configuration", "probability"]:
        raise ConfigError(f"{source}: expected header index,configuration,probability")
    body = rows[1:]
    if not body:
        raise ConfigError(f"{source}: no rows")
    sites, _ = _parse_config_label(body[0][1], f"{source}:2")
    n = len(sites)
    if n == 0:
        q = 1
    else:
        q = round(len(body) ** (1.0 / n))
        if q**n != len(body):
            raise ConfigError(f"{source}: {len(body)} rows is not q**{n} for any alphabet size q")
    space = ConfigSpace(sites, q)
    probs = np.empty(len(body))
    for k, row in enumerate(body):
        where = f"{source}:{k + 2}"
        if len(row) != 3:
            raise ConfigError(f"{where}: expected 3 fields")
        s, vals = _parse_config_label(row[1], where)
        if s != sites or int(row[0]) != k or space.index(vals) != k:
            raise ConfigError(f"{where}: row does not match the index order of {format_configuration(sites, space.decode(k))!r}")
        try:
            probs[k] = float(row[2])
        except ValueError:
            raise ConfigError(f"{where}: bad probability {row[2]!r}") from None
    try:
        return FiniteDistribution(space, probs)
    except ModelError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_distribution(path: str | Path) -> FiniteDistribution:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read distribution file {path}: {exc.strerror}") from None
    return parse_distribution_csv(text, str(path))


def parse_assignment(text: str | None, where: str = "--boundary") -> dict:
    """``"a=1,b=0"`` to ``{"a": 1, "b": 0}``."""
    out = {}
    if not text:
        return out
    for part in text.split(","):
        name, sep, val = part.strip().partition("=")
        if not sep or not name:
            raise ConfigError(f"{where}: expected site=value, got {part!r}")
        try:
            out[name] = int(val)
        except ValueError:
            raise ConfigError(f"{where}: value for {name!r} must be an integer") from None
    return out


def parse_sites(text: str | None) -> list[str]:
    if not text:
        return []
    return [s.strip() for s in text.split(",") if s.strip()]


def assignment_over(model: PairPotentialModel, values: Mapping, sites) -> dict:
    """Pick the values of ``sites`` out of ``values``; every named site must exist in the model."""
    unknown = [s for s in values if s not in model.graph.order]
    if unknown:
        raise ConfigError(f"unknown sites {unknown}")
    missing = [s for s in sites if s not in values]
    if missing:
        raise ConfigError(f"no value given for sites {missing}")
    for s in sites:
        if not 0 <= values[s] < model.q:
            raise ConfigError(f"value {values[s]} at site {s!r} outside 0..{model.q - 1}")
    return {s: values[s] for s in sites}
