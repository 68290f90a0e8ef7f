"""Scenario documents: strict parsing, serialisation and initial-data construction.

A scenario is a nested mapping (JSON or YAML on disk)::

    model: order2            # order2 | order1 | similar | hetero
    d: 2
    N: 5                     # hetero uses N1 and N2
    params: {m: 1, gamma: 1, kappa: 1}   # hetero: m, gamma, kappa1, kappa2, L
    scales: [1, 2, ...]      # similar only, one per agent
    shape: {kind: regular-polygon, vertices: 3, circumradius: 1}
    shape2: {kind: regular-simplex, circumradius: 1}      # hetero only
    init: {seed: 0, box: 2, speed: 0.5, angular_speed: 0.5, spread_cap: 0.9}
    integration: {dt: 0.001, t_final: 12, sample_every: 0.1,
                  project_every_step: true, drift_tolerance: 1.0e-8}
    output: {trajectory: trajectory.csv, diagnostics: diagnostics.csv}

Unknown keys are rejected; every error names the offending key path.
"""

import dataclasses
import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import matso
from .diagnostics import diameter_rotations
from .dynamics import MODELS, ModelParams
from .ensemble import EnsembleState, ReferenceShape, regular_polygon, regular_simplex, warn_if_degenerate
from .errors import ValidationError
from .integrate import IntegrationSettings

SHAPE_KINDS = ("regular-polygon", "regular-simplex", "explicit")

_PARAM_KEYS = {
    "order1": {"kappa"},
    "order2": {"m", "gamma", "kappa"},
    "similar": {"m", "gamma", "kappa"},
    "hetero": {"m", "gamma", "kappa1", "kappa2", "L"},
}


@dataclass(frozen=True)
class ShapeSpec:
    kind: str
    vertices: int = None
    circumradius: float = 1.0
    points: tuple = None

    def build(self, d):
        if self.kind == "regular-polygon":
            return regular_polygon(self.vertices, self.circumradius, d)
        if self.kind == "regular-simplex":
            return regular_simplex(d, self.circumradius)
        return ReferenceShape.from_vertices(np.array(self.points, dtype=float))

    def to_dict(self):
        if self.kind == "regular-polygon":
            return {"kind": self.kind, "vertices": self.vertices, "circumradius": self.circumradius}
        if self.kind == "regular-simplex":
            return {"kind": self.kind, "circumradius": self.circumradius}
        return {"kind": self.kind, "points": [list(p) for p in self.points]}


@dataclass(frozen=True)
class InitSpec:
    seed: int
    box: float = 1.0
    speed: float = 0.0
    angular_speed: float = 0.0
    spread_cap: float = None


@dataclass(frozen=True)
class OutputSpec:
    trajectory: str = "trajectory.csv"
    diagnostics: str = "diagnostics.csv"


@dataclass(frozen=True)
class ScenarioConfig:
    model: str
    d: int
    counts: tuple
    params: ModelParams
    shape: ShapeSpec
    init: InitSpec
    integration: IntegrationSettings = field(default_factory=IntegrationSettings)
    output: OutputSpec = field(default_factory=OutputSpec)
    scales: tuple = None
    shape2: ShapeSpec = None
    name: str = None

    @property
    def n_agents(self):
        return sum(self.counts)

    def with_seed(self, seed):
        return _replace(self, init=_replace(self.init, seed=seed))

    def to_dict(self):
        doc = {"model": self.model}
        if self.name is not None:
            doc["name"] = self.name
        doc["d"] = self.d
        if self.model == "hetero":
            doc["N1"], doc["N2"] = self.counts
        else:
            doc["N"] = self.counts[0]
        p = self.params
        if self.model == "hetero":
            doc["params"] = {"m": p.m, "gamma": p.gamma, "kappa1": p.kappa, "kappa2": p.kappa2, "L": p.L}
        else:
            doc["params"] = {k: getattr(p, k) for k in sorted(_PARAM_KEYS[self.model])}
        if self.scales is not None:
            doc["scales"] = list(self.scales)
        doc["shape"] = self.shape.to_dict()
        if self.shape2 is not None:
            doc["shape2"] = self.shape2.to_dict()
        doc["init"] = asdict(self.init)
        doc["integration"] = asdict(self.integration)
        doc["output"] = asdict(self.output)
        return doc


def _replace(obj, **changes):
    return dataclasses.replace(obj, **changes)


# -- validation helpers -------------------------------------------------------


def _check_keys(doc, allowed, path):
    if not isinstance(doc, dict):
        raise ValidationError("expected a mapping", path or "<root>")
    for key in doc:
        if key not in allowed:
            raise ValidationError("unknown key", _join(path, key))


def _join(path, key):
    return f"{path}.{key}" if path else str(key)


def _require(doc, key, path):
    if key not in doc:
        raise ValidationError("missing required field", _join(path, key))
    return doc[key]


def _number(value, path, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"expected a number, got {type(value).__name__}", path)
    value = float(value)
    if not np.isfinite(value):
        raise ValidationError("must be finite", path)
    if positive and not value > 0:
        raise ValidationError("must be positive", path)
    if nonneg and value < 0:
        raise ValidationError("must be nonnegative", path)
    return value


def _integer(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"expected an integer, got {type(value).__name__}", path)
    if minimum is not None and value < minimum:
        raise ValidationError(f"must be at least {minimum}", path)
    return value


def _boolean(value, path):
    if not isinstance(value, bool):
        raise ValidationError(f"expected true/false, got {type(value).__name__}", path)
    return value


def _parse_shape(doc, d, path):
    _check_keys(doc, {"kind", "vertices", "circumradius", "points"}, path)
    kind = _require(doc, "kind", path)
    if kind not in SHAPE_KINDS:
        raise ValidationError(f"unknown shape kind {kind!r}; expected one of {SHAPE_KINDS}", _join(path, "kind"))
    if kind == "regular-polygon":
        _check_keys(doc, {"kind", "vertices", "circumradius"}, path)
        n = _integer(_require(doc, "vertices", path), _join(path, "vertices"), minimum=2)
        if d < 2:
            raise ValidationError("polygons need d >= 2", _join(path, "kind"))
        radius = _number(doc.get("circumradius", 1.0), _join(path, "circumradius"), positive=True)
        return ShapeSpec(kind, vertices=n, circumradius=radius)
    if kind == "regular-simplex":
        _check_keys(doc, {"kind", "circumradius"}, path)
        radius = _number(doc.get("circumradius", 1.0), _join(path, "circumradius"), positive=True)
        return ShapeSpec(kind, circumradius=radius)
    _check_keys(doc, {"kind", "points"}, path)
    pts = _require(doc, "points", path)
    ppath = _join(path, "points")
    if not isinstance(pts, list) or not pts:
        raise ValidationError("expected a non-empty list of points", ppath)
    rows = []
    for i, row in enumerate(pts):
        if not isinstance(row, list) or len(row) != d:
            raise ValidationError(f"expected a list of {d} coordinates", f"{ppath}[{i}]")
        rows.append(tuple(_number(v, f"{ppath}[{i}]") for v in row))
    return ShapeSpec(kind, points=tuple(rows))


def parse_config(document):
    """Validate a scenario mapping (or JSON/YAML text) and fill in defaults."""
    if isinstance(document, str):
        document = yaml.safe_load(document)
    doc = document
    top = {"model", "name", "d", "N", "N1", "N2", "params", "scales", "shape", "shape2", "init", "integration", "output"}
    _check_keys(doc, top, "")
    model = _require(doc, "model", "")
    if model not in MODELS:
        raise ValidationError(f"unknown model {model!r}; expected one of {MODELS}", "model")
    name = doc.get("name")
    if name is not None and not isinstance(name, str):
        raise ValidationError("expected a string", "name")
    d = _integer(_require(doc, "d", ""), "d", minimum=1)

    if model == "hetero":
        for bad in ("N", "scales"):
            if bad in doc:
                raise ValidationError("not used by the hetero model", bad)
        counts = (
            _integer(_require(doc, "N1", ""), "N1", minimum=1),
            _integer(_require(doc, "N2", ""), "N2", minimum=1),
        )
    else:
        for bad in ("N1", "N2", "shape2"):
            if bad in doc:
                raise ValidationError("only used by the hetero model", bad)
        counts = (_integer(_require(doc, "N", ""), "N", minimum=1),)

    pdoc = doc.get("params", {})
    allowed = _PARAM_KEYS[model]
    _check_keys(pdoc, allowed, "params")
    vals = {}
    for key in sorted(allowed):
        kpath = _join("params", key)
        val = _number(_require(pdoc, key, "params"), kpath, positive=(key == "L"), nonneg=True)
        vals[key] = val
    if model != "order1" and not vals["m"] > 0:
        raise ValidationError("second-order models need m > 0 (use model order1 for m = 0)", "params.m")
    if model == "hetero":
        params = ModelParams(m=vals["m"], gamma=vals["gamma"], kappa=vals["kappa1"], kappa2=vals["kappa2"], L=vals["L"])
    elif model == "order1":
        params = ModelParams(m=0.0, gamma=1.0, kappa=vals["kappa"])
    else:
        params = ModelParams(m=vals["m"], gamma=vals["gamma"], kappa=vals["kappa"])

    scales = None
    if model == "similar":
        raw = _require(doc, "scales", "")
        if not isinstance(raw, list) or len(raw) != counts[0]:
            raise ValidationError(f"expected a list of {counts[0]} scales (one per agent)", "scales")
        scales = tuple(_number(v, f"scales[{i}]", positive=True) for i, v in enumerate(raw))
    elif "scales" in doc:
        raise ValidationError("only used by the similar model", "scales")

    shape = _parse_shape(_require(doc, "shape", ""), d, "shape")
    shape2 = _parse_shape(_require(doc, "shape2", ""), d, "shape2") if model == "hetero" else None

    idoc = _require(doc, "init", "")
    _check_keys(idoc, {"seed", "box", "speed", "angular_speed", "spread_cap"}, "init")
    cap = idoc.get("spread_cap")
    init = InitSpec(
        seed=_integer(_require(idoc, "seed", "init"), "init.seed", minimum=0),
        box=_number(idoc.get("box", 1.0), "init.box", nonneg=True),
        speed=_number(idoc.get("speed", 0.0), "init.speed", nonneg=True),
        angular_speed=_number(idoc.get("angular_speed", 0.0), "init.angular_speed", nonneg=True),
        spread_cap=None if cap is None else _number(cap, "init.spread_cap", nonneg=True),
    )
    if model == "order1" and (init.spread_cap is None or init.spread_cap >= 1):
        warnings.warn(
            "first-order run without init.spread_cap < 1: initial rotation spread is not "
            "guaranteed to lie in the basin where exponential convergence is known",
            stacklevel=2,
        )

    gdoc = doc.get("integration", {})
    _check_keys(gdoc, {"dt", "t_final", "sample_every", "project_every_step", "drift_tolerance"}, "integration")
    defaults = IntegrationSettings()
    try:
        integration = IntegrationSettings(
            dt=_number(gdoc.get("dt", defaults.dt), "integration.dt", positive=True),
            t_final=_number(gdoc.get("t_final", defaults.t_final), "integration.t_final", positive=True),
            sample_every=_number(
                gdoc.get("sample_every", defaults.sample_every), "integration.sample_every", positive=True
            ),
            project_every_step=_boolean(
                gdoc.get("project_every_step", defaults.project_every_step), "integration.project_every_step"
            ),
            drift_tolerance=_number(
                gdoc.get("drift_tolerance", defaults.drift_tolerance), "integration.drift_tolerance", positive=True
            ),
        )
    except ValidationError as exc:
        if exc.path:
            raise
        raise ValidationError(str(exc), "integration") from None

    odoc = doc.get("output", {})
    _check_keys(odoc, {"trajectory", "diagnostics"}, "output")
    for key in odoc:
        if not isinstance(odoc[key], str):
            raise ValidationError("expected a file name", _join("output", key))
    output = OutputSpec(**odoc)

    return ScenarioConfig(
        model=model,
        d=d,
        counts=counts,
        params=params,
        shape=shape,
        init=init,
        integration=integration,
        output=output,
        scales=scales,
        shape2=shape2,
        name=name,
    )


def load_config(path):
    path = Path(path)
    text = path.read_text()
    doc = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    return parse_config(doc)


def serialize_config(config):
    """JSON text that :func:`parse_config` maps back to ``config``."""
    return json.dumps(config.to_dict(), indent=2) + "\n"


# -- initial data -------------------------------------------------------------


def contract_rotations(rotations, cap, anchor=0):
    """Pull rotations toward ``rotations[anchor]`` until their diameter is at most ``cap``.

    Uses ``project((1 - lam) O_anchor + lam O_i)`` with one common ``lam``
    found by bisection; returns the rotations unchanged when they already
    satisfy the cap.
    """
    O = np.asarray(rotations, dtype=float)
    if cap < 0:
        raise ValidationError(f"spread cap must be nonnegative, got {cap}")
    if diameter_rotations(O) <= cap:
        return O
    base = O[anchor]

    def pulled(lam):
        return matso.project_to_rotation((1 - lam) * base + lam * O)

    def ok(lam):
        try:
            return diameter_rotations(pulled(lam)) <= cap
        except ValidationError:
            return False

    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        return np.broadcast_to(base, O.shape).copy()
    return pulled(lo)


def build_species(seed, n, d, shape, init, second_order=True, scales=None):
    """Random initial ensemble of one species.

    Centroids are uniform in ``[-box, box]^d``, velocities Gaussian times
    ``speed``, rotations Haar-random (then contracted to ``spread_cap``),
    and ``W`` a Gaussian skew matrix times ``angular_speed``. Random numbers
    are drawn in the same order for every model, so first- and second-order
    runs with one seed share centroids and rotations.
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(-init.box, init.box, size=(n, d))
    v = rng.standard_normal((n, d)) * init.speed
    O = np.array([matso.random_rotation(rng, d) for _ in range(n)])
    W = np.array([matso.random_skew(rng, d) for _ in range(n)]) * init.angular_speed
    if init.spread_cap is not None:
        O = contract_rotations(O, init.spread_cap)
    if not second_order or init.speed == 0:
        v = np.zeros((n, d))
    if not second_order or init.angular_speed == 0:
        W = np.zeros((n, d, d))
    return EnsembleState(x, v, O, W, (shape,), scales)


def build_initial(config):
    """Initial ensemble for ``config``, deterministic in ``config.init.seed``.

    For the hetero model species ``k`` is drawn with seed ``seed + k``, so
    each species matches a single-species run with that seed.
    """
    d = config.d
    second_order = config.model != "order1"
    shape = config.shape.build(d)
    warn_if_degenerate(shape)
    if config.model == "hetero":
        shape2 = config.shape2.build(d)
        warn_if_degenerate(shape2)
        parts = [
            build_species(config.init.seed + k, n, d, s, config.init)
            for k, (n, s) in enumerate(zip(config.counts, (shape, shape2)))
        ]
        return EnsembleState.concatenate(parts)
    scales = None if config.scales is None else np.array(config.scales)
    return build_species(config.init.seed, config.counts[0], d, shape, config.init, second_order, scales)


# -- demo scenarios -----------------------------------------------------------

DEMOS = {
    "congruent-triangles": {
        "model": "order2",
        "name": "congruent-triangles",
        "d": 2,
        "N": 5,
        "params": {"m": 1.0, "gamma": 1.0, "kappa": 1.0},
        "shape": {"kind": "regular-polygon", "vertices": 3, "circumradius": 1.0},
        "init": {"seed": 1, "box": 3.0, "speed": 0.5, "angular_speed": 0.5},
        "integration": {"dt": 1e-3, "t_final": 12.0, "sample_every": 0.1},
    },
    "similar-triangles": {
        "model": "similar",
        "name": "similar-triangles",
        "d": 2,
        "N": 5,
        "params": {"m": 1.0, "gamma": 1.0, "kappa": 1.0},
        "scales": [1.0, 1.5, 2.0, 2.5, 3.0],
        "shape": {"kind": "regular-polygon", "vertices": 3, "circumradius": 1.0},
        "init": {"seed": 2, "box": 3.0, "speed": 0.5, "angular_speed": 0.5},
        "integration": {"dt": 1e-3, "t_final": 12.0, "sample_every": 0.1},
    },
    "hetero-mix": {
        "model": "hetero",
        "name": "hetero-mix",
        "d": 3,
        "N1": 5,
        "N2": 5,
        "params": {"m": 1.0, "gamma": 1.0, "kappa1": 1.0, "kappa2": 1.0, "L": 4.0},
        "shape": {"kind": "regular-polygon", "vertices": 3, "circumradius": 1.0},
        "shape2": {"kind": "regular-simplex", "circumradius": 1.0},
        "init": {"seed": 3, "box": 3.0, "speed": 0.5, "angular_speed": 0.5},
        "integration": {"dt": 1e-3, "t_final": 12.0, "sample_every": 0.1},
    },
}


def demo_config(name):
    try:
        doc = DEMOS[name]
    except KeyError:
        raise ValidationError(f"unknown demo {name!r}; expected one of {sorted(DEMOS)}") from None
    return parse_config(json.loads(json.dumps(doc)))
