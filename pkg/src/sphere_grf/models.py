"""Model documents (schema ``aps-v1``): JSON <-> spectrum / space-time model.

Example::

    {
      "schema": "aps-v1",
      "dimension": 2,
      "scale": 1.0,
      "head": [0.0],
      "tail": {"kind": "POWER", "gamma": 1.0, "k": 0.0, "mass": 1.0},
      "sigma": 0.0,
      "temporal": [{"kind": "GAUSS", "b": 1.0}],
      "c_l": [1.0]
    }

``lambda`` may replace ``dimension`` (the string ``"inf"`` selects the
Hilbert sphere).  ``tail``, ``sigma``, ``temporal`` and ``c_l`` are
optional; ``tail.mass`` defaults to 1 when the head is all zeros and is
otherwise required for non-NONE tails.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .covariance import SpaceTimeCovarianceModel, TemporalCF, TemporalKind
from .errors import ConfigError, DivergenceError, DomainError
from .spectrum import AngularPowerSpectrum, TailDescriptor, TailKind, normalize

__all__ = [
    "SCHEMA",
    "ModelDocument",
    "spectrum_to_doc",
    "spectrum_from_doc",
    "model_to_doc",
    "model_from_doc",
    "load_document",
    "canonical_json",
    "document_hash",
]

SCHEMA = "aps-v1"
_TOP_KEYS = {"schema", "lambda", "dimension", "scale", "head", "tail", "sigma", "temporal", "c_l"}
_TAIL_KEYS = {"kind", "gamma", "k", "r", "mass"}


def _num(value, what):
    if isinstance(value, bool):
        raise ConfigError(f"{what} must be a number, got {value!r}")
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
        return math.inf
    if not isinstance(value, (int, float)):
        raise ConfigError(f"{what} must be a number, got {value!r}")
    return float(value)


def _encode_float(x):
    return "inf" if math.isinf(x) else float(x)


def spectrum_from_doc(doc):
    """Build an :class:`AngularPowerSpectrum`; raises ConfigError on schema violations."""
    if not isinstance(doc, dict):
        raise ConfigError("model document must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown keys in model document: {sorted(unknown)}")
    if doc.get("schema") != SCHEMA:
        raise ConfigError(f"schema must be {SCHEMA!r}, got {doc.get('schema')!r}")
    if ("lambda" in doc) == ("dimension" in doc):
        raise ConfigError("exactly one of 'lambda' or 'dimension' is required")
    head = doc.get("head")
    if not isinstance(head, list):
        raise ConfigError("'head' must be an array of numbers")
    head = [_num(h, "head entry") for h in head]
    tail_doc = doc.get("tail", {"kind": "NONE"})
    if not isinstance(tail_doc, dict) or set(tail_doc) - _TAIL_KEYS:
        raise ConfigError(f"'tail' must be an object with keys from {sorted(_TAIL_KEYS)}")
    try:
        kind = TailKind(str(tail_doc.get("kind", "NONE")).upper())
    except ValueError as exc:
        raise ConfigError(f"unknown tail kind {tail_doc.get('kind')!r}") from exc
    if "mass" in tail_doc:
        mass = _num(tail_doc["mass"], "tail.mass")
    elif kind is TailKind.NONE:
        mass = 0.0
    elif not any(head):
        mass = 1.0
    else:
        raise ConfigError("'tail.mass' is required when the head carries mass")
    try:
        tail = TailDescriptor(
            kind=kind,
            gamma=_num(tail_doc["gamma"], "tail.gamma") if "gamma" in tail_doc else None,
            k=_num(tail_doc.get("k", 0.0), "tail.k"),
            r=_num(tail_doc["r"], "tail.r") if "r" in tail_doc else None,
            mass=mass,
        )
        if "dimension" in doc:
            d = doc["dimension"]
            if isinstance(d, bool) or not isinstance(d, int):
                raise ConfigError(f"'dimension' must be an integer, got {d!r}")
            lam = 0.5 * (d - 1)
        else:
            d = None
            lam = _num(doc["lambda"], "lambda")
        return AngularPowerSpectrum(
            head=np.asarray(head, dtype=float),
            tail=tail,
            lam=lam,
            scale=_num(doc.get("scale", 1.0), "scale"),
            sigma=_num(doc.get("sigma", 0.0), "sigma"),
            d=d,
        )
    except (DomainError, DivergenceError) as exc:
        raise ConfigError(f"invalid spectrum: {exc}") from exc


def spectrum_to_doc(spec):
    t = spec.tail
    tail = {"kind": t.kind.value}
    if t.kind is TailKind.POWER:
        tail["gamma"] = t.gamma
    if t.kind in (TailKind.POWER, TailKind.LOG_ONLY):
        tail["k"] = t.k
    if t.kind is TailKind.GEOMETRIC:
        tail["r"] = t.r
    tail["mass"] = t.mass
    doc = {"schema": SCHEMA}
    if spec.d is not None:
        doc["dimension"] = spec.d
    else:
        doc["lambda"] = _encode_float(spec.lam)
    doc["scale"] = spec.scale
    doc["head"] = [float(h) for h in spec.head]
    doc["tail"] = tail
    doc["sigma"] = spec.sigma
    return doc


def _temporal_from_doc(items):
    if not isinstance(items, list) or not items:
        raise ConfigError("'temporal' must be a nonempty array of {kind, b}")
    out = []
    for it in items:
        if not isinstance(it, dict) or set(it) != {"kind", "b"}:
            raise ConfigError(f"temporal entries need exactly 'kind' and 'b', got {it!r}")
        try:
            out.append(TemporalCF(TemporalKind(str(it["kind"]).upper()), _num(it["b"], "temporal.b")))
        except (ValueError, DomainError) as exc:
            raise ConfigError(f"invalid temporal entry {it!r}: {exc}") from exc
    return tuple(out)


@dataclass(frozen=True, eq=False)
class ModelDocument:
    """A parsed document: the spectrum plus the optional space-time parts."""

    spectrum: AngularPowerSpectrum
    temporal: tuple | None = None
    c_l: tuple | None = None

    @property
    def space_time(self):
        try:
            return SpaceTimeCovarianceModel(
                self.spectrum,
                self.temporal if self.temporal is not None else (TemporalCF(TemporalKind.GAUSS, 1.0),),
                self.c_l if self.c_l is not None else (1.0,),
            )
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    def normalized(self):
        spec = self.spectrum if self.spectrum.is_normalized else normalize(self.spectrum)
        return ModelDocument(spec, self.temporal, self.c_l)


def model_from_doc(doc):
    spec = spectrum_from_doc(doc)
    temporal = _temporal_from_doc(doc["temporal"]) if "temporal" in doc else None
    c_l = None
    if "c_l" in doc:
        if not isinstance(doc["c_l"], list) or not doc["c_l"]:
            raise ConfigError("'c_l' must be a nonempty array of positive numbers")
        c_l = tuple(_num(c, "c_l entry") for c in doc["c_l"])
        if any(not (c > 0 and math.isfinite(c)) for c in c_l):
            raise ConfigError("'c_l' entries must be positive and finite")
    return ModelDocument(spec, temporal, c_l)


def model_to_doc(model):
    if isinstance(model, AngularPowerSpectrum):
        return spectrum_to_doc(model)
    if isinstance(model, SpaceTimeCovarianceModel):
        model = ModelDocument(model.spectrum, model.temporal, model.c_l)
    doc = spectrum_to_doc(model.spectrum)
    if model.temporal is not None:
        doc["temporal"] = [{"kind": cf.kind.value, "b": cf.b} for cf in model.temporal]
    if model.c_l is not None:
        doc["c_l"] = list(model.c_l)
    return doc


def read_document(path):
    """Raw JSON of a model file, before schema checks."""
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read model file {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"model file {path} is not valid JSON: {exc}") from exc


def load_document(path):
    return model_from_doc(read_document(path))


def canonical_json(doc):
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def document_hash(doc):
    return hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()
