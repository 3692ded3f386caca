"""JSON model documents: parsing, serialization and hashing.

Complex matrices are row-major nested lists whose entries are ``[re, im]``
pairs (a bare real number is accepted on input).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .model import CascadeModel, CouplingTerm, DamperMap, DiscreteSpec


class DocumentError(ValueError):
    """Malformed model document; ``path`` names the offending JSON location."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass
class LoadedModel:
    model: CascadeModel
    initial_state: np.ndarray | None
    observables: list[tuple[str, np.ndarray]]


def matrix_to_json(a) -> list:
    a = np.asarray(a, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def matrix_from_json(obj, path: str) -> np.ndarray:
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise DocumentError(path, "matrix must be a non-empty list of rows")
    ncol = len(obj[0])
    out = np.zeros((len(obj), ncol), dtype=complex)
    for i, row in enumerate(obj):
        if len(row) != ncol:
            raise DocumentError(f"{path}[{i}]", f"row has {len(row)} entries, expected {ncol}")
        for j, z in enumerate(row):
            if isinstance(z, bool):
                raise DocumentError(f"{path}[{i}][{j}]", "entry must be a number or [re, im]")
            if isinstance(z, (int, float)):
                out[i, j] = float(z)
            elif isinstance(z, list) and len(z) == 2 and all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in z
            ):
                out[i, j] = complex(float(z[0]), float(z[1]))
            else:
                raise DocumentError(f"{path}[{i}][{j}]", "entry must be a number or [re, im]")
    return out


def _get(obj: dict, key: str, path: str, kind=None, required: bool = True):
    if not isinstance(obj, dict):
        raise DocumentError(path, "expected an object")
    if key not in obj:
        if required:
            raise DocumentError(f"{path}.{key}", "missing required key")
        return None
    val = obj[key]
    if kind is not None and (not isinstance(val, kind) or isinstance(val, bool)):
        raise DocumentError(f"{path}.{key}", f"expected {getattr(kind, '__name__', kind)}")
    return val


def _matrix_list(obj, path: str) -> list[np.ndarray]:
    if not isinstance(obj, list):
        raise DocumentError(path, "expected a list of matrices")
    return [matrix_from_json(m, f"{path}[{i}]") for i, m in enumerate(obj)]


def model_from_document(doc: dict) -> LoadedModel:
    """Build a model from a parsed JSON document (no validation of physics here)."""
    root = "$"
    if not isinstance(doc, dict):
        raise DocumentError(root, "document must be a JSON object")
    carriers = _get(doc, "carriers", root, list)
    if not carriers:
        raise DocumentError(f"{root}.carriers", "at least one carrier is required")
    dims, labels, free = [], [], []
    for m, c in enumerate(carriers):
        p = f"{root}.carriers[{m}]"
        dims.append(_get(c, "dim", p, int))
        labels.append(_get(c, "label", p, str, required=False) or f"S{m + 1}")
        fh = _get(c, "free_hamiltonian", p, list, required=False)
        free.append(None if fh is None else matrix_from_json(fh, f"{p}.free_hamiltonian"))

    env = _get(doc, "environment", root, dict)
    pe = f"{root}.environment"
    env_dim = _get(env, "dim", pe, int)
    eta = matrix_from_json(_get(env, "eta", pe, list), f"{pe}.eta")
    kraus = _matrix_list(_get(env, "damper_kraus", pe, list), f"{pe}.damper_kraus")
    if not kraus:
        raise DocumentError(f"{pe}.damper_kraus", "at least one Kraus operator is required")

    terms = []
    for ell, c in enumerate(_get(doc, "coupling", root, list)):
        p = f"{root}.coupling[{ell}]"
        ops = _matrix_list(_get(c, "carrier_ops", p, list), f"{p}.carrier_ops")
        by_carrier = _get(c, "env_ops_by_carrier", p, list, required=False)
        if by_carrier is not None:
            bs = _matrix_list(by_carrier, f"{p}.env_ops_by_carrier")
            env_op = matrix_from_json(c["env_op"], f"{p}.env_op") if "env_op" in c else bs[0]
            terms.append(CouplingTerm(tuple(ops), env_op, env_ops_by_carrier=tuple(bs),
                                      label=c.get("label", "")))
        else:
            env_op = matrix_from_json(_get(c, "env_op", p, list), f"{p}.env_op")
            terms.append(CouplingTerm(tuple(ops), env_op, label=c.get("label", "")))

    gamma = _get(doc, "gamma", root, (int, float))
    discrete = None
    d = _get(doc, "discrete", root, dict, required=False)
    if d is not None:
        pd = f"{root}.discrete"
        dt = float(_get(d, "dt", pd, (int, float)))
        n_steps = _get(d, "n_steps", pd, int)
        regime = _get(d, "regime", pd, str, required=False) or "dissipative"
        if regime not in ("dissipative", "unitary-limit"):
            raise DocumentError(f"{pd}.regime", f"unknown regime {regime!r}")
        g = _get(d, "g", pd, (int, float), required=False)
        if regime == "dissipative" and g is not None:
            raise DocumentError(f"{pd}.g", "g is computed as sqrt(gamma/dt) in the dissipative regime; omit it")
        if regime == "unitary-limit" and g is None:
            raise DocumentError(f"{pd}.g", "unitary-limit regime requires g")
        discrete = DiscreteSpec(dt, n_steps, regime, None if g is None else float(g))

    weights = _get(doc, "drift_weights", root, list, required=False)
    if weights is not None:
        try:
            weights = np.array(weights, dtype=float)
        except (TypeError, ValueError):
            raise DocumentError(f"{root}.drift_weights", "expected a numeric table") from None

    model = CascadeModel(
        carrier_dims=tuple(dims),
        env_dim=env_dim,
        eta=eta,
        coupling=tuple(terms),
        damper=DamperMap(tuple(kraus)),
        gamma=float(gamma),
        free_hamiltonians=tuple(free) if any(f is not None for f in free) else None,
        discrete=discrete,
        drift_weights=weights,
        carrier_labels=tuple(labels),
    )
    init = _get(doc, "initial_state", root, list, required=False)
    rho0 = None if init is None else matrix_from_json(init, f"{root}.initial_state")
    observables = []
    for i, o in enumerate(_get(doc, "observables", root, list, required=False) or []):
        p = f"{root}.observables[{i}]"
        observables.append((_get(o, "label", p, str), matrix_from_json(_get(o, "matrix", p, list), f"{p}.matrix")))
    return LoadedModel(model, rho0, observables)


def model_to_document(model: CascadeModel, initial_state=None, observables=None) -> dict:
    """Inverse of :func:`model_from_document` for models without time-indexed operators."""
    if model.is_time_dependent:
        raise ValueError("time-indexed operator families have no JSON representation")
    carriers = []
    for m, d in enumerate(model.carrier_dims):
        c = {"dim": d, "label": model.carrier_labels[m]}
        h = model.free_hamiltonian(m)
        if h is not None:
            c["free_hamiltonian"] = matrix_to_json(h)
        carriers.append(c)
    coupling = []
    for term in model.coupling:
        c = {"carrier_ops": [matrix_to_json(a) for a in term.carrier_ops], "env_op": matrix_to_json(term.env_op)}
        if term.env_ops_by_carrier is not None:
            c["env_ops_by_carrier"] = [matrix_to_json(b) for b in term.env_ops_by_carrier]
        if term.label:
            c["label"] = term.label
        coupling.append(c)
    doc = {
        "carriers": carriers,
        "environment": {
            "dim": model.env_dim,
            "eta": matrix_to_json(model.eta),
            "damper_kraus": [matrix_to_json(k) for k in model.damper.kraus],
        },
        "coupling": coupling,
        "gamma": model.gamma,
    }
    if model.discrete is not None:
        d = {"dt": model.discrete.dt, "n_steps": model.discrete.n_steps, "regime": model.discrete.regime}
        if model.discrete.regime == "unitary-limit":
            d["g"] = model.discrete.g
        doc["discrete"] = d
    if model.drift_weights is not None:
        doc["drift_weights"] = model.drift_weights.tolist()
    if initial_state is not None:
        doc["initial_state"] = matrix_to_json(initial_state)
    if observables:
        doc["observables"] = [{"label": k, "matrix": matrix_to_json(v)} for k, v in observables]
    return doc


def load_document(path) -> dict:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise DocumentError("$", f"invalid JSON: {exc}") from None


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=True) + "\n"


def model_digest(model: CascadeModel) -> str:
    """sha256 of the canonical JSON form (time-indexed models hash their raw samples)."""
    h = hashlib.sha256()
    if not model.is_time_dependent:
        h.update(json.dumps(model_to_document(model), sort_keys=True).encode())
        return h.hexdigest()
    h.update(repr((model.carrier_dims, model.env_dim, model.gamma)).encode())
    for arr in [model.eta, *model.damper.kraus]:
        h.update(np.ascontiguousarray(arr).tobytes())
    for term in model.coupling:
        for m in range(model.n_carriers):
            fam = term.carrier_ops_timed[m] if term.is_timed(m) else None
            h.update(np.ascontiguousarray(fam.samples if fam is not None else term.carrier_ops[m]).tobytes())
            h.update(np.ascontiguousarray(term.env_op_for(m)).tobytes())
    return h.hexdigest()
