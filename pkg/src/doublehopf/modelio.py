"""Reading models from JSON.

Two document shapes are accepted::

    {"builtin": "epidemic", "params": {"d2": 5.0, "omega": 0.5}}

or a user model whose data are affine in the two parameters and whose
reaction term is a polynomial without constant or linear part::

    {
      "name": "toy",
      "n_components": 1,
      "domain_scale": 1.0,
      "param": [1.0, 0.0],
      "param_names": ["tau", "k"],
      "delays": [[0.0, 1.0, 0.0]],
      "diffusion": [[1.0, 0.0, 0.0]],
      "linear_now": {"const": [[0.0]], "d1": [[0.0]], "d2": [[1.0]]},
      "linear_delayed": [{"const": [[-1.0]]}],
      "reaction": [[{"coef": -1.0, "vars": [[0, 0], [0, 0], [0, 0]]}]],
      "delay_param": 0,
      "delay_slot": 0
    }

An affine triple ``[c0, c1, c2]`` stands for ``c0 + c1 p1 + c2 p2``.  A
reaction monomial multiplies the listed history values ``[slot,
component]``, slot 0 being the present and slot ``k`` the ``k``-th lag.
"""
from __future__ import annotations

import itertools
import json
from typing import Any

import numpy as np

from .model import BUILTINS, ModelError, ModelSpec


def _affine_scalars(rows):
    rows = np.asarray(rows, float).reshape(-1, 3)
    return (lambda p: rows[:, 0] + rows[:, 1] * p[0] + rows[:, 2] * p[1]), rows[:, 1:].T


def _affine_matrix(block, n):
    z = np.zeros((n, n))
    const = np.asarray(block.get("const", z), float)
    d1 = np.asarray(block.get("d1", z), float)
    d2 = np.asarray(block.get("d2", z), float)
    for m in (const, d1, d2):
        if m.shape != (n, n):
            raise ModelError(f"matrix of shape {m.shape}, expected {(n, n)}")
    return (lambda p: const + p[0] * d1 + p[1] * d2), np.array([d1, d2])


def _monomials(spec_rows, n, n_delays):
    out = []
    if len(spec_rows) != n:
        raise ModelError("reaction needs one list of monomials per component")
    for comp, row in enumerate(spec_rows):
        for term in row:
            vars_ = [tuple(int(x) for x in v) for v in term["vars"]]
            if len(vars_) < 2:
                raise ModelError("reaction monomials must be at least quadratic")
            for slot, c in vars_:
                if not (0 <= slot <= n_delays and 0 <= c < n):
                    raise ModelError(f"monomial variable {(slot, c)} out of range")
            out.append((comp, float(term["coef"]), vars_))
    return out


def _polynomial_reaction(monos, n):
    def reaction(p, h):
        out = np.zeros((n,) + np.shape(h[0][0]), dtype=np.result_type(h, float))
        for comp, coef, vars_ in monos:
            term = coef
            for slot, c in vars_:
                term = term * h[slot][c]
            out[comp] = out[comp] + term
        return out

    def multilinear(order):
        def form(p, *dirs):
            dtype = np.result_type(*dirs, float)
            out = np.zeros(n, dtype=dtype)
            for comp, coef, vars_ in monos:
                if len(vars_) != order:
                    continue
                acc = 0
                for perm in itertools.permutations(range(order)):
                    prod = coef
                    for d, k in zip(dirs, perm):
                        slot, c = vars_[k]
                        prod = prod * d[slot][c]
                    acc = acc + prod
                out[comp] += acc
            return out
        return form

    return reaction, multilinear(2), multilinear(3)


def model_from_dict(doc: dict[str, Any]) -> ModelSpec:
    if "builtin" in doc:
        name = doc["builtin"]
        if name not in BUILTINS:
            raise ModelError(f"unknown built-in model {name!r}; choose from {sorted(BUILTINS)}")
        return BUILTINS[name](**doc.get("params", {}))
    n = int(doc["n_components"])
    delays, ddelay = _affine_scalars(doc["delays"])
    m = len(np.atleast_1d(doc["delays"])) if doc["delays"] else 0
    diffusion, ddiff = _affine_scalars(doc["diffusion"])
    now, dnow = _affine_matrix(doc.get("linear_now", {}), n)
    blocks = [_affine_matrix(b, n) for b in doc.get("linear_delayed", [])]
    if len(blocks) != m:
        raise ModelError("need one delayed matrix per delay")

    def delayed(p):
        return np.array([f(p) for f, _ in blocks]).reshape(m, n, n)

    dG = np.array([d for _, d in blocks]).reshape(m, 2, n, n).transpose(1, 0, 2, 3)
    monos = _monomials(doc.get("reaction", [[] for _ in range(n)]), n, m)
    reaction, d2form, d3form = _polynomial_reaction(monos, n)

    def derivatives(p):
        return ddiff, dnow, dG

    eq = doc.get("equilibrium")
    names = tuple(doc.get("param_names", ("p1", "p2")))
    return ModelSpec(
        name=doc.get("name", "user"),
        n_components=n,
        domain_scale=float(doc.get("domain_scale", 1.0)),
        param=np.asarray(doc["param"], float),
        delays=delays,
        diffusion=diffusion,
        linear_now=now,
        linear_delayed=delayed,
        reaction=reaction,
        reaction_d2=d2form,
        reaction_d3=d3form,
        param_names=names,
        delay_param=doc.get("delay_param"),
        delay_slot=doc.get("delay_slot"),
        derivatives=derivatives,
        delay_gradient=lambda p: ddelay.T,
        equilibrium=(lambda p: np.asarray(eq, float)) if eq is not None else None,
        meta={"source": "json"},
    )


def load_model(source: str, overrides: dict | None = None) -> ModelSpec:
    """A built-in by name or a JSON document by path, with parameter
    overrides applied to built-ins as keyword arguments."""
    overrides = dict(overrides or {})
    if source in BUILTINS:
        return BUILTINS[source](**overrides)
    with open(source) as fh:
        doc = json.load(fh)
    if "builtin" in doc:
        doc = {**doc, "params": {**doc.get("params", {}), **overrides}}
    elif overrides:
        spec = model_from_dict(doc)
        p = np.array(spec.param, float)
        for k, v in overrides.items():
            if k not in spec.param_names:
                raise ModelError(f"unknown parameter {k!r}")
            p[spec.param_names.index(k)] = v
        return spec.with_param(p)
    return model_from_dict(doc)
