"""JSON form of a method table with its SSP coefficient."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import metadata

import numpy as np

from .methods import Family, MethodTable

KINDS = ("classical", "perturbed", "additive", "imex")
SUM_TOL = 1e-8


class DocumentError(ValueError):
    pass


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _num(x):
    # repr is the shortest string that reads back to the same double
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(repr(x))


@dataclass
class MethodDocument:
    kind: str
    k: int
    p: int
    y: float
    r: float
    r_second: float
    alpha: list
    beta: list
    beta_second: list
    meta: dict = field(default_factory=dict)

    def to_json(self, pretty: bool = False) -> str:
        body = {
            "kind": self.kind,
            "k": int(self.k),
            "p": int(self.p),
            "y": _num(self.y),
            "r": _num(self.r),
            "r_second": _num(self.r_second),
            "alpha": [_num(v) for v in self.alpha],
            "beta": [_num(v) for v in self.beta],
            "beta_second": [_num(v) for v in self.beta_second],
            "meta": self.meta,
        }
        return json.dumps(body, indent=2 if pretty else None)

    def table(self) -> MethodTable:
        family = Family.ADDITIVE if self.kind == "imex" else Family(self.kind)
        explicit = self.meta.get("explicit")
        if explicit is None:
            explicit = self.beta[-1] == 0.0 and self.beta_second[-1] == 0.0
        if self.kind == "imex":
            explicit = False
        return MethodTable(self.k, family, self.alpha, self.beta, self.beta_second, bool(explicit))

    @classmethod
    def from_result(cls, result, tol: float | None = None) -> "MethodDocument":
        m = result.method
        meta = {
            "tool_version": tool_version(),
            "explicit": m.explicit,
            "bisection_gap": result.bisection_gap,
            "nonzero_count": result.nonzero_count,
        }
        if tol is not None:
            meta["tol"] = tol
        return cls(result.family.value, result.k, result.p, result.y, result.r,
                   result.certificate.r_second, list(m.alpha), list(m.beta),
                   list(m.beta_second), meta)

    @classmethod
    def from_table(cls, method: MethodTable, p: int, y: float = 1.0,
                   r: float = 0.0, r_second: float = 0.0) -> "MethodDocument":
        return cls(method.family.value, method.k, p, y, r, r_second, list(method.alpha),
                   list(method.beta), list(method.beta_second),
                   {"tool_version": tool_version(), "explicit": method.explicit})

    @classmethod
    def from_dict(cls, data) -> "MethodDocument":
        if not isinstance(data, dict):
            raise DocumentError("method document must be a JSON object")
        try:
            kind = str(data["kind"])
            k = data["k"]
            alpha = [float(v) for v in data["alpha"]]
            beta = [float(v) for v in data["beta"]]
            beta2 = data.get("beta_second")
            beta2 = [0.0] * (len(beta)) if beta2 is None else [float(v) for v in beta2]
        except (KeyError, TypeError, ValueError) as exc:
            raise DocumentError(f"malformed method document: {exc}") from exc
        if kind not in KINDS:
            raise DocumentError(f"unknown kind {kind!r}")
        if not isinstance(k, int) or isinstance(k, bool) or k < 1:
            raise DocumentError("k must be a positive integer")
        if len(alpha) != k or len(beta) != k + 1 or len(beta2) != k + 1:
            raise DocumentError(f"arrays must have sizes {k}, {k + 1}, {k + 1}")
        if not all(math.isfinite(v) for v in alpha + beta + beta2):
            raise DocumentError("coefficients must be finite")
        if abs(sum(alpha) - 1.0) > SUM_TOL:
            raise DocumentError(f"alpha sums to {sum(alpha)!r}, not 1")
        meta = data.get("meta") or {}
        if not isinstance(meta, dict):
            raise DocumentError("meta must be an object")

        def opt(name, default):
            v = data.get(name)
            return default if v is None else float(v)

        p = data.get("p", 1)
        doc = cls(kind, k, int(p), opt("y", 1.0), opt("r", 0.0), opt("r_second", 0.0),
                  alpha, beta, beta2, meta)
        try:
            doc.table()
        except ValueError as exc:
            raise DocumentError(str(exc)) from exc
        return doc

    @classmethod
    def from_json(cls, text: str) -> "MethodDocument":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DocumentError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)


def arrays_equal(a: MethodDocument, b: MethodDocument) -> bool:
    return all(np.array_equal(np.asarray(getattr(a, n)), np.asarray(getattr(b, n)))
               for n in ("alpha", "beta", "beta_second"))
