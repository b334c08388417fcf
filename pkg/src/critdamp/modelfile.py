"""JSON system description files.

Layout::

    {
      "M": [[1.0]],                      # row-major, n x n
      "K": [[1.0]],
      "params": ["nu", "zeta"],
      "kernels": [
        {"relax": "nu",                  # binding
         "form": "nu",                   # optional: "nu" (1/(1+nu s)) or "mu" (mu/(s+mu))
         "rank": 1,                      # optional rank hint
         "C": [{"i": 0, "j": 0, "value": {"param": "zeta", "multiplier": 2.0}}]}
      ],
      "design_plane": {"p": "nu", "q": "zeta", "fixed": {},
                       "ranges": {"p": [0.0, 0.25], "q": [0.0, 4.0]}}
    }

A binding is a number (constant), a parameter name, or
``{"param": name, "multiplier": m}``. ``C`` lists upper-triangle entries
only (``i <= j``). ``n`` may be given and must then match ``M``.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

from .model import Constant, DesignPlane, Kernel, ModelError, Ref, ViscoelasticModel


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _binding(obj, path, params, problems):
    if _is_number(obj):
        return Constant(float(obj))
    if isinstance(obj, str):
        name, mult = obj, 1.0
    elif isinstance(obj, dict):
        extra = set(obj) - {"param", "multiplier"}
        if extra:
            problems.append(f"{path}: unexpected keys {sorted(extra)}")
        name = obj.get("param")
        mult = obj.get("multiplier", 1.0)
        if not isinstance(name, str):
            problems.append(f"{path}.param: expected a parameter name")
            return None
        if not _is_number(mult):
            problems.append(f"{path}.multiplier: expected a finite number, got {mult!r}")
            return None
    else:
        problems.append(f"{path}: expected a number, a parameter name or {{param, multiplier}}, got {obj!r}")
        return None
    if params is not None and name not in params:
        problems.append(f"{path}: unknown parameter {name!r}")
    return Ref(name, float(mult))


def _matrix(obj, path, problems):
    if (not isinstance(obj, list) or not obj
            or not all(isinstance(r, list) and len(r) == len(obj) for r in obj)):
        problems.append(f"{path}: expected a nonempty square nested list")
        return None
    ok = True
    for i, row in enumerate(obj):
        for j, v in enumerate(row):
            if not _is_number(v):
                problems.append(f"{path}[{i}][{j}]: expected a finite number, got {v!r}")
                ok = False
    return obj if ok else None


def _range(obj, path, problems):
    if (not isinstance(obj, list) or len(obj) != 2 or not all(_is_number(v) for v in obj)):
        problems.append(f"{path}: expected [min, max]")
        return None
    return tuple(float(v) for v in obj)


def model_from_dict(data: dict):
    """Build ``(model, plane)`` from a parsed description; raise ModelError listing every problem."""
    problems = []
    if not isinstance(data, dict):
        raise ModelError(["top level: expected an object"])
    known = {"n", "M", "K", "params", "kernels", "design_plane"}
    extra = set(data) - known
    if extra:
        problems.append(f"top level: unexpected keys {sorted(extra)}")
    for key in ("M", "K", "params", "kernels", "design_plane"):
        if key not in data:
            problems.append(f"{key}: missing")
    M = _matrix(data["M"], "M", problems) if "M" in data else None
    K = _matrix(data["K"], "K", problems) if "K" in data else None
    if M is not None and "n" in data and data["n"] != len(M):
        problems.append(f"n: {data['n']!r} does not match M ({len(M)}x{len(M)})")
    params = data.get("params")
    if "params" in data:
        if not isinstance(params, list) or not all(isinstance(p, str) for p in params):
            problems.append("params: expected a list of names")
            params = None
        elif len(set(params)) != len(params):
            problems.append("params: duplicate names")
    n = len(M) if M is not None else None

    kernels = []
    raw_kernels = data.get("kernels", [])
    if not isinstance(raw_kernels, list) or ("kernels" in data and not raw_kernels):
        problems.append("kernels: expected a nonempty list")
        raw_kernels = []
    for k, kd in enumerate(raw_kernels):
        path = f"kernels[{k}]"
        if not isinstance(kd, dict):
            problems.append(f"{path}: expected an object")
            continue
        extra = set(kd) - {"relax", "form", "rank", "C"}
        if extra:
            problems.append(f"{path}: unexpected keys {sorted(extra)}")
        if "relax" not in kd:
            problems.append(f"{path}.relax: missing")
        relax = _binding(kd.get("relax", 0.0), f"{path}.relax", params, problems)
        form = kd.get("form", "nu")
        if form not in ("nu", "mu"):
            problems.append(f"{path}.form: expected 'nu' or 'mu', got {form!r}")
        rank = kd.get("rank")
        if rank is not None and (not isinstance(rank, int) or isinstance(rank, bool) or rank < 0):
            problems.append(f"{path}.rank: expected a nonnegative integer, got {rank!r}")
        entries = []
        rawC = kd.get("C")
        if not isinstance(rawC, list):
            problems.append(f"{path}.C: expected a list of {{i, j, value}} entries")
            rawC = []
        seen = set()
        for e, ed in enumerate(rawC):
            epath = f"{path}.C[{e}]"
            if not isinstance(ed, dict) or not {"i", "j", "value"} <= set(ed):
                problems.append(f"{epath}: expected {{i, j, value}}")
                continue
            i, j = ed["i"], ed["j"]
            if not (isinstance(i, int) and isinstance(j, int)):
                problems.append(f"{epath}: i and j must be integers")
                continue
            if n is not None and not (0 <= i <= j < n):
                problems.append(f"{epath}: ({i}, {j}) is not in the upper triangle of a {n}x{n} matrix")
            if (i, j) in seen:
                problems.append(f"{epath}: duplicate entry ({i}, {j})")
            seen.add((i, j))
            b = _binding(ed["value"], f"{epath}.value", params, problems)
            if b is not None:
                entries.append(((i, j), b))
        if relax is not None and form in ("nu", "mu"):
            kernels.append(Kernel(relax, tuple(entries), form, rank))

    plane_args = None
    dp = data.get("design_plane")
    if "design_plane" in data:
        if not isinstance(dp, dict):
            problems.append("design_plane: expected an object")
        else:
            for key in ("p", "q", "ranges"):
                if key not in dp:
                    problems.append(f"design_plane.{key}: missing")
            fixed = dp.get("fixed", {})
            if not isinstance(fixed, dict) or not all(_is_number(v) for v in fixed.values()):
                problems.append("design_plane.fixed: expected a map of name -> number")
                fixed = {}
            ranges = dp.get("ranges", {})
            if not isinstance(ranges, dict):
                problems.append("design_plane.ranges: expected {p: [min, max], q: [min, max]}")
                ranges = {}
            pr = _range(ranges.get("p"), "design_plane.ranges.p", problems)
            qr = _range(ranges.get("q"), "design_plane.ranges.q", problems)
            if isinstance(dp.get("p"), str) and isinstance(dp.get("q"), str) and pr and qr:
                plane_args = (dp["p"], dp["q"], fixed, pr, qr)

    model = plane = None
    if M is not None and K is not None and params is not None and not problems:
        try:
            model = ViscoelasticModel(M=M, K=K, kernels=kernels, param_names=tuple(params))
        except ModelError as exc:
            problems += exc.problems
    if plane_args is not None:
        try:
            plane = DesignPlane(*plane_args)
        except ModelError as exc:
            problems += [f"design_plane: {p}" for p in exc.problems]
    if model is not None and plane is not None:
        try:
            plane.check(model)
        except ModelError as exc:
            problems += [f"design_plane: {p}" for p in exc.problems]
    if problems:
        raise ModelError(problems)
    return model, plane


def _binding_to_json(b):
    if isinstance(b, Constant):
        return b.value
    return {"param": b.name, "multiplier": b.multiplier}


def model_to_dict(model: ViscoelasticModel, plane: DesignPlane) -> dict:
    return {
        "n": model.n,
        "M": model.M.tolist(),
        "K": model.K.tolist(),
        "params": list(model.param_names),
        "kernels": [
            {
                "relax": _binding_to_json(ker.relax),
                "form": ker.form,
                **({"rank": ker.rank_hint} if ker.rank_hint is not None else {}),
                "C": [{"i": i, "j": j, "value": _binding_to_json(b)} for (i, j), b in ker.C],
            }
            for ker in model.kernels
        ],
        "design_plane": {
            "p": plane.p_name,
            "q": plane.q_name,
            "fixed": dict(plane.fixed),
            "ranges": {"p": list(plane.p_range), "q": list(plane.q_range)},
        },
    }


def load_model(path):
    """Read and validate a model file. Raises ModelError (with every problem) or OSError."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError([f"{path}: invalid JSON ({exc})"]) from None
    return model_from_dict(data)


def save_model(model: ViscoelasticModel, plane: DesignPlane, path):
    Path(path).write_text(json.dumps(model_to_dict(model, plane), indent=2) + "\n")
