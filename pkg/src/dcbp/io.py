"""JSON model files and CSV writers.

Model file layout (types are 1-based in files, 0-based in the API)::

    {"variant": "sdcbp", "rates": [1, 1],
     "laws": [{"marginals": {"1": {"0": 0.4, "2": 0.6}, "2": {"0": 0.5, "1": 0.5}}},
              {"atoms": [{"counts": [0, 0], "prob": 0.25}, {"counts": [0, 2], "prob": 0.75}]}]}

``vdcbp`` adds ``n`` and ``m``.  ``tcvdbp`` uses ``mixed``, ``exclusive``,
``theta``, ``lambdaV``, ``typeChange`` (either the full square matrix or
``{"mixed": [...], "exclusive": [...]}``), ``shareLaws`` and optionally
``boundaryShifts``.  ``social`` holds a ``social`` parameter block and a
``targetPost``.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ArgumentError, ModelError
from .model import (
    Model,
    OffspringLaw,
    SdcbpModel,
    SocialNetworkParams,
    TcvdbpModel,
    VdcbpModel,
    build_social_network_model,
    validate,
)

VARIANTS = ("sdcbp", "vdcbp", "tcvdbp", "social")


def _law(raw: Any, n_types: int, where: str) -> OffspringLaw:
    if not isinstance(raw, dict):
        raise ModelError(f"{where}: expected an object with 'atoms' or 'marginals'")
    if "atoms" in raw:
        atoms = raw["atoms"]
        if not isinstance(atoms, list) or not atoms:
            raise ModelError(f"{where}: 'atoms' must be a non-empty list")
        try:
            return OffspringLaw.from_atoms((a["counts"], float(a["prob"])) for a in atoms)
        except (KeyError, TypeError) as exc:
            raise ModelError(f"{where}: each atom needs 'counts' and 'prob' ({exc})") from exc
    if "marginals" in raw:
        try:
            marg = {
                int(j) - 1: {int(k): float(p) for k, p in dist.items()}
                for j, dist in raw["marginals"].items()
            }
        except (AttributeError, ValueError, TypeError) as exc:
            raise ModelError(f"{where}: malformed marginals ({exc})") from exc
        return OffspringLaw.product(n_types, marg)
    raise ModelError(f"{where}: expected 'atoms' or 'marginals'")


def _field(doc: dict, key: str, where: str = "model"):
    if key not in doc:
        raise ModelError(f"{where}: missing field '{key}'")
    return doc[key]


def model_from_dict(doc: dict) -> Model:
    if not isinstance(doc, dict):
        raise ModelError("model file must hold a JSON object")
    variant = _field(doc, "variant")
    if variant not in VARIANTS:
        raise ModelError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    try:
        if variant == "social":
            s = _field(doc, "social")
            params = SocialNetworkParams(
                eta1=float(s["eta1"]),
                eta2=float(s["eta2"]),
                delta_att=float(s["deltaAtt"]),
                theta=float(s["theta"]),
                lambda_v=float(s["lambdaV"]),
                mean_friends=float(s["meanFriends"]),
                read_probs=tuple(s["readProbs"]),
                level_probs=tuple(s["levelProbs"]),
                p=float(s["p"]),
                N=int(s["N"]),
            )
            bad = params.violations()
            if bad:
                raise ModelError("; ".join(map(str, bad)), bad)
            model = build_social_network_model(params, int(doc.get("targetPost", 1)))
        elif variant == "tcvdbp":
            M, E = int(_field(doc, "mixed")), int(_field(doc, "exclusive"))
            laws = [_law(x, M + E, f"shareLaws[{i}]") for i, x in enumerate(_field(doc, "shareLaws"))]
            tc = _field(doc, "typeChange")
            if isinstance(tc, dict):
                a = np.zeros((M + E, M + E))
                a[:M, :M] = np.asarray(tc["mixed"], dtype=float)
                a[M:, M:] = np.asarray(tc["exclusive"], dtype=float)
            else:
                a = np.asarray(tc, dtype=float)
            model = TcvdbpModel(
                M, E, float(_field(doc, "theta")), float(_field(doc, "lambdaV")), a, tuple(laws),
                bool(doc.get("boundaryShifts", False)),
            )
        else:
            raw = _field(doc, "laws")
            if not isinstance(raw, list):
                raise ModelError("'laws' must be a list")
            n_types = len(raw)
            laws = tuple(_law(x, n_types, f"laws[{i}]") for i, x in enumerate(raw))
            rates = np.asarray(_field(doc, "rates"), dtype=float)
            if variant == "sdcbp":
                model = SdcbpModel(rates, laws)
            else:
                model = VdcbpModel(int(_field(doc, "n")), int(_field(doc, "m")), rates, laws)
    except ArgumentError as exc:
        raise ModelError(str(exc)) from exc
    except (TypeError, ValueError, KeyError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"malformed model: {exc!r}") from exc
    bad = validate(model)
    if bad:
        raise ModelError("; ".join(map(str, bad)), bad)
    return model


def load_model(path: str | Path) -> tuple[Model, dict]:
    """Parse and validate a model file; raises ``ModelError``."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: invalid JSON ({exc})") from exc
    return model_from_dict(doc), doc


def _law_dict(law: OffspringLaw) -> dict:
    return {"atoms": [{"counts": [int(c) for c in law.counts[a]], "prob": float(law.probs[a])} for a in range(len(law.probs))]}


def model_to_dict(model: Model) -> dict:
    if isinstance(model, SdcbpModel):
        return {"variant": "sdcbp", "rates": model.rates.tolist(), "laws": [_law_dict(l) for l in model.laws]}
    if isinstance(model, VdcbpModel):
        return {
            "variant": "vdcbp", "n": model.n, "m": model.m,
            "rates": model.rates.tolist(), "laws": [_law_dict(l) for l in model.laws],
        }
    return {
        "variant": "tcvdbp", "mixed": model.mixed, "exclusive": model.exclusive,
        "theta": model.theta, "lambdaV": model.lambda_v,
        "typeChange": model.type_change.tolist(),
        "shareLaws": [_law_dict(l) for l in model.share_laws],
        "boundaryShifts": model.boundary_shifts,
    }


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
