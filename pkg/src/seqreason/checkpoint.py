"""Parameter checkpoint I/O.

Format: a numpy ``.npz`` archive with two entries per ParamGroup,
``<name>/w`` (d_out, d_in) and ``<name>/b`` (d_out,). Shapes travel in the
npz headers, names in the keys; the layout is stable across runs and
documented in docs/file_formats.md.
"""
from __future__ import annotations

import numpy as np

from .autodiff import ParamGroup, Params, Tensor


def save_params(path, params: Params) -> None:
    payload = {}
    for name, pg in params.items():
        payload[f"{name}/w"] = pg.w.data
        payload[f"{name}/b"] = pg.b.data
    np.savez(path, **payload)


def load_params(path) -> Params:
    with np.load(path) as archive:
        names = sorted({k[:-2] for k in archive.files if k.endswith("/w")})
        params: Params = {}
        for name in names:
            params[name] = ParamGroup(name, Tensor(archive[f"{name}/w"]), Tensor(archive[f"{name}/b"]))
    return params
