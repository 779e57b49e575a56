"""Independent reference values for the bundled fixtures.

Parses the .m files with a small standalone reader and solves them with
PYPOWER's runopf (PIPS interior point) and runpf (Newton). The output JSON is
frozen into crates/core/tests/data/reference.json.
"""
import copy
import json
import re
import sys
import numpy as np
from pypower.api import runopf, runpf, ppoption


def read_m(path):
    text = open(path).read()
    text = re.sub(r"%.*", "", text)
    out = {"version": "2"}
    out["baseMVA"] = float(re.search(r"mpc\.baseMVA\s*=\s*([0-9.eE+-]+)", text).group(1))
    for key in ("bus", "gen", "branch", "gencost"):
        body = re.search(r"mpc\.%s\s*=\s*\[(.*?)\];" % key, text, re.S).group(1)
        rows = [r.split() for r in body.replace("\n", ";").split(";") if r.strip()]
        width = max(len(r) for r in rows)
        out[key] = np.array([[float(v) for v in r] + [0.0] * (width - len(r)) for r in rows])
    # pypower wants the full 21-column gen table and 13-column branch table
    gen = np.zeros((out["gen"].shape[0], 21))
    gen[:, : out["gen"].shape[1]] = out["gen"]
    out["gen"] = gen
    return out


OPT = ppoption(VERBOSE=0, OUT_ALL=0, PDIPM_GRADTOL=1e-10, PDIPM_COMPTOL=1e-10,
               PDIPM_COSTTOL=1e-12, PDIPM_FEASTOL=1e-10)


def opf(ppc):
    ppc = copy.deepcopy(ppc)
    # PIPS chokes on an empty flow-limit block; 9900 MVA is unlimited in practice
    ppc["branch"][ppc["branch"][:, 5] == 0, 5] = 9900.0
    r = runopf(ppc, OPT)
    assert r["success"]
    return {"objective": float(r["f"]), "pg": r["gen"][:, 1].tolist(), "qg": r["gen"][:, 2].tolist(),
            "vm": r["bus"][:, 7].tolist()}


def pf(ppc):
    r, ok = runpf(copy.deepcopy(ppc),
                  ppoption(VERBOSE=0, OUT_ALL=0, PF_TOL=1e-10))
    assert ok
    return {"vm": r["bus"][:, 7].tolist(), "va_deg": r["bus"][:, 8].tolist(), "pg": r["gen"][:, 1].tolist()}


def main(data_dir):
    ref = {}
    for name in ("case14", "case_ieee30"):
        ppc = read_m(f"{data_dir}/{name}.m")
        entry = {
            "n_bus": int(ppc["bus"].shape[0]),
            "n_gen": int(ppc["gen"].shape[0]),
            "n_branch": int(ppc["branch"].shape[0]),
            "opf": opf(ppc),
            "pf": pf(ppc),
        }
        scaled = copy.deepcopy(ppc)
        scaled["bus"][:, 2] *= 1.1
        entry["opf_pd_x1p1"] = opf(scaled)
        ref[name] = entry
    json.dump(ref, sys.stdout, indent=1)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/data")
