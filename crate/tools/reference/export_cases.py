"""Write the bundled MATPOWER fixtures.

case14.m comes verbatim from PYPOWER's case14 (MATPOWER case14).
case_ieee30.m is rebuilt from pandapower's case_ieee30 element tables:
generator reactive limits are taken with MATPOWER's sign convention, branch
order follows the IEEE common data format listing, and rateA is 0 (unlimited).
"""
import sys
import numpy as np
from pypower.api import case14

OUT = sys.argv[1] if len(sys.argv) > 1 else "crates/core/data"

def fmt(v):
    v = float(v)
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)

def write(path, name, ppc, comment):
    with open(path, "w") as f:
        f.write(f"function mpc = {name}\n")
        for line in comment.strip().splitlines():
            f.write(f"%{line}\n")
        f.write("\n%% MATPOWER Case Format : Version 2\nmpc.version = '2';\n\n")
        f.write("%%-----  Power Flow Data  -----%%\n%% system MVA base\n")
        f.write(f"mpc.baseMVA = {fmt(ppc['baseMVA'])};\n\n")
        heads = {
            "bus": "bus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin",
            "gen": "bus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin",
            "branch": "fbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax",
            "gencost": "2\tstartup\tshutdown\tn\tc(n-1)\t...\tc0",
        }
        cols = {"bus": 13, "gen": 10, "branch": 13, "gencost": None}
        for key in ("bus", "gen", "branch", "gencost"):
            if key == "gencost":
                f.write("%%-----  OPF Data  -----%%\n%% generator cost data\n%\t1\tstartup\tshutdown\tn\tx1\ty1\t...\txn\tyn\n")
            f.write(f"%% {key} data\n%\t{heads[key]}\nmpc.{key} = [\n")
            for row in ppc[key]:
                r = row if cols[key] is None else row[: cols[key]]
                if key == "gencost":
                    r = row[: 4 + int(row[3])]
                f.write("\t" + "\t".join(fmt(v) for v in r) + ";\n")
            f.write("];\n\n")


def ieee30():
    import pandapower.networks as pn
    from pandapower.converter.pypower import to_ppc

    net = pn.case_ieee30()
    ppc = to_ppc(net, init="flat", calculate_voltage_angles=True)
    bus = ppc["bus"][:, :13].copy()
    bus[:, 0] += 1
    bus[:, 11] = 1.06
    bus[:, 12] = 0.94
    bus[:, 8] = 0.0
    bus[:, 10] = 1
    # generators in MATPOWER order: slack first, then net.gen rows
    gens = []
    eg = net.ext_grid.iloc[0]
    gens.append([eg.bus + 1, 0.0, 0.0, -eg.min_q_mvar, -eg.max_q_mvar, eg.vm_pu, 100, 1, eg.max_p_mw, eg.min_p_mw])
    for _, g in net.gen.iterrows():
        gens.append([g.bus + 1, g.p_mw, 0.0, -g.min_q_mvar, -g.max_q_mvar, g.vm_pu, 100, 1, g.max_p_mw, g.min_p_mw])
    gen = np.array(gens, dtype=float)
    for i, row in enumerate(gen):
        bus[int(row[0]) - 1, 7] = row[5]
    cost = net.poly_cost
    gc = []
    for et, idx in [("ext_grid", 0)] + [("gen", i) for i in range(len(net.gen))]:
        c = cost[(cost.et == et) & (cost.element == idx)].iloc[0]
        gc.append([2, 0, 0, 3, c.cp2_eur_per_mw2, c.cp1_eur_per_mw, c.cp0_eur])
    order = [(1, 2), (1, 3), (2, 4), (3, 4), (2, 5), (2, 6), (4, 6), (5, 7), (6, 7), (6, 8),
             (6, 9), (6, 10), (9, 11), (9, 10), (4, 12), (12, 13), (12, 14), (12, 15), (12, 16),
             (14, 15), (16, 17), (15, 18), (18, 19), (19, 20), (10, 20), (10, 17), (10, 21),
             (10, 22), (21, 22), (15, 23), (22, 24), (23, 24), (24, 25), (25, 26), (25, 27),
             (28, 27), (27, 29), (27, 30), (29, 30), (8, 28), (6, 28)]
    br = ppc["branch"][:, :13].real.copy()
    br[:, 0] += 1
    br[:, 1] += 1
    rows = []
    for fb, tb in order:
        hit = [r for r in br if {int(r[0]), int(r[1])} == {fb, tb}]
        assert len(hit) == 1, (fb, tb)
        r = hit[0].copy()
        if int(r[0]) != fb:
            assert r[8] in (0.0, 1.0)
            r[0], r[1] = fb, tb
        r[4] = abs(r[4])
        r[5] = r[6] = r[7] = 0.0
        if r[8] == 1.0:
            r[8] = 0.0
        rows.append(r)
    assert len(rows) == len(br)
    bus = np.round(bus, 6)
    rows = np.round(np.array(rows), 6)
    return {"baseMVA": 100.0, "bus": bus, "gen": gen, "branch": rows, "gencost": np.array(gc)}


if __name__ == "__main__":
    write(f"{OUT}/case14.m", "case14", case14(),
          "   IEEE 14 bus test case (MATPOWER case14, as distributed with PYPOWER 5.1).")
    write(f"{OUT}/case_ieee30.m", "case_ieee30", ieee30(),
          "   IEEE 30 bus test case (classic data, 21 loads, 6 generators, no branch limits).\n"
          "   Rebuilt from pandapower's case_ieee30 tables by tools/reference/export_cases.py.")
