"""Regenerate two-moment.oracle.json: a dense-grid LP over the measure simplex.

Run from this directory with ``python make_two_moment_oracle.py``.
"""

import json

import numpy as np
from scipy.optimize import linprog

GRID = 4001

cfg = json.load(open("two-moment.json"))
a = cfg["qoi"]["threshold"]
m1, m2 = cfg["constraints"]["equal"]
x = np.linspace(0.0, 1.0, GRID)
a_eq = np.vstack([np.ones_like(x), x, x**2])
b_eq = np.array([1.0, m1, m2])
tail = (x >= a).astype(float)
out = {"grid": GRID, "method": "highs-ipm"}
for name, sign in (("sup", -1.0), ("inf", 1.0)):
    res = linprog(sign * tail, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs-ipm")
    assert res.status == 0, res.message
    out[name] = round(float(tail @ res.x), 9)
json.dump(out, open("two-moment.oracle.json", "w"), indent=2, sort_keys=True)
print(out)
