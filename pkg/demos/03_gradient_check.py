"""
Checking every gradient against finite differences
==================================================

The analytic backward pass of the full model (Node2Seq layer, two GCN
layers, skip connection, cross-entropy and weight decay) is compared with
central differences. Ranking is piecewise constant in the parameters, so the
check uses instances whose scores are well separated.
"""
from node2seq import SelectorConfig
from node2seq.gradcheck import gradcheck

for label, kw in [
    ("mean readout, sum skip", {}),
    ("max readout, concat skip", {"readout": "max", "skip": "concat"}),
    ("non-local selection", {"selector": SelectorConfig(0.0, 2, True)}),
]:
    res = gradcheck(seed=0, **kw)
    print(f"{label:28s} worst relative error {res.worst:.2e}  passed={res.passed}")

# a broken conv backward is caught
res = gradcheck(seed=0, corrupt_conv=True)
print(f"{'corrupted conv gradient':28s} worst relative error {res.worst:.2e}  passed={res.passed}")

# a coarse step inflates the truncation error
res = gradcheck(seed=0, h=1e-2)
print(f"{'h = 1e-2':28s} worst relative error {res.worst:.2e}  passed={res.passed}")
