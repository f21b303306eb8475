"""High-precision reference values for the unit tests.

Run with `python3 worked_example.py`; the printed numbers are frozen into
signal_test.cpp, rkl_test.cpp and pool_test.cpp.
"""
from mpmath import mp, mpf, log, exp

mp.dps = 40
EPS = mpf("1e-8")

p = [mpf("0.2"), mpf("0.5"), mpf("0.3")]
q1 = [mpf("0.8"), mpf("0.1"), mpf("0.1")]
q2 = [mpf("0.2"), mpf("0.7"), mpf("0.1")]
views = [q1, q2]
w = [mpf(1) / 2] * 2
V = range(3)

delta = [[log(q[v]) - log(p[v]) for v in V] for q in views]
log_qg_un = [sum(w[m] * log(views[m][v]) for m in range(2)) for v in V]
z = sum(exp(x) for x in log_qg_un)
qg = [exp(x) / z for x in log_qg_un]
qa = [sum(w[m] * views[m][v] for m in range(2)) for v in V]
J = [log(qa[v]) - log_qg_un[v] for v in V]
a_geo = [sum(w[m] * delta[m][v] for m in range(2)) for v in V]
C = [min(1, abs(a_geo[v]) / (sum(w[m] * abs(delta[m][v]) for m in range(2)) + EPS)) for v in V]
R = [abs(a_geo[v]) / (abs(a_geo[v]) + J[v] + EPS) for v in V]
lam = [C[v] * R[v] for v in V]
a_hat = [a_geo[v] + lam[v] * J[v] for v in V]
s = [log_qg_un[v] + lam[v] * J[v] for v in V]
zs = sum(exp(x) for x in s)
qstar = [exp(x) / zs for x in s]


def show(name, xs):
    print(name, "=", ", ".join(mp.nstr(x, 17) for x in xs))


show("delta1", delta[0])
show("delta2", delta[1])
show("qg_unnorm", [exp(x) for x in log_qg_un])
show("qg", qg)
show("qa", qa)
show("J", J)
show("a_geo", a_geo)
show("C", C)
show("R", R)
show("lambda", lam)
show("a_hat", a_hat)
show("log_qstar", [log(x) for x in qstar])

# reverse KL and its logit gradient
pp = [mpf("0.5"), mpf("0.5")]
qq = [mpf("0.9"), mpf("0.1")]
K = sum(pp[i] * (log(pp[i]) - log(qq[i])) for i in range(2))
show("kl", [K])
show("dz", [pp[i] * (log(pp[i]) - log(qq[i]) - K) for i in range(2)])
show("ln1.8", [log(mpf("1.8"))])
