"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` or directly as a script.
"""

import math
import subprocess
import sys as _sys
from pathlib import Path

import numpy as np
import pytest

from conftest import (random_chain, random_system, running_example, scalar_iid,
                      stable_random_system, three_state_mdp)
from tdmjls import JumpLinearSystem, MarkovChain, mc
from tdmjls.analysis import (build_iid_model, build_markov_steady_state, critical_alpha,
                             iid_closed_form, iid_forward, iid_steady_state,
                             iid_trajectory_with_limits, loglog_slope,
                             markov_trajectory_with_limits, perturbation_order_fit,
                             sigma_h22)
from tdmjls.chain import stationary_distribution
from tdmjls.mjls import (augmented_trajectory, build_augmented_lti, initial_moments,
                         mean_square_norm, moment_recursion)
from tdmjls.tdmodel import PolicyEvalProblem, build_td0, center_offsets

DATA = Path(__file__).parent / "data"


@pytest.fixture
def verdict(capsys):
    def emit(num, title, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {num:>2}: {title}  {detail}")
        assert ok, detail
    return emit


def _rel(a, b, scale=None):
    scale = np.abs(b).max() if scale is None else scale
    return np.abs(a - b).max() / max(scale, 1e-300)


def _centered(sys):
    p = stationary_distribution(sys.chain).p_inf
    return JumpLinearSystem(sys.chain, sys.A, sys.b - p @ sys.b, sys.alpha)


def _stable_iid(rng, n, d):
    sys = _centered(random_system(rng, n, d))
    while sigma_h22(sys, "iid") >= 0.999:
        sys = sys.with_alpha(sys.alpha / 2)
    return sys


def test_c01_dual_path_equivalence(verdict):
    rng = np.random.default_rng(101)
    worst = 0.0
    count = 0
    for n in range(1, 5):
        for d in range(1, 4):
            for _ in range(2):
                sys = stable_random_system(rng, n, d)
                xi0 = rng.normal(size=d)
                m0 = initial_moments(sys, xi0)
                direct = moment_recursion(sys, m0, 200)
                aug = augmented_trajectory(build_augmented_lti(sys), m0, sys.chain, 200)
                for a, b in zip(aug, direct):
                    worst = max(worst, _rel(a.q, b.q), _rel(a.Q, b.Q))
                count += 1
    verdict(1, "dual-path moment equivalence", count >= 20 and worst <= 1e-9,
            f"instances={count} max_rel_err={worst:.2e}")


def _mc_instances():
    rng = np.random.default_rng(202)
    mdp = build_td0(three_state_mdp(), 0.1)
    tab = three_state_mdp()
    tab = build_td0(PolicyEvalProblem(tab.P_s, tab.r, tab.gamma, np.eye(3)), 0.1,
                    state_p0=np.array([1.0, 0.0, 0.0]))
    rand = _centered(random_system(rng, 3, 2, alpha=0.1))
    return [
        ("running example", running_example(), np.array([1.0])),
        ("scalar IID", scalar_iid(), np.array([1.0])),
        ("3-state MDP d=2", mdp.sys, -mdp.theta_star),
        ("3-state tabular d=3", tab.sys, -tab.theta_star),
        ("random n=3 d=2", rand, np.array([1.0, -1.0])),
    ]


def test_c02_monte_carlo(verdict):
    steps = (1, 5, 20, 100)
    total = passed = 0
    details = []
    for i, (name, sys, xi0) in enumerate(_mc_instances()):
        est = mc.simulate_moments(sys, xi0, mc.MCConfig(100_000, 100, base_seed=1000 + i,
                                                        record_steps=steps))
        traj = moment_recursion(sys, initial_moments(sys, xi0), 100)
        iu = np.triu_indices(sys.d)
        ok = 0
        n_checks = 0
        for k in steps:
            r, m = est.index(k), traj[k]
            checks = [
                mc.within_se(m.mean, est.mean[r], est.mean_se[r]),
                mc.within_se(m.second_moment[iu], est.second_moment[r][iu],
                             est.second_moment_se[r][iu]),
                np.atleast_1d(mc.within_se(mean_square_norm(m), est.msn[r], est.msn_se[r])),
            ]
            flat = np.concatenate(checks)
            ok += int(flat.sum())
            n_checks += flat.size
        details.append(f"{name}:{ok}/{n_checks}")
        total += n_checks
        passed += ok
    frac = passed / total
    verdict(2, "MC agreement within 3 SE", frac >= 0.99,
            f"{passed}/{total} ({frac:.1%}) " + " ".join(details))


def test_c03_iid_closed_form(verdict):
    rng = np.random.default_rng(303)
    systems = [scalar_iid()] + [_stable_iid(rng, n, d) for n, d in [(2, 2), (3, 2), (4, 3)]]
    worst_cf = worst_lim = worst_fp = 0.0
    for sys in systems:
        model = build_iid_model(sys)
        d = sys.d
        mu0 = rng.normal(size=d)
        Q0 = np.outer(mu0, mu0)
        mus, Qs = iid_forward(model, mu0, Q0, 2000)
        for k in range(0, 201, 10):
            mu, Q = iid_closed_form(model, mu0, Q0, k)
            worst_cf = max(worst_cf, _rel(np.concatenate([mu, Q.ravel()]),
                                          np.concatenate([mus[k], Qs[k].ravel()])))
        ss = iid_steady_state(model)
        worst_lim = max(worst_lim, _rel(ss.Q_inf, Qs[-1]))
        vQ = ss.Q_inf.reshape(-1, order="F")
        worst_fp = max(worst_fp, _rel(model.H22 @ vQ + model.input_Q, vQ))
    delta = iid_steady_state(build_iid_model(scalar_iid(0.1))).delta_inf
    ok = (worst_cf <= 1e-10 and worst_lim <= 1e-8 and worst_fp <= 1e-10
          and abs(delta - 0.1 / 1.9) <= 1e-12)
    verdict(3, "IID closed form and limit", ok,
            f"closed_form={worst_cf:.1e} limit={worst_lim:.1e} fixed_point={worst_fp:.1e} "
            f"delta_inf={delta!r}")


def test_c04_stability_threshold(verdict):
    a_star = critical_alpha(scalar_iid(0.1), "iid")
    cfg = mc.MCConfig(10_000, 200, base_seed=4)
    grow = mc.divergence_probe(scalar_iid(2.5), [1.0], cfg)
    settle = mc.divergence_probe(scalar_iid(1.0), [1.0], cfg)
    ok = abs(a_star - 2.0) <= 1e-6 and grow.verdict == "growing" and settle.verdict == "settling"
    verdict(4, "stability threshold", ok,
            f"alpha*={a_star:.10f} probe(2.5)={grow.verdict} probe(1.0)={settle.verdict}")


def test_c05_perturbation_order(verdict):
    alphas = [1e-1, 1e-2, 1e-3, 1e-4]
    mdp = build_td0(three_state_mdp(), 0.1).sys
    rand = random_system(np.random.default_rng(5), 3, 2)
    cases = [
        ("scalar/iid", scalar_iid(), "iid"),
        ("running/markov", running_example(), "markov"),
        ("mdp/markov", mdp, "markov"),
        ("mdp/iid", mdp, "iid"),
        ("random/markov", rand, "markov"),
        ("random/iid", rand, "iid"),
    ]
    res = {name: perturbation_order_fit(sys, alphas, mode)[1] for name, sys, mode in cases}
    ok = all(r < 0.1 for r in res.values()) and len(res) >= 5
    verdict(5, "perturbation gap is O(alpha^2)", ok,
            " ".join(f"{k}={v:.3f}" for k, v in res.items()))


def test_c06_delta_order_alpha(verdict):
    alphas = np.array([1e-4, 1e-3, 1e-2, 1e-1])
    iid = [iid_steady_state(build_iid_model(scalar_iid(a))).delta_inf for a in alphas]
    mk = [build_markov_steady_state(running_example(alpha=a)).delta_inf for a in alphas]
    mdp = build_td0(three_state_mdp(), 0.1).sys
    md = [build_markov_steady_state(mdp.with_alpha(a)).delta_inf for a in alphas]
    s = [loglog_slope(alphas, v) for v in (iid, mk, md)]
    verdict(6, "delta_inf = O(alpha)", all(abs(x - 1) <= 0.05 for x in s),
            f"slopes iid={s[0]:.4f} markov={s[1]:.4f} mdp={s[2]:.4f}")


def test_c07_bounds_envelope(verdict):
    rng = np.random.default_rng(707)
    mdp = build_td0(three_state_mdp(), 0.1, state_p0=np.array([1.0, 0.0, 0.0]))
    cases = [
        ("running", running_example(), np.array([1.0])),
        ("mdp", mdp.sys, -mdp.theta_star),
        ("random", _centered(stable_random_system(rng, 3, 2)), np.array([2.0, -1.0])),
    ]
    contained = True
    slopes = []
    for name, sys, xi0 in cases:
        p_inf = stationary_distribution(sys.chain).p_inf
        assert np.abs(sys.chain.p0 - p_inf).max() > 1e-3  # non-stationary start
        traj, ss, b = markov_trajectory_with_limits(sys, k=500, xi0=xi0)
        mse = np.array([mean_square_norm(m) for m in traj])
        contained &= b.contains(mse)
        dev = np.abs(mse - ss.delta_inf)
        ks = np.arange(20, 501)
        keep = dev[ks] > 1e-9 * max(dev.max(), ss.delta_inf)
        slope = float(np.polyfit(ks[keep], np.log(dev[ks][keep]), 1)[0])
        slopes.append((name, slope, math.log(b.rate)))
    iid = build_iid_model(scalar_iid(0.1))
    _, Qs, _, b = iid_trajectory_with_limits(iid, [1.0], [[1.0]], 500)
    contained &= b.contains(np.trace(Qs, axis1=1, axis2=2))
    ok = contained and all(s <= lr + 0.01 for _, s, lr in slopes)
    verdict(7, "bounds envelope and decay rate", ok,
            f"contained={contained} " + " ".join(f"{n}:{s:.4f}<={lr:.4f}+0.01" for n, s, lr in slopes))


def test_c08_td0_construction(verdict):
    prob = three_state_mdp()
    tab = PolicyEvalProblem(prob.P_s, prob.r, prob.gamma, np.eye(3))
    v = np.linalg.solve(np.eye(3) - prob.gamma * prob.P_s, prob.r)
    theta_err = np.abs(build_td0(tab, 0.1).theta_star - v).max()

    rng = np.random.default_rng(808)
    problems = [prob, tab]
    for n_s, d in [(4, 2), (5, 3), (6, 2)]:
        P = rng.uniform(0, 1, size=(n_s, n_s)) * (rng.uniform(size=(n_s, n_s)) < 0.7)
        P += np.eye(n_s)[rng.permutation(n_s)] * 0.1  # keep irreducible-ish
        P /= P.sum(1, keepdims=True)
        problems.append(PolicyEvalProblem(P, rng.normal(size=n_s), 0.9, rng.normal(size=(n_s, d))))
    drift = 0.0
    for pr in problems:
        for prune in (True, False):
            m = build_td0(pr, 0.05, prune=prune)
            p = stationary_distribution(m.sys.chain).p_inf
            drift = max(drift, np.linalg.norm(p @ m.sys.b))

    chain = random_chain(rng, 3)
    A = np.array([[[-1.0, 0.3], [0.0, -0.7]], [[-0.5, 0.0], [0.2, -1.2]], [[-0.9, 0.1], [0.1, -0.9]]])
    sys = JumpLinearSystem(chain, A, rng.normal(size=(3, 2)), 0.1)
    c, shift = center_offsets(sys)
    cfg = mc.MCConfig(1000, 100, base_seed=8)
    xi0 = np.array([0.5, 1.5])
    s1, z1, _ = mc.simulate_paths(sys, xi0, cfg)
    s2, z2, _ = mc.simulate_paths(c, xi0 - shift, cfg)
    path_err = np.abs(s1 - (s2 + shift)).max()
    ok = theta_err <= 1e-10 and drift <= 1e-10 and np.array_equal(z1, z2) and path_err <= 1e-10
    verdict(8, "TD(0) construction", ok,
            f"theta_err={theta_err:.1e} max|sum p b|={drift:.1e} centering_path_err={path_err:.1e}")


def test_c09_rank_one_consistency(verdict):
    rng = np.random.default_rng(909)
    worst_sigma = worst_delta = worst_traj = 0.0
    for n, d in [(2, 1), (3, 2), (4, 3), (2, 2)]:
        p = rng.dirichlet(np.ones(n))
        base = random_system(rng, n, d)
        sys = _centered(JumpLinearSystem(MarkovChain.iid(p), base.A, base.b, base.alpha))
        while sigma_h22(sys, "iid") >= 0.999:
            sys = sys.with_alpha(sys.alpha / 2)
        worst_sigma = max(worst_sigma, abs(sigma_h22(sys, "markov") - sigma_h22(sys, "iid")))
        model = build_iid_model(sys)
        d_iid = iid_steady_state(model).delta_inf
        d_mk = build_markov_steady_state(sys).delta_inf
        worst_delta = max(worst_delta, abs(d_mk - d_iid) / d_iid)
        xi0 = rng.normal(size=d)
        traj = augmented_trajectory(build_augmented_lti(sys), initial_moments(sys, xi0), sys.chain, 200)
        mus, Qs = iid_forward(model, xi0, np.outer(xi0, xi0), 200)
        # errors relative to the trajectory's overall scale; the mean decays
        # geometrically, so per-step ratios would measure rounding noise
        mu_scale, Q_scale = np.abs(mus).max(), np.abs(Qs).max()
        for k, m in enumerate(traj):
            worst_traj = max(worst_traj, _rel(m.mean, mus[k], mu_scale),
                             _rel(m.second_moment, Qs[k], Q_scale))
    ok = worst_sigma <= 1e-10 and worst_delta <= 1e-10 and worst_traj <= 1e-10
    verdict(9, "rank-one Markov equals IID", ok,
            f"sigma={worst_sigma:.1e} delta={worst_delta:.1e} trajectory={worst_traj:.1e}")


def test_c10_cli_determinism(verdict, tmp_path):
    outs = []
    for run in range(2):
        out = tmp_path / f"run{run}"
        proc = subprocess.run(
            [_sys.executable, "-m", "tdmjls", "simulate", "--config", str(DATA / "scalar_iid.json"),
             "--seed", "123", "--horizon", "50", "--mc-trajectories", "20000", "--out", str(out)],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append((out / "trajectory.csv").read_bytes())
    sweep = []
    for run in range(2):
        out = tmp_path / f"sweep{run}"
        subprocess.run([_sys.executable, "-m", "tdmjls", "sweep", "--config", str(DATA / "scalar_iid.json"),
                        "--alpha", "0.5,0.1,2.5", "--out", str(out)], check=True, capture_output=True)
        sweep.append((out / "sweep.csv").read_bytes())
    ok = outs[0] == outs[1] and sweep[0] == sweep[1]
    verdict(10, "CLI determinism", ok, f"trajectory.csv {len(outs[0])} bytes, sweep.csv {len(sweep[0])} bytes")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
