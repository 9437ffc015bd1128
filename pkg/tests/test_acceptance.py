"""Acceptance suite: one test per criterion, each printing a [PASS]/[FAIL] line.

The long 2D runs are shared through module-scoped fixtures. Run alone with

    pytest tests/test_acceptance.py -s
"""

import itertools
import time

import numpy as np
import pytest

import conftest
from conftest import CENTERED_BOX, random_unit_field
from nhllg.fem import Operators, assemble_stiffness, exchange_energy, normalize_nodal
from nhllg.mesh import Mesh, check_sign_condition, generate_structured
from nhllg.spectral import SpectralBasis, compare_to_fem, integrate, smooth_initial_1d
from nhllg.stepper import SolverConfig, skyrmion_initial, per_step_decay_margin, run, smooth_bump, weak_residual
from nhllg.tangent import assemble_step_system, build_frame, solve_step
from nhllg.torque import SotParams, SttParams, TorqueModel, check_orthogonality, make_sot, make_stt, make_zero

pytestmark = pytest.mark.slow


def report(label, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def skyrmion_run(model, n, k, T=5.0, snapshot_interval=50):
    mesh = generate_structured(CENTERED_BOX, [n, n])
    ops = Operators.build(mesh)
    cfg = SolverConfig(alpha=1.0, beta=1.0, theta=0.75, k=k, J=int(round(T / k)), snapshot_interval=snapshot_interval)
    t0 = time.perf_counter()
    res = run(mesh, cfg, model, skyrmion_initial, ops=ops)
    return mesh, ops, cfg, res, time.perf_counter() - t0


STT = make_stt(SttParams(1.0, 1.0, (1.0, 0.0)))
SOT = make_sot(SotParams())


@pytest.fixture(scope="module")
def stt_fine():
    # every step kept so the weak residual can integrate in time
    return skyrmion_run(STT, 32, 0.005, snapshot_interval=1)


@pytest.fixture(scope="module")
def stt_coarse():
    return skyrmion_run(STT, 16, 0.01, snapshot_interval=1)


@pytest.fixture(scope="module")
def sot_fine():
    return skyrmion_run(SOT, 32, 0.005)


def test_ac1_constraints_on_stt_run(stt_fine):
    mesh, ops, cfg, res, seconds = stt_fine
    tr = res.trace
    norm_err = max(tr.max_norm_err)
    tang = max(tr.max_tangency)
    ok = len(tr) == cfg.J + 1 and norm_err <= 1e-12 and tang <= 1e-12 and seconds < 300
    report("AC1 constraint suite (STT, 32x32, J=1000)", ok,
           f"max ||m|-1| = {norm_err:.2e}, max |v.m| = {tang:.2e}, steps = {len(tr) - 1}, "
           f"runtime {seconds:.1f}s (includes per-step snapshots)")


def test_ac2_zero_torque_energy_decay():
    mesh = generate_structured(CENTERED_BOX, [32, 32])
    ops = Operators.build(mesh)
    assert check_sign_condition(mesh, ops.stiffness).satisfies_sign_condition
    details, ok = [], True
    for theta in (0.6, 0.75, 1.0):
        cfg = SolverConfig(theta=theta, k=0.005, J=200, tol=1e-12, snapshot_interval=200)
        tr = run(mesh, cfg, make_zero(), skyrmion_initial, ops=ops, keep_snapshots=False).trace
        worst_plain = float(np.max(np.diff(tr.array("exchange_energy"))))
        worst_strong = float(-np.min(per_step_decay_margin(tr, cfg)))
        ok &= worst_plain <= 1e-9 and worst_strong <= 1e-9
        details.append(f"theta={theta}: largest step change {worst_plain:.1e}, max strengthened deficit {worst_strong:.1e}")
    report("AC2 zero-torque energy decay", ok, "; ".join(details))


def test_ac3_sign_condition():
    failures = []
    for n, rule in itertools.product((4, 8, 16, 32, 64), ("fixed", "alternating")):
        mesh = generate_structured(CENTERED_BOX, [n, n], rule)
        if not check_sign_condition(mesh, assemble_stiffness(mesh)).satisfies_sign_condition:
            failures.append(f"{n}x{n} {rule}")
    obtuse = Mesh(2, np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.1], [0.5, -0.1]]), np.array([[0, 1, 2], [0, 3, 1]]))
    q = check_sign_condition(obtuse, assemble_stiffness(obtuse))
    ok = not failures and not q.satisfies_sign_condition
    report("AC3 sign condition", ok,
           f"structured failures: {failures or 'none'}; obtuse pair max off-diagonal {q.max_offdiagonal_stiffness:.3f} "
           f"-> {'fails' if not q.satisfies_sign_condition else 'passes'}")


def test_ac4_projection_non_expansion():
    mesh = generate_structured(CENTERED_BOX, [16, 16])
    K = assemble_stiffness(mesh)
    assert check_sign_condition(mesh, K).satisfies_sign_condition
    smooth = np.array([skyrmion_initial(x) for x in mesh.nodes])
    worst = -np.inf
    for seed in range(200):
        rng = np.random.default_rng(seed)
        # odd seeds: perturbed smooth field; even seeds: rough field. Norms just above 1.
        base = smooth if seed % 2 else random_unit_field(rng, mesh.n_nodes)
        u = base + 0.1 * random_unit_field(rng, mesh.n_nodes)
        lengths = 1.0 + rng.exponential(0.05, mesh.n_nodes)
        u *= (lengths / np.linalg.norm(u, axis=1))[:, None]
        worst = max(worst, exchange_energy(normalize_nodal(u), K) - exchange_energy(u, K))
    report("AC4 projection non-expansion (200 fields, 16x16)", worst <= 1e-10, f"max energy change {worst:.3e} (never positive)")


def _small_meshes():
    for n in range(1, 10):
        yield f"1D n={n}", generate_structured([(0.0, 1.0)], [n])
    for nx, ny in [(1, 1), (1, 2), (2, 1), (1, 3), (3, 1), (1, 4), (4, 1), (2, 2)]:
        for rule in ("fixed", "alternating"):
            yield f"2D {nx}x{ny} {rule}", generate_structured(CENTERED_BOX, [nx, ny], rule)
    yield "2D obtuse pair", Mesh(2, np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.1], [0.5, -0.1]]),
                                 np.array([[0, 1, 2], [0, 3, 1]]))


def test_ac5_dense_solve_oracle():
    cfg = SolverConfig(alpha=1.0, beta=1.0, theta=0.75, k=0.005)
    worst, count = 0.0, 0
    for name, mesh in _small_meshes():
        d = mesh.dimension
        ops = Operators.build(mesh)
        models = [make_zero(d), make_stt(SttParams(1.0, 1.0, (1.0,) if d == 1 else (0.6, 0.8))), make_sot(SotParams(), d)]
        for seed, model in itertools.product(range(3), models):
            m = random_unit_field(np.random.default_rng(seed), mesh.n_nodes)
            system = assemble_step_system(m, build_frame(m), model, cfg, ops)
            x = solve_step(system, tol=1e-13).coeffs
            ref = np.linalg.solve(system.A.toarray(), system.b)
            worst = max(worst, np.linalg.norm(x - ref) / max(np.linalg.norm(ref), 1e-300))
            count += 1
    report("AC5 dense-solve oracle (all meshes <= 10 nodes)", worst <= 1e-10,
           f"{count} systems, max relative difference {worst:.2e}")


def test_ac6_torque_orthogonality():
    stt = check_orthogonality(STT, samples=10_000, seed=0)
    sot = check_orthogonality(SOT, samples=10_000, seed=0)
    bad = check_orthogonality(TorqueModel("adversarial", 2, f1=lambda a: a), samples=10_000, seed=0)
    ok = stt <= 1e-12 and sot <= 1e-12 and bad > 0.5
    report("AC6 torque orthogonality (1e4 samples)", ok,
           f"STT {stt:.1e}, SOT {sot:.1e}, adversarial {bad:.3f} (detected)")


def test_ac7_spectral_cross_validation():
    t_cmp = 0.25
    basis = SpectralBasis(1.0, 32, 512)
    details, ok = [], True
    for name, model in [("zero", make_zero(1)), ("STT", make_stt(SttParams(1.0, 1.0, (1.0,))))]:
        traj = integrate(smooth_initial_1d, basis, model, SolverConfig(k=0.005, J=50), substeps=50)
        errs = []
        for n, k in [(32, 0.01), (64, 0.005), (128, 0.0025)]:
            mesh = generate_structured([(0.0, 1.0)], [n])
            J = int(round(t_cmp / k))
            res = run(mesh, SolverConfig(k=k, J=J, snapshot_interval=J), model, smooth_initial_1d)
            errs.append(compare_to_fem(traj, res.snapshots, [t_cmp], mesh))
        ok &= all(b < a for a, b in zip(errs, errs[1:])) and errs[-1] <= 5e-2
        details.append(f"{name}: " + " > ".join(f"{e:.2e}" for e in errs))
    report("AC7 1D cross-validation vs spectral oracle (t=0.25)", ok, "; ".join(details))


def test_ac8_weak_residual_refinement(stt_coarse, stt_fine):
    psi = smooth_bump(0.0, 1.0, CENTERED_BOX, (1.0, 1.0, 1.0))
    vals = []
    for mesh, ops, cfg, res, _ in (stt_coarse, stt_fine):
        vals.append(weak_residual(res.snapshots, psi, cfg, STT, ops))
    report("AC8 weak residual refinement (16x16/0.01 -> 32x32/0.005)", vals[1] < vals[0],
           f"{vals[0]:.3e} -> {vals[1]:.3e}")


def _plateau_check(trace, T):
    e = trace.array("exchange_energy")
    t = trace.array("time")
    tail = e[t >= 0.8 * T]
    decreased = np.all(e[1:] <= e[0])
    plateau = tail.max() - tail.min() <= 0.01 * e[0]
    return bool(decreased and plateau and e[-1] < 0.1 * e[0]), e


def test_ac9_energy_traces(stt_fine, sot_fine):
    details, ok = [], True
    for name, run_ in (("STT", stt_fine), ("SOT", sot_fine)):
        good, e = _plateau_check(run_[3].trace, run_[2].T)
        ok &= good
        details.append(f"{name}: E0 = {e[0]:.2f}, E(1) = {e[200]:.2e}, E(T) = {e[-1]:.2e} ({e[-1] / e[0]:.1e} of initial)")
    report("AC9 energy decreases to a plateau (STT and SOT, 32x32, J=1000)", ok, "; ".join(details))
