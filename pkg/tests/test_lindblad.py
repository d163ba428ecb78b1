import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rhombic_transport.lattice import LatticeSpec, build_hamiltonian, hub_indices, mirror_permutation
from rhombic_transport.lindblad import (
    CurrentRecord,
    DivergenceError,
    ReservoirParams,
    SteadyStateError,
    bond_current,
    bright_subspace,
    drain_current,
    phi_sweep,
    propagate,
    reservoir_current,
    rhomb_cut_current,
    spdm_rhs,
    steady_state,
)

PAPER = ReservoirParams(0.4, 0.4, 1.0, 0.5)


def solve(M, phi, r=PAPER, J=1.0):
    H = build_hamiltonian(LatticeSpec(M=M, J=J, phi=phi))
    return H, steady_state(H, r)


def test_rhs_pump_only():
    L = 7
    r = ReservoirParams(0.3, 0.7, 2.0, 0.5)
    out = spdm_rhs(np.zeros((L, L)), np.zeros((L, L)), r)
    expected = np.zeros((L, L))
    expected[0, 0] = 0.3 * 2.0
    expected[-1, -1] = 0.7 * 0.5
    assert np.array_equal(out, expected)


def test_rhs_shape_mismatch():
    with pytest.raises(ValueError):
        spdm_rhs(np.zeros((3, 3)), np.zeros((4, 4)), PAPER)


def test_rhs_vanishes_at_steady_state():
    H, rho = solve(3, 0.8)
    assert np.abs(spdm_rhs(rho, H, PAPER)).max() < 1e-10


def test_propagate_decoupled_sites_closed_form():
    # H = 0: each boundary population obeys rho' = -gamma rho + gamma n
    L, gamma = 4, 0.4
    r = ReservoirParams(gamma, gamma, 1.0, 0.25)
    times, rhos = propagate(np.zeros((L, L)), np.zeros((L, L)), r, t_final=60.0, dt=0.05, stride=100)
    assert np.allclose(rhos[:, 0, 0].real, 1.0 * (1 - np.exp(-gamma * times)), atol=1e-9)
    assert np.allclose(rhos[:, -1, -1].real, 0.25 * (1 - np.exp(-gamma * times)), atol=1e-9)
    assert abs(rhos[-1, 0, 0] - 1.0) < 1e-9 and abs(rhos[-1, -1, -1] - 0.25) < 1e-9


def test_propagate_fixed_point():
    H, rho = solve(3, 1.2)
    _, rhos = propagate(rho, H, PAPER, t_final=100.0, dt=0.05, stride=200)
    assert np.abs(rhos - rho).max() < 1e-8


def test_propagate_converges_to_steady_state():
    r = ReservoirParams(1.0, 1.0, 1.0, 0.5)
    H, rho = solve(2, 0.7, r)
    times, rhos = propagate(np.zeros_like(rho), H, r, t_final=1500.0, dt=0.05, stride=10000)
    assert times[-1] == pytest.approx(1500.0)
    assert np.abs(rhos[-1] - rho).max() < 1e-8


def test_propagate_fourth_order():
    H = build_hamiltonian(LatticeSpec(M=2, phi=0.6))
    rho0 = np.zeros_like(H)
    ends = [propagate(rho0, H, PAPER, 8.0, dt)[1][-1] for dt in (0.4, 0.2, 0.1)]
    coarse = np.abs(ends[0] - ends[1]).max()
    fine = np.abs(ends[1] - ends[2]).max()
    assert 12 < coarse / fine < 20


def test_propagate_keeps_hermiticity():
    H = build_hamiltonian(LatticeSpec(M=3, phi=2.0))
    _, rhos = propagate(np.zeros_like(H), H, PAPER, 50.0, 0.05, stride=50)
    assert max(np.abs(x - x.conj().T).max() for x in rhos) == 0.0


def test_propagate_divergence():
    H = build_hamiltonian(LatticeSpec(M=2))
    with pytest.raises(DivergenceError):
        propagate(np.zeros_like(H), H, PAPER, 5000.0, 5.0)
    with pytest.raises(ValueError):
        propagate(np.zeros_like(H), H, PAPER, 1.0, 0.0)


def test_zero_flux_populations():
    M = 3
    H, rho = solve(M, 0.0)
    pops = np.diag(rho).real
    hubs = hub_indices(M)
    mid = (PAPER.n_L + PAPER.n_R) / 2
    assert np.abs(pops[hubs[1:-1]] - mid).max() < 1e-10
    arms = np.setdiff1d(np.arange(3 * M + 1), hubs)
    assert np.abs(pops[arms] - mid / 2).max() < 1e-10


def test_pi_flux_blockade():
    M = 3
    H, rho = solve(M, np.pi)
    assert abs(rho[0, 0] - PAPER.n_L) < 1e-10
    assert abs(rho[-1, -1] - PAPER.n_R) < 1e-10
    assert abs(reservoir_current(rho, PAPER).value) < 1e-12
    # neighbouring arm populations are half of the edge populations
    assert np.allclose(np.diag(rho).real[[1, 2]], PAPER.n_L / 2, atol=1e-10)
    assert np.allclose(np.diag(rho).real[[-3, -2]], PAPER.n_R / 2, atol=1e-10)
    # antisymmetric left dimer, symmetric right dimer
    left = rho[1, 2]
    right = rho[-3, -2]
    assert abs(left + np.sqrt(rho[1, 1].real * rho[2, 2].real)) < 1e-10
    assert abs(right - np.sqrt(rho[-3, -3].real * rho[-2, -2].real)) < 1e-10


def test_zero_flux_current_formula():
    # the exact current follows J gamma / (J^2 + gamma^2/2) (n_L - n_R)/2 with unit prefactor
    for J in (0.5, 1.0, 2.0):
        for gamma in (0.1, 0.4, 1.0):
            r = ReservoirParams(gamma, gamma, 1.0, 0.5)
            _, rho = solve(4, 0.0, r, J=J)
            j = reservoir_current(rho, r).value
            prefactor = j / (J * gamma / (J**2 + gamma**2 / 2) * 0.25)
            assert prefactor == pytest.approx(J, rel=1e-9)


def test_bright_subspace_dimension():
    # zero flux: the M antisymmetric A-B modes are dark
    for M in (2, 3, 5):
        H = build_hamiltonian(LatticeSpec(M=M))
        assert bright_subspace(H).shape[1] == 2 * M + 1
    # pi flux: only the two edge dimers couple to the reservoirs
    assert bright_subspace(build_hamiltonian(LatticeSpec(M=4, phi=np.pi))).shape[1] == 4


def test_ill_conditioned_reported():
    H = build_hamiltonian(LatticeSpec(M=2))
    with pytest.raises(SteadyStateError) as info:
        steady_state(H, PAPER, max_condition=1.0)
    assert info.value.condition > 1.0


rates = st.floats(0.05, 2.0)
dens = st.floats(0.0, 3.0)
flux = st.floats(-2 * np.pi, 2 * np.pi)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), flux, rates, rates, dens, dens)
def test_steady_state_invariants(M, phi, gl, gr, nl, nr):
    r = ReservoirParams(gl, gr, nl, nr)
    H, rho = solve(M, phi, r)
    assert np.abs(spdm_rhs(rho, H, r)).max() < 1e-10
    assert np.abs(rho - rho.conj().T).max() < 1e-12
    w = np.linalg.eigvalsh(rho)
    assert w.min() >= -1e-8 * max(w.max(), 1e-300) - 1e-14
    assert np.diag(rho).real.min() >= -1e-10
    # particle-number continuity: source = drain = every rhomb cut
    j = r.gamma_L * (r.n_L - rho[0, 0].real)
    assert abs(drain_current(rho, r) - j) < 1e-10
    for k in range(1, M + 1):
        assert abs(rhomb_cut_current(rho, H, k, "in") - j) < 1e-10
        assert abs(rhomb_cut_current(rho, H, k, "out") - j) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), flux, dens, dens)
def test_steady_state_linear_in_densities(M, phi, nl, nr):
    H = build_hamiltonian(LatticeSpec(M=M, phi=phi))
    one = steady_state(H, ReservoirParams(0.4, 0.4, nl, nr))
    two = steady_state(H, ReservoirParams(0.4, 0.4, 2 * nl, 2 * nr))
    assert np.abs(two - 2 * one).max() < 1e-12
    left = steady_state(H, ReservoirParams(0.4, 0.4, nl, 0.0))
    right = steady_state(H, ReservoirParams(0.4, 0.4, 0.0, nr))
    assert np.abs(left + right - one).max() < 1e-12


def test_equal_densities_give_equilibrium():
    r = ReservoirParams(0.4, 0.4, 0.8, 0.8)
    H, rho = solve(3, 1.0, r)
    assert abs(reservoir_current(rho, r).value) < 1e-12
    Q = bright_subspace(H)
    assert np.abs(rho - 0.8 * Q @ Q.conj().T).max() < 1e-10
    rec = reservoir_current(rho, r)
    assert np.isnan(rec.per_bias)


def test_reversed_bias_reverses_current():
    H, rho = solve(3, 0.5, ReservoirParams(0.4, 0.4, 0.5, 1.0))
    _, rho_fwd = solve(3, 0.5)
    j_rev = reservoir_current(rho, ReservoirParams(0.4, 0.4, 0.5, 1.0)).value
    j_fwd = reservoir_current(rho_fwd, PAPER).value
    assert j_rev == pytest.approx(-j_fwd, rel=1e-10)


def test_bond_currents_zero_flux_split_evenly():
    M = 3
    H, rho = solve(M, 0.0)
    j = reservoir_current(rho, PAPER).value
    for k in range(M):
        c = 3 * k
        ja = bond_current(rho, H, c, c + 1)
        jb = bond_current(rho, H, c, c + 2)
        assert ja == pytest.approx(jb, abs=1e-12)
        assert ja == pytest.approx(j / 2, abs=1e-12)


def test_bond_currents_vanish_at_pi():
    M = 4
    H, rho = solve(M, np.pi)
    for i, j in zip(*np.nonzero(np.triu(H))):
        assert abs(bond_current(rho, H, i, j)) < 1e-12


def test_bond_current_antisymmetric_and_checked():
    H, rho = solve(2, 0.4)
    assert bond_current(rho, H, 0, 1) == pytest.approx(-bond_current(rho, H, 1, 0), abs=1e-15)
    spec = LatticeSpec(M=2)
    assert bond_current(rho, H, spec.site(1, "C"), spec.site(1, "A")) == bond_current(rho, H, 0, 1)
    with pytest.raises(ValueError):
        bond_current(rho, H, 0, 3)
    with pytest.raises(ValueError):
        rhomb_cut_current(rho, H, 1, "sideways")


def test_flux_symmetries():
    for M in (2, 3, 5):
        for phi in (0.3, 1.7, 2.9):
            j = phi_sweep(M, PAPER, [phi, -phi, phi + 4 * np.pi, phi + 2 * np.pi])
            vals = [rec.value for rec in j]
            assert max(abs(v - vals[0]) for v in vals) < 1e-12


def test_two_pi_shift_is_a_gauge_transformation():
    M, phi = 3, 0.9
    _, rho = solve(M, phi)
    _, rho2 = solve(M, phi + 2 * np.pi)
    cells = np.repeat(np.arange(1, M + 2), 3)[: 3 * M + 1]
    s = np.where(np.arange(3 * M + 1) % 3 == 0, (-1.0) ** cells, (-1.0) ** (cells + 1))
    assert np.abs(rho2 - s[:, None] * rho * s[None, :]).max() < 1e-12


def test_mirror_conjugation_of_steady_state():
    M, phi = 3, 1.1
    perm = mirror_permutation(M)
    _, rho = solve(M, phi)
    _, rho_m = solve(M, -phi)
    assert np.abs(rho[np.ix_(perm, perm)] - rho_m).max() < 1e-12


def test_phi_sweep_shape_of_curves():
    grid = np.linspace(0, np.pi, 41)
    prev_gap = np.inf
    curves = {M: np.array([r.normalized for r in phi_sweep(M, PAPER, grid)]) for M in range(2, 9)}
    for M in range(2, 8):
        c = curves[M]
        assert np.argmax(c) == 0
        assert abs(c[-1]) < 1e-12
        assert np.all(np.diff(c) <= 0)
        gap = np.abs(curves[M] - curves[M + 1]).max()
        assert gap < prev_gap
        prev_gap = gap


def test_phi_sweep_empty():
    with pytest.raises(ValueError):
        phi_sweep(3, PAPER, [])


def test_current_record_rules():
    rec = CurrentRecord.from_value(0.2, PAPER)
    assert rec.normalized == 0.2 and rec.per_bias == pytest.approx(0.4) and rec.method == "exact"
    with pytest.raises(ValueError):
        CurrentRecord(0.1, 0.1, stderr=0.01, method="exact")
    with pytest.raises(ValueError):
        CurrentRecord(0.1, 0.1, stderr=0.0, method="twa")
    with pytest.raises(ValueError):
        CurrentRecord.from_value(0.1, ReservoirParams(0.4, 0.4, 0.0, 0.0))


def test_reservoir_validation():
    with pytest.raises(ValueError):
        ReservoirParams(0.0, 0.4, 1.0, 0.5)
    with pytest.raises(ValueError):
        ReservoirParams(0.4, 0.4, -1.0, 0.5)
