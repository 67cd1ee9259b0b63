import math
from dataclasses import replace

import numpy as np
import pytest

from fermient.core import Grid2D, Symmetry, WaveFn1P, WaveFn2P, antisymmetrize, inner_product, norm, symmetry_defect
from fermient.dynamics import (
    Absorber,
    ScatteringConfig,
    SplitOperator,
    StabilityError,
    build_potential,
    energy_expectation,
    gaussian_packet,
    ho_eigenstate,
    ho_ground_state,
    initial_state,
    momentum_expectation,
    position_expectation,
    position_width,
    product_initial,
    propagate,
    propagate_1p,
    read_wavefunction_dump,
    write_wavefunction_dump,
)

from oracles import gaas_coulomb_scale, gaas_kinetic_prefactor, hbar_mev_fs


def small_config(launch=40.0, **kw):
    """20x20 two-particle setup that runs in milliseconds per step."""
    base = dict(grid=Grid2D.centered(20, 8.0), trap_center=(0.0, 0.0), trap_energy=4.0,
                packet_sigma=16.0, kinetic_energy=5.0, direction=(1.0, 0.0), dt=0.2,
                n_steps=40, snapshot_stride=10)
    base.update(kw)
    return ScatteringConfig(**base).with_launch(launch)


def free_config(**kw):
    base = dict(grid=Grid2D.centered(48, 5.0), trap_center=(0.0, 0.0), packet_sigma=10.0,
                kinetic_energy=10.0, direction=(1.0, 0.0), use_trap=False, use_coulomb=False,
                dt=0.5, n_steps=400, snapshot_stride=400)
    base.update(kw)
    return ScatteringConfig(**base).with_launch(40.0)


class TestInitialStates:
    def test_wavenumber_from_codata(self):
        cfg = free_config()
        k = math.sqrt(10.0 / gaas_kinetic_prefactor())
        assert np.hypot(*cfg.wavevector) == pytest.approx(k, rel=1e-8)
        assert k == pytest.approx(0.1326, abs=1e-4)

    def test_gaussian_packet_moments(self):
        cfg = free_config()
        wf = gaussian_packet(cfg)
        assert norm(wf) == pytest.approx(1, abs=1e-12)
        np.testing.assert_allclose(momentum_expectation(wf), cfg.wavevector, rtol=0.02, atol=1e-6)
        assert np.abs(position_expectation(wf) - np.array(cfg.packet_center)).max() < cfg.grid.dx

    def test_zero_momentum_packet_is_real_positive(self):
        wf = gaussian_packet(free_config(kinetic_energy=0.0))
        assert np.all(wf.amplitudes.real > 0)
        assert np.abs(wf.amplitudes.imag).max() == 0
        np.testing.assert_allclose(momentum_expectation(wf), 0, atol=1e-12)

    def test_unresolved_packet(self):
        with pytest.raises(ValueError, match="sigma"):
            gaussian_packet(free_config(packet_sigma=9.0))

    def test_oscillator_length(self):
        cfg = free_config(trap_energy=2.0)
        expected = math.sqrt(2 * gaas_kinetic_prefactor() / 2.0)
        assert cfg.oscillator_length == pytest.approx(expected, rel=1e-9)
        assert cfg.oscillator_length == pytest.approx(23.85, abs=0.01)

    def test_ground_state_energy(self):
        cfg = free_config(use_trap=True, trap_energy=2.0)
        gs = ho_ground_state(cfg)
        assert energy_expectation(gs, cfg) == pytest.approx(2.0, rel=0.01)
        assert abs(inner_product(gs, ho_eigenstate(cfg, 0, 0))) == pytest.approx(1, abs=1e-10)

    def test_excited_states(self):
        cfg = free_config(use_trap=True, trap_energy=4.0)
        e00, e10, e20 = (ho_eigenstate(cfg, n, 0) for n in range(3))
        assert abs(inner_product(e00, e10)) < 1e-8
        assert abs(inner_product(e10, e20)) < 1e-8
        assert abs(inner_product(e00, e20)) < 1e-8
        assert energy_expectation(e10, cfg) == pytest.approx(8.0, rel=0.01)
        assert energy_expectation(e20, cfg) == pytest.approx(12.0, rel=0.01)

    def test_under_resolved_levels(self):
        cfg = free_config(use_trap=True, trap_energy=2.0, grid=Grid2D.centered(16, 13.0))
        with pytest.raises(ValueError):
            ho_ground_state(cfg)
        with pytest.raises(ValueError):
            ho_eigenstate(free_config(use_trap=True), 30, 0)


class TestPotential:
    def test_contact_value(self):
        cfg = free_config(use_coulomb=True, coulomb_softening=1.0)
        pot = build_potential(cfg)
        nx, ny = cfg.grid.shape
        assert pot.two_body[nx - 1, ny - 1] == pytest.approx(gaas_coulomb_scale(), rel=1e-8)
        assert pot.two_body[nx - 1, ny - 1] == pytest.approx(111.6, abs=0.05)

    def test_trap_minimum_at_center(self):
        cfg = small_config()
        pot = build_potential(cfg)
        i = int(np.argmin(np.abs(cfg.grid.x - cfg.trap_center[0])))
        j = int(np.argmin(np.abs(cfg.grid.y - cfg.trap_center[1])))
        assert pot.one_body[i, j] == 0.0

    def test_two_body_even(self):
        pot = build_potential(small_config())
        np.testing.assert_array_equal(pot.two_body, pot.two_body[::-1, ::-1])
        assert np.isfinite(pot.two_body).all()

    def test_pair_potential_symmetric_under_exchange(self):
        cfg = small_config()
        v = build_potential(cfg).total(2).reshape(cfg.grid.size, cfg.grid.size)
        np.testing.assert_allclose(v, v.T, rtol=1e-14)

    def test_default_softening(self):
        assert small_config().coulomb_softening == 8.0


class TestProductInitial:
    def test_orthonormal_norm(self):
        cfg = small_config()
        psi, phi = gaussian_packet(cfg), ho_ground_state(cfg)
        raw = psi.amplitudes[:, :, None, None] * phi.amplitudes[None, None]
        wf = product_initial(psi, phi)
        assert norm(WaveFn2P(cfg.grid, raw)) == pytest.approx(1, abs=1e-12)
        assert wf.symmetry is Symmetry.NONE

    def test_identical_orbitals_are_symmetric(self):
        cfg = small_config()
        phi = ho_ground_state(cfg)
        wf = product_initial(phi, phi)
        assert symmetry_defect(wf)[1] < 1e-12
        with pytest.raises(ValueError, match="vanishes"):
            antisymmetrize(wf)

    def test_swap_is_transpose(self):
        cfg = small_config()
        psi, phi = gaussian_packet(cfg), ho_ground_state(cfg)
        np.testing.assert_allclose(product_initial(psi, phi).as_matrix(),
                                   product_initial(phi, psi).as_matrix().T, atol=1e-16)

    def test_launch_distance_enforced(self):
        cfg = small_config(launch=20.0)
        with pytest.raises(ValueError, match="4 sigma"):
            initial_state(cfg)


class TestPropagator:
    def test_stability_refusal(self):
        cfg = small_config(dt=50.0)
        with pytest.raises(StabilityError):
            propagate(product_initial(gaussian_packet(cfg), ho_ground_state(cfg)), cfg)

    def test_per_step_unitarity(self):
        cfg = small_config()
        prop = SplitOperator(cfg)
        psi = product_initial(gaussian_packet(cfg), ho_ground_state(cfg)).amplitudes.copy()
        n0 = np.vdot(psi, psi).real
        for _ in range(5):
            psi = prop.evolve(psi, 1)
            n1 = np.vdot(psi, psi).real
            assert abs(n1 - n0) < 1e-12
            n0 = n1

    def test_norm_and_energy_over_600_steps(self):
        cfg = small_config(n_steps=600, snapshot_stride=600)
        psi0 = product_initial(gaussian_packet(cfg), ho_ground_state(cfg))
        e0 = energy_expectation(psi0, cfg)
        out = propagate(psi0, cfg)
        assert norm(out) == pytest.approx(1, abs=1e-8)
        assert abs(energy_expectation(out, cfg) - e0) < 0.005 * abs(e0)

    def test_exchange_commutation(self):
        cfg = small_config(n_steps=60)
        prod = product_initial(gaussian_packet(cfg), ho_ground_state(cfg))
        a = antisymmetrize(propagate(prod, cfg))
        b = propagate(antisymmetrize(prod), cfg)
        assert np.abs(a.amplitudes - b.amplitudes).max() < 1e-8 * np.abs(a.amplitudes).max()

    def test_raw_symmetry_defect_growth(self):
        cfg = small_config(n_steps=100)
        anti = antisymmetrize(product_initial(gaussian_packet(cfg), ho_ground_state(cfg)))
        raw = SplitOperator(cfg).evolve(anti.amplitudes.copy(), cfg.n_steps)
        mat = raw.reshape(cfg.grid.size, -1)
        assert np.abs(mat + mat.T).max() / np.abs(mat).max() < 1e-8

    def test_snapshot_schedule(self):
        cfg = small_config(n_steps=35, snapshot_stride=10)
        times = []
        propagate(product_initial(gaussian_packet(cfg), ho_ground_state(cfg)), cfg,
                  lambda t, wf: times.append(t))
        np.testing.assert_allclose(times, [0.0, 2.0, 4.0, 6.0], atol=1e-12)

    def test_zero_steps(self):
        cfg = small_config(n_steps=0)
        psi0 = product_initial(gaussian_packet(cfg), ho_ground_state(cfg))
        times = []
        out = propagate(psi0, cfg, lambda t, wf: times.append(t))
        assert times == [0.0]
        np.testing.assert_array_equal(out.amplitudes, psi0.amplitudes)

    def test_snapshots_are_immutable_copies(self):
        cfg = small_config(n_steps=20)
        snaps = []
        propagate(product_initial(gaussian_packet(cfg), ho_ground_state(cfg)), cfg,
                  lambda t, wf: snaps.append(wf))
        assert not snaps[0].amplitudes.flags.writeable
        assert not np.array_equal(snaps[0].amplitudes, snaps[-1].amplitudes)

    def test_second_order_convergence(self):
        def run(dt):
            cfg = free_config(use_trap=True, trap_energy=2.0, dt=dt, n_steps=int(round(100 / dt)),
                              snapshot_stride=10**6)
            return propagate_1p(gaussian_packet(cfg), cfg).amplitudes

        ref = run(0.0625)
        err_coarse = np.linalg.norm(run(1.0) - ref)
        err_fine = np.linalg.norm(run(0.5) - ref)
        assert 3.0 < err_coarse / err_fine < 5.0

    def test_absorber_removes_norm(self):
        cfg = small_config(absorber=Absorber(margin=30.0), n_steps=100)
        out = propagate(product_initial(gaussian_packet(cfg), ho_ground_state(cfg)), cfg)
        assert norm(out) < 1


class TestValidationRuns:
    def test_free_gaussian_spreading(self):
        cfg = free_config()
        wf0 = gaussian_packet(cfg)
        out = propagate_1p(wf0, cfg)
        t = cfg.n_steps * cfg.dt
        hbar_over_2m = gaas_kinetic_prefactor() / hbar_mev_fs()
        sigma_t = math.sqrt(cfg.packet_sigma**2 + (hbar_over_2m * t / cfg.packet_sigma) ** 2)
        np.testing.assert_allclose(position_width(out), sigma_t, rtol=0.01)
        v = 2 * hbar_over_2m * np.asarray(cfg.wavevector)
        expected = np.asarray(cfg.packet_center) + v * t
        travel = np.linalg.norm(v * t)
        assert np.linalg.norm(position_expectation(out) - expected) < 0.01 * travel

    def test_coherent_state_period(self):
        from fermient.analysis import oscillation_period

        cfg = free_config(use_trap=True, trap_energy=2.0, kinetic_energy=0.0, dt=0.5,
                          n_steps=5400, snapshot_stride=10)
        disp = ho_ground_state(replace(cfg, trap_center=(30.0, 0.0)))
        ts, xs = [], []
        propagate_1p(disp, cfg, lambda t, wf: (ts.append(t), xs.append(position_expectation(wf)[0])))
        period = oscillation_period(np.array(ts), np.array(xs))
        assert period == pytest.approx(2 * math.pi * hbar_mev_fs() / 2.0, rel=0.01)
        assert period == pytest.approx(2068, abs=21)


def test_wavefunction_dump_roundtrip(tmp_path):
    cfg = small_config()
    wf = product_initial(gaussian_packet(cfg), ho_ground_state(cfg))
    path = tmp_path / "snap.wf2p"
    write_wavefunction_dump(path, wf, 12.5)
    raw = path.read_bytes()
    assert raw[:4] == b"WF2P"
    assert len(raw) == 20 + 16 * cfg.grid.size**2
    amp, t = read_wavefunction_dump(path, cfg.grid)
    assert t == 12.5
    np.testing.assert_array_equal(amp, wf.amplitudes)
