import numpy as np
import pytest

from cellfree_dab import fp_core
from cellfree_dab.common import SolverOptions
from cellfree_dab.central_solver import SolveMode, run_central
from cellfree_dab.pa_model import PaModel
from cellfree_dab.ring_solver import (
    RING_TRACE_COLUMNS,
    extract_local,
    message_size,
    parse_token_message,
    run_ring,
    token_message,
    write_back,
)
from cellfree_dab.scenario import desk_profile, make_scenario


def rand_c(rng, *shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def test_extract_write_back_identity():
    rng = np.random.default_rng(0)
    pa = PaModel.reference()
    K, Nt = 2, 3
    H = rand_c(rng, Nt, K)
    W = rand_c(rng, Nt, K)
    contrib = fp_core.bs_contribution(H, W, pa)
    cache = (contrib[0], contrib[1].astype(complex))
    Q = contrib[0] + rand_c(rng, K, K)
    p = cache[1] + rng.uniform(0, 1, K)
    view = extract_local(Q, p, cache)
    Q2, p2 = write_back(view, H, W, pa)
    assert np.allclose(Q2, Q, atol=1e-12)
    assert np.allclose(p2, p, atol=1e-12)


def test_extraction_matches_other_bs_sum():
    rng = np.random.default_rng(1)
    pa = PaModel.reference()
    B, Nt, K = 3, 3, 2
    H = rand_c(rng, B, Nt, K)
    W = rand_c(rng, B, Nt, K)
    contribs = [fp_core.bs_contribution(H[b], W[b], pa) for b in range(B)]
    Q = sum(c[0] for c in contribs)
    p = sum(c[1].astype(complex) for c in contribs)
    view = extract_local(Q, p, (contribs[0][0], contribs[0][1].astype(complex)))
    others_Q = sum(contribs[b][0] for b in (1, 2))
    others_p = sum(contribs[b][1] for b in (1, 2))
    assert np.allclose(view.Q_hat, others_Q, atol=1e-12)
    assert np.allclose(view.p_hat, others_p, atol=1e-12)


def test_write_back_ideal_zero_beamformer():
    rng = np.random.default_rng(2)
    K, Nt = 2, 3
    H = rand_c(rng, Nt, K)
    view = extract_local(rand_c(rng, K, K), rng.uniform(0, 1, K).astype(complex),
                         (np.zeros((K, K), dtype=complex), np.zeros(K, dtype=complex)))
    Q2, p2 = write_back(view, H, np.zeros((Nt, K)), PaModel.ideal())
    assert np.allclose(Q2, view.Q_hat)
    assert np.allclose(p2, view.p_hat)


def test_distortion_entries_stay_real_nonnegative():
    pa = PaModel.reference()
    cfg = desk_profile(rng_seed=3)
    _, ch = make_scenario(cfg)
    rep = run_ring(ch, cfg, pa, SolverOptions(max_outer=4, tol=0.0))
    inputs = fp_core.build_metrics_inputs(ch.H, rep.W, pa, cfg.sigma2)
    assert np.all(inputs.psum >= -1e-10 * (1 + np.abs(inputs.psum)))


def test_token_state_consistency():
    pa = PaModel.reference()
    for seed in (0, 1, 2):
        cfg = desk_profile(rng_seed=seed)
        _, ch = make_scenario(cfg)
        rep = run_ring(ch, cfg, pa, SolverOptions(max_outer=6, tol=0.0))
        assert rep.diagnostics["consistency_error_max"] <= 1e-8


def test_token_message_roundtrip():
    rng = np.random.default_rng(9)
    K = 3
    Q = rand_c(rng, K, K)
    p = rand_c(rng, K)
    msg = token_message(Q, p)
    assert msg.size == message_size(K)
    Q2, p2 = parse_token_message(msg, K)
    assert np.array_equal(Q2, Q) and np.array_equal(p2, p)
    with pytest.raises(ValueError):
        parse_token_message(msg[:-1], K)


def test_overhead_counter_and_message_size():
    pa = PaModel.reference()
    cfg = desk_profile(rng_seed=4)
    _, ch = make_scenario(cfg)
    rep = run_ring(ch, cfg, pa, SolverOptions(max_outer=5, tol=0.0))
    K = cfg.num_ues
    visits = rep.counters["visits"]
    assert message_size(K) == K * K + K
    assert rep.counters["exchanged_complex_values"] == visits * (K * K + K)
    assert rep.trace[-1][5] == visits * (K * K + K)
    assert rep.trace_columns == RING_TRACE_COLUMNS


def test_single_bs_matches_central():
    pa = PaModel.reference()
    cfg = desk_profile(rng_seed=5, num_bs=1,
                       bs_positions=[(-200.0, 200.0)])
    _, ch = make_scenario(cfg)
    opts = SolverOptions(max_outer=15, tol=0.0)
    ring = run_ring(ch, cfg, pa, opts)
    central = run_central(ch, cfg, opts, SolveMode.dab(pa))
    assert ring.sum_rate == pytest.approx(central.sum_rate, rel=1e-6)


def test_ideal_pa_tracks_central_across_seeds():
    pa = PaModel.ideal()
    opts = SolverOptions(max_outer=30, tol=1e-6)
    ring_rates, central_rates = [], []
    for seed in range(20):
        cfg = desk_profile(rng_seed=seed)
        _, ch = make_scenario(cfg)
        ring_rates.append(run_ring(ch, cfg, pa, opts).sum_rate)
        central_rates.append(
            run_central(ch, cfg, opts, SolveMode.ideal()).sum_rate
        )
    assert np.mean(ring_rates) == pytest.approx(np.mean(central_rates), rel=0.02)


def test_trace_monotone_across_passes():
    pa = PaModel.reference()
    for seed in (0, 1, 2):
        cfg = desk_profile(rng_seed=seed)
        _, ch = make_scenario(cfg)
        rep = run_ring(ch, cfg, pa, SolverOptions(max_outer=20, tol=0.0))
        B = cfg.num_bs
        pass_rates = [row[3] for row in rep.trace][B - 1::B]
        for a, b in zip(pass_rates, pass_rates[1:]):
            assert b >= a - 1e-6


def test_converged_runs_carry_tight_lifts():
    pa = PaModel.reference()
    opts = SolverOptions(max_outer=30, tol=1e-4)
    seen = 0
    for seed in range(6):
        cfg = desk_profile(rng_seed=seed)
        _, ch = make_scenario(cfg)
        rep = run_ring(ch, cfg, pa, opts)
        if rep.converged:
            seen += 1
            assert max(rep.diagnostics["penalty_residuals"]) \
                <= opts.penalty_resid_tol
    assert seen >= 1


def test_run_is_deterministic():
    pa = PaModel.reference()
    cfg = desk_profile(rng_seed=6)
    _, ch = make_scenario(cfg)
    opts = SolverOptions(max_outer=5, tol=0.0)
    r1 = run_ring(ch, cfg, pa, opts)
    r2 = run_ring(ch, cfg, pa, opts)
    assert np.array_equal(r1.W, r2.W)
    assert r1.trace == r2.trace


def test_terminates_within_budget():
    pa = PaModel.reference()
    cfg = desk_profile(rng_seed=7)
    _, ch = make_scenario(cfg)
    opts = SolverOptions(max_outer=3, tol=0.0)
    rep = run_ring(ch, cfg, pa, opts)
    assert rep.counters["visits"] <= 3 * cfg.num_bs
    assert len(rep.trace) == rep.counters["visits"]
