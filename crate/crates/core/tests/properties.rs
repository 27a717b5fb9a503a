use freqsep_core::analysis::{attenuation_report, frf_compare, welch_psd};
use freqsep_core::lti::{filter_signal, is_schur_stable, poly_roots};
use freqsep_core::sysid::{extract_model, predict_error, RegionRegressor};
use freqsep_core::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const FS: f64 = 1000.0;

fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Random stable IIR built from real poles inside radius 0.9.
fn stable_tf() -> impl Strategy<Value = TransferFunction> {
    (
        prop::collection::vec(-2.0..2.0f64, 1..6),
        prop::collection::vec(-0.9..0.9f64, 0..4),
    )
        .prop_map(|(b, poles)| {
            let mut a = vec![1.0];
            for p in poles {
                let mut next = vec![0.0; a.len() + 1];
                for (i, c) in a.iter().enumerate() {
                    next[i] += c;
                    next[i + 1] -= p * c;
                }
                a = next;
            }
            TransferFunction::new(b, a, FS).unwrap()
        })
}

fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filtering_is_linear(tf in stable_tf(), seed in any::<u64>(), alpha in -3.0..3.0f64, beta in -3.0..3.0f64) {
        let x = gaussian(256, seed);
        let y = gaussian(256, seed ^ 0x55);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| alpha * p + beta * q).collect();
        let fx = filter_signal(&tf, &x).unwrap();
        let fy = filter_signal(&tf, &y).unwrap();
        let want: Vec<f64> = fx.iter().zip(&fy).map(|(p, q)| alpha * p + beta * q).collect();
        prop_assert!(rel_close(&filter_signal(&tf, &mix).unwrap(), &want, 1e-12));
    }

    #[test]
    fn filtering_is_time_invariant(tf in stable_tf(), seed in any::<u64>(), d in 0usize..40) {
        let x = gaussian(200, seed);
        let mut shifted = vec![0.0; d];
        shifted.extend_from_slice(&x);
        let y = filter_signal(&tf, &x).unwrap();
        let ys = filter_signal(&tf, &shifted).unwrap();
        prop_assert!(ys[..d].iter().all(|v| *v == 0.0));
        prop_assert!(rel_close(&ys[d..], &y, 1e-12));
    }

    #[test]
    fn fir_filtering_is_convolution(b in prop::collection::vec(-2.0..2.0f64, 1..12), seed in any::<u64>()) {
        let x = gaussian(100, seed);
        let tf = TransferFunction::fir(b.clone(), FS).unwrap();
        let y = filter_signal(&tf, &x).unwrap();
        let conv: Vec<f64> = (0..x.len())
            .map(|k| (0..b.len()).filter(|j| *j <= k).map(|j| b[j] * x[k - j]).sum())
            .collect();
        prop_assert!(rel_close(&y, &conv, 1e-12));
    }

    #[test]
    fn cascade_multiplies_responses(t1 in stable_tf(), t2 in stable_tf()) {
        let c = t1.cascade(&t2).unwrap();
        for g in 0..16 {
            let f = 0.5 * FS * (g as f64 + 0.5) / 16.0;
            let want = t1.response_at(f) * t2.response_at(f);
            prop_assert!((c.response_at(f) - want).norm() <= 1e-9 * want.norm().max(1.0));
        }
    }

    #[test]
    fn stable_impulse_response_decays(tf in stable_tf()) {
        let horizon = tf.decay_horizon(1e-10).expect("stable");
        let mut impulse = vec![0.0; horizon + 64];
        impulse[0] = 1.0;
        let h = filter_signal(&tf, &impulse).unwrap();
        let peak = h.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        prop_assert!(h[horizon..].iter().all(|v| v.abs() <= 1e-10 * peak));
    }

    #[test]
    fn schur_test_agrees_with_roots(coeffs in prop::collection::vec(-1.5..1.5f64, 1..9)) {
        let mut a = vec![1.0];
        a.extend(coeffs);
        let max_root = poly_roots(&a).iter().fold(0.0f64, |m, r| m.max(r.norm()));
        // skip polynomials with a root too close to the circle for either test to be decisive
        prop_assume!((max_root - 1.0).abs() > 1e-6);
        prop_assert_eq!(is_schur_stable(&a), max_root < 1.0);
    }
}

fn weighted_ridge(phis: &[Vec<f64>], ys: &[f64], lambda: f64, sigma: f64) -> Vec<f64> {
    let p = phis[0].len();
    let n = phis.len();
    let mut a = DMatrix::<f64>::identity(p, p) * (lambda.powi(n as i32) / sigma);
    let mut b = DVector::<f64>::zeros(p);
    for (k, (phi, y)) in phis.iter().zip(ys).enumerate() {
        let w = lambda.powi((n - 1 - k) as i32);
        let v = DVector::from_column_slice(phi);
        a += &v * v.transpose() * w;
        b += v * (w * y);
    }
    a.cholesky().unwrap().solve(&b).iter().copied().collect()
}

fn run_rls(phis: &[Vec<f64>], ys: &[f64], cfg: RlsConfig) -> RlsState {
    let mut rls = RlsState::new(phis[0].len(), cfg).unwrap();
    for (phi, y) in phis.iter().zip(ys) {
        let eps0 = y - rls.predict(phi).unwrap();
        rls.update(phi, eps0).unwrap();
    }
    rls
}

fn regression_data(p: usize, n: usize, noise: f64, seed: u64) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
    let phis: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let ys = phis
        .iter()
        .map(|phi| phi.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + noise * rng.random_range(-1.0..1.0))
        .collect();
    (truth, phis, ys)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rls_matches_weighted_ridge(p in 1usize..=12, seed in any::<u64>(), lambda in prop::sample::select(vec![1.0, 0.995, 0.98]), sigma in prop::sample::select(vec![1.0, 1e2, 1e4])) {
        let (_, phis, ys) = regression_data(p, 200, 0.2, seed);
        let cfg = RlsConfig { lambda, initial_gain: sigma, trace_ceiling: 1e12 };
        let rls = run_rls(&phis, &ys, cfg);
        let batch = weighted_ridge(&phis, &ys, lambda, sigma);
        let tol = if lambda == 1.0 { 1e-8 } else { 1e-6 };
        let num: f64 = rls.theta().iter().zip(&batch).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = batch.iter().map(|b| b * b).sum::<f64>().sqrt();
        prop_assert!(num <= tol * den, "{} vs {}", num / den, tol);
    }

    #[test]
    fn rls_recovers_noiseless_parameters(p in 1usize..=10, seed in any::<u64>()) {
        let (truth, phis, ys) = regression_data(p, 10 * p, 0.0, seed);
        let sigma = 1e6;
        let rls = run_rls(&phis, &ys, RlsConfig { lambda: 1.0, initial_gain: sigma, trace_ceiling: 1e12 });
        // the only error left is the pull of the initial gain toward zero
        let gram = DMatrix::from_fn(p, p, |i, j| phis.iter().map(|phi| phi[i] * phi[j]).sum::<f64>());
        let lambda_min = gram.symmetric_eigenvalues().min();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let err: Vec<f64> = rls.theta().iter().zip(&truth).map(|(a, b)| a - b).collect();
        prop_assert!(norm(&err) <= norm(&truth) / (1.0 + sigma * lambda_min) + 1e-9, "{:?}", err);
    }

    #[test]
    fn rls_zero_innovation_keeps_theta(p in 1usize..=6, seed in any::<u64>()) {
        let (_, phis, _) = regression_data(p, 20, 0.0, seed);
        let mut rls = RlsState::new(p, RlsConfig::default()).unwrap();
        let start: Vec<f64> = (0..p).map(|i| i as f64 * 0.1).collect();
        rls.set_theta(&start).unwrap();
        for phi in &phis {
            let before = rls.trace();
            rls.update(phi, 0.0).unwrap();
            prop_assert!(rls.trace() <= before);
        }
        prop_assert_eq!(rls.theta(), start.as_slice());
    }

    #[test]
    fn predict_error_is_linear_in_theta(seed in any::<u64>(), alpha in -2.0..2.0f64) {
        let orders = RegionOrders::new(3, 2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut reg = RegionRegressor::new(orders);
        for _ in 0..8 {
            reg.push_sample(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).unwrap();
        }
        let t1: Vec<f64> = (0..orders.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t2: Vec<f64> = (0..orders.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mix: Vec<f64> = t1.iter().zip(&t2).map(|(a, b)| alpha * a + b).collect();
        let p = |t: &[f64]| predict_error(&extract_model(t, orders).unwrap(), &reg).unwrap();
        prop_assert!((p(&mix) - (alpha * p(&t1) + p(&t2))).abs() < 1e-12);
    }
}

#[test]
fn gain_stays_symmetric_over_long_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut rls = RlsState::new(6, RlsConfig::with_lambda(0.999)).unwrap();
    for _ in 0..100_000 {
        let phi: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: f64 = rng.random_range(-1.0..1.0);
        let eps0 = y - rls.predict(&phi).unwrap();
        rls.update(&phi, eps0).unwrap();
    }
    let f = rls.gain();
    for i in 0..6 {
        for j in 0..6 {
            assert!((f[i * 6 + j] - f[j * 6 + i]).abs() <= 1e-12 * f[i * 6 + i].abs().max(1.0));
        }
    }
    assert!(rls.gain_is_positive_definite());
}

/// Noiseless ARX data from a model inside the class: online RLS equals the
/// batch least-squares oracle and both equal the generating parameters.
#[test]
fn identification_matches_batch_oracle() {
    let orders = RegionOrders::new(2, 2, 3);
    let truth = [0.5, -0.2, 0.8, 0.3, 1.0, -0.4, 0.25];
    let model = extract_model(&truth, orders).unwrap();
    let mut ident = RegionIdentifier::new(
        orders,
        RlsConfig {
            lambda: 1.0,
            initial_gain: 1e8,
            trace_ceiling: 1e15,
        },
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for _ in 0..10 * orders.dim() {
        let a: f64 = StandardNormal.sample(&mut rng);
        let u: f64 = StandardNormal.sample(&mut rng);
        ident.push_reference(a).unwrap();
        let e = predict_error(&model, ident.regressor()).unwrap();
        rows.push(ident.regressor().phi().to_vec());
        targets.push(e);
        ident.step_identify(e).unwrap();
        ident.push_output(e, u).unwrap();
    }
    let m = DMatrix::from_fn(rows.len(), orders.dim(), |r, c| rows[r][c]);
    let batch = m.svd(true, true).solve(&DVector::from_vec(targets), 1e-14).unwrap();
    for ((online, oracle), want) in ident.rls().theta().iter().zip(batch.iter()).zip(truth) {
        assert!((online - oracle).abs() < 1e-4, "{online} vs {oracle}");
        assert!((online - want).abs() < 1e-4);
    }
    let rhat = ident.model().rhat(FS).unwrap();
    assert_eq!(rhat.a()[0], 1.0);
}

#[test]
fn subband_model_fits_in_band_only() {
    // 8th-order plant, 5th-order model, excitation and error limited to band 1 of 4
    let bank = design_bank(&BankSpec::new(4, 64, 110.0, FS)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut a = vec![1.0];
    for _ in 0..4 {
        let r: f64 = rng.random_range(0.5..0.8);
        let th: f64 = rng.random_range(0.1..3.0);
        let sec = [1.0, -2.0 * r * th.cos(), r * r];
        let mut next = vec![0.0; a.len() + 2];
        for (i, c) in a.iter().enumerate() {
            for (j, s) in sec.iter().enumerate() {
                next[i + j] += c * s;
            }
        }
        a = next;
    }
    let plant = TransferFunction::new(vec![0.0, 1.0, 0.3, -0.2], a, FS).unwrap();
    let h = &bank.filters[1];
    let u = filter_signal(h, &gaussian(60_000, 3)).unwrap();
    let e = filter_signal(&plant, &u).unwrap();
    let e_i = filter_signal(h, &e).unwrap();
    let u_i = filter_signal(h, &u).unwrap();
    let orders = RegionOrders::new(5, 5, 1);
    let mut ident = RegionIdentifier::new(orders, RlsConfig::default()).unwrap();
    for k in 0..e.len() {
        ident.push_reference(0.0).unwrap();
        ident.step_identify(e_i[k]).unwrap();
        ident.push_output(e_i[k], u_i[k]).unwrap();
    }
    let fit = frf_compare(&ident.model().rhat(FS).unwrap(), &plant, bank.band_edges[1]).unwrap();
    assert!(fit.max_mag_db <= 1.0 && fit.max_phase_deg <= 5.0, "{fit:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bank_is_linear(seed in any::<u64>(), alpha in -2.0..2.0f64) {
        let bank = design_bank(&BankSpec::new(4, 64, 110.0, FS)).unwrap();
        let x = gaussian(300, seed);
        let y = gaussian(300, seed ^ 7);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| alpha * p + q).collect();
        let (bx, by, bm) = (bank.analyze(&x).unwrap(), bank.analyze(&y).unwrap(), bank.analyze(&mix).unwrap());
        for i in 0..4 {
            let want: Vec<f64> = bx[i].iter().zip(&by[i]).map(|(p, q)| alpha * p + q).collect();
            prop_assert!(rel_close(&bm[i], &want, 1e-12));
        }
    }

    #[test]
    fn sinusoid_lands_in_its_band(frac in 0.25..0.75f64, band in 0usize..4) {
        let fs = 41_760.0;
        let bank = design_bank(&BankSpec::new(4, 64, 110.0, fs)).unwrap();
        let (lo, hi) = bank.band_edges[band];
        let f = lo + frac * (hi - lo);
        prop_assert_eq!(bank.band_of_frequency(f).unwrap(), band);
        let x: Vec<f64> = (0..4096).map(|k| (2.0 * std::f64::consts::PI * f * k as f64 / fs).sin()).collect();
        let out = bank.analyze(&x).unwrap();
        let power = |v: &[f64]| v[1024..].iter().map(|s| s * s).sum::<f64>();
        let own = power(&out[band]);
        for (j, o) in out.iter().enumerate() {
            if j.abs_diff(band) >= 2 {
                prop_assert!(10.0 * (power(o) / own).log10() <= -80.0);
            }
        }
    }

    #[test]
    fn welch_satisfies_parseval(seed in any::<u64>(), level in 0.1..10.0f64) {
        let x: Vec<f64> = gaussian(256 * 64, seed).iter().map(|v| v * level).collect();
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        let psd = welch_psd(&x, FS, 256, 0.5).unwrap();
        prop_assert!(psd.density.iter().all(|d| *d >= 0.0));
        prop_assert!((psd.total_power() / var - 1.0).abs() <= 0.1);
    }

    #[test]
    fn attenuation_is_antisymmetric(seed in any::<u64>(), g in 0.01..10.0f64) {
        let x = gaussian(4096, seed);
        let y: Vec<f64> = gaussian(4096, seed ^ 3).iter().map(|v| v * g).collect();
        let bands = [(0.0, 250.0), (250.0, 500.0)];
        let ab = attenuation_report(&x, &y, &bands, FS, 256).unwrap();
        let ba = attenuation_report(&y, &x, &bands, FS, 256).unwrap();
        for (p, q) in ab.iter().zip(&ba) {
            prop_assert_eq!(p.attenuation_db, -q.attenuation_db);
        }
    }

    #[test]
    fn frf_self_comparison_is_exact(tf in stable_tf(), lo in 0.0..400.0f64) {
        let d = frf_compare(&tf, &tf, (lo, lo + 90.0)).unwrap();
        prop_assert_eq!((d.max_mag_db, d.max_phase_deg), (0.0, 0.0));
    }
}

fn superposition_scenario(disturbance: f64, noise: f64) -> Scenario {
    let mut sc = make_synthetic_scenario(5, Difficulty::Full);
    sc.disturbance.level = disturbance;
    sc.noise.level = noise;
    sc
}

#[test]
fn plant_loop_superposes() {
    let parts = [(1.0, 0.1, true), (0.0, 0.0, true), (1.0, 0.0, false), (0.0, 0.1, false)];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let u: Vec<[f64; 2]> = (0..3000)
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let traces: Vec<Vec<f64>> = parts
        .iter()
        .map(|&(d, n, drive)| {
            let mut sim = PlantSim::new(&superposition_scenario(d, n)).unwrap();
            u.iter()
                .map(|uk| sim.step_plant(if drive { uk } else { &[0.0, 0.0] }).unwrap().0)
                .collect()
        })
        .collect();
    for (k, &both) in traces[0].iter().enumerate() {
        let sum = traces[1][k] + traces[2][k] + traces[3][k];
        assert!((both - sum).abs() <= 1e-10 * both.abs().max(1.0), "k={k}");
    }
}

#[test]
fn channels_add_linearly() {
    let sc = superposition_scenario(0.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let u: Vec<[f64; 2]> = (0..2000)
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let run = |mask: [f64; 2]| -> Vec<f64> {
        let mut sim = PlantSim::new(&sc).unwrap();
        u.iter()
            .map(|uk| sim.step_plant(&[uk[0] * mask[0], uk[1] * mask[1]]).unwrap().0)
            .collect()
    };
    let (both, vcm, ma) = (run([1.0, 1.0]), run([1.0, 0.0]), run([0.0, 1.0]));
    for k in 0..u.len() {
        assert!((both[k] - vcm[k] - ma[k]).abs() <= 1e-10 * both[k].abs().max(1.0));
    }
}

#[test]
fn open_loop_psd_follows_primary_path() {
    let sc = make_synthetic_scenario(2, Difficulty::Desk);
    let t = run_open_loop(&sc, 1 << 17).unwrap();
    let psd = welch_psd(&t.e, sc.sample_rate_hz, 1024, 0.5).unwrap();
    let nyq = sc.sample_rate_hz / 2.0;
    for (f, d) in psd.freqs_hz.iter().zip(&psd.density) {
        if *f < 0.05 * nyq || *f > 0.95 * nyq {
            continue;
        }
        let want = sc.primary_path.response_at(*f).norm_sqr() * 2.0 / sc.sample_rate_hz;
        if want < 1e-6 {
            continue;
        }
        assert!((10.0 * (d / want).log10()).abs() <= 2.0, "{f} Hz: {d} vs {want}");
    }
}

#[test]
fn excitation_stays_in_band() {
    let sc = make_synthetic_scenario(3, Difficulty::Desk);
    let bank = sc.build_bank().unwrap();
    let mut sched = Scheduler::new(bank.clone(), sc.schedule.clone(), 1).unwrap();
    let r = sched.active_region().unwrap();
    let x = sched.excitation_stream(1 << 16);
    let psd = welch_psd(&x, sc.sample_rate_hz, 1024, 0.5).unwrap();
    let (lo, hi) = bank.band_edges[r];
    let width = hi - lo;
    let in_band = psd.band_power(lo, hi);
    let peak_in = psd
        .freqs_hz
        .iter()
        .zip(&psd.density)
        .filter(|(f, _)| **f >= lo && **f < hi)
        .fold(0.0f64, |m, (_, d)| m.max(*d));
    for (f, d) in psd.freqs_hz.iter().zip(&psd.density) {
        if *f < lo - width || *f > hi + width {
            assert!(10.0 * (d / peak_in).log10() <= -60.0, "{f} Hz");
        }
    }
    assert!(in_band > 0.5 * psd.total_power());
}

#[test]
fn frozen_parameters_never_move() {
    let sc = make_synthetic_scenario(4, Difficulty::Smoke);
    let t = run_with(
        &sc,
        RunLimits {
            total_samples: 120_000,
            tail_after_freeze: Some(20_000),
        },
    )
    .unwrap();
    let r = &t.regions[0];
    let at = r.frozen_at.expect("smoke region freezes");
    let after: Vec<_> = t.snapshots.iter().filter(|s| s.k >= at).collect();
    assert!(!after.is_empty());
    for s in after {
        assert_eq!(s.theta_q, r.theta_q);
        assert_eq!(s.theta_s, r.model.theta());
    }
    assert!(t.u_e[at + 1..].iter().all(|v| *v == 0.0));
}
