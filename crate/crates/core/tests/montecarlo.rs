use std::sync::Mutex;

use qcdma::chaos::{CorrectionFactor, PsdSpec};
use qcdma::montecarlo::{
    compare_with_analytic, empirical_stats, simulate_averaged, simulate_explicit_phase, EmpiricalStats, Estimate,
};
use qcdma::network::{self, ChannelParams, CrossMode, QcdmaParams, User, UserParams};

// Large batches take a few hundred MB each; run them one at a time.
static HEAVY: Mutex<()> = Mutex::new(());

fn heavy() -> std::sync::MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|e| e.into_inner())
}

fn scenario(v_s: f64, d: f64, w: f64, m: f64) -> QcdmaParams {
    QcdmaParams::symmetric(
        UserParams::new(v_s, 1.0).unwrap(),
        ChannelParams::from_distance(0.25, d, w, 1.0).unwrap(),
        CorrectionFactor::new(m).unwrap(),
    )
}

fn within(e: Estimate, target: f64, k: f64) -> bool {
    (e.value - target).abs() <= k * e.std_err
}

fn averaged(p: &QcdmaParams, n: usize, seed: u64) -> EmpiricalStats {
    empirical_stats(&simulate_averaged(p, n, seed).unwrap()).unwrap()
}

#[test]
fn unmodulated_bob_variance_is_conditional() {
    let _g = heavy();
    let p = scenario(0.0, 10.0, 1.0, 0.2);
    let s = averaged(&p, 200_000, 21);
    for u in User::BOTH {
        assert_eq!(network::bob_variance(&p, u), network::conditional_variance(&p, u));
        assert!(within(s.user(u).v_b, network::conditional_variance(&p, u), 5.0));
    }
}

#[test]
fn averaged_model_twin_covariance_follows_derived_form() {
    let _g = heavy();
    let p = scenario(100.0, 10.0, 2.0, 0.01);
    let s = averaged(&p, 1_000_000, 22);
    for u in User::BOTH {
        let psi = s.user(u).psi;
        assert!(within(psi, network::psi_for(&p, u, CrossMode::Derived), 3.0));
        assert!(!within(psi, network::psi_for(&p, u, CrossMode::PaperLiteral), 5.0));
        let xi = s.user(u).xi;
        assert!(within(xi, network::xi_for(&p, u, CrossMode::PaperLiteral), 5.0));
    }
    let p = scenario(100.0, 10.0, 2.0, 1.0);
    let s = averaged(&p, 1_000_000, 23);
    let lit = network::psi_for(&p, User::One, CrossMode::PaperLiteral);
    assert_eq!(lit, network::psi_for(&p, User::One, CrossMode::Derived) * 2f64.sqrt());
    assert!(!within(s.user1.psi, lit, 5.0));
}

#[test]
fn explicit_model_without_phase_noise_matches_averaged() {
    let _g = heavy();
    let p = scenario(10.0, 20.0, 1.5, 1.0);
    let zero = PsdSpec::flat_band(0.0, 1.0, 10.0).unwrap();
    let e = empirical_stats(&simulate_explicit_phase(&p, &zero, &zero, 400_000, 31).unwrap()).unwrap();
    let a = averaged(&p, 400_000, 32);
    let close = |x: Estimate, y: Estimate| (x.value - y.value).abs() <= 3.0 * x.std_err.hypot(y.std_err);
    for u in User::BOTH {
        let (x, y) = (e.user(u), a.user(u));
        assert!(close(x.v_b, y.v_b));
        assert!(close(x.v_b_given_a.unwrap(), y.v_b_given_a.unwrap()));
        assert!(close(x.mutual_information.unwrap(), y.mutual_information.unwrap()));
        assert!(close(x.psi, y.psi));
        assert!(close(x.xi, y.xi));
        assert_eq!(x.mean_cos_theta.value, 1.0);
    }
}

#[test]
fn explicit_model_phase_average_and_cross_terms() {
    let _g = heavy();
    let p = scenario(100.0, 10.0, 2.0, 0.01);
    let psd = PsdSpec::flat_band_for(0.01, 1.0, 10.0).unwrap();
    let s = empirical_stats(&simulate_explicit_phase(&p, &psd, &psd, 1_000_000, 41).unwrap()).unwrap();
    for u in User::BOTH {
        let st = s.user(u);
        assert!(within(st.mean_cos_theta, 0.1, 3.0), "{:?}", st.mean_cos_theta);
        assert!(within(st.mean_sin_theta, 0.0, 3.0));
        assert!(within(st.psi, network::psi_for(&p, u, CrossMode::Derived), 3.0));
        assert!(within(st.xi, network::xi_for(&p, u, CrossMode::Derived), 3.0));
    }
}

#[test]
fn standard_errors_shrink_as_root_n() {
    let _g = heavy();
    let p = scenario(100.0, 10.0, 1.0, 0.01);
    let small = averaged(&p, 100_000, 51);
    let large = averaged(&p, 400_000, 51);
    for (a, b) in [
        (small.user1.v_b, large.user1.v_b),
        (small.user1.mutual_information.unwrap(), large.user1.mutual_information.unwrap()),
        (small.user2.xi, large.user2.xi),
    ] {
        let ratio = a.std_err / b.std_err;
        assert!((ratio - 2.0).abs() <= 0.3 * 2.0, "ratio {ratio}");
    }
}

#[test]
fn statistics_are_deterministic() {
    let _g = heavy();
    let p = scenario(30.0, 5.0, 1.2, 0.05);
    assert_eq!(averaged(&p, 50_000, 9), averaged(&p, 50_000, 9));
}

#[test]
fn averaged_model_agrees_on_random_scenarios() {
    use rand::{Rng, SeedableRng};
    let _g = heavy();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    for k in 0..20 {
        let p = QcdmaParams::new(
            UserParams::new(rng.random_range(0.5..150.0), rng.random_range(1.0..3.0)).unwrap(),
            UserParams::new(rng.random_range(0.5..150.0), rng.random_range(1.0..3.0)).unwrap(),
            ChannelParams::from_distance(0.25, rng.random_range(0.0..60.0), rng.random_range(1.0..3.0), rng.random_range(1.0..3.0))
                .unwrap(),
            CorrectionFactor::new(rng.random_range(0.001..1.0)).unwrap(),
            CorrectionFactor::new(rng.random_range(0.001..1.0)).unwrap(),
        );
        let s = averaged(&p, 1_000_000, 100 + k);
        for row in compare_with_analytic(&p, &s).unwrap() {
            let checked = row.quantity.starts_with("v_b") || row.quantity.starts_with("i_ab");
            if checked {
                assert!(row.z_score.abs() < 5.0, "scenario {k}: {row:?}");
            }
        }
    }
}
