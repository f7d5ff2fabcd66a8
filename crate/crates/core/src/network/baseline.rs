use super::params::{ChannelParams, SubVacuumPolicy, UserParams};
use super::skr::{cloner_holevo, gaussian_mutual_information};
use crate::gaussian::CrossCovariance;
use crate::{Error, Result};

/// Single-user coherent-state protocol over the same channel, homodyne
/// detection and reverse reconciliation.
///
/// `X_B = √η X_A + √(1−η) X_N`, so `V_B = ηV_A + (1−η)W` and
/// `V_B|A = ηV_0 + (1−η)W`.
pub fn baseline_skr(user: &UserParams, channel: &ChannelParams, beta: f64) -> Result<f64> {
    user.validate()?;
    channel.validate()?;
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::param("beta", format!("must lie in (0, 1], got {beta}")));
    }
    let eta = channel.eta;
    let w = channel.w;
    let v_a = user.v_a();
    if eta == 0.0 {
        return Ok(0.0);
    }
    let v_b = eta * v_a + (1.0 - eta) * w;
    let v_b_given_a = eta * user.v_0 + (1.0 - eta) * w;
    let i_ab = gaussian_mutual_information(v_b, v_b_given_a)?;
    let cross = CrossCovariance {
        xi: (eta * (1.0 - eta)).sqrt() * (w - v_a),
        psi: (1.0 - eta).sqrt() * (w * w - 1.0).sqrt(),
    };
    let h = cloner_holevo(v_a, eta, w, cross, v_b, SubVacuumPolicy::Reject)?;
    Ok((beta * i_ab - h.chi).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::params::transmittance;

    #[test]
    fn lossless_noiseless() {
        let u = UserParams::new(100.0, 1.0).unwrap();
        let c = ChannelParams::with_eta(1.0, 1.0, 1.0).unwrap();
        let r = baseline_skr(&u, &c, 1.0).unwrap();
        assert!((r - 0.5 * 101f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn blocked_channel() {
        let u = UserParams::new(100.0, 1.0).unwrap();
        let c = ChannelParams::with_eta(0.0, 1.0, 1.0).unwrap();
        assert_eq!(baseline_skr(&u, &c, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn decreasing_in_distance() {
        let u = UserParams::new(100.0, 1.0).unwrap();
        let mut last = f64::INFINITY;
        for d in 0..=100 {
            let c = ChannelParams::from_distance(0.25, d as f64, 1.0, 1.0).unwrap();
            let r = baseline_skr(&u, &c, 1.0).unwrap();
            assert!(r <= last, "d={d}: {r} > {last}");
            last = r;
        }
        assert!(transmittance(0.25, 100.0) > 0.0);
    }

    #[test]
    fn pure_loss_matches_known_form() {
        // W = 1, V_0 = 1: I = ½log₂(1+ηV_S); Eve holds the purification of
        // a single mode with variance (1−η)V_A + η.
        let u = UserParams::new(100.0, 1.0).unwrap();
        let eta = 0.1;
        let c = ChannelParams::with_eta(eta, 1.0, 1.0).unwrap();
        let r = baseline_skr(&u, &c, 1.0).unwrap();
        let v_a = 101.0;
        let v_b = eta * v_a + 1.0 - eta;
        let g = |x: f64| crate::gaussian::g_entropy(x).unwrap();
        let e = (1.0 - eta) * v_a + eta;
        // Conditioned on X_B her x-variance drops to V_A/V_B.
        let nu_c = (e * v_a / v_b).sqrt();
        let expected = 0.5 * (v_b).log2() - (g(e) - g(nu_c));
        assert!((r - expected).abs() < 1e-10, "{r} vs {expected}");
    }
}
