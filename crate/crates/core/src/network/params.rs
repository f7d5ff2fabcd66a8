use serde::Serialize;

use crate::chaos::CorrectionFactor;
use crate::{Error, Result};

/// One of the two Alice/Bob pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum User {
    One,
    Two,
}

impl User {
    pub const BOTH: [User; 2] = [User::One, User::Two];

    pub fn other(self) -> User {
        match self {
            User::One => User::Two,
            User::Two => User::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            User::One => 0,
            User::Two => 1,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }
}

/// Gaussian-modulated coherent-state source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UserParams {
    /// Modulation variance `V_S` (SNU).
    pub v_s: f64,
    /// Preparation noise `V_0` (SNU), 1 for coherent states.
    pub v_0: f64,
}

impl UserParams {
    pub fn new(v_s: f64, v_0: f64) -> Result<Self> {
        let u = UserParams { v_s, v_0 };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_s >= 0.0) || !self.v_s.is_finite() {
            return Err(Error::param("v_s", format!("must be finite and >= 0, got {}", self.v_s)));
        }
        if !(self.v_0 >= 1.0) || !self.v_0.is_finite() {
            return Err(Error::param("v_0", format!("must be finite and >= 1, got {}", self.v_0)));
        }
        Ok(())
    }

    /// Total quadrature variance `V_A = V_S + V_0`.
    pub fn v_a(&self) -> f64 {
        self.v_s + self.v_0
    }
}

/// `η = 10^(−α·d/10)`.
pub fn transmittance(alpha_db_per_km: f64, distance_km: f64) -> f64 {
    10f64.powf(-alpha_db_per_km * distance_km / 10.0)
}

/// Lossy channel under an entangling-cloner attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelParams {
    /// Attenuation (dB/km), when `eta` was derived from a distance.
    pub alpha: Option<f64>,
    /// Fibre length (km), when `eta` was derived from a distance.
    pub distance: Option<f64>,
    /// Transmittance `η ∈ [0, 1]`.
    pub eta: f64,
    /// Variance `W` of Eve's EPR ancilla (SNU).
    pub w: f64,
    /// Variance `σ` of the environment mode at the receiver splitter (SNU).
    pub sigma: f64,
}

impl ChannelParams {
    pub fn from_distance(alpha: f64, distance: f64, w: f64, sigma: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::param("alpha", format!("must be finite and >= 0, got {alpha}")));
        }
        if !(distance >= 0.0) || !distance.is_finite() {
            return Err(Error::param("distance", format!("must be finite and >= 0, got {distance}")));
        }
        let c = ChannelParams {
            alpha: Some(alpha),
            distance: Some(distance),
            eta: transmittance(alpha, distance),
            w,
            sigma,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_eta(eta: f64, w: f64, sigma: f64) -> Result<Self> {
        let c = ChannelParams {
            alpha: None,
            distance: None,
            eta,
            w,
            sigma,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::param("eta", format!("must lie in [0, 1], got {}", self.eta)));
        }
        if !(self.w >= 1.0) || !self.w.is_finite() {
            return Err(Error::param("w", format!("must be finite and >= 1, got {}", self.w)));
        }
        if !(self.sigma >= 1.0) || !self.sigma.is_finite() {
            return Err(Error::param("sigma", format!("must be finite and >= 1, got {}", self.sigma)));
        }
        Ok(())
    }

    /// Same noise, new distance (requires a known attenuation).
    pub fn at_distance(&self, distance: f64) -> Result<Self> {
        let alpha = self
            .alpha
            .ok_or_else(|| Error::param("alpha", "distance sweep needs an attenuation coefficient"))?;
        Self::from_distance(alpha, distance, self.w, self.sigma)
    }
}

/// How the interference variance seen by each Bob is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Interference {
    /// `Γ_u = V_A` and `Γ₀,u = V_0` of the other user (the other Alice's mode
    /// is the interferer).
    Interferer,
    /// The same `Γ = Γ₀ + Γ_S` for both users.
    Fixed { gamma: f64, gamma0: f64 },
}

/// Which expression to use for Eve's cross-covariances with Bob.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CrossMode {
    /// Averaging the exact phase factors of each product jointly.
    Derived,
    /// The expressions as printed alongside the conditional matrix.
    PaperLiteral,
}

/// What to do when a covariance matrix of the model falls below the vacuum
/// bound (symplectic eigenvalue `< 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SubVacuumPolicy {
    /// Sub-vacuum modes contribute zero entropy; the result is flagged.
    Clamp,
    /// Fail with the entropy domain error.
    Reject,
}

/// Full two-user scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QcdmaParams {
    pub user1: UserParams,
    pub user2: UserParams,
    pub channel: ChannelParams,
    pub m1: CorrectionFactor,
    pub m2: CorrectionFactor,
    pub interference: Interference,
    /// Reconciliation efficiency `β ∈ (0, 1]`.
    pub beta: f64,
    pub psi_mode: CrossMode,
    pub xi_mode: CrossMode,
    pub sub_vacuum: SubVacuumPolicy,
}

impl QcdmaParams {
    /// Scenario with the defaults used for figure reproduction: interference
    /// from the other user, `β = 1`, literal cross-covariances, clamped
    /// sub-vacuum entropies.
    pub fn new(
        user1: UserParams,
        user2: UserParams,
        channel: ChannelParams,
        m1: CorrectionFactor,
        m2: CorrectionFactor,
    ) -> Self {
        QcdmaParams {
            user1,
            user2,
            channel,
            m1,
            m2,
            interference: Interference::Interferer,
            beta: 1.0,
            psi_mode: CrossMode::PaperLiteral,
            xi_mode: CrossMode::PaperLiteral,
            sub_vacuum: SubVacuumPolicy::Clamp,
        }
    }

    /// Both users with the same source and correction factor.
    pub fn symmetric(user: UserParams, channel: ChannelParams, m: CorrectionFactor) -> Self {
        Self::new(user, user, channel, m, m)
    }

    pub fn validate(&self) -> Result<()> {
        self.user1.validate()?;
        self.user2.validate()?;
        self.channel.validate()?;
        CorrectionFactor::new(self.m1.value())?;
        CorrectionFactor::new(self.m2.value())?;
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::param("beta", format!("must lie in (0, 1], got {}", self.beta)));
        }
        if let Interference::Fixed { gamma, gamma0 } = self.interference {
            if !(gamma0 >= 1.0) || !gamma0.is_finite() {
                return Err(Error::param("gamma0", format!("must be finite and >= 1, got {gamma0}")));
            }
            if !(gamma >= gamma0) || !gamma.is_finite() {
                return Err(Error::param("gamma", format!("must be finite and >= gamma0, got {gamma}")));
            }
        }
        Ok(())
    }

    pub fn user(&self, u: User) -> &UserParams {
        match u {
            User::One => &self.user1,
            User::Two => &self.user2,
        }
    }

    pub fn m(&self, u: User) -> f64 {
        match u {
            User::One => self.m1.value(),
            User::Two => self.m2.value(),
        }
    }

    /// `(Γ, Γ₀)` of the interference seen by Bob `u`.
    pub fn gamma(&self, u: User) -> (f64, f64) {
        match self.interference {
            Interference::Interferer => {
                let other = self.user(u.other());
                (other.v_a(), other.v_0)
            }
            Interference::Fixed { gamma, gamma0 } => (gamma, gamma0),
        }
    }

    /// The scenario with the two users' sources and correction factors
    /// exchanged.
    pub fn swapped(&self) -> Self {
        QcdmaParams {
            user1: self.user2,
            user2: self.user1,
            m1: self.m2,
            m2: self.m1,
            ..*self
        }
    }

    pub fn with_channel(&self, channel: ChannelParams) -> Self {
        QcdmaParams { channel, ..*self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transmittance_points() {
        assert_eq!(transmittance(0.25, 0.0), 1.0);
        assert_eq!(transmittance(0.25, 40.0), 0.1);
        assert_eq!(transmittance(0.2, 50.0), 0.1);
    }

    #[test]
    fn parameter_ranges() {
        assert!(UserParams::new(-1.0, 1.0).is_err());
        assert!(UserParams::new(10.0, 0.5).is_err());
        assert_eq!(UserParams::new(100.0, 1.0).unwrap().v_a(), 101.0);
        assert!(ChannelParams::with_eta(1.1, 1.0, 1.0).is_err());
        assert!(ChannelParams::with_eta(0.5, 0.9, 1.0).is_err());
        assert!(ChannelParams::with_eta(0.5, 1.0, 0.9).is_err());
        assert!(ChannelParams::from_distance(-0.1, 1.0, 1.0, 1.0).is_err());
        assert!(ChannelParams::with_eta(0.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn interferer_rule_tracks_other_user() {
        let p = QcdmaParams::new(
            UserParams::new(100.0, 1.0).unwrap(),
            UserParams::new(10.0, 2.0).unwrap(),
            ChannelParams::with_eta(0.5, 1.0, 1.0).unwrap(),
            CorrectionFactor::new(0.1).unwrap(),
            CorrectionFactor::new(0.2).unwrap(),
        );
        assert_eq!(p.gamma(User::One), (12.0, 2.0));
        assert_eq!(p.gamma(User::Two), (101.0, 1.0));
        let s = p.swapped();
        assert_eq!(s.gamma(User::One), (101.0, 1.0));
        assert_eq!(s.m(User::One), 0.2);
    }

    #[test]
    fn fixed_gamma_validated() {
        let mut p = QcdmaParams::symmetric(
            UserParams::new(1.0, 1.0).unwrap(),
            ChannelParams::with_eta(0.5, 1.0, 1.0).unwrap(),
            CorrectionFactor::ONE,
        );
        p.interference = Interference::Fixed { gamma: 0.5, gamma0: 1.0 };
        assert!(p.validate().is_err());
        p.interference = Interference::Fixed { gamma: 3.0, gamma0: 1.0 };
        assert!(p.validate().is_ok());
        p.beta = 0.0;
        assert!(p.validate().is_err());
    }
}
