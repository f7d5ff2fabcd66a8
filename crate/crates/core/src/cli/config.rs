//! Run configuration files.
//!
//! Grammar, one item per line:
//!
//! ```text
//! # comment            (also after a value)
//! [section]
//! key = value
//! ```
//!
//! Sections and keys:
//!
//! | section   | keys |
//! |-----------|------|
//! | `user1`, `user2` | `v_s`, `v_0` |
//! | `channel` | `alpha_db_per_km` and `distance_km`, or `eta`; `w`; `sigma` |
//! | `chaos`   | `m1`, `m2`, or per user `psdN_kind` (`flat`/`table`), `psdN_omega_low`, `psdN_omega_high`, `psdN_density`, `psdN_table` |
//! | `model`   | `psi_mode`, `xi_mode` (`derived`/`paper_literal`), `beta`, `gamma_rule` (`interferer`/`fixed`), `gamma`, `gamma0`, `sub_vacuum` (`clamp`/`reject`) |
//!
//! `psdN_table` lists `omega:density` pairs separated by commas. The `model`
//! section is optional. When both `eta` and a distance are given, `eta` is
//! used and a warning is recorded.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::chaos::{correction_factor_from_psd, CorrectionFactor, PsdSpec, DEFAULT_BAND};
use crate::network::{
    ChannelParams, CrossMode, Interference, QcdmaParams, SubVacuumPolicy, User, UserParams,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            message: message.into(),
        }
    }

    fn general(message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError { line: Some(l), message } => write!(f, "line {l}: {message}"),
            ConfigError { line: None, message } => f.write_str(message),
        }
    }
}

impl std::error::Error for ConfigError {}

const SECTIONS: [(&str, &[&str]); 5] = [
    ("user1", &["v_s", "v_0"]),
    ("user2", &["v_s", "v_0"]),
    ("channel", &["alpha_db_per_km", "distance_km", "eta", "w", "sigma"]),
    (
        "chaos",
        &[
            "m1",
            "m2",
            "psd1_kind",
            "psd1_omega_low",
            "psd1_omega_high",
            "psd1_density",
            "psd1_table",
            "psd2_kind",
            "psd2_omega_low",
            "psd2_omega_high",
            "psd2_density",
            "psd2_table",
        ],
    ),
    ("model", &["psi_mode", "xi_mode", "beta", "gamma_rule", "gamma", "gamma0", "sub_vacuum"]),
];

/// Raw `section.key → (value, line)` map.
struct Entries(BTreeMap<(String, String), (String, usize)>);

impl Entries {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        let mut section: Option<&'static (&'static str, &'static [&'static str])> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::at(line, "unterminated section header"))?
                    .trim();
                section = Some(
                    SECTIONS
                        .iter()
                        .find(|(s, _)| *s == name)
                        .ok_or_else(|| ConfigError::at(line, format!("unknown section `{name}`")))?,
                );
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let (sname, keys) = section.ok_or_else(|| ConfigError::at(line, "key outside of any section"))?;
            if !keys.contains(&key) {
                return Err(ConfigError::at(line, format!("unknown key `{key}` in section [{sname}]")));
            }
            if value.is_empty() {
                return Err(ConfigError::at(line, format!("missing value for `{sname}.{key}`")));
            }
            let k = (sname.to_string(), key.to_string());
            if let Some((_, first)) = map.get(&k) {
                return Err(ConfigError::at(line, format!("duplicate key `{sname}.{key}` (first on line {first})")));
            }
            map.insert(k, (value.to_string(), line));
        }
        Ok(Entries(map))
    }

    fn raw(&self, section: &str, key: &str) -> Option<&(String, usize)> {
        self.0.get(&(section.to_string(), key.to_string()))
    }

    fn has(&self, section: &str, key: &str) -> bool {
        self.raw(section, key).is_some()
    }

    fn num(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.raw(section, key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| ConfigError::at(*line, format!("`{section}.{key}` must be a finite number, got `{v}`"))),
        }
    }

    fn req(&self, section: &str, key: &str) -> Result<f64, ConfigError> {
        self.num(section, key)?
            .ok_or_else(|| ConfigError::general(format!("missing required key `{key}` in section [{section}]")))
    }

    fn word(&self, section: &str, key: &str, allowed: &[&str]) -> Result<Option<String>, ConfigError> {
        match self.raw(section, key) {
            None => Ok(None),
            Some((v, _)) if allowed.contains(&v.as_str()) => Ok(Some(v.clone())),
            Some((v, line)) => Err(ConfigError::at(
                *line,
                format!("`{section}.{key}` must be one of {}, got `{v}`", allowed.join("|")),
            )),
        }
    }

    fn line(&self, section: &str, key: &str) -> Option<usize> {
        self.raw(section, key).map(|(_, l)| *l)
    }
}

/// Where a user's correction factor comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ChaosSource {
    Factor(f64),
    Spectrum(PsdSpec),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub alpha: Option<f64>,
    pub distance: Option<f64>,
    pub eta: Option<f64>,
    pub w: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub psi_mode: CrossMode,
    pub xi_mode: CrossMode,
    pub beta: f64,
    pub interference: Interference,
    pub sub_vacuum: SubVacuumPolicy,
}

/// A parsed configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub user1: UserParams,
    pub user2: UserParams,
    pub channel: ChannelSpec,
    pub chaos: [ChaosSource; 2],
    pub model: ModelSpec,
    pub warnings: Vec<String>,
}

fn cross_mode(word: Option<String>) -> CrossMode {
    match word.as_deref() {
        Some("derived") => CrossMode::Derived,
        _ => CrossMode::PaperLiteral,
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::general(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let e = Entries::parse(text)?;
        let mut warnings = Vec::new();

        let user = |s: &str| -> Result<UserParams, ConfigError> {
            let u = UserParams {
                v_s: e.req(s, "v_s")?,
                v_0: e.req(s, "v_0")?,
            };
            u.validate()
                .map_err(|err| ConfigError::at(e.line(s, "v_s").unwrap_or(0), format!("[{s}] {err}")))?;
            Ok(u)
        };
        let user1 = user("user1")?;
        let user2 = user("user2")?;

        let alpha = e.num("channel", "alpha_db_per_km")?;
        let distance = e.num("channel", "distance_km")?;
        let eta = e.num("channel", "eta")?;
        match (alpha, distance, eta) {
            (_, _, Some(_)) if alpha.is_some() || distance.is_some() => {
                warnings.push("both eta and alpha_db_per_km/distance_km given; using eta".to_string());
            }
            (Some(_), Some(_), None) | (_, _, Some(_)) => {}
            _ => {
                return Err(ConfigError::general(
                    "missing required key `distance_km` and `alpha_db_per_km` (or `eta`) in section [channel]",
                ))
            }
        }
        let channel = ChannelSpec {
            alpha,
            distance,
            eta,
            w: e.req("channel", "w")?,
            sigma: e.req("channel", "sigma")?,
        };

        let chaos = [Self::chaos_source(&e, 1)?, Self::chaos_source(&e, 2)?];

        let gamma_rule = e.word("model", "gamma_rule", &["interferer", "fixed"])?;
        let interference = match gamma_rule.as_deref() {
            Some("fixed") => Interference::Fixed {
                gamma: e.req("model", "gamma")?,
                gamma0: e.req("model", "gamma0")?,
            },
            _ => {
                for k in ["gamma", "gamma0"] {
                    if let Some(l) = e.line("model", k) {
                        return Err(ConfigError::at(l, format!("`model.{k}` needs gamma_rule = fixed")));
                    }
                }
                Interference::Interferer
            }
        };
        let model = ModelSpec {
            psi_mode: cross_mode(e.word("model", "psi_mode", &["derived", "paper_literal"])?),
            xi_mode: cross_mode(e.word("model", "xi_mode", &["derived", "paper_literal"])?),
            beta: e.num("model", "beta")?.unwrap_or(1.0),
            interference,
            sub_vacuum: match e.word("model", "sub_vacuum", &["clamp", "reject"])?.as_deref() {
                Some("reject") => SubVacuumPolicy::Reject,
                _ => SubVacuumPolicy::Clamp,
            },
        };

        let cfg = RunConfig {
            user1,
            user2,
            channel,
            chaos,
            model,
            warnings,
        };
        cfg.params().map_err(|err| ConfigError::general(err.to_string()))?;
        Ok(cfg)
    }

    fn chaos_source(e: &Entries, u: u8) -> Result<ChaosSource, ConfigError> {
        let m_key = format!("m{u}");
        let k = |s: &str| format!("psd{u}_{s}");
        let psd_keys = ["kind", "omega_low", "omega_high", "density", "table"];
        let any_psd = psd_keys.iter().find(|s| e.has("chaos", &k(s)));
        match (e.num("chaos", &m_key)?, any_psd) {
            (Some(_), Some(s)) => Err(ConfigError::at(
                e.line("chaos", &k(s)).unwrap_or(0),
                format!("give either `{m_key}` or psd{u}_* keys, not both"),
            )),
            (Some(m), None) => {
                CorrectionFactor::new(m)
                    .map_err(|err| ConfigError::at(e.line("chaos", &m_key).unwrap_or(0), err.to_string()))?;
                Ok(ChaosSource::Factor(m))
            }
            (None, None) => Err(ConfigError::general(format!(
                "missing required key `{m_key}` (or psd{u}_* keys) in section [chaos]"
            ))),
            (None, Some(_)) => {
                let kind = e
                    .word("chaos", &k("kind"), &["flat", "table"])?
                    .ok_or_else(|| ConfigError::general(format!("missing required key `{}` in section [chaos]", k("kind"))))?;
                let lo = e.req("chaos", &k("omega_low"))?;
                let hi = e.req("chaos", &k("omega_high"))?;
                let line = e.line("chaos", &k("kind")).unwrap_or(0);
                let spec = if kind == "flat" {
                    PsdSpec::flat_band(e.req("chaos", &k("density"))?, lo, hi)
                } else {
                    let (table, tline) = e
                        .raw("chaos", &k("table"))
                        .ok_or_else(|| ConfigError::general(format!("missing required key `{}` in section [chaos]", k("table"))))?;
                    let mut omega = Vec::new();
                    let mut density = Vec::new();
                    for pair in table.trim_matches('"').split(',') {
                        let parsed = pair
                            .split_once(':')
                            .and_then(|(a, b)| Some((a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?)));
                        let (w, s) = parsed
                            .ok_or_else(|| ConfigError::at(*tline, format!("bad table entry `{}`", pair.trim())))?;
                        omega.push(w);
                        density.push(s);
                    }
                    PsdSpec::tabulated(omega, density, lo, hi)
                };
                let spec = spec.map_err(|err| ConfigError::at(line, err.to_string()))?;
                correction_factor_from_psd(&spec).map_err(|err| ConfigError::at(line, err.to_string()))?;
                Ok(ChaosSource::Spectrum(spec))
            }
        }
    }

    /// Correction factor of user `u`.
    pub fn correction(&self, u: User) -> crate::Result<CorrectionFactor> {
        match &self.chaos[u.index()] {
            ChaosSource::Factor(m) => CorrectionFactor::new(*m),
            ChaosSource::Spectrum(psd) => correction_factor_from_psd(psd),
        }
    }

    /// Spectrum of user `u`; a bare factor becomes a flat band over the
    /// default band tuned to it.
    pub fn psd(&self, u: User) -> crate::Result<PsdSpec> {
        match &self.chaos[u.index()] {
            ChaosSource::Factor(m) => PsdSpec::flat_band_for(*m, DEFAULT_BAND.0, DEFAULT_BAND.1),
            ChaosSource::Spectrum(psd) => Ok(psd.clone()),
        }
    }

    pub fn channel_params(&self) -> crate::Result<ChannelParams> {
        let c = &self.channel;
        match (c.eta, c.alpha, c.distance) {
            (Some(eta), alpha, _) => {
                let mut ch = ChannelParams::with_eta(eta, c.w, c.sigma)?;
                ch.alpha = alpha;
                Ok(ch)
            }
            (None, Some(a), Some(d)) => ChannelParams::from_distance(a, d, c.w, c.sigma),
            _ => Err(crate::Error::param("eta", "channel needs eta or alpha and distance")),
        }
    }

    /// Channel at distance `d` with the configured attenuation.
    pub fn channel_at(&self, d: f64) -> crate::Result<ChannelParams> {
        let alpha = self
            .channel
            .alpha
            .ok_or_else(|| crate::Error::param("alpha", "setting a distance needs alpha_db_per_km in [channel]"))?;
        ChannelParams::from_distance(alpha, d, self.channel.w, self.channel.sigma)
    }

    pub fn params(&self) -> crate::Result<QcdmaParams> {
        let mut p = QcdmaParams::new(
            self.user1,
            self.user2,
            self.channel_params()?,
            self.correction(User::One)?,
            self.correction(User::Two)?,
        );
        p.psi_mode = self.model.psi_mode;
        p.xi_mode = self.model.xi_mode;
        p.beta = self.model.beta;
        p.interference = self.model.interference;
        p.sub_vacuum = self.model.sub_vacuum;
        p.validate()?;
        Ok(p)
    }
}
