//! Flat TOML run configuration keyed by the usual parameter notation.

use std::path::Path;

use mgamsgd::elasticity::LoadCase;
use mgamsgd::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseName {
    A,
    B,
}

impl From<CaseName> for LoadCase {
    fn from(c: CaseName) -> Self {
        match c {
            CaseName::A => LoadCase::A,
            CaseName::B => LoadCase::B,
        }
    }
}

impl From<LoadCase> for CaseName {
    fn from(c: LoadCase) -> Self {
        match c {
            LoadCase::A => CaseName::A,
            LoadCase::B => CaseName::B,
        }
    }
}

/// Every key is optional; missing keys keep their defaults. `N_x` alone
/// sets all three grid counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub lr_c: Option<f64>,
    #[serde(rename = "N_GAi")]
    pub n_gai: Option<usize>,
    #[serde(rename = "N_h")]
    pub n_h: Option<usize>,
    #[serde(rename = "N_nh")]
    pub n_nh: Option<usize>,
    #[serde(rename = "P_sf")]
    pub p_sf: Option<f64>,
    #[serde(rename = "N_x")]
    pub n_x: Option<usize>,
    #[serde(rename = "N_y")]
    pub n_y: Option<usize>,
    #[serde(rename = "N_z")]
    pub n_z: Option<usize>,
    pub beta_i: Option<f64>,
    #[serde(rename = "M_g")]
    pub m_g: Option<f64>,
    #[serde(rename = "M_m")]
    pub m_m: Option<f64>,
    #[serde(rename = "M_l")]
    pub m_l: Option<f64>,
    pub lr_f: Option<f64>,
    pub gamma: Option<f64>,
    pub case: Option<CaseName>,
    #[serde(rename = "E")]
    pub e: Option<f64>,
    pub nu: Option<f64>,
    pub seed: Option<u64>,
    pub fsgd_iters: Option<usize>,
    pub csgd_iters: Option<usize>,
    pub tournament_size: Option<usize>,
    pub normalize_stress: Option<bool>,
    pub init_bound: Option<f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Defaults overlaid with the keys present here, validated.
    pub fn to_train_config(&self) -> Result<TrainConfig, CliError> {
        let mut c = TrainConfig::default();
        macro_rules! set {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = self.$field { c.$target = v; })*
            };
        }
        set!(
            lr_c => lr_c, n_gai => n_gai, n_h => n_h, n_nh => n_nh, p_sf => p_sf,
            beta_i => beta_i, m_g => m_g, m_m => m_m, m_l => m_l, lr_f => lr_f,
            e => e, nu => nu, seed => seed, fsgd_iters => fsgd_iters,
            csgd_iters => csgd_iters, tournament_size => tournament_size,
            normalize_stress => normalize_stress, init_bound => init_bound,
        );
        if let Some(n) = self.n_x {
            c.nx = n;
            c.ny = n;
            c.nz = n;
        }
        if let Some(n) = self.n_y {
            c.ny = n;
        }
        if let Some(n) = self.n_z {
            c.nz = n;
        }
        c.gamma = self.gamma;
        if let Some(case) = self.case {
            c.case = case.into();
        }
        c.validate()?;
        Ok(c)
    }

    /// Every key filled from `c`, with `gamma` resolved.
    pub fn from_train_config(c: &TrainConfig) -> Self {
        Self {
            lr_c: Some(c.lr_c),
            n_gai: Some(c.n_gai),
            n_h: Some(c.n_h),
            n_nh: Some(c.n_nh),
            p_sf: Some(c.p_sf),
            n_x: Some(c.nx),
            n_y: Some(c.ny),
            n_z: Some(c.nz),
            beta_i: Some(c.beta_i),
            m_g: Some(c.m_g),
            m_m: Some(c.m_m),
            m_l: Some(c.m_l),
            lr_f: Some(c.lr_f),
            gamma: Some(c.gamma()),
            case: Some(c.case.into()),
            e: Some(c.e),
            nu: Some(c.nu),
            seed: Some(c.seed),
            fsgd_iters: Some(c.fsgd_iters),
            csgd_iters: Some(c.csgd_iters),
            tournament_size: Some(c.tournament_size),
            normalize_stress: Some(c.normalize_stress),
            init_bound: Some(c.init_bound),
        }
    }
}

/// Loads `path` when given, otherwise the defaults.
pub fn load_train_config(path: Option<&Path>) -> Result<TrainConfig, CliError> {
    match path {
        Some(p) => ConfigFile::load(p)?.to_train_config(),
        None => ConfigFile::default().to_train_config(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ConfigFile::parse("").unwrap().to_train_config().unwrap();
        assert_eq!(c, TrainConfig::default());
    }

    #[test]
    fn table_notation_keys() {
        let text = "lr_c = 0.5\nN_GAi = 12\nN_h = 3\nN_nh = 8\nP_sf = 0.95\nN_x = 4\n\
                    beta_i = 1.0\nM_g = 0.2\nM_m = 0.1\nM_l = 0.4\nlr_f = 1e-4\ngamma = 2.0\n\
                    case = \"B\"\nE = 2.0\nnu = 0.25\n";
        let c = ConfigFile::parse(text).unwrap().to_train_config().unwrap();
        assert_eq!(
            (c.lr_c, c.n_gai, c.n_h, c.n_nh, c.p_sf),
            (0.5, 12, 3, 8, 0.95)
        );
        assert_eq!((c.nx, c.ny, c.nz, c.beta_i), (4, 4, 4, 1.0));
        assert_eq!((c.m_g, c.m_m, c.m_l, c.lr_f), (0.2, 0.1, 0.4, 1e-4));
        assert_eq!(
            (c.gamma(), c.case, c.e, c.nu),
            (2.0, LoadCase::B, 2.0, 0.25)
        );
    }

    #[test]
    fn unknown_key_is_an_error() {
        assert!(matches!(
            ConfigFile::parse("learning_rate = 0.1"),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn invalid_value_is_an_error() {
        let f = ConfigFile::parse("P_sf = 1.5").unwrap();
        assert!(matches!(f.to_train_config(), Err(CliError::Config(_))));
    }

    #[test]
    fn echo_roundtrips() {
        let c = TrainConfig {
            seed: 9,
            nx: 6,
            ny: 4,
            nz: 3,
            ..TrainConfig::default()
        };
        let text = toml::to_string(&ConfigFile::from_train_config(&c)).unwrap();
        let back = ConfigFile::parse(&text).unwrap().to_train_config().unwrap();
        assert_eq!(
            back,
            TrainConfig {
                gamma: Some(c.gamma()),
                ..c
            }
        );
    }
}
