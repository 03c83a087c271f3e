//! TOML experiment configuration.
//!
//! Every section has defaults matching the reference setup (`B = 1`, `eps = 0.5`, domain
//! `[-6, 6]^2`, gaussian `V`, `f` centered at 2 with half-width 0.8), so a config file only
//! lists what differs. Unknown keys are rejected.

use std::path::Path;

use magstark::grid::{make_grid, GridSpec};
use magstark::hamiltonian::FieldParams;
use magstark::potentials::{clamp_for_positivity, PotentialSpec};
use magstark::spectral::{BumpFunction, WeightSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub grid: GridBlock,
    pub fields: FieldsBlock,
    pub potential: PotentialBlock,
    pub function: FunctionBlock,
    pub experiment: ExperimentBlock,
}

/// Half-lengths and point counts; the domain is `[-lx, lx] x [-ly, ly]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridBlock {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridBlock {
    fn default() -> Self {
        Self {
            lx: 6.0,
            ly: 6.0,
            nx: 31,
            ny: 31,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldsBlock {
    pub b: f64,
    pub eps: f64,
}

impl Default for FieldsBlock {
    fn default() -> Self {
        Self { b: 1.0, eps: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Zero,
    SeparablePower,
    Gaussian,
    CompactBump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialBlock {
    pub family: FamilyName,
    pub amplitude: f64,
    /// Gaussian width.
    pub sigma: f64,
    /// Compact bump radius.
    pub rho: f64,
    pub n: u32,
    pub delta: f64,
    /// Rescale the amplitude so that `sup |dV/dx| <= eps/2` on the grid.
    pub clamp: bool,
}

impl Default for PotentialBlock {
    fn default() -> Self {
        Self {
            family: FamilyName::Gaussian,
            amplitude: 0.5,
            sigma: 2.0,
            rho: 1.5,
            n: 3,
            delta: 0.5,
            clamp: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FunctionBlock {
    pub center: f64,
    pub halfwidth: f64,
    /// Flat top of half-width `core`.
    pub plateau: bool,
    pub core: f64,
    /// Replace `center`/`halfwidth` by the widest gap window of `Q` in `(B, 3B)`.
    pub gap_window: bool,
}

impl Default for FunctionBlock {
    fn default() -> Self {
        Self {
            center: 2.0,
            halfwidth: 0.8,
            plateau: false,
            core: 0.4,
            gap_window: false,
        }
    }
}

/// Sweep lists, tolerances and runner knobs. Not every experiment reads every key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentBlock {
    /// Worker threads; 0 means one per logical core.
    pub threads: usize,
    /// Output directory when `--out` is not given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,

    /// Largest accepted `|residual| / |lhs|` on the finest grid.
    pub rel_tol: f64,
    pub min_order: f64,
    /// `nx = ny` per refinement level.
    pub levels: Vec<usize>,
    /// Relative change allowed between the two finest levels; defaults per experiment.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub change_tol: Option<f64>,

    pub eps_list: Vec<f64>,
    /// Accepted slope interval; defaults to the predicted exponent plus or minus 0.5.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_range: Option<[f64; 2]>,
    pub min_r2: f64,
    pub gap_margin: f64,
    pub q_margin: f64,
    pub localization_margin: f64,

    pub re_z: f64,
    pub re_z_prime: f64,
    pub im_z: f64,
    pub im_list: Vec<f64>,
    pub ratio_max: f64,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub delta_list: Vec<f64>,
    pub s: f64,
    pub plateau_max: f64,
    pub growth_min: f64,
    /// Also sweep `eps_law_list` and compare `eps * sup_lambda norm`.
    pub eps_law: bool,
    pub eps_law_list: Vec<f64>,
    pub eps_law_factor: f64,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    pub mourre_rel_tol: f64,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,

    /// Power `n` of `(R_Q X)^n` in the Prop-4 norm.
    pub order: u32,
    /// Orders checked by the resolvent expansion.
    pub orders: Vec<u32>,
    pub expansion_tol: f64,

    /// Width of the gaussian used for the mollified `xi'`; off when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub landau_tol: [f64; 2],
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        Self {
            threads: 0,
            out: None,
            rel_tol: 0.02,
            min_order: 1.5,
            levels: vec![21, 31, 41],
            change_tol: None,
            eps_list: magstark::ssf::DEFAULT_EPS_LIST.to_vec(),
            slope_range: None,
            min_r2: 0.9,
            gap_margin: magstark::ssf::DEFAULT_GAP_MARGIN,
            q_margin: magstark::mourre::LEMMA7_Q_MARGIN,
            localization_margin: magstark::spectral::DEFAULT_LOCALIZATION_MARGIN,
            re_z: 2.0,
            re_z_prime: 2.0,
            im_z: 0.5,
            im_list: magstark::traces::DEFAULT_IM_LIST.to_vec(),
            ratio_max: 2.0,
            lambda: None,
            delta_list: (4..=8).map(|k| 0.5f64.powi(k)).collect(),
            s: 0.6,
            plateau_max: 1.15,
            growth_min: 5.0,
            eps_law: false,
            eps_law_list: vec![0.1, 0.2, 0.4],
            eps_law_factor: 3.0,
            window: None,
            mourre_rel_tol: 0.02,
            radii: None,
            order: 2,
            orders: vec![1, 2, 3],
            expansion_tol: 1e-8,
            eta: None,
            landau_tol: [0.05, 0.15],
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` and applies `section.key=value` overrides in order.
    pub fn load(path: &Path, overrides: &[String]) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut table: toml::Table = toml::from_str(&text)?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Ok(toml::Value::Table(table).try_into()?)
    }

    /// The effective configuration as TOML, defaults included.
    pub fn to_toml_string(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Serialize(e.to_string()))
    }

    pub fn grid(&self) -> CliResult<GridSpec> {
        let g = &self.grid;
        make_grid(g.lx, g.ly, g.nx, g.ny).map_err(CliError::invalid("grid"))
    }

    /// Same config on an `n x n` grid.
    pub fn with_resolution(&self, n: usize) -> Self {
        let mut c = self.clone();
        c.grid.nx = n;
        c.grid.ny = n;
        c
    }

    pub fn fields(&self) -> CliResult<FieldParams> {
        FieldParams::new(self.fields.b, self.fields.eps).map_err(CliError::invalid("fields"))
    }

    /// The potential, clamped on `grid` when requested.
    pub fn potential(&self, grid: &GridSpec) -> CliResult<PotentialSpec> {
        let p = &self.potential;
        let spec = match p.family {
            FamilyName::Zero => Ok(PotentialSpec::zero()),
            FamilyName::SeparablePower => PotentialSpec::separable_power(p.amplitude, p.n, p.delta),
            FamilyName::Gaussian => PotentialSpec::gaussian(p.amplitude, p.sigma, p.n, p.delta),
            FamilyName::CompactBump => PotentialSpec::compact_bump(p.amplitude, p.rho, p.n, p.delta),
        }
        .map_err(CliError::invalid("potential"))?;
        if p.clamp && !spec.is_zero() {
            Ok(clamp_for_positivity(&spec, grid, self.fields.eps))
        } else {
            Ok(spec)
        }
    }

    /// `f` as written in the config, ignoring `gap_window`.
    pub fn function(&self) -> CliResult<BumpFunction> {
        let f = &self.function;
        if f.plateau {
            BumpFunction::plateau(f.center, f.halfwidth, f.core)
        } else {
            BumpFunction::new(f.center, f.halfwidth)
        }
        .map_err(CliError::invalid("function"))
    }

    /// `f` rebuilt on `[lo, hi]`, keeping the core fraction of a plateau.
    pub fn function_on(&self, lo: f64, hi: f64) -> CliResult<BumpFunction> {
        let f = &self.function;
        let (c, w) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        if f.plateau {
            BumpFunction::plateau(c, w, w * f.core / f.halfwidth)
        } else {
            BumpFunction::new(c, w)
        }
        .map_err(CliError::invalid("function"))
    }

    pub fn weight(&self) -> CliResult<WeightSpec> {
        WeightSpec::new(self.experiment.s, 0.0, self.potential.delta).map_err(CliError::invalid("experiment"))
    }

    /// Checks everything that does not need a computation.
    pub fn validate(&self) -> CliResult<()> {
        let grid = self.grid()?;
        self.fields()?;
        self.potential(&grid)?;
        self.function()?;
        let e = &self.experiment;
        let bad = |field: &'static str, reason: &str| {
            Err(CliError::Invalid {
                section: "experiment",
                source: magstark::Error::Config {
                    field,
                    reason: reason.to_string(),
                },
            })
        };
        if e.levels.iter().any(|&n| n < magstark::grid::MIN_POINTS) {
            return bad("levels", "every level needs at least 8 points");
        }
        if e.levels.windows(2).any(|w| w[1] <= w[0]) {
            return bad("levels", "must be strictly increasing");
        }
        if !(e.rel_tol > 0.0) {
            return bad("rel_tol", "must be positive");
        }
        if let Some([lo, hi]) = e.slope_range {
            if !(lo < hi) {
                return bad("slope_range", "needs lo < hi");
            }
        }
        if let Some([a, b]) = e.window {
            if !(a < b) {
                return bad("window", "needs a < b");
            }
        }
        Ok(())
    }
}

/// Parses `section.key=value`; the value is read as a TOML literal, falling back to a string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> CliResult<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Override(spec.to_string()))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.len() != 2 || keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Override(spec.to_string()));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let section = table
        .entry(keys[0].to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match section {
        toml::Value::Table(t) => {
            t.insert(keys[1].to_string(), value);
            Ok(())
        }
        _ => Err(CliError::Override(spec.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        let text = c.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), c);
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("[grid]\nnz = 3\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[gird]\nnx = 3\n").is_err());
    }

    #[test]
    fn overrides() {
        let mut t: toml::Table = toml::from_str("[grid]\nnx = 21\n").unwrap();
        apply_override(&mut t, "grid.nx=41").unwrap();
        apply_override(&mut t, "potential.family=zero").unwrap();
        apply_override(&mut t, "experiment.eps_list=[0.2, 0.1]").unwrap();
        let c: ExperimentConfig = toml::Value::Table(t.clone()).try_into().unwrap();
        assert_eq!(c.grid.nx, 41);
        assert_eq!(c.potential.family, FamilyName::Zero);
        assert_eq!(c.experiment.eps_list, vec![0.2, 0.1]);
        assert!(apply_override(&mut t, "nx=3").is_err());
        assert!(apply_override(&mut t, "grid.nx").is_err());
    }

    #[test]
    fn validation_names_the_field() {
        let c = ExperimentConfig::from_toml_str("[grid]\nnx = 4\n").unwrap();
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("[grid]") && msg.contains("`nx`"), "{msg}");
        let c = ExperimentConfig::from_toml_str("[fields]\nb = -1.0\n").unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("`b`"));
    }

    #[test]
    fn gap_function_keeps_core_fraction() {
        let mut c = ExperimentConfig::default();
        c.function.plateau = true;
        let f = c.function_on(1.4, 2.6).unwrap();
        assert_eq!(f.support(), (1.4, 2.6));
        assert!((f.core() - 0.3).abs() < 1e-12);
    }
}
