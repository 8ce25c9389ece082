//! Run configuration, read from TOML.
//!
//! Every section and key is optional; missing values take the reference
//! defaults (decay 3 from the excited state into both grounds, optical
//! dephasing 0.5, `R₁ = R₂ = 0.6`, `ε₁ = −ε₂ = 0.7`). Unknown keys are
//! rejected. Frequencies are in units of 10⁸ Hz and intensities in units of
//! Ω², so `Ω_j = √(s_j I_j)` with the per-mode scale `s_j`.

use std::path::{Path, PathBuf};

use lambda_ob::atom::CoherenceDamping;
use lambda_ob::domain::{AxisSpec, GridSpec, RegionThresholds, Spacing};
use lambda_ob::medium::{ExactMedium, Normalization, TwoLevelMedium};
use lambda_ob::sweep::{Direction, SweepSpec, Trajectory};
use lambda_ob::{AtomParams, CavityParams, OpticalConstants, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Worker threads for maps; 0 picks one per core.
    pub threads: usize,
    pub output_dir: PathBuf,
    pub format: Format,
    pub atom: AtomSection,
    pub constants: ConstantsSection,
    pub cavity: CavitySection,
    pub solver: SolverConfig,
    pub grid: GridSection,
    pub sweep: SweepSection,
    pub thresholds: Thresholds,
    pub approx: ApproxSection,
    pub steady: SteadySection,
    pub point: PointSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            threads: 0,
            output_dir: PathBuf::from("out"),
            format: Format::Csv,
            atom: AtomSection::default(),
            constants: ConstantsSection::default(),
            cavity: CavitySection::default(),
            solver: SolverConfig::default(),
            grid: GridSection::default(),
            sweep: SweepSection::default(),
            thresholds: Thresholds::default(),
            approx: ApproxSection::default(),
            steady: SteadySection::default(),
            point: PointSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomSection {
    pub eps1: f64,
    pub eps2: f64,
    pub gamma_1to2: f64,
    pub gamma_1to3: f64,
    pub gamma_2to1: f64,
    pub gamma_2to3: f64,
    pub gamma_3to1: f64,
    pub gamma_3to2: f64,
    #[serde(rename = "Gamma12")]
    pub dephasing12: f64,
    #[serde(rename = "Gamma23")]
    pub dephasing23: f64,
    #[serde(rename = "Gamma13")]
    pub dephasing13: f64,
    pub coherence_damping: CoherenceDamping,
}

impl Default for AtomSection {
    fn default() -> Self {
        Self::from_params(&AtomParams::default())
    }
}

impl AtomSection {
    pub fn from_params(a: &AtomParams) -> Self {
        Self {
            eps1: a.eps1,
            eps2: a.eps2,
            gamma_1to2: a.gamma[0][1],
            gamma_1to3: a.gamma[0][2],
            gamma_2to1: a.gamma[1][0],
            gamma_2to3: a.gamma[1][2],
            gamma_3to1: a.gamma[2][0],
            gamma_3to2: a.gamma[2][1],
            dephasing12: a.dephasing[0][1],
            dephasing23: a.dephasing[1][2],
            dephasing13: a.dephasing[0][2],
            coherence_damping: a.coherence_damping,
        }
    }

    pub fn params(&self) -> AtomParams {
        let mut gamma = [[0.0; 3]; 3];
        gamma[0][1] = self.gamma_1to2;
        gamma[0][2] = self.gamma_1to3;
        gamma[1][0] = self.gamma_2to1;
        gamma[1][2] = self.gamma_2to3;
        gamma[2][0] = self.gamma_3to1;
        gamma[2][1] = self.gamma_3to2;
        let mut dephasing = [[0.0; 3]; 3];
        for (a, b, v) in [(0, 1, self.dephasing12), (1, 2, self.dephasing23), (0, 2, self.dephasing13)] {
            dephasing[a][b] = v;
            dephasing[b][a] = v;
        }
        AtomParams {
            eps1: self.eps1,
            eps2: self.eps2,
            gamma,
            dephasing,
            coherence_damping: self.coherence_damping,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsSection {
    /// Atomic density, cm⁻³.
    pub na: f64,
    /// Dipole moments, CGSe.
    pub d1: f64,
    pub d2: f64,
    /// Wave number, cm⁻¹.
    pub k: f64,
    /// Cell length, cm.
    pub length: f64,
    pub include_length: bool,
    /// Overrides for the coupling prefactors derived from `na`, `d1`, `d2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    pub intensity_scale1: f64,
    pub intensity_scale2: f64,
}

impl Default for ConstantsSection {
    fn default() -> Self {
        let k = OpticalConstants::default();
        Self {
            na: k.na,
            d1: k.d1,
            d2: k.d2,
            k: k.k,
            length: k.length,
            include_length: k.include_length,
            c1: None,
            c2: None,
            intensity_scale1: 1.0,
            intensity_scale2: 1.0,
        }
    }
}

impl ConstantsSection {
    pub fn constants(&self) -> OpticalConstants {
        let mut k = OpticalConstants::from_material(self.na, self.d1, self.d2, self.k, self.length, self.include_length);
        if let Some(c) = self.c1 {
            k.c1 = c;
        }
        if let Some(c) = self.c2 {
            k.c2 = c;
        }
        k
    }

    pub fn normalization(&self) -> Normalization {
        Normalization {
            scale: [self.intensity_scale1, self.intensity_scale2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavitySection {
    pub r1: f64,
    pub r2: f64,
}

impl Default for CavitySection {
    fn default() -> Self {
        Self { r1: 0.6, r2: 0.6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub i1_min: f64,
    pub i1_max: f64,
    pub i1_steps: usize,
    pub i2_min: f64,
    pub i2_max: f64,
    pub i2_steps: usize,
    pub spacing: Spacing,
}

impl Default for GridSection {
    fn default() -> Self {
        Self::from_spec(&GridSpec::default())
    }
}

impl GridSection {
    pub fn from_spec(g: &GridSpec) -> Self {
        Self {
            i1_min: g.i1.min,
            i1_max: g.i1.max,
            i1_steps: g.i1.steps,
            i2_min: g.i2.min,
            i2_max: g.i2.max,
            i2_steps: g.i2.steps,
            spacing: g.spacing,
        }
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            i1: AxisSpec::new(self.i1_min, self.i1_max, self.i1_steps),
            i2: AxisSpec::new(self.i2_min, self.i2_max, self.i2_steps),
            spacing: self.spacing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    #[default]
    Axis,
    Parametric,
}

/// Flat form of [`SweepSpec`]: `axis`, `fixed`, `from`, `to`, `samples`
/// apply to axis sweeps, `points`, `closed`, `samples_per_segment` to
/// parametric paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub kind: SweepKind,
    pub direction: Direction,
    pub spacing: Spacing,
    pub axis: usize,
    pub fixed: f64,
    pub from: f64,
    pub to: f64,
    pub samples: usize,
    pub closed: bool,
    pub samples_per_segment: usize,
    pub points: Vec<[f64; 2]>,
}

impl Default for SweepSection {
    fn default() -> Self {
        let preset = lambda_ob::sweep::preset_parametric();
        let Trajectory::Parametric { points, closed, samples_per_segment } = preset.trajectory else {
            unreachable!()
        };
        Self {
            kind: SweepKind::Axis,
            direction: Direction::Both,
            spacing: Spacing::Log,
            axis: 1,
            fixed: 0.2,
            from: 1.5,
            to: 6.0,
            samples: 200,
            closed,
            samples_per_segment,
            points,
        }
    }
}

impl SweepSection {
    pub fn spec(&self) -> SweepSpec {
        let trajectory = match self.kind {
            SweepKind::Axis => Trajectory::Axis {
                axis: self.axis,
                fixed: self.fixed,
                from: self.from,
                to: self.to,
                samples: self.samples,
            },
            SweepKind::Parametric => Trajectory::Parametric {
                points: self.points.clone(),
                closed: self.closed,
                samples_per_segment: self.samples_per_segment,
            },
        };
        SweepSpec {
            trajectory,
            direction: self.direction,
            spacing: self.spacing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub eta_absorbing: f64,
    pub eta_transparent: f64,
    pub jump_threshold: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        let r = RegionThresholds::default();
        Self {
            eta_absorbing: r.eta_absorbing,
            eta_transparent: r.eta_transparent,
            jump_threshold: 0.5,
        }
    }
}

impl Thresholds {
    pub fn regions(&self) -> RegionThresholds {
        RegionThresholds {
            eta_absorbing: self.eta_absorbing,
            eta_transparent: self.eta_transparent,
        }
    }
}

/// Regime of the two-level comparison. The detunings replace those of
/// `[atom]`; everything else is shared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApproxSection {
    pub eps1: f64,
    pub eps2: f64,
    pub omega1_min: f64,
    pub omega1_max: f64,
    pub omega1_steps: usize,
    pub omega2_min: f64,
    pub omega2_max: f64,
    pub omega2_steps: usize,
    /// Whether to also emit the exact and approximate bistability maps.
    pub maps: bool,
}

impl Default for ApproxSection {
    fn default() -> Self {
        Self {
            eps1: 2.0,
            eps2: 0.0,
            omega1_min: 0.05,
            omega1_max: 0.5,
            omega1_steps: 4,
            omega2_min: 1.0,
            omega2_max: 3.0,
            omega2_steps: 5,
            maps: true,
        }
    }
}

impl ApproxSection {
    /// Linearly spaced values, inclusive of both ends.
    pub fn omegas(&self, k: usize) -> Vec<f64> {
        let (lo, hi, n) = if k == 0 {
            (self.omega1_min, self.omega1_max, self.omega1_steps)
        } else {
            (self.omega2_min, self.omega2_max, self.omega2_steps)
        };
        if n == 1 {
            return vec![lo];
        }
        (0..n)
            .map(|s| if s == n - 1 { hi } else { lo + (hi - lo) * s as f64 / (n - 1) as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteadySection {
    pub omega1: f64,
    pub omega2: f64,
}

impl Default for SteadySection {
    fn default() -> Self {
        Self { omega1: 1.0, omega2: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointSection {
    pub i1: f64,
    pub i2: f64,
}

impl Default for PointSection {
    fn default() -> Self {
        Self { i1: 2.5, i2: 0.05 }
    }
}

impl RunConfig {
    pub fn atom(&self) -> AtomParams {
        self.atom.params()
    }

    pub fn cavity(&self) -> CavityParams {
        CavityParams::new(self.cavity.r1, self.cavity.r2)
    }

    pub fn medium(&self) -> ExactMedium {
        ExactMedium {
            atom: self.atom(),
            constants: self.constants.constants(),
            normalization: self.constants.normalization(),
        }
    }

    /// Exact and two-level media in the comparison regime.
    pub fn approx_media(&self) -> (ExactMedium, TwoLevelMedium) {
        let mut atom = self.atom();
        atom.eps1 = self.approx.eps1;
        atom.eps2 = self.approx.eps2;
        let exact = ExactMedium {
            atom: atom.clone(),
            constants: self.constants.constants(),
            normalization: self.constants.normalization(),
        };
        let approx = TwoLevelMedium {
            atom,
            constants: self.constants.constants(),
            normalization: self.constants.normalization(),
        };
        (exact, approx)
    }

    /// Checks every invariant; the error names the offending key.
    pub fn validate(&self) -> Result<(), CliError> {
        let invalid = |key: &str, msg: String| Err(CliError::Validation(format!("{key}: {msg}")));
        if let Err(e) = self.atom().validate() {
            return invalid("atom", e.to_string());
        }
        if let Err(e) = self.constants.constants().validate() {
            return invalid("constants", e.to_string());
        }
        for (key, s) in [
            ("constants.intensity_scale1", self.constants.intensity_scale1),
            ("constants.intensity_scale2", self.constants.intensity_scale2),
        ] {
            if !(s.is_finite() && s > 0.0) {
                return invalid(key, format!("{s} must be > 0"));
            }
        }
        for (key, r) in [("cavity.r1", self.cavity.r1), ("cavity.r2", self.cavity.r2)] {
            if !(r.is_finite() && (0.0..1.0).contains(&r)) {
                return invalid(key, format!("reflectivity {r} violates 0 <= R < 1"));
            }
        }
        if let Err(e) = self.solver.validate() {
            return invalid("solver", e.to_string());
        }
        if let Err(e) = self.grid.spec().validate() {
            return invalid("grid", e.to_string());
        }
        if let Err(e) = self.sweep.spec().validate() {
            return invalid("sweep", e.to_string());
        }
        if let Err(e) = self.thresholds.regions().validate() {
            return invalid("thresholds", e.to_string());
        }
        let jt = self.thresholds.jump_threshold;
        if !(jt.is_finite() && jt > 0.0) {
            return invalid("thresholds.jump_threshold", format!("{jt} must be > 0"));
        }
        let a = &self.approx;
        for (key, v) in [("approx.eps1", a.eps1), ("approx.eps2", a.eps2)] {
            if !v.is_finite() {
                return invalid(key, "must be finite".into());
            }
        }
        for (key, lo, hi, n) in [
            ("approx.omega1", a.omega1_min, a.omega1_max, a.omega1_steps),
            ("approx.omega2", a.omega2_min, a.omega2_max, a.omega2_steps),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi >= lo && n >= 1) {
                return invalid(key, "range needs 0 < min <= max and steps >= 1".into());
            }
        }
        for (key, v) in [
            ("steady.omega1", self.steady.omega1),
            ("steady.omega2", self.steady.omega2),
            ("point.i1", self.point.i1),
            ("point.i2", self.point.i2),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return invalid(key, format!("{v} must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// The resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

/// Parses and validates a configuration. An empty text gives the defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|s| line_column(text, s.start))
            .unwrap_or((0, 0));
        CliError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse {
        line: 0,
        column: 0,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config(&text)
}

/// One-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_reference_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let atom = cfg.atom();
        assert_eq!(atom, AtomParams::reference(0.7, -0.7));
        assert_eq!(atom.gamma_2to1(), 3.0);
        assert_eq!(atom.dephasing[1][2], 0.5);
        assert_eq!(atom.dephasing[0][2], 0.0);
        assert_eq!(cfg.cavity(), CavityParams::new(0.6, 0.6));
        assert_eq!(cfg.constants.constants(), OpticalConstants::default());
    }

    #[test]
    fn reflectivity_above_one_is_rejected() {
        let err = parse_config("[cavity]\nr1 = 1.2\n").unwrap_err();
        let CliError::Validation(msg) = &err else { panic!("{err:?}") };
        assert!(msg.contains("cavity.r1"), "{msg}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn unknown_key_reports_location() {
        let err = parse_config("threads = 2\n[atom]\neps1 = 0.3\nbogus = 1\n").unwrap_err();
        let CliError::Parse { line, .. } = err else { panic!("{err:?}") };
        assert_eq!(line, 4);
    }

    #[test]
    fn overrides_reach_the_model() {
        let cfg = parse_config("[atom]\ngamma_2to1 = 5\nGamma13 = 0.1\n[constants]\nc1 = 0\n").unwrap();
        let atom = cfg.atom();
        assert_eq!(atom.gamma[1][0], 5.0);
        assert_eq!(atom.dephasing[2][0], 0.1);
        assert_eq!(cfg.medium().constants.c1, 0.0);
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.constants.c2 = Some(1e-6);
        let back = parse_config(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn line_column_counts_from_one() {
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
        assert_eq!(line_column("ab", 0), (1, 1));
    }
}
