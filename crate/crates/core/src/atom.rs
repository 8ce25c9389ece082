//! Stationary state of a driven Λ atom and the optical response derived from
//! it.
//!
//! Levels are indexed 0, 1, 2 for |1⟩, |2⟩, |3⟩: two ground states coupled
//! through the excited state |2⟩. All frequencies (detunings, Rabi
//! frequencies, rates) share the unit 10⁸ Hz.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::linalg::solve_refined;

pub type Mat3 = [[Complex64; 3]; 3];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Reduced Planck constant, erg·s.
pub const HBAR_CGS: f64 = 1.054_571_817e-27;
/// Frequency unit shared by every rate in the model, Hz.
pub const FREQUENCY_UNIT: f64 = 1e8;
/// Maximum tolerated entry of `[H, ρ] + iGρ` for an accepted steady state.
pub const STEADY_RESIDUAL_TOL: f64 = 1e-10;
/// Pivot ratio under which the stationary system is treated as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-14;

/// Relaxation and detuning parameters of the Λ system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomParams {
    /// Single-photon detuning of field 1.
    pub eps1: f64,
    /// Detuning of field 2 on the |3⟩ → |2⟩ transition.
    pub eps2: f64,
    /// Directed population transfer rates, `gamma[a][b]` is the rate a → b.
    pub gamma: [[f64; 3]; 3],
    /// Coherence decay rates `Γ`, symmetric with zero diagonal.
    pub dephasing: [[f64; 3]; 3],
    #[serde(default)]
    pub coherence_damping: CoherenceDamping,
}

/// How the coherence decay rates enter the relaxation superoperator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CoherenceDamping {
    /// `Γ_ij` is the whole coherence decay rate. With the reference rates
    /// this yields stationary states with negative eigenvalues.
    #[default]
    Verbatim,
    /// `Γ_ij` is pure dephasing; the coherence also decays at half the total
    /// population decay out of levels `i` and `j`. Keeps ρ positive.
    Lindblad,
}

impl Default for AtomParams {
    fn default() -> Self {
        Self::reference(0.7, -0.7)
    }
}

impl AtomParams {
    /// Reference rates: decay from |2⟩ into both grounds at 3, optical
    /// coherences dephasing at 0.5, no ground-state dephasing.
    pub fn reference(eps1: f64, eps2: f64) -> Self {
        let mut gamma = [[0.0; 3]; 3];
        gamma[1][0] = 3.0;
        gamma[1][2] = 3.0;
        let mut dephasing = [[0.0; 3]; 3];
        dephasing[0][1] = 0.5;
        dephasing[1][0] = 0.5;
        dephasing[1][2] = 0.5;
        dephasing[2][1] = 0.5;
        Self {
            eps1,
            eps2,
            gamma,
            dephasing,
            coherence_damping: CoherenceDamping::Verbatim,
        }
    }

    /// Total population decay rate out of level `a`.
    pub fn decay_out(&self, a: usize) -> f64 {
        self.gamma[a].iter().sum()
    }

    /// Decay rate of the coherence `ρ_ij` used in the relaxation operator.
    pub fn coherence_rate(&self, i: usize, j: usize) -> f64 {
        match self.coherence_damping {
            CoherenceDamping::Lindblad => {
                self.dephasing[i][j] + 0.5 * (self.decay_out(i) + self.decay_out(j))
            }
            CoherenceDamping::Verbatim => self.dephasing[i][j],
        }
    }

    pub fn delta1(&self) -> f64 {
        self.eps1
    }

    /// Two-photon detuning.
    pub fn delta2(&self) -> f64 {
        self.eps2 - self.eps1
    }

    pub fn gamma_2to1(&self) -> f64 {
        self.gamma[1][0]
    }

    pub fn gamma_2to3(&self) -> f64 {
        self.gamma[1][2]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidParams(msg));
        if !self.eps1.is_finite() || !self.eps2.is_finite() {
            return bad("detunings must be finite".into());
        }
        for a in 0..3 {
            if self.gamma[a][a] != 0.0 {
                return bad(format!("gamma[{a}][{a}] must be zero"));
            }
            if self.dephasing[a][a] != 0.0 {
                return bad(format!("dephasing[{a}][{a}] must be zero"));
            }
            for b in 0..3 {
                let (g, d) = (self.gamma[a][b], self.dephasing[a][b]);
                if !(g.is_finite() && g >= 0.0) {
                    return bad(format!("gamma[{a}][{b}] = {g} must be finite and >= 0"));
                }
                if !(d.is_finite() && d >= 0.0) {
                    return bad(format!("dephasing[{a}][{b}] = {d} must be finite and >= 0"));
                }
                if d != self.dephasing[b][a] {
                    return bad(format!("dephasing must be symmetric at ({a},{b})"));
                }
            }
        }
        if self.coherence_damping == CoherenceDamping::Lindblad {
            // Pure dephasing rates are half squared distances between the
            // level shifts of the dephasing noise, so their square roots obey
            // the triangle inequality.
            let r = |a: usize, b: usize| self.dephasing[a][b].sqrt();
            for (a, b, c) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
                if r(a, b) > r(b, c) + r(c, a) + 1e-12 * (1.0 + r(a, b)) {
                    return bad(format!(
                        "sqrt(dephasing[{a}][{b}]) exceeds the sum over the other two pairs; \
                         no pure dephasing process has these rates"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Rabi frequencies of the two fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    pub omega1: f64,
    pub omega2: f64,
}

impl DriveParams {
    pub fn new(omega1: f64, omega2: f64) -> Self {
        Self { omega1, omega2 }
    }

    pub fn omega(&self, mode: Mode) -> f64 {
        match mode {
            Mode::One => self.omega1,
            Mode::Two => self.omega2,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [("omega1", self.omega1), ("omega2", self.omega2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ModelError::InvalidParams(format!(
                    "{name} = {v} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }
}

/// One of the two cavity modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    One,
    Two,
}

impl Mode {
    pub const BOTH: [Mode; 2] = [Mode::One, Mode::Two];

    pub fn index(self) -> usize {
        match self {
            Mode::One => 0,
            Mode::Two => 1,
        }
    }
}

/// Stationary 3x3 density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    pub rho: Mat3,
}

impl DensityMatrix {
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.rho[i][j]
    }

    pub fn trace(&self) -> Complex64 {
        self.rho[0][0] + self.rho[1][1] + self.rho[2][2]
    }

    /// Largest elementwise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((self.rho[i][j] - self.rho[j][i].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = Matrix3::from_fn(|i, j| 0.5 * (self.rho[i][j] + self.rho[j][i].conj()));
        m.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks Hermiticity, unit trace and positivity at the solver
    /// tolerances.
    pub fn check_invariants(&self) -> Result<(), String> {
        let herm = self.hermiticity_error();
        if herm >= 1e-10 {
            return Err(format!("hermiticity error {herm:.3e}"));
        }
        let tr = (self.trace() - 1.0).norm();
        if tr >= 1e-10 {
            return Err(format!("trace error {tr:.3e}"));
        }
        let ev = self.min_eigenvalue();
        if ev <= -1e-8 {
            return Err(format!("negative eigenvalue {ev:.3e}"));
        }
        Ok(())
    }
}

/// Material constants entering the susceptibility and the absorption
/// exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalConstants {
    /// Atomic number density, cm⁻³.
    pub na: f64,
    /// Transition dipole moments, CGSe (statC·cm).
    pub d1: f64,
    pub d2: f64,
    /// Absorption wave number, cm⁻¹.
    pub k: f64,
    /// Cell length, cm.
    pub length: f64,
    /// Whether the cell length multiplies the absorption exponent.
    pub include_length: bool,
    /// Coupling prefactors `N_a |D_j|² / ħ` in units of 10⁸ Hz.
    pub c1: f64,
    pub c2: f64,
}

impl Default for OpticalConstants {
    fn default() -> Self {
        Self::from_material(1e12, 1e-18, 1e-18, 2.0 * PI / 0.5e-4, 5.0, true)
    }
}

impl OpticalConstants {
    /// Derives the coupling prefactors from density and dipole moments
    /// (Gaussian units, so the vacuum permittivity is 1).
    pub fn from_material(na: f64, d1: f64, d2: f64, k: f64, length: f64, include_length: bool) -> Self {
        Self {
            na,
            d1,
            d2,
            k,
            length,
            include_length,
            c1: coupling_from_material(na, d1),
            c2: coupling_from_material(na, d2),
        }
    }

    pub fn coupling(&self, mode: Mode) -> f64 {
        match mode {
            Mode::One => self.c1,
            Mode::Two => self.c2,
        }
    }

    /// Effective path length multiplying `2k Im√(1+4πχ)`.
    pub fn path_length(&self) -> f64 {
        if self.include_length {
            self.length
        } else {
            1.0
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [("na", self.na), ("k", self.k), ("length", self.length)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::InvalidParams(format!("{name} = {v} must be > 0")));
            }
        }
        // C = 0 is allowed: it models an empty cell.
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("d1", self.d1), ("d2", self.d2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ModelError::InvalidParams(format!("{name} = {v} must be >= 0")));
            }
        }
        Ok(())
    }
}

pub fn coupling_from_material(na: f64, dipole: f64) -> f64 {
    na * dipole * dipole / HBAR_CGS / FREQUENCY_UNIT
}

/// Rotating-frame Hamiltonian
/// `Δ₁σ₂₂ + Δ₂σ₃₃ + Ω₁(σ₁₂+σ₂₁) + Ω₂(σ₂₃+σ₃₂)`.
pub fn build_hamiltonian(atom: &AtomParams, drive: &DriveParams) -> Mat3 {
    let mut h = [[ZERO; 3]; 3];
    h[1][1] = atom.delta1().into();
    h[2][2] = atom.delta2().into();
    h[0][1] = drive.omega1.into();
    h[1][0] = drive.omega1.into();
    h[1][2] = drive.omega2.into();
    h[2][1] = drive.omega2.into();
    h
}

/// Relaxation superoperator: off-diagonal elements decay at `Γ_ij`,
/// populations flow along the directed rates `γ`.
pub fn apply_relaxation(rho: &Mat3, atom: &AtomParams) -> Mat3 {
    let mut out = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                out[i][j] = -atom.coherence_rate(i, j) * rho[i][j];
            }
        }
    }
    for j in 0..3 {
        let mut acc = ZERO;
        for k in 0..3 {
            acc += atom.gamma[k][j] * rho[k][k] - atom.gamma[j][k] * rho[j][j];
        }
        out[j][j] = acc;
    }
    out
}

/// `[H, ρ] + iGρ`, the left-hand side of the stationary master equation.
pub fn stationary_operator(h: &Mat3, rho: &Mat3, atom: &AtomParams) -> Mat3 {
    let g = apply_relaxation(rho, atom);
    let mut out = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = I * g[i][j];
            for k in 0..3 {
                acc += h[i][k] * rho[k][j] - rho[i][k] * h[k][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

/// Row-major vectorization of the stationary operator: `M[p][q]` is the
/// coefficient of `ρ_q` in equation `p`, with `p = 3i + j`.
pub fn vectorized_operator(atom: &AtomParams, drive: &DriveParams) -> [[Complex64; 9]; 9] {
    let h = build_hamiltonian(atom, drive);
    let mut m = [[ZERO; 9]; 9];
    for i in 0..3 {
        for j in 0..3 {
            let p = 3 * i + j;
            for k in 0..3 {
                m[p][3 * k + j] += h[i][k];
                m[p][3 * i + k] -= h[k][j];
            }
            if i != j {
                m[p][p] -= I * atom.coherence_rate(i, j);
            } else {
                for k in 0..3 {
                    m[p][3 * k + k] += I * atom.gamma[k][j];
                    m[p][p] -= I * atom.gamma[j][k];
                }
            }
        }
    }
    m
}

/// Solves the stationary master equation with the (3,3) population equation
/// replaced by `Tr ρ = 1`, then re-verifies the full un-replaced system.
pub fn steady_state(atom: &AtomParams, drive: &DriveParams) -> Result<DensityMatrix, ModelError> {
    let mut m = vectorized_operator(atom, drive);
    let scale = m
        .iter()
        .flatten()
        .fold(0.0f64, |acc, z| acc.max(z.norm()))
        .max(1.0);
    m[8] = [ZERO; 9];
    m[8][0] = Complex64::new(1.0, 0.0);
    m[8][4] = Complex64::new(1.0, 0.0);
    m[8][8] = Complex64::new(1.0, 0.0);
    let mut b = [ZERO; 9];
    b[8] = Complex64::new(1.0, 0.0);

    let stats = solve_refined(&m, &mut b);
    if stats.min <= SINGULAR_PIVOT_RATIO * scale {
        return Err(ModelError::SingularSteadyState {
            condition: scale / stats.min,
        });
    }
    let mut rho = [[ZERO; 3]; 3];
    for (p, v) in b.iter().enumerate() {
        rho[p / 3][p % 3] = *v;
    }
    let res = max_abs(&stationary_operator(&build_hamiltonian(atom, drive), &rho, atom));
    if !(res < STEADY_RESIDUAL_TOL) {
        return Err(ModelError::Residual(res));
    }
    Ok(DensityMatrix { rho })
}

pub fn max_abs(m: &Mat3) -> f64 {
    m.iter().flatten().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Coherence driving the polarization of `mode`: ρ₂₁ for field 1 and ρ₂₃
/// for field 2 (excited-state row), which makes Im χ ≤ 0 in the absorbing
/// regime.
pub fn optical_coherence(rho: &DensityMatrix, mode: Mode) -> Complex64 {
    match mode {
        Mode::One => rho.get(1, 0),
        Mode::Two => rho.get(1, 2),
    }
}

/// Linear susceptibility `χ_j = C_j ρ_coh / Ω_j`.
pub fn susceptibility(
    rho: &DensityMatrix,
    drive: &DriveParams,
    constants: &OpticalConstants,
    mode: Mode,
) -> Result<Complex64, ModelError> {
    let omega = drive.omega(mode);
    if omega == 0.0 {
        return Err(ModelError::ZeroDrive(mode.index() + 1));
    }
    Ok(constants.coupling(mode) * optical_coherence(rho, mode) / omega)
}

/// Single-pass intensity transmission of the cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbsorptionFactor {
    pub eta: f64,
    /// Raised when `eta > 1`, i.e. the medium amplifies.
    pub gain: bool,
}

/// `η = exp(2kℓ Im √(1 + 4πχ))` with the principal square root.
pub fn absorption_factor(chi: Complex64, constants: &OpticalConstants) -> Result<AbsorptionFactor, ModelError> {
    let radicand = 1.0 + 4.0 * PI * chi;
    if radicand == ZERO {
        return Err(ModelError::BranchPoint);
    }
    let eta = (2.0 * constants.k * constants.path_length() * radicand.sqrt().im).exp();
    Ok(AbsorptionFactor { eta, gain: eta > 1.0 })
}

fn two_level_denominator(omega1: f64, omega2: f64, delta: f64, gamma21: f64, dephasing21: f64) -> Result<f64, ModelError> {
    let detuned = (omega2 - delta).powi(2) + dephasing21 * dephasing21;
    let a = 4.0 * omega1 * omega1 * dephasing21;
    let b = gamma21 * detuned;
    let den = a - b;
    if den == 0.0 || den.abs() <= 1e-12 * (a.abs() + b.abs()) {
        return Err(ModelError::DegenerateDenominator);
    }
    Ok(den)
}

/// Two-level approximation for the imaginary part of the field-1 coherence,
/// valid for `ε₁ ≈ Ω₂ ≫ Ω₁`, `ε₂ = 0`. `delta` is the single-photon
/// detuning.
pub fn two_level_im_rho12(omega1: f64, omega2: f64, delta: f64, gamma21: f64, dephasing21: f64) -> Result<f64, ModelError> {
    let den = two_level_denominator(omega1, omega2, delta, gamma21, dephasing21)?;
    Ok(omega1 * gamma21 * dephasing21 / den)
}

/// Companion of [`two_level_im_rho12`] for the field-2 coherence, obtained by
/// scaling with the population-balance ratio.
pub fn two_level_im_rho32(
    omega1: f64,
    omega2: f64,
    delta: f64,
    gamma21: f64,
    gamma23: f64,
    dephasing21: f64,
) -> Result<f64, ModelError> {
    if !(omega2 > 0.0 && gamma23 > 0.0) {
        return Err(ModelError::InvalidParams(
            "two-level field-2 coherence needs omega2 > 0 and gamma23 > 0".into(),
        ));
    }
    let den = two_level_denominator(omega1, omega2, delta, gamma21, dephasing21)?;
    Ok(omega1 * omega1 * gamma21 * gamma21 * dephasing21 / (omega2 * gamma23 * den))
}
