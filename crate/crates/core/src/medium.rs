//! Intensity-dependent absorption of the cell as seen by the feedback loops.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atom::{
    self, absorption_factor, steady_state, AtomParams, DriveParams, Mode, OpticalConstants,
};
use crate::error::ModelError;

/// Intensity substituted for an exactly dark mode so that its weak-probe
/// absorption stays defined.
pub const PROBE_INTENSITY: f64 = 1e-10;

/// Absorption factors of both modes at one pair of internal intensities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Absorption {
    pub eta: [f64; 2],
    pub gain: bool,
}

/// Anything that maps internal intensities `(I₁ⁱⁿ, I₂ⁱⁿ)` to absorption
/// factors.
pub trait Medium: Sync {
    fn absorption(&self, intensities: [f64; 2]) -> Result<Absorption, ModelError>;
}

/// Conversion from intensity to Rabi frequency, `Ω_j = √(s_j I_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub scale: [f64; 2],
}

impl Default for Normalization {
    fn default() -> Self {
        Self { scale: [1.0, 1.0] }
    }
}

impl Normalization {
    pub fn drive(&self, intensities: [f64; 2]) -> DriveParams {
        let omega = |j: usize| (self.scale[j] * intensities[j].max(PROBE_INTENSITY)).sqrt();
        DriveParams::new(omega(0), omega(1))
    }
}

/// Absorption from the exact stationary density matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactMedium {
    pub atom: AtomParams,
    pub constants: OpticalConstants,
    pub normalization: Normalization,
}

impl ExactMedium {
    pub fn new(atom: AtomParams, constants: OpticalConstants) -> Self {
        Self {
            atom,
            constants,
            normalization: Normalization::default(),
        }
    }
}

impl Medium for ExactMedium {
    fn absorption(&self, intensities: [f64; 2]) -> Result<Absorption, ModelError> {
        let drive = self.normalization.drive(intensities);
        let rho = steady_state(&self.atom, &drive)?;
        let mut out = Absorption { eta: [0.0; 2], gain: false };
        for mode in Mode::BOTH {
            let chi = atom::susceptibility(&rho, &drive, &self.constants, mode)?;
            let a = absorption_factor(chi, &self.constants)?;
            out.eta[mode.index()] = a.eta;
            out.gain |= a.gain;
        }
        Ok(out)
    }
}

/// Absorption from the closed-form two-level approximations, with a purely
/// imaginary susceptibility. The single-photon detuning plays the role of Δ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoLevelMedium {
    pub atom: AtomParams,
    pub constants: OpticalConstants,
    pub normalization: Normalization,
}

impl TwoLevelMedium {
    pub fn new(atom: AtomParams, constants: OpticalConstants) -> Self {
        Self {
            atom,
            constants,
            normalization: Normalization::default(),
        }
    }

    /// Approximate imaginary parts of the two optical coherences.
    pub fn coherences(&self, drive: &DriveParams) -> Result<[f64; 2], ModelError> {
        let a = &self.atom;
        let g21 = a.gamma_2to1();
        let g23 = a.gamma_2to3();
        let d21 = a.coherence_rate(1, 0);
        let im1 = atom::two_level_im_rho12(drive.omega1, drive.omega2, a.delta1(), g21, d21)?;
        let im2 = atom::two_level_im_rho32(drive.omega1, drive.omega2, a.delta1(), g21, g23, d21)?;
        Ok([im1, im2])
    }
}

impl Medium for TwoLevelMedium {
    fn absorption(&self, intensities: [f64; 2]) -> Result<Absorption, ModelError> {
        let drive = self.normalization.drive(intensities);
        let im = self.coherences(&drive)?;
        let mut out = Absorption { eta: [0.0; 2], gain: false };
        for mode in Mode::BOTH {
            let j = mode.index();
            let chi = Complex64::new(0.0, self.constants.coupling(mode) * im[j] / drive.omega(mode));
            let a = absorption_factor(chi, &self.constants)?;
            out.eta[j] = a.eta;
            out.gain |= a.gain;
        }
        Ok(out)
    }
}

/// Intensity-independent absorption; an empty cell when both factors are 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearMedium {
    pub eta: [f64; 2],
}

impl Medium for LinearMedium {
    fn absorption(&self, _intensities: [f64; 2]) -> Result<Absorption, ModelError> {
        Ok(Absorption {
            eta: self.eta,
            gain: self.eta.iter().any(|&e| e > 1.0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_cell_is_transparent() {
        let mut k = OpticalConstants::default();
        k.c1 = 0.0;
        k.c2 = 0.0;
        let m = ExactMedium::new(AtomParams::default(), k);
        let a = m.absorption([0.3, 2.0]).unwrap();
        assert_eq!(a.eta, [1.0, 1.0]);
        assert!(!a.gain);
    }

    #[test]
    fn weak_fields_are_absorbed_strong_fields_transmitted() {
        let m = ExactMedium::new(AtomParams::default(), OpticalConstants::default());
        let weak = m.absorption([0.01, 0.01]).unwrap();
        let strong = m.absorption([1e3, 1e3]).unwrap();
        assert!(weak.eta.iter().all(|&e| e < 0.01), "{weak:?}");
        assert!(strong.eta.iter().all(|&e| e > 0.99), "{strong:?}");
        assert!(!weak.gain && !strong.gain);
    }

    #[test]
    fn dark_mode_uses_probe_intensity() {
        let m = ExactMedium::new(AtomParams::default(), OpticalConstants::default());
        let a = m.absorption([2.0, 0.0]).unwrap();
        assert!(a.eta[1].is_finite());
    }
}
