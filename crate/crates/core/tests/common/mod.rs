#![allow(dead_code)]

use lambda_ob::{AtomParams, CoherenceDamping, DriveParams};
use rand::Rng;

/// Level shifts of a pure dephasing process; `Γ_ij = ½(d_i − d_j)²`.
pub fn dephasing_from_shifts(d: [f64; 3]) -> [[f64; 3]; 3] {
    let mut g = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                g[i][j] = 0.5 * (d[i] - d[j]).powi(2);
            }
        }
    }
    g
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Random atom with a physical (Lindblad) relaxation and a unique
/// stationary state: the excited level always decays into both grounds.
/// Also returns the dephasing level shifts.
pub fn random_lindblad<R: Rng>(rng: &mut R) -> (AtomParams, DriveParams, [f64; 3]) {
    let mut gamma = [[0.0; 3]; 3];
    gamma[1][0] = rng.gen_range(0.1..5.0);
    gamma[1][2] = rng.gen_range(0.1..5.0);
    for (a, b) in [(0, 1), (0, 2), (2, 0), (2, 1)] {
        if rng.gen_bool(0.4) {
            gamma[a][b] = rng.gen_range(0.0..1.0);
        }
    }
    let d = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
    let atom = AtomParams {
        eps1: rng.gen_range(-5.0..5.0),
        eps2: rng.gen_range(-5.0..5.0),
        gamma,
        dephasing: dephasing_from_shifts(d),
        coherence_damping: CoherenceDamping::Lindblad,
    };
    let drive = DriveParams::new(log_uniform(rng, 0.01, 5.0), log_uniform(rng, 0.01, 5.0));
    (atom, drive, d)
}

/// Random atom whose excited level decays at equal rates into both grounds
/// and where nothing else moves population.
pub fn random_equal_rates<R: Rng>(rng: &mut R, damping: CoherenceDamping) -> (AtomParams, DriveParams) {
    let g = rng.gen_range(0.1..5.0);
    let mut gamma = [[0.0; 3]; 3];
    gamma[1][0] = g;
    gamma[1][2] = g;
    let d = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
    let atom = AtomParams {
        eps1: rng.gen_range(-5.0..5.0),
        eps2: rng.gen_range(-5.0..5.0),
        gamma,
        dephasing: dephasing_from_shifts(d),
        coherence_damping: damping,
    };
    let drive = DriveParams::new(log_uniform(rng, 0.01, 5.0), log_uniform(rng, 0.01, 5.0));
    (atom, drive)
}
