//! Operating points of the two-loop ring cavity.
//!
//! The internal intensities obey `I_jⁱⁿ = I_j⁰ + R_j η_j(I₁ⁱⁿ, I₂ⁱⁿ) I_jⁱⁿ`.
//! Roots are searched with damped Newton iterations in log-intensity
//! coordinates from a log-spaced seed grid, deduplicated and classified by
//! the norm of the linearized round-trip matrix.

use serde::{Deserialize, Serialize};

use crate::error::{FeedbackError, ModelError};
use crate::linalg::{solve2, Mat2};
use crate::medium::{Absorption, Medium};

/// Reflectivities of the two coupling mirrors; `T_j = 1 − R_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    pub r: [f64; 2],
}

impl CavityParams {
    pub fn new(r1: f64, r2: f64) -> Self {
        Self { r: [r1, r2] }
    }

    pub fn transmission(&self, j: usize) -> f64 {
        1.0 - self.r[j]
    }

    pub fn validate(&self) -> Result<(), FeedbackError> {
        for (j, &r) in self.r.iter().enumerate() {
            if !(r.is_finite() && (0.0..1.0).contains(&r)) {
                return Err(FeedbackError::InvalidInput(format!(
                    "R{} = {r} must lie in [0, 1)",
                    j + 1
                )));
            }
        }
        Ok(())
    }
}

/// Input intensities `(I₁⁰, I₂⁰)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputPoint {
    pub i0: [f64; 2],
}

impl InputPoint {
    pub fn new(i1: f64, i2: f64) -> Self {
        Self { i0: [i1, i2] }
    }

    pub fn validate(&self) -> Result<(), FeedbackError> {
        for (j, &v) in self.i0.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(FeedbackError::InvalidInput(format!(
                    "I{}_0 = {v} must be finite and >= 0",
                    j + 1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
}

/// Which linearization decides stability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StabilityCriterion {
    /// Jacobian of `I_j ← I_j⁰ / (1 − R_j η_j(I))` in log-intensity
    /// coordinates, prefactor `I_j⁰R_j/(1 − R_jη_j)²`.
    #[default]
    Linearized,
    /// Prefactor `I_j⁰R_j/(1 + R_jη_j)²` in absolute intensities.
    Verbatim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Newton seeds per free axis.
    pub seeds_per_axis: usize,
    pub newton_max_iter: usize,
    /// Step shrink factor applied while the residual fails to decrease.
    pub damping: f64,
    /// Convergence threshold on `max_j |r_j| / I_j⁰`.
    pub tolerance: f64,
    /// Relative per-coordinate distance under which two roots coincide.
    pub dedup_radius: f64,
    /// Relative finite-difference step for `∂η/∂I`.
    pub fd_step: f64,
    /// Lowest seed as a fraction of `I_j⁰`.
    pub seed_floor: f64,
    /// Headroom above the lossless buildup bound `I_j⁰ / (1 − R_j)`.
    pub search_margin: f64,
    pub criterion: StabilityCriterion,
    pub iterate_max_steps: usize,
    pub iterate_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            seeds_per_axis: 16,
            newton_max_iter: 80,
            damping: 0.5,
            tolerance: 1e-8,
            dedup_radius: 1e-4,
            fd_step: 1e-4,
            seed_floor: 1e-3,
            search_margin: 0.05,
            criterion: StabilityCriterion::Linearized,
            iterate_max_steps: 200_000,
            iterate_tolerance: 1e-12,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), FeedbackError> {
        let bad = |m: &str| Err(FeedbackError::InvalidInput(m.to_string()));
        if self.seeds_per_axis < 1 || self.newton_max_iter < 1 || self.iterate_max_steps < 1 {
            return bad("seed count and iteration limits must be positive");
        }
        let positive = [
            self.tolerance,
            self.dedup_radius,
            self.fd_step,
            self.seed_floor,
            self.search_margin,
            self.iterate_tolerance,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("tolerances, radii and steps must be positive");
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return bad("damping must lie in (0, 1)");
        }
        if self.dedup_radius <= self.tolerance {
            return bad("dedup radius must exceed the convergence tolerance");
        }
        Ok(())
    }
}

/// Linear stability data of one operating point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityAnalysis {
    /// `∂η_j/∂I_kⁱⁿ` by central differences.
    pub d_eta: Mat2,
    pub verbatim_matrix: Mat2,
    pub linearized_matrix: Mat2,
    /// Jacobian of the round trip `I ← I⁰ + R η(I) I`.
    pub iteration_jacobian: Mat2,
    pub verbatim_norm: f64,
    pub linearized_norm: f64,
    pub iteration_spectral_radius: f64,
    /// Norm under the configured criterion.
    pub norm: f64,
    pub stability: Stability,
    pub marginal: bool,
}

/// A solution of the closed feedback system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub i_in: [f64; 2],
    pub eta: [f64; 2],
    pub i_out: [f64; 2],
    pub gain: bool,
    /// `max_j |r_j| / I_j⁰` (absolute where `I_j⁰ = 0`).
    pub residual: f64,
    pub analysis: StabilityAnalysis,
}

impl OperatingPoint {
    pub fn stability(&self) -> Stability {
        self.analysis.stability
    }

    pub fn norm(&self) -> f64 {
        self.analysis.norm
    }
}

/// `r_j = I_jⁱⁿ (1 − R_j η_j) − I_j⁰`, the feedback equation multiplied
/// through so that it stays regular at `R_j = 0`.
pub fn residual<M: Medium + ?Sized>(
    medium: &M,
    inp: &InputPoint,
    cav: &CavityParams,
    candidate: [f64; 2],
) -> Result<[f64; 2], ModelError> {
    let a = medium.absorption(candidate)?;
    Ok(residual_from(&a, inp, cav, candidate))
}

fn residual_from(a: &Absorption, inp: &InputPoint, cav: &CavityParams, i: [f64; 2]) -> [f64; 2] {
    [0, 1].map(|j| i[j] * (1.0 - cav.r[j] * a.eta[j]) - inp.i0[j])
}

fn scaled_norm(r: &[f64; 2], inp: &InputPoint) -> f64 {
    (0..2)
        .map(|j| {
            let s = if inp.i0[j] > 0.0 { inp.i0[j] } else { 1.0 };
            (r[j] / s).abs()
        })
        .fold(0.0, f64::max)
}

/// Largest singular value of a real 2x2 matrix, in closed form.
pub fn spectral_norm(m: &Mat2) -> f64 {
    let [[a, b], [c, d]] = *m;
    let p = (a + d).hypot(c - b);
    let q = (a - d).hypot(b + c);
    0.5 * (p + q)
}

/// Spectral radius of a real 2x2 matrix.
pub fn spectral_radius(m: &Mat2) -> f64 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (0.5 * (tr + s)).abs().max((0.5 * (tr - s)).abs())
    } else {
        det.abs().sqrt()
    }
}

/// Band around `‖L‖₂ = 1` inside which a point is flagged marginal.
pub const MARGINAL_BAND: f64 = 1e-6;

/// Stable iff the norm is below one; ties within [`MARGINAL_BAND`] are
/// reported Unstable and marginal.
pub fn classify(norm: f64) -> (Stability, bool) {
    if (norm - 1.0).abs() < MARGINAL_BAND {
        (Stability::Unstable, true)
    } else if norm < 1.0 {
        (Stability::Stable, false)
    } else {
        (Stability::Unstable, false)
    }
}

/// Mode `j` is pinned at `I_jⁱⁿ = I_j⁰` when it has no feedback or no input.
fn pinned(inp: &InputPoint, cav: &CavityParams, j: usize) -> bool {
    cav.r[j] == 0.0 || inp.i0[j] == 0.0
}

/// Finite-difference derivatives `∂η_j/∂I_k` (central) at `i`.
fn absorption_jacobian<M: Medium + ?Sized>(
    medium: &M,
    i: [f64; 2],
    fd_step: f64,
) -> Result<Mat2, ModelError> {
    let mut d = [[0.0; 2]; 2];
    for k in 0..2 {
        let h = (fd_step * i[k]).max(1e-8);
        let (mut up, mut down) = (i, i);
        up[k] += h;
        down[k] = (down[k] - h).max(0.0);
        let span = up[k] - down[k];
        let a = medium.absorption(up)?;
        let b = medium.absorption(down)?;
        for j in 0..2 {
            d[j][k] = (a.eta[j] - b.eta[j]) / span;
        }
    }
    Ok(d)
}

/// Linearized stability matrices at a converged root.
pub fn stability_matrix<M: Medium + ?Sized>(
    medium: &M,
    i_in: [f64; 2],
    eta: [f64; 2],
    inp: &InputPoint,
    cav: &CavityParams,
    cfg: &SolverConfig,
) -> Result<StabilityAnalysis, ModelError> {
    let d = absorption_jacobian(medium, i_in, cfg.fd_step)?;
    let mut verbatim = [[0.0; 2]; 2];
    let mut linearized = [[0.0; 2]; 2];
    let mut jac = [[0.0; 2]; 2];
    for j in 0..2 {
        let r = cav.r[j];
        let pre_plus = inp.i0[j] * r / (1.0 + r * eta[j]).powi(2);
        let pre_minus = inp.i0[j] * r / (1.0 - r * eta[j]).powi(2);
        for k in 0..2 {
            verbatim[j][k] = pre_plus * d[j][k];
            linearized[j][k] = if i_in[j] > 0.0 {
                pre_minus * d[j][k] * i_in[k] / i_in[j]
            } else {
                0.0
            };
            jac[j][k] = r * i_in[j] * d[j][k] + if j == k { r * eta[j] } else { 0.0 };
        }
    }
    let verbatim_norm = spectral_norm(&verbatim);
    let linearized_norm = spectral_norm(&linearized);
    let norm = match cfg.criterion {
        StabilityCriterion::Linearized => linearized_norm,
        StabilityCriterion::Verbatim => verbatim_norm,
    };
    let (stability, marginal) = classify(norm);
    Ok(StabilityAnalysis {
        d_eta: d,
        verbatim_matrix: verbatim,
        linearized_matrix: linearized,
        iteration_jacobian: jac,
        verbatim_norm,
        linearized_norm,
        iteration_spectral_radius: spectral_radius(&jac),
        norm,
        stability,
        marginal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum IterateOutcome {
    Converged { point: [f64; 2], steps: usize },
    Divergent { steps: usize },
    /// Bounded but not settled within the step budget.
    Cycling { last: [f64; 2], steps: usize },
}

/// Iterates the physical round trip `I_j ← I_j⁰ + R_j η_j(I) I_j` until the
/// relative change between successive iterates drops below `tol`.
pub fn iterate_map<M: Medium + ?Sized>(
    medium: &M,
    inp: &InputPoint,
    cav: &CavityParams,
    start: [f64; 2],
    max_steps: usize,
    tol: f64,
) -> Result<IterateOutcome, ModelError> {
    let mut cur = start;
    for step in 0..max_steps {
        let a = medium.absorption(cur)?;
        let next = [0, 1].map(|j| inp.i0[j] + cav.r[j] * a.eta[j] * cur[j]);
        if next.iter().any(|v| !v.is_finite() || *v > 1e15) {
            return Ok(IterateOutcome::Divergent { steps: step + 1 });
        }
        let change = (0..2)
            .map(|j| {
                let s = next[j].abs().max(cur[j].abs());
                if s == 0.0 {
                    0.0
                } else {
                    (next[j] - cur[j]).abs() / s
                }
            })
            .fold(0.0, f64::max);
        if change < tol {
            return Ok(IterateOutcome::Converged { point: next, steps: step });
        }
        cur = next;
    }
    Ok(IterateOutcome::Cycling { last: cur, steps: max_steps })
}

/// Root-search context for one input point.
struct Search<'a, M: Medium + ?Sized> {
    medium: &'a M,
    inp: &'a InputPoint,
    cav: &'a CavityParams,
    cfg: &'a SolverConfig,
    free: [bool; 2],
}

struct Eval {
    i: [f64; 2],
    absorption: Absorption,
    norm: f64,
    scaled: [f64; 2],
}

enum NewtonOutcome {
    Converged(Eval),
    /// Heading into an already known root.
    Duplicate,
    Failed,
    ModelError,
}

const MAX_BACKTRACKS: usize = 30;
/// Consecutive accepted steps with less than 10% progress before a seed is
/// abandoned.
const STALL_LIMIT: usize = 8;

impl<'a, M: Medium + ?Sized> Search<'a, M> {
    fn new(medium: &'a M, inp: &'a InputPoint, cav: &'a CavityParams, cfg: &'a SolverConfig) -> Self {
        let free = [!pinned(inp, cav, 0), !pinned(inp, cav, 1)];
        Self {
            medium,
            inp,
            cav,
            cfg,
            free,
        }
    }

    fn eval(&self, i: [f64; 2]) -> Result<Eval, ModelError> {
        let absorption = self.medium.absorption(i)?;
        let r = residual_from(&absorption, self.inp, self.cav, i);
        let scaled = [0, 1].map(|j| if self.free[j] { r[j] / self.inp.i0[j] } else { 0.0 });
        let norm = scaled[0].abs().max(scaled[1].abs());
        Ok(Eval {
            i,
            absorption,
            norm,
            scaled,
        })
    }

    /// Damped Newton in `u = ln I` over the free coordinates. Stops early
    /// once the iterate sits on one of `known` with a small residual, or when
    /// the residual stagnates.
    fn newton(&self, start: [f64; 2], known: &[[f64; 2]]) -> NewtonOutcome {
        let mut cur = match self.eval(start) {
            Ok(e) => e,
            Err(_) => return NewtonOutcome::ModelError,
        };
        let mut polish = 0;
        let mut stalled = 0;
        for _ in 0..self.cfg.newton_max_iter {
            if cur.norm < self.cfg.tolerance {
                polish += 1;
                if polish > 2 {
                    break;
                }
            } else if cur.norm < 1e-3 && known.iter().any(|k| self.near(*k, cur.i)) {
                return NewtonOutcome::Duplicate;
            }
            let Some(step) = self.newton_step(&cur) else {
                break;
            };
            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_BACKTRACKS {
                let trial = [0, 1].map(|j| cur.i[j] * (lambda * step[j]).exp());
                if let Ok(e) = self.eval(trial) {
                    if e.norm < cur.norm {
                        accepted = Some(e);
                        break;
                    }
                }
                if polish > 0 {
                    break;
                }
                lambda *= self.cfg.damping;
            }
            match accepted {
                Some(e) => {
                    stalled = if e.norm > 0.9 * cur.norm { stalled + 1 } else { 0 };
                    cur = e;
                    if stalled >= STALL_LIMIT && cur.norm >= self.cfg.tolerance {
                        break;
                    }
                }
                None => break,
            }
        }
        if cur.norm < self.cfg.tolerance {
            NewtonOutcome::Converged(cur)
        } else {
            NewtonOutcome::Failed
        }
    }

    /// Newton direction in log coordinates, clipped to at most 2 e-folds.
    fn newton_step(&self, cur: &Eval) -> Option<[f64; 2]> {
        let h = self.cfg.fd_step;
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            if !self.free[k] {
                continue;
            }
            let mut probe = cur.i;
            probe[k] *= h.exp();
            let a = self.medium.absorption(probe).ok()?;
            for j in 0..2 {
                if !self.free[j] {
                    continue;
                }
                let deta = (a.eta[j] - cur.absorption.eta[j]) / h;
                let diag = if j == k {
                    cur.i[j] * (1.0 - self.cav.r[j] * cur.absorption.eta[j])
                } else {
                    0.0
                };
                jac[j][k] = (diag - self.cav.r[j] * cur.i[j] * deta) / self.inp.i0[j];
            }
        }
        let mut step = match self.free {
            [true, true] => solve2(&jac, [-cur.scaled[0], -cur.scaled[1]])?,
            [true, false] => [-cur.scaled[0] / nonzero(jac[0][0])?, 0.0],
            [false, true] => [0.0, -cur.scaled[1] / nonzero(jac[1][1])?],
            [false, false] => return None,
        };
        let big = step[0].abs().max(step[1].abs());
        if !big.is_finite() {
            return None;
        }
        if big > 2.0 {
            step = step.map(|s| s * 2.0 / big);
        }
        Some(step)
    }

    fn seeds(&self) -> Vec<[f64; 2]> {
        let n = self.cfg.seeds_per_axis;
        let gain = self
            .medium
            .absorption(self.inp.i0.map(|v| v.max(1e-300)))
            .map(|a| a.gain)
            .unwrap_or(false);
        let axis = |j: usize| -> Vec<f64> {
            let i0 = self.inp.i0[j];
            if !self.free[j] {
                return vec![i0];
            }
            let lo = i0 * self.cfg.seed_floor;
            let mut hi = i0 / self.cav.transmission(j) * (1.0 + self.cfg.search_margin);
            if gain {
                hi *= 10.0;
            }
            if n == 1 {
                return vec![(lo * hi).sqrt()];
            }
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|s| (a + (b - a) * s as f64 / (n - 1) as f64).exp()).collect()
        };
        let (xs, ys) = (axis(0), axis(1));
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for &y in &ys {
            for &x in &xs {
                out.push([x, y]);
            }
        }
        out
    }

    fn same_root(&self, a: [f64; 2], b: [f64; 2]) -> bool {
        (0..2).all(|j| (a[j] - b[j]).abs() <= self.cfg.dedup_radius * a[j].abs().max(b[j].abs()))
    }

    /// Within ten dedup radii of a known root.
    fn near(&self, root: [f64; 2], i: [f64; 2]) -> bool {
        (0..2).all(|j| (root[j] - i[j]).abs() <= 10.0 * self.cfg.dedup_radius * root[j].abs())
    }

    fn operating_point(&self, e: &Eval) -> Result<OperatingPoint, ModelError> {
        let r = residual(self.medium, self.inp, self.cav, e.i)?;
        let analysis = stability_matrix(self.medium, e.i, e.absorption.eta, self.inp, self.cav, self.cfg)?;
        Ok(OperatingPoint {
            i_in: e.i,
            eta: e.absorption.eta,
            i_out: [0, 1].map(|j| e.absorption.eta[j] * e.i[j]),
            gain: e.absorption.gain,
            residual: scaled_norm(&r, self.inp),
            analysis,
        })
    }
}

fn nonzero(v: f64) -> Option<f64> {
    (v != 0.0 && v.is_finite()).then_some(v)
}

/// Finds every operating point reachable from the default seed grid.
pub fn find_all_solutions<M: Medium + ?Sized>(
    medium: &M,
    inp: &InputPoint,
    cav: &CavityParams,
    cfg: &SolverConfig,
) -> Result<Vec<OperatingPoint>, FeedbackError> {
    find_all_solutions_seeded(medium, inp, cav, cfg, &[])
}

/// As [`find_all_solutions`], with additional starting points tried before
/// the seed grid (warm starts from a neighbouring input point).
pub fn find_all_solutions_seeded<M: Medium + ?Sized>(
    medium: &M,
    inp: &InputPoint,
    cav: &CavityParams,
    cfg: &SolverConfig,
    extra_seeds: &[[f64; 2]],
) -> Result<Vec<OperatingPoint>, FeedbackError> {
    inp.validate()?;
    cav.validate()?;
    cfg.validate()?;
    let search = Search::new(medium, inp, cav, cfg);

    if search.free == [false, false] {
        let e = search.eval(inp.i0)?;
        return Ok(vec![search.operating_point(&e)?]);
    }

    let mut seeds: Vec<[f64; 2]> = extra_seeds
        .iter()
        .filter(|s| s.iter().all(|v| v.is_finite() && *v > 0.0))
        .map(|s| [0, 1].map(|j| if search.free[j] { s[j] } else { inp.i0[j] }))
        .collect();
    seeds.extend(search.seeds());

    let mut roots: Vec<Eval> = Vec::new();
    let (mut failed, mut model_errors) = (0, 0);
    let mut known: Vec<[f64; 2]> = Vec::new();
    for seed in seeds {
        match search.newton(seed, &known) {
            NewtonOutcome::Duplicate => {}
            NewtonOutcome::Converged(e) => {
                known.push(e.i);
                if let Some(existing) = roots.iter_mut().find(|r| search.same_root(r.i, e.i)) {
                    if e.norm < existing.norm {
                        *existing = e;
                    }
                } else {
                    roots.push(e);
                }
            }
            NewtonOutcome::Failed => failed += 1,
            NewtonOutcome::ModelError => model_errors += 1,
        }
    }
    if roots.is_empty() {
        return Err(FeedbackError::NoSolution {
            failed_seeds: failed,
            model_errors,
        });
    }
    roots.sort_by(|a, b| a.i[0].total_cmp(&b.i[0]).then(a.i[1].total_cmp(&b.i[1])));
    let mut out = Vec::with_capacity(roots.len());
    for e in &roots {
        out.push(search.operating_point(e)?);
    }
    Ok(out)
}

/// Refines an approximate root with local Newton steps; `None` when Newton
/// does not converge.
pub fn polish_root<M: Medium + ?Sized>(
    medium: &M,
    inp: &InputPoint,
    cav: &CavityParams,
    cfg: &SolverConfig,
    guess: [f64; 2],
) -> Result<Option<OperatingPoint>, FeedbackError> {
    let search = Search::new(medium, inp, cav, cfg);
    let start = [0, 1].map(|j| if search.free[j] { guess[j] } else { inp.i0[j] });
    if search.free == [false, false] {
        let e = search.eval(start)?;
        return Ok(Some(search.operating_point(&e)?));
    }
    match search.newton(start, &[]) {
        NewtonOutcome::Converged(e) => Ok(Some(search.operating_point(&e)?)),
        _ => Ok(None),
    }
}

/// Lets the round trip settle from `start` and returns the operating point
/// it reaches, polished by Newton. `None` if the iteration does not settle.
pub fn settle<M: Medium + ?Sized>(
    medium: &M,
    inp: &InputPoint,
    cav: &CavityParams,
    cfg: &SolverConfig,
    start: [f64; 2],
) -> Result<Option<OperatingPoint>, FeedbackError> {
    let outcome = iterate_map(medium, inp, cav, start, cfg.iterate_max_steps, cfg.iterate_tolerance)?;
    let IterateOutcome::Converged { point, .. } = outcome else {
        return Ok(None);
    };
    let Some(op) = polish_root(medium, inp, cav, cfg, point)? else {
        return Ok(None);
    };
    let close = (0..2).all(|j| {
        (op.i_in[j] - point[j]).abs() <= cfg.dedup_radius * op.i_in[j].abs().max(point[j].abs())
    });
    Ok(close.then_some(op))
}
