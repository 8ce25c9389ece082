//! Quasi-static sweeps of the input intensities. Each sample starts the
//! round-trip iteration from the operating point of the previous one, so a
//! sweep follows whichever stable branch the cavity actually sits on.

use serde::{Deserialize, Serialize};

use crate::domain::Spacing;
use crate::error::SweepError;
use crate::feedback::{settle, CavityParams, InputPoint, OperatingPoint, SolverConfig, Stability};
use crate::medium::{Medium, PROBE_INTENSITY};

/// Outputs below this fraction of the corresponding input intensity are
/// treated as dark by [`detect_jumps`].
pub const JUMP_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pass {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trajectory {
    /// One input held fixed while the other runs over the range spanned by
    /// `from` and `to`.
    Axis {
        /// 1 sweeps `I₁⁰`, 2 sweeps `I₂⁰`.
        axis: usize,
        fixed: f64,
        from: f64,
        to: f64,
        samples: usize,
    },
    /// Piecewise-linear path through control points in the `(I₁⁰, I₂⁰)`
    /// plane.
    Parametric {
        points: Vec<[f64; 2]>,
        closed: bool,
        samples_per_segment: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub trajectory: Trajectory,
    #[serde(default)]
    pub direction: Direction,
    /// Interpolation between samples; log spacing interpolates `ln I`.
    #[serde(default = "linear")]
    pub spacing: Spacing,
}

fn linear() -> Spacing {
    Spacing::Linear
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: &str| Err(SweepError::InvalidSpec(m.into()));
        let ok_value = |v: f64| {
            v.is_finite() && v >= 0.0 && (self.spacing == Spacing::Linear || v > 0.0)
        };
        match &self.trajectory {
            Trajectory::Axis { axis, fixed, from, to, samples } => {
                if *axis != 1 && *axis != 2 {
                    return bad("axis must be 1 or 2");
                }
                if !ok_value(*fixed) || !ok_value(*from) || !ok_value(*to) {
                    return bad("intensities must be finite and >= 0 (> 0 on a log sweep)");
                }
                if from == to {
                    return bad("sweep range is empty");
                }
                if *samples < 2 {
                    return bad("need at least 2 samples");
                }
            }
            Trajectory::Parametric { points, closed, samples_per_segment } => {
                if points.len() < 2 {
                    return bad("need at least 2 control points");
                }
                if points.iter().flatten().any(|&v| !ok_value(v)) {
                    return bad("control points must be finite and >= 0 (> 0 on a log path)");
                }
                if *closed && points.len() < 3 {
                    return bad("a closed path needs at least 3 control points");
                }
                if *samples_per_segment < 2 {
                    return bad("need at least 2 samples per segment");
                }
            }
        }
        Ok(())
    }

    /// Sample points of the forward pass with their abscissae: the swept
    /// intensity for an axis sweep, the path fraction in `[0, 1]` otherwise.
    pub fn samples(&self) -> Vec<([f64; 2], f64)> {
        let lerp = |a: f64, b: f64, f: f64| match self.spacing {
            Spacing::Linear => a + (b - a) * f,
            Spacing::Log if f == 1.0 => b,
            Spacing::Log => (a.ln() + (b / a).ln() * f).exp(),
        };
        match &self.trajectory {
            Trajectory::Axis { axis, fixed, from, to, samples } => {
                let (lo, hi) = if from < to { (*from, *to) } else { (*to, *from) };
                (0..*samples)
                    .map(|k| {
                        let v = lerp(lo, hi, k as f64 / (*samples - 1) as f64);
                        let p = if *axis == 1 { [v, *fixed] } else { [*fixed, v] };
                        (p, v)
                    })
                    .collect()
            }
            Trajectory::Parametric { points, closed, samples_per_segment } => {
                let mut ctrl = points.clone();
                if *closed {
                    ctrl.push(points[0]);
                }
                let n = *samples_per_segment;
                let mut out = Vec::new();
                for w in ctrl.windows(2) {
                    for s in 0..n {
                        let f = s as f64 / n as f64;
                        out.push([lerp(w[0][0], w[1][0], f), lerp(w[0][1], w[1][1], f)]);
                    }
                }
                out.push(ctrl[ctrl.len() - 1]);
                let last = (out.len() - 1) as f64;
                out.into_iter().enumerate().map(|(k, p)| (p, k as f64 / last)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSample {
    pub t: f64,
    /// Position along the trajectory shared by both passes.
    pub x: f64,
    pub i0: [f64; 2],
    pub i_in: [f64; 2],
    pub eta: [f64; 2],
    pub i_out: [f64; 2],
    pub converged: bool,
    pub stability: Option<Stability>,
    /// Scaled residual of the feedback system at the sample.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Jump {
    /// Midpoint of the two samples' `t`.
    pub t: f64,
    /// Midpoint of the two samples' abscissae.
    pub x: f64,
    /// Index of the first sample after the jump.
    pub sample: usize,
    /// 0 for `I₁ᵒᵘᵗ`, 1 for `I₂ᵒᵘᵗ`.
    pub output: usize,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTrace {
    pub pass: Pass,
    pub samples: Vec<SweepSample>,
    pub jumps: Vec<Jump>,
}

impl SweepTrace {
    pub fn output(&self, j: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.i_out[j]).collect()
    }
}

/// Runs the requested passes. The forward pass follows the sample order of
/// [`SweepSpec::samples`] (increasing intensity on an axis sweep) and the
/// backward pass retraces the same points in reverse. `Up` and `Down` run
/// one of them, `Both` runs forward then backward.
pub fn run_sweep<M: Medium + ?Sized>(
    spec: &SweepSpec,
    cav: &CavityParams,
    medium: &M,
    cfg: &SolverConfig,
    jump_threshold: f64,
) -> Result<Vec<SweepTrace>, SweepError> {
    spec.validate()?;
    cav.validate().map_err(|e| SweepError::InvalidSpec(e.to_string()))?;
    cfg.validate().map_err(|e| SweepError::InvalidSpec(e.to_string()))?;
    if !(jump_threshold.is_finite() && jump_threshold > 0.0) {
        return Err(SweepError::InvalidSpec("jump threshold must be > 0".into()));
    }
    let points = spec.samples();
    let passes: Vec<Pass> = match spec.direction {
        Direction::Up => vec![Pass::Forward],
        Direction::Down => vec![Pass::Backward],
        Direction::Both => vec![Pass::Forward, Pass::Backward],
    };
    Ok(passes
        .into_iter()
        .map(|pass| {
            let ordered: Vec<_> = match pass {
                Pass::Forward => points.clone(),
                Pass::Backward => points.iter().rev().copied().collect(),
            };
            let samples = follow(&ordered, cav, medium, cfg);
            let mut trace = SweepTrace { pass, samples, jumps: Vec::new() };
            trace.jumps = detect_jumps(&trace, jump_threshold);
            trace
        })
        .collect())
}

fn follow<M: Medium + ?Sized>(
    points: &[([f64; 2], f64)],
    cav: &CavityParams,
    medium: &M,
    cfg: &SolverConfig,
) -> Vec<SweepSample> {
    let cold_eta = medium
        .absorption([PROBE_INTENSITY; 2])
        .map(|a| a.eta)
        .unwrap_or([0.0; 2]);
    let last = (points.len() - 1).max(1) as f64;
    let mut prev: Option<[f64; 2]> = None;
    let mut out = Vec::with_capacity(points.len());
    for (k, &(i0, x)) in points.iter().enumerate() {
        let inp = InputPoint { i0 };
        let start = prev.unwrap_or_else(|| {
            [0, 1].map(|j| (i0[j] / (1.0 - cav.r[j] * cold_eta[j])).max(PROBE_INTENSITY))
        });
        let t = k as f64 / last;
        let op = settle(medium, &inp, cav, cfg, start).ok().flatten();
        prev = op.as_ref().map(|o| o.i_in);
        out.push(sample(t, x, i0, op.as_ref()));
    }
    out
}

fn sample(t: f64, x: f64, i0: [f64; 2], op: Option<&OperatingPoint>) -> SweepSample {
    match op {
        Some(o) => SweepSample {
            t,
            x,
            i0,
            i_in: o.i_in,
            eta: o.eta,
            i_out: o.i_out,
            converged: true,
            stability: Some(o.stability()),
            residual: o.residual,
        },
        None => SweepSample {
            t,
            x,
            i0,
            i_in: [f64::NAN; 2],
            eta: [f64::NAN; 2],
            i_out: [f64::NAN; 2],
            converged: false,
            stability: None,
            residual: f64::NAN,
        },
    }
}

/// Consecutive converged samples whose output changes by more than
/// `threshold` relative to the smaller of the two values. Values below
/// [`JUMP_FLOOR`] times the input intensity of that mode are raised to that
/// floor, so switching between two dark levels is not counted. A run of
/// adjacent steps in the same direction is one jump, from the value before
/// the run to the value after it, located at its largest relative step.
pub fn detect_jumps(trace: &SweepTrace, threshold: f64) -> Vec<Jump> {
    let s = &trace.samples;
    let mut out = Vec::new();
    for j in 0..2 {
        // (first step, last step, largest step, its relative size)
        let mut run: Option<(usize, usize, usize, f64)> = None;
        let flush = |run: &mut Option<(usize, usize, usize, f64)>, out: &mut Vec<Jump>| {
            if let Some((first, last, peak, _)) = run.take() {
                let (a, b) = (&s[peak - 1], &s[peak]);
                out.push(Jump {
                    t: 0.5 * (a.t + b.t),
                    x: 0.5 * (a.x + b.x),
                    sample: peak,
                    output: j,
                    before: s[first - 1].i_out[j],
                    after: s[last].i_out[j],
                });
            }
        };
        for k in 1..s.len() {
            let (a, b) = (&s[k - 1], &s[k]);
            let step = if a.converged && b.converged {
                let (u, v) = (a.i_out[j], b.i_out[j]);
                let floor = JUMP_FLOOR * a.i0[j].abs().max(b.i0[j].abs());
                let scale = u.abs().min(v.abs()).max(floor);
                let rel = if scale > 0.0 { (v - u).abs() / scale } else { 0.0 };
                (rel > threshold).then_some((rel, v > u))
            } else {
                None
            };
            match (step, run) {
                (Some((rel, up)), Some((first, last, peak, best)))
                    if last == k - 1 && (s[last].i_out[j] > s[last - 1].i_out[j]) == up =>
                {
                    run = Some(if rel > best { (first, k, k, rel) } else { (first, k, peak, best) });
                }
                (Some((rel, _)), _) => {
                    flush(&mut run, &mut out);
                    run = Some((k, k, k, rel));
                }
                (None, _) => flush(&mut run, &mut out),
            }
        }
        flush(&mut run, &mut out);
    }
    out.sort_by(|a, b| a.sample.cmp(&b.sample).then(a.output.cmp(&b.output)));
    out
}

/// Trapezoidal area between the forward and backward curves of output `j`
/// against the shared abscissa. Intervals touching an unconverged sample are
/// skipped.
pub fn loop_area(forward: &SweepTrace, backward: &SweepTrace, j: usize) -> Result<f64, SweepError> {
    let sorted = |t: &SweepTrace| {
        let mut v: Vec<(f64, f64)> = t.samples.iter().map(|s| (s.x, s.i_out[j])).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let (f, b) = (sorted(forward), sorted(backward));
    if f.len() != b.len() || f.iter().zip(&b).any(|(p, q)| p.0 != q.0) {
        return Err(SweepError::AbscissaMismatch);
    }
    let mut area = 0.0;
    for k in 1..f.len() {
        let d0 = (f[k - 1].1 - b[k - 1].1).abs();
        let d1 = (f[k].1 - b[k].1).abs();
        if d0.is_finite() && d1.is_finite() {
            area += 0.5 * (d0 + d1) * (f[k].0 - f[k - 1].0).abs();
        }
    }
    Ok(area)
}

/// Preset parametric path for the two-mode trajectory: it enters the
/// bistability band of the reference regime from the side where
/// `I₂⁰ ≫ I₁⁰` and leaves it where `I₁⁰ ≫ I₂⁰`.
pub fn preset_parametric() -> SweepSpec {
    SweepSpec {
        trajectory: Trajectory::Parametric {
            points: vec![[0.3, 1.0], [2.5, 0.25], [6.0, 0.15], [12.0, 0.05]],
            closed: false,
            samples_per_segment: 60,
        },
        direction: Direction::Both,
        spacing: Spacing::Log,
    }
}
