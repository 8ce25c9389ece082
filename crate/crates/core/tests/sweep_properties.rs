use lambda_ob::domain::Spacing;
use lambda_ob::feedback::find_all_solutions;
use lambda_ob::sweep::{loop_area, preset_parametric, run_sweep, Direction, Pass, SweepSpec, SweepTrace, Trajectory};
use lambda_ob::{AtomParams, CavityParams, ExactMedium, InputPoint, OpticalConstants, SolverConfig, Stability};

fn medium() -> ExactMedium {
    ExactMedium::new(AtomParams::default(), OpticalConstants::default())
}

fn axis_sweep(fixed: f64, samples: usize) -> SweepSpec {
    SweepSpec {
        trajectory: Trajectory::Axis { axis: 1, fixed, from: 1.5, to: 6.0, samples },
        direction: Direction::Both,
        spacing: Spacing::Log,
    }
}

fn sweep(spec: &SweepSpec, r: f64) -> Vec<SweepTrace> {
    run_sweep(spec, &CavityParams::new(r, r), &medium(), &SolverConfig::default(), 0.5).unwrap()
}

fn jump_x(t: &SweepTrace, output: usize) -> Vec<f64> {
    t.jumps.iter().filter(|j| j.output == output).map(|j| j.x).collect()
}

#[test]
fn open_cavity_has_no_hysteresis() {
    for spec in [axis_sweep(0.2, 150), preset_parametric()] {
        let tr = sweep(&spec, 0.0);
        assert!(tr.iter().all(|t| t.jumps.is_empty()));
        for j in 0..2 {
            assert_eq!(loop_area(&tr[0], &tr[1], j).unwrap(), 0.0);
        }
        for s in &tr[0].samples {
            assert_eq!(s.i_in, s.i0);
        }
    }
}

#[test]
fn every_sample_sits_on_a_stable_root() {
    let m = medium();
    let cav = CavityParams::new(0.6, 0.6);
    let cfg = SolverConfig::default();
    for t in sweep(&axis_sweep(0.2, 120), 0.6) {
        for (k, s) in t.samples.iter().enumerate() {
            assert!(s.converged);
            assert_eq!(s.stability, Some(Stability::Stable));
            assert!(s.residual < cfg.tolerance);
            if k % 8 == 0 {
                let roots = find_all_solutions(&m, &InputPoint { i0: s.i0 }, &cav, &cfg).unwrap();
                let on_root = roots
                    .iter()
                    .any(|r| (0..2).all(|j| ((r.i_in[j] - s.i_in[j]) / r.i_in[j]).abs() < 1e-6));
                assert!(on_root, "sample {k} at {:?}", s.i0);
            }
        }
    }
}

#[test]
fn forward_switches_up_later_than_backward_switches_down() {
    let tr = sweep(&axis_sweep(0.2, 300), 0.6);
    assert_eq!(tr[0].pass, Pass::Forward);
    for j in 0..2 {
        let (up, down) = (jump_x(&tr[0], j), jump_x(&tr[1], j));
        assert_eq!((up.len(), down.len()), (1, 1), "output {j}");
        assert!(up[0] > down[0]);
        let f = &tr[0].jumps.iter().find(|x| x.output == j).unwrap();
        let b = &tr[1].jumps.iter().find(|x| x.output == j).unwrap();
        assert!(f.after > f.before && b.after < b.before);
        assert!(loop_area(&tr[0], &tr[1], j).unwrap() > 0.0);
    }
}

#[test]
fn jump_positions_converge_with_sample_density() {
    let coarse = sweep(&axis_sweep(0.2, 150), 0.6);
    let fine = sweep(&axis_sweep(0.2, 600), 0.6);
    let spacing = 3.0 * (6.0f64 / 1.5).ln() / 149.0;
    for p in 0..2 {
        for j in 0..2 {
            let (a, b) = (jump_x(&coarse[p], j), jump_x(&fine[p], j));
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                assert!((x / y).ln().abs() < spacing, "{x} vs {y}");
            }
        }
    }
}

#[test]
fn loop_area_shrinks_with_reflectivity() {
    let spec = axis_sweep(0.2, 200);
    let area = |r: f64| {
        let tr = sweep(&spec, r);
        loop_area(&tr[0], &tr[1], 0).unwrap()
    };
    let (a6, a3, a0) = (area(0.6), area(0.3), area(0.0));
    assert!(a6 > a3 && a3 >= a0, "{a6} {a3} {a0}");
    assert_eq!(a0, 0.0);
}

#[test]
fn preset_path_switches_both_outputs_both_ways() {
    let tr = sweep(&preset_parametric(), 0.6);
    for t in &tr {
        for j in 0..2 {
            assert!(!jump_x(t, j).is_empty(), "{:?} output {j}", t.pass);
        }
    }
    assert_ne!(tr[0].output(0), tr[1].output(0).into_iter().rev().collect::<Vec<_>>());
}
