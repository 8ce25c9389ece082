use lambda_ob::feedback::{find_all_solutions, iterate_map, IterateOutcome};
use lambda_ob::{
    AtomParams, CavityParams, ExactMedium, InputPoint, LinearMedium, Medium, OpticalConstants,
    SolverConfig, Stability,
};

fn medium() -> ExactMedium {
    ExactMedium::new(AtomParams::default(), OpticalConstants::default())
}

fn residual(m: &ExactMedium, inp: &InputPoint, cav: &CavityParams, i: [f64; 2]) -> [f64; 2] {
    let eta = m.absorption(i).unwrap().eta;
    [0, 1].map(|j| i[j] * (1.0 - cav.r[j] * eta[j]) - inp.i0[j])
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| lo * (hi / lo).powf(k as f64 / n as f64)).collect()
}

/// Without gain every root lies in `I⁰ ≤ Iⁱⁿ ≤ I⁰/(1 − R)`.
fn bracket(inp: &InputPoint, cav: &CavityParams, j: usize, n: usize) -> Vec<f64> {
    let lo = inp.i0[j] * (1.0 - 1e-9);
    let hi = inp.i0[j] / (1.0 - cav.r[j]) * (1.0 + 1e-9);
    log_grid(lo, hi, n)
}

/// Counts roots of a system with both loops closed: cells of a dense log
/// grid where both residual components change sign, grouped into 8-connected
/// clusters. Each cluster is refined by bisection-free Newton with its own
/// finite differences and checked to converge.
fn dense_grid_roots(m: &ExactMedium, inp: &InputPoint, cav: &CavityParams, n: usize) -> Vec<[f64; 2]> {
    let x = bracket(inp, cav, 0, n);
    let y = bracket(inp, cav, 1, n);
    let r: Vec<Vec<[f64; 2]>> = y
        .iter()
        .map(|&b| x.iter().map(|&a| residual(m, inp, cav, [a, b])).collect())
        .collect();
    let changes = |j: usize, k: usize, c: usize| {
        let v = [r[j][k][c], r[j][k + 1][c], r[j + 1][k][c], r[j + 1][k + 1][c]];
        v.iter().any(|&s| s <= 0.0) && v.iter().any(|&s| s >= 0.0)
    };
    let mut marked = vec![vec![false; n]; n];
    for j in 0..n {
        for k in 0..n {
            marked[j][k] = changes(j, k, 0) && changes(j, k, 1);
        }
    }
    let mut seen = vec![vec![false; n]; n];
    let mut roots: Vec<[f64; 2]> = Vec::new();
    for j in 0..n {
        for k in 0..n {
            if !marked[j][k] || seen[j][k] {
                continue;
            }
            let mut stack = vec![(j, k)];
            let mut cluster = Vec::new();
            seen[j][k] = true;
            while let Some((a, b)) = stack.pop() {
                cluster.push((a, b));
                for da in -1i64..=1 {
                    for db in -1i64..=1 {
                        let (p, q) = (a as i64 + da, b as i64 + db);
                        if p >= 0 && q >= 0 && (p as usize) < n && (q as usize) < n {
                            let (p, q) = (p as usize, q as usize);
                            if marked[p][q] && !seen[p][q] {
                                seen[p][q] = true;
                                stack.push((p, q));
                            }
                        }
                    }
                }
            }
            let (sa, sb) = cluster.iter().fold((0, 0), |(s, t), &(a, b)| (s + a, t + b));
            let (ca, cb) = (sa / cluster.len(), sb / cluster.len());
            let start = [(x[cb] * x[cb + 1]).sqrt(), (y[ca] * y[ca + 1]).sqrt()];
            if let Some(root) = plain_newton(m, inp, cav, start) {
                if !roots.iter().any(|q| (0..2).all(|i| ((q[i] - root[i]) / root[i]).abs() < 1e-6)) {
                    roots.push(root);
                }
            }
        }
    }
    roots.sort_by(|a, b| a[0].total_cmp(&b[0]));
    roots
}

fn plain_newton(m: &ExactMedium, inp: &InputPoint, cav: &CavityParams, mut p: [f64; 2]) -> Option<[f64; 2]> {
    for _ in 0..50 {
        let f = residual(m, inp, cav, p);
        if (0..2).all(|j| (f[j] / inp.i0[j]).abs() < 1e-12) {
            return Some(p);
        }
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let h = 1e-7 * p[k];
            let mut q = p;
            q[k] += h;
            let g = residual(m, inp, cav, q);
            for j in 0..2 {
                jac[j][k] = (g[j] - f[j]) / h;
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let d0 = (f[0] * jac[1][1] - f[1] * jac[0][1]) / det;
        let d1 = (jac[0][0] * f[1] - jac[1][0] * f[0]) / det;
        p = [p[0] - d0, p[1] - d1];
    }
    None
}

#[test]
fn root_count_matches_dense_grid_enumeration() {
    let m = medium();
    let cav = CavityParams::new(0.6, 0.6);
    for &(a, b) in &[(2.5, 0.05), (2.3, 0.05), (3.0, 0.2), (1.0, 1.0), (10.0, 0.1)] {
        let inp = InputPoint::new(a, b);
        let oracle = dense_grid_roots(&m, &inp, &cav, 240);
        let found = find_all_solutions(&m, &inp, &cav, &SolverConfig::default()).unwrap();
        assert_eq!(found.len(), oracle.len(), "at ({a}, {b}): {found:?} vs {oracle:?}");
        for (f, o) in found.iter().zip(&oracle) {
            for j in 0..2 {
                assert!(((f.i_in[j] - o[j]) / o[j]).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn open_first_loop_leaves_a_one_dimensional_problem() {
    let m = medium();
    let inp = InputPoint::new(2.5, 0.05);
    let cav = CavityParams::new(0.0, 0.6);
    // With R₁ = 0 the internal I₁ is the input; count sign changes in I₂.
    let y = bracket(&inp, &cav, 1, 20_000);
    let r: Vec<f64> = y.iter().map(|&b| residual(&m, &inp, &cav, [2.5, b])[1]).collect();
    let crossings = r.windows(2).filter(|w| (w[0] <= 0.0) != (w[1] <= 0.0)).count();
    let found = find_all_solutions(&m, &inp, &cav, &SolverConfig::default()).unwrap();
    assert_eq!(found.len(), crossings);
    assert!(found.iter().all(|p| p.i_in[0] == 2.5));
}

#[test]
fn three_roots_at_the_reference_point() {
    let m = medium();
    let inp = InputPoint::new(2.5, 0.05);
    let cav = CavityParams::new(0.6, 0.6);
    let roots = find_all_solutions(&m, &inp, &cav, &SolverConfig::default()).unwrap();
    let kinds: Vec<Stability> = roots.iter().map(|r| r.stability()).collect();
    assert_eq!(kinds, [Stability::Stable, Stability::Unstable, Stability::Stable]);
    let fewer = find_all_solutions(&m, &inp, &CavityParams::new(0.0, 0.6), &SolverConfig::default()).unwrap();
    assert!(fewer.len() < 3);
}

#[test]
fn classification_agrees_with_the_round_trip_dynamics() {
    let m = medium();
    let cav = CavityParams::new(0.6, 0.6);
    let cfg = SolverConfig::default();
    let mut checked = 0;
    for &(a, b) in &[(2.5, 0.05), (2.4, 0.04), (2.7, 0.1), (3.0, 0.2)] {
        let inp = InputPoint::new(a, b);
        for root in find_all_solutions(&m, &inp, &cav, &cfg).unwrap() {
            if root.analysis.marginal {
                continue;
            }
            let returns = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)].iter().all(|&(s, t)| {
                let start = [root.i_in[0] * (1.0 + 1e-3 * s), root.i_in[1] * (1.0 + 1e-3 * t)];
                match iterate_map(&m, &inp, &cav, start, 200_000, 1e-13).unwrap() {
                    IterateOutcome::Converged { point, .. } => {
                        (0..2).all(|j| ((point[j] - root.i_in[j]) / root.i_in[j]).abs() < 1e-6)
                    }
                    _ => false,
                }
            });
            assert_eq!(returns, root.stability() == Stability::Stable, "{root:?}");
            checked += 1;
        }
    }
    assert!(checked >= 8);
}

#[test]
fn zero_feedback_returns_the_input_exactly() {
    let m = medium();
    let cav = CavityParams::new(0.0, 0.0);
    for &(a, b) in &[(2.5, 0.05), (0.01, 900.0), (0.0, 1.0), (0.0, 0.0)] {
        let roots = find_all_solutions(&m, &InputPoint::new(a, b), &cav, &SolverConfig::default()).unwrap();
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].i_in, [a, b]);
        assert_eq!(roots[0].stability(), Stability::Stable);
    }
}

#[test]
fn linear_medium_has_the_geometric_series_root() {
    let m = LinearMedium { eta: [0.8, 0.3] };
    let cav = CavityParams::new(0.9, 0.5);
    let inp = InputPoint::new(1.7, 0.4);
    let roots = find_all_solutions(&m, &inp, &cav, &SolverConfig::default()).unwrap();
    assert_eq!(roots.len(), 1);
    let expect = [1.7 / (1.0 - 0.72), 0.4 / (1.0 - 0.15)];
    for j in 0..2 {
        assert!(((roots[0].i_in[j] - expect[j]) / expect[j]).abs() < 1e-9);
    }
    assert_eq!(roots[0].stability(), Stability::Stable);
}
