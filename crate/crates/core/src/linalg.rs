//! Small dense kernels used on hot paths. Sizes are fixed at compile time so
//! everything stays on the stack.

use num_complex::Complex64;

/// Pivot magnitudes seen during elimination.
#[derive(Debug, Clone, Copy)]
pub struct PivotStats {
    pub min: f64,
    pub max: f64,
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting followed
/// by one step of iterative refinement reusing the factors. On return `b`
/// holds the solution.
pub fn solve_refined<const N: usize>(a: &[[Complex64; N]; N], b: &mut [Complex64; N]) -> PivotStats {
    let mut lu = *a;
    let (stats, perm) = factor(&mut lu);
    if stats.min == 0.0 {
        return stats;
    }
    let rhs = *b;
    substitute(&lu, &perm, b);
    let mut r = rhs;
    for (p, row) in a.iter().enumerate() {
        for (v, x) in row.iter().zip(b.iter()) {
            r[p] -= v * x;
        }
    }
    substitute(&lu, &perm, &mut r);
    for (x, d) in b.iter_mut().zip(r) {
        *x += d;
    }
    stats
}

/// LU factorization in place: multipliers below the diagonal, `U` on and
/// above it. `perm[k]` is the row swapped into position `k`.
fn factor<const N: usize>(a: &mut [[Complex64; N]; N]) -> (PivotStats, [usize; N]) {
    let mut stats = PivotStats {
        min: f64::INFINITY,
        max: 0.0,
    };
    let mut perm = [0; N];
    for col in 0..N {
        let mut piv = col;
        let mut best = a[col][col].l1_norm();
        for row in col + 1..N {
            let m = a[row][col].l1_norm();
            if m > best {
                best = m;
                piv = row;
            }
        }
        perm[col] = piv;
        let best = a[piv][col].norm();
        stats.min = stats.min.min(best);
        stats.max = stats.max.max(best);
        if best == 0.0 {
            continue;
        }
        a.swap(piv, col);
        let inv = a[col][col].inv();
        for row in col + 1..N {
            let f = a[row][col] * inv;
            a[row][col] = f;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in col + 1..N {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
        }
    }
    (stats, perm)
}

fn substitute<const N: usize>(lu: &[[Complex64; N]; N], perm: &[usize; N], b: &mut [Complex64; N]) {
    for (col, &p) in perm.iter().enumerate() {
        b.swap(p, col);
    }
    for col in 0..N {
        let v = b[col];
        for row in col + 1..N {
            b[row] -= lu[row][col] * v;
        }
    }
    for row in (0..N).rev() {
        let mut acc = b[row];
        for k in row + 1..N {
            acc -= lu[row][k] * b[k];
        }
        b[row] = acc / lu[row][row];
    }
}

/// Real 2x2 matrix, row major.
pub type Mat2 = [[f64; 2]; 2];

/// Solves a 2x2 real system; `None` when the determinant vanishes relative
/// to the entries.
pub fn solve2(m: &Mat2, rhs: [f64; 2]) -> Option<[f64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if !det.is_finite() || det.abs() <= 1e-300 || det.abs() < 1e-15 * scale * scale {
        return None;
    }
    Some([
        (rhs[0] * m[1][1] - rhs[1] * m[0][1]) / det,
        (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_permuted_system() {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let a = [
            [c(0.0, 0.0), c(2.0, 1.0), c(1.0, 0.0)],
            [c(1.0, 0.0), c(0.0, 0.0), c(0.0, -1.0)],
            [c(3.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        ];
        let x = [c(1.0, 2.0), c(-1.0, 0.5), c(0.0, 1.0)];
        let mut b = [c(0.0, 0.0); 3];
        for (i, row) in a.iter().enumerate() {
            b[i] = row.iter().zip(&x).map(|(u, v)| u * v).sum();
        }
        let stats = solve_refined(&a, &mut b);
        assert!(stats.min > 0.0);
        for (got, want) in b.iter().zip(&x) {
            assert!((got - want).norm() < 1e-14);
        }
    }

    #[test]
    fn singular_reports_zero_pivot() {
        let one = Complex64::new(1.0, 0.0);
        let a = [[one, one], [one, one]];
        let mut b = [one, one];
        let stats = solve_refined(&a, &mut b);
        assert_eq!(stats.min, 0.0);
    }

    #[test]
    fn solve2_matches_inverse() {
        let m = [[2.0, 1.0], [1.0, 3.0]];
        let x = solve2(&m, [3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
        assert!(solve2(&[[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0]).is_none());
    }
}
