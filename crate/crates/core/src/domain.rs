//! Bistability maps over the plane of input intensities `(I₁⁰, I₂⁰)`.
//!
//! Every grid node is treated as the centre of a cell. Rows run along `I₁⁰`
//! (index `i`) and are stacked along `I₂⁰` (index `j`); cells are stored
//! row-major, `j * n1 + i`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::DomainError;
use crate::feedback::{find_all_solutions_seeded, CavityParams, InputPoint, OperatingPoint, SolverConfig, Stability};
use crate::medium::Medium;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    #[default]
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl AxisSpec {
    pub fn new(min: f64, max: f64, steps: usize) -> Self {
        Self { min, max, steps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub i1: AxisSpec,
    pub i2: AxisSpec,
    pub spacing: Spacing,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            i1: AxisSpec::new(1e-2, 1e3, 100),
            i2: AxisSpec::new(1e-2, 1e3, 100),
            spacing: Spacing::Log,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), DomainError> {
        for (name, a) in [("I1", &self.i1), ("I2", &self.i2)] {
            let bad = |msg: &str| Err(DomainError::InvalidGrid(format!("{name}: {msg}")));
            if !(a.min.is_finite() && a.max.is_finite()) {
                return bad("range must be finite");
            }
            if a.min < 0.0 {
                return bad("min must be >= 0");
            }
            if a.max <= a.min {
                return bad("max must exceed min");
            }
            if a.steps < 2 {
                return bad("steps must be >= 2");
            }
            if self.spacing == Spacing::Log && a.min == 0.0 {
                return bad("log spacing needs min > 0");
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.i1.steps, self.i2.steps)
    }

    fn axis(&self, k: usize) -> &AxisSpec {
        if k == 0 {
            &self.i1
        } else {
            &self.i2
        }
    }

    /// Node values along axis `k` (0 for `I₁⁰`, 1 for `I₂⁰`).
    pub fn nodes(&self, k: usize) -> Vec<f64> {
        let a = self.axis(k);
        let n = a.steps;
        let frac = |s: usize| s as f64 / (n - 1) as f64;
        (0..n)
            .map(|s| {
                if s == 0 {
                    return a.min;
                }
                if s == n - 1 {
                    return a.max;
                }
                match self.spacing {
                    Spacing::Linear => a.min + (a.max - a.min) * frac(s),
                    Spacing::Log => (a.min.ln() + (a.max / a.min).ln() * frac(s)).exp(),
                }
            })
            .collect()
    }

    /// Cell edges along axis `k`: midpoints between nodes (geometric for log
    /// spacing), closed off by the range ends. One more entry than nodes.
    pub fn edges(&self, k: usize) -> Vec<f64> {
        let x = self.nodes(k);
        let mut e = Vec::with_capacity(x.len() + 1);
        e.push(x[0]);
        for w in x.windows(2) {
            e.push(match self.spacing {
                Spacing::Linear => 0.5 * (w[0] + w[1]),
                Spacing::Log => (w[0] * w[1]).sqrt(),
            });
        }
        e.push(x[x.len() - 1]);
        e
    }

    /// Cell extent in the metric of the spacing (decades for log axes).
    fn cell_measure(&self, k: usize) -> Vec<f64> {
        let e = self.edges(k);
        e.windows(2)
            .map(|w| match self.spacing {
                Spacing::Linear => w[1] - w[0],
                Spacing::Log => (w[1] / w[0]).log10(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Absorbing,
    Bistable,
    Transparent,
    Failed,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::Absorbing => "absorbing",
            Region::Bistable => "bistable",
            Region::Transparent => "transparent",
            Region::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionThresholds {
    pub eta_absorbing: f64,
    pub eta_transparent: f64,
}

impl Default for RegionThresholds {
    fn default() -> Self {
        Self {
            eta_absorbing: 0.1,
            eta_transparent: 0.9,
        }
    }
}

impl RegionThresholds {
    pub fn validate(&self) -> Result<(), DomainError> {
        let ok = 0.0 <= self.eta_absorbing
            && self.eta_absorbing < self.eta_transparent
            && self.eta_transparent <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(DomainError::InvalidGrid(
                "thresholds need 0 <= eta_absorbing < eta_transparent <= 1".into(),
            ))
        }
    }
}

/// Labels a cell from its operating points. A unique root between the two
/// thresholds goes to whichever threshold its power transmission
/// `ΣIᵒᵘᵗ / ΣIⁱⁿ` is nearer; ties go to absorbing.
pub fn classify_region(roots: &[OperatingPoint], th: &RegionThresholds) -> Region {
    match roots {
        [] => Region::Failed,
        [op] => {
            let (lo, hi) = eta_range(roots);
            if hi < th.eta_absorbing {
                Region::Absorbing
            } else if lo > th.eta_transparent {
                Region::Transparent
            } else {
                let t = (op.i_out[0] + op.i_out[1]) / (op.i_in[0] + op.i_in[1]);
                if (t - th.eta_absorbing).abs() <= (t - th.eta_transparent).abs() {
                    Region::Absorbing
                } else {
                    Region::Transparent
                }
            }
        }
        _ => Region::Bistable,
    }
}

fn eta_range(roots: &[OperatingPoint]) -> (f64, f64) {
    roots
        .iter()
        .flat_map(|r| r.eta)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(e), hi.max(e)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRecord {
    pub i: usize,
    pub j: usize,
    pub i0: [f64; 2],
    pub solution_count: usize,
    pub stable_count: usize,
    pub region: Region,
    pub min_eta: f64,
    pub max_eta: f64,
    /// Error tag of a failed cell.
    pub error: Option<String>,
    pub roots: Vec<OperatingPoint>,
}

/// A closed boundary chain on the lattice of cell corners, oriented so that
/// bistable cells lie on its left.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Chain {
    /// Corner indices `(a, b)`; corner `(a, b)` sits at edge `a` of the
    /// `I₁⁰` axis and edge `b` of the `I₂⁰` axis. The first corner is not
    /// repeated at the end.
    pub corners: Vec<(usize, usize)>,
    pub vertices: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BistabilityMap {
    pub grid: GridSpec,
    pub cells: Vec<CellRecord>,
    pub boundary: Vec<Chain>,
}

impl BistabilityMap {
    pub fn cell(&self, i: usize, j: usize) -> &CellRecord {
        &self.cells[j * self.grid.i1.steps + i]
    }

    pub fn bistable_indicator(&self) -> Vec<bool> {
        self.cells.iter().map(|c| c.region == Region::Bistable).collect()
    }

    pub fn count(&self, region: Region) -> usize {
        self.cells.iter().filter(|c| c.region == region).count()
    }
}

/// Maps the bistability domain. Rows are processed in order of `I₂⁰`; the
/// cells of a row are solved concurrently on `threads` workers (0 picks the
/// default), each seeded with the roots of the cell below it. Results do not
/// depend on the number of workers.
pub fn map_domain<M: Medium + ?Sized>(
    grid: &GridSpec,
    cav: &CavityParams,
    medium: &M,
    cfg: &SolverConfig,
    thresholds: &RegionThresholds,
    threads: usize,
) -> Result<BistabilityMap, DomainError> {
    grid.validate()?;
    thresholds.validate()?;
    cav.validate().map_err(|e| DomainError::InvalidGrid(e.to_string()))?;
    cfg.validate().map_err(|e| DomainError::InvalidGrid(e.to_string()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| DomainError::InvalidGrid(format!("thread pool: {e}")))?;
    let (x, y) = (grid.nodes(0), grid.nodes(1));
    let mut cells: Vec<CellRecord> = Vec::with_capacity(x.len() * y.len());
    pool.install(|| {
        for (j, &i2) in y.iter().enumerate() {
            let below = (j > 0).then(|| &cells[(j - 1) * x.len()..j * x.len()]);
            let row: Vec<CellRecord> = x
                .par_iter()
                .enumerate()
                .map(|(i, &i1)| {
                    let warm: Vec<[f64; 2]> = below
                        .map(|r| r[i].roots.iter().map(|op| op.i_in).collect())
                        .unwrap_or_default();
                    solve_cell(i, j, [i1, i2], &warm, cav, medium, cfg, thresholds)
                })
                .collect();
            cells.extend(row);
        }
    });
    let mut map = BistabilityMap {
        grid: *grid,
        cells,
        boundary: Vec::new(),
    };
    map.boundary = extract_boundary(&map);
    Ok(map)
}

#[allow(clippy::too_many_arguments)]
fn solve_cell<M: Medium + ?Sized>(
    i: usize,
    j: usize,
    i0: [f64; 2],
    warm: &[[f64; 2]],
    cav: &CavityParams,
    medium: &M,
    cfg: &SolverConfig,
    th: &RegionThresholds,
) -> CellRecord {
    let inp = InputPoint { i0 };
    match find_all_solutions_seeded(medium, &inp, cav, cfg, warm) {
        Ok(roots) => {
            let (min_eta, max_eta) = eta_range(&roots);
            CellRecord {
                i,
                j,
                i0,
                solution_count: roots.len(),
                stable_count: roots.iter().filter(|r| r.stability() == Stability::Stable).count(),
                region: classify_region(&roots, th),
                min_eta,
                max_eta,
                error: None,
                roots,
            }
        }
        Err(e) => CellRecord {
            i,
            j,
            i0,
            solution_count: 0,
            stable_count: 0,
            region: Region::Failed,
            min_eta: f64::NAN,
            max_eta: f64::NAN,
            error: Some(e.to_string()),
            roots: Vec::new(),
        },
    }
}

/// Axis-aligned bounding box in cell indices, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CellBox {
    pub i_min: usize,
    pub i_max: usize,
    pub j_min: usize,
    pub j_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainComparison {
    /// Bistable cell counts of the two maps.
    pub bistable_cells: [usize; 2],
    /// Bistable area in the grid metric (decades squared for log grids).
    pub bistable_area: [f64; 2],
    pub bounding_boxes: [Option<CellBox>; 2],
    /// Cells bistable in exactly one of the maps.
    pub symmetric_difference: usize,
    /// Cells whose region label differs.
    pub relabelled: usize,
    pub region_counts: [BTreeMap<Region, usize>; 2],
}

pub fn bistable_area(map: &BistabilityMap) -> f64 {
    let (w, h) = (map.grid.cell_measure(0), map.grid.cell_measure(1));
    map.cells
        .iter()
        .filter(|c| c.region == Region::Bistable)
        .map(|c| w[c.i] * h[c.j])
        .sum()
}

fn bounding_box(map: &BistabilityMap) -> Option<CellBox> {
    map.cells
        .iter()
        .filter(|c| c.region == Region::Bistable)
        .fold(None, |acc: Option<CellBox>, c| {
            Some(match acc {
                None => CellBox { i_min: c.i, i_max: c.i, j_min: c.j, j_max: c.j },
                Some(b) => CellBox {
                    i_min: b.i_min.min(c.i),
                    i_max: b.i_max.max(c.i),
                    j_min: b.j_min.min(c.j),
                    j_max: b.j_max.max(c.j),
                },
            })
        })
}

pub fn compare_domains(a: &BistabilityMap, b: &BistabilityMap) -> Result<DomainComparison, DomainError> {
    if a.grid != b.grid || a.cells.len() != b.cells.len() {
        return Err(DomainError::GridMismatch);
    }
    let counts = |m: &BistabilityMap| {
        let mut out = BTreeMap::new();
        for c in &m.cells {
            *out.entry(c.region).or_insert(0) += 1;
        }
        out
    };
    let pairs = || a.cells.iter().zip(&b.cells);
    Ok(DomainComparison {
        bistable_cells: [a.count(Region::Bistable), b.count(Region::Bistable)],
        bistable_area: [bistable_area(a), bistable_area(b)],
        bounding_boxes: [bounding_box(a), bounding_box(b)],
        symmetric_difference: pairs()
            .filter(|(x, y)| (x.region == Region::Bistable) != (y.region == Region::Bistable))
            .count(),
        relabelled: pairs().filter(|(x, y)| x.region != y.region).count(),
        region_counts: [counts(a), counts(b)],
    })
}

/// Traces the edges between bistable and other cells into closed chains.
/// Cells outside the grid count as non-bistable, so every chain closes.
/// Outer boundaries run counterclockwise and holes clockwise. Chains are
/// ordered by their lowest cell index, which is also where each one starts.
pub fn extract_boundary(map: &BistabilityMap) -> Vec<Chain> {
    let (n1, n2) = map.grid.shape();
    let inside = |i: isize, j: isize| {
        i >= 0
            && j >= 0
            && (i as usize) < n1
            && (j as usize) < n2
            && map.cells[j as usize * n1 + i as usize].region == Region::Bistable
    };
    type Corner = (usize, usize);
    // Directed edges with the bistable cell on the left, in discovery order.
    let mut edges: Vec<(Corner, Corner)> = Vec::new();
    for j in 0..n2 {
        for i in 0..n1 {
            let (ii, jj) = (i as isize, j as isize);
            if !inside(ii, jj) {
                continue;
            }
            if !inside(ii, jj - 1) {
                edges.push(((i, j), (i + 1, j)));
            }
            if !inside(ii + 1, jj) {
                edges.push(((i + 1, j), (i + 1, j + 1)));
            }
            if !inside(ii, jj + 1) {
                edges.push(((i + 1, j + 1), (i, j + 1)));
            }
            if !inside(ii - 1, jj) {
                edges.push(((i, j + 1), (i, j)));
            }
        }
    }
    let mut outgoing: BTreeMap<Corner, Vec<usize>> = BTreeMap::new();
    for (k, (from, _)) in edges.iter().enumerate() {
        outgoing.entry(*from).or_default().push(k);
    }
    let dir = |k: usize| {
        let (a, b) = edges[k];
        (b.0 as isize - a.0 as isize, b.1 as isize - a.1 as isize)
    };
    let (ex, ey) = (map.grid.edges(0), map.grid.edges(1));
    let mut used = vec![false; edges.len()];
    let mut chains = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        let mut corners = Vec::new();
        let mut k = start;
        loop {
            used[k] = true;
            corners.push(edges[k].0);
            let to = edges[k].1;
            if to == edges[start].0 {
                break;
            }
            let (dx, dy) = dir(k);
            // At a saddle two edges leave the corner; the left turn keeps
            // diagonal neighbours in separate chains.
            let next = outgoing[&to]
                .iter()
                .copied()
                .filter(|&c| !used[c])
                .max_by_key(|&c| {
                    let (nx, ny) = dir(c);
                    dx * ny - dy * nx
                });
            match next {
                Some(c) => k = c,
                None => break,
            }
        }
        let vertices = corners.iter().map(|&(a, b)| [ex[a], ey[b]]).collect();
        chains.push(Chain { corners, vertices });
    }
    chains
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(n1: usize, n2: usize, bistable: &[(usize, usize)]) -> BistabilityMap {
        let grid = GridSpec {
            i1: AxisSpec::new(0.0, 1.0, n1),
            i2: AxisSpec::new(0.0, 1.0, n2),
            spacing: Spacing::Linear,
        };
        let cells = (0..n2)
            .flat_map(|j| (0..n1).map(move |i| (i, j)))
            .map(|(i, j)| CellRecord {
                i,
                j,
                i0: [0.0; 2],
                solution_count: 1,
                stable_count: 1,
                region: if bistable.contains(&(i, j)) { Region::Bistable } else { Region::Transparent },
                min_eta: 1.0,
                max_eta: 1.0,
                error: None,
                roots: Vec::new(),
            })
            .collect();
        BistabilityMap { grid, cells, boundary: Vec::new() }
    }

    #[test]
    fn log_nodes_hit_range_ends() {
        let g = GridSpec::default();
        let x = g.nodes(0);
        assert_eq!(x.len(), 100);
        assert_eq!(x[0], 1e-2);
        assert_eq!(x[99], 1e3);
        assert!((x[1] / x[0] - 10f64.powf(5.0 / 99.0)).abs() < 1e-12);
        let e = g.edges(0);
        assert_eq!(e.len(), 101);
        assert!((e[1] - (x[0] * x[1]).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn grid_validation() {
        let mut g = GridSpec::default();
        g.i1.min = 0.0;
        assert!(g.validate().is_err());
        g.spacing = Spacing::Linear;
        assert!(g.validate().is_ok());
        g.i2.steps = 1;
        assert!(g.validate().is_err());
    }

    #[test]
    fn no_bistable_cells_no_chains() {
        assert!(extract_boundary(&synthetic(4, 3, &[])).is_empty());
    }

    #[test]
    fn single_cell_gives_square() {
        let chains = extract_boundary(&synthetic(4, 4, &[(1, 2)]));
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].corners, vec![(1, 2), (2, 2), (2, 3), (1, 3)]);
    }

    #[test]
    fn diagonal_cells_stay_separate() {
        let chains = extract_boundary(&synthetic(3, 3, &[(0, 0), (1, 1)]));
        assert_eq!(chains.len(), 2);
        assert!(chains.iter().all(|c| c.corners.len() == 4));
    }

    #[test]
    fn ring_has_outer_and_hole() {
        let ring: Vec<_> = (0..3)
            .flat_map(|j| (0..3).map(move |i| (i, j)))
            .filter(|&c| c != (1, 1))
            .collect();
        let chains = extract_boundary(&synthetic(3, 3, &ring));
        assert_eq!(chains.len(), 2);
        assert_eq!(chains[0].corners.len(), 12);
        assert_eq!(chains[1].corners.len(), 4);
        // The hole runs clockwise.
        assert_eq!(chains[1].corners, vec![(2, 1), (1, 1), (1, 2), (2, 2)]);
    }

    #[test]
    fn compare_rejects_other_grid() {
        let a = synthetic(3, 3, &[]);
        let b = synthetic(3, 4, &[]);
        assert_eq!(compare_domains(&a, &b).unwrap_err(), DomainError::GridMismatch);
        let same = compare_domains(&a, &a).unwrap();
        assert_eq!(same.symmetric_difference, 0);
    }
}
