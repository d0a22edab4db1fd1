//! Quantization of agent state and action spaces.
//!
//! The state box is partitioned into axis-aligned cells `B_i`, half-open on
//! the upper faces except along the outer boundary, so every point belongs to
//! exactly one cell. Each cell carries a representative `rep_i` inside it and
//! the quantizer maps `x` to the representative of its cell. The quantization
//! resolution is `L_X = max_i sup_{x, x' in B_i} |x - x'|`, the largest cell
//! diameter; for boxes this is the largest Euclidean diagonal.
//!
//! Actions are discretized by a finite atom set inside the action box with
//! resolution `L_U = sup_u min_k |u - atom_k|`, the worst distance from a box
//! point to its nearest atom.

use crate::error::Error;
use crate::Result;
use rand::Rng;

/// Compact axis-aligned box `[lo_1, hi_1] x ... x [lo_d, hi_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxBounds {
    /// Degenerate faces (`lo_d == hi_d`) are allowed; they model fixed coordinates.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::invalid("box bounds need matching non-empty lo/hi"));
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !a.is_finite() || !b.is_finite() || a > b {
                return Err(Error::invalid(format!(
                    "box face [{a}, {b}] is not a finite interval"
                )));
            }
        }
        Ok(BoxBounds { lo, hi })
    }

    /// 1-D convenience constructor.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        BoxBounds::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    /// Uniform draw; degenerate faces return the fixed coordinate.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| if a == b { a } else { rng.random_range(a..b) })
            .collect()
    }
}

/// One axis of the state partition: strictly increasing edges from `lo` to `hi`.
#[derive(Debug, Clone, PartialEq)]
struct Axis {
    edges: Vec<f64>,
    /// Exact common width for uniformly constructed axes; explicit-edge axes
    /// fall back to the largest observed gap.
    uniform_width: Option<f64>,
}

impl Axis {
    fn uniform(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::invalid("axis needs at least one cell"));
        }
        if !(lo < hi) {
            return Err(Error::invalid(format!(
                "axis [{lo}, {hi}] cannot be partitioned"
            )));
        }
        let width = (hi - lo) / cells as f64;
        let mut edges: Vec<f64> = (0..=cells).map(|i| lo + i as f64 * width).collect();
        edges[cells] = hi;
        Ok(Axis {
            edges,
            uniform_width: Some(width),
        })
    }

    fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::invalid("axis needs at least two edges"));
        }
        if edges.windows(2).any(|w| !(w[0] < w[1]) ) || edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::invalid("axis edges must be finite and strictly increasing"));
        }
        Ok(Axis {
            edges,
            uniform_width: None,
        })
    }

    fn cells(&self) -> usize {
        self.edges.len() - 1
    }

    fn max_width(&self) -> f64 {
        match self.uniform_width {
            Some(w) => w,
            None => self
                .edges
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(0.0, f64::max),
        }
    }

    /// Cell of `x`: half-open `[e_i, e_{i+1})`, with the last cell closed above.
    fn locate(&self, x: f64) -> usize {
        let idx = self.edges.partition_point(|e| *e <= x);
        idx.saturating_sub(1).min(self.cells() - 1)
    }

    fn center(&self, i: usize) -> f64 {
        0.5 * (self.edges[i] + self.edges[i + 1])
    }
}

/// Partition of the state box into cells with representatives.
///
/// Cell indices are row-major over the per-axis cell indices with the first
/// axis varying slowest; 1-D grids are simply numbered left to right.
#[derive(Debug, Clone)]
pub struct StateGrid {
    bounds: BoxBounds,
    axes: Vec<Axis>,
    reps: Vec<Vec<f64>>,
}

impl StateGrid {
    /// Uniform partition with `cells_per_dim[d]` equal cells along axis `d`.
    pub fn uniform(bounds: BoxBounds, cells_per_dim: &[usize]) -> Result<Self> {
        if cells_per_dim.len() != bounds.dim() {
            return Err(Error::invalid("cells_per_dim length must match box dimension"));
        }
        let axes = bounds
            .lo
            .iter()
            .zip(&bounds.hi)
            .zip(cells_per_dim)
            .map(|((&lo, &hi), &m)| Axis::uniform(lo, hi, m))
            .collect::<Result<Vec<_>>>()?;
        Self::assemble(bounds, axes)
    }

    /// Partition from explicit per-axis edges; the box is inferred from them.
    pub fn from_edges(edges: Vec<Vec<f64>>) -> Result<Self> {
        let axes = edges
            .into_iter()
            .map(Axis::from_edges)
            .collect::<Result<Vec<_>>>()?;
        let lo = axes.iter().map(|a| a.edges[0]).collect();
        let hi = axes.iter().map(|a| *a.edges.last().unwrap()).collect();
        Self::assemble(BoxBounds::new(lo, hi)?, axes)
    }

    fn assemble(bounds: BoxBounds, axes: Vec<Axis>) -> Result<Self> {
        let mut grid = StateGrid {
            bounds,
            axes,
            reps: Vec::new(),
        };
        grid.reps = (0..grid.num_cells())
            .map(|i| {
                let multi = grid.unflatten(i);
                multi
                    .iter()
                    .zip(&grid.axes)
                    .map(|(&j, axis)| axis.center(j))
                    .collect()
            })
            .collect();
        Ok(grid)
    }

    /// Replaces the default cell-center representatives.
    pub fn with_representatives(mut self, reps: Vec<Vec<f64>>) -> Result<Self> {
        if reps.len() != self.num_cells() {
            return Err(Error::invalid(format!(
                "expected {} representatives, got {}",
                self.num_cells(),
                reps.len()
            )));
        }
        for (i, rep) in reps.iter().enumerate() {
            if self.quantize(rep)? != i {
                return Err(Error::invalid(format!(
                    "representative {rep:?} does not lie in cell {i}"
                )));
            }
        }
        self.reps = reps;
        Ok(self)
    }

    pub fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn num_cells(&self) -> usize {
        self.axes.iter().map(Axis::cells).product()
    }

    pub fn representative(&self, cell: usize) -> &[f64] {
        &self.reps[cell]
    }

    pub fn representatives(&self) -> &[Vec<f64>] {
        &self.reps
    }

    fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut multi = vec![0usize; self.axes.len()];
        for (d, axis) in self.axes.iter().enumerate().rev() {
            multi[d] = flat % axis.cells();
            flat /= axis.cells();
        }
        multi
    }

    /// Index of the unique cell containing `x`.
    pub fn quantize(&self, x: &[f64]) -> Result<usize> {
        if !self.bounds.contains(x) {
            return Err(Error::OutOfBounds { point: x.to_vec() });
        }
        let mut flat = 0usize;
        for (v, axis) in x.iter().zip(&self.axes) {
            flat = flat * axis.cells() + axis.locate(*v);
        }
        Ok(flat)
    }

    /// Axis-aligned bounds of one cell.
    pub fn cell_bounds(&self, cell: usize) -> BoxBounds {
        let multi = self.unflatten(cell);
        let lo = multi
            .iter()
            .zip(&self.axes)
            .map(|(&j, axis)| axis.edges[j])
            .collect();
        let hi = multi
            .iter()
            .zip(&self.axes)
            .map(|(&j, axis)| axis.edges[j + 1])
            .collect();
        BoxBounds::new(lo, hi).expect("cell edges are ordered")
    }

    /// Uniform draw inside a cell; the draw quantizes back to `cell`.
    pub fn sample_in_cell(&self, cell: usize, rng: &mut impl Rng) -> Vec<f64> {
        self.cell_bounds(cell).sample(rng)
    }

    /// Largest cell diameter `L_X`.
    ///
    /// The per-axis maximum widths co-occur in one cell of the tensor grid, so
    /// the maximum diagonal is the Euclidean norm of those widths. In 1-D this
    /// is the exact largest cell width with no rounding through `sqrt`.
    pub fn l_x(&self) -> f64 {
        if self.axes.len() == 1 {
            return self.axes[0].max_width();
        }
        self.axes
            .iter()
            .map(|a| {
                let w = a.max_width();
                w * w
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Finite action set inside a compact action box.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionGrid {
    atoms: Vec<Vec<f64>>,
    bounds: BoxBounds,
}

/// Grid points per axis used by the multi-dimensional `l_u` search.
pub const DEFAULT_LU_RESOLUTION: usize = 257;

impl ActionGrid {
    pub fn new(atoms: Vec<Vec<f64>>, bounds: BoxBounds) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyActionGrid);
        }
        for atom in &atoms {
            if !bounds.contains(atom) {
                return Err(Error::invalid(format!(
                    "action atom {atom:?} lies outside the action box"
                )));
            }
        }
        for i in 0..atoms.len() {
            for j in i + 1..atoms.len() {
                if atoms[i] == atoms[j] {
                    return Err(Error::invalid(format!(
                        "duplicate action atom {:?}",
                        atoms[i]
                    )));
                }
            }
        }
        Ok(ActionGrid { atoms, bounds })
    }

    /// Atoms at the centers of a uniform partition of the box, row-major.
    pub fn uniform(bounds: BoxBounds, atoms_per_dim: &[usize]) -> Result<Self> {
        if atoms_per_dim.len() != bounds.dim() || atoms_per_dim.iter().any(|&m| m == 0) {
            return Err(Error::invalid("atoms_per_dim must be positive per dimension"));
        }
        let mut atoms = vec![Vec::new()];
        for ((&lo, &hi), &m) in bounds.lo.iter().zip(&bounds.hi).zip(atoms_per_dim) {
            let width = (hi - lo) / m as f64;
            let mut next = Vec::with_capacity(atoms.len() * m);
            for prefix in &atoms {
                for k in 0..m {
                    let mut atom = prefix.clone();
                    atom.push(if lo == hi { lo } else { lo + (k as f64 + 0.5) * width });
                    next.push(atom);
                }
            }
            atoms = next;
        }
        atoms.dedup();
        ActionGrid::new(atoms, bounds)
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }

    pub fn atom(&self, k: usize) -> &[f64] {
        &self.atoms[k]
    }

    /// Distance from `u` to the nearest atom.
    pub fn min_dist(&self, u: &[f64]) -> f64 {
        self.atoms
            .iter()
            .map(|a| euclid(a, u))
            .fold(f64::INFINITY, f64::min)
    }

    /// Worst-case distance `L_U` from a box point to the nearest atom.
    ///
    /// Exact in 1-D, where the supremum is attained at an endpoint or at the
    /// midpoint between adjacent atoms. Higher dimensions use a deterministic
    /// dense grid search ([`DEFAULT_LU_RESOLUTION`] points per axis), a lower
    /// bound on the true supremum.
    pub fn l_u(&self) -> f64 {
        self.l_u_with_resolution(DEFAULT_LU_RESOLUTION)
    }

    pub fn l_u_with_resolution(&self, resolution: usize) -> f64 {
        if self.dim() == 1 {
            let mut vals: Vec<f64> = self.atoms.iter().map(|a| a[0]).collect();
            vals.sort_by(f64::total_cmp);
            let mut worst = (vals[0] - self.bounds.lo[0]).max(self.bounds.hi[0] - vals[vals.len() - 1]);
            for w in vals.windows(2) {
                worst = worst.max(0.5 * (w[1] - w[0]));
            }
            return worst.max(0.0);
        }
        let steps = resolution.max(2);
        let mut worst = 0.0f64;
        let mut point = vec![0.0; self.dim()];
        self.search(0, steps, &mut point, &mut worst);
        worst
    }

    fn search(&self, d: usize, steps: usize, point: &mut Vec<f64>, worst: &mut f64) {
        if d == self.dim() {
            *worst = worst.max(self.min_dist(point));
            return;
        }
        let (lo, hi) = (self.bounds.lo[d], self.bounds.hi[d]);
        if lo == hi {
            point[d] = lo;
            self.search(d + 1, steps, point, worst);
            return;
        }
        for k in 0..steps {
            point[d] = lo + (hi - lo) * k as f64 / (steps - 1) as f64;
            self.search(d + 1, steps, point, worst);
        }
    }
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cell_grid() -> StateGrid {
        StateGrid::uniform(BoxBounds::interval(0.0, 1.0).unwrap(), &[2]).unwrap()
    }

    #[test]
    fn quantize_membership() {
        let grid = two_cell_grid()
            .with_representatives(vec![vec![0.25], vec![0.75]])
            .unwrap();
        assert_eq!(grid.quantize(&[0.3]).unwrap(), 0);
        assert_eq!(grid.representative(0), &[0.25]);
    }

    #[test]
    fn quantize_half_open_boundary() {
        let grid = two_cell_grid();
        assert_eq!(grid.quantize(&[0.5]).unwrap(), 1);
        assert_eq!(grid.quantize(&[1.0]).unwrap(), 1, "outer boundary is closed");
        assert_eq!(grid.quantize(&[0.0]).unwrap(), 0);
    }

    #[test]
    fn quantize_representative_maps_to_own_cell() {
        let grid = two_cell_grid();
        for i in 0..grid.num_cells() {
            assert_eq!(grid.quantize(grid.representative(i)).unwrap(), i);
        }
    }

    #[test]
    fn quantize_rejects_out_of_bounds() {
        let grid = two_cell_grid();
        assert!(matches!(
            grid.quantize(&[1.5]),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(grid.quantize(&[f64::NAN]).is_err());
    }

    #[test]
    fn l_x_two_cells() {
        assert_eq!(two_cell_grid().l_x(), 0.5);
    }

    #[test]
    fn l_x_uniform_is_exact_reciprocal() {
        for m in 1..=64usize {
            let grid =
                StateGrid::uniform(BoxBounds::interval(0.0, 1.0).unwrap(), &[m]).unwrap();
            assert_eq!(grid.l_x(), 1.0 / m as f64, "M = {m}");
        }
    }

    #[test]
    fn l_x_single_2d_cell_is_diagonal() {
        let grid = StateGrid::uniform(
            BoxBounds::new(vec![0.0, 0.0], vec![0.5, 0.5]).unwrap(),
            &[1, 1],
        )
        .unwrap();
        assert!((grid.l_x() - 0.5 * std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn explicit_edges_and_custom_reps() {
        let grid = StateGrid::from_edges(vec![vec![0.0, 0.5, 1.0]])
            .unwrap()
            .with_representatives(vec![vec![0.0], vec![1.0]])
            .unwrap();
        assert_eq!(grid.quantize(&[0.49]).unwrap(), 0);
        assert_eq!(grid.representative(1), &[1.0]);
        let bad = StateGrid::from_edges(vec![vec![0.0, 0.5, 1.0]])
            .unwrap()
            .with_representatives(vec![vec![0.6], vec![1.0]]);
        assert!(bad.is_err(), "representative outside its cell must fail");
    }

    #[test]
    fn row_major_2d_indexing() {
        let grid = StateGrid::uniform(
            BoxBounds::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            &[2, 3],
        )
        .unwrap();
        assert_eq!(grid.num_cells(), 6);
        // first axis slowest: cell (i, j) has flat index 3 i + j
        assert_eq!(grid.quantize(&[0.1, 0.9]).unwrap(), 2);
        assert_eq!(grid.quantize(&[0.9, 0.1]).unwrap(), 3);
    }

    #[test]
    fn l_u_two_atoms() {
        let grid = ActionGrid::new(
            vec![vec![0.25], vec![0.75]],
            BoxBounds::interval(0.0, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(grid.l_u(), 0.25);
    }

    #[test]
    fn l_u_single_atom() {
        let grid = ActionGrid::new(vec![vec![0.5]], BoxBounds::interval(0.0, 1.0).unwrap())
            .unwrap();
        assert_eq!(grid.l_u(), 0.5);
    }

    #[test]
    fn l_u_exhaustive_atoms_is_zero() {
        let grid = ActionGrid::new(vec![vec![0.5]], BoxBounds::interval(0.5, 0.5).unwrap())
            .unwrap();
        assert_eq!(grid.l_u(), 0.0);
    }

    #[test]
    fn l_u_2d_search_approximates_corner_distance() {
        let bounds = BoxBounds::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let grid = ActionGrid::new(vec![vec![0.5, 0.5]], bounds).unwrap();
        let exact = 0.5 * std::f64::consts::SQRT_2;
        assert!((grid.l_u() - exact).abs() < 1e-12, "corners are on the search grid");
    }

    #[test]
    fn uniform_action_atoms_are_centers() {
        let grid =
            ActionGrid::uniform(BoxBounds::interval(0.0, 1.0).unwrap(), &[2]).unwrap();
        assert_eq!(grid.atoms(), &[vec![0.25], vec![0.75]]);
    }

    #[test]
    fn rejects_duplicate_atoms() {
        let bounds = BoxBounds::interval(0.0, 1.0).unwrap();
        assert!(ActionGrid::new(vec![vec![0.5], vec![0.5]], bounds).is_err());
    }
}
