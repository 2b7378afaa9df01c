//! Per-pixel homogeneous constraints on the scaled-distance vector `e`.
//!
//! Light `i` observes `e_i * m_i = (s_i − x)ᵀn`, where `e_i` is the scaled
//! distance. Differences and sums of symmetric pairs give constraints that hold
//! under any fall-off (block `A`); approximating the fall-off by the first power
//! of distance makes `e` quadratic in position and yields four more families
//! (block `A′`). Columns follow the light order `(pair 0 +, pair 0 −, …)`.
//!
//! The rig-dependent part (basis choice, basis coefficients, combinatorial row
//! patterns) lives in [`ConstraintLayout`], built once and shared by all pixels.

use nalgebra::DMatrix;

use crate::geometry::{basis_coefficients_with_tol, OffsetMode, SymmetricRig, BASIS_TOL};
use crate::Result;

/// Default relative tolerance for [`numeric_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Which constraint family produced a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowKind {
    /// Pair difference expanded through the basis pairs.
    Diff,
    /// Equal pair sums.
    Sum,
    /// Equal albedo-scaled radius from pairs with different radii.
    OneA,
    /// Equal scaled-distance sums for pairs with equal radii.
    OneB,
    /// Scaled-distance differences expanded through the basis pairs.
    TwoA,
    /// Scaled-distance differences proportional to the viewing ray (z-only offset).
    TwoB,
}

/// Measurements at one pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelStack {
    /// `2·n_pairs` intensities in light order.
    pub intensities: Vec<f64>,
    pub pixel: (f64, f64),
    /// `(u′, v′)` of the pixel.
    pub normalized: [f64; 2],
    pub valid: bool,
}

impl PixelStack {
    pub fn new(intensities: Vec<f64>, pixel: (f64, f64), normalized: [f64; 2]) -> Self {
        let valid = intensities.iter().all(|m| m.is_finite() && *m >= 0.0);
        Self {
            intensities,
            pixel,
            normalized,
            valid,
        }
    }
}

/// A block of constraint rows and the family each row came from.
#[derive(Debug, Clone, PartialEq)]
pub struct RowBlock {
    pub matrix: DMatrix<f64>,
    pub tags: Vec<RowKind>,
}

impl RowBlock {
    fn from_rows(cols: usize, rows: Vec<(RowKind, Vec<f64>)>) -> Self {
        let tags = rows.iter().map(|(k, _)| *k).collect();
        let matrix = DMatrix::from_row_iterator(
            rows.len(),
            cols,
            rows.into_iter().flat_map(|(_, r)| r),
        );
        Self { matrix, tags }
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    pub a: RowBlock,
    pub a_prime: RowBlock,
}

impl ConstraintSystem {
    /// `[A; A′]`.
    pub fn stacked(&self) -> DMatrix<f64> {
        let cols = self.a.matrix.ncols();
        let mut m = DMatrix::zeros(self.a.nrows() + self.a_prime.nrows(), cols);
        m.rows_mut(0, self.a.nrows()).copy_from(&self.a.matrix);
        m.rows_mut(self.a.nrows(), self.a_prime.nrows())
            .copy_from(&self.a_prime.matrix);
        m
    }

    pub fn n_unknowns(&self) -> usize {
        self.a.matrix.ncols()
    }
}

/// A target pair written as a combination of one or two basis pairs.
#[derive(Debug, Clone, PartialEq)]
struct Expansion {
    target: usize,
    terms: Vec<(usize, f64)>,
}

/// Rig-dependent structure of the constraint system.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintLayout {
    n_pairs: usize,
    planar: Vec<[f64; 2]>,
    offset_mode: OffsetMode,
    collinear: bool,
    bases: Vec<usize>,
    expansions: Vec<Expansion>,
    /// `(reference, j, k, c_j, c_k)` with `c = 1 / (2 (ratio² − ratio_ref²))`.
    one_a: Vec<(usize, usize, usize, f64, f64)>,
    one_b: Vec<(usize, usize)>,
}

impl ConstraintLayout {
    pub fn new(rig: &SymmetricRig) -> Result<Self> {
        Self::with_basis_tol(rig, BASIS_TOL)
    }

    pub fn with_basis_tol(rig: &SymmetricRig, basis_tol: f64) -> Result<Self> {
        let pairs = rig.pairs();
        let n = pairs.len();
        let planar: Vec<[f64; 2]> = pairs.iter().map(|p| p.planar()).collect();
        let collinear = rig.is_collinear();

        let (bases, expansions) = if collinear {
            // One basis; every other pair is a signed multiple of it.
            let [bx, by] = planar[0];
            let norm2 = bx * bx + by * by;
            let exp = (1..n)
                .map(|c| {
                    let [tx, ty] = planar[c];
                    Expansion {
                        target: c,
                        terms: vec![(0, (tx * bx + ty * by) / norm2)],
                    }
                })
                .collect();
            (vec![0], exp)
        } else {
            let (a, b) = best_basis(&planar);
            let mut exp = Vec::with_capacity(n.saturating_sub(2));
            for c in (0..n).filter(|&c| c != a && c != b) {
                let (s, t) = basis_coefficients_with_tol(&pairs[a], &pairs[b], &pairs[c], basis_tol)?;
                exp.push(Expansion {
                    target: c,
                    terms: vec![(a, s), (b, t)],
                });
            }
            (vec![a, b], exp)
        };

        let ratio2: Vec<f64> = pairs.iter().map(|p| p.radius_ratio.powi(2)).collect();
        let mut one_a = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in (j + 1)..n {
                    if j == i || k == i || ratio2[j] == ratio2[i] || ratio2[k] == ratio2[i] {
                        continue;
                    }
                    let cj = 1.0 / (2.0 * (ratio2[j] - ratio2[i]));
                    let ck = 1.0 / (2.0 * (ratio2[k] - ratio2[i]));
                    one_a.push((i, j, k, cj, ck));
                }
            }
        }
        let mut one_b = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if pairs[i].radius_ratio == pairs[j].radius_ratio {
                    one_b.push((i, j));
                }
            }
        }

        Ok(Self {
            n_pairs: n,
            planar,
            offset_mode: rig.offset_mode,
            collinear,
            bases,
            expansions,
            one_a,
            one_b,
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    pub fn n_lights(&self) -> usize {
        2 * self.n_pairs
    }

    pub fn is_collinear(&self) -> bool {
        self.collinear
    }

    /// Indices of the basis pairs used to expand the remaining pairs.
    pub fn bases(&self) -> &[usize] {
        &self.bases
    }

    /// Rows from pair differences and pair sums; they hold for any fall-off.
    pub fn build_a(&self, stack: &PixelStack) -> RowBlock {
        let m = &stack.intensities;
        let cols = self.n_lights();
        let mut rows = Vec::with_capacity(2 * self.n_pairs);

        for exp in &self.expansions {
            let mut r = vec![0.0; cols];
            let c = exp.target;
            r[2 * c] += m[2 * c];
            r[2 * c + 1] -= m[2 * c + 1];
            for &(b, coeff) in &exp.terms {
                r[2 * b] -= coeff * m[2 * b];
                r[2 * b + 1] += coeff * m[2 * b + 1];
            }
            rows.push((RowKind::Diff, r));
        }
        for k in 1..self.n_pairs {
            let mut r = vec![0.0; cols];
            r[0] += m[0];
            r[1] += m[1];
            r[2 * k] -= m[2 * k];
            r[2 * k + 1] -= m[2 * k + 1];
            rows.push((RowKind::Sum, r));
        }
        RowBlock::from_rows(cols, normalize_rows(rows))
    }

    /// Rows that hold exactly under the first-power fall-off model.
    pub fn build_a_prime(&self, stack: &PixelStack) -> RowBlock {
        let cols = self.n_lights();
        let mut rows = Vec::new();

        for &(i, j, k, cj, ck) in &self.one_a {
            let mut r = vec![0.0; cols];
            add_sum(&mut r, j, cj);
            add_sum(&mut r, i, -cj);
            add_sum(&mut r, k, -ck);
            add_sum(&mut r, i, ck);
            rows.push((RowKind::OneA, r));
        }
        for &(i, j) in &self.one_b {
            let mut r = vec![0.0; cols];
            add_sum(&mut r, i, 1.0);
            add_sum(&mut r, j, -1.0);
            rows.push((RowKind::OneB, r));
        }

        if self.collinear || self.offset_mode != OffsetMode::ZOnly {
            for exp in &self.expansions {
                let mut r = vec![0.0; cols];
                add_diff(&mut r, exp.target, 1.0);
                for &(b, coeff) in &exp.terms {
                    add_diff(&mut r, b, -coeff);
                }
                rows.push((RowKind::TwoA, r));
            }
        } else {
            let [u, v] = stack.normalized;
            let w: Vec<f64> = self.planar.iter().map(|[x, y]| u * x + v * y).collect();
            let scale = self
                .planar
                .iter()
                .map(|[x, y]| x.hypot(*y))
                .fold(0.0, f64::max);
            if w.iter().all(|wk| wk.abs() <= 1e-12 * scale) {
                // On the principal point x′ has no planar part, so every difference vanishes.
                for k in 0..self.n_pairs {
                    let mut r = vec![0.0; cols];
                    add_diff(&mut r, k, 1.0);
                    rows.push((RowKind::TwoB, r));
                }
            } else {
                for j in 0..self.n_pairs {
                    for k in (j + 1)..self.n_pairs {
                        let mut r = vec![0.0; cols];
                        add_diff(&mut r, j, w[k]);
                        add_diff(&mut r, k, -w[j]);
                        rows.push((RowKind::TwoB, r));
                    }
                }
            }
        }
        RowBlock::from_rows(cols, normalize_rows(rows))
    }

    pub fn build(&self, stack: &PixelStack) -> ConstraintSystem {
        ConstraintSystem {
            a: self.build_a(stack),
            a_prime: self.build_a_prime(stack),
        }
    }
}

/// The basis pair maximizing `|det [q_a q_b]|`; ties keep the first found.
fn best_basis(planar: &[[f64; 2]]) -> (usize, usize) {
    let mut best = (0, 1);
    let mut best_det = -1.0;
    for a in 0..planar.len() {
        for b in (a + 1)..planar.len() {
            let det = (planar[a][0] * planar[b][1] - planar[a][1] * planar[b][0]).abs();
            if det > best_det * (1.0 + 1e-12) {
                best_det = det;
                best = (a, b);
            }
        }
    }
    best
}

fn add_sum(row: &mut [f64], pair: usize, c: f64) {
    row[2 * pair] += c;
    row[2 * pair + 1] += c;
}

fn add_diff(row: &mut [f64], pair: usize, c: f64) {
    row[2 * pair] += c;
    row[2 * pair + 1] -= c;
}

/// Scales rows to unit norm and drops all-zero rows.
fn normalize_rows(rows: Vec<(RowKind, Vec<f64>)>) -> Vec<(RowKind, Vec<f64>)> {
    rows.into_iter()
        .filter_map(|(kind, mut r)| {
            let norm = r.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm > 0.0 && norm.is_finite() {
                r.iter_mut().for_each(|c| *c /= norm);
                Some((kind, r))
            } else {
                None
            }
        })
        .collect()
}

/// Difference and sum rows for one pixel.
pub fn build_a(rig: &SymmetricRig, stack: &PixelStack) -> Result<RowBlock> {
    Ok(ConstraintLayout::new(rig)?.build_a(stack))
}

/// Fall-off relaxation rows for one pixel.
pub fn build_a_prime(rig: &SymmetricRig, stack: &PixelStack) -> Result<RowBlock> {
    Ok(ConstraintLayout::new(rig)?.build_a_prime(stack))
}

/// Number of singular values above `rel_tol · σ_max`.
pub fn numeric_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let max = sv.max();
    if max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraIntrinsics, Vec3};
    use crate::probe::{relaxed_pixel, ProbePixel};

    fn double_o45(mode: OffsetMode) -> SymmetricRig {
        SymmetricRig::from_degrees(
            &[(1.0, 45.0), (1.0, 135.0), (2.0, 45.0), (2.0, 135.0)],
            mode,
        )
        .unwrap()
    }

    fn residual(block: &DMatrix<f64>, e: &[f64]) -> f64 {
        let e = nalgebra::DVector::from_column_slice(e);
        (block * &e).norm() / (block.norm() * e.norm())
    }

    #[test]
    fn row_counts_for_three_pairs() {
        let rig = SymmetricRig::from_degrees(&[(1.0, 0.0), (1.0, 90.0), (2.0, 45.0)], OffsetMode::Xyz)
            .unwrap();
        let probe = ProbePixel::generic(&rig, 7);
        let a = build_a(&rig, &probe.stack).unwrap();
        assert_eq!(a.nrows(), 3);
        assert_eq!(a.tags.iter().filter(|t| **t == RowKind::Diff).count(), 1);
        assert_eq!(a.tags.iter().filter(|t| **t == RowKind::Sum).count(), 2);
        assert_eq!(numeric_rank(&a.matrix, DEFAULT_RANK_TOL), 3);
    }

    #[test]
    fn symmetric_center_pixel_sum_row() {
        // Four equal intensities: the sum row is proportional to (1, 1, -1, -1).
        let rig = SymmetricRig::from_degrees(&[(1.0, 0.0), (1.0, 90.0)], OffsetMode::ZOnly).unwrap();
        let stack = PixelStack::new(vec![0.2; 4], (0.0, 0.0), [0.0, 0.0]);
        let a = build_a(&rig, &stack).unwrap();
        assert_eq!(a.tags, vec![RowKind::Sum]);
        let row: Vec<f64> = a.matrix.row(0).iter().copied().collect();
        assert_eq!(row, vec![0.5, 0.5, -0.5, -0.5]);
        assert!(residual(&a.matrix, &[3.0; 4]) < 1e-15);
    }

    #[test]
    fn relaxed_plane_rows_annihilate_analytic_e() {
        // Plane z = 6, ρ = 1, rig centered on the camera, center pixel.
        let rig = double_o45(OffsetMode::ZOnly);
        let x = Vec3::new(0.0, 0.0, 6.0);
        let n = Vec3::new(0.0, 0.0, -1.0);
        let probe = relaxed_pixel(&rig, 1.0, &Vec3::zeros(), &x, &n, 1.0);
        // e = r² ratio² + ‖x‖² with r = 1.
        let e = [37.0, 37.0, 37.0, 37.0, 40.0, 40.0, 40.0, 40.0];
        for (p, q) in probe.e.iter().zip(e) {
            assert!((p - q).abs() < 1e-12);
        }
        let layout = ConstraintLayout::new(&rig).unwrap();
        let sys = layout.build(&probe.stack);
        assert!(residual(&sys.a.matrix, &e) <= 1e-10);
        assert!(residual(&sys.stacked(), &e) <= 1e-10);
    }

    #[test]
    fn one_a_and_one_b_enumeration() {
        let rig = double_o45(OffsetMode::Xyz);
        let layout = ConstraintLayout::new(&rig).unwrap();
        // Each reference pair sees exactly one (j, k) pair of the other radius.
        assert_eq!(layout.one_a.len(), 4);
        assert_eq!(layout.one_b, vec![(0, 1), (2, 3)]);

        let distinct = SymmetricRig::from_degrees(&[(1.0, 0.0), (2.0, 60.0), (3.0, 120.0)], OffsetMode::Xyz)
            .unwrap();
        let layout = ConstraintLayout::new(&distinct).unwrap();
        assert_eq!(layout.one_a.len(), 3);
        assert!(layout.one_b.is_empty());
    }

    #[test]
    fn two_b_on_the_principal_point() {
        let rig = double_o45(OffsetMode::ZOnly);
        // At p = [0, 0, 1] every pᵀq_k = u′ sin θ + v′ cos θ is zero, so the
        // pairwise rows vanish and are replaced by e_{k+} − e_{k−} = 0.
        let stack = PixelStack::new(vec![1.0; 8], (64.0, 64.0), [0.0, 0.0]);
        let rows = build_a_prime(&rig, &stack).unwrap();
        let two_b: Vec<usize> = rows
            .tags
            .iter()
            .enumerate()
            .filter(|(_, t)| **t == RowKind::TwoB)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(two_b.len(), 4);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for (k, &i) in two_b.iter().enumerate() {
            let mut expect = [0.0; 8];
            expect[2 * k] = h;
            expect[2 * k + 1] = -h;
            let row: Vec<f64> = rows.matrix.row(i).iter().copied().collect();
            for (a, b) in row.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-15, "{row:?}");
            }
        }
    }

    #[test]
    fn two_b_coefficients_off_axis() {
        let rig = SymmetricRig::from_degrees(&[(1.0, 0.0), (2.0, 90.0)], OffsetMode::ZOnly).unwrap();
        let (u, v) = (0.3, -0.2);
        let stack = PixelStack::new(vec![1.0; 4], (0.0, 0.0), [u, v]);
        let rows = build_a_prime(&rig, &stack).unwrap();
        assert_eq!(rows.tags, vec![RowKind::TwoB]);
        // w_0 = u sin 0 + v cos 0 = v, w_1 = 2 (u sin 90° + v cos 90°) = 2u.
        let (w0, w1) = (v, 2.0 * u);
        let expect = [w1, -w1, -w0, w0];
        let norm = expect.iter().map(|c| c * c).sum::<f64>().sqrt();
        for (got, want) in rows.matrix.row(0).iter().zip(expect) {
            assert!((got - want / norm).abs() < 1e-15);
        }
    }

    #[test]
    fn two_b_only_in_z_mode() {
        for mode in [OffsetMode::None, OffsetMode::Xyz, OffsetMode::ZOnly] {
            let rig = double_o45(mode);
            let probe = ProbePixel::generic(&rig, 3);
            let rows = build_a_prime(&rig, &probe.stack).unwrap();
            let has_2b = rows.tags.contains(&RowKind::TwoB);
            let has_2a = rows.tags.contains(&RowKind::TwoA);
            assert_eq!(has_2b, mode == OffsetMode::ZOnly);
            assert_eq!(has_2a, mode != OffsetMode::ZOnly);
        }
    }

    #[test]
    fn rank_identities_on_generic_pixels() {
        let rigs = [
            (double_o45(OffsetMode::ZOnly), 4),
            (double_o45(OffsetMode::Xyz), 4),
            (
                SymmetricRig::from_degrees(&[(1.0, 0.0), (1.0, 90.0), (2.0, 45.0)], OffsetMode::Xyz).unwrap(),
                3,
            ),
        ];
        for (rig, n) in rigs {
            let layout = ConstraintLayout::new(&rig).unwrap();
            for seed in 0..20 {
                let probe = ProbePixel::generic(&rig, seed);
                let sys = layout.build(&probe.stack);
                assert_eq!(numeric_rank(&sys.a.matrix, 1e-8), 2 * n - 3);
                assert_eq!(numeric_rank(&sys.stacked(), 1e-8), 2 * n - 1);
                assert!(residual(&sys.stacked(), &probe.e) < 1e-10);
            }
        }
    }

    #[test]
    fn ring_scaled_distances_have_one_dimensional_null_space() {
        for mode in [OffsetMode::Xyz, OffsetMode::ZOnly] {
            let rig = SymmetricRig::from_degrees(&[(1.0, 0.0), (1.0, 60.0), (1.0, 120.0)], mode).unwrap();
            let layout = ConstraintLayout::new(&rig).unwrap();
            for seed in 0..10 {
                let probe = ProbePixel::generic(&rig, seed);
                assert_eq!(numeric_rank(&layout.build(&probe.stack).stacked(), 1e-8), 5);
            }
        }
    }

    #[test]
    fn collinear_rig_rank() {
        let rig = SymmetricRig::from_degrees(&[(1.0, 45.0), (2.0, 45.0)], OffsetMode::ZOnly).unwrap();
        let layout = ConstraintLayout::new(&rig).unwrap();
        assert!(layout.is_collinear());
        for seed in 0..10 {
            let probe = ProbePixel::generic(&rig, seed);
            let sys = layout.build(&probe.stack);
            assert_eq!(numeric_rank(&sys.stacked(), 1e-8), 3);
            assert!(residual(&sys.stacked(), &probe.e) < 1e-10);
        }
    }

    #[test]
    fn cubic_data_only_satisfies_a() {
        let rig = double_o45(OffsetMode::ZOnly);
        let layout = ConstraintLayout::new(&rig).unwrap();
        let cam = CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap();
        let mut previous = f64::INFINITY;
        for depth in [2.0, 3.0, 4.0, 5.0, 6.0] {
            let probe = ProbePixel::cubic_on_ray(&rig, &cam, (70.0, 35.0), depth);
            let sys = layout.build(&probe.stack);
            assert!(residual(&sys.a.matrix, &probe.e) < 1e-12);
            let relax = residual(&sys.a_prime.matrix, &probe.e);
            assert!(relax > 1e-6);
            assert!(relax < previous, "relaxation residual should shrink with distance");
            previous = relax;
        }
    }

    #[test]
    fn numeric_rank_examples() {
        assert_eq!(numeric_rank(&DMatrix::zeros(3, 3), 1e-8), 0);
        assert_eq!(numeric_rank(&DMatrix::identity(3, 3), 1e-8), 3);
        assert_eq!(numeric_rank(&DMatrix::zeros(0, 4), 1e-8), 0);
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert_eq!(numeric_rank(&m, 1e-8), 1);
    }
}
