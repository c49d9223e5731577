//! Finite-difference discretization of the domain with homogeneous Neumann
//! closure, the trapezoid inner product, and the input/output operators.

mod io;
mod weights;

pub use io::{build_io_operators, BumpChannel, IoLayout, IoMode, IoOperators, SensorChannel};
pub use weights::{adjoint, fold_operator, unfold_operator, Weights};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Largest supported node count for dense storage.
pub const MAX_NODES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dimension: usize,
    pub extent: f64,
    pub nodes_per_axis: usize,
}

impl GridSpec {
    pub fn new(dimension: usize, extent: f64, nodes_per_axis: usize) -> Result<Self> {
        let spec = Self {
            dimension,
            extent,
            nodes_per_axis,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dimension == 1 || self.dimension == 2) {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1 or 2, got {}",
                self.dimension
            )));
        }
        if self.nodes_per_axis < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 nodes per axis, got {}",
                self.nodes_per_axis
            )));
        }
        if !(self.extent > 0.0 && self.extent.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "extent must be positive, got {}",
                self.extent
            )));
        }
        if self.node_count() > MAX_NODES {
            return Err(Error::InvalidGrid(format!(
                "{} nodes exceeds the dense limit {MAX_NODES}",
                self.node_count()
            )));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis.pow(self.dimension as u32)
    }

    pub fn spacing(&self) -> f64 {
        self.extent / (self.nodes_per_axis - 1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct Discretization {
    pub spec: GridSpec,
    pub spacing: f64,
    /// Node positions; 2D nodes are ordered with x varying fastest.
    pub node_coords: Vec<[f64; 2]>,
    pub weights: Weights,
    /// Realizes `-laplace` with mirrored ghost nodes at the boundary.
    pub laplacian: DMatrix<f64>,
}

fn axis_operator(n: usize, h: f64) -> (DMatrix<f64>, DVector<f64>) {
    let inv_h2 = 1.0 / (h * h);
    let mut lap = DMatrix::zeros(n, n);
    for i in 0..n {
        lap[(i, i)] = 2.0 * inv_h2;
        // mirrored ghost node: s_{-1} = s_1, s_N = s_{N-2}
        let left = if i == 0 { 1 } else { i - 1 };
        let right = if i == n - 1 { n - 2 } else { i + 1 };
        lap[(i, left)] -= inv_h2;
        lap[(i, right)] -= inv_h2;
    }
    let mut w = DVector::from_element(n, h);
    w[0] = h / 2.0;
    w[n - 1] = h / 2.0;
    (lap, w)
}

pub fn build_grid(spec: GridSpec) -> Result<Discretization> {
    spec.validate()?;
    let n = spec.nodes_per_axis;
    let h = spec.spacing();
    let (lap1, w1) = axis_operator(n, h);
    let axis: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let (laplacian, weights, node_coords) = if spec.dimension == 1 {
        (lap1, w1, axis.iter().map(|&x| [x, 0.0]).collect())
    } else {
        let eye = DMatrix::<f64>::identity(n, n);
        // index = iy * n + ix
        let lap = lap1.kronecker(&eye) + eye.kronecker(&lap1);
        let w = w1.kronecker(&w1);
        let coords = (0..n * n).map(|k| [axis[k % n], axis[k / n]]).collect();
        (lap, w, coords)
    };
    Ok(Discretization {
        spec,
        spacing: h,
        node_coords,
        weights: Weights::new(weights),
        laplacian,
    })
}

impl Discretization {
    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    pub fn apply_laplacian(&self, field: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.node_count(), field.len(), "laplacian input")?;
        Ok(&self.laplacian * field)
    }

    pub fn inner_product(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        self.weights.inner(u, v)
    }

    pub fn norm(&self, u: &DVector<f64>) -> f64 {
        self.weights.norm(u)
    }

    /// Gershgorin bound on the Laplacian spectrum.
    pub fn laplacian_bound(&self) -> f64 {
        crate::linalg::gershgorin_bound(&self.laplacian)
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.spec.dimension
            && point
                .iter()
                .all(|&x| x.is_finite() && (0.0..=self.spec.extent).contains(&x))
    }

    pub fn constant(&self, value: f64) -> DVector<f64> {
        DVector::from_element(self.node_count(), value)
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> DVector<f64> {
        let d = self.spec.dimension;
        DVector::from_iterator(
            self.node_count(),
            self.node_coords.iter().map(|c| f(&c[..d])),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eigenvalues;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid1(n: usize) -> Discretization {
        build_grid(GridSpec::new(1, 1.0, n).unwrap()).unwrap()
    }

    #[test]
    fn two_node_trapezoid_weights() {
        let d = grid1(2);
        assert_eq!(d.spacing, 1.0);
        // h/2 at each end of a single interval
        assert_eq!(d.weights.as_vector().as_slice(), &[0.5, 0.5]);
        let d = build_grid(GridSpec::new(1, 0.5, 2).unwrap()).unwrap();
        assert_eq!(d.spacing, 0.5);
        assert_eq!(d.weights.as_vector().as_slice(), &[0.25, 0.25]);
    }

    #[test]
    fn weights_sum_to_extent() {
        let d = grid1(11);
        assert!((d.weights.total() - 1.0).abs() < 1e-15);
        let d2 = build_grid(GridSpec::new(2, 2.0, 7).unwrap()).unwrap();
        assert!((d2.weights.total() - 4.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(GridSpec::new(1, 1.0, 1), Err(Error::InvalidGrid(_))));
        assert!(matches!(GridSpec::new(1, 0.0, 5), Err(Error::InvalidGrid(_))));
        assert!(matches!(GridSpec::new(3, 1.0, 5), Err(Error::InvalidGrid(_))));
        let bad = GridSpec {
            dimension: 1,
            extent: -1.0,
            nodes_per_axis: 4,
        };
        assert!(build_grid(bad).is_err());
    }

    #[test]
    fn two_dimensional_row_sums_vanish() {
        let d = build_grid(GridSpec::new(2, 1.0, 4).unwrap()).unwrap();
        assert_eq!(d.node_count(), 16);
        for r in d.laplacian.row_iter() {
            assert!(r.sum().abs() < 1e-12);
        }
    }

    #[test]
    fn constant_field_is_null_mode() {
        let d = grid1(9);
        let z = d.apply_laplacian(&d.constant(1.0)).unwrap();
        assert!(z.amax() < 1e-12);
    }

    #[test]
    fn three_point_stencil() {
        let d = grid1(3);
        let out = d
            .apply_laplacian(&DVector::from_vec(vec![0.0, 1.0, 0.0]))
            .unwrap();
        assert!((out[1] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_is_first_neumann_mode() {
        let d = grid1(65);
        let f = d.sample(|x| (PI * x[0]).cos());
        let af = d.apply_laplacian(&f).unwrap();
        let err = (&af - &f * (PI * PI)).amax() / (PI * PI);
        assert!(err < 1e-2, "{err}");
    }

    #[test]
    fn dimension_mismatch() {
        let d = grid1(5);
        let bad = DVector::zeros(4);
        assert!(matches!(
            d.apply_laplacian(&bad),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(d.inner_product(&bad, &d.constant(1.0)).is_err());
    }

    #[test]
    fn inner_product_of_constants() {
        let d = grid1(17);
        let one = d.constant(1.0);
        assert!((d.inner_product(&one, &one).unwrap() - 1.0).abs() < 1e-14);
        // trapezoid rule integrates linear fields exactly: int_0^1 x dx = 1/2
        let x = d.sample(|p| p[0]);
        assert!((d.inner_product(&x, &one).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn eigenvalues_converge_at_second_order() {
        let mut errs = Vec::new();
        for n in [17usize, 33, 65] {
            let d = grid1(n);
            let folded = fold_operator(&d.laplacian, &d.weights, &d.weights);
            let ev = sym_eigenvalues(&folded);
            assert!(ev[0].abs() < 1e-9);
            errs.push([
                (ev[1] - PI * PI).abs(),
                (ev[2] - 4.0 * PI * PI).abs(),
            ]);
        }
        for k in 0..2 {
            for w in errs.windows(2) {
                let ratio = w[0][k] / w[1][k];
                assert!(ratio > 3.5 && ratio < 4.5, "mode {} ratio {ratio}", k + 1);
            }
        }
    }

    proptest! {
        #[test]
        fn laplacian_is_self_adjoint_and_psd(
            n in 2usize..12,
            two_d in any::<bool>(),
            extent in 0.3f64..3.0,
            seed in proptest::collection::vec(-1.0f64..1.0, 288),
        ) {
            let dim = if two_d { 2 } else { 1 };
            let d = build_grid(GridSpec::new(dim, extent, n).unwrap()).unwrap();
            let m = d.node_count();
            let u = DVector::from_iterator(m, seed.iter().copied().take(m));
            let v = DVector::from_iterator(m, seed.iter().rev().copied().take(m));
            let au = d.apply_laplacian(&u).unwrap();
            let av = d.apply_laplacian(&v).unwrap();
            let lhs = d.inner_product(&au, &v).unwrap();
            let rhs = d.inner_product(&u, &av).unwrap();
            let scale = d.norm(&u) * d.norm(&v) * d.laplacian_bound();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1e-300));
            prop_assert!(d.inner_product(&au, &u).unwrap() >= -1e-12 * d.norm_sq_scale(&u));
            prop_assert!((d.inner_product(&u, &v).unwrap() - d.inner_product(&v, &u).unwrap()).abs() < 1e-14);
            prop_assert!(d.inner_product(&u, &u).unwrap() >= 0.0);
        }
    }

    impl Discretization {
        fn norm_sq_scale(&self, u: &DVector<f64>) -> f64 {
            self.weights.norm_sq(u) * self.laplacian_bound()
        }
    }
}
