//! Ridge-regression state shared by every learner in the crate.
//!
//! A [`RegularizedDesign`] tracks `cov = lambda*I + sum x x^T`, its inverse,
//! and `target = sum y x`. The inverse is maintained by Sherman-Morrison
//! rank-one updates and periodically recomputed from `cov` by a Cholesky
//! solve so round-off cannot accumulate without bound.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Rank-one updates between two full recomputations of the inverse.
pub const DEFAULT_RECONDITION_PERIOD: usize = 256;
/// Largest tolerated `max|cov * cov_inv - I|` before forcing a recondition.
pub const IDENTITY_RESIDUAL_TOL: f64 = 1e-6;
/// Quadratic forms in `(-QUAD_FORM_CLAMP, 0)` are treated as round-off.
pub const QUAD_FORM_CLAMP: f64 = 1e-12;
/// Slack on the `||x|| <= 1` precondition for normalization round-off.
pub const NORM_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct RegularizedDesign {
    dim: usize,
    lambda: f64,
    cov: Matrix,
    cov_inv: Matrix,
    target: Vector,
    count: usize,
    updates_since_recondition: usize,
    recondition_period: usize,
}

impl RegularizedDesign {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("design dimension must be at least 1"));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!(
                "ridge regularizer must be positive and finite, got {lambda}"
            )));
        }
        Ok(Self {
            dim,
            lambda,
            cov: Matrix::identity(dim, dim) * lambda,
            cov_inv: Matrix::identity(dim, dim) / lambda,
            target: Vector::zeros(dim),
            count: 0,
            updates_since_recondition: 0,
            recondition_period: DEFAULT_RECONDITION_PERIOD,
        })
    }

    pub fn with_recondition_period(mut self, period: usize) -> Self {
        self.recondition_period = period.max(1);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    pub fn cov_inv(&self) -> &Matrix {
        &self.cov_inv
    }

    pub fn target(&self) -> &Vector {
        &self.target
    }

    /// Number of rank-one updates applied since construction.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn updates_since_recondition(&self) -> usize {
        self.updates_since_recondition
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "vector has dimension {}, design has {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `cov += x x^T`, with the matching Sherman-Morrison update of the inverse.
    pub fn rank_one_update(&mut self, x: &Vector) -> Result<()> {
        self.check_dim(x)?;
        let norm = x.norm();
        if !(norm <= 1.0 + NORM_SLACK) {
            return Err(Error::invalid(format!(
                "feature norm {norm} exceeds the unit bound"
            )));
        }
        self.cov.ger(1.0, x, x, 1.0);
        let inv_x = &self.cov_inv * x;
        let denom = 1.0 + x.dot(&inv_x);
        self.cov_inv.ger(-1.0 / denom, &inv_x, &inv_x, 1.0);
        self.count += 1;
        self.updates_since_recondition += 1;

        if self.updates_since_recondition >= self.recondition_period
            || self.identity_residual() > IDENTITY_RESIDUAL_TOL
        {
            self.recondition()?;
        }
        Ok(())
    }

    /// `target += y x`.
    pub fn accumulate_target(&mut self, x: &Vector, y: f64) -> Result<()> {
        self.check_dim(x)?;
        self.target.axpy(y, x, 1.0);
        Ok(())
    }

    pub fn reset_targets(&mut self) {
        self.target.fill(0.0);
    }

    /// Ridge estimate `cov^{-1} target`.
    pub fn ridge_solve(&self) -> Vector {
        &self.cov_inv * &self.target
    }

    /// `sqrt(x^T cov^{-1} x)`.
    pub fn elliptical_norm(&self, x: &Vector) -> Result<f64> {
        self.check_dim(x)?;
        let quad = quad_form(&self.cov_inv, x);
        if quad >= 0.0 {
            return Ok(quad.sqrt());
        }
        if quad > -QUAD_FORM_CLAMP {
            return Ok(0.0);
        }
        // Cached inverse is corrupt; retry against a fresh factorization.
        let fresh = self.fresh_inverse()?;
        let quad = x.dot(&(&fresh * x));
        if quad > -QUAD_FORM_CLAMP {
            Ok(quad.max(0.0).sqrt())
        } else {
            Err(Error::NumericalCorruption(format!(
                "quadratic form {quad} is negative after refactorization"
            )))
        }
    }

    /// `max |cov * cov_inv - I|`.
    pub fn identity_residual(&self) -> f64 {
        let prod = &self.cov * &self.cov_inv;
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let expected = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - expected).abs());
            }
        }
        worst
    }

    fn fresh_inverse(&self) -> Result<Matrix> {
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        sym.cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::NumericalCorruption("covariance lost positive definiteness".into()))
    }

    /// Recomputes the cached inverse directly from `cov`.
    pub fn recondition(&mut self) -> Result<()> {
        let inv = self.fresh_inverse()?;
        self.cov_inv = (&inv + inv.transpose()) * 0.5;
        self.updates_since_recondition = 0;
        Ok(())
    }
}

/// `x^T m x` without allocating.
pub(crate) fn quad_form(m: &Matrix, x: &Vector) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for j in 0..n {
        let col = m.column(j);
        let mut s = 0.0;
        for i in 0..n {
            s += col[i] * x[i];
        }
        acc += s * x[j];
    }
    acc
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    use crate::rng;

    /// Gauss-Jordan inverse with partial pivoting; independent of nalgebra's
    /// factorizations.
    pub(crate) fn gauss_jordan_inverse(m: &Matrix) -> Matrix {
        let n = m.nrows();
        let mut a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row: Vec<f64> = (0..n).map(|j| m[(i, j)]).collect();
                row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                row
            })
            .collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
                .unwrap();
            a.swap(col, pivot);
            let p = a[col][col];
            for v in a[col].iter_mut() {
                *v /= p;
            }
            for r in 0..n {
                if r != col {
                    let f = a[r][col];
                    if f != 0.0 {
                        for c in 0..2 * n {
                            a[r][c] -= f * a[col][c];
                        }
                    }
                }
            }
        }
        Matrix::from_fn(n, n, |i, j| a[i][n + j])
    }

    pub(crate) fn random_unit(rng: &mut impl Rng, dim: usize) -> Vector {
        let v = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        v / n
    }

    fn max_abs(m: &Matrix) -> f64 {
        m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    #[test]
    fn init_identity_and_scaled() {
        let d = RegularizedDesign::new(2, 1.0).unwrap();
        assert_eq!(d.cov(), &Matrix::identity(2, 2));
        assert_eq!(d.cov_inv(), &Matrix::identity(2, 2));
        let d = RegularizedDesign::new(3, 2.0).unwrap();
        assert_eq!(d.cov(), &(Matrix::identity(3, 3) * 2.0));
        assert_eq!(d.cov_inv(), &(Matrix::identity(3, 3) * 0.5));
        assert_eq!(d.count(), 0);
        assert_eq!(d.target(), &Vector::zeros(3));
    }

    #[test]
    fn init_rejects_bad_arguments() {
        assert!(matches!(RegularizedDesign::new(0, 1.0), Err(Error::InvalidArgument(_))));
        assert!(RegularizedDesign::new(2, 0.0).is_err());
        assert!(RegularizedDesign::new(2, -1.0).is_err());
        assert!(RegularizedDesign::new(2, f64::NAN).is_err());
    }

    #[test]
    fn axis_aligned_update() {
        let mut d = RegularizedDesign::new(2, 1.0).unwrap();
        d.rank_one_update(&Vector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_eq!(d.cov(), &Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]));
        assert_eq!(d.cov_inv(), &Matrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0]));
        assert_eq!(d.count(), 1);
    }

    #[test]
    fn zero_vector_update_leaves_cov() {
        let mut d = RegularizedDesign::new(2, 1.0).unwrap();
        d.rank_one_update(&Vector::zeros(2)).unwrap();
        assert_eq!(d.cov(), &Matrix::identity(2, 2));
        assert_eq!(d.count(), 1);
    }

    #[test]
    fn oversized_vector_rejected() {
        let mut d = RegularizedDesign::new(2, 1.0).unwrap();
        let err = d.rank_one_update(&Vector::from_vec(vec![1.0, 0.1]));
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
        // within slack
        let x = Vector::from_vec(vec![1.0 + 5e-10, 0.0]);
        d.rank_one_update(&x).unwrap();
        assert!(d.rank_one_update(&Vector::zeros(3)).is_err());
    }

    #[test]
    fn hundred_unit_updates_match_direct_inverse() {
        let mut rng = rng::stream(11, 0, 0);
        let mut d = RegularizedDesign::new(5, 1.0).unwrap();
        for _ in 0..100 {
            d.rank_one_update(&random_unit(&mut rng, 5)).unwrap();
        }
        let direct = gauss_jordan_inverse(d.cov());
        assert!(max_abs(&(d.cov_inv() - direct)) <= 1e-8);
    }

    #[test]
    fn accumulate_and_reset_targets() {
        let mut d = RegularizedDesign::new(2, 1.0).unwrap();
        let x = Vector::from_vec(vec![1.0, 0.0]);
        d.accumulate_target(&x, 2.0).unwrap();
        assert_eq!(d.target(), &Vector::from_vec(vec![2.0, 0.0]));
        d.accumulate_target(&x, 0.0).unwrap();
        assert_eq!(d.target(), &Vector::from_vec(vec![2.0, 0.0]));

        d.rank_one_update(&x).unwrap();
        let cov = d.cov().clone();
        d.reset_targets();
        assert_eq!(d.target(), &Vector::zeros(2));
        d.reset_targets();
        assert_eq!(d.target(), &Vector::zeros(2));
        assert_eq!(d.cov(), &cov);
        assert_eq!(d.count(), 1);
        d.accumulate_target(&x, 3.0).unwrap();
        assert_eq!(d.target(), &Vector::from_vec(vec![3.0, 0.0]));
    }

    #[test]
    fn targets_match_naive_sum() {
        let mut rng = rng::stream(5, 0, 0);
        let mut d = RegularizedDesign::new(3, 1.0).unwrap();
        let mut naive = [0.0f64; 3];
        for _ in 0..10 {
            let x = random_unit(&mut rng, 3);
            let y: f64 = rng.random_range(-2.0..2.0);
            d.accumulate_target(&x, y).unwrap();
            for i in 0..3 {
                naive[i] += x[i] * y;
            }
        }
        for i in 0..3 {
            assert!((d.target()[i] - naive[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn ridge_solve_cases() {
        let d = RegularizedDesign::new(3, 1.0).unwrap();
        assert_eq!(d.ridge_solve(), Vector::zeros(3));

        let mut d = RegularizedDesign::new(1, 1.0).unwrap();
        let x = Vector::from_vec(vec![1.0]);
        d.rank_one_update(&x).unwrap();
        d.accumulate_target(&x, 2.0).unwrap();
        assert!((d.ridge_solve()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ridge_solve_matches_normal_equations() {
        let mut rng = rng::stream(9, 0, 0);
        let mut d = RegularizedDesign::new(4, 1.0).unwrap();
        let mut gram = Matrix::identity(4, 4);
        let mut rhs = Vector::zeros(4);
        for _ in 0..50 {
            let x = random_unit(&mut rng, 4) * rng.random_range(0.1..1.0);
            let y: f64 = rng.random_range(-1.0..1.0);
            d.rank_one_update(&x).unwrap();
            d.accumulate_target(&x, y).unwrap();
            gram += &x * x.transpose();
            rhs += &x * y;
        }
        let w = gauss_jordan_inverse(&gram) * rhs;
        assert!((d.ridge_solve() - w).amax() <= 1e-8);
    }

    #[test]
    fn elliptical_norm_cases() {
        let mut rng = rng::stream(3, 0, 0);
        let d = RegularizedDesign::new(4, 1.0).unwrap();
        let x = random_unit(&mut rng, 4);
        assert!((d.elliptical_norm(&x).unwrap() - 1.0).abs() < 1e-12);
        let d = RegularizedDesign::new(4, 4.0).unwrap();
        assert!((d.elliptical_norm(&x).unwrap() - 0.5).abs() < 1e-12);

        let mut d = RegularizedDesign::new(3, 1.0).unwrap();
        for _ in 0..20 {
            d.rank_one_update(&random_unit(&mut rng, 3)).unwrap();
        }
        let inv = gauss_jordan_inverse(d.cov());
        let x = random_unit(&mut rng, 3);
        let expected = x.dot(&(&inv * &x)).sqrt();
        assert!((d.elliptical_norm(&x).unwrap() - expected).abs() <= 1e-8);
    }

    #[test]
    fn corrupted_inverse_recovers_through_refactorization() {
        let mut d = RegularizedDesign::new(2, 1.0).unwrap();
        d.cov_inv = -Matrix::identity(2, 2);
        let x = Vector::from_vec(vec![1.0, 0.0]);
        assert!((d.elliptical_norm(&x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn periodic_recondition_resets_counter() {
        let mut rng = rng::stream(4, 0, 0);
        let mut d = RegularizedDesign::new(3, 1.0).unwrap().with_recondition_period(8);
        for _ in 0..20 {
            d.rank_one_update(&random_unit(&mut rng, 3)).unwrap();
        }
        assert_eq!(d.count(), 20);
        assert_eq!(d.updates_since_recondition(), 4);
        assert!(d.identity_residual() <= IDENTITY_RESIDUAL_TOL);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn unit_vectors(dim: usize, max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, dim), 1..max)
        }

        fn clip(v: &[f64]) -> Vector {
            let x = Vector::from_column_slice(v);
            let n = x.norm();
            if n > 1.0 {
                x / n
            } else {
                x
            }
        }

        proptest! {
            #[test]
            fn invariants_hold_along_any_sequence(seq in unit_vectors(4, 120), probe in prop::collection::vec(-1.0f64..1.0, 4)) {
                let probe = clip(&probe);
                let mut d = RegularizedDesign::new(4, 1.0).unwrap();
                let mut prev_norm = d.elliptical_norm(&probe).unwrap();
                let mut prev_det = d.cov().determinant();
                for (i, v) in seq.iter().enumerate() {
                    d.rank_one_update(&clip(v)).unwrap();
                    prop_assert_eq!(d.count(), i + 1);
                    prop_assert!(d.identity_residual() <= IDENTITY_RESIDUAL_TOL);
                    let asym = (d.cov() - d.cov().transpose()).amax();
                    prop_assert!(asym <= 1e-10);
                    let min_eig = d.cov().clone().symmetric_eigenvalues().min();
                    prop_assert!(min_eig >= d.lambda() - 1e-8);
                    let norm = d.elliptical_norm(&probe).unwrap();
                    prop_assert!(norm <= prev_norm + 1e-12);
                    let det = d.cov().determinant();
                    prop_assert!(det >= prev_det * (1.0 - 1e-12));
                    prev_norm = norm;
                    prev_det = det;
                }
                let direct = gauss_jordan_inverse(d.cov());
                prop_assert!((d.cov_inv() - direct).amax() <= 1e-7);
            }
        }
    }
}
