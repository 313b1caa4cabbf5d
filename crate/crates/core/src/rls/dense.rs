//! Explicit-matrix recursive least squares.
//!
//! Keeps `P = (Σ AᵢᵀAᵢ + λI)⁻¹` and the running estimate, and folds in new
//! rows through the gain `P Aᵀ` applied to the innovation `d − A m`. Only
//! usable when the model is small enough to hold `P` densely; the matrix-free
//! path lives in [`super::block`].

use nalgebra::{DMatrix, DVector};

use crate::error::{check_finite, check_len, Error, Result};
use crate::linop::DenseOperator;

#[derive(Debug, Clone, PartialEq)]
pub struct RlsState {
    pub p_matrix: DMatrix<f64>,
    pub estimate: DVector<f64>,
    pub samples_seen: usize,
}

/// Inverts a symmetric positive definite matrix, refusing numerically singular input.
fn spd_inverse(normal: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = normal.nrows();
    let largest = normal.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let chol = normal.cholesky().ok_or(Error::Singular)?;
    let smallest_pivot = chol
        .l_dirty()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |a, v| a.min(v * v));
    if largest == 0.0 || smallest_pivot <= largest * 1e3 * f64::EPSILON * n as f64 {
        return Err(Error::Singular);
    }
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

impl RlsState {
    /// Batch start from a first block: `P = (A₀ᵀA₀ + λI)⁻¹`, `m = P A₀ᵀ d₀`.
    pub fn init(a0: &DenseOperator, d0: &[f64], lambda: f64) -> Result<Self> {
        check_len("rls initial data", a0.rows(), d0.len())?;
        check_finite("rls initial data", d0)?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        let a = a0.to_matrix();
        let mut normal = a.transpose() * &a;
        for i in 0..a0.cols() {
            normal[(i, i)] += lambda;
        }
        let p_matrix = spd_inverse(normal)?;
        let estimate = &p_matrix * (a.transpose() * DVector::from_column_slice(d0));
        Ok(Self {
            p_matrix,
            estimate,
            samples_seen: a0.rows(),
        })
    }

    pub fn model_dim(&self) -> usize {
        self.estimate.len()
    }

    /// Adds a block of rows: `P₁⁻¹ = P₀⁻¹ + A₁ᵀA₁`, then
    /// `m₁ = m₀ + P₁ A₁ᵀ (d₁ − A₁ m₀)`.
    ///
    /// `P₁` is obtained by inverting the updated normal matrix directly; the
    /// inversion-free route is [`RlsState::update_rank1`].
    pub fn update_block(&self, a1: &DenseOperator, d1: &[f64]) -> Result<Self> {
        check_len("rls update operator columns", self.model_dim(), a1.cols())?;
        check_len("rls update data", a1.rows(), d1.len())?;
        check_finite("rls update data", d1)?;
        check_finite("rls update operator", a1.entries())?;

        let a = a1.to_matrix();
        let normal = spd_inverse(self.p_matrix.clone())? + a.transpose() * &a;
        let p_matrix = spd_inverse(normal)?;
        let innovation = DVector::from_column_slice(d1) - &a * &self.estimate;
        let gain = &p_matrix * a.transpose();
        let estimate = &self.estimate + gain * innovation;
        Ok(Self {
            p_matrix,
            estimate,
            samples_seen: self.samples_seen + a1.rows(),
        })
    }

    /// Single-row update through the Sherman-Morrison identity; no inversion.
    pub fn update_rank1(&self, row: &[f64], value: f64) -> Result<Self> {
        check_len("rank-1 update row", self.model_dim(), row.len())?;
        check_finite("rank-1 update row", row)?;
        if !value.is_finite() {
            return Err(Error::NonFinite("rank-1 update value"));
        }
        let a = DVector::from_column_slice(row);
        let pa = &self.p_matrix * &a;
        let denominator = 1.0 + a.dot(&pa);
        if !(denominator > f64::EPSILON) {
            return Err(Error::DegenerateDenominator(denominator));
        }
        let mut p_matrix = &self.p_matrix - (&pa * pa.transpose()) / denominator;
        symmetrize(&mut p_matrix);
        let gain = &p_matrix * &a;
        let innovation = value - a.dot(&self.estimate);
        let estimate = &self.estimate + gain * innovation;
        Ok(Self {
            p_matrix,
            estimate,
            samples_seen: self.samples_seen + 1,
        })
    }

    pub fn estimate_vec(&self) -> Vec<f64> {
        self.estimate.iter().copied().collect()
    }
}

pub fn rls_init(a0: &DenseOperator, d0: &[f64], lambda: f64) -> Result<RlsState> {
    RlsState::init(a0, d0, lambda)
}

pub fn rls_update_block(state: &RlsState, a1: &DenseOperator, d1: &[f64]) -> Result<RlsState> {
    state.update_block(a1, d1)
}

pub fn rls_update_rank1_mil(state: &RlsState, row: &[f64], value: f64) -> Result<RlsState> {
    state.update_rank1(row, value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: &DVector<f64>, b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn init_identity() {
        let s = rls_init(&DenseOperator::identity(2), &[1.0, 0.0], 0.0).unwrap();
        assert!(approx(&s.estimate, &[1.0, 0.0], 1e-15));
        assert_eq!(s.p_matrix, DMatrix::identity(2, 2));
        assert_eq!(s.samples_seen, 2);
    }

    #[test]
    fn init_scalar_cases() {
        let s = rls_init(&DenseOperator::identity(1), &[1.0], 1.0).unwrap();
        assert!((s.p_matrix[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((s.estimate[0] - 0.5).abs() < 1e-15);

        let two = DenseOperator::new(1, 1, vec![2.0]).unwrap();
        let s = rls_init(&two, &[4.0], 0.0).unwrap();
        assert!((s.p_matrix[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((s.estimate[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn init_singular() {
        let a = DenseOperator::from_rows(&[vec![1.0, 1.0]]).unwrap();
        assert!(matches!(rls_init(&a, &[1.0], 0.0), Err(Error::Singular)));
        assert!(rls_init(&a, &[1.0], 0.5).is_ok());
    }

    #[test]
    fn block_update_by_hand() {
        let s = rls_init(&DenseOperator::identity(2), &[1.0, 0.0], 0.0).unwrap();
        let a1 = DenseOperator::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let s1 = rls_update_block(&s, &a1, &[2.0]).unwrap();
        assert!(approx(&s1.estimate, &[4.0 / 3.0, 1.0 / 3.0], 1e-14));
        assert_eq!(s1.samples_seen, 3);
    }

    #[test]
    fn zero_innovation_keeps_estimate() {
        let s = rls_init(&DenseOperator::identity(2), &[1.0, -2.0], 0.0).unwrap();
        let zero_rows = DenseOperator::new(2, 2, vec![0.0; 4]).unwrap();
        let s1 = rls_update_block(&s, &zero_rows, &[0.0, 0.0]).unwrap();
        assert!(approx(&s1.estimate, &[1.0, -2.0], 1e-15));

        let a1 = DenseOperator::from_rows(&[vec![3.0, 1.0]]).unwrap();
        let predicted = 3.0 * 1.0 + 1.0 * -2.0;
        let s2 = rls_update_block(&s, &a1, &[predicted]).unwrap();
        assert!(approx(&s2.estimate, &[1.0, -2.0], 1e-14));
        assert!((&s2.p_matrix - &s.p_matrix).norm() > 0.1);
    }

    #[test]
    fn rank1_by_hand_and_zero_row() {
        let s = rls_init(&DenseOperator::identity(2), &[1.0, 0.0], 0.0).unwrap();
        let s1 = rls_update_rank1_mil(&s, &[1.0, 1.0], 2.0).unwrap();
        assert!(approx(&s1.estimate, &[4.0 / 3.0, 1.0 / 3.0], 1e-14));

        let s2 = rls_update_rank1_mil(&s, &[0.0, 0.0], 5.0).unwrap();
        assert_eq!(s2.estimate, s.estimate);
        assert_eq!(s2.p_matrix, s.p_matrix);
    }

    #[test]
    fn rank1_repeated_row_converges_to_data() {
        let mut s = rls_init(&DenseOperator::identity(3), &[0.2, -1.0, 0.5], 0.0).unwrap();
        let row = [1.0, 2.0, -1.0];
        for _ in 0..100 {
            s = rls_update_rank1_mil(&s, &row, 7.0).unwrap();
        }
        let fitted: f64 = row.iter().zip(s.estimate.iter()).map(|(a, m)| a * m).sum();
        // Residual decays like 1/(1 + n aᵀPa); after 100 repeats it is ~1% of the start.
        let start = 1.0 * 0.2 + 2.0 * -1.0 + -1.0 * 0.5;
        assert!(
            (fitted - 7.0).abs() < 0.02 * (7.0f64 - start).abs(),
            "{fitted}"
        );
    }

    #[test]
    fn rank1_degenerate_denominator() {
        let mut s = rls_init(&DenseOperator::identity(1), &[0.0], 0.0).unwrap();
        s.p_matrix[(0, 0)] = -1.0;
        assert!(matches!(
            rls_update_rank1_mil(&s, &[1.0], 1.0),
            Err(Error::DegenerateDenominator(_))
        ));
    }

    #[test]
    fn rejects_mismatched_update() {
        let s = rls_init(&DenseOperator::identity(2), &[1.0, 0.0], 0.0).unwrap();
        assert!(rls_update_block(&s, &DenseOperator::identity(3), &[0.0; 3]).is_err());
        assert!(rls_update_rank1_mil(&s, &[1.0], 0.0).is_err());
        assert!(rls_update_block(&s, &DenseOperator::identity(2), &[f64::NAN, 0.0]).is_err());
    }
}
