//! Regularized least squares: matrix-free CGLS and a dense direct oracle.
//!
//! Both solve `min ‖A m − d‖² + λ ‖m‖²`. CGLS runs conjugate gradients on the
//! normal equations `(AᵀA + λI) m = Aᵀd` in factored form, so it only needs
//! forward and adjoint applications and never forms `AᵀA`.

use nalgebra::DMatrix;

use crate::error::{check_finite, check_len, Error, Result};
use crate::linop::{dot, norm, DenseOperator, LinearOperator};

#[derive(Debug, Clone, PartialEq)]
pub struct CgConfig {
    pub max_iterations: usize,
    /// Stop once `‖Aᵀ(d − A m) − λ m‖ / ‖Aᵀ d‖` drops below this.
    pub tolerance: f64,
    pub lambda: f64,
    /// Diagonal of an optional model-space preconditioner (approximate inverse
    /// of the normal matrix). `None` means identity.
    pub preconditioner: Option<Vec<f64>>,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-6,
            lambda: 0.0,
            preconditioner: None,
        }
    }
}

impl CgConfig {
    pub fn new(max_iterations: usize, tolerance: f64, lambda: f64) -> Result<Self> {
        let config = Self {
            max_iterations,
            tolerance,
            lambda,
            preconditioner: None,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_preconditioner(mut self, diagonal: Vec<f64>) -> Result<Self> {
        self.preconditioner = Some(diagonal);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::invalid(format!(
                "tolerance must be positive and finite, got {}",
                self.tolerance
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda must be nonnegative and finite, got {}",
                self.lambda
            )));
        }
        if let Some(diag) = &self.preconditioner {
            if diag.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                return Err(Error::invalid("preconditioner weights must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CgReport {
    pub iterations_run: usize,
    /// Relative normal-equation residual, starting with the initial guess.
    pub normal_residual_history: Vec<f64>,
    /// `‖A m − d‖² + λ‖m‖²` at every iterate, starting with the initial guess.
    pub objective_history: Vec<f64>,
    pub converged: bool,
}

pub fn cgls(
    op: &dyn LinearOperator,
    data: &[f64],
    config: &CgConfig,
    x0: Option<&[f64]>,
) -> Result<(Vec<f64>, CgReport)> {
    cgls_scaled(op, data, config, x0, None)
}

/// CGLS with an explicit normalization for the stopping rule.
///
/// `reference` replaces `‖Aᵀ d‖` as the denominator of the relative residual.
/// The window solves use it to hold every window to the same absolute target
/// whether or not they start from a previous estimate.
pub fn cgls_scaled(
    op: &dyn LinearOperator,
    data: &[f64],
    config: &CgConfig,
    x0: Option<&[f64]>,
    reference: Option<f64>,
) -> Result<(Vec<f64>, CgReport)> {
    config.validate()?;
    let n_model = op.model_dim();
    check_len("cgls data vector", op.data_dim(), data.len())?;
    check_finite("cgls data vector", data)?;
    if let Some(x0) = x0 {
        check_len("cgls initial model", n_model, x0.len())?;
        check_finite("cgls initial model", x0)?;
    }
    if let Some(diag) = &config.preconditioner {
        check_len("cgls preconditioner", n_model, diag.len())?;
    }
    let lambda = config.lambda;

    let mut atd = vec![0.0; n_model];
    op.adjoint_into(data, &mut atd);
    check_finite("adjoint of cgls data", &atd)?;
    let scale = match reference {
        Some(r) if r > 0.0 && r.is_finite() => r,
        Some(r) if r != 0.0 => return Err(Error::invalid(format!("bad reference norm {r}"))),
        _ => norm(&atd),
    };
    if scale == 0.0 {
        // Aᵀd = 0: the zero model is a (minimum-norm) minimizer.
        let objective = dot(data, data);
        return Ok((
            vec![0.0; n_model],
            CgReport {
                iterations_run: 0,
                normal_residual_history: vec![0.0],
                objective_history: vec![objective],
                converged: true,
            },
        ));
    }

    let mut x = x0.map_or_else(|| vec![0.0; n_model], <[f64]>::to_vec);
    let mut r = data.to_vec();
    if x0.is_some() {
        let mut ax = vec![0.0; data.len()];
        op.forward_into(&x, &mut ax);
        for (ri, ai) in r.iter_mut().zip(&ax) {
            *ri -= ai;
        }
    }
    let mut s = vec![0.0; n_model];
    normal_residual(op, &r, &x, lambda, &mut s);

    let precondition = |s: &[f64]| -> Vec<f64> {
        match &config.preconditioner {
            Some(w) => s.iter().zip(w).map(|(a, b)| a * b).collect(),
            None => s.to_vec(),
        }
    };

    let objective = |r: &[f64], x: &[f64]| dot(r, r) + lambda * dot(x, x);

    let mut z = precondition(&s);
    let mut gamma = dot(&s, &z);
    let mut p = z.clone();
    let mut q = vec![0.0; data.len()];

    let mut report = CgReport {
        iterations_run: 0,
        normal_residual_history: vec![norm(&s) / scale],
        objective_history: vec![objective(&r, &x)],
        converged: false,
    };
    report.converged = report.normal_residual_history[0] < config.tolerance;

    while !report.converged && report.iterations_run < config.max_iterations {
        op.forward_into(&p, &mut q);
        let delta = dot(&q, &q) + lambda * dot(&p, &p);
        if !(delta > 0.0) {
            break;
        }
        let alpha = gamma / delta;
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi += alpha * pi;
        }
        for (ri, qi) in r.iter_mut().zip(&q) {
            *ri -= alpha * qi;
        }
        normal_residual(op, &r, &x, lambda, &mut s);
        check_finite("cgls iterate", &s)?;

        report.iterations_run += 1;
        let relative = norm(&s) / scale;
        report.normal_residual_history.push(relative);
        report.objective_history.push(objective(&r, &x));
        if relative < config.tolerance {
            report.converged = true;
            break;
        }

        z = precondition(&s);
        let gamma_next = dot(&s, &z);
        let beta = gamma_next / gamma;
        gamma = gamma_next;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }

    check_finite("cgls solution", &x)?;
    Ok((x, report))
}

/// `s = Aᵀ r − λ x`
fn normal_residual(op: &dyn LinearOperator, r: &[f64], x: &[f64], lambda: f64, s: &mut [f64]) {
    op.adjoint_into(r, s);
    if lambda != 0.0 {
        for (si, xi) in s.iter_mut().zip(x) {
            *si -= lambda * xi;
        }
    }
}

/// Direct solution of `(AᵀA + λI) m = Aᵀ d`, for small dense problems.
///
/// Solved by Householder QR of the augmented matrix `[A; √λ I]` against
/// `[d; 0]`, which avoids squaring the condition number.
pub fn closed_form_ls(op: &DenseOperator, data: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_len("closed-form data vector", op.rows(), data.len())?;
    check_finite("closed-form data vector", data)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    let (rows, cols) = (op.rows(), op.cols());
    let extra = if lambda > 0.0 { cols } else { 0 };
    let mut aug = DMatrix::<f64>::zeros(rows + extra, cols);
    aug.view_mut((0, 0), (rows, cols))
        .copy_from(&op.to_matrix());
    let root = lambda.sqrt();
    for j in 0..extra {
        aug[(rows + j, j)] = root;
    }
    if aug.nrows() < cols {
        return Err(Error::Singular);
    }
    let mut rhs = nalgebra::DVector::<f64>::zeros(rows + extra);
    rhs.rows_mut(0, rows).copy_from_slice(data);

    let qr = aug.qr();
    let r = qr.r();
    let largest = r.diagonal().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let smallest = r
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    if largest == 0.0 || smallest <= largest * 1e3 * f64::EPSILON * (cols as f64) {
        return Err(Error::Singular);
    }
    let qt_b = qr.q().transpose() * rhs;
    let solution = r.solve_upper_triangular(&qt_b).ok_or(Error::Singular)?;
    Ok(solution.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::IdentityOperator;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn three_by_two() -> DenseOperator {
        DenseOperator::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap()
    }

    fn tight(lambda: f64) -> CgConfig {
        CgConfig::new(200, 1e-12, lambda).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn identity_without_regularization() {
        let (x, report) = cgls(
            &IdentityOperator::new(3),
            &[3.0, 0.0, 3.0],
            &tight(0.0),
            None,
        )
        .unwrap();
        assert!(close(&x, &[3.0, 0.0, 3.0], 1e-12));
        assert!(report.converged);
    }

    #[test]
    fn scalar_regularized() {
        let (x, _) = cgls(&IdentityOperator::new(1), &[1.0], &tight(1.0), None).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12);
        let direct = closed_form_ls(&DenseOperator::identity(1), &[1.0], 1.0).unwrap();
        assert!((direct[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn overdetermined_hand_solution() {
        let a = three_by_two();
        let (x, _) = cgls(&a, &[1.0, 0.0, 2.0], &tight(0.0), None).unwrap();
        assert!(close(&x, &[4.0 / 3.0, 1.0 / 3.0], 1e-12), "{x:?}");
        let direct = closed_form_ls(&a, &[1.0, 0.0, 2.0], 0.0).unwrap();
        assert!(close(&direct, &[4.0 / 3.0, 1.0 / 3.0], 1e-14), "{direct:?}");
        let id = closed_form_ls(&DenseOperator::identity(2), &[2.0, 4.0], 0.0).unwrap();
        assert!(close(&id, &[2.0, 4.0], 1e-14));
    }

    #[test]
    fn zero_data_zero_model() {
        let (x, report) = cgls(&three_by_two(), &[0.0; 3], &tight(0.0), None).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        assert!(report.converged);
        assert_eq!(report.iterations_run, 0);
    }

    #[test]
    fn rejects_non_finite_and_bad_config() {
        let a = three_by_two();
        assert!(matches!(
            cgls(&a, &[1.0, f64::NAN, 0.0], &tight(0.0), None),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            cgls(
                &a,
                &[1.0, 0.0, 0.0],
                &tight(0.0),
                Some(&[f64::INFINITY, 0.0])
            ),
            Err(Error::NonFinite(_))
        ));
        assert!(CgConfig::new(0, 1e-6, 0.0).is_err());
        assert!(CgConfig::new(10, 0.0, 0.0).is_err());
        assert!(CgConfig::new(10, 1e-6, -1.0).is_err());
    }

    #[test]
    fn singular_normal_matrix_reported() {
        let a = DenseOperator::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert!(matches!(
            closed_form_ls(&a, &[1.0, 2.0], 0.0),
            Err(Error::Singular)
        ));
        assert!(closed_form_ls(&a, &[1.0, 2.0], 0.1).is_ok());
    }

    #[test]
    fn warm_start_at_solution_stops_immediately() {
        let a = three_by_two();
        let exact = closed_form_ls(&a, &[1.0, 0.0, 2.0], 0.0).unwrap();
        let config = CgConfig::new(50, 1e-10, 0.0).unwrap();
        let (_, report) = cgls(&a, &[1.0, 0.0, 2.0], &config, Some(&exact)).unwrap();
        assert!(report.iterations_run <= 1);
        assert_eq!(
            report.normal_residual_history.len(),
            report.iterations_run + 1
        );
    }

    #[test]
    fn preconditioned_matches_plain() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let entries: Vec<f64> = (0..30 * 8)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let a = DenseOperator::new(30, 8, entries).unwrap();
        let d: Vec<f64> = (0..30).map(|_| StandardNormal.sample(&mut rng)).collect();
        let plain = cgls(&a, &d, &tight(0.1), None).unwrap().0;
        let weights: Vec<f64> = (0..8).map(|j| 1.0 + j as f64).collect();
        let pre = cgls(
            &a,
            &d,
            &tight(0.1).with_preconditioner(weights).unwrap(),
            None,
        )
        .unwrap()
        .0;
        assert!(close(&plain, &pre, 1e-9));
    }

    #[test]
    fn iteration_cap_is_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let entries: Vec<f64> = (0..40 * 20)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let a = DenseOperator::new(40, 20, entries).unwrap();
        let d: Vec<f64> = (0..40).map(|_| StandardNormal.sample(&mut rng)).collect();
        let config = CgConfig::new(3, 1e-14, 0.0).unwrap();
        let (_, report) = cgls(&a, &d, &config, None).unwrap();
        assert_eq!(report.iterations_run, 3);
        assert!(!report.converged);
        assert_eq!(report.objective_history.len(), 4);
    }
}
