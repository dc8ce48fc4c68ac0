//! Nonlinear and linear least-squares helpers shared by the spectral and sweep code.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::storage::Owned;
use nalgebra::{DMatrix, DVector, Dyn};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("least-squares fit did not converge: {0}")]
    NonConvergence(String),
    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
}

/// A model `y = f(x; p)` with an analytic parameter gradient.
pub trait Model {
    fn n_params(&self) -> usize;
    /// Value at `x` and `∂f/∂p` written into `grad`.
    fn eval(&self, x: f64, params: &[f64], grad: &mut [f64]) -> f64;
}

struct Problem<'a, M: Model> {
    model: &'a M,
    x: &'a [f64],
    y: &'a [f64],
    params: DVector<f64>,
}

impl<M: Model> LeastSquaresProblem<f64, Dyn, Dyn> for Problem<'_, M> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, p: &DVector<f64>) {
        self.params.copy_from(p);
    }

    fn params(&self) -> DVector<f64> {
        self.params.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let mut grad = vec![0.0; self.model.n_params()];
        let p = self.params.as_slice();
        Some(DVector::from_iterator(
            self.x.len(),
            self.x
                .iter()
                .zip(self.y)
                .map(|(&x, &y)| self.model.eval(x, p, &mut grad) - y),
        ))
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let n = self.model.n_params();
        let mut jac = DMatrix::zeros(self.x.len(), n);
        let mut grad = vec![0.0; n];
        let p = self.params.as_slice();
        for (i, &x) in self.x.iter().enumerate() {
            self.model.eval(x, p, &mut grad);
            for (j, g) in grad.iter().enumerate() {
                jac[(i, j)] = *g;
            }
        }
        Some(jac)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveFit {
    pub params: Vec<f64>,
    /// Sum of squared residuals.
    pub rss: f64,
    pub evaluations: usize,
}

/// Relative tolerance on the objective and the step (the MINPACK default).
const TOLERANCE: f64 = 1.49012e-8;

/// Levenberg–Marquardt fit of `model` to `(x, y)` starting from `p0`.
pub fn fit_curve<M: Model>(
    model: &M,
    x: &[f64],
    y: &[f64],
    p0: &[f64],
) -> Result<CurveFit, FitError> {
    assert_eq!(x.len(), y.len(), "x and y lengths differ");
    assert_eq!(
        p0.len(),
        model.n_params(),
        "wrong number of initial parameters"
    );
    if x.len() < p0.len() {
        return Err(FitError::InsufficientPoints {
            needed: p0.len(),
            got: x.len(),
        });
    }
    let problem = Problem {
        model,
        x,
        y,
        params: DVector::from_column_slice(p0),
    };
    let (solved, report) = LevenbergMarquardt::new()
        .with_ftol(TOLERANCE)
        .with_xtol(TOLERANCE)
        .with_gtol(0.0)
        .with_patience(200)
        .minimize(problem);
    if !report.termination.was_successful() {
        return Err(FitError::NonConvergence(format!(
            "{:?}",
            report.termination
        )));
    }
    let params: Vec<f64> = solved.params.iter().copied().collect();
    if params.iter().any(|p| !p.is_finite()) {
        return Err(FitError::NonConvergence("non-finite parameters".into()));
    }
    Ok(CurveFit {
        params,
        rss: 2.0 * report.objective_function,
        evaluations: report.number_of_evaluations,
    })
}

/// Ordinary least-squares line `y = a + b x`; returns `(a, b, R²)`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64), FitError> {
    let n = x.len();
    if n < 2 {
        return Err(FitError::InsufficientPoints { needed: 2, got: n });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(FitError::NonConvergence("degenerate abscissa".into()));
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let pred: Vec<f64> = x.iter().map(|v| a + b * v).collect();
    Ok((a, b, r_squared(y, &pred)))
}

/// Coefficient of determination clamped to `[0, 1]`.
pub fn r_squared(y: &[f64], pred: &[f64]) -> f64 {
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
}
