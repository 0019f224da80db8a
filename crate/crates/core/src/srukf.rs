//! Square-root unscented Kalman filter engine.
//!
//! Beliefs carry the lower-triangular Cholesky factor `S` of the covariance
//! (`P = S Sᵀ`) and every operation returns a new belief; nothing is mutated
//! in place. The time update re-triangularizes the weighted sigma-point
//! deviations with a QR decomposition and folds in the central point with a
//! rank-one update or downdate. The measurement update supports per-component
//! gating: gated innovation components are forced to exactly zero before the
//! gain is applied, while the covariance update keeps the full gain.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::scalar::{lit, to_f64, Real};

/// Regularization added when a downdate has to be recovered by refactoring.
pub const DOWNDATE_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SrukfError {
    #[error("matrix is not positive definite ({context})")]
    NotPositiveDefinite { context: &'static str },
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid unscented transform parameters: {0}")]
    InvalidParameters(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
}

/// Scaled unscented transform parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtParams<T> {
    pub alpha: T,
    pub beta: T,
    pub kappa: T,
}

impl<T: Real> Default for UtParams<T> {
    fn default() -> Self {
        Self {
            alpha: lit(0.1),
            beta: lit(2.0),
            kappa: T::zero(),
        }
    }
}

/// Mean and lower-triangular square-root covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct SqrtBelief<T: Real> {
    pub mean: DVector<T>,
    pub chol: DMatrix<T>,
}

impl<T: Real> SqrtBelief<T> {
    /// Validates shape, triangularity and a strictly positive diagonal.
    pub fn new(mean: DVector<T>, chol: DMatrix<T>) -> Result<Self, SrukfError> {
        let n = mean.len();
        if chol.nrows() != n || chol.ncols() != n {
            return Err(SrukfError::Dimension {
                context: "belief factor",
                expected: n,
                got: chol.nrows(),
            });
        }
        for i in 0..n {
            if !(chol[(i, i)] > T::zero()) {
                return Err(SrukfError::NotPositiveDefinite {
                    context: "belief factor diagonal",
                });
            }
            for j in i + 1..n {
                if chol[(i, j)] != T::zero() {
                    return Err(SrukfError::InvalidParameters(
                        "belief factor must be lower triangular".into(),
                    ));
                }
            }
        }
        Ok(Self { mean, chol })
    }

    /// Belief with a diagonal factor.
    pub fn from_std(mean: DVector<T>, std: &DVector<T>) -> Result<Self, SrukfError> {
        Self::new(mean, DMatrix::from_diagonal(std))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn covariance(&self) -> DMatrix<T> {
        &self.chol * self.chol.transpose()
    }
}

/// Sigma points (one column per point) with their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSet<T: Real> {
    pub points: DMatrix<T>,
    pub mean_weights: DVector<T>,
    pub cov_weights: DVector<T>,
}

impl<T: Real> SigmaSet<T> {
    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.ncols() == 0
    }

    pub fn weighted_mean(&self) -> DVector<T> {
        weighted_mean(&self.points, &self.mean_weights)
    }
}

/// Per-component measurement gate. `true` lets the innovation through.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateMask(pub Vec<bool>);

impl GateMask {
    pub fn all(m: usize) -> Self {
        Self(vec![true; m])
    }

    pub fn none(m: usize) -> Self {
        Self(vec![false; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn set_range(&mut self, range: std::ops::Range<usize>, open: bool) {
        for g in &mut self.0[range] {
            *g = open;
        }
    }
}

/// Posterior of a measurement update together with the innovation that
/// was actually applied (gated components are exactly zero).
#[derive(Debug, Clone)]
pub struct UpdateOutcome<T: Real> {
    pub belief: SqrtBelief<T>,
    pub innovation: DVector<T>,
    pub predicted: DVector<T>,
}

fn weighted_mean<T: Real>(points: &DMatrix<T>, w: &DVector<T>) -> DVector<T> {
    let mut m = DVector::zeros(points.nrows());
    for (i, col) in points.column_iter().enumerate() {
        m.axpy(w[i], &col, T::one());
    }
    m
}

fn weights<T: Real>(n: usize, p: &UtParams<T>) -> Result<(T, DVector<T>, DVector<T>), SrukfError> {
    if !(p.alpha > T::zero() && p.alpha <= T::one()) {
        return Err(SrukfError::InvalidParameters(
            "alpha must lie in (0, 1]".into(),
        ));
    }
    if p.kappa < T::zero() {
        return Err(SrukfError::InvalidParameters(
            "kappa must be non-negative".into(),
        ));
    }
    let nf: T = lit(n as f64);
    let lambda = p.alpha * p.alpha * (nf + p.kappa) - nf;
    let scale = nf + lambda;
    let wi = T::one() / (lit::<T>(2.0) * scale);
    let mut wm = DVector::from_element(2 * n + 1, wi);
    let mut wc = wm.clone();
    wm[0] = lambda / scale;
    wc[0] = lambda / scale + (T::one() - p.alpha * p.alpha + p.beta);
    Ok((scale.sqrt(), wm, wc))
}

/// Scaled sigma points `mean`, `mean ± γ S[:, i]`.
pub fn sigma_points<T: Real>(
    belief: &SqrtBelief<T>,
    params: &UtParams<T>,
) -> Result<SigmaSet<T>, SrukfError> {
    let n = belief.dim();
    for i in 0..n {
        if !(belief.chol[(i, i)] > T::zero()) {
            return Err(SrukfError::NotPositiveDefinite {
                context: "sigma point factor",
            });
        }
    }
    let (gamma, mean_weights, cov_weights) = weights(n, params)?;
    let mut points = DMatrix::zeros(n, 2 * n + 1);
    points.set_column(0, &belief.mean);
    for i in 0..n {
        let d = belief.chol.column(i) * gamma;
        points.set_column(1 + i, &(&belief.mean + &d));
        points.set_column(1 + n + i, &(&belief.mean - &d));
    }
    Ok(SigmaSet {
        points,
        mean_weights,
        cov_weights,
    })
}

/// Rank-one modification of a lower-triangular factor: returns the factor of
/// `S Sᵀ + sign · v vᵀ`. `sign` must be `+1` or `-1`.
pub fn chol_rank1<T: Real>(
    s: &DMatrix<T>,
    v: &DVector<T>,
    sign: T,
) -> Result<DMatrix<T>, SrukfError> {
    let n = s.nrows();
    if v.len() != n {
        return Err(SrukfError::Dimension {
            context: "rank-one vector",
            expected: n,
            got: v.len(),
        });
    }
    let mut l = s.clone();
    let mut v = v.clone();
    for k in 0..n {
        let lkk = l[(k, k)];
        let vk = v[k];
        if vk == T::zero() {
            continue;
        }
        let r2 = lkk * lkk + sign * vk * vk;
        if !(r2 > T::zero()) || !(lkk > T::zero()) {
            return Err(SrukfError::NotPositiveDefinite {
                context: "cholesky downdate",
            });
        }
        let r = r2.sqrt();
        let c = r / lkk;
        let sn = vk / lkk;
        l[(k, k)] = r;
        for i in k + 1..n {
            let lik = (l[(i, k)] + sign * sn * v[i]) / c;
            v[i] = c * v[i] - sn * lik;
            l[(i, k)] = lik;
        }
    }
    Ok(l)
}

/// Downdate with the regularized-refactor fallback.
fn downdate_or_recover<T: Real>(s: &DMatrix<T>, v: &DVector<T>) -> Result<DMatrix<T>, SrukfError> {
    match chol_rank1(s, v, -T::one()) {
        Ok(l) => Ok(l),
        Err(_) => {
            log::warn!(
                "cholesky downdate lost positive definiteness; refactoring with regularization"
            );
            let n = s.nrows();
            let mut p = s * s.transpose() - v * v.transpose();
            p = (&p + p.transpose()) * lit::<T>(0.5);
            for i in 0..n {
                p[(i, i)] += lit::<T>(DOWNDATE_EPSILON);
            }
            p.cholesky()
                .map(|c| c.l())
                .ok_or(SrukfError::NotPositiveDefinite {
                    context: "regularized refactor after downdate",
                })
        }
    }
}

/// Applies the central-point weight to a factor.
fn fold_central<T: Real>(
    s: DMatrix<T>,
    dev0: &DVector<T>,
    wc0: T,
) -> Result<DMatrix<T>, SrukfError> {
    let v = dev0 * wc0.abs().sqrt();
    if wc0 >= T::zero() {
        chol_rank1(&s, &v, T::one())
    } else {
        downdate_or_recover(&s, &v)
    }
}

/// Lower-triangular factor of `Σ_{i≥1} w_i d_i d_iᵀ + N Nᵀ` via QR of the
/// stacked, transposed deviations.
fn qr_factor<T: Real>(
    devs: &DMatrix<T>,
    w1: T,
    noise_sqrt: &DMatrix<T>,
) -> Result<DMatrix<T>, SrukfError> {
    let n = devs.nrows();
    let k = devs.ncols() - 1;
    let sw = w1.sqrt();
    let mut stacked = DMatrix::zeros(k + noise_sqrt.ncols(), n);
    for i in 0..k {
        stacked.row_mut(i).tr_copy_from(&(devs.column(i + 1) * sw));
    }
    for j in 0..noise_sqrt.ncols() {
        stacked.row_mut(k + j).tr_copy_from(&noise_sqrt.column(j));
    }
    let r = stacked.qr().r();
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        let sign = if r[(i, i)] < T::zero() {
            -T::one()
        } else {
            T::one()
        };
        for j in i..n {
            s[(j, i)] = r[(i, j)] * sign;
        }
    }
    Ok(s)
}

fn check_factor<T: Real>(s: &DMatrix<T>, context: &'static str) -> Result<(), SrukfError> {
    for i in 0..s.nrows() {
        if !s[(i, i)].is_finite() {
            return Err(SrukfError::NonFinite(context));
        }
        if !(s[(i, i)] > T::zero()) {
            return Err(SrukfError::NotPositiveDefinite { context });
        }
    }
    Ok(())
}

fn check_square<T: Real>(
    m: &DMatrix<T>,
    n: usize,
    context: &'static str,
) -> Result<(), SrukfError> {
    if m.nrows() != n || m.ncols() != n {
        return Err(SrukfError::Dimension {
            context,
            expected: n,
            got: m.nrows(),
        });
    }
    Ok(())
}

/// Time update through `process` with additive noise factor `process_noise_sqrt`.
pub fn predict<T, F>(
    belief: &SqrtBelief<T>,
    process: F,
    process_noise_sqrt: &DMatrix<T>,
    params: &UtParams<T>,
) -> Result<SqrtBelief<T>, SrukfError>
where
    T: Real,
    F: Fn(&DVector<T>) -> DVector<T>,
{
    let n = belief.dim();
    check_square(process_noise_sqrt, n, "process noise factor")?;
    let sigma = sigma_points(belief, params)?;
    let mut propagated = DMatrix::zeros(n, sigma.len());
    for (i, col) in sigma.points.column_iter().enumerate() {
        let y = process(&col.into_owned());
        if y.len() != n {
            return Err(SrukfError::Dimension {
                context: "process output",
                expected: n,
                got: y.len(),
            });
        }
        propagated.set_column(i, &y);
    }
    let mean = weighted_mean(&propagated, &sigma.mean_weights);
    if mean.iter().any(|x| !x.is_finite()) {
        return Err(SrukfError::NonFinite("process model"));
    }
    let mut devs = propagated;
    for mut col in devs.column_iter_mut() {
        col -= &mean;
    }
    let s = qr_factor(&devs, sigma.cov_weights[1], process_noise_sqrt)?;
    let s = fold_central(s, &devs.column(0).into_owned(), sigma.cov_weights[0])?;
    check_factor(&s, "predicted factor")?;
    Ok(SqrtBelief { mean, chol: s })
}

/// Measurement update. Components with `gate.0[i] == false` contribute an
/// innovation of exactly zero.
pub fn update<T, H>(
    belief: &SqrtBelief<T>,
    measure: H,
    meas_noise_sqrt: &DMatrix<T>,
    observed: &DVector<T>,
    gate: &GateMask,
    params: &UtParams<T>,
) -> Result<UpdateOutcome<T>, SrukfError>
where
    T: Real,
    H: Fn(&DVector<T>) -> DVector<T>,
{
    let m = observed.len();
    if gate.len() != m {
        return Err(SrukfError::Dimension {
            context: "gate mask",
            expected: m,
            got: gate.len(),
        });
    }
    check_square(meas_noise_sqrt, m, "measurement noise factor")?;
    let sigma = sigma_points(belief, params)?;
    let mut z = DMatrix::zeros(m, sigma.len());
    for (i, col) in sigma.points.column_iter().enumerate() {
        let zi = measure(&col.into_owned());
        if zi.len() != m {
            return Err(SrukfError::Dimension {
                context: "measurement output",
                expected: m,
                got: zi.len(),
            });
        }
        z.set_column(i, &zi);
    }
    let z_mean = weighted_mean(&z, &sigma.mean_weights);
    if z_mean.iter().any(|x| !x.is_finite()) {
        return Err(SrukfError::NonFinite("measurement model"));
    }
    let mut z_dev = z;
    for mut col in z_dev.column_iter_mut() {
        col -= &z_mean;
    }
    let sz = qr_factor(&z_dev, sigma.cov_weights[1], meas_noise_sqrt)?;
    let sz = fold_central(sz, &z_dev.column(0).into_owned(), sigma.cov_weights[0])?;
    check_factor(&sz, "innovation factor")?;

    let mut cross = DMatrix::zeros(belief.dim(), m);
    for i in 0..sigma.len() {
        let dx = sigma.points.column(i) - &belief.mean;
        cross += (dx * z_dev.column(i).transpose()) * sigma.cov_weights[i];
    }
    // K = Pxz (Sz Szᵀ)⁻¹, via two triangular solves.
    let y =
        sz.solve_lower_triangular(&cross.transpose())
            .ok_or(SrukfError::NotPositiveDefinite {
                context: "innovation factor solve",
            })?;
    let gain = sz
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or(SrukfError::NotPositiveDefinite {
            context: "innovation factor solve",
        })?
        .transpose();

    let mut innovation = observed - &z_mean;
    for (i, open) in gate.0.iter().enumerate() {
        if !open {
            innovation[i] = T::zero();
        }
    }
    let mean = &belief.mean + &gain * &innovation;
    let u = &gain * &sz;
    let mut s = belief.chol.clone();
    for col in u.column_iter() {
        s = downdate_or_recover(&s, &col.into_owned())?;
    }
    check_factor(&s, "posterior factor")?;
    if mean.iter().any(|x| !x.is_finite()) {
        return Err(SrukfError::NonFinite("posterior mean"));
    }
    Ok(UpdateOutcome {
        belief: SqrtBelief { mean, chol: s },
        innovation,
        predicted: z_mean,
    })
}

/// Largest absolute entry, used by diagnostics and tests.
pub fn max_abs<T: Real>(m: &DMatrix<T>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(to_f64(x.abs())))
}
