//! Top of the normalized spectrum and the principal-submatrix interlacing
//! construction.

use crate::ensemble::WignerSample;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tridiag::{
    householder_tridiagonalize, tridiagonal_eigenvalues, tridiagonal_residual, Tridiagonal,
};

/// Top-k positive and bottom-k negative eigenvalues of `b_n^{-1} A`.
#[derive(Clone, Debug)]
pub struct SpectralSummary<F> {
    pub n: usize,
    pub b_n: F,
    pub k: usize,
    /// `lambda_1 >= ... >= lambda_k`, the k largest normalized eigenvalues.
    pub top_pos: Vec<F>,
    /// The k smallest (most negative) normalized eigenvalues, ascending.
    pub bottom_neg: Vec<F>,
}

/// Full spectrum of the unnormalized matrix, ascending.
pub fn eigenvalues<F: Real>(sample: &WignerSample<F>) -> Result<Vec<F>> {
    let n = sample.n();
    if sample.entries().iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "matrix contains non-finite entries".to_string(),
        ));
    }
    let mut buf = sample.entries().to_vec();
    let t = householder_tridiagonalize(&mut buf, n);
    tridiagonal_eigenvalues(&t)
}

/// Computes the eigendecomposition, certifies the largest eigenvalue with an
/// inverse-iteration residual, and returns the normalized extremes.
///
/// Normalization is applied after the decomposition (eigenvalues divided by
/// `b_n`), never to the matrix itself.
pub fn top_eigenvalues<F: Real>(
    sample: &WignerSample<F>,
    k: usize,
    b_n: F,
) -> Result<SpectralSummary<F>> {
    let n = sample.n();
    if k < 1 || k > n {
        return Err(Error::InvalidParameter(format!(
            "k must lie in [1, {n}], got {k}"
        )));
    }
    if sample.entries().iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "matrix contains non-finite entries".to_string(),
        ));
    }
    let mut buf = sample.entries().to_vec();
    let t = householder_tridiagonalize(&mut buf, n);
    let ev = tridiagonal_eigenvalues(&t)?;
    let summary = summarize(&ev, k, b_n, n);
    certify_largest(&t, ev[n - 1], b_n)?;

    // Remark-5 style sanity bound: lambda_1 <= ||A||_inf / b_n.
    let norm_inf = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| sample.entry(i, j).abs())
                .fold(F::zero(), |acc, x| acc + x)
        })
        .fold(F::zero(), |acc, x| acc.max(x));
    let bound = norm_inf / b_n;
    let slack = F::of(1e-8) * bound.max(F::one());
    if summary.top_pos[0] > bound + slack {
        return Err(Error::NumericalInconsistency(format!(
            "largest eigenvalue {} exceeds the row-sum bound {}",
            summary.top_pos[0], bound
        )));
    }
    Ok(summary)
}

fn summarize<F: Real>(ascending: &[F], k: usize, b_n: F, n: usize) -> SpectralSummary<F> {
    let inv = b_n.recip();
    let top_pos: Vec<F> = ascending.iter().rev().take(k).map(|&x| x * inv).collect();
    let bottom_neg: Vec<F> = ascending.iter().take(k).map(|&x| x * inv).collect();
    SpectralSummary {
        n,
        b_n,
        k,
        top_pos,
        bottom_neg,
    }
}

fn certify_largest<F: Real>(t: &Tridiagonal<F>, lambda_raw: F, b_n: F) -> Result<()> {
    // Residual in the tridiagonal frame; the orthogonal reduction preserves it.
    let residual = tridiagonal_residual(t, lambda_raw) / b_n;
    let lambda = lambda_raw / b_n;
    let tolerance = F::of(1e-8) * lambda.abs().max(F::one());
    if residual > tolerance {
        return Err(Error::ResidualTooLarge {
            residual: residual.to_f64_lossy(),
            tolerance: tolerance.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Top-k eigenvalues (descending, normalized) of the principal submatrix
/// obtained by deleting one row/column, with the Cauchy interlacing bound
/// `lambda_2(A) <= mu_1 <= lambda_1(A)` asserted to 1e-9 slack.
pub fn principal_submatrix_top<F: Real>(
    sample: &WignerSample<F>,
    delete_index: usize,
    k: usize,
    b_n: F,
) -> Result<Vec<F>> {
    let n = sample.n();
    if delete_index >= n {
        return Err(Error::InvalidParameter(format!(
            "delete_index {delete_index} out of range for n = {n}"
        )));
    }
    if k > n - 1 {
        return Err(Error::InvalidParameter(format!(
            "k must be <= n - 1 = {}, got {k}",
            n - 1
        )));
    }
    let m = n - 1;
    let mut sub = vec![F::zero(); m * m];
    for (bi, i) in (0..n).filter(|&i| i != delete_index).enumerate() {
        for (bj, j) in (0..n).filter(|&j| j != delete_index).enumerate() {
            sub[bi * m + bj] = sample.entry(i, j);
        }
    }
    let t = householder_tridiagonalize(&mut sub, m);
    let mu = tridiagonal_eigenvalues(&t)?;
    let full = eigenvalues(sample)?;

    let inv = b_n.recip();
    let mu_1 = mu[m - 1] * inv;
    let lambda_1 = full[n - 1] * inv;
    let lambda_2 = full[n - 2] * inv;
    let slack = F::of(1e-9) * lambda_1.abs().max(F::one());
    if mu_1 > lambda_1 + slack || mu_1 < lambda_2 - slack {
        return Err(Error::NumericalInconsistency(format!(
            "interlacing violated: mu_1 = {mu_1} outside [{lambda_2}, {lambda_1}]"
        )));
    }
    Ok(mu.iter().rev().take(k.max(1)).map(|&x| x * inv).collect())
}
