//! Paired Student t-test between expected and observed parity differences.

use num_traits::Float;
use serde::Serialize;
use statrs::function::beta::beta_reg;

use super::MetricsError;

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedTestResult<T> {
    pub n: usize,
    pub mean_diff: T,
    pub t_statistic: T,
    pub degrees_of_freedom: usize,
    pub p_value: T,
    pub significant_at_05: bool,
}

/// Two-tailed `P(|T| >= |t|)` for Student's t with `df` degrees of freedom,
/// via the regularized incomplete beta `I_x(df/2, 1/2)`, `x = df/(df + t²)`.
pub fn student_t_two_tailed(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).min(1.0)
}

/// Paired t-test on `d_i = observed_i - expected_i`, two-tailed.
///
/// With zero variance in the differences, `t` is reported as `0` (p = 1)
/// if every difference is zero and as `±inf` (p = 0) otherwise.
pub fn paired_t_test<T: Float>(expected: &[T], observed: &[T]) -> Result<PairedTestResult<T>, MetricsError> {
    if expected.len() != observed.len() {
        return Err(MetricsError::LengthMismatch {
            expected: expected.len(),
            observed: observed.len(),
        });
    }
    let n = expected.len();
    if n < 2 {
        return Err(MetricsError::InsufficientSamples(n));
    }
    let count = T::from(n).expect("sample count fits");
    let diffs: Vec<T> = observed.iter().zip(expected).map(|(o, e)| *o - *e).collect();
    // Shifting by the first difference keeps identical differences at an
    // exactly zero variance.
    let shift = diffs[0];
    let shifted_mean = diffs.iter().fold(T::zero(), |acc, d| acc + (*d - shift)) / count;
    let mean = shift + shifted_mean;
    let ss = diffs.iter().fold(T::zero(), |acc, d| {
        let c = *d - shift - shifted_mean;
        acc + c * c
    });
    let sd = (ss / (count - T::one())).sqrt();
    let df = n - 1;

    let (t, p) = if sd == T::zero() {
        if mean == T::zero() {
            (T::zero(), T::one())
        } else {
            (T::infinity() * mean.signum(), T::zero())
        }
    } else {
        let t = mean / (sd / count.sqrt());
        let p = student_t_two_tailed(t.to_f64().unwrap_or(f64::NAN), df as f64);
        (t, T::from(p).expect("p fits"))
    };
    Ok(PairedTestResult {
        n,
        mean_diff: mean,
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: p,
        significant_at_05: p < T::from(SIGNIFICANCE_LEVEL).expect("level fits"),
    })
}
