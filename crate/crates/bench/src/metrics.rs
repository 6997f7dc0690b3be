use kronsense::{Error, Result};

/// `‖x − x̂‖² / ‖x‖²` for one trial.
pub fn nmse(x_true: &[f64], x_hat: &[f64]) -> Result<f64> {
    if x_true.len() != x_hat.len() {
        return Err(Error::DimensionMismatch(format!(
            "estimate has length {}, truth has {}",
            x_hat.len(),
            x_true.len()
        )));
    }
    let energy: f64 = x_true.iter().map(|v| v * v).sum();
    if energy == 0.0 {
        return Err(Error::ZeroSignal("NMSE"));
    }
    let err: f64 = x_true.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(err / energy)
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 { f64::NAN } else { sum / n as f64 }
}
