//! Central finite-difference gradient checking.

use crate::error::Result;
use crate::params::ParameterStore;

/// Gradients smaller than this are compared on an absolute scale.
pub const MAGNITUDE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_relative_error: f64,
    pub worst_parameter: String,
    pub worst_index: usize,
}

/// `|a - n| / max(|a|, |n|, MAGNITUDE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR)
}

/// Compares the gradients already accumulated in `params` against central
/// differences of `loss` with step `h`, over every scalar of every parameter.
pub fn check_gradients<F>(params: &ParameterStore, h: f64, mut loss: F) -> Result<GradCheckReport>
where
    F: FnMut(&ParameterStore) -> Result<f64>,
{
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        checked: 0,
        max_relative_error: 0.0,
        worst_parameter: String::new(),
        worst_index: 0,
    };
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in &names {
        let analytic = params.grad(name)?.data().to_vec();
        for (i, &a) in analytic.iter().enumerate() {
            let original = probe.get(name)?.data()[i];
            probe.get_mut(name)?.data_mut()[i] = original + h;
            let plus = loss(&probe)?;
            probe.get_mut(name)?.data_mut()[i] = original - h;
            let minus = loss(&probe)?;
            probe.get_mut(name)?.data_mut()[i] = original;
            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst_parameter = name.clone();
                report.worst_index = i;
            }
        }
    }
    Ok(report)
}
