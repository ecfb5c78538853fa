use crate::error::{Error, Result};

/// Mean and variance of a univariate Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub variance: f64,
}

/// Predictive laws of `X_p | Y_0..Y_{p-1}` for the linear Gaussian model
/// `X_{p+1} = phi X_p + sigma_u U`, `Y_p = X_p + sigma_v V`, with the
/// stationary prior `X_0 ~ N(0, sigma_u^2 / (1 - phi^2))`.
///
/// Returns `observations.len() + 1` entries; entry `p` conditions on the
/// first `p` observations.
pub fn kalman_predictive(
    phi: f64,
    sigma_u: f64,
    sigma_v: f64,
    observations: &[f64],
) -> Result<Vec<Gaussian>> {
    if !(phi.abs() < 1.0) || !(sigma_u > 0.0) || !(sigma_v > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kalman: need |phi| < 1 and positive noise scales, got phi={phi}, sigma_u={sigma_u}, sigma_v={sigma_v}"
        )));
    }
    let q = sigma_u * sigma_u;
    let r = sigma_v * sigma_v;
    let mut pred = Gaussian { mean: 0.0, variance: q / (1.0 - phi * phi) };
    let mut out = Vec::with_capacity(observations.len() + 1);
    out.push(pred);
    for &y in observations {
        let gain = pred.variance / (pred.variance + r);
        let filt_mean = pred.mean + gain * (y - pred.mean);
        let filt_var = (1.0 - gain) * pred.variance;
        pred = Gaussian { mean: phi * filt_mean, variance: phi * phi * filt_var + q };
        out.push(pred);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_observations_give_stationary_prior() {
        let out = kalman_predictive(0.9, 0.6, 1.0, &[]).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].mean, 0.0);
        assert!((out[0].variance - 0.36 / 0.19).abs() < 1e-14);
    }

    #[test]
    fn memoryless_state() {
        let out = kalman_predictive(0.0, 0.7, 1.3, &[1.0, -2.0, 5.0]).unwrap();
        for g in &out[1..] {
            assert_eq!(g.mean, 0.0);
            assert!((g.variance - 0.49).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(kalman_predictive(1.0, 0.6, 1.0, &[]).is_err());
        assert!(kalman_predictive(0.5, 0.0, 1.0, &[]).is_err());
        assert!(kalman_predictive(0.5, 1.0, -1.0, &[]).is_err());
    }
}
