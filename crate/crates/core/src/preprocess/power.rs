//! Yeo-Johnson and Box-Cox power transforms with maximum-likelihood lambda.

use crate::error::{Error, Result};

pub(crate) const LAMBDA_BOUNDS: (f64, f64) = (-5.0, 5.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerMethod {
    YeoJohnson,
    BoxCox,
}

pub(crate) fn yeo_johnson(x: f64, lambda: f64) -> f64 {
    if x >= 0.0 {
        if lambda.abs() < 1e-12 {
            x.ln_1p()
        } else {
            ((x + 1.0).powf(lambda) - 1.0) / lambda
        }
    } else if (lambda - 2.0).abs() < 1e-12 {
        -(-x).ln_1p()
    } else {
        -((1.0 - x).powf(2.0 - lambda) - 1.0) / (2.0 - lambda)
    }
}

pub(crate) fn box_cox(x: f64, lambda: f64) -> f64 {
    if lambda.abs() < 1e-12 {
        x.ln()
    } else {
        (x.powf(lambda) - 1.0) / lambda
    }
}

pub(crate) fn apply(method: PowerMethod, x: f64, lambda: f64) -> f64 {
    match method {
        PowerMethod::YeoJohnson => yeo_johnson(x, lambda),
        PowerMethod::BoxCox => box_cox(x, lambda),
    }
}

fn population_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
}

fn log_likelihood(method: PowerMethod, col: &[f64], lambda: f64) -> f64 {
    let n = col.len() as f64;
    let transformed: Vec<f64> = col.iter().map(|&x| apply(method, x, lambda)).collect();
    let var = population_variance(&transformed);
    if !(var.is_finite() && var > 0.0) {
        return f64::NEG_INFINITY;
    }
    let jacobian: f64 = match method {
        PowerMethod::YeoJohnson => col.iter().map(|&x| x.signum() * x.abs().ln_1p()).sum(),
        PowerMethod::BoxCox => col.iter().map(|&x| x.ln()).sum(),
    };
    -0.5 * n * var.ln() + (lambda - 1.0) * jacobian
}

/// Lambda maximizing the profile log-likelihood over [`LAMBDA_BOUNDS`]
/// (golden-section search). Constant columns get lambda 1.
pub(crate) fn fit_lambda(method: PowerMethod, col: &[f64], column: usize) -> Result<f64> {
    if method == PowerMethod::BoxCox {
        if let Some(bad) = col.iter().find(|&&x| x <= 0.0) {
            return Err(Error::Domain {
                column,
                message: format!("box-cox requires strictly positive data, found {bad}"),
            });
        }
    }
    if col.iter().all(|&x| x == col[0]) {
        return Ok(1.0);
    }
    let f = |l: f64| -log_likelihood(method, col, l);
    let (mut a, mut b) = LAMBDA_BOUNDS;
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if (b - a).abs() < 1e-10 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yeo_johnson_identity_at_one() {
        for x in [-3.0, -0.5, 0.0, 0.7, 12.0] {
            assert!((yeo_johnson(x, 1.0) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn yeo_johnson_log_branches() {
        assert!((yeo_johnson(2.0, 0.0) - 3f64.ln()).abs() < 1e-12);
        assert!((yeo_johnson(-2.0, 2.0) + 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn box_cox_rejects_zero() {
        let err = fit_lambda(PowerMethod::BoxCox, &[1.0, 0.0, 2.0], 4).unwrap_err();
        assert!(matches!(err, Error::Domain { column: 4, .. }));
    }

    #[test]
    fn lambda_search_beats_grid() {
        let col = [0.5, 1.0, 1.5, 3.0, 7.0, 20.0, 55.0];
        for method in [PowerMethod::YeoJohnson, PowerMethod::BoxCox] {
            let best = fit_lambda(method, &col, 0).unwrap();
            let at_best = log_likelihood(method, &col, best);
            let mut l = LAMBDA_BOUNDS.0;
            while l <= LAMBDA_BOUNDS.1 {
                assert!(at_best >= log_likelihood(method, &col, l) - 1e-7, "{method:?} {l}");
                l += 0.05;
            }
        }
    }
}
