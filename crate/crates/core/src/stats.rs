//! Tiny descriptive statistics: least-squares lines and Pearson
//! correlation, used for tail-slope fits and experiment summaries.

use crate::math::sqrt;
use crate::{Error, Result};

fn check_paired(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("paired sequences differ in length"));
    }
    if xs.len() < 2 {
        return Err(Error::invalid("need at least two points"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::invalid("points must be finite"));
    }
    Ok(())
}

/// Ordinary least squares fit `y = slope * x + intercept`.
pub fn ols_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    check_paired(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::invalid("regressor is constant"));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_paired(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid("correlation of a constant sequence"));
    }
    Ok(sxy / sqrt(sxx * syy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn ols_recovers_an_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 0.7).collect();
        let (slope, intercept) = ols_line(&xs, &ys).unwrap();
        assert!((slope - 2.5).abs() < 1e-14);
        assert!((intercept + 0.7).abs() < 1e-14);
    }

    #[test]
    fn pearson_hand_values() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-14);
        assert!((pearson(&[1.0, 2.0, 3.0], &[6.0, 4.0, 2.0]).unwrap() + 1.0).abs() < 1e-14);
        // Symmetric V shape is uncorrelated with its argument.
        let r = pearson(&[-1.0, 0.0, 1.0], &[1.0, 0.0, 1.0]).unwrap();
        assert!(r.abs() < 1e-14);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(ols_line(&[1.0], &[1.0]).is_err());
        assert!(ols_line(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[3.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[5.0, 5.0]).is_err());
    }
}
