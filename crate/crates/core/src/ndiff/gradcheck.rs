use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::Result;
use crate::scalar::Scalar;

/// Worst coordinate of an analytic-vs-central-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(input index, flat coordinate)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
    pub passed: bool,
}

/// Relative error with a small absolute floor so that coordinates whose true
/// derivative is zero compare on absolute terms.
fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Compares the tape gradient of `f` at `point` with central differences
/// `(f(x + eps) - f(x - eps)) / 2 eps`, one coordinate at a time.
///
/// `f` records its computation on the given tape, reading its inputs from the
/// supplied vars, and returns the scalar loss. It must be deterministic.
pub fn grad_check<T, F>(f: F, point: &[Tensor<T>], eps: f64, rtol: f64) -> Result<GradCheckReport>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var>,
{
    let eval = |inputs: &[Tensor<T>]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
        let loss = f(&mut tape, &vars)?;
        Ok(tape.value(loss).item().to_f64_lossy())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = point.iter().map(|t| tape.param(t.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    let grads = tape.backward(loss)?.wrt_all(&vars);

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        coordinates: 0,
        passed: true,
    };
    let mut probe: Vec<Tensor<T>> = point.to_vec();
    for (i, g) in grads.iter().enumerate() {
        for k in 0..g.numel() {
            let orig = point[i].data()[k];
            probe[i].data_mut()[k] = orig + T::of(eps);
            let up = eval(&probe)?;
            probe[i].data_mut()[k] = orig - T::of(eps);
            let down = eval(&probe)?;
            probe[i].data_mut()[k] = orig;

            let numeric = (up - down) / (2.0 * eps);
            let analytic = g.data()[k].to_f64_lossy();
            let err = relative_error(analytic, numeric);
            report.coordinates += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((i, k));
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
    }
    report.passed = report.max_rel_error < rtol;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_is_exact() {
        let w = Tensor::<f64>::from_f64(&[2, 2], &[0.5, -1.0, 2.0, 0.25]).unwrap();
        let x = Tensor::<f64>::from_f64(&[1, 2], &[3.0, -2.0]).unwrap();
        let r = grad_check(
            |tape, v| {
                let y = tape.matmul(v[1], v[0])?;
                tape.sum(y)
            },
            &[w, x],
            1e-5,
            1e-8,
        )
        .unwrap();
        assert!(r.max_rel_error < 1e-9, "{r:?}");
        assert_eq!(r.coordinates, 6);
    }

    #[test]
    fn sigmoid_slope_at_zero() {
        let x = Tensor::<f64>::from_f64(&[1, 1], &[0.0]).unwrap();
        let r = grad_check(|tape, v| tape.sigmoid(v[0]), &[x], 1e-5, 1e-6).unwrap();
        assert!(r.passed);
        assert!((r.analytic - 0.25).abs() < 1e-12);
        assert!((r.numeric - 0.25).abs() < 1e-9);
    }
}
