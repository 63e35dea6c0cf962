use super::graph::{Graph, Var};
use super::params::ParamSet;
use crate::error::{Error, Result};

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    /// Worst relative error over elements whose discrepancy exceeds the
    /// roundoff bound of the central difference.
    pub max_resolved_err: f64,
    /// Parameter name and flat index of the worst element.
    pub worst: Option<(String, usize)>,
    /// Analytic and numeric derivative at the worst element.
    pub worst_values: (f64, f64),
    pub checked: usize,
}

const ROUNDOFF_SAFETY: f64 = 8.0;

/// `|a − n| / max(1e−8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compare backward gradients of the scalar built by `f` against central
/// differences with step `epsilon`, for every element of every parameter.
pub fn grad_check<F>(params: &mut ParamSet, f: F, epsilon: f64) -> Result<GradCheck>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    let eval = |params: &ParamSet| -> Result<f64> {
        let mut g = Graph::new(params);
        let out = f(&mut g)?;
        let v = g.value(out).item();
        if !v.is_finite() {
            return Err(Error::NonFinite("grad_check objective".into()));
        }
        Ok(v)
    };
    let grads = {
        let mut g = Graph::new(params);
        let out = f(&mut g)?;
        g.backward(out)?
    };
    let mut report = GradCheck {
        max_rel_err: 0.0,
        max_resolved_err: 0.0,
        worst: None,
        worst_values: (0.0, 0.0),
        checked: 0,
    };
    for id in params.ids().collect::<Vec<_>>() {
        for k in 0..params.value(id).len() {
            let orig = params.value(id).data()[k];
            params.value_mut(id).data_mut()[k] = orig + epsilon;
            let plus = eval(params)?;
            params.value_mut(id).data_mut()[k] = orig - epsilon;
            let minus = eval(params)?;
            params.value_mut(id).data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let analytic = grads.get(id).map_or(0.0, |t| t.data()[k]);
            let err = relative_error(analytic, numeric);
            report.checked += 1;
            let noise = ROUNDOFF_SAFETY * f64::EPSILON * (plus.abs() + minus.abs()) / (2.0 * epsilon);
            if (analytic - numeric).abs() > noise {
                report.max_resolved_err = report.max_resolved_err.max(err);
            }
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = Some((params.name(id).to_string(), k));
                report.worst_values = (analytic, numeric);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    #[test]
    fn quadratic() {
        let mut p = ParamSet::new();
        let x = p.add("x", Tensor::scalar(3.0)).unwrap();
        let f = |g: &mut Graph| {
            let v = g.param(x);
            let sq = g.mul(v, v)?;
            g.sum(sq)
        };
        let grads = {
            let mut g = Graph::new(&p);
            let out = f(&mut g).unwrap();
            g.backward(out).unwrap()
        };
        assert_eq!(grads.get(x).unwrap().item(), 6.0);
        let report = grad_check(&mut p, f, 1e-5).unwrap();
        assert!(report.max_rel_err < 1e-6 / 6.0 + 1e-9);
    }

    #[test]
    fn sigmoid_derivative_at_zero() {
        let mut p = ParamSet::new();
        let x = p.add("x", Tensor::scalar(0.0)).unwrap();
        let mut g = Graph::new(&p);
        let v = g.param(x);
        let s = g.sigmoid(v).unwrap();
        assert_eq!(g.value(s).item(), 0.5);
        let out = g.sum(s).unwrap();
        assert_eq!(g.backward(out).unwrap().get(x).unwrap().item(), 0.25);
    }
}
