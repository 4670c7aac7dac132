use super::{AdError, ParamValue, Tape, Var};

/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// `max |analytic − fd| / max(1, |fd|)` over every parameter element.
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    /// Number of forward evaluations spent on finite differences.
    pub evaluations: usize,
}

fn evaluate<F>(f: &F, params: &[ParamValue]) -> Result<(Tape, Var), AdError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, AdError>,
{
    let mut tape = Tape::new();
    let vars = params.iter().map(|p| tape.param(p)).collect::<Result<Vec<_>, _>>()?;
    let out = f(&mut tape, &vars)?;
    Ok((tape, out))
}

/// Checks the gradient of the scalar function `f` at `params` against central
/// differences with step `h`.
///
/// `f` receives a fresh tape and one variable per entry of `params`, in order.
pub fn grad_check<F>(f: F, params: &[ParamValue], h: f64) -> Result<GradCheck, AdError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, AdError>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let (tape, out) = evaluate(&f, params)?;
    let grads = tape.backward(out)?;

    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        evaluations: 0,
    };
    let mut work: Vec<ParamValue> = params.to_vec();
    for (pi, p) in params.iter().enumerate() {
        let analytic = grads.get(&p.name).expect("every parameter has a gradient entry");
        for (k, &base) in p.values.iter().enumerate() {
            work[pi].values[k] = base + h;
            let (t, o) = evaluate(&f, &work)?;
            let up = t.scalar(o);
            work[pi].values[k] = base - h;
            let (t, o) = evaluate(&f, &work)?;
            let down = t.scalar(o);
            work[pi].values[k] = base;
            report.evaluations += 2;

            let fd = (up - down) / (2.0 * h);
            let err = (analytic[k] - fd).abs() / fd.abs().max(1.0);
            if err > report.max_rel_error || report.worst_param.is_empty() {
                report.max_rel_error = err;
                report.worst_param = p.name.clone();
                report.worst_index = k;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_form_is_exact() {
        // f(x) = xᵀ A x with A = [[2, 1], [1, 3]] written through affine + dot
        let a = ParamValue::matrix("a", 2, 2, vec![2.0, 1.0, 1.0, 3.0]);
        let x = ParamValue::vector("x", vec![0.7, -1.3]);
        let check = grad_check(
            |t, v| {
                let zero = t.constant(vec![0.0, 0.0]);
                let ax = t.affine(v[0], zero, v[1])?;
                t.dot(v[1], ax)
            },
            &[a, x],
            1e-5,
        )
        .unwrap();
        assert!(check.max_rel_error < 1e-9, "{check:?}");
        assert_eq!(check.evaluations, 12);
    }
}
