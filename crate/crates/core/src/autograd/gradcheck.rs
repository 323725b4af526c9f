use super::{Tape, Tensor, TensorError, Var};

/// Largest relative disagreement between the tape gradient of a scalar
/// function and central finite differences, over every coordinate of `x`.
///
/// The relative error of one coordinate is
/// `|analytic - numeric| / max(1, |numeric|)`.
pub fn gradcheck<F>(f: F, x: &Tensor<f64>, h: f64) -> Result<f64, TensorError>
where
    F: for<'t> Fn(&'t Tape<f64>, Var<'t, f64>) -> Result<Var<'t, f64>, TensorError>,
{
    gradcheck_many(|tape, xs| f(tape, xs[0]), std::slice::from_ref(x), h)
}

/// [`gradcheck`] over several inputs at once.
pub fn gradcheck_many<F>(f: F, xs: &[Tensor<f64>], h: f64) -> Result<f64, TensorError>
where
    F: for<'t> Fn(&'t Tape<f64>, &[Var<'t, f64>]) -> Result<Var<'t, f64>, TensorError>,
{
    if !(h > 0.0 && h <= 1e-2) {
        return Err(TensorError::InvalidArgument {
            op: "gradcheck",
            reason: format!("step {h} outside (0, 1e-2]"),
        });
    }

    let analytic: Vec<Tensor<f64>> = {
        let tape = Tape::new();
        let vars: Vec<_> = xs.iter().map(|x| tape.param(x.clone())).collect();
        let out = f(&tape, &vars)?;
        tape.backward(out)?;
        vars.iter()
            .map(|v| tape.take_grad(*v).expect("param has a gradient"))
            .collect()
    };

    let eval = |inputs: &[Tensor<f64>]| -> Result<f64, TensorError> {
        let tape = Tape::new();
        let vars: Vec<_> = inputs.iter().map(|x| tape.constant(x.clone())).collect();
        let out = f(&tape, &vars)?;
        let v = out.item();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(TensorError::NonFinite { op: "gradcheck" })
        }
    };

    let mut worst = 0.0f64;
    let mut probe: Vec<Tensor<f64>> = xs.to_vec();
    for (which, x) in xs.iter().enumerate() {
        for i in 0..x.len() {
            let orig = x.data()[i];
            probe[which].data_mut()[i] = orig + h;
            let up = eval(&probe)?;
            probe[which].data_mut()[i] = orig - h;
            let down = eval(&probe)?;
            probe[which].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let err = (analytic[which].data()[i] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
