use std::fmt::Write as _;

use crate::autograd::Tensor;
use crate::data::Dataset;
use crate::model::{Model, ModelError, ModelSpec};
use crate::ood::{evaluate, EvalOptions, Scenario};
use crate::scalar::Scalar;

use super::trainer::{train, History};
use super::{TrainConfig, TrainError};

/// One trained grid point. Information terms are in bits.
#[derive(Clone, Debug, PartialEq)]
pub struct InfoCurvePoint {
    pub beta: f64,
    pub mi_xz: f64,
    pub mi_zy: f64,
    pub test_error: f64,
}

/// Points that trained, in grid order, plus the grid points that failed.
#[derive(Debug, Default)]
pub struct InfoCurve {
    pub points: Vec<InfoCurvePoint>,
    pub failures: Vec<(f64, TrainError)>,
}

impl InfoCurve {
    pub const HEADER: &'static str = "beta,mi_xz,mi_zy,test_error";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for p in &self.points {
            let _ = writeln!(out, "{},{},{},{}", p.beta, p.mi_xz, p.mi_zy, p.test_error);
        }
        out
    }
}

/// Trains one model per entry of `cfg.beta_grid` and measures it on `test`.
/// `on_point` sees every trained model, e.g. to checkpoint it.
pub fn info_curve<T: Scalar>(
    spec: &ModelSpec,
    cfg: &TrainConfig,
    train_set: &Dataset,
    test_set: &Dataset,
    eval: &EvalOptions,
    mut on_point: impl FnMut(f64, &Model<T>, &History),
) -> Result<InfoCurve, TrainError> {
    if cfg.beta_grid.is_empty() {
        return Err(TrainError::InvalidConfig("beta_grid is empty".into()));
    }
    cfg.validate()?;
    let mut curve = InfoCurve::default();
    for &beta in &cfg.beta_grid {
        let spec = ModelSpec { beta, ..spec.clone() };
        let point = train::<T>(&spec, cfg, train_set).and_then(|(model, history)| {
            on_point(beta, &model, &history);
            let r = evaluate(&model, test_set, &Scenario::Clean, eval)?;
            Ok(InfoCurvePoint {
                beta,
                mi_xz: r.mi_xz,
                mi_zy: r.mi_zy,
                test_error: r.error,
            })
        });
        match point {
            Ok(p) => curve.points.push(p),
            Err(e) => curve.failures.push((beta, e)),
        }
    }
    Ok(curve)
}

/// β of the point closest to the minimum necessary information point
/// `(log2 10, log2 10)`.
pub fn select_beta_mni(curve: &[InfoCurvePoint]) -> Option<f64> {
    select_beta_mni_with(curve, 10f64.log2())
}

/// β of the point closest to `(h_y, h_y)`; ties go to the larger β.
pub fn select_beta_mni_with(curve: &[InfoCurvePoint], h_y: f64) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for p in curve {
        let d = (p.mi_xz - h_y).hypot(p.mi_zy - h_y);
        best = match best {
            Some((bd, bb)) if d > bd + 1e-12 || ((d - bd).abs() <= 1e-12 && p.beta <= bb) => Some((bd, bb)),
            _ => Some((d, p.beta)),
        };
    }
    best.map(|(_, b)| b)
}

/// 1-based posterior mode of the dimension distribution for every row of
/// `x`.
pub fn posterior_dim_mode<T: Scalar>(model: &Model<T>, x: &Tensor<T>) -> Result<Vec<usize>, ModelError> {
    model.dim_modes(x)
}
