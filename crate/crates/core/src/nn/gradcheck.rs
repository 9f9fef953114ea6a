//! Central finite-difference verification of analytic gradients.

use super::params::{Grads, ParamId, ParamSet};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub checked: usize,
}

/// Gradients below this magnitude are compared in absolute terms: a
/// central difference at ε = 1e-4 in f64 carries rounding noise near
/// 1e-12 times the loss scale, which would swamp a smaller denominator.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Compares `analytic` against `(L(θ+ε) − L(θ−ε)) / 2ε` for the chosen
/// coordinates (all of them when `coords` is `None`).
pub fn check_gradients<F>(
    params: &mut ParamSet<f64>,
    analytic: &Grads<f64>,
    eps: f64,
    coords: Option<&[(ParamId, usize)]>,
    loss: F,
) -> GradCheckReport
where
    F: FnMut(&ParamSet<f64>) -> f64,
{
    check_gradients_in(params, |p| p, analytic, eps, coords, loss)
}

/// Like [`check_gradients`], perturbing the parameters in place inside a
/// larger `host` (such as a model) so the loss can be evaluated on it.
pub fn check_gradients_in<H, G, F>(
    host: &mut H,
    params_of: G,
    analytic: &Grads<f64>,
    eps: f64,
    coords: Option<&[(ParamId, usize)]>,
    mut loss: F,
) -> GradCheckReport
where
    G: Fn(&mut H) -> &mut ParamSet<f64>,
    F: FnMut(&H) -> f64,
{
    let params = params_of(host);
    let all: Vec<(ParamId, usize)>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = params
                .ids()
                .flat_map(|id| (0..params.value(id).len()).map(move |i| (id, i)))
                .collect();
            &all
        }
    };
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        checked: 0,
    };
    for &(id, i) in coords {
        let orig = params_of(host).value(id)[i];
        params_of(host).value_mut(id)[i] = orig + eps;
        let up = loss(host);
        params_of(host).value_mut(id)[i] = orig - eps;
        let down = loss(host);
        params_of(host).value_mut(id)[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let err = relative_error(analytic.get(id)[i], numeric);
        report.checked += 1;
        if report.checked == 1 || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_param = params_of(host).params()[id.0].name.clone();
            report.worst_index = i;
        }
    }
    report
}
