//! Training objective: two heatmap terms, joint regression, weight penalty.
//!
//! Every data term is a plain sum of squared differences per sample,
//! averaged over the batch. The penalty is `½ Σ w²` over regularized
//! parameters (kernels and FC weights; biases are excluded).

use handpose_autodiff::{weight_penalty, Parameter, Tape, Var};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_f: f64,
    pub lambda_hmt: f64,
    pub lambda_r: f64,
    pub lambda_w: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda_f: 0.005, lambda_hmt: 0.005, lambda_r: 0.05, lambda_w: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_f, self.lambda_hmt, self.lambda_r, self.lambda_w];
        if all.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(Error::Config(format!("loss weights must be finite and nonnegative: {self:?}")));
        }
        Ok(())
    }
}

/// Unweighted loss terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub l_ht_f: f64,
    pub l_r: f64,
    pub l_ht_hmt: f64,
    pub r_w: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_ht_f: f64,
    pub l_r: f64,
    pub l_ht_hmt: f64,
    pub r_w: f64,
    pub total: f64,
}

fn sum_sq_per_sample(op: &str, est: &[f64], gt: &[f64], batch: usize) -> Result<f64> {
    if est.len() != gt.len() {
        return Err(Error::Contract(format!("{op}: {} estimated vs {} target values", est.len(), gt.len())));
    }
    if batch == 0 || est.len() % batch != 0 {
        return Err(Error::Contract(format!("{op}: {} values do not split into {batch} samples", est.len())));
    }
    let s: f64 = est.iter().zip(gt).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(s / batch as f64)
}

/// Sum of squared cell differences over all maps, per-sample mean.
/// `est` and `gt` are flat `B x J x h x w` buffers.
pub fn feature_heatmap_loss(est: &[f64], gt: &[f64], batch: usize) -> Result<f64> {
    sum_sq_per_sample("feature_heatmap_loss", est, gt, batch)
}

/// Same kernel as [`feature_heatmap_loss`], applied to the regression
/// module's per-joint maps.
pub fn hmt_heatmap_loss(est: &[f64], gt: &[f64], batch: usize) -> Result<f64> {
    sum_sq_per_sample("hmt_heatmap_loss", est, gt, batch)
}

/// Sum of squared joint distances, per-sample mean. Flat `B x 3J`.
pub fn regression_loss(est: &[f64], gt: &[f64], batch: usize) -> Result<f64> {
    if est.len() % 3 != 0 {
        return Err(Error::Contract(format!("regression_loss: {} values are not 3D joints", est.len())));
    }
    sum_sq_per_sample("regression_loss", est, gt, batch)
}

/// Weighted sum of the four terms.
pub fn total_loss(parts: &LossParts, weights: &LossWeights) -> Result<LossBreakdown> {
    let terms = [
        ("l_ht_f", parts.l_ht_f),
        ("l_r", parts.l_r),
        ("l_ht_hmt", parts.l_ht_hmt),
        ("r_w", parts.r_w),
    ];
    if let Some((name, v)) = terms.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NumericFault(format!("loss term {name} is {v}")));
    }
    let total = weights.lambda_f * parts.l_ht_f
        + weights.lambda_r * parts.l_r
        + weights.lambda_hmt * parts.l_ht_hmt
        + weights.lambda_w * parts.r_w;
    Ok(LossBreakdown { l_ht_f: parts.l_ht_f, l_r: parts.l_r, l_ht_hmt: parts.l_ht_hmt, r_w: parts.r_w, total })
}

/// [`total_loss`] with `r_w` computed from `params` (the `r_w` field of
/// `parts` is ignored).
pub fn total_loss_with_params(parts: &LossParts, weights: &LossWeights, params: &[Parameter]) -> Result<LossBreakdown> {
    total_loss(&LossParts { r_w: weight_penalty(params), ..*parts }, weights)
}

/// Scalar nodes of the objective recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub l_ht_f: Var,
    pub l_r: Var,
    pub l_ht_hmt: Var,
    pub r_w: Var,
    pub total: Var,
}

impl LossVars {
    pub fn breakdown(&self, tape: &Tape) -> LossBreakdown {
        let item = |v: Var| tape.value(v).item().expect("loss nodes are scalars");
        LossBreakdown {
            l_ht_f: item(self.l_ht_f),
            l_r: item(self.l_r),
            l_ht_hmt: item(self.l_ht_hmt),
            r_w: item(self.r_w),
            total: item(self.total),
        }
    }
}

/// Tape inputs for one batch of the objective.
pub struct LossInputs {
    pub feature_heatmaps: Var,
    pub hmt_heatmaps: Var,
    pub joints: Var,
    pub target_heatmaps: Var,
    pub target_joints: Var,
    /// Bound variables of the regularized parameters.
    pub regularized: Vec<Var>,
}

/// Records the full objective on `tape`.
pub fn record_loss(tape: &mut Tape, inputs: &LossInputs, weights: &LossWeights) -> Result<LossVars> {
    let l_ht_f = tape.squared_error(inputs.feature_heatmaps, inputs.target_heatmaps)?;
    let l_r = tape.squared_error(inputs.joints, inputs.target_joints)?;
    let l_ht_hmt = tape.squared_error(inputs.hmt_heatmaps, inputs.target_heatmaps)?;
    let r_w = tape.half_sum_squares(&inputs.regularized);
    let total = tape.weighted_sum(&[
        (l_ht_f, weights.lambda_f),
        (l_r, weights.lambda_r),
        (l_ht_hmt, weights.lambda_hmt),
        (r_w, weights.lambda_w),
    ])?;
    Ok(LossVars { l_ht_f, l_r, l_ht_hmt, r_w, total })
}
