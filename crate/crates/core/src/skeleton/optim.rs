use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::objective::ComponentValues;
use crate::{Error, Result};

const MAX_HALVINGS: usize = 10;
const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

/// Update rule for the logits. Both variants only accept a step that does
/// not increase the objective, halving the step up to ten times. When no
/// halving is accepted the optimiser has stalled and stops early.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Adam with β₁ = 0.9, β₂ = 0.999; moments advance on accepted steps.
    Adam,
    /// Plain steepest descent.
    GradientDescent,
}

pub(crate) struct Settings {
    pub steps: usize,
    pub step_size: f64,
    pub optimizer: Optimizer,
}

fn all_finite(ms: &[DMatrix<f64>]) -> bool {
    ms.iter().all(|m| m.iter().all(|v| v.is_finite()))
}

/// Runs the optimiser and returns the final parameters plus the objective
/// before the first step and after every step. `observe` sees the accepted
/// parameters at the same points.
pub(crate) fn minimize(
    mut params: Vec<DMatrix<f64>>,
    settings: &Settings,
    value: impl Fn(&[DMatrix<f64>]) -> ComponentValues,
    value_and_gradient: impl Fn(&[DMatrix<f64>]) -> (ComponentValues, Vec<DMatrix<f64>>),
    mut observe: impl FnMut(&[DMatrix<f64>]),
) -> Result<(Vec<DMatrix<f64>>, Vec<ComponentValues>)> {
    let mut m: Vec<DMatrix<f64>> = params.iter().map(|p| DMatrix::zeros(p.nrows(), p.ncols())).collect();
    let mut v = m.clone();
    let mut trace = Vec::with_capacity(settings.steps + 1);
    observe(&params);
    for step in 0..settings.steps {
        let (current, grad) = value_and_gradient(&params);
        if !current.is_finite() || !all_finite(&grad) {
            return Err(Error::Diverged { step });
        }
        if step == 0 {
            trace.push(current);
        }
        let k = (step + 1) as i32;
        let (direction, moments) = match settings.optimizer {
            Optimizer::GradientDescent => (grad, None),
            Optimizer::Adam => {
                let m2: Vec<_> = m.iter().zip(&grad).map(|(m, g)| m * BETA1 + g * (1.0 - BETA1)).collect();
                let v2: Vec<_> = v
                    .iter()
                    .zip(&grad)
                    .map(|(v, g)| v * BETA2 + g.component_mul(g) * (1.0 - BETA2))
                    .collect();
                let c1 = 1.0 - BETA1.powi(k);
                let c2 = 1.0 - BETA2.powi(k);
                let dir = m2
                    .iter()
                    .zip(&v2)
                    .map(|(m, v)| m.zip_map(v, |a, b| (a / c1) / ((b / c2).sqrt() + EPSILON)))
                    .collect();
                (dir, Some((m2, v2)))
            }
        };
        let mut lr = settings.step_size;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate: Vec<_> = params.iter().zip(&direction).map(|(p, d)| p - d * lr).collect();
            let cv = value(&candidate);
            if cv.is_finite() && cv.total <= current.total {
                accepted = Some((candidate, cv));
                break;
            }
            lr *= 0.5;
        }
        match accepted {
            Some((candidate, cv)) => {
                params = candidate;
                if let Some((m2, v2)) = moments {
                    m = m2;
                    v = v2;
                }
                trace.push(cv);
            }
            None => {
                // No descent within the halving budget: the state would not
                // change any more, so the remaining rows repeat the final
                // value.
                for _ in step..settings.steps {
                    trace.push(current);
                    observe(&params);
                }
                break;
            }
        }
        observe(&params);
    }
    Ok((params, trace))
}
