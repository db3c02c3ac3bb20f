//! Bias-corrected Adam.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nets::ParameterVector;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ParameterVector) -> Self {
        Self {
            m: vec![0.0; params.len()],
            v: vec![0.0; params.len()],
            step: 0,
        }
    }
}

pub fn adam_step(params: &mut ParameterVector, grads: &ParameterVector, state: &mut AdamState, lr: f64) -> Result<()> {
    params.check_layout(grads)?;
    if state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::Layout("Adam moments do not match the parameters".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - libm::pow(BETA1, t as f64);
    let c2 = 1.0 - libm::pow(BETA2, t as f64);
    for (((p, g), m), v) in params
        .values_mut()
        .iter_mut()
        .zip(grads.values())
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let mhat = *m / c1;
        let vhat = *v / c2;
        *p -= lr * mhat / (libm::sqrt(vhat) + EPS);
    }
    Ok(())
}
