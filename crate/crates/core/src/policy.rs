//! Pluggable policy interface with a uniform-random baseline and a
//! name/object mass policy for scripted tests. The learned MLP policy and
//! its PPO trainer live in [`crate::nn`] and [`crate::train`].

use std::collections::BTreeMap;

use crate::encoding::{EncodingLayout, PolicyOutput};
use crate::error::PolicyError;

/// Identity of a policy and the observation layout it was built against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyDescriptor {
    pub name: String,
    /// Empty when the policy is layout-agnostic (e.g. uniform random).
    pub layout_hash: String,
}

pub trait Policy {
    fn descriptor(&self) -> PolicyDescriptor;

    /// Head distributions plus a state-value estimate for one observation.
    fn evaluate(
        &self,
        observation: &[f64],
        layout: &EncodingLayout,
    ) -> Result<(PolicyOutput, f64), PolicyError>;
}

/// Validates an observation against a layout-bound policy.
pub fn check_layout(
    descriptor: &PolicyDescriptor,
    observation: &[f64],
    layout: &EncodingLayout,
) -> Result<(), PolicyError> {
    if !descriptor.layout_hash.is_empty() && descriptor.layout_hash != layout.hash() {
        return Err(PolicyError::LayoutMismatch {
            expected: descriptor.layout_hash.clone(),
            found: layout.hash(),
        });
    }
    if observation.len() != layout.observation_width {
        return Err(PolicyError::LayoutMismatch {
            expected: format!("width {}", layout.observation_width),
            found: format!("width {}", observation.len()),
        });
    }
    Ok(())
}

/// Uniform distributions over both heads, value 0; layout-agnostic.
#[derive(Debug, Clone, Default)]
pub struct UniformPolicy;

impl Policy for UniformPolicy {
    fn descriptor(&self) -> PolicyDescriptor {
        PolicyDescriptor { name: "uniform-random".into(), layout_hash: String::new() }
    }

    fn evaluate(
        &self,
        observation: &[f64],
        layout: &EncodingLayout,
    ) -> Result<(PolicyOutput, f64), PolicyError> {
        check_layout(&self.descriptor(), observation, layout)?;
        Ok((PolicyOutput::uniform(layout), 0.0))
    }
}

/// Fixed (observation-independent) masses over lifted names and objects;
/// unlisted entries get zero. Used to script planner behavior in tests.
#[derive(Debug, Clone, Default)]
pub struct FixedMassPolicy {
    pub op_mass: BTreeMap<String, f64>,
    pub obj_mass: BTreeMap<String, f64>,
}

impl Policy for FixedMassPolicy {
    fn descriptor(&self) -> PolicyDescriptor {
        PolicyDescriptor { name: "fixed-mass".into(), layout_hash: String::new() }
    }

    fn evaluate(
        &self,
        observation: &[f64],
        layout: &EncodingLayout,
    ) -> Result<(PolicyOutput, f64), PolicyError> {
        check_layout(&self.descriptor(), observation, layout)?;
        let project = |mass: &BTreeMap<String, f64>, index: &BTreeMap<String, usize>| {
            let mut v = vec![0.0; index.len()];
            for (name, &i) in index {
                if let Some(&m) = mass.get(name) {
                    v[i] = m;
                }
            }
            let total: f64 = v.iter().sum();
            if total > 0.0 {
                v.iter_mut().for_each(|x| *x /= total);
            } else if !v.is_empty() {
                let u = 1.0 / v.len() as f64;
                v.iter_mut().for_each(|x| *x = u);
            }
            v
        };
        Ok((
            PolicyOutput {
                op_probs: project(&self.op_mass, &layout.op_name_index),
                obj_probs: project(&self.obj_mass, &layout.object_index),
            },
            0.0,
        ))
    }
}
