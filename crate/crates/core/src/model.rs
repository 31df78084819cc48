//! The forward-model abstraction shared by surrogates, benchmark oscillators
//! and analytic test models.

use crate::error::{shape, Result};

/// Maps an input vector to a response curve on a fixed time grid.
pub trait ResponseModel: Sync {
    fn n_inputs(&self) -> usize;

    /// Number of samples in every returned curve.
    fn n_times(&self) -> usize;

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>>;
}

/// Wraps a closure as a [`ResponseModel`].
pub struct FnModel<F> {
    n_inputs: usize,
    n_times: usize,
    f: F,
}

impl<F> FnModel<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    pub fn new(n_inputs: usize, n_times: usize, f: F) -> Self {
        Self { n_inputs, n_times, f }
    }
}

impl<F> ResponseModel for FnModel<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    fn n_times(&self) -> usize {
        self.n_times
    }

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok((self.f)(x))
    }
}

/// Holds some inputs of another model at fixed values; the remaining free
/// inputs are passed through in their original order.
pub struct PinnedModel<'a> {
    inner: &'a dyn ResponseModel,
    pinned: Vec<Option<f64>>,
}

impl<'a> PinnedModel<'a> {
    pub fn new(inner: &'a dyn ResponseModel, pinned: Vec<Option<f64>>) -> Result<Self> {
        if pinned.len() != inner.n_inputs() {
            return Err(shape(format!("{} pin slots for a model with {} inputs", pinned.len(), inner.n_inputs())));
        }
        Ok(Self { inner, pinned })
    }

    /// Full input vector from the free inputs.
    pub fn expand(&self, free: &[f64]) -> Result<Vec<f64>> {
        if free.len() != self.n_inputs() {
            return Err(shape(format!("expected {} free inputs, got {}", self.n_inputs(), free.len())));
        }
        let mut it = free.iter();
        Ok(self.pinned.iter().map(|p| p.unwrap_or_else(|| *it.next().expect("free input count checked"))).collect())
    }
}

impl ResponseModel for PinnedModel<'_> {
    fn n_inputs(&self) -> usize {
        self.pinned.iter().filter(|p| p.is_none()).count()
    }

    fn n_times(&self) -> usize {
        self.inner.n_times()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.inner.evaluate(&self.expand(x)?)
    }
}
