use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use super::spec::NetworkSpec;
use crate::error::{Error, Result};

/// Position of one layer's kernel and bias inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerLayout {
    pub kernel_shape: Vec<usize>,
    pub kernel_offset: usize,
    pub kernel_len: usize,
    pub bias_offset: usize,
    pub bias_len: usize,
}

/// Layer boundaries of a [`ParameterSet`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub layers: Vec<LayerLayout>,
    pub total: usize,
}

impl Layout {
    pub fn from_kernel_shapes(shapes: &[Vec<usize>]) -> Self {
        let mut offset = 0;
        let layers = shapes
            .iter()
            .map(|shape| {
                let kernel_len: usize = shape.iter().product();
                let bias_len = *shape.last().expect("kernel shape is non-empty");
                let l = LayerLayout {
                    kernel_shape: shape.clone(),
                    kernel_offset: offset,
                    kernel_len,
                    bias_offset: offset + kernel_len,
                    bias_len,
                };
                offset += kernel_len + bias_len;
                l
            })
            .collect();
        Layout { layers, total: offset }
    }

    pub fn for_spec(spec: &NetworkSpec) -> Result<Self> {
        Ok(Self::from_kernel_shapes(&spec.kernel_shapes()?))
    }
}

/// All weights of one network, stored flat in checkpoint order:
/// layer 1 kernel, layer 1 bias, layer 2 kernel, ...
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet<T = f32> {
    layout: Layout,
    data: Vec<T>,
}

impl<T: Scalar> ParameterSet<T> {
    pub fn zeros(layout: Layout) -> Self {
        let data = vec![T::zero(); layout.total];
        ParameterSet { layout, data }
    }

    pub fn zeros_for(spec: &NetworkSpec) -> Result<Self> {
        Ok(Self::zeros(Layout::for_spec(spec)?))
    }

    /// Rebuild from a flat vector; the inverse of [`ParameterSet::flatten`].
    pub fn unflatten(layout: Layout, data: Vec<T>) -> Result<Self> {
        if data.len() != layout.total {
            return Err(Error::validation(format!(
                "flat vector has {} values, layout expects {}",
                data.len(),
                layout.total
            )));
        }
        Ok(ParameterSet { layout, data })
    }

    pub fn flatten(&self) -> Vec<T> {
        self.data.clone()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn num_layers(&self) -> usize {
        self.layout.layers.len()
    }

    /// Kernel of parameterized layer `layer` (0-based).
    pub fn kernel(&self, layer: usize) -> &[T] {
        let l = &self.layout.layers[layer];
        &self.data[l.kernel_offset..l.kernel_offset + l.kernel_len]
    }

    pub fn bias(&self, layer: usize) -> &[T] {
        let l = &self.layout.layers[layer];
        &self.data[l.bias_offset..l.bias_offset + l.bias_len]
    }

    pub fn kernel_mut(&mut self, layer: usize) -> &mut [T] {
        let l = &self.layout.layers[layer];
        &mut self.data[l.kernel_offset..l.kernel_offset + l.kernel_len]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [T] {
        let l = &self.layout.layers[layer];
        &mut self.data[l.bias_offset..l.bias_offset + l.bias_len]
    }

    /// Kernel and bias of one layer, contiguous.
    pub fn layer(&self, layer: usize) -> &[T] {
        let l = &self.layout.layers[layer];
        &self.data[l.kernel_offset..l.bias_offset + l.bias_len]
    }

    pub fn layer_mut(&mut self, layer: usize) -> &mut [T] {
        let l = &self.layout.layers[layer];
        let end = l.bias_offset + l.bias_len;
        &mut self.data[l.kernel_offset..end]
    }

    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= factor);
        out
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v.f64() * v.f64()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ParameterSet<U> {
        ParameterSet {
            layout: self.layout.clone(),
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
        }
    }

    pub fn matches(&self, spec: &NetworkSpec) -> Result<()> {
        let expected = Layout::for_spec(spec)?;
        if expected != self.layout {
            return Err(Error::validation("parameter layout does not match the network spec"));
        }
        Ok(())
    }
}
