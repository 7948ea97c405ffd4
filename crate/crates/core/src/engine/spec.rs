use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    Dense,
    GlobalAvgPool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    None,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::None => "none",
        }
    }
}

/// One layer of a [`NetworkSpec`].
///
/// `units` is the filter count for conv layers and the width for dense layers;
/// pooling layers ignore it. Conv layers use "same" zero padding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub units: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub activation: Activation,
    pub dropout_rate: f64,
}

impl LayerSpec {
    pub fn conv(filters: usize, kernel_size: usize, stride: usize, activation: Activation) -> Self {
        LayerSpec {
            kind: LayerKind::Conv,
            units: filters,
            kernel_size,
            stride,
            activation,
            dropout_rate: 0.0,
        }
    }

    pub fn dense(units: usize, activation: Activation) -> Self {
        LayerSpec {
            kind: LayerKind::Dense,
            units,
            kernel_size: 1,
            stride: 1,
            activation,
            dropout_rate: 0.0,
        }
    }

    pub fn global_avg_pool() -> Self {
        LayerSpec {
            kind: LayerKind::GlobalAvgPool,
            units: 0,
            kernel_size: 1,
            stride: 1,
            activation: Activation::None,
            dropout_rate: 0.0,
        }
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_rate = rate;
        self
    }

    pub fn has_params(&self) -> bool {
        self.kind != LayerKind::GlobalAvgPool
    }
}

/// Height, width, channels.
pub type Shape3 = (usize, usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_shape: Shape3,
    pub num_classes: usize,
    pub layers: Vec<LayerSpec>,
}

/// Largest dropout rate the sweep can produce.
pub const MAX_DROPOUT: f64 = 0.7;

impl NetworkSpec {
    /// Three 3x3 conv layers of 16 filters (stride 2), global average pooling,
    /// and a dense classifier. Dropout goes on the conv layers.
    pub fn small_cnn(input_shape: Shape3, num_classes: usize, activation: Activation, dropout: f64) -> Self {
        let conv = |_| LayerSpec::conv(16, 3, 2, activation).with_dropout(dropout);
        let mut layers: Vec<LayerSpec> = (0..3).map(conv).collect();
        layers.push(LayerSpec::global_avg_pool());
        layers.push(LayerSpec::dense(num_classes, Activation::None));
        NetworkSpec {
            input_shape,
            num_classes,
            layers,
        }
    }

    /// Fully-connected network on the flattened input. Dropout goes on the
    /// hidden layers.
    pub fn mlp(input_dim: usize, hidden: &[usize], num_classes: usize, activation: Activation, dropout: f64) -> Self {
        let mut layers: Vec<LayerSpec> = hidden
            .iter()
            .map(|&w| LayerSpec::dense(w, activation).with_dropout(dropout))
            .collect();
        layers.push(LayerSpec::dense(num_classes, Activation::None));
        NetworkSpec {
            input_shape: (1, 1, input_dim),
            num_classes,
            layers,
        }
    }

    /// A copy with every hidden activation and dropout rate replaced.
    pub fn with_hidden(&self, activation: Activation, dropout: f64) -> Self {
        let mut out = self.clone();
        let last = out.layers.len().saturating_sub(1);
        for (i, l) in out.layers.iter_mut().enumerate() {
            if i != last && l.has_params() {
                l.activation = activation;
                l.dropout_rate = dropout;
            }
        }
        out
    }

    pub fn input_len(&self) -> usize {
        let (h, w, c) = self.input_shape;
        h * w * c
    }

    /// Number of layers carrying parameters.
    pub fn param_layer_count(&self) -> usize {
        self.layers.iter().filter(|l| l.has_params()).count()
    }

    /// Check shapes and resolve the per-layer geometry.
    pub fn plan(&self) -> Result<Vec<LayerPlan>> {
        let (h, w, c) = self.input_shape;
        if h == 0 || w == 0 || c == 0 {
            return Err(Error::validation("input shape has a zero dimension"));
        }
        if self.num_classes == 0 {
            return Err(Error::validation("num_classes must be positive"));
        }
        if self.layers.is_empty() {
            return Err(Error::validation("network has no layers"));
        }
        let mut shape = self.input_shape;
        let mut plans = Vec::with_capacity(self.layers.len());
        let mut param_index = 0;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let bad = |why: &str| Error::validation(format!("layer {i} ({:?}): {why}", layer.kind));
            if !(0.0..=MAX_DROPOUT).contains(&layer.dropout_rate) {
                return Err(bad("dropout rate outside [0, 0.7]"));
            }
            if !layer.has_params() && layer.dropout_rate > 0.0 {
                return Err(bad("dropout on a layer without parameters"));
            }
            let (in_h, in_w, in_c) = shape;
            let plan = match layer.kind {
                LayerKind::Conv => {
                    if layer.units == 0 || layer.kernel_size == 0 || layer.stride == 0 {
                        return Err(bad("filters, kernel size and stride must be positive"));
                    }
                    let k = layer.kernel_size;
                    let s = layer.stride;
                    let out_h = in_h.div_ceil(s);
                    let out_w = in_w.div_ceil(s);
                    let pad_h = ((out_h - 1) * s + k).saturating_sub(in_h);
                    let pad_w = ((out_w - 1) * s + k).saturating_sub(in_w);
                    shape = (out_h, out_w, layer.units);
                    LayerPlan::Conv(ConvPlan {
                        in_h,
                        in_w,
                        in_c,
                        out_h,
                        out_w,
                        out_c: layer.units,
                        k,
                        stride: s,
                        pad_top: pad_h / 2,
                        pad_left: pad_w / 2,
                    })
                }
                LayerKind::Dense => {
                    if layer.units == 0 {
                        return Err(bad("dense layer with zero units"));
                    }
                    let in_dim = in_h * in_w * in_c;
                    shape = (1, 1, layer.units);
                    LayerPlan::Dense(DensePlan {
                        in_dim,
                        out_dim: layer.units,
                    })
                }
                LayerKind::GlobalAvgPool => {
                    shape = (1, 1, in_c);
                    LayerPlan::Pool(PoolPlan { h: in_h, w: in_w, c: in_c })
                }
            };
            if i == last {
                if layer.kind != LayerKind::Dense {
                    return Err(bad("the output layer must be dense"));
                }
                if layer.units != self.num_classes {
                    return Err(bad("output width differs from num_classes"));
                }
                if layer.activation != Activation::None {
                    return Err(bad("output layer must have no activation"));
                }
                if layer.dropout_rate > 0.0 {
                    return Err(bad("output layer must not use dropout"));
                }
            }
            if layer.has_params() {
                param_index += 1;
            }
            plans.push(plan);
        }
        debug_assert_eq!(param_index, self.param_layer_count());
        Ok(plans)
    }

    /// Kernel shapes of the parameterized layers, in order.
    ///
    /// Conv kernels are `[k, k, in_channels, filters]`, dense kernels `[in, out]`.
    pub fn kernel_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let plans = self.plan()?;
        Ok(plans
            .iter()
            .filter_map(|p| match p {
                LayerPlan::Conv(c) => Some(vec![c.k, c.k, c.in_c, c.out_c]),
                LayerPlan::Dense(d) => Some(vec![d.in_dim, d.out_dim]),
                LayerPlan::Pool(_) => None,
            })
            .collect())
    }
}

/// Total number of learnable parameters (kernels plus biases).
pub fn param_count(spec: &NetworkSpec) -> Result<usize> {
    Ok(spec
        .kernel_shapes()?
        .iter()
        .map(|s| s.iter().product::<usize>() + s[s.len() - 1])
        .sum())
}

#[derive(Debug, Clone, Copy)]
pub struct ConvPlan {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

impl ConvPlan {
    pub fn in_len(&self) -> usize {
        self.in_h * self.in_w * self.in_c
    }
    pub fn out_len(&self) -> usize {
        self.out_h * self.out_w * self.out_c
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DensePlan {
    pub in_dim: usize,
    pub out_dim: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct PoolPlan {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

#[derive(Debug, Clone, Copy)]
pub enum LayerPlan {
    Conv(ConvPlan),
    Dense(DensePlan),
    Pool(PoolPlan),
}

impl LayerPlan {
    pub fn in_len(&self) -> usize {
        match self {
            LayerPlan::Conv(c) => c.in_len(),
            LayerPlan::Dense(d) => d.in_dim,
            LayerPlan::Pool(p) => p.h * p.w * p.c,
        }
    }

    pub fn out_len(&self) -> usize {
        match self {
            LayerPlan::Conv(c) => c.out_len(),
            LayerPlan::Dense(d) => d.out_dim,
            LayerPlan::Pool(p) => p.c,
        }
    }
}
