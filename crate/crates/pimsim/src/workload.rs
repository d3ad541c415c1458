//! CNN layer descriptors for the VGG family, operation counting, and the
//! inter-layer wait formulas.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    Fc,
}

/// One weight layer. Fully-connected layers are represented as 1x1 layers
/// whose channel count is the flattened input width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    /// Input channels.
    pub in_channels: usize,
    /// Input height.
    pub in_height: usize,
    /// Input width.
    pub in_width: usize,
    /// Output channels (kernel count).
    pub kernels: usize,
    /// Square kernel side length.
    pub kernel_size: usize,
    pub stride: usize,
    /// 2x2 max pool (stride 2) applied to this layer's output.
    pub pooling_after: bool,
}

impl LayerSpec {
    pub fn conv(
        in_channels: usize,
        spatial: usize,
        kernels: usize,
        kernel_size: usize,
        pooling_after: bool,
    ) -> Self {
        LayerSpec {
            kind: LayerKind::Conv,
            in_channels,
            in_height: spatial,
            in_width: spatial,
            kernels,
            kernel_size,
            stride: 1,
            pooling_after,
        }
    }

    pub fn fc(in_width: usize, out_width: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Fc,
            in_channels: in_width,
            in_height: 1,
            in_width: 1,
            kernels: out_width,
            kernel_size: 1,
            stride: 1,
            pooling_after: false,
        }
    }

    /// Output dims (channels, height, width). Convolutions are same-padding,
    /// stride 1; pooling halves the spatial dims.
    pub fn output_dims(&self) -> (usize, usize, usize) {
        match self.kind {
            LayerKind::Fc => (self.kernels, 1, 1),
            LayerKind::Conv => {
                if self.pooling_after {
                    (self.kernels, self.in_height / 2, self.in_width / 2)
                } else {
                    (self.kernels, self.in_height, self.in_width)
                }
            }
        }
    }

    /// MAC count for one inference of this layer.
    /// Conv MACs are counted on the pre-pooling output map.
    pub fn macs(&self) -> u64 {
        match self.kind {
            LayerKind::Fc => self.in_channels as u64 * self.kernels as u64,
            LayerKind::Conv => {
                self.kernels as u64
                    * self.in_channels as u64
                    * (self.kernel_size * self.kernel_size) as u64
                    * (self.in_height * self.in_width) as u64
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            LayerKind::Conv => {
                if self.kernel_size != 1 && self.kernel_size != 3 {
                    return Err(SimError::Precondition(format!(
                        "conv kernel_size must be 1 or 3, got {}",
                        self.kernel_size
                    )));
                }
                if self.in_height < self.kernel_size || self.in_width < self.kernel_size {
                    return Err(SimError::Precondition(
                        "conv input smaller than kernel".to_string(),
                    ));
                }
                if self.stride != 1 {
                    return Err(SimError::Precondition(
                        "only stride-1 convolutions are supported".to_string(),
                    ));
                }
            }
            LayerKind::Fc => {
                if self.kernel_size != 1
                    || self.in_height != 1
                    || self.in_width != 1
                    || self.pooling_after
                {
                    return Err(SimError::Precondition(
                        "fc layers must be 1x1 without pooling".to_string(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VggVariant {
    A,
    B,
    C,
    D,
    E,
}

impl VggVariant {
    pub const ALL: [VggVariant; 5] = [
        VggVariant::A,
        VggVariant::B,
        VggVariant::C,
        VggVariant::D,
        VggVariant::E,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            VggVariant::A => "vgg-a",
            VggVariant::B => "vgg-b",
            VggVariant::C => "vgg-c",
            VggVariant::D => "vgg-d",
            VggVariant::E => "vgg-e",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" | "vgg-a" | "vgga" => Ok(VggVariant::A),
            "b" | "vgg-b" | "vggb" => Ok(VggVariant::B),
            "c" | "vgg-c" | "vggc" => Ok(VggVariant::C),
            "d" | "vgg-d" | "vggd" => Ok(VggVariant::D),
            "e" | "vgg-e" | "vgge" => Ok(VggVariant::E),
            other => Err(SimError::Precondition(format!(
                "unknown network variant '{other}'"
            ))),
        }
    }

    /// Convs per downsampling stage. A 0 in the third slot of a (w,count)
    /// pair list means all 3x3; variant C replaces the last conv of the
    /// deeper stages with a 1x1 kernel.
    fn stage_layers(&self) -> [usize; 5] {
        match self {
            VggVariant::A => [1, 1, 2, 2, 2],
            VggVariant::B => [2, 2, 2, 2, 2],
            VggVariant::C | VggVariant::D => [2, 2, 3, 3, 3],
            VggVariant::E => [2, 2, 4, 4, 4],
        }
    }
}

const STAGE_CHANNELS: [usize; 5] = [64, 128, 256, 512, 512];
const STAGE_SPATIAL: [usize; 5] = [224, 112, 56, 28, 14];
const FC_WIDTHS: [usize; 3] = [4096, 4096, 1000];

/// Build the published configuration for a VGG variant.
pub fn build_vgg(variant: VggVariant) -> NetworkSpec {
    let mut layers = Vec::new();
    let mut in_channels = 3;
    let counts = variant.stage_layers();
    for stage in 0..5 {
        let spatial = STAGE_SPATIAL[stage];
        let out = STAGE_CHANNELS[stage];
        let n = counts[stage];
        for i in 0..n {
            let last = i == n - 1;
            // Variant C's extra conv in stages 3-5 uses a 1x1 kernel.
            let ksize = if variant == VggVariant::C && stage >= 2 && last {
                1
            } else {
                3
            };
            layers.push(LayerSpec::conv(in_channels, spatial, out, ksize, last));
            in_channels = out;
        }
    }
    let mut fc_in = in_channels * 7 * 7;
    for width in FC_WIDTHS {
        layers.push(LayerSpec::fc(fc_in, width));
        fc_in = width;
    }
    let net = NetworkSpec {
        name: variant.name().to_string(),
        layers,
    };
    debug_assert!(net.validate().is_ok());
    net
}

impl NetworkSpec {
    /// Load a custom network from a JSON layer list.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let net: NetworkSpec =
            serde_json::from_str(&text).map_err(|e| SimError::ConfigParse(e.to_string()))?;
        net.validate()?;
        Ok(net)
    }

    /// Check the chaining invariant: each layer's input dims must equal the
    /// previous layer's output dims (flattened at the conv-to-fc boundary).
    pub fn validate(&self) -> Result<()> {
        for layer in &self.layers {
            layer.validate()?;
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            let (prev, next) = (&pair[0], &pair[1]);
            let (c, h, w) = prev.output_dims();
            let ok = match next.kind {
                LayerKind::Conv => {
                    next.in_channels == c && next.in_height == h && next.in_width == w
                }
                LayerKind::Fc => next.in_channels == c * h * w,
            };
            if !ok {
                return Err(SimError::Precondition(format!(
                    "layer {} input does not chain from layer {} output",
                    i + 1,
                    i
                )));
            }
        }
        Ok(())
    }

    pub fn conv_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| l.kind == LayerKind::Conv)
            .count()
    }

    pub fn fc_count(&self) -> usize {
        self.layers.iter().filter(|l| l.kind == LayerKind::Fc).count()
    }

    /// Total operations for one inference, counting one MAC as two ops.
    pub fn network_ops(&self) -> u64 {
        2 * self.layers.iter().map(|l| l.macs()).sum::<u64>()
    }
}

/// Cycles the next layer waits before it can start its first convolution
/// window: w*(l-1) + l, where w is the producing layer's output width and l
/// is the consuming layer's kernel size.
pub fn cycles_wait(w: usize, l: usize) -> Result<u64> {
    if l < 1 || w < l {
        return Err(SimError::Precondition(format!(
            "cycles_wait requires w >= l >= 1, got w={w}, l={l}"
        )));
    }
    Ok((w * (l - 1) + l) as u64)
}

/// Output values the next layer waits for: cycles_wait(w, l) * n.
pub fn values_wait(w: usize, l: usize, n: usize) -> Result<u64> {
    if n < 1 {
        return Err(SimError::Precondition(format!(
            "values_wait requires n >= 1, got n={n}"
        )));
    }
    Ok(cycles_wait(w, l)? * n as u64)
}
