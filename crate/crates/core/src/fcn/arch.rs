//! Layer specifications, the two architectures and the network runner.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{conv2d_backward, conv2d_forward, maxpool_2x1_backward, maxpool_2x1_forward, Tensor};
use super::Real;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use crate::error::{invalid, Error, Result};
use crate::Profile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Same,
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    None,
}

/// One stride-1 conv layer. Horizontal padding is always "same".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    /// (height, width)
    pub kernel: (usize, usize),
    pub vertical_padding: Padding,
    pub activation: Activation,
}

impl ConvLayerSpec {
    pub fn same(in_channels: usize, out_channels: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel: (5, 5),
            vertical_padding: Padding::Same,
            activation: Activation::Relu,
        }
    }

    /// Single-filter linear layer whose kernel spans the whole remaining height.
    pub fn collapse(in_channels: usize, height: usize) -> Self {
        Self {
            in_channels,
            out_channels: 1,
            kernel: (height, 5),
            vertical_padding: Padding::Valid,
            activation: Activation::None,
        }
    }

    pub fn pad_top(&self) -> usize {
        match self.vertical_padding {
            Padding::Same => (self.kernel.0 - 1) / 2,
            Padding::Valid => 0,
        }
    }

    /// Output height for an input of height `h`, `None` if the kernel does not fit.
    pub fn output_height(&self, h: usize) -> Option<usize> {
        match self.vertical_padding {
            Padding::Same => Some(h),
            Padding::Valid => (h >= self.kernel.0).then(|| h - self.kernel.0 + 1),
        }
    }

    pub fn weight_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel.0 * self.kernel.1
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.out_channels
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel.0 * self.kernel.1
    }

    pub fn validate(&self) -> Result<()> {
        let (kh, kw) = self.kernel;
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(invalid("channels", "must be positive"));
        }
        if kh == 0 || kw % 2 == 0 {
            return Err(invalid("kernel", "width must be odd and height positive"));
        }
        if self.vertical_padding == Padding::Same && kh % 2 == 0 {
            return Err(invalid("kernel", "same padding needs an odd height"));
        }
        Ok(())
    }
}

/// Conv layers optionally followed by a 2x1 max-pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub convs: Vec<ConvLayerSpec>,
    pub pool: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchKind {
    Shallow,
    Deep,
}

impl ArchKind {
    pub fn name(self) -> &'static str {
        match self {
            ArchKind::Shallow => "shallow",
            ArchKind::Deep => "deep",
        }
    }

    pub fn id(self) -> u8 {
        match self {
            ArchKind::Shallow => 0,
            ArchKind::Deep => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(ArchKind::Shallow),
            1 => Some(ArchKind::Deep),
            _ => None,
        }
    }

    /// STFT hop of the input spectrogram.
    pub fn hop(self) -> usize {
        match self {
            ArchKind::Shallow => 6,
            ArchKind::Deep => 1,
        }
    }

    /// Channels per block before scaling; the final 1 is the collapse layer.
    fn channel_plan(self) -> &'static [&'static [usize]] {
        match self {
            ArchKind::Shallow => &[&[8, 8, 8], &[16, 16, 16], &[32, 32, 32], &[64, 64, 1]],
            ArchKind::Deep => &[&[8, 8], &[8, 8], &[16, 16], &[16, 16], &[32, 32], &[64, 64], &[128, 128, 1]],
        }
    }
}

impl fmt::Display for ArchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shallow" => Ok(ArchKind::Shallow),
            "deep" => Ok(ArchKind::Deep),
            other => Err(invalid("architecture", format!("unknown `{other}` (expected shallow|deep)"))),
        }
    }
}

/// A concrete architecture: kind, input image size and channel scaling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FcnArchitecture {
    pub kind: ArchKind,
    /// (height, width) of the single-channel input.
    pub input_shape: (usize, usize),
    /// Every channel count except the final one is divided by this.
    pub channel_divisor: usize,
    pub blocks: Vec<Block>,
}

/// Channel divisor of the desk-scale networks.
pub const DESK_CHANNEL_DIVISOR: usize = 4;

impl FcnArchitecture {
    pub fn new(kind: ArchKind, input_shape: (usize, usize), channel_divisor: usize) -> Result<Self> {
        if channel_divisor == 0 {
            return Err(invalid("channel_divisor", "must be positive"));
        }
        if input_shape.0 == 0 || input_shape.1 == 0 {
            return Err(invalid("input_shape", "must be non-empty"));
        }
        let plan = kind.channel_plan();
        let mut blocks = Vec::with_capacity(plan.len());
        let mut c_in = 1;
        let mut h = input_shape.0;
        for (b, widths) in plan.iter().enumerate() {
            let last_block = b + 1 == plan.len();
            let mut convs = Vec::with_capacity(widths.len());
            for (i, &w) in widths.iter().enumerate() {
                if last_block && i + 1 == widths.len() {
                    convs.push(ConvLayerSpec::collapse(c_in, h));
                    c_in = 1;
                } else {
                    let c_out = (w / channel_divisor).max(1);
                    convs.push(ConvLayerSpec::same(c_in, c_out));
                    c_in = c_out;
                }
            }
            if !last_block {
                h = h.div_ceil(2);
            }
            blocks.push(Block {
                convs,
                pool: !last_block,
            });
        }
        Ok(Self {
            kind,
            input_shape,
            channel_divisor,
            blocks,
        })
    }

    /// 154 x 2048 (shallow) or 1024 x 2048 (deep), full width.
    pub fn paper(kind: ArchKind) -> Self {
        let h = match kind {
            ArchKind::Shallow => 154,
            ArchKind::Deep => 1024,
        };
        Self::new(kind, (h, 2048), 1).expect("static shape")
    }

    /// 39 x 512 (shallow) or 256 x 512 (deep), channels divided by 4.
    pub fn desk(kind: ArchKind) -> Self {
        let h = match kind {
            ArchKind::Shallow => 39,
            ArchKind::Deep => 256,
        };
        Self::new(kind, (h, 512), DESK_CHANNEL_DIVISOR).expect("static shape")
    }

    pub fn for_profile(kind: ArchKind, profile: Profile) -> Self {
        match profile {
            Profile::Paper => Self::paper(kind),
            Profile::Desk => Self::desk(kind),
        }
    }

    /// Conv and pool layers.
    pub fn layer_count(&self) -> usize {
        self.blocks.iter().map(|b| b.convs.len() + b.pool as usize).sum()
    }

    pub fn conv_layers(&self) -> impl Iterator<Item = &ConvLayerSpec> {
        self.blocks.iter().flat_map(|b| b.convs.iter())
    }

    pub fn param_count(&self) -> usize {
        self.conv_layers().map(|c| c.param_count()).sum()
    }

    pub fn network(&self) -> Result<Network> {
        Network::new((1, self.input_shape.0, self.input_shape.1), &self.blocks)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layer {
    Conv { spec: ConvLayerSpec, offset: usize },
    Pool,
}

/// Validated layer sequence with a flat parameter layout: for each conv in
/// order, weights `[out][in][kh][kw]` then biases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    input_shape: (usize, usize, usize),
    layers: Vec<Layer>,
    shapes: Vec<(usize, usize, usize)>,
    param_count: usize,
}

/// Activations of one forward pass, kept for the reverse pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForwardCache<T> {
    /// Network input followed by every layer output.
    pub activations: Vec<Tensor<T>>,
    /// Pool selectors, one entry per layer (empty for convs).
    pub selectors: Vec<Vec<u8>>,
}

impl<T: Real> ForwardCache<T> {
    pub fn output(&self) -> Option<&Tensor<T>> {
        self.activations.last()
    }
}

impl Network {
    pub fn new(input_shape: (usize, usize, usize), blocks: &[Block]) -> Result<Self> {
        let mut layers = Vec::new();
        let mut shapes = Vec::new();
        let (mut c, mut h, w) = input_shape;
        let mut offset = 0;
        for block in blocks {
            for spec in &block.convs {
                spec.validate()?;
                if spec.in_channels != c {
                    return Err(Error::ShapeMismatch {
                        what: "layer chain channels",
                        expected: (spec.in_channels, h, w),
                        actual: (c, h, w),
                    });
                }
                h = spec.output_height(h).ok_or_else(|| invalid("kernel", "taller than its input"))?;
                c = spec.out_channels;
                layers.push(Layer::Conv { spec: *spec, offset });
                shapes.push((c, h, w));
                offset += spec.param_count();
            }
            if block.pool {
                h = h.div_ceil(2);
                layers.push(Layer::Pool);
                shapes.push((c, h, w));
            }
        }
        Ok(Self {
            input_shape,
            layers,
            shapes,
            param_count: offset,
        })
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        self.input_shape
    }

    pub fn output_shape(&self) -> (usize, usize, usize) {
        self.shapes.last().copied().unwrap_or(self.input_shape)
    }

    /// Output shape after every layer.
    pub fn shape_trace(&self) -> &[(usize, usize, usize)] {
        &self.shapes
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    /// He-uniform weights (`U(-b, b)`, `b = sqrt(6 / fan_in)`), zero biases.
    pub fn init_params<T: Real>(&self, seed: u64) -> Vec<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(self.param_count);
        for layer in &self.layers {
            if let Layer::Conv { spec, .. } = layer {
                let bound = (6.0 / spec.fan_in() as f64).sqrt();
                params.extend((0..spec.weight_count()).map(|_| T::of(rng.random_range(-bound..bound))));
                params.extend((0..spec.out_channels).map(|_| T::zero()));
            }
        }
        params
    }

    fn check(&self, params_len: usize, input: (usize, usize, usize)) -> Result<()> {
        if params_len != self.param_count {
            return Err(Error::LengthMismatch {
                what: "network parameters",
                expected: self.param_count,
                actual: params_len,
            });
        }
        if input != self.input_shape {
            return Err(Error::ShapeMismatch {
                what: "network input",
                expected: self.input_shape,
                actual: input,
            });
        }
        Ok(())
    }

    fn split<'p, T>(spec: &ConvLayerSpec, offset: usize, params: &'p [T]) -> (&'p [T], &'p [T]) {
        let w = spec.weight_count();
        (&params[offset..offset + w], &params[offset + w..offset + w + spec.out_channels])
    }

    /// Inference pass; keeps only the current activation.
    pub fn forward<T: Real>(&self, params: &[T], input: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(params.len(), input.shape())?;
        let mut x = input.clone();
        for layer in &self.layers {
            x = match layer {
                Layer::Conv { spec, offset } => {
                    let (w, b) = Self::split(spec, *offset, params);
                    conv2d_forward(&x, spec, w, b)?
                }
                Layer::Pool => maxpool_2x1_forward(&x)?.0,
            };
        }
        Ok(x)
    }

    pub fn forward_train<T: Real>(&self, params: &[T], input: Tensor<T>) -> Result<ForwardCache<T>> {
        self.check(params.len(), input.shape())?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut selectors = Vec::with_capacity(self.layers.len());
        activations.push(input);
        for layer in &self.layers {
            let x = activations.last().expect("input pushed");
            let (y, sel) = match layer {
                Layer::Conv { spec, offset } => {
                    let (w, b) = Self::split(spec, *offset, params);
                    (conv2d_forward(x, spec, w, b)?, Vec::new())
                }
                Layer::Pool => maxpool_2x1_forward(x)?,
            };
            activations.push(y);
            selectors.push(sel);
        }
        Ok(ForwardCache { activations, selectors })
    }

    /// Gradient of the loss w.r.t. every parameter, given the gradient at the
    /// network output. Also returns the input gradient.
    pub fn backward<T: Real>(
        &self,
        params: &[T],
        cache: &ForwardCache<T>,
        grad_output: Tensor<T>,
    ) -> Result<(Vec<T>, Tensor<T>)> {
        if cache.activations.len() != self.layers.len() + 1 || cache.selectors.len() != self.layers.len() {
            return Err(Error::NoForwardCache);
        }
        self.check(params.len(), cache.activations[0].shape())?;
        let mut grads = alloc::vec![T::zero(); self.param_count];
        let mut g = grad_output;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &cache.activations[i];
            g = match layer {
                Layer::Conv { spec, offset } => {
                    let (w, _) = Self::split(spec, *offset, params);
                    let cg = conv2d_backward(x, &cache.activations[i + 1], spec, w, &g, true)?;
                    let n = spec.weight_count();
                    grads[*offset..*offset + n].copy_from_slice(&cg.weights);
                    grads[*offset + n..*offset + n + spec.out_channels].copy_from_slice(&cg.bias);
                    cg.input.expect("requested")
                }
                Layer::Pool => maxpool_2x1_backward(x.shape(), &cache.selectors[i], &g)?,
            };
        }
        Ok((grads, g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heights(arch: &FcnArchitecture) -> Vec<usize> {
        let net = arch.network().unwrap();
        let mut hs = alloc::vec![arch.input_shape.0];
        for s in net.shape_trace() {
            if *hs.last().unwrap() != s.1 {
                hs.push(s.1);
            }
        }
        hs
    }

    #[test]
    fn layer_counts() {
        for profile in [Profile::Paper, Profile::Desk] {
            assert_eq!(FcnArchitecture::for_profile(ArchKind::Shallow, profile).layer_count(), 15);
            assert_eq!(FcnArchitecture::for_profile(ArchKind::Deep, profile).layer_count(), 21);
        }
    }

    #[test]
    fn shape_traces() {
        let shallow = FcnArchitecture::paper(ArchKind::Shallow);
        assert_eq!(heights(&shallow), [154, 77, 39, 20, 1]);
        assert_eq!(shallow.blocks[3].convs[2].kernel, (20, 5));
        let deep = FcnArchitecture::paper(ArchKind::Deep);
        assert_eq!(heights(&deep), [1024, 512, 256, 128, 64, 32, 16, 1]);
        assert_eq!(deep.blocks[6].convs[2].kernel, (16, 5));
        assert_eq!(heights(&FcnArchitecture::desk(ArchKind::Shallow)), [39, 20, 10, 5, 1]);
        assert_eq!(heights(&FcnArchitecture::desk(ArchKind::Deep)), [256, 128, 64, 32, 16, 8, 4, 1]);
        for kind in [ArchKind::Shallow, ArchKind::Deep] {
            let net = FcnArchitecture::paper(kind).network().unwrap();
            assert!(net.shape_trace().iter().all(|s| s.2 == 2048));
            assert_eq!(net.output_shape(), (1, 1, 2048));
            assert_eq!(FcnArchitecture::desk(kind).network().unwrap().output_shape(), (1, 1, 512));
        }
    }

    #[test]
    fn channel_plans() {
        let widths = |a: &FcnArchitecture| -> Vec<usize> { a.conv_layers().map(|c| c.out_channels).collect() };
        assert_eq!(
            widths(&FcnArchitecture::paper(ArchKind::Shallow)),
            [8, 8, 8, 16, 16, 16, 32, 32, 32, 64, 64, 1]
        );
        assert_eq!(
            widths(&FcnArchitecture::paper(ArchKind::Deep)),
            [8, 8, 8, 8, 16, 16, 16, 16, 32, 32, 64, 64, 128, 128, 1]
        );
        assert_eq!(
            widths(&FcnArchitecture::desk(ArchKind::Deep)),
            [2, 2, 2, 2, 4, 4, 4, 4, 8, 8, 16, 16, 32, 32, 1]
        );
        for a in [FcnArchitecture::paper(ArchKind::Deep), FcnArchitecture::desk(ArchKind::Shallow)] {
            for c in a.conv_layers() {
                assert_eq!(c.kernel.1, 5);
                assert!(c.kernel.0 == 5 || c.vertical_padding == Padding::Valid);
            }
        }
    }

    #[test]
    fn zero_input_desk_forward_shapes() {
        for kind in [ArchKind::Shallow, ArchKind::Deep] {
            let arch = FcnArchitecture::desk(kind);
            let net = arch.network().unwrap();
            let params: Vec<f32> = net.init_params(1);
            let x = Tensor::zeros(1, arch.input_shape.0, arch.input_shape.1);
            assert_eq!(net.forward(&params, &x).unwrap().shape(), (1, 1, 512));
        }
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let net = FcnArchitecture::desk(ArchKind::Shallow).network().unwrap();
        let a: Vec<f64> = net.init_params(3);
        assert_eq!(a, net.init_params::<f64>(3));
        assert_ne!(a, net.init_params::<f64>(4));
        assert_eq!(a.len(), net.param_count());
        // first layer: fan-in 25, bound sqrt(6/25)
        assert!(a[..50].iter().all(|v| v.abs() < (0.24f64).sqrt()));
        assert!(a[50..52].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_needs_cache() {
        let net = FcnArchitecture::desk(ArchKind::Shallow).network().unwrap();
        let params: Vec<f64> = net.init_params(0);
        let r = net.backward(&params, &ForwardCache::default(), Tensor::zeros(1, 1, 512));
        assert!(matches!(r, Err(Error::NoForwardCache)));
    }

    #[test]
    fn parse_kind() {
        assert_eq!("deep".parse::<ArchKind>().unwrap(), ArchKind::Deep);
        assert!("wide".parse::<ArchKind>().is_err());
        assert_eq!(ArchKind::from_id(ArchKind::Shallow.id()), Some(ArchKind::Shallow));
    }
}
