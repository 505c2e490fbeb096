//! Central finite-difference check of the analytic gradients.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::{Activation, Block, ConvLayerSpec, ForwardCache, Network, Padding};
use super::layers::{mse, Tensor};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Coordinates compared.
    pub checked: usize,
    /// Coordinates whose perturbation changed a ReLU mask or pool choice.
    pub skipped: usize,
}

/// Denominator floor of the relative error.
const REL_FLOOR: f64 = 1e-6;

fn pattern(cache: &ForwardCache<f64>) -> Vec<u8> {
    let mut out = Vec::new();
    let n = cache.activations.len();
    // the network output is linear; only hidden activations carry kinks
    for a in &cache.activations[1..n.saturating_sub(1)] {
        out.extend(a.data.iter().map(|&v| (v > 0.0) as u8));
    }
    for s in &cache.selectors {
        out.extend_from_slice(s);
    }
    out
}

fn loss_and_pattern(net: &Network, params: &[f64], input: &Tensor<f64>, target: &[f64]) -> Result<(f64, Vec<u8>)> {
    let cache = net.forward_train(params, input.clone())?;
    let out = cache.output().expect("non-empty network");
    Ok((mse(&out.data, target)?.0, pattern(&cache)))
}

/// Compares the reverse-mode gradient of the MSE loss against central
/// differences with step `h`, for every parameter and every input element.
pub fn check_network(net: &Network, params: &[f64], input: &Tensor<f64>, target: &[f64], h: f64) -> Result<GradCheck> {
    let cache = net.forward_train(params, input.clone())?;
    let out = cache.output().expect("non-empty network").clone();
    let (_, g) = mse(&out.data, target)?;
    let (c, hh, w) = out.shape();
    let (param_grads, input_grads) = net.backward(params, &cache, Tensor::from_vec(c, hh, w, g)?)?;
    let base = pattern(&cache);

    let mut report = GradCheck {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    let mut compare = |analytic: f64, plus: (f64, Vec<u8>), minus: (f64, Vec<u8>)| {
        if plus.1 != base || minus.1 != base {
            report.skipped += 1;
            return;
        }
        let numeric = (plus.0 - minus.0) / (2.0 * h);
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR);
        report.max_rel_error = report.max_rel_error.max(err);
        report.checked += 1;
    };

    let mut p = params.to_vec();
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let plus = loss_and_pattern(net, &p, input, target)?;
        p[i] = orig - h;
        let minus = loss_and_pattern(net, &p, input, target)?;
        p[i] = orig;
        compare(param_grads[i], plus, minus);
    }
    let mut x = input.clone();
    for i in 0..x.data.len() {
        let orig = x.data[i];
        x.data[i] = orig + h;
        let plus = loss_and_pattern(net, params, &x, target)?;
        x.data[i] = orig - h;
        let minus = loss_and_pattern(net, params, &x, target)?;
        x.data[i] = orig;
        compare(input_grads.data[i], plus, minus);
    }
    Ok(report)
}

/// Which layer type a random instance isolates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerCase {
    /// Linear conv, vertically same-padded.
    ConvSame,
    /// Linear conv whose kernel spans the input height.
    ConvValid,
    /// Conv followed by ReLU.
    Relu,
    /// Linear conv then 2x1 max-pool (odd or even height).
    Pool,
    /// Two conv layers with ReLU and pooling between, 6 x 8 input.
    Stack,
}

impl LayerCase {
    pub const ALL: [LayerCase; 5] = [
        LayerCase::ConvSame,
        LayerCase::ConvValid,
        LayerCase::Relu,
        LayerCase::Pool,
        LayerCase::Stack,
    ];
}

/// A small random network with parameters, input and target.
#[derive(Debug, Clone)]
pub struct Instance {
    pub network: Network,
    pub params: Vec<f64>,
    pub input: Tensor<f64>,
    pub target: Vec<f64>,
}

pub fn random_instance(case: LayerCase, seed: u64) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cin = rng.random_range(1..=2);
    let cout = rng.random_range(1..=3);
    let (h, w) = match case {
        LayerCase::Stack => (6, 8),
        _ => (rng.random_range(1..=5), rng.random_range(1..=7)),
    };
    let conv = |cin, cout, kh, padding, activation| ConvLayerSpec {
        in_channels: cin,
        out_channels: cout,
        kernel: (kh, 5),
        vertical_padding: padding,
        activation,
    };
    let blocks = match case {
        LayerCase::ConvSame => alloc::vec![Block {
            convs: alloc::vec![conv(cin, cout, 5, Padding::Same, Activation::None)],
            pool: false,
        }],
        LayerCase::ConvValid => alloc::vec![Block {
            convs: alloc::vec![conv(cin, cout, h, Padding::Valid, Activation::None)],
            pool: false,
        }],
        LayerCase::Relu => alloc::vec![Block {
            convs: alloc::vec![conv(cin, cout, 5, Padding::Same, Activation::Relu)],
            pool: false,
        }],
        LayerCase::Pool => alloc::vec![Block {
            convs: alloc::vec![conv(cin, cout, 5, Padding::Same, Activation::None)],
            pool: true,
        }],
        LayerCase::Stack => alloc::vec![
            Block {
                convs: alloc::vec![conv(cin, cout, 5, Padding::Same, Activation::Relu)],
                pool: true,
            },
            Block {
                convs: alloc::vec![conv(cout, 1, 3, Padding::Valid, Activation::None)],
                pool: false,
            },
        ],
    };
    let network = Network::new((cin, h, w), &blocks)?;
    let params = (0..network.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let input = Tensor::from_vec(cin, h, w, (0..cin * h * w).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let (oc, oh, ow) = network.output_shape();
    let target = (0..oc * oh * ow).map(|_| rng.random_range(-1.0..1.0)).collect();
    Ok(Instance {
        network,
        params,
        input,
        target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_layer_type_matches_finite_differences() {
        for case in LayerCase::ALL {
            let mut checked = 0;
            for seed in 0..20 {
                let inst = random_instance(case, seed).unwrap();
                let r = check_network(&inst.network, &inst.params, &inst.input, &inst.target, 1e-3).unwrap();
                assert!(r.max_rel_error < 1e-4, "{case:?} seed {seed}: {r:?}");
                assert!(r.skipped <= r.checked, "{case:?} seed {seed}: {r:?}");
                checked += r.checked;
            }
            assert!(checked > 100, "{case:?}");
        }
    }
}
