//! Fully convolutional spectrogram-to-profile networks: layer kernels with
//! reverse-mode gradients, the two architectures, Adam, training, inference
//! and the model file format.

mod adam;
mod arch;
pub mod gradcheck;
mod layers;
mod model;
mod train;

pub use adam::{Adam, AdamConfig};
pub use arch::{Activation, ArchKind, DESK_CHANNEL_DIVISOR, Block, ConvLayerSpec, FcnArchitecture, ForwardCache, Network, Padding};
pub use layers::{
    conv2d_backward, conv2d_backward_with, conv2d_forward, conv2d_forward_with, maxpool_2x1_backward, maxpool_2x1_forward, mse, relu_backward,
    relu_forward, ConvGrads, ConvStrategy, Tensor,
};
pub use model::{FcnMitigation, FcnModel, Normalization, TrainingMeta, MODEL_MAGIC, MODEL_VERSION};
pub use train::{
    fit_normalization, mean_loss, sample_gradient, train, EpochRecord, GradientRunner, PairSource, RecordPairs,
    Sequential, TrainConfig, TrainOutcome,
};

use core::fmt::Debug;
use num_traits::Float;

/// Element type of the engine: `f32` for models, `f64` for gradient checks.
pub trait Real: Float + Default + Debug + Send + Sync + core::iter::Sum + core::ops::AddAssign + 'static {
    fn of(x: f64) -> Self;

    /// `C = alpha A B + beta C` with explicit row/column strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );
}

fn check_extent(len: usize, rows: usize, cols: usize, rs: isize, cs: isize) {
    if rows == 0 || cols == 0 {
        return;
    }
    let last = (rows as isize - 1) * rs + (cols as isize - 1) * cs;
    assert!(rs >= 0 && cs >= 0 && (last as usize) < len, "gemm operand out of bounds");
}

macro_rules! impl_real {
    ($t:ty, $gemm:path) => {
        impl Real for $t {
            fn of(x: f64) -> Self {
                x as $t
            }

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
                rsc: isize,
                csc: isize,
            ) {
                check_extent(a.len(), m, k, rsa, csa);
                check_extent(b.len(), k, n, rsb, csb);
                check_extent(c.len(), m, n, rsc, csc);
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: every operand extent was bounds-checked above and
                // `c` is exclusively borrowed.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        rsc,
                        csc,
                    )
                }
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_naive() {
        let (m, k, n) = (3, 4, 5);
        let a: alloc::vec::Vec<f64> = (0..m * k).map(|i| i as f64 * 0.5 - 1.0).collect();
        let b: alloc::vec::Vec<f64> = (0..k * n).map(|i| (i as f64).sin()).collect();
        let mut c = alloc::vec![1.0; m * n];
        f64::gemm(m, k, n, 2.0, &a, k as isize, 1, &b, n as isize, 1, 0.5, &mut c, n as isize, 1);
        for i in 0..m {
            for j in 0..n {
                let want: f64 = 0.5 + 2.0 * (0..k).map(|p| a[i * k + p] * b[p * n + j]).sum::<f64>();
                assert!((c[i * n + j] - want).abs() < 1e-12);
            }
        }
    }
}
