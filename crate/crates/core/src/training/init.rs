use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linalg::Matrix;
use crate::model::{ModelConfig, ProjectionHead, Transform, TransformWeights};

/// Independent random streams derived from one user seed.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum Stream {
    Split = 1,
    Init = 2,
    Shuffle = 3,
    Negatives = 4,
    Diversity = 5,
}

pub(crate) fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// `√6 / √(rows + cols)`
pub fn xavier_bound(rows: usize, cols: usize) -> f64 {
    6f64.sqrt() / ((rows + cols) as f64).sqrt()
}

/// Entries i.i.d. uniform on `[−b, b]` with `b = √6/√(rows+cols)`, drawn
/// row-major.
pub fn xavier_init<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let b = xavier_bound(rows, cols);
    let dist = Uniform::new_inclusive(-b, b).expect("finite positive bound");
    let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    Matrix::from_vec(rows, cols, data).expect("length matches shape")
}

/// Xavier-initialized head; matrices drawn in the order `W_p, W_s, W_t`
/// (or `W_t1, W_t2`).
pub fn init_head<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<ProjectionHead> {
    config.validate()?;
    let (d, l) = (config.d, config.l);
    let wp = xavier_init(d, l, rng);
    let ws = xavier_init(d, l, rng);
    let transform = match config.transform {
        Transform::PToS | Transform::SToP => TransformWeights::Single(xavier_init(l, l, rng)),
        Transform::ThirdSpace => TransformWeights::Pair {
            pragmatic: xavier_init(l, l, rng),
            semantic: xavier_init(l, l, rng),
        },
    };
    ProjectionHead::new(*config, wp, ws, transform)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_by_hand() {
        assert!((xavier_bound(768, 64) - 0.084_920_777_6).abs() < 1e-9);
        assert!((xavier_bound(64, 64) - 6f64.sqrt() / 128f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn entries_within_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = xavier_init(768, 64, &mut rng);
        let b = xavier_bound(768, 64);
        assert!(m.as_slice().iter().all(|x| x.abs() <= b));
    }

    #[test]
    fn sample_mean_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = xavier_init(100, 100, &mut rng);
        let b = xavier_bound(100, 100);
        let mean = m.as_slice().iter().sum::<f64>() / 10_000.0;
        // std of U[−b, b] is b/√3
        assert!(mean.abs() < 3.0 * b / (3.0f64 * 10_000.0).sqrt());
    }

    #[test]
    fn streams_are_independent() {
        let a: u64 = rng_for(9, Stream::Split).random();
        let b: u64 = rng_for(9, Stream::Init).random();
        assert_ne!(a, b);
        let again: u64 = rng_for(9, Stream::Split).random();
        assert_eq!(a, again);
    }
}
