use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

/// Semi-orthogonal `rows x cols` matrix scaled by `gain`.
///
/// QR of a Gaussian sample with the signs of `diag(R)` folded into `Q`, so the
/// result is uniformly distributed. Tall matrices get orthonormal columns,
/// wide ones orthonormal rows.
pub fn orthogonal_init<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    gain: f64,
    rng: &mut R,
) -> Array2<f64> {
    assert!(
        rows >= 1 && cols >= 1,
        "orthogonal_init needs a non-empty shape"
    );
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let sample = DMatrix::<f64>::from_fn(tall, short, |_, _| rng.sample(StandardNormal));
    let qr = sample.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..short {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Array2::from_shape_fn((rows, cols), |(i, j)| {
        let x = if rows >= cols { q[(i, j)] } else { q[(j, i)] };
        gain * x
    })
}
