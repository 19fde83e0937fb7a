use nalgebra::DMatrix;
use num_traits::Float;

/// Result of a spectral-radius computation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Radius<T> {
    pub value: T,
    pub iterations: usize,
    /// `true` when the power iteration bracket did not close and the value
    /// came from a dense eigen-decomposition.
    pub fallback: bool,
}

pub const TOLERANCE: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 1_000_000;
const STALL_WINDOW: usize = 2_000;

/// Spectral radius of a square nonnegative matrix given row-major.
///
/// Power iteration on `A + I` from the all-ones vector. For any positive
/// vector `x` the Collatz-Wielandt ratios `min (Ax)_i / x_i` and
/// `max (Ax)_i / x_i` bracket the Perron root; iteration stops once the
/// bracket is narrower than `tol`. The shift makes the Perron root the unique
/// eigenvalue of largest modulus, so periodic blocks still converge. If the
/// bracket fails to close (reducible blocks can stall it) the radius is taken
/// from a dense eigen-decomposition instead.
pub fn spectral_radius<T: Float>(matrix: &[Vec<T>], tol: T, max_iter: usize) -> Radius<T> {
    let n = matrix.len();
    if n == 0 {
        return Radius { value: T::zero(), iterations: 0, fallback: false };
    }
    let mut x = vec![T::one(); n];
    let mut y = vec![T::zero(); n];
    let mut checkpoint = T::infinity();
    let mut spent = 0;
    for it in 1..=max_iter {
        spent = it;
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for (i, row) in matrix.iter().enumerate() {
            let ax = row.iter().zip(&x).fold(T::zero(), |acc, (&a, &xi)| acc + a * xi);
            y[i] = ax + x[i];
            let r = y[i] / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        if hi - lo <= tol {
            return Radius { value: (lo + hi) / (T::one() + T::one()) - T::one(), iterations: it, fallback: false };
        }
        if it % STALL_WINDOW == 0 {
            // a bracket that stops shrinking means a decoupled component
            if hi - lo > checkpoint / (T::one() + T::one()) {
                break;
            }
            checkpoint = hi - lo;
        }
        let norm = y.iter().fold(T::zero(), |m, &v| m.max(v));
        for (xi, &yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
        if x.iter().any(|&v| v <= T::min_positive_value()) {
            break;
        }
    }
    Radius { value: T::from(dense_radius(matrix)).unwrap_or_else(T::nan), iterations: spent, fallback: true }
}

fn dense_radius<T: Float>(matrix: &[Vec<T>]) -> f64 {
    let n = matrix.len();
    let m = DMatrix::from_fn(n, n, |i, j| matrix[i][j].to_f64().unwrap_or(f64::NAN));
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}
