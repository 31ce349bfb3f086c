//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating point sample type: `f32` for production runs, `f64` for oracles
/// and gradient checks.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Row-major `c = alpha * op(a) * op(b) + beta * c` where `op(a)` is
    /// `m x k` and `op(b)` is `k x n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        trans_a: bool,
        trans_b: bool,
        m: usize,
        n: usize,
        k: usize,
        alpha: Self,
        a: &[Self],
        b: &[Self],
        beta: Self,
        c: &mut [Self],
    );

    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("representable literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

fn strides(trans: bool, rows: usize, cols: usize) -> (isize, isize) {
    // logical matrix is rows x cols; stored row-major as given or transposed
    if trans {
        (1, rows as isize)
    } else {
        (cols as isize, 1)
    }
}

macro_rules! impl_scalar {
    ($t:ty, $kernel:path) => {
        impl Scalar for $t {
            fn gemm(
                trans_a: bool,
                trans_b: bool,
                m: usize,
                n: usize,
                k: usize,
                alpha: Self,
                a: &[Self],
                b: &[Self],
                beta: Self,
                c: &mut [Self],
            ) {
                assert!(a.len() >= m * k, "gemm: lhs too short");
                assert!(b.len() >= k * n, "gemm: rhs too short");
                assert!(c.len() >= m * n, "gemm: output too short");
                if m == 0 || n == 0 {
                    return;
                }
                let (rsa, csa) = strides(trans_a, m, k);
                let (rsb, csb) = strides(trans_b, k, n);
                // SAFETY: slice lengths were checked above against the
                // row-major extents implied by the strides.
                unsafe {
                    $kernel(
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
                        n as isize,
                        1,
                    );
                }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(ta: bool, tb: bool, m: usize, n: usize, k: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for p in 0..k {
                    let av = if ta { a[p * m + i] } else { a[i * k + p] };
                    let bv = if tb { b[j * k + p] } else { b[p * n + j] };
                    s += av * bv;
                }
                c[i * n + j] = s;
            }
        }
        c
    }

    #[test]
    fn gemm_matches_naive_for_all_transpositions() {
        let (m, n, k) = (5, 7, 3);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.91).cos()).collect();
        for ta in [false, true] {
            for tb in [false, true] {
                let want = naive(ta, tb, m, n, k, &a, &b);
                let mut got = vec![0.0; m * n];
                f64::gemm(ta, tb, m, n, k, 1.0, &a, &b, 0.0, &mut got);
                for (g, w) in got.iter().zip(&want) {
                    assert!((g - w).abs() < 1e-12);
                }
            }
        }
    }
}
