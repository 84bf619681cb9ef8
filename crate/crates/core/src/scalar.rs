use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

/// Floating-point element type of every tensor. Implemented for `f32`
/// (the default working precision) and `f64` (gradient checks).
pub trait Scalar:
    Float + Default + Debug + Display + Send + Sync + Sum + AddAssign + SubAssign + MulAssign + 'static
{
    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;

    /// Row-major `c = a·b (+ c if accumulate)` with optional transposes.
    ///
    /// `a` is `m×k` (or `k×m` when `trans_a`), `b` is `k×n` (or `n×k` when
    /// `trans_b`), `c` is `m×n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        trans_a: bool,
        b: &[Self],
        trans_b: bool,
        c: &mut [Self],
        accumulate: bool,
    );
}

#[inline]
fn strides(rows: usize, cols: usize, trans: bool) -> (isize, isize) {
    // logical (rows × cols); stored row-major either as-is or transposed
    if trans {
        (1, rows as isize)
    } else {
        (cols as isize, 1)
    }
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            #[inline]
            fn of(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                trans_a: bool,
                b: &[Self],
                trans_b: bool,
                c: &mut [Self],
                accumulate: bool,
            ) {
                assert!(a.len() >= m * k, "gemm: lhs too short");
                assert!(b.len() >= k * n, "gemm: rhs too short");
                assert!(c.len() >= m * n, "gemm: output too short");
                if m == 0 || n == 0 {
                    return;
                }
                if k == 0 {
                    if !accumulate {
                        c[..m * n].iter_mut().for_each(|v| *v = 0.0);
                    }
                    return;
                }
                let (rsa, csa) = strides(m, k, trans_a);
                let (rsb, csb) = strides(k, n, trans_b);
                let beta = if accumulate { 1.0 } else { 0.0 };
                // Narrow outputs run through the micro-kernel's masked edge
                // path; computing Cᵀ = BᵀAᵀ instead puts the long side first.
                let swap = m < 8 && n > m;
                // SAFETY: bounds asserted above; strides describe dense
                // row-major storage of the stated logical shapes.
                unsafe {
                    if swap {
                        $gemm(
                            n,
                            k,
                            m,
                            1.0,
                            b.as_ptr(),
                            csb,
                            rsb,
                            a.as_ptr(),
                            csa,
                            rsa,
                            beta,
                            c.as_mut_ptr(),
                            1,
                            n as isize,
                        );
                    } else {
                        $gemm(
                            m,
                            k,
                            n,
                            1.0,
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
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);
