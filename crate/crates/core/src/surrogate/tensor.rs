//! Scalar trait and the dense kernels the network is built on.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

/// Floating-point type the network can run in (`f32` for training and
/// inference, `f64` for gradient checks).
pub trait Real:
    Float + AddAssign + SubAssign + MulAssign + Sum + Debug + Default + Send + Sync + 'static
{
    fn of(x: f64) -> Self;
    fn to_f64(self) -> f64;

    /// `C += A * B` with row-major `C` (row stride `rsc`).
    ///
    /// # Safety
    /// Pointers and strides must describe valid, non-aliasing matrices.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        c: *mut Self,
        rsc: isize,
    );
}

impl Real for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        c: *mut Self,
        rsc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, 1.0, c, rsc, 1)
    }
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        c: *mut Self,
        rsc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, 1.0, c, rsc, 1)
    }
}

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| U::of(x.to_f64())).collect(),
        }
    }
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Dot product with eight independent accumulators so the loop vectorizes.
#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let chunks = n / 8;
    for c in 0..chunks {
        let (x, y) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for i in chunks * 8..n {
        tail += a[i] * b[i];
    }
    let mut total = tail;
    for v in acc {
        total += v;
    }
    total
}

/// Row/column strides of a matrix operand.
#[derive(Clone, Copy)]
pub(crate) struct Strides {
    row: isize,
    col: isize,
}

impl Strides {
    /// Row-major `rows x cols`.
    fn row_major(cols: usize) -> Self {
        Self { row: cols as isize, col: 1 }
    }

    /// Transpose view of a row-major matrix with `cols` columns.
    fn transposed(cols: usize) -> Self {
        Self { row: 1, col: cols as isize }
    }
}

/// `c (m x n) += a (m x k) * b (k x n)` for arbitrary operand strides.
fn gemm_acc<T: Real>(
    (m, k, n): (usize, usize, usize),
    a: &[T],
    sa: Strides,
    b: &[T],
    sb: Strides,
    c: &mut [T],
) {
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    let extent = |s: Strides, r: usize, cl: usize| {
        (r as isize - 1) * s.row + (cl as isize - 1) * s.col + 1
    };
    assert!(a.len() as isize >= extent(sa, m, k));
    assert!(b.len() as isize >= extent(sb, k, n));
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above keep every strided access in bounds and
    // `c` does not alias `a` or `b` (it is borrowed mutably).
    unsafe {
        T::gemm(
            m,
            k,
            n,
            a.as_ptr(),
            sa.row,
            sa.col,
            b.as_ptr(),
            sb.row,
            sb.col,
            c.as_mut_ptr(),
            n as isize,
        )
    }
}

/// `out (m x n) += a (m x k) * b (k x n)`
pub(crate) fn matmul_acc<T: Real>(out: &mut [T], a: &[T], b: &[T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(out.len(), m * n);
    gemm_acc((m, k, n), a, Strides::row_major(k), b, Strides::row_major(n), out);
}

/// `out (m x k) += a (m x n) * b^T` where `b` is `k x n`.
pub(crate) fn matmul_bt_acc<T: Real>(
    out: &mut [T],
    a: &[T],
    b: &[T],
    m: usize,
    k: usize,
    n: usize,
) {
    debug_assert_eq!(out.len(), m * k);
    gemm_acc((m, n, k), a, Strides::row_major(n), b, Strides::transposed(n), out);
}

/// `out (k x n) += a^T * b` where `a` is `m x k` and `b` is `m x n`.
pub(crate) fn matmul_at_acc<T: Real>(
    out: &mut [T],
    a: &[T],
    b: &[T],
    m: usize,
    k: usize,
    n: usize,
) {
    debug_assert_eq!(out.len(), k * n);
    gemm_acc((k, m, n), a, Strides::transposed(k), b, Strides::row_major(n), out);
}

/// Unfolds a `channels x h x w` image into a `(channels*k*k) x (h*w)`
/// patch matrix for a same-padded `k x k` convolution.
pub(crate) fn im2col<T: Real>(input: &[T], channels: usize, h: usize, w: usize, k: usize, col: &mut Vec<T>) {
    let pad = (k / 2) as isize;
    col.clear();
    col.resize(channels * k * k * h * w, T::zero());
    for c in 0..channels {
        let plane = &input[c * h * w..(c + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = ((c * k + ky) * k + kx) * h * w;
                let dy = ky as isize - pad;
                let dx = kx as isize - pad;
                let x0 = (-dx).max(0) as usize;
                let x1 = ((w as isize) - dx).min(w as isize).max(0) as usize;
                if x0 >= x1 {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = sy as usize * w;
                    let sx0 = (x0 as isize + dx) as usize;
                    let dst = row + y * w;
                    col[dst + x0..dst + x1].copy_from_slice(&plane[src + sx0..src + sx0 + (x1 - x0)]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch-matrix gradients back onto the image.
pub(crate) fn col2im<T: Real>(col: &[T], channels: usize, h: usize, w: usize, k: usize, out: &mut [T]) {
    let pad = (k / 2) as isize;
    for c in 0..channels {
        let plane = &mut out[c * h * w..(c + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = ((c * k + ky) * k + kx) * h * w;
                let dy = ky as isize - pad;
                let dx = kx as isize - pad;
                let x0 = (-dx).max(0) as usize;
                let x1 = ((w as isize) - dx).min(w as isize).max(0) as usize;
                if x0 >= x1 {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = sy as usize * w;
                    let sx0 = (x0 as isize + dx) as usize;
                    let dst = row + y * w;
                    for (o, &g) in plane[src + sx0..src + sx0 + (x1 - x0)]
                        .iter_mut()
                        .zip(&col[dst + x0..dst + x1])
                    {
                        *o += g;
                    }
                }
            }
        }
    }
}
