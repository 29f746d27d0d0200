//! Plain slice kernels shared by the tape and by non-differentiable code paths.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// `c = op(a)·op(b)` (or `c += ...` when `accumulate`), with `op(a)` of shape
/// m×k and `op(b)` of shape k×n. `a_t` means `a` is stored k×m row-major.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the asserts above pin every slice to the extent implied by the
    // dimensions and strides handed to dgemm.
    unsafe {
        matrixmultiply::dgemm(
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

pub fn transpose(src: &[f64], m: usize, n: usize, dst: &mut [f64]) {
    for i in 0..m {
        for j in 0..n {
            dst[j * m + i] = src[i * n + j];
        }
    }
}

/// Row-wise softmax with per-row max subtraction.
pub fn softmax_rows(x: &[f64], cols: usize, out: &mut [f64]) {
    for (row, orow) in x.chunks_exact(cols).zip(out.chunks_exact_mut(cols)) {
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for (o, &v) in orow.iter_mut().zip(row) {
            *o = (v - mx).exp();
            s += *o;
        }
        let inv = 1.0 / s;
        orow.iter_mut().for_each(|o| *o *= inv);
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Number of non-negative frequency bins for a length-`t` real sequence.
pub fn rdft_bins(t: usize) -> usize {
    t / 2 + 1
}

/// Unnormalized forward DFT of a real sequence, non-negative bins only.
pub fn rdft(x: &[f64]) -> Vec<Complex64> {
    let t = x.len();
    assert!(t >= 1, "rdft of an empty sequence");
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(t));
    fft.process(&mut buf);
    buf.truncate(rdft_bins(t));
    buf
}

/// Adjoint of [`rdft`] viewed as a real-linear map R^T → R^{2K}:
/// `out[t] = Σ_k re_k cos(2πkt/T) − im_k sin(2πkt/T)`.
pub fn rdft_adjoint(re: &[f64], im: &[f64], t: usize, out: &mut [f64]) {
    let k = rdft_bins(t);
    assert_eq!(re.len(), k);
    assert_eq!(im.len(), k);
    let mut buf = vec![Complex64::new(0.0, 0.0); t];
    for i in 0..k {
        buf[i] = Complex64::new(re[i], im[i]);
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(t));
    fft.process(&mut buf);
    for (o, c) in out.iter_mut().zip(&buf) {
        *o += c.re;
    }
}

/// Weight of bin `k` when summing one-sided spectra so the result matches the
/// full two-sided sum: 1 for DC (and Nyquist when `t` is even), 2 otherwise.
pub fn onesided_weight(k: usize, t: usize) -> f64 {
    if k == 0 || (t % 2 == 0 && k == t / 2) {
        1.0
    } else {
        2.0
    }
}
