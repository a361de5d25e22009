//! Flat-parameter linear algebra. All network weights live in one `Vec<f64>`
//! addressed through [`Mat`]/[`Bias`] views, which keeps the optimizer,
//! finite-difference checks and checkpointing trivial.

use alloc::vec::Vec;

/// Row-major matrix view into the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mat {
    pub off: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Mat {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bias {
    pub off: usize,
    pub len: usize,
}

/// out = M x
pub fn matvec(params: &[f64], m: Mat, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(x.len(), m.cols);
    debug_assert_eq!(out.len(), m.rows);
    let w = &params[m.off..m.off + m.len()];
    for (o, row) in out.iter_mut().zip(w.chunks_exact(m.cols)) {
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

/// out += M x
pub fn matvec_add(params: &[f64], m: Mat, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(x.len(), m.cols);
    debug_assert_eq!(out.len(), m.rows);
    let w = &params[m.off..m.off + m.len()];
    for (o, row) in out.iter_mut().zip(w.chunks_exact(m.cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// out += M^T dy
pub fn matvec_transpose_add(params: &[f64], m: Mat, dy: &[f64], out: &mut [f64]) {
    debug_assert_eq!(dy.len(), m.rows);
    debug_assert_eq!(out.len(), m.cols);
    let w = &params[m.off..m.off + m.len()];
    for (g, row) in dy.iter().zip(w.chunks_exact(m.cols)) {
        if *g == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(row) {
            *o += g * a;
        }
    }
}

/// G += dy x^T (outer-product accumulation into the gradient buffer)
pub fn accumulate_outer(grads: &mut [f64], m: Mat, dy: &[f64], x: &[f64]) {
    debug_assert_eq!(dy.len(), m.rows);
    debug_assert_eq!(x.len(), m.cols);
    let g = &mut grads[m.off..m.off + m.rows * m.cols];
    for (grow, d) in g.chunks_exact_mut(m.cols).zip(dy) {
        if *d == 0.0 {
            continue;
        }
        for (gv, xv) in grow.iter_mut().zip(x) {
            *gv += d * xv;
        }
    }
}

pub fn add_bias(params: &[f64], b: Bias, out: &mut [f64]) {
    debug_assert_eq!(out.len(), b.len);
    for (o, v) in out.iter_mut().zip(&params[b.off..b.off + b.len]) {
        *o += v;
    }
}

pub fn accumulate_bias(grads: &mut [f64], b: Bias, dy: &[f64]) {
    debug_assert_eq!(dy.len(), b.len);
    for (g, d) in grads[b.off..b.off + b.len].iter_mut().zip(dy) {
        *g += d;
    }
}

pub fn tanh_inplace(v: &mut [f64]) {
    #[allow(unused_imports)]
use num_traits::Float;
    for x in v.iter_mut() {
        *x = x.tanh();
    }
}

/// dz = da * (1 - a^2) where `a` is the post-tanh activation.
pub fn tanh_backward(da: &[f64], a: &[f64]) -> Vec<f64> {
    da.iter().zip(a).map(|(d, y)| d * (1.0 - y * y)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn matvec_and_transpose_agree_with_hand_calc() {
        // M = [[1,2],[3,4],[5,6]] stored at offset 1
        let params = vec![9.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let m = Mat { off: 1, rows: 3, cols: 2 };
        let mut y = vec![0.0; 3];
        matvec(&params, m, &[1.0, -1.0], &mut y);
        assert_eq!(y, vec![-1.0, -1.0, -1.0]);

        let mut xt = vec![0.0; 2];
        matvec_transpose_add(&params, m, &[1.0, 0.0, 2.0], &mut xt);
        assert_eq!(xt, vec![11.0, 14.0]);
    }

    #[test]
    fn outer_accumulation() {
        let mut grads = vec![0.0; 6];
        let m = Mat { off: 0, rows: 2, cols: 3 };
        accumulate_outer(&mut grads, m, &[2.0, -1.0], &[1.0, 0.0, 3.0]);
        assert_eq!(grads, vec![2.0, 0.0, 6.0, -1.0, 0.0, -3.0]);
    }
}
