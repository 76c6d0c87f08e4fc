//! Forward and backward kernels over channel-major (`C×H×W`) activations.

/// `c = op(a)·op(b) + beta·c` where `op(a)` is `m×k` and `op(b)` is `k×n`,
/// all row-major.
#[allow(clippy::too_many_arguments)]
pub fn gemm(m: usize, k: usize, n: usize, a: &[f32], trans_a: bool, b: &[f32], trans_b: bool, c: &mut [f32], beta: f32) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the strides above address exactly the checked slice lengths.
    unsafe {
        matrixmultiply::sgemm(
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

/// Unfold 3×3 same-padded neighbourhoods into a `(C·9)×(H·W)` matrix.
pub fn im2col(input: &[f32], channels: usize, h: usize, w: usize, cols: &mut Vec<f32>) {
    let hw = h * w;
    cols.clear();
    cols.resize(channels * 9 * hw, 0.0);
    for c in 0..channels {
        let plane = &input[c * hw..(c + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[((c * 9) + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &plane[sy as usize * w..][..w];
                    let dst = &mut row[y * w..][..w];
                    match kx {
                        0 => dst[1..].copy_from_slice(&src[..w - 1]),
                        1 => dst.copy_from_slice(src),
                        _ => dst[..w - 1].copy_from_slice(&src[1..]),
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulate columns back onto the input grid.
pub fn col2im(cols: &[f32], channels: usize, h: usize, w: usize, out: &mut [f32]) {
    let hw = h * w;
    out.iter_mut().for_each(|v| *v = 0.0);
    for c in 0..channels {
        let plane = &mut out[c * hw..(c + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[((c * 9) + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[sy as usize * w..][..w];
                    let src = &row[y * w..][..w];
                    match kx {
                        0 => dst[..w - 1].iter_mut().zip(&src[1..]).for_each(|(d, s)| *d += s),
                        1 => dst.iter_mut().zip(src).for_each(|(d, s)| *d += s),
                        _ => dst[1..].iter_mut().zip(&src[..w - 1]).for_each(|(d, s)| *d += s),
                    }
                }
            }
        }
    }
}

pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// 2×2 stride-2 max-pool; records the flat input index of each maximum.
pub fn maxpool_forward(input: &[f32], channels: usize, h: usize, w: usize, argmax: &mut Vec<u32>) -> Vec<f32> {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; channels * oh * ow];
    argmax.clear();
    argmax.resize(out.len(), 0);
    for c in 0..channels {
        for y in 0..oh {
            for x in 0..ow {
                let mut best = c * h * w + 2 * y * w + 2 * x;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = c * h * w + (2 * y + dy) * w + 2 * x + dx;
                    if input[i] > input[best] {
                        best = i;
                    }
                }
                let o = (c * oh + y) * ow + x;
                out[o] = input[best];
                argmax[o] = best as u32;
            }
        }
    }
    out
}

pub fn maxpool_backward(grad_out: &[f32], argmax: &[u32], input_len: usize) -> Vec<f32> {
    let mut grad = vec![0.0; input_len];
    for (g, &i) in grad_out.iter().zip(argmax) {
        grad[i as usize] += g;
    }
    grad
}

/// Nearest-neighbour 2× upsampling.
pub fn upsample_forward(input: &[f32], channels: usize, h: usize, w: usize) -> Vec<f32> {
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = vec![0.0; channels * oh * ow];
    for c in 0..channels {
        for y in 0..oh {
            for x in 0..ow {
                out[(c * oh + y) * ow + x] = input[(c * h + y / 2) * w + x / 2];
            }
        }
    }
    out
}

pub fn upsample_backward(grad_out: &[f32], channels: usize, h: usize, w: usize) -> Vec<f32> {
    let (oh, ow) = (2 * h, 2 * w);
    let mut grad = vec![0.0; channels * h * w];
    for c in 0..channels {
        for y in 0..oh {
            for x in 0..ow {
                grad[(c * h + y / 2) * w + x / 2] += grad_out[(c * oh + y) * ow + x];
            }
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    /// Direct 3×3 same-padded convolution by nested loops.
    fn conv_reference(input: &[f32], weight: &[f32], cin: usize, cout: usize, h: usize, w: usize) -> Vec<f32> {
        let mut out = vec![0.0; cout * h * w];
        for o in 0..cout {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0;
                    for c in 0..cin {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let sy = y as isize + ky as isize - 1;
                                let sx = x as isize + kx as isize - 1;
                                if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w {
                                    acc += weight[((o * cin + c) * 3 + ky) * 3 + kx] * input[(c * h + sy as usize) * w + sx as usize];
                                }
                            }
                        }
                    }
                    out[(o * h + y) * w + x] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn im2col_gemm_matches_direct_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (cin, cout, h, w) = (3, 4, 6, 5);
        let input = random(cin * h * w, &mut rng);
        let weight = random(cout * cin * 9, &mut rng);
        let mut cols = Vec::new();
        im2col(&input, cin, h, w, &mut cols);
        let mut out = vec![0.0; cout * h * w];
        gemm(cout, cin * 9, h * w, &weight, false, &cols, false, &mut out, 0.0);
        let expected = conv_reference(&input, &weight, cin, cout, h, w);
        for (a, b) in out.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), y> == <x, col2im(y)>
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (c, h, w) = (2, 5, 7);
        let x = random(c * h * w, &mut rng);
        let y = random(c * 9 * h * w, &mut rng);
        let mut cols = Vec::new();
        im2col(&x, c, h, w, &mut cols);
        let mut back = vec![0.0; c * h * w];
        col2im(&y, c, h, w, &mut back);
        let lhs: f64 = cols.iter().zip(&y).map(|(a, b)| (*a as f64) * (*b as f64)).sum();
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| (*a as f64) * (*b as f64)).sum();
        assert!((lhs - rhs).abs() < 1e-4, "{lhs} vs {rhs}");
    }

    #[test]
    fn gemm_transposes() {
        // a = [[1,2],[3,4]], b = [[5,6],[7,8]]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut c = [0.0; 4];
        gemm(2, 2, 2, &a, true, &b, false, &mut c, 0.0);
        assert_eq!(c, [26.0, 30.0, 38.0, 44.0]);
        gemm(2, 2, 2, &a, false, &b, true, &mut c, 0.0);
        assert_eq!(c, [17.0, 23.0, 39.0, 53.0]);
    }

    #[test]
    fn pool_and_upsample_round_trip() {
        let input = [1.0, 5.0, 2.0, 0.0, 3.0, 4.0, 9.0, 1.0];
        // 1 channel, 2x4
        let mut argmax = Vec::new();
        let pooled = maxpool_forward(&input, 1, 2, 4, &mut argmax);
        assert_eq!(pooled, vec![5.0, 9.0]);
        assert_eq!(argmax, vec![1, 6]);
        let g = maxpool_backward(&[1.0, 2.0], &argmax, 8);
        assert_eq!(g, vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0]);
        let up = upsample_forward(&pooled, 1, 1, 2);
        assert_eq!(up, vec![5.0, 5.0, 9.0, 9.0, 5.0, 5.0, 9.0, 9.0]);
        assert_eq!(upsample_backward(&up, 1, 1, 2), vec![20.0, 36.0]);
    }
}
