//! Independent reference implementations used only by tests.
//!
//! These are written as direct summations over plain nested vectors so they
//! share no code path with the im2col/GEMM kernels they check.
#![allow(dead_code, clippy::needless_range_loop)]

/// `x[b][c][t]`
pub type Grid = Vec<Vec<Vec<f64>>>;

/// Direct-summation cross-correlation, weights `w[o][i][k]`.
pub fn direct_conv1d(
    x: &Grid,
    w: &Grid,
    bias: &[f64],
    stride: usize,
    padding: usize,
) -> Grid {
    let batch = x.len();
    let in_ch = x[0].len();
    let t_in = x[0][0].len() as isize;
    let out_ch = w.len();
    let k = w[0][0].len();
    let t_out = ((t_in as usize + 2 * padding - k) / stride) + 1;
    let mut y = vec![vec![vec![0.0; t_out]; out_ch]; batch];
    for b in 0..batch {
        for o in 0..out_ch {
            for t in 0..t_out {
                let mut acc = bias[o];
                for i in 0..in_ch {
                    for kk in 0..k {
                        let s = (t * stride + kk) as isize - padding as isize;
                        if s >= 0 && s < t_in {
                            acc += w[o][i][kk] * x[b][i][s as usize];
                        }
                    }
                }
                y[b][o][t] = acc;
            }
        }
    }
    y
}

/// Direct scatter form of the transposed convolution, weights `w[i][o][k]`.
pub fn direct_transposed_conv1d(
    x: &Grid,
    w: &Grid,
    bias: &[f64],
    stride: usize,
    padding: usize,
) -> Grid {
    let batch = x.len();
    let in_ch = x[0].len();
    let t_in = x[0][0].len();
    let out_ch = w[0].len();
    let k = w[0][0].len();
    let t_out = (t_in - 1) * stride + k - 2 * padding;
    let mut y = vec![vec![vec![0.0; t_out]; out_ch]; batch];
    for b in 0..batch {
        for o in 0..out_ch {
            for t in 0..t_out {
                y[b][o][t] = bias[o];
            }
        }
        for i in 0..in_ch {
            for t in 0..t_in {
                for o in 0..out_ch {
                    for kk in 0..k {
                        let s = (t * stride + kk) as isize - padding as isize;
                        if s >= 0 && (s as usize) < t_out {
                            y[b][o][s as usize] += w[i][o][kk] * x[b][i][t];
                        }
                    }
                }
            }
        }
    }
    y
}

/// Central difference of `f` along every coordinate of `x`.
pub fn central_difference(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn grid_from_flat(flat: &[f64], d0: usize, d1: usize, d2: usize) -> Grid {
    (0..d0)
        .map(|a| {
            (0..d1)
                .map(|b| flat[(a * d1 + b) * d2..(a * d1 + b + 1) * d2].to_vec())
                .collect()
        })
        .collect()
}

pub fn flatten(g: &Grid) -> Vec<f64> {
    g.iter().flatten().flatten().copied().collect()
}

pub fn max_rel_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
