//! Raw NCHW kernels. Every backward routine *adds* into its gradient buffers.

/// Geometry of a 2-d convolution or pooling window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dSpec {
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub dilation: (usize, usize),
    pub groups: usize,
}

impl Conv2dSpec {
    pub fn new(stride: usize, padding: usize) -> Self {
        Conv2dSpec { stride: (stride, stride), padding: (padding, padding), dilation: (1, 1), groups: 1 }
    }

    pub fn with_dilation(mut self, dilation: usize) -> Self {
        self.dilation = (dilation, dilation);
        self
    }

    pub fn with_groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }

    pub fn asymmetric(stride: (usize, usize), padding: (usize, usize)) -> Self {
        Conv2dSpec { stride, padding, dilation: (1, 1), groups: 1 }
    }

    /// Output extent along one axis, or `None` if the window does not fit.
    pub fn out_len(input: usize, kernel: usize, stride: usize, pad: usize, dilation: usize) -> Option<usize> {
        let span = dilation * (kernel - 1) + 1;
        (input + 2 * pad).checked_sub(span).map(|d| d / stride + 1)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvDims {
    pub b: usize,
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub kh: usize,
    pub kw: usize,
    pub oh: usize,
    pub ow: usize,
}

/// Range of output columns `ox` for which `ox*s + k*d - p` lands in `0..w`.
#[inline]
fn valid_range(out: usize, w: usize, s: usize, offset: isize) -> (usize, usize) {
    // ix = ox*s + offset
    let lo = if offset >= 0 { 0 } else { ((-offset) as usize).div_ceil(s) };
    let hi_excl = if (w as isize) <= offset { 0 } else { ((w as isize - offset) as usize).div_ceil(s) };
    (lo.min(out), hi_excl.min(out))
}

pub(crate) fn conv2d_forward(x: &[f64], wt: &[f64], d: ConvDims, spec: Conv2dSpec) -> Vec<f64> {
    let mut out = vec![0.0; d.b * d.cout * d.oh * d.ow];
    let cin_g = d.cin / spec.groups;
    let cout_g = d.cout / spec.groups;
    let (sh, sw) = spec.stride;
    let (ph, pw) = spec.padding;
    let (dh, dw) = spec.dilation;
    for b in 0..d.b {
        for oc in 0..d.cout {
            let g = oc / cout_g;
            let obase = (b * d.cout + oc) * d.oh * d.ow;
            for icg in 0..cin_g {
                let ic = g * cin_g + icg;
                let ibase = (b * d.cin + ic) * d.h * d.w;
                for ky in 0..d.kh {
                    let yoff = (ky * dh) as isize - ph as isize;
                    let (oy_lo, oy_hi) = valid_range(d.oh, d.h, sh, yoff);
                    for kx in 0..d.kw {
                        let wv = wt[((oc * cin_g + icg) * d.kh + ky) * d.kw + kx];
                        let xoff = (kx * dw) as isize - pw as isize;
                        let (ox_lo, ox_hi) = valid_range(d.ow, d.w, sw, xoff);
                        for oy in oy_lo..oy_hi {
                            let iy = (oy * sh) as isize + yoff;
                            let irow = ibase + iy as usize * d.w;
                            let orow = obase + oy * d.ow;
                            for ox in ox_lo..ox_hi {
                                let ix = ((ox * sw) as isize + xoff) as usize;
                                out[orow + ox] += wv * x[irow + ix];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn conv2d_backward(
    x: &[f64],
    wt: &[f64],
    gout: &[f64],
    d: ConvDims,
    spec: Conv2dSpec,
    mut gx: Option<&mut [f64]>,
    mut gw: Option<&mut [f64]>,
) {
    let cin_g = d.cin / spec.groups;
    let cout_g = d.cout / spec.groups;
    let (sh, sw) = spec.stride;
    let (ph, pw) = spec.padding;
    let (dh, dw) = spec.dilation;
    for b in 0..d.b {
        for oc in 0..d.cout {
            let g = oc / cout_g;
            let obase = (b * d.cout + oc) * d.oh * d.ow;
            for icg in 0..cin_g {
                let ic = g * cin_g + icg;
                let ibase = (b * d.cin + ic) * d.h * d.w;
                for ky in 0..d.kh {
                    let yoff = (ky * dh) as isize - ph as isize;
                    let (oy_lo, oy_hi) = valid_range(d.oh, d.h, sh, yoff);
                    for kx in 0..d.kw {
                        let widx = ((oc * cin_g + icg) * d.kh + ky) * d.kw + kx;
                        let wv = wt[widx];
                        let xoff = (kx * dw) as isize - pw as isize;
                        let (ox_lo, ox_hi) = valid_range(d.ow, d.w, sw, xoff);
                        let mut acc = 0.0;
                        for oy in oy_lo..oy_hi {
                            let iy = (oy * sh) as isize + yoff;
                            let irow = ibase + iy as usize * d.w;
                            let orow = obase + oy * d.ow;
                            for ox in ox_lo..ox_hi {
                                let ix = ((ox * sw) as isize + xoff) as usize;
                                let go = gout[orow + ox];
                                acc += go * x[irow + ix];
                                if let Some(gx) = gx.as_deref_mut() {
                                    gx[irow + ix] += wv * go;
                                }
                            }
                        }
                        if let Some(gw) = gw.as_deref_mut() {
                            gw[widx] += acc;
                        }
                    }
                }
            }
        }
    }
}

/// Per-channel batch statistics: returns `(xhat, inv_std)`.
pub(crate) fn norm_forward(x: &[f64], b: usize, c: usize, hw: usize, eps: f64) -> (Vec<f64>, Vec<f64>) {
    let m = (b * hw) as f64;
    let mut xhat = vec![0.0; x.len()];
    let mut inv_std = vec![0.0; c];
    for ch in 0..c {
        let mut mean = 0.0;
        for bi in 0..b {
            let base = (bi * c + ch) * hw;
            mean += x[base..base + hw].iter().sum::<f64>();
        }
        mean /= m;
        let mut var = 0.0;
        for bi in 0..b {
            let base = (bi * c + ch) * hw;
            var += x[base..base + hw].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        }
        var /= m;
        let is = 1.0 / (var + eps).sqrt();
        inv_std[ch] = is;
        for bi in 0..b {
            let base = (bi * c + ch) * hw;
            for i in base..base + hw {
                xhat[i] = (x[i] - mean) * is;
            }
        }
    }
    (xhat, inv_std)
}

/// Gradient through `y = gamma * xhat + beta` and the batch statistics.
#[allow(clippy::too_many_arguments)]
pub(crate) fn norm_backward(
    xhat: &[f64],
    inv_std: &[f64],
    gamma: &[f64],
    gout: &[f64],
    b: usize,
    c: usize,
    hw: usize,
    gx: Option<&mut [f64]>,
    ggamma: Option<&mut [f64]>,
    gbeta: Option<&mut [f64]>,
) {
    let m = (b * hw) as f64;
    let mut sum_g = vec![0.0; c];
    let mut sum_gx = vec![0.0; c];
    for bi in 0..b {
        for ch in 0..c {
            let base = (bi * c + ch) * hw;
            for i in base..base + hw {
                sum_g[ch] += gout[i];
                sum_gx[ch] += gout[i] * xhat[i];
            }
        }
    }
    if let Some(gg) = ggamma {
        for ch in 0..c {
            gg[ch] += sum_gx[ch];
        }
    }
    if let Some(gb) = gbeta {
        for ch in 0..c {
            gb[ch] += sum_g[ch];
        }
    }
    if let Some(gx) = gx {
        for bi in 0..b {
            for ch in 0..c {
                let base = (bi * c + ch) * hw;
                let k = gamma[ch] * inv_std[ch] / m;
                for i in base..base + hw {
                    gx[i] += k * (m * gout[i] - sum_g[ch] - xhat[i] * sum_gx[ch]);
                }
            }
        }
    }
}

/// Max pooling; returns the output and the flat input index of each maximum.
pub(crate) fn max_pool_forward(x: &[f64], d: ConvDims, spec: Conv2dSpec) -> (Vec<f64>, Vec<usize>) {
    let n = d.b * d.cin * d.oh * d.ow;
    let mut out = vec![0.0; n];
    let mut arg = vec![0; n];
    let mut o = 0;
    for bc in 0..d.b * d.cin {
        let ibase = bc * d.h * d.w;
        for oy in 0..d.oh {
            for ox in 0..d.ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_i = usize::MAX;
                for ky in 0..d.kh {
                    let iy = (oy * spec.stride.0 + ky) as isize - spec.padding.0 as isize;
                    if iy < 0 || iy >= d.h as isize {
                        continue;
                    }
                    for kx in 0..d.kw {
                        let ix = (ox * spec.stride.1 + kx) as isize - spec.padding.1 as isize;
                        if ix < 0 || ix >= d.w as isize {
                            continue;
                        }
                        let i = ibase + iy as usize * d.w + ix as usize;
                        if x[i] > best {
                            best = x[i];
                            best_i = i;
                        }
                    }
                }
                out[o] = best;
                arg[o] = best_i;
                o += 1;
            }
        }
    }
    (out, arg)
}

/// Window of valid input rows/cols for pooling output position `o`.
#[inline]
fn pool_window(o: usize, k: usize, s: usize, p: usize, len: usize) -> (usize, usize) {
    let start = (o * s) as isize - p as isize;
    let lo = start.max(0) as usize;
    let hi = ((start + k as isize).min(len as isize)).max(0) as usize;
    (lo, hi)
}

/// Average pooling whose divisor counts only in-bounds cells.
pub(crate) fn avg_pool_forward(x: &[f64], d: ConvDims, spec: Conv2dSpec) -> Vec<f64> {
    let mut out = vec![0.0; d.b * d.cin * d.oh * d.ow];
    let mut o = 0;
    for bc in 0..d.b * d.cin {
        let ibase = bc * d.h * d.w;
        for oy in 0..d.oh {
            let (y0, y1) = pool_window(oy, d.kh, spec.stride.0, spec.padding.0, d.h);
            for ox in 0..d.ow {
                let (x0, x1) = pool_window(ox, d.kw, spec.stride.1, spec.padding.1, d.w);
                let mut s = 0.0;
                for iy in y0..y1 {
                    for ix in x0..x1 {
                        s += x[ibase + iy * d.w + ix];
                    }
                }
                out[o] = s / ((y1 - y0) * (x1 - x0)) as f64;
                o += 1;
            }
        }
    }
    out
}

pub(crate) fn avg_pool_backward(gout: &[f64], d: ConvDims, spec: Conv2dSpec, gx: &mut [f64]) {
    let mut o = 0;
    for bc in 0..d.b * d.cin {
        let ibase = bc * d.h * d.w;
        for oy in 0..d.oh {
            let (y0, y1) = pool_window(oy, d.kh, spec.stride.0, spec.padding.0, d.h);
            for ox in 0..d.ow {
                let (x0, x1) = pool_window(ox, d.kw, spec.stride.1, spec.padding.1, d.w);
                let g = gout[o] / ((y1 - y0) * (x1 - x0)) as f64;
                for iy in y0..y1 {
                    for ix in x0..x1 {
                        gx[ibase + iy * d.w + ix] += g;
                    }
                }
                o += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct definition with explicit bounds checks.
    fn naive_conv(x: &[f64], wt: &[f64], d: ConvDims, s: Conv2dSpec) -> Vec<f64> {
        let cin_g = d.cin / s.groups;
        let cout_g = d.cout / s.groups;
        let mut out = vec![0.0; d.b * d.cout * d.oh * d.ow];
        for b in 0..d.b {
            for oc in 0..d.cout {
                for oy in 0..d.oh {
                    for ox in 0..d.ow {
                        let mut acc = 0.0;
                        for icg in 0..cin_g {
                            let ic = (oc / cout_g) * cin_g + icg;
                            for ky in 0..d.kh {
                                for kx in 0..d.kw {
                                    let iy = (oy * s.stride.0 + ky * s.dilation.0) as isize - s.padding.0 as isize;
                                    let ix = (ox * s.stride.1 + kx * s.dilation.1) as isize - s.padding.1 as isize;
                                    if iy < 0 || ix < 0 || iy >= d.h as isize || ix >= d.w as isize {
                                        continue;
                                    }
                                    acc += wt[((oc * cin_g + icg) * d.kh + ky) * d.kw + kx]
                                        * x[((b * d.cin + ic) * d.h + iy as usize) * d.w + ix as usize];
                                }
                            }
                        }
                        out[((b * d.cout + oc) * d.oh + oy) * d.ow + ox] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_naive_definition() {
        let cases = [
            (Conv2dSpec::new(1, 1), 3, 3, 4, 4),
            (Conv2dSpec::new(2, 1), 3, 3, 4, 2),
            (Conv2dSpec::new(1, 4).with_dilation(2), 5, 5, 4, 4),
            (Conv2dSpec::new(2, 2).with_dilation(2).with_groups(4), 3, 3, 4, 4),
            (Conv2dSpec::asymmetric((1, 2), (0, 3)), 1, 7, 2, 6),
            (Conv2dSpec::asymmetric((2, 1), (3, 0)), 7, 1, 2, 6),
        ];
        for (spec, kh, kw, cin, cout) in cases {
            let (h, w) = (6, 7);
            let oh = Conv2dSpec::out_len(h, kh, spec.stride.0, spec.padding.0, spec.dilation.0).unwrap();
            let ow = Conv2dSpec::out_len(w, kw, spec.stride.1, spec.padding.1, spec.dilation.1).unwrap();
            let d = ConvDims { b: 2, cin, h, w, cout, kh, kw, oh, ow };
            let x: Vec<f64> = (0..2 * cin * h * w).map(|i| ((i * 37 % 101) as f64 - 50.0) / 25.0).collect();
            let wt: Vec<f64> =
                (0..cout * (cin / spec.groups) * kh * kw).map(|i| ((i * 13 % 29) as f64 - 14.0) / 7.0).collect();
            let fast = conv2d_forward(&x, &wt, d, spec);
            let slow = naive_conv(&x, &wt, d, spec);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12, "{spec:?}");
            }
        }
    }

    #[test]
    fn excluded_padding_keeps_constants() {
        let d = ConvDims { b: 1, cin: 1, h: 5, w: 5, cout: 1, kh: 3, kw: 3, oh: 3, ow: 3 };
        let out = avg_pool_forward(&[2.5; 25], d, Conv2dSpec::new(2, 1));
        assert!(out.iter().all(|&v| v == 2.5));
    }
}
