//! Four-point Lagrange interpolation and second-order grid differences.

/// First node and weights of the 4-point stencil around `s`, where `s` is a
/// position in grid units on nodes `0..npts`. Falls back to linear
/// interpolation on grids with fewer than four nodes.
pub fn stencil(s: f64, npts: usize) -> (usize, [f64; 4]) {
    if npts < 4 {
        if npts == 1 {
            return (0, [1.0, 0.0, 0.0, 0.0]);
        }
        let k = (s.floor().max(0.0) as usize).min(npts - 2);
        let u = s - k as f64;
        return (k, [1.0 - u, u, 0.0, 0.0]);
    }
    let start = (s.floor() as isize - 1).clamp(0, npts as isize - 4) as usize;
    let u = s - start as f64;
    let w = [
        -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0,
        u * (u - 2.0) * (u - 3.0) / 2.0,
        -u * (u - 1.0) * (u - 3.0) / 2.0,
        u * (u - 1.0) * (u - 2.0) / 6.0,
    ];
    (start, w)
}

/// Interpolate a line of `npts` records of `width` values at grid position `s`.
pub fn line(data: &[f64], width: usize, s: f64, out: &mut [f64]) {
    let npts = data.len() / width.max(1);
    let (start, w) = stencil(s, npts);
    out.iter_mut().for_each(|v| *v = 0.0);
    for (q, wq) in w.iter().enumerate() {
        if *wq == 0.0 {
            continue;
        }
        let rec = &data[(start + q) * width..(start + q + 1) * width];
        for (o, v) in out.iter_mut().zip(rec) {
            *o += wq * v;
        }
    }
}

/// Interpolate a row-major `n1 × n2` grid of records at `(s1, s2)`.
pub fn grid2(data: &[f64], width: usize, n1: usize, n2: usize, s1: f64, s2: f64, out: &mut [f64]) {
    let (a, wa) = stencil(s1, n1);
    let (b, wb) = stencil(s2, n2);
    out.iter_mut().for_each(|v| *v = 0.0);
    for (p, wp) in wa.iter().enumerate() {
        if *wp == 0.0 {
            continue;
        }
        for (q, wq) in wb.iter().enumerate() {
            let w = wp * wq;
            if w == 0.0 {
                continue;
            }
            let base = ((a + p) * n2 + b + q) * width;
            for (o, v) in out.iter_mut().zip(&data[base..base + width]) {
                *o += w * v;
            }
        }
    }
}

/// Derivative at node `k` of samples `f(0..npts)` with spacing `h`: central
/// in the interior, one-sided second order at the ends.
pub fn derivative(f: impl Fn(usize) -> f64, k: usize, npts: usize, h: f64) -> f64 {
    if npts < 3 {
        return if npts == 2 { (f(1) - f(0)) / h } else { 0.0 };
    }
    if k == 0 {
        (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h)
    } else if k == npts - 1 {
        (3.0 * f(k) - 4.0 * f(k - 1) + f(k - 2)) / (2.0 * h)
    } else {
        (f(k + 1) - f(k - 1)) / (2.0 * h)
    }
}

/// Composite trapezoid weights on `npts` nodes over `[0, 1]`.
pub fn trapezoid_weight(k: usize, npts: usize) -> f64 {
    let h = 1.0 / (npts - 1) as f64;
    if k == 0 || k == npts - 1 {
        0.5 * h
    } else {
        h
    }
}
