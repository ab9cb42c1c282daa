//! Quintic Hermite interpolation from value, first and second derivative at
//! both ends of an interval.

#[derive(Debug, Clone, Copy)]
pub(crate) struct Jet {
    pub p: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Value and time derivative of the interpolant at fraction `s` of `[t0, t0 + h]`.
pub(crate) fn quintic(a: Jet, b: Jet, h: f64, s: f64) -> (f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let s5 = s4 * s;
    let h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
    let h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
    let h2 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5);
    let h3 = 0.5 * (s3 - 2.0 * s4 + s5);
    let h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
    let h5 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
    let value = a.p * h0 + h * a.d1 * h1 + h * h * a.d2 * h2 + h * h * b.d2 * h3 + h * b.d1 * h4 + b.p * h5;

    let g0 = -30.0 * s2 + 60.0 * s3 - 30.0 * s4;
    let g1 = 1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4;
    let g2 = 0.5 * (2.0 * s - 9.0 * s2 + 12.0 * s3 - 5.0 * s4);
    let g3 = 0.5 * (3.0 * s2 - 8.0 * s3 + 5.0 * s4);
    let g4 = -12.0 * s2 + 28.0 * s3 - 15.0 * s4;
    let g5 = 30.0 * s2 - 60.0 * s3 + 30.0 * s4;
    let slope = (a.p * g0 + h * a.d1 * g1 + h * h * a.d2 * g2 + h * h * b.d2 * g3 + h * b.d1 * g4 + b.p * g5) / h;
    (value, slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_quintic_polynomials() {
        let p = |t: f64| 1.0 - 2.0 * t + 0.5 * t.powi(3) - t.powi(4) + 0.3 * t.powi(5);
        let dp = |t: f64| -2.0 + 1.5 * t * t - 4.0 * t.powi(3) + 1.5 * t.powi(4);
        let ddp = |t: f64| 3.0 * t - 12.0 * t * t + 6.0 * t.powi(3);
        let (t0, h) = (0.3, 0.7);
        let jet = |t| Jet { p: p(t), d1: dp(t), d2: ddp(t) };
        for i in 0..=10 {
            let s = i as f64 / 10.0;
            let (v, d) = quintic(jet(t0), jet(t0 + h), h, s);
            assert!((v - p(t0 + s * h)).abs() < 1e-13);
            assert!((d - dp(t0 + s * h)).abs() < 1e-12);
        }
    }
}
