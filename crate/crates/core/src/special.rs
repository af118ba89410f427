//! Bessel functions of the first kind.

/// `J_n(x)` for integer order `n ≥ 0` and real `x`.
///
/// Ascending power series for `|x| ≤ 12`, Miller's backward recurrence
/// beyond that.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    if x < 0.0 {
        let v = bessel_j(n, -x);
        return if n % 2 == 0 { v } else { -v };
    }
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x <= 12.0 {
        series(n, x)
    } else {
        miller(n, x)
    }
}

fn series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let q = -half * half;
    let mut sum = term;
    let mut k = 0u32;
    loop {
        k += 1;
        term *= q / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && k > 2 {
            break;
        }
        if k > 300 {
            break;
        }
    }
    sum
}

fn miller(n: u32, x: f64) -> f64 {
    let start = 2 * ((n.max(x as u32) + 40 + (x.sqrt() * 10.0) as u32) / 2);
    let (mut jp1, mut j) = (0.0f64, 1e-300f64);
    let mut norm = 0.0;
    let mut want = 0.0;
    for k in (0..start).rev() {
        let jm1 = 2.0 * (k + 1) as f64 / x * j - jp1;
        jp1 = j;
        j = jm1;
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
            want *= 1e-250;
        }
        if k == n {
            want = j;
        }
        if k % 2 == 0 && k > 0 {
            norm += 2.0 * j;
        }
    }
    norm += j;
    want / norm
}
