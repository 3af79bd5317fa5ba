//! Independent numeric oracles for unit tests. Deliberately primitive: the
//! production code must never share a code path with these.

/// Composite Simpson rule on [0, 1] with `n` (even) intervals.
pub fn simpson_01<F: Fn(f64) -> f64>(f: F, n: usize) -> f64 {
    assert!(n >= 2 && n.is_multiple_of(2), "interval count must be even");
    let h = 1.0 / n as f64;
    let mut acc = f(0.0) + f(1.0);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(k as f64 * h);
    }
    acc * h / 3.0
}
