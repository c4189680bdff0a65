//! Small dense-vector helpers. Dimensions are at most [`crate::MAX_DIM`], so
//! points are plain `Vec<f64>` and slices.

pub type Point = Vec<f64>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Point {
    a.iter().map(|x| x * s).collect()
}

/// `a + s * b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn add_assign(acc: &mut [f64], b: &[f64]) {
    for (x, y) in acc.iter_mut().zip(b) {
        *x += y;
    }
}

pub fn add_scaled_assign(acc: &mut [f64], s: f64, b: &[f64]) {
    for (x, y) in acc.iter_mut().zip(b) {
        *x += s * y;
    }
}

pub fn zeros(dim: usize) -> Point {
    vec![0.0; dim]
}

pub fn unit(dim: usize, axis: usize) -> Point {
    let mut e = zeros(dim);
    e[axis] = 1.0;
    e
}

/// Lexicographic comparison used for deterministic tie-breaks.
pub fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// Product with the convention `0 * inf = 0`. Bound certificates multiply
/// possibly-overflowed exponentials by quantities that are exactly zero.
pub fn bound_mul(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}
