//! Small shared vector helpers (crate-internal).

/// Euclidean norm.
pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Dot product (lengths must match; debug-asserted).
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Arithmetic mean of rows (all rows same length, at least one row).
pub fn row_mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let p = rows[0].len();
    let mut out = vec![0.0; p];
    for row in rows {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    let inv = 1.0 / rows.len() as f64;
    out.iter_mut().for_each(|o| *o *= inv);
    out
}

/// True if every entry is finite.
pub fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}
