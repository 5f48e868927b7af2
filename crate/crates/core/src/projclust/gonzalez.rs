use crate::geom::linalg::squared_distance;

/// Farthest-point traversal prefix of length `min(k + 1, n)`.
///
/// Starts at index 0; ties go to the lowest index. Returns indices in
/// traversal order.
pub fn gonzalez_kcenter_coreset(points: &[&[f64]], k: usize) -> Vec<usize> {
    let n = points.len();
    let want = (k + 1).min(n);
    if want == 0 {
        return Vec::new();
    }
    let mut chosen = Vec::with_capacity(want);
    chosen.push(0);
    let mut nearest: Vec<f64> = points.iter().map(|p| squared_distance(p, points[0])).collect();
    while chosen.len() < want {
        let mut best = 0;
        let mut best_d = f64::NEG_INFINITY;
        for (i, &d) in nearest.iter().enumerate() {
            if d > best_d {
                best = i;
                best_d = d;
            }
        }
        chosen.push(best);
        let c = points[best];
        for (i, p) in points.iter().enumerate() {
            let d = squared_distance(p, c);
            if d < nearest[i] {
                nearest[i] = d;
            }
        }
    }
    chosen
}
