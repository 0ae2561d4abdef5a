//! Exact hypervolume for two and three objectives (minimization).

use super::nondominated_filter;

/// Hypervolume dominated by `points` relative to `reference`, for 2 or 3
/// objectives. Points at or beyond the reference in any coordinate
/// contribute nothing.
pub fn hypervolume(points: &[Vec<f64>], reference: &[f64]) -> f64 {
    let m = reference.len();
    assert!(m == 2 || m == 3, "hypervolume supports 2 or 3 objectives");
    let inside: Vec<Vec<f64>> = points
        .iter()
        .filter(|p| p.iter().zip(reference).all(|(&v, &r)| v < r))
        .cloned()
        .collect();
    if inside.is_empty() {
        return 0.0;
    }
    let keep = nondominated_filter(&inside);
    let front: Vec<Vec<f64>> = keep.into_iter().map(|i| inside[i].clone()).collect();
    match m {
        2 => hv2(&front, reference),
        _ => hv3(&front, reference),
    }
}

/// 2-D staircase sweep over points sorted by the first objective.
fn hv2(front: &[Vec<f64>], reference: &[f64]) -> f64 {
    let mut pts = front.to_vec();
    pts.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
    let mut area = 0.0;
    let mut prev_y = reference[1];
    for p in &pts {
        area += (reference[0] - p[0]) * (prev_y - p[1]);
        prev_y = p[1];
    }
    area
}

/// 3-D sweep along the third objective: between consecutive z-levels the
/// dominated cross-section is constant, so accumulate 2-D area times slab
/// height, adding points as their z-level is passed.
fn hv3(front: &[Vec<f64>], reference: &[f64]) -> f64 {
    let mut pts = front.to_vec();
    pts.sort_by(|a, b| a[2].partial_cmp(&b[2]).unwrap());
    let ref2 = [reference[0], reference[1]];
    let mut volume = 0.0;
    let mut active: Vec<Vec<f64>> = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        let z_next = if i + 1 < pts.len() { pts[i + 1][2] } else { reference[2] };
        let proj = vec![p[0], p[1]];
        if !active.iter().any(|q| q[0] <= proj[0] && q[1] <= proj[1]) {
            active.retain(|q| !(proj[0] <= q[0] && proj[1] <= q[1]));
            active.push(proj);
        }
        if z_next > p[2] {
            volume += hv2(&active, &ref2) * (z_next - p[2]);
        }
    }
    volume
}

/// Monte-Carlo hypervolume estimate; returns (estimate, standard error).
/// Used as an independent oracle for the exact sweep.
pub fn hypervolume_monte_carlo<R: rand::Rng>(
    points: &[Vec<f64>],
    reference: &[f64],
    lower: &[f64],
    samples: usize,
    rng: &mut R,
) -> (f64, f64) {
    let m = reference.len();
    let box_volume: f64 = reference.iter().zip(lower).map(|(&r, &l)| r - l).product();
    let mut hits = 0usize;
    let mut sample = vec![0.0; m];
    for _ in 0..samples {
        for k in 0..m {
            sample[k] = lower[k] + rng.gen::<f64>() * (reference[k] - lower[k]);
        }
        if points
            .iter()
            .any(|p| p.iter().zip(&sample).all(|(&v, &s)| v <= s))
        {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    let se = (p * (1.0 - p) / samples as f64).sqrt() * box_volume;
    (p * box_volume, se)
}
