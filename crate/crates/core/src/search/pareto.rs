use super::Candidate;

/// `a` is no worse than `b` in memory, operations and score, and strictly
/// better in at least one.
pub fn dominates(a: (u64, u64, f64), b: (u64, u64, f64)) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && a.2 >= b.2 && (a.0 < b.0 || a.1 < b.1 || a.2 > b.2)
}

/// Indices of the non-dominated points in ascending order. Scores must be finite.
pub fn pareto_indices(points: &[(u64, u64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    // Any dominator of a point sorts before it, and domination is transitive,
    // so comparing against the front built so far is enough.
    order.sort_by(|&a, &b| {
        let (pa, pb) = (points[a], points[b]);
        pa.0.cmp(&pb.0).then(pa.1.cmp(&pb.1)).then(pb.2.total_cmp(&pa.2)).then(a.cmp(&b))
    });
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        if !front.iter().any(|&f| dominates(points[f], points[i])) {
            front.push(i);
        }
    }
    front.sort_unstable();
    front
}

/// Non-dominated scored candidates (minimal memory and operations, maximal
/// score) in their original order. Unscored candidates are ignored.
pub fn pareto_front(candidates: &[Candidate]) -> Vec<Candidate> {
    let scored: Vec<&Candidate> = candidates.iter().filter(|c| c.score.is_some()).collect();
    let points: Vec<(u64, u64, f64)> =
        scored.iter().map(|c| (c.report.memory_bytes, c.report.ops, c.score.unwrap())).collect();
    pareto_indices(&points).into_iter().map(|i| scored[i].clone()).collect()
}
