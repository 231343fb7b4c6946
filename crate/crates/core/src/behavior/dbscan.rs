/// Density-based clustering. A point's neighbourhood includes itself, so with
/// `min_size = 2` any pair within `eps` forms a cluster. Clusters are numbered
/// in discovery order (scanning points by index); a border point reachable
/// from several clusters joins the first one discovered. `None` marks noise.
pub fn dbscan(points: &[(f64, f64)], eps: f64, min_size: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let eps2 = eps * eps;
    let neighbours = |i: usize| -> Vec<usize> {
        let (xi, yi) = points[i];
        (0..n)
            .filter(|&j| {
                let (dx, dy) = (points[j].0 - xi, points[j].1 - yi);
                dx * dx + dy * dy <= eps2
            })
            .collect()
    };
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut next = 0;
    for i in 0..n {
        if visited[i] {
            continue;
        }
        let seeds = neighbours(i);
        if seeds.len() < min_size {
            continue;
        }
        visited[i] = true;
        labels[i] = Some(next);
        let mut queue = std::collections::VecDeque::from(seeds);
        while let Some(j) = queue.pop_front() {
            if labels[j].is_none() {
                labels[j] = Some(next);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            let nj = neighbours(j);
            if nj.len() >= min_size {
                queue.extend(nj.into_iter().filter(|&k| !visited[k]));
            }
        }
        next += 1;
    }
    labels
}
