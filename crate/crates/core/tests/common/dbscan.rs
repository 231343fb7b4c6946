/// Brute force: union core points within eps, number components by their
/// smallest core index, attach each border point to the lowest-numbered
/// component among its core neighbours.
pub fn dbscan_oracle(points: &[(f64, f64)], eps: f64, min_size: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let near = |i: usize, j: usize| {
        let (dx, dy) = (points[i].0 - points[j].0, points[i].1 - points[j].1);
        dx * dx + dy * dy <= eps * eps
    };
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_size).collect();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        if p[i] != i {
            let r = find(p, p[i]);
            p[i] = r;
        }
        p[i]
    }
    for i in 0..n {
        for j in 0..n {
            if core[i] && core[j] && near(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut ids = std::collections::BTreeMap::new();
    for i in (0..n).filter(|&i| core[i]) {
        let r = find(&mut parent, i);
        let next = ids.len();
        ids.entry(r).or_insert(next);
    }
    (0..n)
        .map(|i| {
            if core[i] {
                Some(ids[&find(&mut parent, i)])
            } else {
                (0..n).filter(|&j| core[j] && near(i, j)).map(|j| ids[&find(&mut parent, j)]).min()
            }
        })
        .collect()
}
