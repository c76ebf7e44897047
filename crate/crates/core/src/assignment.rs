//! Minimum-cost square assignment (Hungarian method with potentials, O(n^3)).

/// Returns `cols` with `cols[row]` the column assigned to `row`, minimizing the total cost.
///
/// Costs must be finite.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    debug_assert!(cost.iter().all(|r| r.len() == n));

    // 1-based arrays, column 0 is the virtual start
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut cols = vec![0; n];
    for j in 1..=n {
        if row_of[j] > 0 {
            cols[row_of[j] - 1] = j - 1;
        }
    }
    cols
}

/// Calls `f` with every permutation of `0..n` (Heap's algorithm, identity first).
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    f(&perm);
    let mut c = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            f(&perm);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn total(cost: &[Vec<f64>], cols: &[usize]) -> f64 {
        cols.iter().enumerate().map(|(r, &c)| cost[r][c]).sum()
    }

    #[test]
    fn small_known_case() {
        let cost = vec![
            vec![4.0, 1.0, 3.0],
            vec![2.0, 0.0, 5.0],
            vec![3.0, 2.0, 2.0],
        ];
        let cols = min_cost_assignment(&cost);
        assert_eq!(cols, [1, 0, 2]);
        assert_eq!(total(&cost, &cols), 5.0);
    }

    #[test]
    fn permutation_count() {
        for n in 0..=6 {
            let mut seen = std::collections::HashSet::new();
            for_each_permutation(n, |p| {
                seen.insert(p.to_vec());
            });
            let fact: usize = (1..=n).product();
            assert_eq!(seen.len(), fact.max(1));
        }
        let mut first = None;
        for_each_permutation(4, |p| {
            first.get_or_insert_with(|| p.to_vec());
        });
        assert_eq!(first.unwrap(), [0, 1, 2, 3]);
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            flat in proptest::collection::vec(0.0f64..10.0, 36),
            n in 1usize..=6,
        ) {
            let cost: Vec<Vec<f64>> = (0..n).map(|r| flat[r * 6..r * 6 + n].to_vec()).collect();
            let cols = min_cost_assignment(&cost);
            let mut sorted = cols.clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
            let mut best = f64::INFINITY;
            for_each_permutation(n, |p| best = best.min(total(&cost, p)));
            prop_assert!((total(&cost, &cols) - best).abs() < 1e-9);
        }
    }
}
