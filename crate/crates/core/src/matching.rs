//! Maximum bipartite matching via augmenting paths.
//!
//! Left vertices are ports (or any requesters), right vertices are buffer
//! banks. Candidate lists drive the search order, so identical inputs yield
//! identical matchings.

#[derive(Debug, Clone)]
pub struct Matching {
    /// For each left vertex, the right vertex it matched (if any).
    pub left_to_right: Vec<Option<usize>>,
    /// For each right vertex, the left vertex it matched (if any).
    pub right_to_left: Vec<Option<usize>>,
    pub size: usize,
}

/// Compute a maximum matching of `adj` (left-indexed candidate lists) into
/// `right_count` right vertices. Left vertices are processed in order and
/// candidates tried in list order.
pub fn maximum_matching(adj: &[Vec<usize>], right_count: usize) -> Matching {
    let mut right_to_left: Vec<Option<usize>> = vec![None; right_count];
    let mut size = 0;
    for left in 0..adj.len() {
        let mut seen = vec![false; right_count];
        if augment(adj, left, &mut seen, &mut right_to_left) {
            size += 1;
        }
    }
    let mut left_to_right = vec![None; adj.len()];
    for (r, l) in right_to_left.iter().enumerate() {
        if let Some(l) = l {
            left_to_right[*l] = Some(r);
        }
    }
    Matching {
        left_to_right,
        right_to_left,
        size,
    }
}

/// A matching that saturates every left vertex, if one exists.
pub fn saturating_matching(adj: &[Vec<usize>], right_count: usize) -> Option<Vec<usize>> {
    let m = maximum_matching(adj, right_count);
    if m.size == adj.len() {
        Some(
            m.left_to_right
                .into_iter()
                .map(|r| r.expect("saturated"))
                .collect(),
        )
    } else {
        None
    }
}

fn augment(
    adj: &[Vec<usize>],
    left: usize,
    seen: &mut [bool],
    right_to_left: &mut [Option<usize>],
) -> bool {
    for &r in &adj[left] {
        if seen[r] {
            continue;
        }
        seen[r] = true;
        let free_or_movable = match right_to_left[r] {
            None => true,
            Some(other) => augment(adj, other, seen, right_to_left),
        };
        if free_or_movable {
            right_to_left[r] = Some(left);
            return true;
        }
    }
    false
}
