//! Small combinatorics helpers: permutations with parity, shuffles with
//! signs, increasing multi-indices, antisymmetric index normalization.

/// All permutations of `0..n` with their signs, `n <= 8`.
pub fn permutations_signed(n: usize) -> Vec<(Vec<usize>, i64)> {
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..n).collect();
    heap_rec(n, &mut perm, &mut out);
    out
}

fn heap_rec(k: usize, perm: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, i64)>) {
    if k <= 1 {
        out.push((perm.clone(), parity(perm)));
        return;
    }
    for i in 0..k {
        heap_rec(k - 1, perm, out);
        if k % 2 == 0 {
            perm.swap(i, k - 1);
        } else {
            perm.swap(0, k - 1);
        }
    }
}

pub fn parity(perm: &[usize]) -> i64 {
    let mut seen = vec![false; perm.len()];
    let mut sign = 1i64;
    for i in 0..perm.len() {
        if seen[i] {
            continue;
        }
        let mut len = 0;
        let mut j = i;
        while !seen[j] {
            seen[j] = true;
            j = perm[j];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// `(p,q)`-shuffles of `0..p+q`: pairs (left positions, right positions)
/// with the shuffle sign.
pub fn shuffles(p: usize, q: usize) -> Vec<(Vec<usize>, Vec<usize>, i64)> {
    let n = p + q;
    let mut out = Vec::new();
    for left in combinations(n, p) {
        let mut in_left = vec![false; n];
        for &i in &left {
            in_left[i] = true;
        }
        let right: Vec<usize> = (0..n).filter(|&i| !in_left[i]).collect();
        // sign = parity of the permutation (left..., right...)
        let mut perm = left.clone();
        perm.extend(&right);
        out.push((left, right, parity(&perm)));
    }
    out
}

/// Increasing `k`-subsets of `0..n`.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        cur[i] += 1;
        for j in (i + 1)..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Sorts an index tuple, returning `(sorted, sign)`, or `None` when two
/// indices repeat (an alternating form vanishes there).
pub fn sort_signed(indices: &[usize]) -> Option<(Vec<usize>, i64)> {
    let mut v: Vec<usize> = indices.to_vec();
    let mut sign = 1i64;
    // insertion sort tracking swaps
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    for w in v.windows(2) {
        if w[0] == w[1] {
            return None;
        }
    }
    Some((v, sign))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_counts_and_parity() {
        let p3 = permutations_signed(3);
        assert_eq!(p3.len(), 6);
        assert_eq!(p3.iter().filter(|(_, s)| *s == 1).count(), 3);
        assert_eq!(parity(&[1, 0, 2]), -1);
        assert_eq!(parity(&[1, 2, 0]), 1);
    }

    #[test]
    fn shuffle_counts() {
        assert_eq!(shuffles(1, 1).len(), 2);
        assert_eq!(shuffles(2, 1).len(), 3);
        assert_eq!(shuffles(2, 2).len(), 6);
        // (1,1): ({0},{1},+), ({1},{0},-)
        let s = shuffles(1, 1);
        assert!(s.contains(&(vec![0], vec![1], 1)));
        assert!(s.contains(&(vec![1], vec![0], -1)));
    }

    #[test]
    fn combination_enumeration() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(combinations(2, 3).len(), 0);
    }

    #[test]
    fn sort_sign() {
        assert_eq!(sort_signed(&[2, 0, 1]), Some((vec![0, 1, 2], 1)));
        assert_eq!(sort_signed(&[1, 0]), Some((vec![0, 1], -1)));
        assert_eq!(sort_signed(&[1, 1]), None);
    }
}
