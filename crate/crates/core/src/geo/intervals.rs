//! Minimal qualifying intervals and their staircase reduction.

use crate::model::UserId;
use crate::time::Time;

/// A weighted planar point carrying its user as a color. Weight −1 points
/// are the cancellation points inserted between adjacent staircase points of
/// the same color.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ColoredPoint {
    pub x: i64,
    pub y: i64,
    pub color: UserId,
    pub weight: i8,
}

/// All inclusion-tight intervals `[l, r]` over one user's line: the window
/// sum reaches `k` but dropping either endpoint falls below it.
///
/// `positions` are (rank, time) pairs with strictly increasing ranks and
/// positive times (one user's aggregated presence along the line). The sweep
/// is linear: for every left endpoint the minimal right endpoint is found by
/// a non-retreating second pointer. At most one interval per position starts
/// there, so the output size never exceeds `positions.len()`.
pub fn minimal_intervals(positions: &[(u32, Time)], k: Time) -> Vec<(u32, u32)> {
    debug_assert!(positions.windows(2).all(|w| w[0].0 < w[1].0));
    let mut out = Vec::new();
    let mut right = 0usize;
    let mut sum = Time::ZERO; // over positions[left..right]
    for left in 0..positions.len() {
        while right < positions.len() && sum < k {
            sum += positions[right].1;
            right += 1;
        }
        if sum < k {
            break; // later left endpoints only shrink the window
        }
        let without_left = sum - positions[left].1;
        if without_left < k {
            out.push((positions[left].0, positions[right - 1].0));
        }
        sum = without_left;
    }
    out
}

/// Maps one color's interval points `(−l, r)` to the weighted point set whose
/// dominated-weight sum is 1 exactly when some input point is dominated.
///
/// Keeps the minimal antichain (the staircase) with weight +1 and inserts a
/// weight −1 point at the componentwise max of each adjacent staircase pair;
/// a dominance query then counts a run of staircase points and cancels all
/// but one.
pub fn staircase_reduce(points: &[(i64, i64)], color: UserId) -> Vec<ColoredPoint> {
    let mut sorted = points.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let mut stairs: Vec<(i64, i64)> = Vec::new();
    let mut best_y = i64::MAX;
    for &(x, y) in &sorted {
        if y < best_y {
            stairs.push((x, y));
            best_y = y;
        }
    }

    let mut out: Vec<ColoredPoint> = stairs
        .iter()
        .map(|&(x, y)| ColoredPoint {
            x,
            y,
            color,
            weight: 1,
        })
        .collect();
    for pair in stairs.windows(2) {
        // x ascending, y descending: the componentwise max mixes the pair
        out.push(ColoredPoint {
            x: pair[1].0,
            y: pair[0].1,
            color,
            weight: -1,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: i64) -> Time {
        Time::from_int(v)
    }

    fn brute_force_minimal(positions: &[(u32, Time)], k: Time) -> Vec<(u32, u32)> {
        // check the three defining inequalities over every (l, r) pair
        let sum = |lo: u32, hi: u32| -> Time {
            positions
                .iter()
                .filter(|&&(p, _)| lo <= p && p <= hi)
                .map(|&(_, t)| t)
                .sum()
        };
        let mut out = Vec::new();
        for &(l, _) in positions {
            for &(r, _) in positions {
                if l <= r && sum(l, r) >= k && sum(l + 1, r) < k && (r == 0 || sum(l, r - 1) < k) {
                    out.push((l, r));
                }
            }
        }
        out
    }

    #[test]
    fn three_equal_stays() {
        let positions = vec![(1, t(3)), (2, t(3)), (3, t(3))];
        let got = minimal_intervals(&positions, t(5));
        assert_eq!(got, vec![(1, 2), (2, 3)]);
        assert_eq!(got, brute_force_minimal(&positions, t(5)));
    }

    #[test]
    fn degenerate_and_empty() {
        assert_eq!(minimal_intervals(&[(4, t(7))], t(5)), vec![(4, 4)]);
        assert_eq!(minimal_intervals(&[(1, t(2)), (9, t(2))], t(5)), vec![]);
        assert_eq!(minimal_intervals(&[], t(5)), vec![]);
    }

    #[test]
    fn matches_brute_force_on_random_lines() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for case in 0..300 {
            let len = rng.random_range(1..10usize);
            let mut pos = Vec::new();
            let mut p = 0u32;
            for _ in 0..len {
                p += rng.random_range(1..4u32);
                pos.push((p, t(rng.random_range(1..6i64))));
            }
            let k = t(rng.random_range(1..15i64));
            assert_eq!(
                minimal_intervals(&pos, k),
                brute_force_minimal(&pos, k),
                "case {case}: {pos:?} k={k}"
            );
            assert!(minimal_intervals(&pos, k).len() <= pos.len());
        }
    }

    #[test]
    fn staircase_of_single_point() {
        let out = staircase_reduce(&[(-3, 5)], 7);
        assert_eq!(
            out,
            vec![ColoredPoint {
                x: -3,
                y: 5,
                color: 7,
                weight: 1
            }]
        );
    }

    #[test]
    fn staircase_of_intro_intervals() {
        // intervals [1,2] and [2,3] map to (−1,2) and (−2,3): an antichain
        // with one cancellation point at (−1,3)
        let out = staircase_reduce(&[(-1, 2), (-2, 3)], 0);
        let plus: Vec<(i64, i64)> = out
            .iter()
            .filter(|p| p.weight == 1)
            .map(|p| (p.x, p.y))
            .collect();
        let minus: Vec<(i64, i64)> = out
            .iter()
            .filter(|p| p.weight == -1)
            .map(|p| (p.x, p.y))
            .collect();
        assert_eq!(plus, vec![(-2, 3), (-1, 2)]);
        assert_eq!(minus, vec![(-1, 3)]);
    }

    #[test]
    fn dominated_weight_sum_is_an_indicator() {
        // over every query point of a grid, the signed sum of dominated
        // weights must be 1 if some original point is dominated, else 0
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for case in 0..200 {
            let len = rng.random_range(1..12usize);
            let pts: Vec<(i64, i64)> = (0..len)
                .map(|_| (rng.random_range(-8..8i64), rng.random_range(-8..8i64)))
                .collect();
            let reduced = staircase_reduce(&pts, 0);
            for qx in -9..=9 {
                for qy in -9..=9 {
                    let signed: i64 = reduced
                        .iter()
                        .filter(|p| p.x <= qx && p.y <= qy)
                        .map(|p| p.weight as i64)
                        .sum();
                    let any = pts.iter().any(|&(x, y)| x <= qx && y <= qy);
                    assert_eq!(signed, any as i64, "case {case} q=({qx},{qy}) {pts:?}");
                }
            }
        }
    }
}
