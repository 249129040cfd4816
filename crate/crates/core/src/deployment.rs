//! Deployment-zone ranking under a distance-aware objective, with greedy
//! minimum-separation top-K and a grid reachability check.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fmt::sig;
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeploymentConfig {
    pub t_th: f64,
    /// Meters.
    pub r_max: f64,
    pub lambda: f64,
    pub k: usize,
    /// Meters.
    pub min_separation: f64,
}

impl Default for DeploymentConfig {
    fn default() -> Self {
        Self {
            t_th: 0.6,
            r_max: 10.0,
            lambda: 0.3,
            k: 3,
            min_separation: 1.0,
        }
    }
}

impl DeploymentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(m.to_string()));
        if !(0.0..=1.0).contains(&self.t_th) {
            return bad("t_th must lie in [0, 1]");
        }
        if !(self.r_max > 0.0) || !self.r_max.is_finite() {
            return bad("r_max must be positive");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if !(self.min_separation >= 0.0) || !self.min_separation.is_finite() {
            return bad("min_separation must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeploymentCandidate {
    pub row: usize,
    pub col: usize,
    pub x: f64,
    pub y: f64,
    pub score_t: f64,
    pub goal_distance: f64,
    pub objective: f64,
    pub reachable: bool,
}

pub fn objective(score_t: f64, goal_distance: f64, cfg: &DeploymentConfig) -> f64 {
    (1.0 - cfg.lambda) * score_t + cfg.lambda * (1.0 - goal_distance / cfg.r_max)
}

/// Cells with `T ≥ t_th` whose centers lie within `r_max` of the goal, in
/// row-major order. `reachable` is left `false`.
pub fn candidates(map: &Raster<f64>, goal: (f64, f64), cfg: &DeploymentConfig) -> Result<Vec<DeploymentCandidate>> {
    cfg.validate()?;
    if map.spec.cell_of(goal.0, goal.1).is_none() {
        return Err(Error::GoalOutOfBounds(goal.0, goal.1));
    }
    let mut out = Vec::new();
    for (i, t) in map.defined() {
        if t < cfg.t_th {
            continue;
        }
        let (row, col) = map.spec.row_col(i);
        let (x, y) = map.spec.center(row, col);
        let d = (x - goal.0).hypot(y - goal.1);
        if d > cfg.r_max {
            continue;
        }
        out.push(DeploymentCandidate {
            row,
            col,
            x,
            y,
            score_t: t,
            goal_distance: d,
            objective: objective(t, d, cfg),
            reachable: false,
        });
    }
    Ok(out)
}

fn rank_order(a: &DeploymentCandidate, b: &DeploymentCandidate) -> std::cmp::Ordering {
    b.objective
        .total_cmp(&a.objective)
        .then(a.goal_distance.total_cmp(&b.goal_distance))
        .then((a.row, a.col).cmp(&(b.row, b.col)))
}

pub fn select_top_k(cands: &[DeploymentCandidate], cfg: &DeploymentConfig) -> Vec<DeploymentCandidate> {
    let mut sorted = cands.to_vec();
    sorted.sort_by(rank_order);
    let mut chosen: Vec<DeploymentCandidate> = Vec::new();
    for c in sorted {
        if chosen.len() == cfg.k {
            break;
        }
        let too_close = chosen.iter().any(|s| (s.x - c.x).hypot(s.y - c.y) < cfg.min_separation);
        if !too_close {
            chosen.push(c);
        }
    }
    chosen
}

const NEIGHBORS: [(i64, i64); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// Cells 8-connected to `from` through cells with defined `T ≥ t_th`.
/// Empty if `from` itself fails the threshold.
pub fn reachable_set(map: &Raster<f64>, from: (usize, usize), t_th: f64) -> Vec<bool> {
    let spec = &map.spec;
    let passes = |i: usize| map.cells[i].is_some_and(|t| t >= t_th);
    let mut seen = vec![false; spec.len()];
    let start = spec.index(from.0, from.1);
    if !passes(start) {
        return seen;
    }
    seen[start] = true;
    let mut queue = VecDeque::from([from]);
    while let Some((r, c)) = queue.pop_front() {
        for (dr, dc) in NEIGHBORS {
            let (nr, nc) = (r as i64 + dr, c as i64 + dc);
            if !spec.contains(nr, nc) {
                continue;
            }
            let j = spec.index(nr as usize, nc as usize);
            if !seen[j] && passes(j) {
                seen[j] = true;
                queue.push_back((nr as usize, nc as usize));
            }
        }
    }
    seen
}

pub fn reachable(map: &Raster<f64>, from: (i64, i64), to: (i64, i64), t_th: f64) -> Result<bool> {
    let from = map.spec.check(from.0, from.1)?;
    let to = map.spec.check(to.0, to.1)?;
    Ok(reachable_set(map, from, t_th)[map.spec.index(to.0, to.1)])
}

/// Candidates, reachability filter against the goal cell, then top-K.
pub fn select_deployment(
    map: &Raster<f64>,
    goal: (f64, f64),
    cfg: &DeploymentConfig,
) -> Result<Vec<DeploymentCandidate>> {
    let mut cands = candidates(map, goal, cfg)?;
    let goal_cell = map
        .spec
        .cell_of(goal.0, goal.1)
        .ok_or(Error::GoalOutOfBounds(goal.0, goal.1))?;
    let seen = reachable_set(map, goal_cell, cfg.t_th);
    for c in &mut cands {
        c.reachable = seen[map.spec.index(c.row, c.col)];
    }
    cands.retain(|c| c.reachable);
    let top = select_top_k(&cands, cfg);
    if top.is_empty() {
        return Err(Error::NoCandidates);
    }
    Ok(top)
}

pub fn zones_csv(zones: &[DeploymentCandidate]) -> String {
    let mut out = String::from("rank,row,col,x,y,T,goal_distance,objective,reachable\n");
    for (rank, z) in zones.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            rank + 1,
            z.row,
            z.col,
            sig(z.x, 6),
            sig(z.y, 6),
            sig(z.score_t, 6),
            sig(z.goal_distance, 6),
            sig(z.objective, 6),
            z.reachable
        );
    }
    out
}

pub fn write_zones_csv(path: &Path, zones: &[DeploymentCandidate]) -> Result<()> {
    fs::write(path, zones_csv(zones))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bev::GridSpec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(n: usize, t: f64) -> Raster<f64> {
        Raster::filled(GridSpec::new(0.0, 0.0, 1.0, n, n).unwrap(), Some(t))
    }

    #[test]
    fn candidate_filters() {
        let cfg = DeploymentConfig {
            t_th: 0.5,
            r_max: 3.0,
            ..Default::default()
        };
        let map = uniform(10, 1.0);
        let goal = (5.0, 5.0);
        let c = candidates(&map, goal, &cfg).unwrap();
        let expected = (0..100)
            .filter(|&i| {
                let (r, col) = (i / 10, i % 10);
                (col as f64 + 0.5 - 5.0).hypot(r as f64 + 0.5 - 5.0) <= 3.0
            })
            .count();
        assert_eq!(c.len(), expected);
        let strict = DeploymentConfig { t_th: 1.0, ..cfg };
        assert!(candidates(&uniform(10, 0.9), goal, &strict).unwrap().is_empty());
        assert!(matches!(
            candidates(&map, (-1.0, 5.0), &cfg),
            Err(Error::GoalOutOfBounds(..))
        ));
    }

    #[test]
    fn objective_value() {
        let cfg = DeploymentConfig {
            lambda: 0.5,
            r_max: 20.0,
            ..Default::default()
        };
        assert_abs_diff_eq!(objective(0.8, 10.0, &cfg), 0.65, epsilon = 1e-15);
    }

    fn cand(x: f64, y: f64, objective: f64) -> DeploymentCandidate {
        DeploymentCandidate {
            row: 0,
            col: 0,
            x,
            y,
            score_t: 1.0,
            goal_distance: 0.0,
            objective,
            reachable: true,
        }
    }

    #[test]
    fn separation_rule() {
        let cfg = DeploymentConfig {
            k: 2,
            min_separation: 1.0,
            ..Default::default()
        };
        let top = select_top_k(&[cand(0.0, 0.0, 0.5), cand(0.1, 0.0, 0.7)], &cfg);
        assert_eq!(top, vec![cand(0.1, 0.0, 0.7)]);
        let k1 = DeploymentConfig { k: 1, ..cfg };
        let many = [cand(0.0, 0.0, 0.2), cand(5.0, 0.0, 0.9), cand(9.0, 0.0, 0.4)];
        assert_eq!(select_top_k(&many, &k1), vec![many[1]]);
    }

    /// Repeatedly scans for the best remaining admissible candidate.
    fn greedy_oracle(cands: &[DeploymentCandidate], cfg: &DeploymentConfig) -> Vec<DeploymentCandidate> {
        let mut chosen: Vec<DeploymentCandidate> = Vec::new();
        let mut used = vec![false; cands.len()];
        while chosen.len() < cfg.k {
            let mut best: Option<usize> = None;
            for (i, c) in cands.iter().enumerate() {
                if used[i] {
                    continue;
                }
                if chosen
                    .iter()
                    .any(|s| ((s.x - c.x).powi(2) + (s.y - c.y).powi(2)).sqrt() < cfg.min_separation)
                {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some(b) => {
                        let o = &cands[b];
                        c.objective > o.objective
                            || (c.objective == o.objective
                                && (c.goal_distance < o.goal_distance
                                    || (c.goal_distance == o.goal_distance && (c.row, c.col) < (o.row, o.col))))
                    }
                };
                if better {
                    best = Some(i);
                }
            }
            match best {
                Some(b) => {
                    used[b] = true;
                    chosen.push(cands[b]);
                }
                None => break,
            }
        }
        chosen
    }

    #[test]
    fn greedy_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let cands: Vec<DeploymentCandidate> = (0..100)
                .map(|i| DeploymentCandidate {
                    row: i / 10,
                    col: i % 10,
                    x: rng.random_range(0.0..10.0),
                    y: rng.random_range(0.0..10.0),
                    score_t: 1.0,
                    goal_distance: (rng.random_range(0..4) as f64),
                    objective: (rng.random_range(0..10) as f64) / 10.0,
                    reachable: true,
                })
                .collect();
            let cfg = DeploymentConfig {
                k: 7,
                min_separation: 1.5,
                ..Default::default()
            };
            assert_eq!(select_top_k(&cands, &cfg), greedy_oracle(&cands, &cfg));
        }
    }

    #[test]
    fn reachability_basics() {
        let mut map = uniform(6, 1.0);
        assert!(reachable(&map, (2, 2), (2, 2), 0.5).unwrap());
        for c in 0..6 {
            map.set(3, c, Some(0.0));
        }
        assert!(!reachable(&map, (0, 0), (5, 5), 0.5).unwrap());
        assert!(reachable(&map, (0, 0), (2, 5), 0.5).unwrap());
        map.set(3, 4, None);
        assert!(!reachable(&map, (0, 0), (5, 5), 0.5).unwrap());
        // Diagonal moves are allowed through corners.
        map.set(3, 4, Some(1.0));
        map.set(2, 4, Some(0.0));
        map.set(4, 4, Some(0.0));
        map.set(2, 3, Some(1.0));
        map.set(3, 3, Some(0.0));
        assert!(reachable(&map, (0, 0), (5, 5), 0.5).unwrap());
        assert!(!reachable(&map, (3, 0), (3, 0), 0.5).unwrap());
        assert!(matches!(
            reachable(&map, (0, 0), (6, 0), 0.5),
            Err(Error::OutOfBounds { .. })
        ));
    }

    struct UnionFind(Vec<usize>);

    impl UnionFind {
        fn find(&mut self, i: usize) -> usize {
            let mut r = i;
            while self.0[r] != r {
                r = self.0[r];
            }
            let mut j = i;
            while self.0[j] != r {
                let next = self.0[j];
                self.0[j] = r;
                j = next;
            }
            r
        }
        fn union(&mut self, a: usize, b: usize) {
            let (ra, rb) = (self.find(a), self.find(b));
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }

    fn random_map(rng: &mut ChaCha8Rng, n: usize) -> Raster<f64> {
        let spec = GridSpec::new(0.0, 0.0, 0.5, n, n).unwrap();
        let cells = (0..n * n)
            .map(|_| {
                if rng.random_bool(0.05) {
                    None
                } else {
                    Some(rng.random_range(0.0..1.0))
                }
            })
            .collect();
        Raster::from_cells(spec, cells)
    }

    #[test]
    fn reachability_matches_union_find() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let map = random_map(&mut rng, 32);
            let t_th = 0.45;
            let n = 32usize;
            let pass = |r: usize, c: usize| map.get(r, c).is_some_and(|t| t >= t_th);
            let mut uf = UnionFind((0..n * n).collect());
            for r in 0..n {
                for c in 0..n {
                    if !pass(r, c) {
                        continue;
                    }
                    for (dr, dc) in [(0, 1), (1, -1), (1, 0), (1, 1)] {
                        let (r2, c2) = (r as i64 + dr, c as i64 + dc);
                        if (0..n as i64).contains(&r2) && (0..n as i64).contains(&c2) && pass(r2 as usize, c2 as usize)
                        {
                            uf.union(r * n + c, r2 as usize * n + c2 as usize);
                        }
                    }
                }
            }
            for _ in 0..200 {
                let a = (rng.random_range(0..n), rng.random_range(0..n));
                let b = (rng.random_range(0..n), rng.random_range(0..n));
                let expected = pass(a.0, a.1) && pass(b.0, b.1) && uf.find(a.0 * n + a.1) == uf.find(b.0 * n + b.1);
                let got = reachable(&map, (a.0 as i64, a.1 as i64), (b.0 as i64, b.1 as i64), t_th).unwrap();
                assert_eq!(got, expected);
            }
        }
    }

    #[test]
    fn sealed_basin() {
        let mut map = uniform(12, 1.0);
        for r in 3..=7 {
            for c in 3..=7 {
                if r == 3 || r == 7 || c == 3 || c == 7 {
                    map.set(r, c, Some(0.0));
                }
            }
        }
        for r in 4..=6 {
            for c in 4..=6 {
                map.set(r, c, Some(0.0));
            }
        }
        let cfg = DeploymentConfig {
            r_max: 20.0,
            ..Default::default()
        };
        assert!(matches!(
            select_deployment(&map, (5.5, 5.5), &cfg),
            Err(Error::NoCandidates)
        ));
        let ok = select_deployment(&map, (0.5, 0.5), &cfg).unwrap();
        assert_eq!(ok.len(), 3);
    }

    #[test]
    fn lambda_zero_ranks_by_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut map = random_map(&mut rng, 16);
        let cfg = DeploymentConfig {
            lambda: 0.0,
            k: 1,
            t_th: 0.2,
            r_max: 100.0,
            ..Default::default()
        };
        let goal = (4.1, 4.1);
        map.set(8, 8, Some(0.25));
        let top = select_deployment(&map, goal, &cfg).unwrap()[0];
        let seen = reachable_set(&map, map.spec.cell_of(goal.0, goal.1).unwrap(), cfg.t_th);
        let best = map
            .defined()
            .filter(|&(i, _)| seen[i])
            .map(|(_, t)| t)
            .fold(f64::MIN, f64::max);
        assert_eq!(top.score_t, best);
    }

    #[test]
    fn csv_layout() {
        let z = DeploymentCandidate {
            row: 3,
            col: 4,
            x: 1.125,
            y: 0.875,
            score_t: 0.8,
            goal_distance: 1.0 / 3.0,
            objective: 0.65,
            reachable: true,
        };
        assert_eq!(
            zones_csv(&[z]),
            "rank,row,col,x,y,T,goal_distance,objective,reachable\n1,3,4,1.125,0.875,0.8,0.333333,0.65,true\n"
        );
    }

    proptest! {
        #[test]
        fn returned_zones_satisfy_constraints(seed in 0u64..500, gx in 0.0f64..8.0, gy in 0.0f64..8.0, k in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let map = random_map(&mut rng, 16);
            let cfg = DeploymentConfig { t_th: 0.3, r_max: 4.0, lambda: 0.4, k, min_separation: 1.2 };
            match select_deployment(&map, (gx, gy), &cfg) {
                Ok(zones) => {
                    prop_assert!(zones.len() <= k);
                    let goal_cell = map.spec.cell_of(gx, gy).unwrap();
                    for (i, z) in zones.iter().enumerate() {
                        prop_assert!(z.score_t >= cfg.t_th && z.goal_distance <= cfg.r_max && z.reachable);
                        prop_assert!((0.0..=1.0).contains(&z.objective));
                        prop_assert!(reachable(&map, (z.row as i64, z.col as i64), (goal_cell.0 as i64, goal_cell.1 as i64), cfg.t_th).unwrap());
                        for w in &zones[..i] {
                            prop_assert!((w.x - z.x).hypot(w.y - z.y) >= cfg.min_separation);
                        }
                    }
                }
                Err(e) => prop_assert!(matches!(e, Error::NoCandidates)),
            }
        }

        #[test]
        fn top1_invariant_under_scaling(seed in 0u64..500, c in 0.05f64..=1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let map = random_map(&mut rng, 16);
            let cfg = DeploymentConfig { t_th: 0.0, r_max: 100.0, lambda: 0.0, k: 1, min_separation: 0.0 };
            let scaled = map.map(|t| t * c);
            let a = select_deployment(&map, (4.0, 4.0), &cfg);
            let b = select_deployment(&scaled, (4.0, 4.0), &cfg);
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert_eq!((a[0].row, a[0].col), (b[0].row, b[0].col)),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false),
            }
        }

        #[test]
        fn reachability_is_symmetric(seed in 0u64..500, a in (0usize..16, 0usize..16), b in (0usize..16, 0usize..16)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let map = random_map(&mut rng, 16);
            let ab = reachable(&map, (a.0 as i64, a.1 as i64), (b.0 as i64, b.1 as i64), 0.4).unwrap();
            let ba = reachable(&map, (b.0 as i64, b.1 as i64), (a.0 as i64, a.1 as i64), 0.4).unwrap();
            prop_assert_eq!(ab, ba);
        }
    }
}
