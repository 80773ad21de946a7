#![allow(dead_code)]

use frontlab::geometry::MaskedGrid;
use frontlab::pde::{step, step_into, Field, StepScheme};
use frontlab::reaction::Reaction;
use std::sync::Arc;
use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_grid(nx: usize, ny: usize, fill: f64, seed: u64) -> MaskedGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let active = (0..nx * ny).map(|_| rng.gen_bool(fill)).collect();
    MaskedGrid::from_mask(nx, ny, 0.5, [0.0, 0.0], active, |_, _| None)
}

/// Full explicit edge list built straight from the mask: 8 neighbours,
/// diagonals only when both axis cells they pass between are open.
pub fn oracle_distances(g: &MaskedGrid, source: usize) -> Vec<f64> {
    let open = |i: i64, j: i64| i >= 0 && j >= 0 && (i as usize) < g.nx && (j as usize) < g.ny && g.active[j as usize * g.nx + i as usize];
    let id = |i: i64, j: i64| g.index[j as usize * g.nx + i as usize] as usize;
    let mut graph = UnGraph::<(), f64>::new_undirected();
    let nodes: Vec<NodeIndex> = (0..g.len()).map(|_| graph.add_node(())).collect();
    for j in 0..g.ny as i64 {
        for i in 0..g.nx as i64 {
            if !open(i, j) {
                continue;
            }
            for (di, dj) in [(1, 0), (0, 1), (1, 1), (-1, 1)] {
                let (a, b) = (i + di, j + dj);
                if !open(a, b) {
                    continue;
                }
                let diagonal = di != 0 && dj != 0;
                if diagonal && !(open(i + di, j) && open(i, j + dj)) {
                    continue;
                }
                let w = if diagonal { 2f64.sqrt() } else { 1.0 } * g.h;
                graph.add_edge(nodes[id(i, j)], nodes[id(a, b)], w);
            }
        }
    }
    let d = dijkstra(&graph, nodes[source], None, |e| *e.weight());
    (0..g.len()).map(|k| d.get(&nodes[k]).copied().unwrap_or(f64::INFINITY)).collect()
}

pub fn masked(n: usize, rng: &mut ChaCha8Rng) -> MaskedGrid {
    let active = (0..n * n).map(|_| rng.gen_bool(0.85)).collect();
    MaskedGrid::from_mask(n, n, rng.gen_range(0.1..1.0), [0.0, 0.0], active, |_, _| None)
}

pub fn random_reaction(rng: &mut ChaCha8Rng) -> Reaction {
    if rng.gen_bool(0.5) {
        Reaction::cubic(rng.gen_range(0.02..0.48)).unwrap()
    } else {
        let nodes = frontlab::reaction::chebyshev_lobatto(17);
        let a = rng.gen_range(0.1..0.4);
        let b = rng.gen_range(0.0..2.0);
        Reaction::table(nodes.iter().map(|&u| u * (1.0 - u) * (u - a) * (1.0 + b * u * u)).collect()).unwrap()
    }
}

/// Random masks, reactions and steps up to the stability bound; returns
/// `(steps taken, cell values that left [0, 1])`.
pub fn invariant_region(min_steps: usize, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut steps = 0usize;
    let mut violations = 0usize;
    while steps < min_steps {
        let g = masked(8, &mut rng);
        if g.is_empty() {
            continue;
        }
        let r = random_reaction(&mut rng);
        // Anywhere up to the bound itself, not only the 0.9 default.
        let dt = StepScheme::bound(&g, &r) * rng.gen_range(0.01..=1.0);
        let mut u: Vec<f64> = (0..g.len())
            .map(|_| match rng.gen_range(0..4) {
                0 => 0.0,
                1 => 1.0,
                _ => rng.gen::<f64>(),
            })
            .collect();
        let mut next = vec![0.0; g.len()];
        for _ in 0..1000 {
            step_into(&g, &r, dt, &u, &mut next);
            violations += next.iter().filter(|v| !(0.0..=1.0).contains(*v)).count();
            std::mem::swap(&mut u, &mut next);
            steps += 1;
        }
    }
    (steps, violations)
}

/// Ordered random pairs on 32x32 masks, 100 steps each; returns the
/// number of (pair, step) events where the order broke.
pub fn comparison_principle(pairs: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut broken = 0;
    let mut done = 0;
    while done < pairs {
        let g = Arc::new(masked(32, &mut rng));
        if g.is_empty() {
            continue;
        }
        done += 1;
        let r = random_reaction(&mut rng);
        let s = StepScheme::default_for(&g, &r);
        let lo: Vec<f64> = (0..g.len()).map(|_| rng.gen::<f64>()).collect();
        let hi: Vec<f64> = lo.iter().map(|&v| (v + rng.gen::<f64>() * (1.0 - v)).min(1.0)).collect();
        let mut u = Field { grid: g.clone(), values: lo, time: 0.0 };
        let mut v = Field { grid: g.clone(), values: hi, time: 0.0 };
        for _ in 0..100 {
            u = step(&u, &r, &s).unwrap();
            v = step(&v, &r, &s).unwrap();
            if u.values.iter().zip(&v.values).any(|(a, b)| a > b) {
                broken += 1;
            }
        }
    }
    broken
}
