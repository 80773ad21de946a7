//! Domain descriptions, rasterization onto masked grids, and the grid
//! geodesic distance.
//!
//! Geodesic lengths are accumulated as integer counts of axis and diagonal
//! moves, so a path and its reverse always evaluate to the same float.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("active cells split into {0} components")]
    Disconnected(usize),
    #[error("no active cells in the window")]
    Empty,
    #[error("invalid domain: {0}")]
    Invalid(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    Disk { center: Point, radius: f64 },
    Polygon { vertices: Vec<Point> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// Unit axis pointing away from the junction.
    pub direction: Point,
    pub half_width: f64,
    pub origin: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    FreePlane,
    Exterior {
        obstacle: Vec<Shape>,
        l: f64,
    },
    /// `{ |x2| < w(x1) }` with `w` piecewise linear through `(x1, w)` knots.
    Cylinder {
        half_width: Vec<Point>,
        l: f64,
    },
    Branched {
        l: f64,
        branches: Vec<Branch>,
        junction: Vec<Point>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub variant: Variant,
    pub window: Rect,
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

fn perp(a: Point) -> Point {
    [-a[1], a[0]]
}

pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

pub fn is_convex(poly: &[Point]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let s = signed_area(poly).signum();
    (0..n).all(|i| {
        let (a, b, c) = (poly[i], poly[(i + 1) % n], poly[(i + 2) % n]);
        let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        cross * s >= 0.0
    })
}

impl Shape {
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Shape::Disk { center, radius } => norm(sub(p, *center)) < *radius,
            Shape::Polygon { vertices } => point_in_polygon(p, vertices),
        }
    }

    fn extent(&self) -> f64 {
        match self {
            Shape::Disk { center, radius } => norm(*center) + radius,
            Shape::Polygon { vertices } => vertices.iter().map(|v| norm(*v)).fold(0.0, f64::max),
        }
    }

    /// Signed depth: positive inside, distance-like; concave for convex shapes.
    fn depth(&self, p: Point) -> f64 {
        match self {
            Shape::Disk { center, radius } => radius - norm(sub(p, *center)),
            Shape::Polygon { vertices } => {
                let s = signed_area(vertices).signum();
                let n = vertices.len();
                (0..n)
                    .map(|i| {
                        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                        let e = sub(b, a);
                        let inward = [-e[1] * s, e[0] * s];
                        dot(sub(p, a), inward) / norm(e)
                    })
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    fn convex(&self) -> bool {
        match self {
            Shape::Disk { .. } => true,
            Shape::Polygon { vertices } => is_convex(vertices),
        }
    }

    fn bbox(&self) -> Rect {
        match self {
            Shape::Disk { center, radius } => Rect {
                x0: center[0] - radius,
                y0: center[1] - radius,
                x1: center[0] + radius,
                y1: center[1] + radius,
            },
            Shape::Polygon { vertices } => {
                let mut r = Rect { x0: f64::INFINITY, y0: f64::INFINITY, x1: -f64::INFINITY, y1: -f64::INFINITY };
                for v in vertices {
                    r.x0 = r.x0.min(v[0]);
                    r.y0 = r.y0.min(v[1]);
                    r.x1 = r.x1.max(v[0]);
                    r.y1 = r.y1.max(v[1]);
                }
                r
            }
        }
    }

    /// Interval of `p . dir` over the closed shape, for unit `dir`.
    fn shadow(&self, dir: Point) -> (f64, f64) {
        match self {
            Shape::Disk { center, radius } => {
                let m = dot(*center, dir);
                (m - radius, m + radius)
            }
            Shape::Polygon { vertices } => vertices.iter().fold((f64::INFINITY, -f64::INFINITY), |(lo, hi), v| {
                let d = dot(*v, dir);
                (lo.min(d), hi.max(d))
            }),
        }
    }

    /// Chord `[lo, hi]` of `p . e` along the line `p . e_perp = u`, if any.
    fn chord(&self, e: Point, u: f64) -> Option<(f64, f64)> {
        let ep = perp(e);
        match self {
            Shape::Disk { center, radius } => {
                let du = u - dot(*center, ep);
                let s = radius * radius - du * du;
                (s >= 0.0).then(|| {
                    let m = dot(*center, e);
                    (m - s.sqrt(), m + s.sqrt())
                })
            }
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                let mut lo = f64::INFINITY;
                let mut hi = -f64::INFINITY;
                for i in 0..n {
                    let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                    let (ua, ub) = (dot(a, ep), dot(b, ep));
                    let (va, vb) = (dot(a, e), dot(b, e));
                    if (ua - u) * (ub - u) <= 0.0 {
                        if ua == ub {
                            lo = lo.min(va.min(vb));
                            hi = hi.max(va.max(vb));
                        } else {
                            let v = va + (u - ua) / (ub - ua) * (vb - va);
                            lo = lo.min(v);
                            hi = hi.max(v);
                        }
                    }
                }
                (lo <= hi).then_some((lo, hi))
            }
        }
    }
}

fn shapes_overlap(a: &Shape, b: &Shape) -> bool {
    match (a, b) {
        (Shape::Disk { center: c1, radius: r1 }, Shape::Disk { center: c2, radius: r2 }) => {
            norm(sub(*c1, *c2)) <= r1 + r2
        }
        (Shape::Disk { center, radius }, p @ Shape::Polygon { .. })
        | (p @ Shape::Polygon { .. }, Shape::Disk { center, radius }) => {
            // For convex polygons the depth bound is exact at the nearest face.
            p.contains(*center) || polygon_distance(p, *center) <= *radius
        }
        (Shape::Polygon { vertices: va }, Shape::Polygon { vertices: vb }) => {
            // Separating axis test over both edge normals.
            let axes = va.iter().zip(va.iter().cycle().skip(1)).chain(vb.iter().zip(vb.iter().cycle().skip(1)));
            for (p, q) in axes {
                let n = perp(sub(*q, *p));
                let (alo, ahi) = a.shadow(n);
                let (blo, bhi) = b.shadow(n);
                if ahi < blo || bhi < alo {
                    return false;
                }
            }
            true
        }
    }
}

fn polygon_distance(p: &Shape, x: Point) -> f64 {
    let Shape::Polygon { vertices } = p else { unreachable!() };
    let n = vertices.len();
    (0..n)
        .map(|i| {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            let ab = sub(b, a);
            let t = (dot(sub(x, a), ab) / dot(ab, ab)).clamp(0.0, 1.0);
            norm(sub(x, [a[0] + t * ab[0], a[1] + t * ab[1]]))
        })
        .fold(f64::INFINITY, f64::min)
}

fn piecewise_linear(knots: &[Point], x: f64) -> f64 {
    if x <= knots[0][0] {
        return knots[0][1];
    }
    let last = knots[knots.len() - 1];
    if x >= last[0] {
        return last[1];
    }
    let i = knots.partition_point(|k| k[0] <= x) - 1;
    let (a, b) = (knots[i], knots[i + 1]);
    a[1] + (x - a[0]) / (b[0] - a[0]) * (b[1] - a[1])
}

impl Branch {
    /// Coordinate along the branch axis, measured from the origin.
    pub fn axial(&self, p: Point) -> f64 {
        dot(sub(p, self.origin), self.direction)
    }

    pub fn contains(&self, p: Point) -> bool {
        let q = sub(p, self.origin);
        dot(q, self.direction) > 0.0 && dot(q, perp(self.direction)).abs() < self.half_width
    }
}

impl DomainSpec {
    pub fn contains(&self, p: Point) -> bool {
        match &self.variant {
            Variant::FreePlane => true,
            Variant::Exterior { obstacle, .. } => !obstacle.iter().any(|s| s.contains(p)),
            Variant::Cylinder { half_width, .. } => p[1].abs() < piecewise_linear(half_width, p[0]),
            Variant::Branched { branches, junction, .. } => {
                point_in_polygon(p, junction) || branches.iter().any(|b| b.contains(p))
            }
        }
    }

    pub fn radius_l(&self) -> f64 {
        match &self.variant {
            Variant::FreePlane => 0.0,
            Variant::Exterior { l, .. } | Variant::Cylinder { l, .. } | Variant::Branched { l, .. } => *l,
        }
    }

    pub fn branches(&self) -> &[Branch] {
        match &self.variant {
            Variant::Branched { branches, .. } => branches,
            _ => &[],
        }
    }

    /// Static invariants that do not depend on the grid spacing.
    pub fn validate(&self) -> Result<(), GeometryError> {
        let w = &self.window;
        if !(w.x1 > w.x0 && w.y1 > w.y0) {
            return Err(GeometryError::Invalid("empty window".into()));
        }
        match &self.variant {
            Variant::FreePlane => {}
            Variant::Exterior { obstacle, l } => {
                if let Some(s) = obstacle.iter().find(|s| s.extent() > *l) {
                    return Err(GeometryError::Invalid(format!("obstacle piece {s:?} leaves B(0, {l})")));
                }
            }
            Variant::Cylinder { half_width, l } => {
                if half_width.is_empty() || half_width.windows(2).any(|k| k[1][0] <= k[0][0]) {
                    return Err(GeometryError::Invalid("half-width knots must be sorted by x1".into()));
                }
                if half_width.iter().any(|k| k[1] <= 0.0) {
                    return Err(GeometryError::Invalid("half-width must be positive".into()));
                }
                let (wl, wr) = (piecewise_linear(half_width, -l), piecewise_linear(half_width, *l));
                for k in half_width {
                    if (k[0] < -l && k[1] != wl) || (k[0] > *l && k[1] != wr) {
                        return Err(GeometryError::Invalid("half-width varies outside [-L, L]".into()));
                    }
                }
            }
            Variant::Branched { l, branches, junction } => {
                if junction.len() < 3 || junction.iter().any(|v| norm(*v) > *l) {
                    return Err(GeometryError::Invalid("junction must be a polygon inside B(0, L)".into()));
                }
                for b in branches {
                    if (norm(b.direction) - 1.0).abs() > 1e-9 || b.half_width <= 0.0 {
                        return Err(GeometryError::Invalid(format!("bad branch {b:?}")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_star_shaped(&self) -> Result<bool, GeometryError> {
        let obstacle = self.obstacle()?;
        if obstacle.is_empty() {
            return Ok(true);
        }
        // A common interior point of convex pieces is a star center.
        let g = |p: Point| obstacle.iter().map(|s| s.depth(p)).fold(f64::INFINITY, f64::min);
        let mut bb = obstacle[0].bbox();
        for s in obstacle {
            let b = s.bbox();
            bb = Rect { x0: bb.x0.min(b.x0), y0: bb.y0.min(b.y0), x1: bb.x1.max(b.x1), y1: bb.y1.max(b.y1) };
        }
        let (mut cx, mut cy) = (0.5 * (bb.x0 + bb.x1), 0.5 * (bb.y0 + bb.y1));
        let mut half = 0.5 * (bb.x1 - bb.x0).max(bb.y1 - bb.y0);
        let mut best = g([cx, cy]);
        for _ in 0..60 {
            let m = 20;
            let (mut bx, mut by) = (cx, cy);
            for i in 0..=m {
                for j in 0..=m {
                    let p = [cx - half + 2.0 * half * i as f64 / m as f64, cy - half + 2.0 * half * j as f64 / m as f64];
                    let v = g(p);
                    if v > best {
                        best = v;
                        bx = p[0];
                        by = p[1];
                    }
                }
            }
            cx = bx;
            cy = by;
            half *= 0.5;
        }
        if best > 1e-9 {
            return Ok(true);
        }
        if !pieces_connected(obstacle) {
            return Ok(false);
        }
        Err(GeometryError::Unsupported(
            "connected union without a common interior point".into(),
        ))
    }

    /// Lines parallel to `e` meet the obstacle in one segment, and some
    /// hyperplane `x . e = a` contains the projection of the obstacle.
    pub fn is_directionally_convex(&self, e: Point) -> Result<bool, GeometryError> {
        let obstacle = self.obstacle()?;
        let n = norm(e);
        let e = [e[0] / n, e[1] / n];
        let ep = perp(e);
        let (ulo, uhi) = obstacle
            .iter()
            .map(|s| s.shadow(ep))
            .fold((f64::INFINITY, -f64::INFINITY), |(a, b), (c, d)| (a.min(c), b.max(d)));
        let mut us: Vec<f64> = (0..=20000).map(|i| ulo + (uhi - ulo) * i as f64 / 20000.0).collect();
        for s in obstacle {
            let (a, b) = s.shadow(ep);
            us.extend([a, b, 0.5 * (a + b)]);
        }
        let (mut top_lo, mut bottom_hi) = (-f64::INFINITY, f64::INFINITY);
        for u in us {
            let mut chords: Vec<(f64, f64)> = obstacle.iter().filter_map(|s| s.chord(e, u)).collect();
            if chords.is_empty() {
                // A gap in the shadow means two separate stacks; allowed.
                continue;
            }
            chords.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut reach = chords[0].1;
            for c in &chords[1..] {
                if c.0 > reach + 1e-12 {
                    return Ok(false);
                }
                reach = reach.max(c.1);
            }
            top_lo = top_lo.max(chords[0].0);
            bottom_hi = bottom_hi.min(reach);
        }
        Ok(top_lo <= bottom_hi)
    }

    fn obstacle(&self) -> Result<&[Shape], GeometryError> {
        match &self.variant {
            Variant::Exterior { obstacle, .. } => {
                if obstacle.iter().all(Shape::convex) {
                    Ok(obstacle)
                } else {
                    Err(GeometryError::Unsupported("non-convex polygon piece".into()))
                }
            }
            _ => Err(GeometryError::Invalid("shape predicates need an exterior domain".into())),
        }
    }

    /// The same domain dilated by `s` about the origin.
    pub fn scaled(&self, s: f64) -> DomainSpec {
        let sp = |p: Point| [p[0] * s, p[1] * s];
        let variant = match &self.variant {
            Variant::FreePlane => Variant::FreePlane,
            Variant::Exterior { obstacle, l } => Variant::Exterior {
                obstacle: obstacle
                    .iter()
                    .map(|sh| match sh {
                        Shape::Disk { center, radius } => Shape::Disk { center: sp(*center), radius: radius * s },
                        Shape::Polygon { vertices } => Shape::Polygon { vertices: vertices.iter().map(|v| sp(*v)).collect() },
                    })
                    .collect(),
                l: l * s,
            },
            Variant::Cylinder { half_width, l } => Variant::Cylinder {
                half_width: half_width.iter().map(|k| sp(*k)).collect(),
                l: l * s,
            },
            Variant::Branched { l, branches, junction } => Variant::Branched {
                l: l * s,
                branches: branches
                    .iter()
                    .map(|b| Branch { direction: b.direction, half_width: b.half_width * s, origin: sp(b.origin) })
                    .collect(),
                junction: junction.iter().map(|v| sp(*v)).collect(),
            },
        };
        let w = self.window;
        DomainSpec { variant, window: Rect { x0: w.x0 * s, y0: w.y0 * s, x1: w.x1 * s, y1: w.y1 * s } }
    }
}

fn pieces_connected(shapes: &[Shape]) -> bool {
    let n = shapes.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && shapes_overlap(&shapes[i], &shapes[j]) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.iter().all(|&s| s)
}

pub const NONE: u32 = u32::MAX;

/// Cell-centre rasterization of a domain. Active cells are stored
/// compactly in row-major order; `nbr` holds the four axis neighbours with
/// the cell's own index standing in for an inactive neighbour.
#[derive(Debug, Clone)]
pub struct MaskedGrid {
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub origin: Point,
    pub active: Vec<bool>,
    pub index: Vec<u32>,
    pub cells: Vec<(u32, u32)>,
    pub nbr: Vec<[u32; 4]>,
    pub branch_id: Vec<Option<u16>>,
    /// `row_start[j]..row_start[j + 1]` are the compact indices of row `j`.
    pub row_start: Vec<usize>,
}

impl MaskedGrid {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn center(&self, k: usize) -> Point {
        let (i, j) = self.cells[k];
        [self.origin[0] + (i as f64 + 0.5) * self.h, self.origin[1] + (j as f64 + 0.5) * self.h]
    }

    pub fn at(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.nx || j >= self.ny {
            return None;
        }
        let k = self.index[j * self.nx + i];
        (k != NONE).then_some(k as usize)
    }

    /// Active cell whose centre is nearest to `p`, if `p` falls in an active cell.
    pub fn locate(&self, p: Point) -> Option<usize> {
        let i = ((p[0] - self.origin[0]) / self.h).floor();
        let j = ((p[1] - self.origin[1]) / self.h).floor();
        if i < 0.0 || j < 0.0 {
            return None;
        }
        self.at(i as usize, j as usize)
    }

    /// Builds the compact representation from a full mask.
    pub fn from_mask(nx: usize, ny: usize, h: f64, origin: Point, active: Vec<bool>, branch_of: impl Fn(usize, usize) -> Option<u16>) -> Self {
        let mut index = vec![NONE; nx * ny];
        let mut cells = Vec::new();
        let mut branch_id = Vec::new();
        let mut row_start = Vec::with_capacity(ny + 1);
        for j in 0..ny {
            row_start.push(cells.len());
            for i in 0..nx {
                if active[j * nx + i] {
                    index[j * nx + i] = cells.len() as u32;
                    cells.push((i as u32, j as u32));
                    branch_id.push(branch_of(i, j));
                }
            }
        }
        row_start.push(cells.len());
        let nbr = cells
            .iter()
            .enumerate()
            .map(|(k, &(i, j))| {
                let (i, j) = (i as i64, j as i64);
                let look = |di: i64, dj: i64| {
                    let (a, b) = (i + di, j + dj);
                    if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                        return k as u32;
                    }
                    let q = index[b as usize * nx + a as usize];
                    if q == NONE {
                        k as u32
                    } else {
                        q
                    }
                };
                [look(-1, 0), look(1, 0), look(0, -1), look(0, 1)]
            })
            .collect();
        Self { h, nx, ny, origin, active, index, cells, nbr, branch_id, row_start }
    }

    /// Number of 4-connected components of the active set.
    pub fn components(&self) -> usize {
        let mut seen = vec![false; self.len()];
        let mut count = 0;
        for s in 0..self.len() {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(k) = queue.pop_front() {
                for &q in &self.nbr[k] {
                    let q = q as usize;
                    if !seen[q] {
                        seen[q] = true;
                        queue.push_back(q);
                    }
                }
            }
        }
        count
    }

    /// Portable snapshot: header `nx ny h`, then the row-major 0/1 mask.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.nx, self.ny, self.h);
        for j in 0..self.ny {
            let row: Vec<&str> = (0..self.nx).map(|i| if self.active[j * self.nx + i] { "1" } else { "0" }).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    /// Axis and diagonal neighbours with their move type; diagonal moves
    /// need both axis cells they pass between to be active.
    pub fn neighbors8(&self, k: usize) -> impl Iterator<Item = (usize, bool)> + '_ {
        let (i, j) = self.cells[k];
        let (i, j) = (i as i64, j as i64);
        const D: [(i64, i64); 8] = [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (1, -1), (-1, 1), (1, 1)];
        D.iter().filter_map(move |&(di, dj)| {
            let get = |a: i64, b: i64| {
                if a < 0 || b < 0 {
                    None
                } else {
                    self.at(a as usize, b as usize)
                }
            };
            let q = get(i + di, j + dj)?;
            let diagonal = di != 0 && dj != 0;
            if diagonal && (get(i + di, j).is_none() || get(i, j + dj).is_none()) {
                return None;
            }
            Some((q, diagonal))
        })
    }
}

pub fn rasterize(spec: &DomainSpec, h: f64) -> Result<MaskedGrid, GeometryError> {
    if !(h > 0.0) {
        return Err(GeometryError::Invalid("h must be positive".into()));
    }
    spec.validate()?;
    let w = spec.window;
    let l = spec.radius_l();
    let margin = 10.0 * h;
    if l > 0.0 && (w.x0 > -l - margin || w.y0 > -l - margin || w.x1 < l + margin || w.y1 < l + margin) {
        return Err(GeometryError::Invalid(format!("window must contain B(0, {l}) with a 10-cell margin")));
    }
    let nx = ((w.x1 - w.x0) / h).round() as usize;
    let ny = ((w.y1 - w.y0) / h).round() as usize;
    let origin = [w.x0, w.y0];
    let center = |i: usize, j: usize| [origin[0] + (i as f64 + 0.5) * h, origin[1] + (j as f64 + 0.5) * h];
    let mut active = vec![false; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            active[j * nx + i] = spec.contains(center(i, j));
        }
    }
    if let Variant::Branched { l, branches, .. } = &spec.variant {
        for j in 0..ny {
            for i in 0..nx {
                let p = center(i, j);
                if norm(p) > *l && active[j * nx + i] && branches.iter().filter(|b| b.contains(p)).count() > 1 {
                    return Err(GeometryError::Invalid("branches overlap outside B(0, L)".into()));
                }
            }
        }
    }
    let branches = spec.branches().to_vec();
    let grid = MaskedGrid::from_mask(nx, ny, h, origin, active, |i, j| {
        let p = center(i, j);
        branches.iter().position(|b| b.contains(p)).map(|b| b as u16)
    });
    if grid.is_empty() {
        return Err(GeometryError::Empty);
    }
    match grid.components() {
        1 => Ok(grid),
        n => Err(GeometryError::Disconnected(n)),
    }
}

/// Path cost as counts of axis and diagonal moves.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Octile {
    pub axis: u32,
    pub diag: u32,
}

impl Octile {
    pub fn value(self) -> f64 {
        self.axis as f64 + self.diag as f64 * std::f64::consts::SQRT_2
    }

    fn step(self, diagonal: bool) -> Self {
        if diagonal {
            Octile { axis: self.axis, diag: self.diag + 1 }
        } else {
            Octile { axis: self.axis + 1, diag: self.diag }
        }
    }
}

impl PartialOrd for Octile {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Octile {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value()
            .total_cmp(&other.value())
            .then((self.axis, self.diag).cmp(&(other.axis, other.diag)))
    }
}

impl std::ops::Add for Octile {
    type Output = Octile;
    fn add(self, o: Octile) -> Octile {
        Octile { axis: self.axis + o.axis, diag: self.diag + o.diag }
    }
}

#[derive(Debug, Clone)]
pub struct GeodesicField {
    pub cost: Vec<Option<Octile>>,
    pub dist: Vec<f64>,
}

pub fn geodesic(grid: &MaskedGrid, source: &[usize]) -> GeodesicField {
    assert!(!source.is_empty(), "geodesic needs a non-empty source");
    let n = grid.len();
    let mut cost: Vec<Option<Octile>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    for &s in source {
        cost[s] = Some(Octile::default());
        heap.push(std::cmp::Reverse((Octile::default(), s)));
    }
    while let Some(std::cmp::Reverse((c, k))) = heap.pop() {
        if done[k] {
            continue;
        }
        done[k] = true;
        for (q, diagonal) in grid.neighbors8(k) {
            if done[q] {
                continue;
            }
            let nc = c.step(diagonal);
            if cost[q].is_none_or(|old| nc < old) {
                cost[q] = Some(nc);
                heap.push(std::cmp::Reverse((nc, q)));
            }
        }
    }
    let dist = cost.iter().map(|c| c.map_or(f64::INFINITY, |c| c.value() * grid.h)).collect();
    GeodesicField { cost, dist }
}

pub fn set_distance(grid: &MaskedGrid, a: &[usize], b: &[usize]) -> f64 {
    let g = geodesic(grid, a);
    b.iter().map(|&k| g.dist[k]).fold(f64::INFINITY, f64::min)
}
