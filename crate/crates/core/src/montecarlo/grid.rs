//! Uniform bucket grid on a square torus for nearest-neighbour and
//! fixed-radius queries.

pub type Point = [f64; 2];

/// Wrap-around distance on a square of side `window`.
pub fn torus_delta(a: f64, b: f64, window: f64) -> f64 {
    let d = (a - b).abs();
    d.min(window - d)
}

pub fn torus_dist2(p: &Point, q: &Point, window: f64) -> f64 {
    let dx = torus_delta(p[0], q[0], window);
    let dy = torus_delta(p[1], q[1], window);
    dx * dx + dy * dy
}

pub struct TorusGrid<'a> {
    points: &'a [Point],
    window: f64,
    side: usize,
    cell: f64,
    buckets: Vec<Vec<u32>>,
}

impl<'a> TorusGrid<'a> {
    /// Indexes `points`, keeping only those with `keep[i]` when a mask is given.
    pub fn new(points: &'a [Point], keep: Option<&[bool]>, window: f64) -> Self {
        let kept = keep.map_or(points.len(), |k| k.iter().filter(|&&x| x).count());
        // About two points per bucket.
        let side = ((kept as f64 / 2.0).sqrt().floor() as usize).clamp(1, 512);
        let cell = window / side as f64;
        let mut buckets = vec![Vec::new(); side * side];
        for (i, p) in points.iter().enumerate() {
            if keep.is_some_and(|k| !k[i]) {
                continue;
            }
            let (cx, cy) = Self::cell_of(p, cell, side);
            buckets[cy * side + cx].push(i as u32);
        }
        Self { points, window, side, cell, buckets }
    }

    fn cell_of(p: &Point, cell: f64, side: usize) -> (usize, usize) {
        let cx = ((p[0] / cell) as usize).min(side - 1);
        let cy = ((p[1] / cell) as usize).min(side - 1);
        (cx, cy)
    }

    fn visit_ring<F: FnMut(usize)>(&self, cx: usize, cy: usize, ring: usize, mut f: F) {
        let s = self.side as isize;
        let r = ring as isize;
        let mut visit = |dx: isize, dy: isize| {
            let x = (cx as isize + dx).rem_euclid(s) as usize;
            let y = (cy as isize + dy).rem_euclid(s) as usize;
            for &i in &self.buckets[y * self.side + x] {
                f(i as usize);
            }
        };
        if r == 0 {
            visit(0, 0);
            return;
        }
        for dx in -r..=r {
            visit(dx, -r);
            visit(dx, r);
        }
        for dy in (-r + 1)..r {
            visit(-r, dy);
            visit(r, dy);
        }
    }

    /// Largest ring that still visits distinct buckets on the torus.
    fn max_ring(&self) -> usize {
        (self.side - 1) / 2
    }

    /// Index and squared distance of the nearest indexed point.
    pub fn nearest(&self, p: &Point) -> Option<(usize, f64)> {
        let (cx, cy) = Self::cell_of(p, self.cell, self.side);
        let mut best: Option<(usize, f64)> = None;
        let last = self.max_ring();
        for ring in 0..=last {
            self.visit_ring(cx, cy, ring, |i| {
                let d2 = torus_dist2(p, &self.points[i], self.window);
                if best.is_none_or(|(bi, bd)| d2 < bd || (d2 == bd && i < bi)) {
                    best = Some((i, d2));
                }
            });
            // Rings 0..=ring cover every point within ring·cell of p.
            if let Some((_, d2)) = best {
                let covered = ring as f64 * self.cell;
                if d2 <= covered * covered {
                    return best;
                }
            }
        }
        if self.side.is_multiple_of(2) && self.side > 1 {
            // Even side: the ring just beyond `last` is a partial ring (wraps onto itself).
            self.visit_ring(cx, cy, last + 1, |i| {
                let d2 = torus_dist2(p, &self.points[i], self.window);
                if best.is_none_or(|(bi, bd)| d2 < bd || (d2 == bd && i < bi)) {
                    best = Some((i, d2));
                }
            });
        }
        best
    }

    /// All indexed pairs `(i, j, d)` with `i < j` and toroidal distance `<= radius`.
    pub fn pairs_within(&self, radius: f64) -> Vec<(usize, usize, f64)> {
        let reach = ((radius / self.cell).ceil() as usize).min(self.max_ring() + 1);
        let r2 = radius * radius;
        let mut out = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (b, bucket) in self.buckets.iter().enumerate() {
            let (cx, cy) = (b % self.side, b / self.side);
            for &i in bucket {
                let i = i as usize;
                seen.clear();
                for ring in 0..=reach {
                    self.visit_ring(cx, cy, ring, |j| {
                        if j > i && seen.insert(j) {
                            let d2 = torus_dist2(&self.points[i], &self.points[j], self.window);
                            if d2 <= r2 {
                                out.push((i, j, d2.sqrt()));
                            }
                        }
                    });
                }
            }
        }
        out
    }
}
