//! Upward-closed planar regions represented by their finite lower frontier.
//!
//! A region is the upward closure (`+ R²₊`) of its frontier points, or of
//! their convex hull when the convex hint is set. Frontiers are kept
//! canonical: Pareto-minimal, sorted by the first coordinate ascending, and
//! for convex regions pruned to lower-hull vertices.

use thiserror::Error;

/// Membership and frontier deduplication tolerance, in bits.
pub const REGION_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RegionError {
    #[error("point ({0}, {1}) has a negative coordinate")]
    NegativePoint(f64, f64),
    #[error("intersection of an empty list of regions")]
    EmptyList,
    #[error("frontier CSV error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpwardRegion {
    frontier: Vec<[f64; 2]>,
    convex: bool,
}

fn pareto_prune(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(pts.len());
    let mut min_y = f64::INFINITY;
    for p in pts {
        if p[1] < min_y - REGION_TOL {
            out.push(p);
            min_y = p[1];
        }
    }
    out
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Lower convex hull of Pareto-pruned points (x ascending, y descending).
fn hull_prune(pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 1e-12 {
            hull.pop();
        }
        hull.push(p);
    }
    hull
}

/// Value of the convex lower boundary at `x`; +inf left of the chain.
fn chain_eval(chain: &[[f64; 2]], x: f64) -> f64 {
    match chain {
        [] => f64::INFINITY,
        [p] => {
            if x < p[0] - REGION_TOL {
                f64::INFINITY
            } else {
                p[1]
            }
        }
        _ => {
            let first = chain[0];
            let last = chain[chain.len() - 1];
            if x < first[0] - REGION_TOL {
                return f64::INFINITY;
            }
            if x <= first[0] {
                return first[1];
            }
            if x >= last[0] {
                return last[1];
            }
            for w in chain.windows(2) {
                let (a, b) = (w[0], w[1]);
                if x <= b[0] {
                    let t = (x - a[0]) / (b[0] - a[0]);
                    return a[1] + t * (b[1] - a[1]);
                }
            }
            last[1]
        }
    }
}

/// Clips a convex decreasing chain (possibly with negative coordinates)
/// to the closed first quadrant.
fn clip_chain_to_quadrant(chain: &[[f64; 2]]) -> Vec<[f64; 2]> {
    if chain.is_empty() {
        return Vec::new();
    }
    let last = chain[chain.len() - 1];
    // clip x >= 0
    let mut c: Vec<[f64; 2]> = if last[0] < 0.0 {
        // whole chain left of the axis: only the constant tail survives
        vec![[0.0, last[1]]]
    } else if chain[0][0] < 0.0 {
        let y0 = chain_eval(chain, 0.0);
        let mut v = vec![[0.0, y0]];
        v.extend(chain.iter().copied().filter(|p| p[0] > 0.0));
        v
    } else {
        chain.to_vec()
    };
    // clip y >= 0
    if c[0][1] < 0.0 {
        return vec![[c[0][0].max(0.0), 0.0]];
    }
    if c[c.len() - 1][1] < 0.0 {
        let mut out: Vec<[f64; 2]> = Vec::new();
        for w in c.windows(2) {
            let (a, b) = (w[0], w[1]);
            if out.is_empty() {
                out.push(a);
            }
            if a[1] >= 0.0 && b[1] < 0.0 {
                let t = a[1] / (a[1] - b[1]);
                out.push([a[0] + t * (b[0] - a[0]), 0.0]);
                break;
            }
            out.push(b);
        }
        c = out;
    }
    for p in c.iter_mut() {
        if p[0] < 0.0 {
            p[0] = 0.0;
        }
        if p[1] < 0.0 {
            p[1] = 0.0;
        }
    }
    c
}

impl UpwardRegion {
    /// Canonicalizes and wraps a set of frontier points; all coordinates
    /// must be nonnegative.
    pub fn from_points(points: Vec<[f64; 2]>, convex: bool) -> Result<Self, RegionError> {
        for p in &points {
            if p[0] < 0.0 || p[1] < 0.0 || !p[0].is_finite() || !p[1].is_finite() {
                return Err(RegionError::NegativePoint(p[0], p[1]));
            }
        }
        let pruned = pareto_prune(points);
        let frontier = if convex { hull_prune(pruned) } else { pruned };
        Ok(UpwardRegion { frontier, convex })
    }

    /// The full quadrant `R²₊` (frontier `{(0,0)}`).
    pub fn quadrant() -> Self {
        UpwardRegion { frontier: vec![[0.0, 0.0]], convex: false }
    }

    pub fn empty() -> Self {
        UpwardRegion { frontier: Vec::new(), convex: false }
    }

    pub fn is_empty(&self) -> bool {
        self.frontier.is_empty()
    }

    pub fn frontier(&self) -> &[[f64; 2]] {
        &self.frontier
    }

    pub fn convex_hint(&self) -> bool {
        self.convex
    }

    pub fn with_convex_hint(mut self, convex: bool) -> Self {
        if convex && !self.convex {
            self.frontier = hull_prune(std::mem::take(&mut self.frontier));
        }
        self.convex = convex;
        self
    }

    /// Membership in the upward closure (convex closure when hinted),
    /// within `REGION_TOL`.
    pub fn contains(&self, p: [f64; 2]) -> Result<bool, RegionError> {
        if p[0] < 0.0 || p[1] < 0.0 {
            return Err(RegionError::NegativePoint(p[0], p[1]));
        }
        Ok(self.contains_unchecked(p))
    }

    fn contains_unchecked(&self, p: [f64; 2]) -> bool {
        if self.frontier.is_empty() {
            return false;
        }
        if self.convex {
            let req = chain_eval(&self.frontier, p[0]);
            p[1] >= req - REGION_TOL
        } else {
            self.frontier
                .iter()
                .any(|f| f[0] <= p[0] + REGION_TOL && f[1] <= p[1] + REGION_TOL)
        }
    }

    /// Largest `m` such that `p - (m, m)` is still inside (negative when the
    /// region only contains `p` after expanding by `-m`). Useful for
    /// reporting containment with a tolerance band.
    pub fn containment_margin(&self, p: [f64; 2]) -> f64 {
        if self.frontier.is_empty() {
            return f64::NEG_INFINITY;
        }
        let hi = p[0].min(p[1]);
        let scale = self
            .frontier
            .iter()
            .flat_map(|q| [q[0], q[1]])
            .fold(1.0f64, f64::max)
            + p[0].abs()
            + p[1].abs();
        let lo = -2.0 * scale - 1.0;
        let inside = |m: f64| self.contains_unchecked([p[0] - m, p[1] - m]);
        if !inside(lo) {
            return f64::NEG_INFINITY;
        }
        if inside(hi) {
            return hi;
        }
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if inside(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Translation by `by` (coordinates may be negative), intersected with
    /// the first quadrant.
    pub fn shift(&self, by: [f64; 2]) -> UpwardRegion {
        if self.frontier.is_empty() {
            return UpwardRegion::empty();
        }
        let moved: Vec<[f64; 2]> = self
            .frontier
            .iter()
            .map(|p| [p[0] + by[0], p[1] + by[1]])
            .collect();
        if self.convex {
            let clipped = clip_chain_to_quadrant(&moved);
            UpwardRegion::from_points(clipped, true).expect("clipped to quadrant")
        } else {
            let clamped = moved
                .into_iter()
                .map(|p| [p[0].max(0.0), p[1].max(0.0)])
                .collect();
            UpwardRegion::from_points(clamped, false).expect("clamped to quadrant")
        }
    }

    /// `inf { r1 + r2 }` over the region; +inf when empty.
    pub fn min_sum(&self) -> f64 {
        self.frontier
            .iter()
            .map(|p| p[0] + p[1])
            .fold(f64::INFINITY, f64::min)
    }

    /// Pointwise intersection. All-convex inputs produce a convex result
    /// (exact envelope); otherwise the staircase interpretation is used.
    pub fn intersect(regions: &[&UpwardRegion]) -> Result<UpwardRegion, RegionError> {
        let mut iter = regions.iter();
        let first = iter.next().ok_or(RegionError::EmptyList)?;
        let mut acc = (*first).clone();
        for r in iter {
            acc = intersect2(&acc, r);
        }
        Ok(acc)
    }

    /// The region difference `{ (a,b) : (a,b) + s2 ⊆ s1 }`, computed by
    /// requiring every frontier point of `s2`, shifted by `(a,b)`, to lie in
    /// `s1`. Exact for staircase `s2` (any `s1`) and for convex pairs.
    pub fn difference(s1: &UpwardRegion, s2: &UpwardRegion) -> UpwardRegion {
        if s2.is_empty() {
            return UpwardRegion::quadrant();
        }
        if s1.is_empty() {
            return UpwardRegion::empty();
        }
        let mut acc: Option<UpwardRegion> = None;
        for f in &s2.frontier {
            let t = s1.shift([-f[0], -f[1]]);
            acc = Some(match acc {
                None => t,
                Some(a) => intersect2(&a, &t),
            });
        }
        acc.expect("s2 nonempty")
    }

    // --- frontier CSV ------------------------------------------------------

    /// Canonical `r1,r2` CSV with shortest round-trip decimals.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("r1,r2\n");
        for p in &self.frontier {
            s.push_str(&format!("{},{}\n", p[0], p[1]));
        }
        s
    }

    /// Parses a frontier CSV (staircase interpretation; callers may add the
    /// convex hint afterwards).
    pub fn from_csv_str(s: &str) -> Result<UpwardRegion, RegionError> {
        let mut lines = s.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "r1,r2" => {}
            _ => {
                return Err(RegionError::Csv {
                    line: 1,
                    msg: "expected header `r1,r2`".into(),
                })
            }
        }
        let mut pts = Vec::new();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |part: Option<&str>, i: usize| -> Result<f64, RegionError> {
                part.ok_or(RegionError::Csv { line: i + 1, msg: "missing field".into() })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| RegionError::Csv { line: i + 1, msg: e.to_string() })
            };
            let x = parse(parts.next(), i)?;
            let y = parse(parts.next(), i)?;
            if parts.next().is_some() {
                return Err(RegionError::Csv { line: i + 1, msg: "too many fields".into() });
            }
            pts.push([x, y]);
        }
        UpwardRegion::from_points(pts, false)
    }
}

fn intersect2(a: &UpwardRegion, b: &UpwardRegion) -> UpwardRegion {
    if a.is_empty() || b.is_empty() {
        return UpwardRegion::empty();
    }
    if a.convex && b.convex {
        intersect2_convex(a, b)
    } else {
        // staircase: upward closure of pairwise coordinate maxima
        let mut pts = Vec::with_capacity(a.frontier.len() * b.frontier.len());
        for p in &a.frontier {
            for q in &b.frontier {
                pts.push([p[0].max(q[0]), p[1].max(q[1])]);
            }
        }
        UpwardRegion::from_points(pts, false).expect("maxima nonnegative")
    }
}

/// Exact intersection of two convex regions: the boundary is the upper
/// envelope of the two chains.
fn intersect2_convex(a: &UpwardRegion, b: &UpwardRegion) -> UpwardRegion {
    let ca = &a.frontier;
    let cb = &b.frontier;
    let xlo = ca[0][0].max(cb[0][0]);
    let mut xs: Vec<f64> = Vec::new();
    xs.push(xlo);
    for p in ca.iter().chain(cb.iter()) {
        if p[0] >= xlo {
            xs.push(p[0]);
        }
    }
    // crossings between the two piecewise-linear boundaries
    let segments = |c: &[[f64; 2]]| -> Vec<([f64; 2], [f64; 2])> {
        let mut segs: Vec<([f64; 2], [f64; 2])> = c.windows(2).map(|w| (w[0], w[1])).collect();
        let last = c[c.len() - 1];
        let xmax = ca[ca.len() - 1][0].max(cb[cb.len() - 1][0]) + 1.0;
        segs.push((last, [xmax, last[1]]));
        segs
    };
    for (a0, a1) in segments(ca) {
        for (b0, b1) in segments(cb) {
            let lo = a0[0].max(b0[0]).max(xlo);
            let hi = a1[0].min(b1[0]);
            if hi <= lo {
                continue;
            }
            let sa = (a1[1] - a0[1]) / (a1[0] - a0[0]);
            let sb = (b1[1] - b0[1]) / (b1[0] - b0[0]);
            if (sa - sb).abs() < 1e-15 {
                continue;
            }
            // a0.y + sa (x - a0.x) = b0.y + sb (x - b0.x)
            let x = (b0[1] - a0[1] + sa * a0[0] - sb * b0[0]) / (sa - sb);
            if x > lo && x < hi {
                xs.push(x);
            }
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|u, v| (*u - *v).abs() < 1e-12);
    let pts: Vec<[f64; 2]> = xs
        .into_iter()
        .map(|x| [x, chain_eval(ca, x).max(chain_eval(cb, x))])
        .collect();
    UpwardRegion::from_points(pts, true).expect("envelope nonnegative")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stair(pts: &[[f64; 2]]) -> UpwardRegion {
        UpwardRegion::from_points(pts.to_vec(), false).unwrap()
    }

    fn convex(pts: &[[f64; 2]]) -> UpwardRegion {
        UpwardRegion::from_points(pts.to_vec(), true).unwrap()
    }

    #[test]
    fn contains_origin_region() {
        let q = UpwardRegion::quadrant();
        assert!(q.contains([0.0, 0.0]).unwrap());
        assert!(q.contains([3.0, 0.1]).unwrap());
        assert!(q.contains([-0.5, 0.0]).is_err());
    }

    #[test]
    fn contains_convex_diagonal() {
        let r = convex(&[[1.0, 0.0], [0.0, 1.0]]);
        assert!(r.contains([0.5, 0.5]).unwrap());
        assert!(!r.contains([0.4, 0.4]).unwrap());
        assert!(r.contains([0.0, 1.0]).unwrap());
        assert!(!r.contains([0.0, 0.9]).unwrap());
        // staircase interpretation of the same points excludes the midpoint
        let s = stair(&[[1.0, 0.0], [0.0, 1.0]]);
        assert!(!s.contains([0.5, 0.5]).unwrap());
    }

    #[test]
    fn contains_is_monotone() {
        let r = stair(&[[0.2, 0.9], [0.7, 0.3], [1.5, 0.0]]);
        for p in [[0.2, 0.9], [0.7, 0.3], [1.5, 0.0]] {
            assert!(r.contains(p).unwrap());
            assert!(r.contains([p[0] + 0.3, p[1] + 1.0]).unwrap());
        }
        assert!(!r.contains([0.1, 0.1]).unwrap());
    }

    #[test]
    fn shift_basics() {
        let r = stair(&[[1.0, 1.0]]);
        assert_eq!(r.shift([0.0, 0.0]).frontier(), r.frontier());
        let s = r.shift([-1.0, -1.0]);
        assert_eq!(s.frontier(), &[[0.0, 0.0]]);
        let t = convex(&[[1.0, 0.0], [0.0, 1.0]]).shift([0.5, 0.5]);
        assert!((t.min_sum() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn shift_convex_clip_is_exact() {
        // chain through (-1, 3) and (1, 0): clipped boundary must pass
        // through (0, 1.5), not through the clamped vertex (0, 3)
        let r = convex(&[[0.0, 3.0], [2.0, 0.0]]).shift([-1.0, 0.0]);
        assert!(r.contains([0.0, 1.5]).unwrap());
        assert!(!r.contains([0.0, 1.4]).unwrap());
    }

    #[test]
    fn min_sum_examples() {
        assert_eq!(UpwardRegion::quadrant().min_sum(), 0.0);
        assert_eq!(stair(&[[1.0, 0.0], [0.0, 1.0]]).min_sum(), 1.0);
        assert_eq!(
            stair(&[[2.0, 0.0], [0.5, 0.5], [0.0, 2.0]]).min_sum(),
            1.0
        );
        assert_eq!(UpwardRegion::empty().min_sum(), f64::INFINITY);
    }

    #[test]
    fn intersect_examples() {
        let r = stair(&[[0.3, 0.7]]);
        let single = UpwardRegion::intersect(&[&r]).unwrap();
        assert_eq!(single.frontier(), r.frontier());

        let q = UpwardRegion::quadrant();
        let with_quadrant = UpwardRegion::intersect(&[&q, &r]).unwrap();
        assert_eq!(with_quadrant.frontier(), r.frontier());

        let a = stair(&[[1.0, 0.0]]);
        let b = stair(&[[0.0, 1.0]]);
        let c = UpwardRegion::intersect(&[&a, &b]).unwrap();
        assert_eq!(c.frontier(), &[[1.0, 1.0]]);

        assert!(matches!(
            UpwardRegion::intersect(&[]),
            Err(RegionError::EmptyList)
        ));
    }

    #[test]
    fn intersect_convex_envelope() {
        let a = convex(&[[0.0, 1.0], [1.0, 0.0]]);
        let b = convex(&[[0.25, 0.25]]);
        let c = UpwardRegion::intersect(&[&a, &b]).unwrap();
        // envelope: max(line x+y=1, constants from (0.25, 0.25))
        assert!(c.contains([0.25, 0.75]).unwrap());
        assert!(!c.contains([0.1, 0.9]).unwrap());
        assert!(c.contains([0.75, 0.25]).unwrap());
        assert!(!c.contains([0.3, 0.3]).unwrap());
        assert!((c.min_sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn difference_quadrant_is_identity() {
        let s1 = stair(&[[0.4, 0.9], [1.2, 0.1]]);
        let d = UpwardRegion::difference(&s1, &UpwardRegion::quadrant());
        assert_eq!(d.frontier(), s1.frontier());

        // s1 = s2 contains the zero shift
        let d = UpwardRegion::difference(&s1, &s1);
        assert!(d.contains([0.0, 0.0]).unwrap());
    }

    #[test]
    fn difference_convex_scaled_diagonals() {
        let s1 = convex(&[[2.0, 0.0], [0.0, 2.0]]);
        let s2 = convex(&[[1.0, 0.0], [0.0, 1.0]]);
        let d = UpwardRegion::difference(&s1, &s2);
        assert!((d.min_sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn difference_matches_grid_oracle() {
        let s1 = convex(&[[2.0, 0.0], [0.0, 2.0]]);
        let s2 = convex(&[[1.0, 0.0], [0.0, 1.0]]);
        let d = UpwardRegion::difference(&s1, &s2);
        // dense-grid membership oracle at step 1e-3
        let step = 1e-3;
        let mut best = f64::INFINITY;
        let n = (2.5 / step) as usize;
        for i in 0..=n {
            let a = i as f64 * step;
            for j in 0..=n {
                let b = j as f64 * step;
                let ok = s2
                    .frontier()
                    .iter()
                    .all(|f| s1.contains([a + f[0], b + f[1]]).unwrap());
                if ok {
                    best = best.min(a + b);
                    break; // larger b only increases the sum
                }
            }
        }
        assert!((d.min_sum() - best).abs() < 2.5e-3, "alg {} vs grid {}", d.min_sum(), best);
    }

    #[test]
    fn min_sum_subadditive_over_difference() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let randstair = |rng: &mut rand_chacha::ChaCha8Rng| {
                let pts: Vec<[f64; 2]> = (0..5)
                    .map(|_| [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)])
                    .collect();
                stair(&pts)
            };
            let s1 = randstair(&mut rng);
            let s2 = randstair(&mut rng);
            let d = UpwardRegion::difference(&s1, &s2);
            assert!(s1.min_sum() <= d.min_sum() + s2.min_sum() + 1e-9);
        }
    }

    #[test]
    fn canonical_form_is_idempotent() {
        let pts = vec![[0.5, 0.5], [0.5, 0.5], [1.0, 1.0], [0.2, 0.9], [0.9, 0.2]];
        let r = stair(&pts);
        let again = UpwardRegion::from_points(r.frontier().to_vec(), false).unwrap();
        assert_eq!(r.frontier(), again.frontier());
        let c = convex(&pts);
        let again = UpwardRegion::from_points(c.frontier().to_vec(), true).unwrap();
        assert_eq!(c.frontier(), again.frontier());
    }

    #[test]
    fn csv_roundtrip_bit_exact() {
        let r = stair(&[[0.1, 0.9], [0.5310044064107188, 0.2], [1.5, 0.0]]);
        let s = r.to_csv_string();
        let back = UpwardRegion::from_csv_str(&s).unwrap();
        assert_eq!(back.frontier(), r.frontier());
        assert_eq!(back.to_csv_string(), s);
        assert!(UpwardRegion::from_csv_str("nope\n1,2\n").is_err());
        assert!(UpwardRegion::from_csv_str("r1,r2\n1,x\n").is_err());
    }

    #[test]
    fn containment_margin_signs() {
        let r = stair(&[[1.0, 1.0]]);
        assert!((r.containment_margin([2.0, 1.5]) - 0.5).abs() < 1e-9);
        let m = r.containment_margin([0.5, 2.0]);
        assert!((m - (-0.5)).abs() < 1e-9);
    }
}
