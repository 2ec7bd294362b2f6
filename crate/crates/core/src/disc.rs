//! Rectangle discrepancy of boolean functions under arbitrary joint input
//! distributions: exact enumeration on one side with greedy completion on
//! the other, plus an alternating-ascent heuristic for larger instances.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{Alphabet, DistError, JointDist};
use crate::util;

/// Exact enumeration is refused when both sides exceed this many symbols.
pub const ENUM_LIMIT: usize = 24;

#[derive(Debug, Error)]
pub enum DiscError {
    #[error("function is {rows}x{cols}; exact enumeration needs one side <= {limit} (use the heuristic)")]
    TooLarge { rows: usize, cols: usize, limit: usize },
    #[error("distribution must be over exactly two variables, got {0}")]
    NotBivariate(usize),
    #[error("function/distribution shapes differ: {0}")]
    ShapeMismatch(String),
    #[error("invalid function table: {0}")]
    BadTable(String),
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// A boolean function given by its truth table over two finite alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct BoolFn {
    rows: Alphabet,
    cols: Alphabet,
    table: Vec<Vec<u8>>, // table[x][y] in {0,1}
}

impl BoolFn {
    pub fn new(rows: Alphabet, cols: Alphabet, table: Vec<Vec<u8>>) -> Result<Self, DiscError> {
        if table.len() != rows.len() {
            return Err(DiscError::BadTable(format!(
                "expected {} rows, got {}",
                rows.len(),
                table.len()
            )));
        }
        for (i, r) in table.iter().enumerate() {
            if r.len() != cols.len() {
                return Err(DiscError::BadTable(format!(
                    "row {i}: expected {} entries, got {}",
                    cols.len(),
                    r.len()
                )));
            }
            if let Some(j) = r.iter().position(|&b| b > 1) {
                return Err(DiscError::BadTable(format!(
                    "row {i}, column {j}: entries must be 0 or 1"
                )));
            }
        }
        Ok(BoolFn { rows, cols, table })
    }

    pub fn constant(rows: Alphabet, cols: Alphabet, value: u8) -> Self {
        let table = vec![vec![value; cols.len()]; rows.len()];
        BoolFn::new(rows, cols, table).expect("constant table valid")
    }

    /// XOR on single bits.
    pub fn xor() -> Self {
        BoolFn::new(
            Alphabet::binary(),
            Alphabet::binary(),
            vec![vec![0, 1], vec![1, 0]],
        )
        .unwrap()
    }

    /// AND on single bits.
    pub fn and() -> Self {
        BoolFn::new(
            Alphabet::binary(),
            Alphabet::binary(),
            vec![vec![0, 0], vec![0, 1]],
        )
        .unwrap()
    }

    /// Inner product over GF(2) on `n`-bit strings (alphabet `2^n`,
    /// symbols are the binary expansions, e.g. "01").
    pub fn inner_product(n_bits: usize) -> Self {
        let n = 1usize << n_bits;
        let labels: Vec<String> = (0..n)
            .map(|v| (0..n_bits).rev().map(|b| if v >> b & 1 == 1 { '1' } else { '0' }).collect())
            .collect();
        let a = Alphabet::new(labels.clone()).unwrap();
        let table = (0..n)
            .map(|x| (0..n).map(|y| ((x & y).count_ones() & 1) as u8).collect())
            .collect();
        BoolFn::new(a.clone(), Alphabet::new(labels).unwrap(), table).unwrap()
    }

    pub fn complement(&self) -> Self {
        let table = self
            .table
            .iter()
            .map(|r| r.iter().map(|&b| 1 - b).collect())
            .collect();
        BoolFn::new(self.rows.clone(), self.cols.clone(), table).unwrap()
    }

    pub fn row_alphabet(&self) -> &Alphabet {
        &self.rows
    }

    pub fn col_alphabet(&self) -> &Alphabet {
        &self.cols
    }

    pub fn value(&self, x: usize, y: usize) -> u8 {
        self.table[x][y]
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    /// Parses `{"rows": [symbols], "cols": [symbols], "bits": ["0110", ...]}`.
    pub fn from_json_str(s: &str) -> Result<Self, DiscError> {
        #[derive(Deserialize)]
        struct FnFile {
            rows: Vec<String>,
            cols: Vec<String>,
            bits: Vec<String>,
        }
        let f: FnFile = serde_json::from_str(s)
            .map_err(|e| DiscError::BadTable(format!("parse error: {e}")))?;
        let rows = Alphabet::new(f.rows)?;
        let cols = Alphabet::new(f.cols)?;
        let mut table = Vec::with_capacity(f.bits.len());
        for (i, line) in f.bits.iter().enumerate() {
            let mut r = Vec::with_capacity(line.len());
            for (j, ch) in line.chars().enumerate() {
                match ch {
                    '0' => r.push(0),
                    '1' => r.push(1),
                    _ => {
                        return Err(DiscError::BadTable(format!(
                            "bits[{i}] position {j}: expected 0 or 1, found {ch:?}"
                        )))
                    }
                }
            }
            table.push(r);
        }
        BoolFn::new(rows, cols, table)
    }

    pub fn to_json_string(&self) -> String {
        #[derive(Serialize)]
        struct FnFile<'a> {
            rows: &'a [String],
            cols: &'a [String],
            bits: Vec<String>,
        }
        let bits = self
            .table
            .iter()
            .map(|r| r.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect())
            .collect();
        serde_json::to_string_pretty(&FnFile {
            rows: self.rows.symbols(),
            cols: self.cols.symbols(),
            bits,
        })
        .expect("serializable")
    }
}

/// A combinatorial rectangle: sorted index subsets of the two alphabets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rectangle {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl Rectangle {
    pub fn full(n_rows: usize, n_cols: usize) -> Self {
        Rectangle { rows: (0..n_rows).collect(), cols: (0..n_cols).collect() }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.rows.binary_search(&x).is_ok() && self.cols.binary_search(&y).is_ok()
    }

    pub fn label(&self) -> String {
        let join = |v: &[usize]| {
            v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(".")
        };
        format!("x{}|y{}", join(&self.rows), join(&self.cols))
    }
}

/// `Pr[(X,Y) ∈ r]` under `d` (a two-variable distribution).
pub fn rectangle_mass(d: &JointDist, r: &Rectangle) -> Result<f64, DiscError> {
    let (p, _, _) = signed_matrix_checked(None, d)?;
    let mut mass = 0.0;
    for &x in &r.rows {
        for &y in &r.cols {
            mass += p[x][y];
        }
    }
    Ok(mass)
}

/// Probability matrix of `d`, checked against `f`'s alphabets when given.
fn signed_matrix_checked(
    f: Option<&BoolFn>,
    d: &JointDist,
) -> Result<(Vec<Vec<f64>>, usize, usize), DiscError> {
    if d.n_vars() != 2 {
        return Err(DiscError::NotBivariate(d.n_vars()));
    }
    let nx = d.vars()[0].1.len();
    let ny = d.vars()[1].1.len();
    if let Some(f) = f {
        if f.n_rows() != nx || f.n_cols() != ny {
            return Err(DiscError::ShapeMismatch(format!(
                "function {}x{}, distribution {}x{}",
                f.n_rows(),
                f.n_cols(),
                nx,
                ny
            )));
        }
    }
    let probs = d.probs();
    let p: Vec<Vec<f64>> = (0..nx)
        .map(|x| (0..ny).map(|y| probs[x * ny + y]).collect())
        .collect();
    Ok((p, nx, ny))
}

/// Signed mass `+p` on `f = 0` cells and `-p` on `f = 1` cells, so a
/// rectangle's advantage is the absolute value of its signed sum.
fn signed_cells(f: &BoolFn, d: &JointDist) -> Result<Vec<Vec<f64>>, DiscError> {
    let (p, nx, ny) = signed_matrix_checked(Some(f), d)?;
    Ok((0..nx)
        .map(|x| {
            (0..ny)
                .map(|y| if f.value(x, y) == 0 { p[x][y] } else { -p[x][y] })
                .collect()
        })
        .collect())
}

#[derive(Clone, Copy, PartialEq)]
struct Best {
    value: f64,
    row_mask: u32,
    col_mask: u32,
}

impl Best {
    fn better_than(&self, other: &Best) -> bool {
        // ties broken by lexicographically smallest subset encoding
        self.value > other.value
            || (self.value == other.value
                && (self.row_mask, self.col_mask) < (other.row_mask, other.col_mask))
    }
}

/// Greedy column completion for a fixed row subset. Column sums are taken
/// in ascending index order so results are reproducible bit for bit.
fn best_columns(colsign: &[f64]) -> Best {
    let mut pos = 0.0;
    let mut neg = 0.0;
    let mut pos_mask = 0u32;
    let mut neg_mask = 0u32;
    for (y, &c) in colsign.iter().enumerate() {
        if c > 0.0 {
            pos += c;
            pos_mask |= 1 << y;
        } else if c < 0.0 {
            neg += -c;
            neg_mask |= 1 << y;
        }
    }
    let p = Best { value: pos, row_mask: 0, col_mask: pos_mask };
    let n = Best { value: neg, row_mask: 0, col_mask: neg_mask };
    if n.better_than(&p) {
        n
    } else {
        p
    }
}

fn mask_to_vec(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask >> i & 1 == 1).collect()
}

/// Exact rectangle discrepancy `max_r |Pr[r, f=0] - Pr[r, f=1]|` with a
/// maximizing rectangle. Enumerates subsets of the smaller side and
/// completes columns greedily per sign.
pub fn disc_exact(f: &BoolFn, d: &JointDist) -> Result<(f64, Rectangle), DiscError> {
    let s = signed_cells(f, d)?;
    let nx = f.n_rows();
    let ny = f.n_cols();
    if nx.min(ny) > ENUM_LIMIT {
        return Err(DiscError::TooLarge { rows: nx, cols: ny, limit: ENUM_LIMIT });
    }
    let transpose = nx > ny;
    let (cells, n_enum, n_other) = if transpose {
        let t: Vec<Vec<f64>> = (0..ny).map(|y| (0..nx).map(|x| s[x][y]).collect()).collect();
        (t, ny, nx)
    } else {
        (s, nx, ny)
    };

    // DFS over row subsets; per-depth buffers keep every column sum an
    // ascending-index fresh sum (no subtraction), so values match a naive
    // recomputation exactly
    fn rec(
        cells: &[Vec<f64>],
        n_enum: usize,
        n_other: usize,
        next: usize,
        depth: usize,
        mask: u32,
        levels: &mut Vec<Vec<f64>>,
        best: &mut Best,
    ) {
        let mut cand = best_columns(&levels[depth]);
        cand.row_mask = mask;
        if cand.better_than(best) {
            *best = cand;
        }
        for x in next..n_enum {
            let (lo, hi) = levels.split_at_mut(depth + 1);
            for y in 0..n_other {
                hi[0][y] = lo[depth][y] + cells[x][y];
            }
            rec(cells, n_enum, n_other, x + 1, depth + 1, mask | 1 << x, levels, best);
        }
    }
    let mut levels: Vec<Vec<f64>> = vec![vec![0.0; n_other]; n_enum + 1];
    let mut best = Best { value: 0.0, row_mask: 0, col_mask: 0 };
    rec(&cells, n_enum, n_other, 0, 0, 0, &mut levels, &mut best);

    let (row_mask, col_mask) = if transpose {
        (best.col_mask, best.row_mask)
    } else {
        (best.row_mask, best.col_mask)
    };
    Ok((
        best.value,
        Rectangle { rows: mask_to_vec(row_mask, nx), cols: mask_to_vec(col_mask, ny) },
    ))
}

/// Alternating row/column ascent from the full rectangle (first restart) and
/// random starts. Returns a lower bound on the discrepancy.
pub fn disc_heuristic(
    f: &BoolFn,
    d: &JointDist,
    restarts: usize,
    seed: u64,
) -> Result<(f64, Rectangle), DiscError> {
    let s = signed_cells(f, d)?;
    let nx = f.n_rows();
    let ny = f.n_cols();
    let value_of = |rows: &[bool], cols: &[bool]| -> f64 {
        let mut v = 0.0;
        for x in 0..nx {
            if rows[x] {
                for y in 0..ny {
                    if cols[y] {
                        v += s[x][y];
                    }
                }
            }
        }
        v
    };
    let mut best_val = 0.0f64;
    let mut best_rows = vec![false; nx];
    let mut best_cols = vec![false; ny];
    for restart in 0..restarts.max(1) {
        let mut rng = util::stream_rng(seed, "disc-heuristic", restart as u64);
        for sign in [1.0f64, -1.0] {
            let mut rows: Vec<bool> = if restart == 0 {
                vec![true; nx]
            } else {
                (0..nx).map(|_| rng.gen_bool(0.5)).collect()
            };
            let mut cols = vec![true; ny];
            let mut prev = f64::NEG_INFINITY;
            for _ in 0..64 {
                // best columns for fixed rows
                for y in 0..ny {
                    let mut c = 0.0;
                    for x in 0..nx {
                        if rows[x] {
                            c += s[x][y];
                        }
                    }
                    cols[y] = sign * c > 0.0;
                }
                // best rows for fixed columns
                for x in 0..nx {
                    let mut r = 0.0;
                    for y in 0..ny {
                        if cols[y] {
                            r += s[x][y];
                        }
                    }
                    rows[x] = sign * r > 0.0;
                }
                let v = sign * value_of(&rows, &cols);
                if v <= prev + 1e-15 {
                    break;
                }
                prev = v;
            }
            let v = (sign * value_of(&rows, &cols)).max(0.0);
            // the start itself is a candidate too (full rectangle)
            let full = if restart == 0 {
                let all_r = vec![true; nx];
                let all_c = vec![true; ny];
                (sign * value_of(&all_r, &all_c), all_r, all_c)
            } else {
                (f64::NEG_INFINITY, Vec::new(), Vec::new())
            };
            if full.0 > best_val {
                best_val = full.0;
                best_rows = full.1;
                best_cols = full.2;
            }
            if v > best_val {
                best_val = v;
                best_rows = rows.clone();
                best_cols = cols.clone();
            }
        }
    }
    Ok((
        best_val,
        Rectangle {
            rows: (0..nx).filter(|&x| best_rows.get(x).copied().unwrap_or(false)).collect(),
            cols: (0..ny).filter(|&y| best_cols.get(y).copied().unwrap_or(false)).collect(),
        },
    ))
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::*;

    /// Naive enumeration over all `2^|X| * 2^|Y|` rectangles, with column
    /// sums accumulated in the same ascending order as `disc_exact`.
    pub fn disc_naive(f: &BoolFn, d: &JointDist) -> (f64, Rectangle) {
        let s = signed_cells(f, d).unwrap();
        let nx = f.n_rows();
        let ny = f.n_cols();
        let mut best = Best { value: 0.0, row_mask: 0, col_mask: 0 };
        for row_mask in 0u32..1 << nx {
            let mut colsign = vec![0.0; ny];
            for x in 0..nx {
                if row_mask >> x & 1 == 1 {
                    for y in 0..ny {
                        colsign[y] += s[x][y];
                    }
                }
            }
            for col_mask in 0u32..1 << ny {
                let mut v = 0.0;
                for (y, &c) in colsign.iter().enumerate() {
                    if col_mask >> y & 1 == 1 {
                        v += c;
                    }
                }
                let cand = Best { value: v.abs(), row_mask, col_mask };
                if cand.better_than(&best) {
                    best = cand;
                }
            }
        }
        (
            best.value,
            Rectangle {
                rows: mask_to_vec(best.row_mask, nx),
                cols: mask_to_vec(best.col_mask, ny),
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::JointDist;
    use rand::Rng;

    fn uniform2(nx: usize, ny: usize) -> JointDist {
        JointDist::uniform(vec![
            ("X".into(), Alphabet::of_size(nx)),
            ("Y".into(), Alphabet::of_size(ny)),
        ])
        .unwrap()
    }

    /// Random dyadic distribution: nonnegative multiples of 2^-12 summing to
    /// exactly one, so every column sum in the tests is exact in f64.
    pub(super) fn random_dyadic(nx: usize, ny: usize, rng: &mut impl Rng) -> JointDist {
        let n = nx * ny;
        let total = 1u32 << 12;
        let mut weights = vec![0u32; n];
        for _ in 0..total {
            weights[rng.gen_range(0..n)] += 1;
        }
        let probs: Vec<f64> = weights.iter().map(|&w| w as f64 / total as f64).collect();
        JointDist::new(
            vec![
                ("X".into(), Alphabet::of_size(nx)),
                ("Y".into(), Alphabet::of_size(ny)),
            ],
            probs,
        )
        .unwrap()
    }

    #[test]
    fn constant_function_has_full_discrepancy() {
        let f = BoolFn::constant(Alphabet::of_size(4), Alphabet::of_size(2), 0);
        let d = uniform2(4, 2);
        let (v, w) = disc_exact(&f, &d).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(w, Rectangle::full(4, 2));
        let (hv, _) = disc_heuristic(&f, &d, 1, 0).unwrap();
        assert_eq!(hv, 1.0);
    }

    #[test]
    fn xor_uniform_quarter() {
        let f = BoolFn::xor();
        let d = uniform2(2, 2);
        let (v, _) = disc_exact(&f, &d).unwrap();
        assert_eq!(v, 0.25);
        let (nv, _) = oracle::disc_naive(&f, &d);
        assert_eq!(nv, 0.25);
    }

    #[test]
    fn two_bit_inner_product_matches_naive() {
        let f = BoolFn::inner_product(2);
        let d = uniform2(4, 4);
        let (v, w) = disc_exact(&f, &d).unwrap();
        let (nv, nw) = oracle::disc_naive(&f, &d);
        assert_eq!(v, nv);
        assert_eq!(w, nw);
    }

    #[test]
    fn exact_matches_naive_on_random_dyadic_instances() {
        let mut rng = crate::util::stream_rng(0, "disc-test", 0);
        for _ in 0..60 {
            let d = random_dyadic(4, 4, &mut rng);
            let table: Vec<Vec<u8>> = (0..4)
                .map(|_| (0..4).map(|_| rng.gen_range(0..2u8)).collect())
                .collect();
            let f = BoolFn::new(Alphabet::of_size(4), Alphabet::of_size(4), table).unwrap();
            let (v, w) = disc_exact(&f, &d).unwrap();
            let (nv, nw) = oracle::disc_naive(&f, &d);
            assert_eq!(v, nv);
            assert_eq!(w, nw);
            // label symmetry is exact
            let (vc, _) = disc_exact(&f.complement(), &d).unwrap();
            assert_eq!(v, vc);
            // the heuristic never exceeds the exact value
            let (hv, _) = disc_heuristic(&f, &d, 8, 1).unwrap();
            assert!(hv <= v + 1e-12);
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn transposed_orientation_consistent() {
        // 8 rows x 2 cols forces enumeration over the column side
        let mut rng = crate::util::stream_rng(0, "disc-transpose", 0);
        let d = random_dyadic(8, 2, &mut rng);
        let table: Vec<Vec<u8>> = (0..8)
            .map(|_| (0..2).map(|_| rng.gen_range(0..2u8)).collect())
            .collect();
        let f = BoolFn::new(Alphabet::of_size(8), Alphabet::of_size(2), table).unwrap();
        let (v, w) = disc_exact(&f, &d).unwrap();
        let (nv, _) = oracle::disc_naive(&f, &d);
        assert!((v - nv).abs() < 1e-15);
        for &x in &w.rows {
            assert!(x < 8);
        }
        for &y in &w.cols {
            assert!(y < 2);
        }
    }

    #[test]
    fn six_bit_ip_heuristic_vs_exact() {
        // heuristic on the full 8x8 inner product vs exact enumeration
        let f = BoolFn::inner_product(3);
        let d = uniform2(8, 8);
        let (v, _) = disc_exact(&f, &d).unwrap();
        let (hv, _) = disc_heuristic(&f, &d, 32, 0).unwrap();
        assert!(hv <= v + 1e-12);
        assert!(hv >= 0.5 * v); // ascent should not be far off at this size
    }

    #[test]
    fn size_limit_suggests_heuristic() {
        let f = BoolFn::constant(Alphabet::of_size(25), Alphabet::of_size(25), 1);
        let d = uniform2(25, 25);
        match disc_exact(&f, &d) {
            Err(DiscError::TooLarge { limit, .. }) => assert_eq!(limit, ENUM_LIMIT),
            other => panic!("expected size error, got {other:?}"),
        }
    }

    #[test]
    fn rectangle_mass_cases() {
        let d = uniform2(4, 4);
        assert_eq!(rectangle_mass(&d, &Rectangle::full(4, 4)).unwrap(), 1.0);
        assert_eq!(
            rectangle_mass(&d, &Rectangle { rows: vec![], cols: vec![] }).unwrap(),
            0.0
        );
        assert!(
            (rectangle_mass(&d, &Rectangle { rows: vec![1], cols: vec![2] }).unwrap() - 1.0 / 16.0)
                .abs()
                < 1e-15
        );
    }

    #[test]
    fn boolfn_json_roundtrip() {
        let f = BoolFn::inner_product(2);
        let s = f.to_json_string();
        let back = BoolFn::from_json_str(&s).unwrap();
        assert_eq!(back, f);
        assert!(BoolFn::from_json_str("{\"rows\":[\"a\"],\"cols\":[\"b\"],\"bits\":[\"2\"]}").is_err());
    }
}
