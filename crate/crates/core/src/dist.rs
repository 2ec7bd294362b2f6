//! Exact arithmetic on finite joint distributions: marginals, channels,
//! Shannon entropies, mutual information, total variation.
//!
//! All quantities are in bits (logarithms base 2) and `0 log 0 = 0`.
//! Distributions are dense tensors over named variables with string-labelled
//! alphabets. Inputs must be valid probability vectors up to a mass tolerance
//! of 1e-12; nothing is ever renormalized silently.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for "sums to one" validity checks on input data.
pub const MASS_TOL: f64 = 1e-12;

/// Dense tensors are refused beyond this many entries (desk-scale tool).
pub const MAX_ENTRIES: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum DistError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("alphabet must be nonempty")]
    EmptyAlphabet,
    #[error("duplicate symbol `{0}` in alphabet")]
    DuplicateSymbol(String),
    #[error("variable selection must be nonempty")]
    EmptySelection,
    #[error("variable sets overlap on `{0}`")]
    OverlappingSets(String),
    #[error("variable name `{0}` already present")]
    NameClash(String),
    #[error("arity mismatch: expected {expected} {what}, got {got}")]
    ArityMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("distribution signatures differ: {0}")]
    SignatureMismatch(String),
    #[error("total mass {0} is not within 1e-12 of 1 (inputs are never renormalized)")]
    InvalidMass(f64),
    #[error("negative entry {value} at {at}")]
    NegativeEntry { at: String, value: f64 },
    #[error("channel row {row} sums to {sum}, not 1 within 1e-12")]
    NonStochasticRow { row: usize, sum: f64 },
    #[error("tensor would have {entries} entries, above the cap of {cap}")]
    TooLarge { entries: usize, cap: usize },
    #[error("parse error at {path}: {msg}")]
    Parse { path: String, msg: String },
}

/// An ordered alphabet of distinct string labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl Alphabet {
    pub fn new<I, S>(symbols: I) -> Result<Self, DistError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(DistError::EmptyAlphabet);
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(DistError::DuplicateSymbol(s.clone()));
            }
        }
        Ok(Alphabet { symbols, index })
    }

    /// Alphabet `{"0", "1", ..., "n-1"}`.
    pub fn of_size(n: usize) -> Self {
        Alphabet::new((0..n).map(|i| i.to_string())).expect("n >= 1")
    }

    pub fn binary() -> Self {
        Alphabet::of_size(2)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, i: usize) -> &str {
        &self.symbols[i]
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }
}

/// A joint probability distribution over named finite variables,
/// stored as a dense row-major tensor (first variable varies slowest).
#[derive(Debug, Clone, PartialEq)]
pub struct JointDist {
    vars: Vec<(String, Alphabet)>,
    probs: Vec<f64>,
}

impl JointDist {
    pub fn new(vars: Vec<(String, Alphabet)>, probs: Vec<f64>) -> Result<Self, DistError> {
        let mut seen = HashSet::new();
        for (name, _) in &vars {
            if !seen.insert(name.clone()) {
                return Err(DistError::DuplicateVariable(name.clone()));
            }
        }
        let mut entries = 1usize;
        for (_, a) in &vars {
            entries = entries
                .checked_mul(a.len())
                .ok_or(DistError::TooLarge { entries: usize::MAX, cap: MAX_ENTRIES })?;
        }
        if entries > MAX_ENTRIES {
            return Err(DistError::TooLarge { entries, cap: MAX_ENTRIES });
        }
        if probs.len() != entries {
            return Err(DistError::ArityMismatch {
                what: "tensor entries",
                expected: entries,
                got: probs.len(),
            });
        }
        let mut total = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            if p < 0.0 || !p.is_finite() {
                return Err(DistError::NegativeEntry { at: format!("entry {i}"), value: p });
            }
            total += p;
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(DistError::InvalidMass(total));
        }
        Ok(JointDist { vars, probs })
    }

    /// Two-variable distribution from a probability matrix (rows = first var).
    pub fn from_matrix(
        name_a: &str,
        name_b: &str,
        rows: &[Vec<f64>],
    ) -> Result<Self, DistError> {
        let na = rows.len();
        let nb = rows.first().map_or(0, Vec::len);
        let mut probs = Vec::with_capacity(na * nb);
        for r in rows {
            if r.len() != nb {
                return Err(DistError::ArityMismatch {
                    what: "matrix columns",
                    expected: nb,
                    got: r.len(),
                });
            }
            probs.extend_from_slice(r);
        }
        JointDist::new(
            vec![
                (name_a.to_string(), Alphabet::of_size(na)),
                (name_b.to_string(), Alphabet::of_size(nb)),
            ],
            probs,
        )
    }

    /// Uniform distribution over the given variables.
    pub fn uniform(vars: Vec<(String, Alphabet)>) -> Result<Self, DistError> {
        let n: usize = vars.iter().map(|(_, a)| a.len()).product();
        JointDist::new(vars, vec![1.0 / n as f64; n])
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn var_names(&self) -> Vec<&str> {
        self.vars.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn vars(&self) -> &[(String, Alphabet)] {
        &self.vars
    }

    pub fn alphabet(&self, name: &str) -> Result<&Alphabet, DistError> {
        self.axis(name).map(|i| &self.vars[i].1)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn axis(&self, name: &str) -> Result<usize, DistError> {
        self.vars
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| DistError::UnknownVariable(name.to_string()))
    }

    fn shape(&self) -> Vec<usize> {
        self.vars.iter().map(|(_, a)| a.len()).collect()
    }

    fn strides(&self) -> Vec<usize> {
        let shape = self.shape();
        let mut strides = vec![1usize; shape.len()];
        for i in (0..shape.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * shape[i + 1];
        }
        strides
    }

    pub fn prob(&self, idx: &[usize]) -> f64 {
        let strides = self.strides();
        debug_assert_eq!(idx.len(), strides.len());
        let flat: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        self.probs[flat]
    }

    fn axes_of(&self, names: &[&str]) -> Result<Vec<usize>, DistError> {
        names.iter().map(|n| self.axis(n)).collect()
    }

    /// Sums out every variable not in `keep`; the kept variables retain
    /// their original order.
    pub fn marginalize(&self, keep: &[&str]) -> Result<JointDist, DistError> {
        if keep.is_empty() {
            return Err(DistError::EmptySelection);
        }
        let keep_axes: HashSet<usize> = self.axes_of(keep)?.into_iter().collect();
        let shape = self.shape();
        let kept: Vec<usize> = (0..self.vars.len()).filter(|i| keep_axes.contains(i)).collect();
        let out_vars: Vec<(String, Alphabet)> = kept.iter().map(|&i| self.vars[i].clone()).collect();
        let out_shape: Vec<usize> = kept.iter().map(|&i| shape[i]).collect();
        let mut out_strides = vec![1usize; out_shape.len()];
        for i in (0..out_shape.len().saturating_sub(1)).rev() {
            out_strides[i] = out_strides[i + 1] * out_shape[i + 1];
        }
        // stride of each source axis in the target tensor (0 = summed out)
        let strides = self.strides();
        let mut map = vec![0usize; self.vars.len()];
        for (k, &axis) in kept.iter().enumerate() {
            map[axis] = out_strides[k];
        }
        let out_len: usize = out_shape.iter().product();
        let mut out = vec![0.0; out_len];
        for (flat, &p) in self.probs.iter().enumerate() {
            let mut rem = flat;
            let mut tgt = 0usize;
            for (axis, &s) in strides.iter().enumerate() {
                let i = rem / s;
                rem %= s;
                tgt += i * map[axis];
            }
            out[tgt] += p;
        }
        // mass is preserved by summation but the constructor revalidates
        JointDist::new(out_vars, out)
    }

    /// Extends the distribution with the channel's output variable:
    /// `p(vars, q) = p(vars) * ch(q | from-vars)`.
    pub fn attach_channel(&self, ch: &Channel) -> Result<JointDist, DistError> {
        if self.axis(&ch.to_name).is_ok() {
            return Err(DistError::NameClash(ch.to_name.clone()));
        }
        let from_axes = self.axes_of(&ch.from_vars.iter().map(String::as_str).collect::<Vec<_>>())?;
        let from_arities: Vec<usize> = from_axes.iter().map(|&i| self.vars[i].1.len()).collect();
        let expected_rows: usize = from_arities.iter().product();
        if ch.rows.len() != expected_rows {
            return Err(DistError::ArityMismatch {
                what: "channel rows",
                expected: expected_rows,
                got: ch.rows.len(),
            });
        }
        let nq = ch.to_alphabet.len();
        let strides = self.strides();
        let mut row_strides = vec![1usize; from_arities.len()];
        for i in (0..from_arities.len().saturating_sub(1)).rev() {
            row_strides[i] = row_strides[i + 1] * from_arities[i + 1];
        }
        let out_len = self
            .probs
            .len()
            .checked_mul(nq)
            .ok_or(DistError::TooLarge { entries: usize::MAX, cap: MAX_ENTRIES })?;
        if out_len > MAX_ENTRIES {
            return Err(DistError::TooLarge { entries: out_len, cap: MAX_ENTRIES });
        }
        let mut out = vec![0.0; out_len];
        for (flat, &p) in self.probs.iter().enumerate() {
            let mut row = 0usize;
            for (k, &axis) in from_axes.iter().enumerate() {
                let i = (flat / strides[axis]) % self.vars[axis].1.len();
                row += i * row_strides[k];
            }
            let base = flat * nq;
            for (q, &c) in ch.rows[row].iter().enumerate() {
                out[base + q] = p * c;
            }
        }
        let mut vars = self.vars.clone();
        vars.push((ch.to_name.clone(), ch.to_alphabet.clone()));
        JointDist::new(vars, out)
    }

    fn shannon(&self) -> f64 {
        let mut h = 0.0;
        for &p in &self.probs {
            if p > 0.0 {
                h -= p * p.log2();
            }
        }
        h
    }

    /// Conditional Shannon entropy `H(vars | given)` in bits.
    pub fn entropy(&self, vars: &[&str], given: &[&str]) -> Result<f64, DistError> {
        for v in vars {
            if given.contains(v) {
                return Err(DistError::OverlappingSets(v.to_string()));
            }
        }
        self.axes_of(vars)?;
        self.axes_of(given)?;
        let joint: Vec<&str> = vars.iter().chain(given.iter()).copied().collect();
        let h_joint = if joint.is_empty() { 0.0 } else { self.marginalize(&joint)?.shannon() };
        let h_given = if given.is_empty() { 0.0 } else { self.marginalize(given)?.shannon() };
        Ok(h_joint - h_given)
    }

    /// Conditional mutual information `I(a ; b | given)` in bits,
    /// clamped at zero against roundoff.
    pub fn mutual_info(&self, a: &[&str], b: &[&str], given: &[&str]) -> Result<f64, DistError> {
        for v in a {
            if b.contains(v) || given.contains(v) {
                return Err(DistError::OverlappingSets(v.to_string()));
            }
        }
        for v in b {
            if given.contains(v) {
                return Err(DistError::OverlappingSets(v.to_string()));
            }
        }
        if a.is_empty() || b.is_empty() {
            return Err(DistError::EmptySelection);
        }
        let ac: Vec<&str> = a.iter().chain(given.iter()).copied().collect();
        let bc: Vec<&str> = b.iter().chain(given.iter()).copied().collect();
        let abc: Vec<&str> = a.iter().chain(b.iter()).chain(given.iter()).copied().collect();
        let h_ac = self.marginalize(&ac)?.shannon();
        let h_bc = self.marginalize(&bc)?.shannon();
        let h_abc = self.marginalize(&abc)?.shannon();
        let h_c = if given.is_empty() { 0.0 } else { self.marginalize(given)?.shannon() };
        let i = h_ac + h_bc - h_abc - h_c;
        Ok(if i < 0.0 { 0.0 } else { i })
    }

    /// Total variation distance; the two distributions must have the same
    /// variable names and alphabets in the same order.
    pub fn stat_distance(&self, other: &JointDist) -> Result<f64, DistError> {
        if self.vars != other.vars {
            return Err(DistError::SignatureMismatch(format!(
                "{:?} vs {:?}",
                self.var_names(),
                other.var_names()
            )));
        }
        let mut s = 0.0;
        for (p, q) in self.probs.iter().zip(&other.probs) {
            s += (p - q).abs();
        }
        Ok(0.5 * s)
    }

    /// Independent product of two distributions over disjoint variables.
    pub fn product(&self, other: &JointDist) -> Result<JointDist, DistError> {
        for (n, _) in &other.vars {
            if self.axis(n).is_ok() {
                return Err(DistError::NameClash(n.clone()));
            }
        }
        let mut vars = self.vars.clone();
        vars.extend(other.vars.iter().cloned());
        let mut probs = Vec::with_capacity(self.probs.len() * other.probs.len());
        for &p in &self.probs {
            for &q in &other.probs {
                probs.push(p * q);
            }
        }
        JointDist::new(vars, probs)
    }

    /// Regroups variables into composite variables (one per group, in the
    /// given order); variables not mentioned are summed out. Composite
    /// symbols are member symbols joined with `,`.
    pub fn group(&self, groups: &[(&str, &[&str])]) -> Result<JointDist, DistError> {
        if groups.is_empty() {
            return Err(DistError::EmptySelection);
        }
        let mut seen = HashSet::new();
        for (_, members) in groups {
            if members.is_empty() {
                return Err(DistError::EmptySelection);
            }
            for m in *members {
                if !seen.insert(*m) {
                    return Err(DistError::OverlappingSets(m.to_string()));
                }
            }
        }
        let all: Vec<&str> = groups.iter().flat_map(|(_, m)| m.iter().copied()).collect();
        let reduced = self.marginalize(&all)?;
        let shape = reduced.shape();
        let strides = reduced.strides();
        // composite alphabets and per-source-axis stride into the target
        let mut out_vars = Vec::with_capacity(groups.len());
        let mut group_sizes = Vec::with_capacity(groups.len());
        for (name, members) in groups {
            let axes = reduced.axes_of(members)?;
            let arities: Vec<usize> = axes.iter().map(|&i| shape[i]).collect();
            let size: usize = arities.iter().product();
            let mut labels = Vec::with_capacity(size);
            let mut idx = vec![0usize; arities.len()];
            loop {
                let label = idx
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| reduced.vars[axes[k]].1.symbol(i))
                    .collect::<Vec<_>>()
                    .join(",");
                labels.push(label);
                // odometer
                let mut k = arities.len();
                loop {
                    if k == 0 {
                        break;
                    }
                    k -= 1;
                    idx[k] += 1;
                    if idx[k] < arities[k] {
                        break;
                    }
                    idx[k] = 0;
                }
                if idx.iter().all(|&i| i == 0) {
                    break;
                }
            }
            out_vars.push((name.to_string(), Alphabet::new(labels)?));
            group_sizes.push(size);
        }
        let mut out_strides = vec![1usize; groups.len()];
        for i in (0..groups.len().saturating_sub(1)).rev() {
            out_strides[i] = out_strides[i + 1] * group_sizes[i + 1];
        }
        // stride of each source axis within the target flat index
        let mut map = vec![0usize; reduced.vars.len()];
        for (g, (_, members)) in groups.iter().enumerate() {
            let axes = reduced.axes_of(members)?;
            let mut s = out_strides[g];
            for &axis in axes.iter().rev() {
                map[axis] = s;
                s *= shape[axis];
            }
        }
        let out_len: usize = group_sizes.iter().product();
        let mut out = vec![0.0; out_len];
        for (flat, &p) in reduced.probs.iter().enumerate() {
            let mut tgt = 0usize;
            for (axis, &s) in strides.iter().enumerate() {
                let i = (flat / s) % shape[axis];
                tgt += i * map[axis];
            }
            out[tgt] += p;
        }
        JointDist::new(out_vars, out)
    }

    /// Two-variable composite view `(first; second)`.
    pub fn group2(
        &self,
        first_name: &str,
        first: &[&str],
        second_name: &str,
        second: &[&str],
    ) -> Result<JointDist, DistError> {
        self.group(&[(first_name, first), (second_name, second)])
    }

    pub fn rename_var(&self, old: &str, new: &str) -> Result<JointDist, DistError> {
        let axis = self.axis(old)?;
        if old != new && self.axis(new).is_ok() {
            return Err(DistError::NameClash(new.to_string()));
        }
        let mut vars = self.vars.clone();
        vars[axis].0 = new.to_string();
        JointDist::new(vars, self.probs.clone())
    }

    /// Extracts the conditional `p(target | given)` as a channel. Rows for
    /// zero-probability conditioning assignments are set to uniform.
    pub fn conditional(&self, target: &str, given: &[&str]) -> Result<Channel, DistError> {
        let t_axis = self.axis(target)?;
        if given.contains(&target) {
            return Err(DistError::OverlappingSets(target.to_string()));
        }
        let joint: Vec<&str> = given.iter().copied().chain([target]).collect();
        let m = self.marginalize(&joint)?;
        // in `m`, the variables keep source order; reorder via strides
        let shape = m.shape();
        let strides = m.strides();
        let g_axes = m.axes_of(given)?;
        let t_axis_m = m.axis(target)?;
        let n_rows: usize = g_axes.iter().map(|&i| shape[i]).product();
        let nt = shape[t_axis_m];
        let mut row_strides = vec![1usize; g_axes.len()];
        for i in (0..g_axes.len().saturating_sub(1)).rev() {
            row_strides[i] = row_strides[i + 1] * shape[g_axes[i + 1]];
        }
        let mut rows = vec![vec![0.0; nt]; n_rows];
        for (flat, &p) in m.probs().iter().enumerate() {
            let mut row = 0usize;
            for (k, &axis) in g_axes.iter().enumerate() {
                row += ((flat / strides[axis]) % shape[axis]) * row_strides[k];
            }
            let t = (flat / strides[t_axis_m]) % nt;
            rows[row][t] += p;
        }
        for row in &mut rows {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                for v in row.iter_mut() {
                    *v /= s;
                }
            } else {
                for v in row.iter_mut() {
                    *v = 1.0 / nt as f64;
                }
            }
        }
        Channel::new(
            given.iter().map(|s| s.to_string()).collect(),
            target,
            self.vars[t_axis].1.clone(),
            rows,
        )
    }
}

/// A conditional distribution `p(to | from-vars)`: one stochastic row per
/// joint assignment of the from-variables (row-major in their listed order,
/// with arities taken from the distribution it is attached to).
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub from_vars: Vec<String>,
    pub to_name: String,
    pub to_alphabet: Alphabet,
    pub rows: Vec<Vec<f64>>,
}

impl Channel {
    pub fn new(
        from_vars: Vec<String>,
        to_name: &str,
        to_alphabet: Alphabet,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, DistError> {
        let mut seen = HashSet::new();
        for v in &from_vars {
            if !seen.insert(v.clone()) {
                return Err(DistError::DuplicateVariable(v.clone()));
            }
        }
        let nq = to_alphabet.len();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != nq {
                return Err(DistError::ArityMismatch {
                    what: "row entries",
                    expected: nq,
                    got: row.len(),
                });
            }
            let mut sum = 0.0;
            for (q, &p) in row.iter().enumerate() {
                if p < 0.0 || !p.is_finite() {
                    return Err(DistError::NegativeEntry {
                        at: format!("row {r}, entry {q}"),
                        value: p,
                    });
                }
                sum += p;
            }
            if (sum - 1.0).abs() > MASS_TOL {
                return Err(DistError::NonStochasticRow { row: r, sum });
            }
        }
        Ok(Channel {
            from_vars,
            to_name: to_name.to_string(),
            to_alphabet,
            rows,
        })
    }

    /// Channel with a single output symbol (point mass).
    pub fn constant(from_vars: Vec<String>, to_name: &str, n_rows: usize) -> Self {
        Channel {
            from_vars,
            to_name: to_name.to_string(),
            to_alphabet: Alphabet::of_size(1),
            rows: vec![vec![1.0]; n_rows],
        }
    }

    /// Deterministic channel `to = map(from)`, given per-row output indices.
    pub fn deterministic(
        from_vars: Vec<String>,
        to_name: &str,
        to_alphabet: Alphabet,
        map: &[usize],
    ) -> Self {
        let nq = to_alphabet.len();
        let rows = map
            .iter()
            .map(|&q| {
                let mut row = vec![0.0; nq];
                row[q] = 1.0;
                row
            })
            .collect();
        Channel {
            from_vars,
            to_name: to_name.to_string(),
            to_alphabet,
            rows,
        }
    }
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct VarSpec {
    name: String,
    symbols: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct DistFile {
    variables: Vec<VarSpec>,
    probs: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct ChannelFile {
    from: Vec<String>,
    to: VarSpec,
    rows: Vec<Vec<f64>>,
}

fn flatten_probs(
    value: &serde_json::Value,
    dims: &[usize],
    path: &mut String,
    out: &mut Vec<f64>,
) -> Result<(), DistError> {
    if dims.is_empty() {
        match value.as_f64() {
            Some(p) => {
                out.push(p);
                Ok(())
            }
            None => Err(DistError::Parse {
                path: path.clone(),
                msg: "expected a number".into(),
            }),
        }
    } else {
        let arr = value.as_array().ok_or_else(|| DistError::Parse {
            path: path.clone(),
            msg: format!("expected an array of length {}", dims[0]),
        })?;
        if arr.len() != dims[0] {
            return Err(DistError::Parse {
                path: path.clone(),
                msg: format!("expected {} entries, found {}", dims[0], arr.len()),
            });
        }
        for (i, v) in arr.iter().enumerate() {
            let len = path.len();
            path.push_str(&format!("[{i}]"));
            flatten_probs(v, &dims[1..], path, out)?;
            path.truncate(len);
        }
        Ok(())
    }
}

impl JointDist {
    /// Parses the structured-text distribution format:
    /// `{"variables": [{"name", "symbols"}], "probs": <nested arrays>}`.
    pub fn from_json_str(s: &str) -> Result<JointDist, DistError> {
        let file: DistFile = serde_json::from_str(s).map_err(|e| DistError::Parse {
            path: "<root>".into(),
            msg: e.to_string(),
        })?;
        let mut vars = Vec::with_capacity(file.variables.len());
        for v in &file.variables {
            let a = Alphabet::new(v.symbols.iter().cloned())?;
            vars.push((v.name.clone(), a));
        }
        let dims: Vec<usize> = vars.iter().map(|(_, a)| a.len()).collect();
        let mut probs = Vec::new();
        let mut path = String::from("probs");
        flatten_probs(&file.probs, &dims, &mut path, &mut probs)?;
        JointDist::new(vars, probs)
    }

    pub fn to_json_string(&self) -> String {
        fn nest(probs: &[f64], dims: &[usize]) -> serde_json::Value {
            if dims.len() == 1 {
                serde_json::Value::Array(
                    probs.iter().map(|&p| serde_json::json!(p)).collect(),
                )
            } else {
                let chunk = probs.len() / dims[0];
                serde_json::Value::Array(
                    (0..dims[0])
                        .map(|i| nest(&probs[i * chunk..(i + 1) * chunk], &dims[1..]))
                        .collect(),
                )
            }
        }
        let file = DistFile {
            variables: self
                .vars
                .iter()
                .map(|(name, a)| VarSpec {
                    name: name.clone(),
                    symbols: a.symbols().to_vec(),
                })
                .collect(),
            probs: nest(&self.probs, &self.shape()),
        };
        serde_json::to_string_pretty(&file).expect("serializable")
    }
}

impl Channel {
    /// Parses `{"from": [names], "to": {"name","symbols"}, "rows": [[..]]}`.
    pub fn from_json_str(s: &str) -> Result<Channel, DistError> {
        let file: ChannelFile = serde_json::from_str(s).map_err(|e| DistError::Parse {
            path: "<root>".into(),
            msg: e.to_string(),
        })?;
        let alphabet = Alphabet::new(file.to.symbols.iter().cloned())?;
        Channel::new(file.from, &file.to.name, alphabet, file.rows)
    }

    pub fn to_json_string(&self) -> String {
        let file = ChannelFile {
            from: self.from_vars.clone(),
            to: VarSpec {
                name: self.to_name.clone(),
                symbols: self.to_alphabet.symbols().to_vec(),
            },
            rows: self.rows.clone(),
        };
        serde_json::to_string_pretty(&file).expect("serializable")
    }
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.log2();
    }
    if p < 1.0 {
        h -= (1.0 - p) * (1.0 - p).log2();
    }
    h
}

/// Doubly symmetric binary source: uniform bit `a`, `b` = `a` flipped with
/// probability `crossover`.
pub fn dsbs(name_a: &str, name_b: &str, crossover: f64) -> JointDist {
    let p = crossover;
    JointDist::from_matrix(
        name_a,
        name_b,
        &[vec![0.5 * (1.0 - p), 0.5 * p], vec![0.5 * p, 0.5 * (1.0 - p)]],
    )
    .expect("valid dsbs")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_bits(names: &[&str]) -> JointDist {
        JointDist::uniform(
            names
                .iter()
                .map(|n| (n.to_string(), Alphabet::binary()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn marginalize_uniform_pair() {
        let d = uniform_bits(&["X", "Y"]);
        let m = d.marginalize(&["X"]).unwrap();
        assert_eq!(m.probs(), &[0.5, 0.5]);
        // keep everything: identical tensor
        let all = d.marginalize(&["X", "Y"]).unwrap();
        assert_eq!(all.probs(), d.probs());
    }

    #[test]
    fn marginalize_column_sums() {
        let d = JointDist::from_matrix("X", "Y", &[vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        let m = d.marginalize(&["Y"]).unwrap();
        assert!((m.probs()[0] - 0.4).abs() < 1e-15);
        assert!((m.probs()[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn marginalize_unknown_var() {
        let d = uniform_bits(&["X", "Y"]);
        assert!(matches!(
            d.marginalize(&["Z"]),
            Err(DistError::UnknownVariable(_))
        ));
    }

    #[test]
    fn attach_constant_channel_is_identity() {
        let d = JointDist::from_matrix("X", "Y", &[vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        let ch = Channel::constant(vec!["X".into(), "Y".into()], "Q", 4);
        let e = d.attach_channel(&ch).unwrap();
        let back = e.marginalize(&["X", "Y"]).unwrap();
        assert_eq!(back.probs(), d.probs());
    }

    #[test]
    fn attach_copy_channel() {
        let d = uniform_bits(&["X"]);
        let ch = Channel::deterministic(vec!["X".into()], "Q", Alphabet::binary(), &[0, 1]);
        let e = d.attach_channel(&ch).unwrap();
        assert_eq!(e.entropy(&["Q"], &["X"]).unwrap(), 0.0);
        assert_eq!(e.prob(&[0, 0]), 0.5);
        assert_eq!(e.prob(&[0, 1]), 0.0);
    }

    #[test]
    fn attach_xor_channel() {
        let d = uniform_bits(&["X", "Y"]);
        // Q = X xor Y
        let ch = Channel::deterministic(
            vec!["X".into(), "Y".into()],
            "Q",
            Alphabet::binary(),
            &[0, 1, 1, 0],
        );
        let e = d.attach_channel(&ch).unwrap();
        let mq = e.marginalize(&["Q"]).unwrap();
        assert_eq!(mq.probs(), &[0.5, 0.5]);
        let i = e.mutual_info(&["X", "Y"], &["Q"], &[]).unwrap();
        assert!((i - 1.0).abs() < 1e-12);
    }

    #[test]
    fn attach_name_clash() {
        let d = uniform_bits(&["X"]);
        let ch = Channel::constant(vec!["X".into()], "X", 2);
        assert!(matches!(d.attach_channel(&ch), Err(DistError::NameClash(_))));
    }

    #[test]
    fn entropy_basics() {
        let d = uniform_bits(&["X"]);
        assert_eq!(d.entropy(&["X"], &[]).unwrap(), 1.0);

        // X = Y: H(X|Y) = 0
        let eq = JointDist::from_matrix("X", "Y", &[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        assert_eq!(eq.entropy(&["X"], &["Y"]).unwrap(), 0.0);

        // H(p = 0.1) = binary entropy, also frozen numerically
        let skew = JointDist::new(
            vec![("X".into(), Alphabet::binary())],
            vec![0.1, 0.9],
        )
        .unwrap();
        let h = skew.entropy(&["X"], &[]).unwrap();
        assert!((h - binary_entropy(0.1)).abs() < 1e-15);
        assert!((h - 0.4689955935892812).abs() < 1e-12);
    }

    #[test]
    fn mutual_info_basics() {
        let d = uniform_bits(&["X", "Y"]);
        assert_eq!(d.mutual_info(&["X"], &["Y"], &[]).unwrap(), 0.0);

        let eq = JointDist::from_matrix("X", "Y", &[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        assert!((eq.mutual_info(&["X"], &["Y"], &[]).unwrap() - 1.0).abs() < 1e-12);

        let d = dsbs("X", "Y", 0.1);
        let i = d.mutual_info(&["X"], &["Y"], &[]).unwrap();
        assert!((i - (1.0 - binary_entropy(0.1))).abs() < 1e-12);
        assert!((i - 0.5310044064107188).abs() < 1e-12);
    }

    #[test]
    fn mutual_info_overlap_rejected() {
        let d = uniform_bits(&["X", "Y"]);
        assert!(matches!(
            d.mutual_info(&["X"], &["X"], &[]),
            Err(DistError::OverlappingSets(_))
        ));
    }

    #[test]
    fn stat_distance_basics() {
        let d = uniform_bits(&["X"]);
        assert_eq!(d.stat_distance(&d).unwrap(), 0.0);

        let a = JointDist::new(vec![("X".into(), Alphabet::binary())], vec![1.0, 0.0]).unwrap();
        let b = JointDist::new(vec![("X".into(), Alphabet::binary())], vec![0.0, 1.0]).unwrap();
        assert_eq!(a.stat_distance(&b).unwrap(), 1.0);

        let c = JointDist::new(vec![("X".into(), Alphabet::binary())], vec![0.9, 0.1]).unwrap();
        assert!((d.stat_distance(&c).unwrap() - 0.4).abs() < 1e-15);

        let other = uniform_bits(&["Y"]);
        assert!(matches!(
            d.stat_distance(&other),
            Err(DistError::SignatureMismatch(_))
        ));
    }

    #[test]
    fn product_entropies_add() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mut rows = vec![vec![0.0; 3]; 3];
            let mut total = 0.0;
            for r in rows.iter_mut() {
                for v in r.iter_mut() {
                    *v = rng.gen_range(0.0..1.0);
                    total += *v;
                }
            }
            for r in rows.iter_mut() {
                for v in r.iter_mut() {
                    *v /= total;
                }
            }
            // nudge the last entry so the mass is exactly 1 after rounding
            let s: f64 = rows.iter().flatten().sum();
            *rows.last_mut().unwrap().last_mut().unwrap() += 1.0 - s;
            let d1 = JointDist::from_matrix("A", "B", &rows).unwrap();
            let d2 = dsbs("C", "D", 0.2);
            let p = d1.product(&d2).unwrap();
            let h1 = d1.entropy(&["A", "B"], &[]).unwrap();
            let h2 = d2.entropy(&["C", "D"], &[]).unwrap();
            let h = p.entropy(&["A", "B", "C", "D"], &[]).unwrap();
            assert!((h - h1 - h2).abs() < 1e-12);
        }
    }

    #[test]
    fn product_point_mass_identity() {
        let d = dsbs("A", "B", 0.3);
        let point = JointDist::new(vec![("P".into(), Alphabet::of_size(1))], vec![1.0]).unwrap();
        let p = d.product(&point).unwrap();
        assert_eq!(p.marginalize(&["A", "B"]).unwrap().probs(), d.probs());
        assert!(matches!(d.product(&d), Err(DistError::NameClash(_))));
    }

    #[test]
    fn chain_rule_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let n = 12;
            let mut probs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let total: f64 = probs.iter().sum();
            for p in probs.iter_mut() {
                *p /= total;
            }
            let s: f64 = probs.iter().sum();
            probs[0] += 1.0 - s;
            let d = JointDist::new(
                vec![
                    ("A".into(), Alphabet::of_size(3)),
                    ("B".into(), Alphabet::of_size(4)),
                ],
                probs,
            )
            .unwrap();
            let h_ab = d.entropy(&["A", "B"], &[]).unwrap();
            let h_a = d.entropy(&["A"], &[]).unwrap();
            let h_b_a = d.entropy(&["B"], &["A"]).unwrap();
            assert!((h_ab - h_a - h_b_a).abs() < 1e-10);
            // I(A;B) = H(A) - H(A|B)
            let i = d.mutual_info(&["A"], &["B"], &[]).unwrap();
            let alt = d.entropy(&["A"], &[]).unwrap() - d.entropy(&["A"], &["B"]).unwrap();
            assert!((i - alt).abs() < 1e-10);
        }
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(matches!(
            JointDist::new(vec![("X".into(), Alphabet::binary())], vec![0.6, 0.6]),
            Err(DistError::InvalidMass(_))
        ));
        assert!(matches!(
            JointDist::new(vec![("X".into(), Alphabet::binary())], vec![-0.1, 1.1]),
            Err(DistError::NegativeEntry { .. })
        ));
        assert!(Alphabet::new(Vec::<String>::new()).is_err());
        assert!(Alphabet::new(vec!["a", "a"]).is_err());
    }

    #[test]
    fn group_composites() {
        let d = uniform_bits(&["X", "Y", "Z"]);
        let g = d.group2("XY", &["X", "Y"], "Zv", &["Z"]).unwrap();
        assert_eq!(g.alphabet("XY").unwrap().len(), 4);
        assert_eq!(g.alphabet("XY").unwrap().symbol(1), "0,1");
        assert!((g.entropy(&["XY"], &[]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn conditional_roundtrip() {
        let d = dsbs("X", "Y", 0.1);
        let ch = d.conditional("Y", &["X"]).unwrap();
        assert!((ch.rows[0][0] - 0.9).abs() < 1e-12);
        assert!((ch.rows[0][1] - 0.1).abs() < 1e-12);
        let dx = d.marginalize(&["X"]).unwrap();
        let back = dx.attach_channel(&ch).unwrap();
        assert!(back.stat_distance(&d).unwrap() < 1e-12);
    }

    #[test]
    fn json_roundtrip_and_path_errors() {
        let d = dsbs("X", "Y", 0.25);
        let s = d.to_json_string();
        let back = JointDist::from_json_str(&s).unwrap();
        assert_eq!(back, d);

        let bad = r#"{"variables":[{"name":"X","symbols":["0","1"]}],"probs":[0.5,"x"]}"#;
        match JointDist::from_json_str(bad) {
            Err(DistError::Parse { path, .. }) => assert_eq!(path, "probs[1]"),
            other => panic!("expected parse error, got {other:?}"),
        }

        let ch = Channel::deterministic(vec!["X".into()], "Q", Alphabet::binary(), &[1, 0]);
        let back = Channel::from_json_str(&ch.to_json_string()).unwrap();
        assert_eq!(back, ch);
    }
}
