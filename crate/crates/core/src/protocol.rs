//! Two-party bit-protocol trees evaluated exactly on finite input
//! distributions: transcript joints, information/communication cost pairs,
//! and output error against a target boolean function.
//!
//! Messages are single bits; variable-length transcripts are realized by
//! leaves at different depths. Private randomness lives in the per-node
//! next-bit distributions. No public coins.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disc::BoolFn;
use crate::dist::{Alphabet, Channel, DistError, JointDist};
use crate::report::BoundReport;

/// Exact path enumeration is refused beyond this depth.
pub const MAX_DEPTH: usize = 16;
/// ... and beyond this per-party input alphabet size.
pub const MAX_INPUT: usize = 8;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("protocol depth {0} exceeds the exact-enumeration limit {MAX_DEPTH}")]
    TooDeep(usize),
    #[error("input alphabet {0}x{1} exceeds the {MAX_INPUT}x{MAX_INPUT} exact-enumeration limit")]
    InputsTooLarge(usize, usize),
    #[error("distribution must be over exactly two variables, got {0}")]
    NotBivariate(usize),
    #[error("input alphabets do not match the protocol: {0}")]
    AlphabetMismatch(String),
    #[error("next-bit probability {value} out of [0,1] (node at path `{path}`)")]
    BadProbability { path: String, value: f64 },
    #[error("node at path `{path}`: {msg}")]
    BadNode { path: String, msg: String },
    #[error("variable `{0}` already present in the input distribution")]
    NameClash(String),
    #[error("outputs must be single bits over symbols 0/1 for error analysis, got {0:?}")]
    NotBitOutput(Vec<String>),
    #[error(transparent)]
    Dist(#[from] DistError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    #[serde(rename = "1")]
    P1,
    #[serde(rename = "2")]
    P2,
}

#[derive(Debug, Clone)]
pub enum Node {
    /// `p_one[s]` = Pr[next bit = 1] given the owner's input symbol `s`;
    /// children\[bit\] continues the protocol.
    Internal {
        owner: Party,
        p_one: Vec<f64>,
        children: Box<[Node; 2]>,
    },
    /// `out1[x]` / `out2[y]` are output symbol indices for each party.
    Leaf { out1: Vec<usize>, out2: Vec<usize> },
}

#[derive(Debug, Clone)]
pub struct ProtocolTree {
    pub x_alphabet: Alphabet,
    pub y_alphabet: Alphabet,
    pub out_alphabet: Alphabet,
    pub root: Node,
}

/// Per-direction cost pair, in expected bits (communication) or bits of
/// conditional mutual information (information).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostPair {
    pub c12: f64,
    pub c21: f64,
    pub kind: CostKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Information,
    Communication,
}

struct Path {
    transcript: String,
    bits_p1: usize,
    bits_p2: usize,
    /// Pr[path | x] contributed by party-1 nodes (depends on x only)
    weight_x: Vec<f64>,
    /// Pr[path | y] contributed by party-2 nodes
    weight_y: Vec<f64>,
    out1: Vec<usize>,
    out2: Vec<usize>,
}

impl ProtocolTree {
    pub fn depth(&self) -> usize {
        fn d(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Internal { children, .. } => 1 + d(&children[0]).max(d(&children[1])),
            }
        }
        d(&self.root)
    }

    pub fn n_leaves(&self) -> usize {
        fn c(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 1,
                Node::Internal { children, .. } => c(&children[0]) + c(&children[1]),
            }
        }
        c(&self.root)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let nx = self.x_alphabet.len();
        let ny = self.y_alphabet.len();
        if nx > MAX_INPUT || ny > MAX_INPUT {
            return Err(ProtocolError::InputsTooLarge(nx, ny));
        }
        if self.depth() > MAX_DEPTH {
            return Err(ProtocolError::TooDeep(self.depth()));
        }
        let n_out = self.out_alphabet.len();
        fn walk(
            n: &Node,
            path: &mut String,
            nx: usize,
            ny: usize,
            n_out: usize,
        ) -> Result<(), ProtocolError> {
            match n {
                Node::Internal { owner, p_one, children } => {
                    let expected = if *owner == Party::P1 { nx } else { ny };
                    if p_one.len() != expected {
                        return Err(ProtocolError::BadNode {
                            path: path.clone(),
                            msg: format!("owner needs {expected} next-bit entries, found {}", p_one.len()),
                        });
                    }
                    for &p in p_one {
                        if !(0.0..=1.0).contains(&p) {
                            return Err(ProtocolError::BadProbability { path: path.clone(), value: p });
                        }
                    }
                    for bit in 0..2 {
                        path.push(if bit == 1 { '1' } else { '0' });
                        walk(&children[bit], path, nx, ny, n_out)?;
                        path.pop();
                    }
                    Ok(())
                }
                Node::Leaf { out1, out2 } => {
                    if out1.len() != nx || out2.len() != ny {
                        return Err(ProtocolError::BadNode {
                            path: path.clone(),
                            msg: format!(
                                "leaf output maps need {nx}/{ny} entries, found {}/{}",
                                out1.len(),
                                out2.len()
                            ),
                        });
                    }
                    for &o in out1.iter().chain(out2.iter()) {
                        if o >= n_out {
                            return Err(ProtocolError::BadNode {
                                path: path.clone(),
                                msg: format!("output index {o} outside the output alphabet"),
                            });
                        }
                    }
                    Ok(())
                }
            }
        }
        walk(&self.root, &mut String::new(), nx, ny, n_out)
    }

    fn paths(&self) -> Vec<Path> {
        let nx = self.x_alphabet.len();
        let ny = self.y_alphabet.len();
        let mut out = Vec::with_capacity(self.n_leaves());
        fn walk(
            n: &Node,
            transcript: String,
            bits_p1: usize,
            bits_p2: usize,
            wx: Vec<f64>,
            wy: Vec<f64>,
            out: &mut Vec<Path>,
        ) {
            match n {
                Node::Leaf { out1, out2 } => out.push(Path {
                    transcript,
                    bits_p1,
                    bits_p2,
                    weight_x: wx,
                    weight_y: wy,
                    out1: out1.clone(),
                    out2: out2.clone(),
                }),
                Node::Internal { owner, p_one, children } => {
                    for bit in 0..2 {
                        let mut wx = wx.clone();
                        let mut wy = wy.clone();
                        match owner {
                            Party::P1 => {
                                for (w, &p) in wx.iter_mut().zip(p_one) {
                                    *w *= if bit == 1 { p } else { 1.0 - p };
                                }
                            }
                            Party::P2 => {
                                for (w, &p) in wy.iter_mut().zip(p_one) {
                                    *w *= if bit == 1 { p } else { 1.0 - p };
                                }
                            }
                        }
                        let mut t = transcript.clone();
                        t.push(if bit == 1 { '1' } else { '0' });
                        walk(
                            &children[bit],
                            t,
                            bits_p1 + usize::from(*owner == Party::P1),
                            bits_p2 + usize::from(*owner == Party::P2),
                            wx,
                            wy,
                            out,
                        );
                    }
                }
            }
        }
        walk(
            &self.root,
            String::new(),
            0,
            0,
            vec![1.0; nx],
            vec![1.0; ny],
            &mut out,
        );
        out
    }

    fn check_inputs(&self, d: &JointDist) -> Result<(String, String), ProtocolError> {
        if d.n_vars() != 2 {
            return Err(ProtocolError::NotBivariate(d.n_vars()));
        }
        let (xn, xa) = (&d.vars()[0].0, &d.vars()[0].1);
        let (yn, ya) = (&d.vars()[1].0, &d.vars()[1].1);
        if xa != &self.x_alphabet || ya != &self.y_alphabet {
            return Err(ProtocolError::AlphabetMismatch(format!(
                "distribution ({:?}, {:?}) vs protocol ({:?}, {:?})",
                xa.symbols(),
                ya.symbols(),
                self.x_alphabet.symbols(),
                self.y_alphabet.symbols()
            )));
        }
        for reserved in ["M", "A", "B"] {
            if xn == reserved || yn == reserved {
                return Err(ProtocolError::NameClash(reserved.to_string()));
            }
        }
        Ok((xn.clone(), yn.clone()))
    }

    /// Exact joint distribution over `(X, Y, M, A, B)` by path enumeration;
    /// the transcript alphabet is the leaf set (empty transcript = `e`).
    pub fn run(&self, d: &JointDist) -> Result<JointDist, ProtocolError> {
        self.validate()?;
        let (xn, yn) = self.check_inputs(d)?;
        let paths = self.paths();
        let nx = self.x_alphabet.len();
        let ny = self.y_alphabet.len();
        let nm = paths.len();
        let no = self.out_alphabet.len();
        let m_alphabet = Alphabet::new(paths.iter().map(|p| {
            if p.transcript.is_empty() { "e".to_string() } else { p.transcript.clone() }
        }))
        .expect("leaf transcripts are distinct");
        let mut probs = vec![0.0; nx * ny * nm * no * no];
        let dp = d.probs();
        for (m, path) in paths.iter().enumerate() {
            for x in 0..nx {
                for y in 0..ny {
                    let p = dp[x * ny + y] * path.weight_x[x] * path.weight_y[y];
                    let a = path.out1[x];
                    let b = path.out2[y];
                    probs[(((x * ny + y) * nm + m) * no + a) * no + b] += p;
                }
            }
        }
        let vars = vec![
            (xn, self.x_alphabet.clone()),
            (yn, self.y_alphabet.clone()),
            ("M".to_string(), m_alphabet),
            ("A".to_string(), self.out_alphabet.clone()),
            ("B".to_string(), self.out_alphabet.clone()),
        ];
        Ok(JointDist::new(vars, probs)?)
    }

    /// Expected bits sent in each direction, weighted by path probability.
    pub fn comm_costs(&self, d: &JointDist) -> Result<CostPair, ProtocolError> {
        self.validate()?;
        self.check_inputs(d)?;
        let paths = self.paths();
        let ny = self.y_alphabet.len();
        let dp = d.probs();
        let mut c12 = 0.0;
        let mut c21 = 0.0;
        for path in &paths {
            let mut pr = 0.0;
            for x in 0..self.x_alphabet.len() {
                for y in 0..ny {
                    pr += dp[x * ny + y] * path.weight_x[x] * path.weight_y[y];
                }
            }
            c12 += pr * path.bits_p1 as f64;
            c21 += pr * path.bits_p2 as f64;
        }
        Ok(CostPair { c12, c21, kind: CostKind::Communication })
    }

    /// The transcript as a channel `p(M | X, Y)`, for use as an auxiliary
    /// variable witness.
    pub fn transcript_channel(&self, d: &JointDist) -> Result<Channel, ProtocolError> {
        self.validate()?;
        let (xn, yn) = self.check_inputs(d)?;
        let paths = self.paths();
        let labels: Vec<String> = paths
            .iter()
            .map(|p| if p.transcript.is_empty() { "e".to_string() } else { p.transcript.clone() })
            .collect();
        let nx = self.x_alphabet.len();
        let ny = self.y_alphabet.len();
        let mut rows = vec![vec![0.0; paths.len()]; nx * ny];
        for x in 0..nx {
            for y in 0..ny {
                for (m, path) in paths.iter().enumerate() {
                    rows[x * ny + y][m] = path.weight_x[x] * path.weight_y[y];
                }
            }
        }
        Ok(Channel::new(vec![xn, yn], "M", Alphabet::new(labels)?, rows)?)
    }

    /// One-line-per-node rendering for the CLI.
    pub fn pretty(&self) -> String {
        fn walk(n: &Node, tree: &ProtocolTree, indent: usize, label: &str, out: &mut String) {
            let pad = "  ".repeat(indent);
            match n {
                Node::Internal { owner, p_one, children } => {
                    let who = match owner {
                        Party::P1 => "party 1",
                        Party::P2 => "party 2",
                    };
                    let alpha = match owner {
                        Party::P1 => &tree.x_alphabet,
                        Party::P2 => &tree.y_alphabet,
                    };
                    let probs: Vec<String> = p_one
                        .iter()
                        .enumerate()
                        .map(|(s, p)| format!("{}→{}", alpha.symbol(s), p))
                        .collect();
                    out.push_str(&format!("{pad}{label} {who} sends 1 w.p. {{{}}}\n", probs.join(", ")));
                    walk(&children[0], tree, indent + 1, "0:", out);
                    walk(&children[1], tree, indent + 1, "1:", out);
                }
                Node::Leaf { out1, out2 } => {
                    let fmt = |m: &[usize], a: &Alphabet| {
                        m.iter()
                            .enumerate()
                            .map(|(s, &o)| format!("{}→{}", a.symbol(s), tree.out_alphabet.symbol(o)))
                            .collect::<Vec<_>>()
                            .join(", ")
                    };
                    out.push_str(&format!(
                        "{pad}{label} leaf out1{{{}}} out2{{{}}}\n",
                        fmt(out1, &tree.x_alphabet),
                        fmt(out2, &tree.y_alphabet)
                    ));
                }
            }
        }
        let mut s = String::new();
        walk(&self.root, self, 0, "root:", &mut s);
        s
    }
}

/// `(I(X;M|Y), I(Y;M|X))` from a joint produced by [`ProtocolTree::run`].
pub fn info_costs(joint: &JointDist, x: &str, y: &str) -> Result<CostPair, ProtocolError> {
    let c12 = joint.mutual_info(&[x], &["M"], &[y])?;
    let c21 = joint.mutual_info(&[y], &["M"], &[x])?;
    Ok(CostPair { c12, c21, kind: CostKind::Information })
}

/// Output error of a protocol joint against a boolean target.
#[derive(Debug, Clone, Serialize)]
pub struct OutputError {
    /// Statistical distance between `p_{ZXY}` and `p_{f(X,Y)XY}` (for
    /// symmetric outputs `Z = A = B`).
    pub stat_distance: f64,
    /// `Pr[Z != f(X,Y)]`.
    pub pr_wrong: f64,
    /// Set when the two parties' outputs disagree with positive probability;
    /// the pair is the per-party analysis `(for A, for B)`.
    pub per_party: Option<(f64, f64)>,
}

pub fn output_error(joint: &JointDist, x: &str, y: &str, f: &BoolFn) -> Result<OutputError, ProtocolError> {
    let out_a = joint.alphabet("A")?.clone();
    if out_a.symbols() != ["0", "1"] {
        return Err(ProtocolError::NotBitOutput(out_a.symbols().to_vec()));
    }
    let dxy = joint.marginalize(&[x, y])?;
    let one_party = |var: &str| -> Result<(f64, f64), ProtocolError> {
        let m = joint.marginalize(&[x, y, var])?;
        let nx = f.n_rows();
        let ny = f.n_cols();
        let mut sd = 0.0;
        let mut wrong = 0.0;
        for xi in 0..nx {
            for yi in 0..ny {
                for z in 0..2usize {
                    let p = m.prob(&[xi, yi, z]);
                    let target = if f.value(xi, yi) as usize == z {
                        dxy.prob(&[xi, yi])
                    } else {
                        0.0
                    };
                    sd += (p - target).abs();
                    if f.value(xi, yi) as usize != z {
                        wrong += p;
                    }
                }
            }
        }
        Ok((0.5 * sd, wrong))
    };
    // do the parties ever disagree?
    let ab = joint.marginalize(&["A", "B"])?;
    let mut disagree = 0.0;
    for a in 0..2usize {
        for b in 0..2usize {
            if a != b {
                disagree += ab.prob(&[a, b]);
            }
        }
    }
    let (sd_a, wrong_a) = one_party("A")?;
    if disagree > 0.0 {
        let (sd_b, _) = one_party("B")?;
        return Ok(OutputError {
            stat_distance: sd_a.max(sd_b),
            pr_wrong: wrong_a,
            per_party: Some((sd_a, sd_b)),
        });
    }
    Ok(OutputError { stat_distance: sd_a, pr_wrong: wrong_a, per_party: None })
}

/// Checks the per-direction information/communication inequality
/// `IC <= CC` coordinatewise within 1e-9.
pub fn check_ic_cc(p: &ProtocolTree, d: &JointDist) -> Result<BoundReport, ProtocolError> {
    let joint = p.run(d)?;
    let (xn, yn) = (d.vars()[0].0.clone(), d.vars()[1].0.clone());
    let ic = info_costs(&joint, &xn, &yn)?;
    let cc = p.comm_costs(d)?;
    let slack = (cc.c12 - ic.c12).min(cc.c21 - ic.c21);
    Ok(BoundReport::check(
        "ic-cc",
        &format!(
            "ic=({}, {}) cc=({}, {})",
            ic.c12, ic.c21, cc.c12, cc.c21
        ),
        slack,
        0.0,
        1e-9,
    ))
}

// ---------------------------------------------------------------------------
// Generation and handy fixed protocols
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RandomProtocolCfg {
    pub max_depth: usize,
    pub leaf_prob: f64,
    pub n_x: usize,
    pub n_y: usize,
    pub n_out: usize,
    /// Force `out1 == out2 ==` a per-leaf constant (common-output protocols).
    pub common_output: bool,
}

impl Default for RandomProtocolCfg {
    fn default() -> Self {
        RandomProtocolCfg {
            max_depth: 4,
            leaf_prob: 0.25,
            n_x: 2,
            n_y: 2,
            n_out: 2,
            common_output: false,
        }
    }
}

/// Random protocol: owners biased toward alternation, next-bit probabilities
/// drawn from the `{0, 1, 0.5, uniform}` mixture so deterministic and
/// randomized branches both occur.
pub fn random_protocol(cfg: &RandomProtocolCfg, rng: &mut impl Rng) -> ProtocolTree {
    fn gen_node(
        cfg: &RandomProtocolCfg,
        rng: &mut impl Rng,
        depth: usize,
        parent: Option<Party>,
    ) -> Node {
        let make_leaf = depth >= cfg.max_depth || (depth > 0 && rng.gen_bool(cfg.leaf_prob));
        if make_leaf {
            if cfg.common_output {
                let o = rng.gen_range(0..cfg.n_out);
                Node::Leaf { out1: vec![o; cfg.n_x], out2: vec![o; cfg.n_y] }
            } else {
                Node::Leaf {
                    out1: (0..cfg.n_x).map(|_| rng.gen_range(0..cfg.n_out)).collect(),
                    out2: (0..cfg.n_y).map(|_| rng.gen_range(0..cfg.n_out)).collect(),
                }
            }
        } else {
            let owner = match parent {
                None => {
                    if rng.gen_bool(0.5) {
                        Party::P1
                    } else {
                        Party::P2
                    }
                }
                Some(p) => {
                    let flip = rng.gen_bool(0.75);
                    match (p, flip) {
                        (Party::P1, true) | (Party::P2, false) => Party::P2,
                        _ => Party::P1,
                    }
                }
            };
            let n_sym = if owner == Party::P1 { cfg.n_x } else { cfg.n_y };
            let p_one = (0..n_sym)
                .map(|_| match rng.gen_range(0..4) {
                    0 => 0.0,
                    1 => 1.0,
                    2 => 0.5,
                    _ => rng.gen_range(0.0..1.0),
                })
                .collect();
            let children = Box::new([
                gen_node(cfg, rng, depth + 1, Some(owner)),
                gen_node(cfg, rng, depth + 1, Some(owner)),
            ]);
            Node::Internal { owner, p_one, children }
        }
    }
    ProtocolTree {
        x_alphabet: Alphabet::of_size(cfg.n_x),
        y_alphabet: Alphabet::of_size(cfg.n_y),
        out_alphabet: Alphabet::of_size(cfg.n_out),
        root: gen_node(cfg, rng, 0, None),
    }
}

fn const_leaf(nx: usize, ny: usize, out: usize) -> Node {
    Node::Leaf { out1: vec![out; nx], out2: vec![out; ny] }
}

/// Party 1 announces its bit; both output a constant.
pub fn send_x_protocol() -> ProtocolTree {
    ProtocolTree {
        x_alphabet: Alphabet::binary(),
        y_alphabet: Alphabet::binary(),
        out_alphabet: Alphabet::binary(),
        root: Node::Internal {
            owner: Party::P1,
            p_one: vec![0.0, 1.0],
            children: Box::new([const_leaf(2, 2, 0), const_leaf(2, 2, 0)]),
        },
    }
}

/// Depth-2 AND protocol: party 1 sends `x`; party 2 replies `y` if `x = 1`
/// and `0` otherwise; both output the AND of the transcript bits.
pub fn and_protocol() -> ProtocolTree {
    let reply = |p_one: Vec<f64>, out0: usize, out1: usize| Node::Internal {
        owner: Party::P2,
        p_one,
        children: Box::new([const_leaf(2, 2, out0), const_leaf(2, 2, out1)]),
    };
    ProtocolTree {
        x_alphabet: Alphabet::binary(),
        y_alphabet: Alphabet::binary(),
        out_alphabet: Alphabet::binary(),
        root: Node::Internal {
            owner: Party::P1,
            p_one: vec![0.0, 1.0],
            children: Box::new([
                reply(vec![0.0, 0.0], 0, 0),
                reply(vec![0.0, 1.0], 0, 1),
            ]),
        },
    }
}

/// Both parties announce their bits; both output the XOR.
pub fn xor_protocol() -> ProtocolTree {
    let leaf = |v: usize| const_leaf(2, 2, v);
    let second = |x_bit: usize| Node::Internal {
        owner: Party::P2,
        p_one: vec![0.0, 1.0],
        children: Box::new([leaf(x_bit), leaf(1 - x_bit)]),
    };
    ProtocolTree {
        x_alphabet: Alphabet::binary(),
        y_alphabet: Alphabet::binary(),
        out_alphabet: Alphabet::binary(),
        root: Node::Internal {
            owner: Party::P1,
            p_one: vec![0.0, 1.0],
            children: Box::new([second(0), second(1)]),
        },
    }
}

/// Exact protocol for a full boolean function: party 1 announces its input
/// symbol bit by bit, party 2 replies with `f(x, y)`; both output the reply.
pub fn eval_protocol(f: &BoolFn) -> ProtocolTree {
    let nx = f.n_rows();
    let ny = f.n_cols();
    let x_bits = (usize::BITS - (nx - 1).leading_zeros()).max(1) as usize;
    fn build(f: &BoolFn, nx: usize, ny: usize, x_bits: usize, level: usize, prefix: usize) -> Node {
        if level == x_bits {
            let x = prefix.min(nx - 1);
            let reply: Vec<f64> = (0..ny).map(|y| f.value(x, y) as f64).collect();
            Node::Internal {
                owner: Party::P2,
                p_one: reply,
                children: Box::new([const_leaf(nx, ny, 0), const_leaf(nx, ny, 1)]),
            }
        } else {
            let p_one = (0..nx)
                .map(|x| if x >> (x_bits - 1 - level) & 1 == 1 { 1.0 } else { 0.0 })
                .collect();
            Node::Internal {
                owner: Party::P1,
                p_one,
                children: Box::new([
                    build(f, nx, ny, x_bits, level + 1, prefix << 1),
                    build(f, nx, ny, x_bits, level + 1, (prefix << 1) | 1),
                ]),
            }
        }
    }
    ProtocolTree {
        x_alphabet: f.row_alphabet().clone(),
        y_alphabet: f.col_alphabet().clone(),
        out_alphabet: Alphabet::binary(),
        root: build(f, nx, ny, x_bits, 0, 0),
    }
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NodeFile {
    Internal {
        owner: u8,
        p1: BTreeMap<String, f64>,
        children: Vec<NodeFile>,
    },
    Leaf {
        out1: BTreeMap<String, String>,
        out2: BTreeMap<String, String>,
    },
}

#[derive(Serialize, Deserialize)]
struct TreeFile {
    x_symbols: Vec<String>,
    y_symbols: Vec<String>,
    out_symbols: Vec<String>,
    tree: NodeFile,
}

impl ProtocolTree {
    pub fn from_json_str(s: &str) -> Result<ProtocolTree, ProtocolError> {
        let f: TreeFile = serde_json::from_str(s).map_err(|e| ProtocolError::BadNode {
            path: "<root>".into(),
            msg: e.to_string(),
        })?;
        let x = Alphabet::new(f.x_symbols)?;
        let y = Alphabet::new(f.y_symbols)?;
        let out = Alphabet::new(f.out_symbols)?;
        fn conv(
            n: &NodeFile,
            x: &Alphabet,
            y: &Alphabet,
            out: &Alphabet,
            path: &mut String,
        ) -> Result<Node, ProtocolError> {
            match n {
                NodeFile::Internal { owner, p1, children } => {
                    let owner = match owner {
                        1 => Party::P1,
                        2 => Party::P2,
                        o => {
                            return Err(ProtocolError::BadNode {
                                path: path.clone(),
                                msg: format!("owner must be 1 or 2, found {o}"),
                            })
                        }
                    };
                    if children.len() != 2 {
                        return Err(ProtocolError::BadNode {
                            path: path.clone(),
                            msg: format!("expected 2 children, found {}", children.len()),
                        });
                    }
                    let alpha = if owner == Party::P1 { x } else { y };
                    let mut p_one = vec![0.0; alpha.len()];
                    for (sym, &p) in p1 {
                        let i = alpha.index_of(sym).ok_or_else(|| ProtocolError::BadNode {
                            path: path.clone(),
                            msg: format!("unknown input symbol `{sym}` in p1"),
                        })?;
                        p_one[i] = p;
                    }
                    if p1.len() != alpha.len() {
                        return Err(ProtocolError::BadNode {
                            path: path.clone(),
                            msg: format!("p1 must map all {} owner symbols", alpha.len()),
                        });
                    }
                    let mut kids = Vec::with_capacity(2);
                    for (bit, c) in children.iter().enumerate() {
                        path.push(if bit == 1 { '1' } else { '0' });
                        kids.push(conv(c, x, y, out, path)?);
                        path.pop();
                    }
                    let k1 = kids.pop().expect("two children");
                    let k0 = kids.pop().expect("two children");
                    Ok(Node::Internal { owner, p_one, children: Box::new([k0, k1]) })
                }
                NodeFile::Leaf { out1, out2 } => {
                    let map = |m: &BTreeMap<String, String>,
                               alpha: &Alphabet,
                               path: &String|
                     -> Result<Vec<usize>, ProtocolError> {
                        let mut v = vec![usize::MAX; alpha.len()];
                        for (sym, o) in m {
                            let i = alpha.index_of(sym).ok_or_else(|| ProtocolError::BadNode {
                                path: path.clone(),
                                msg: format!("unknown input symbol `{sym}` in output map"),
                            })?;
                            v[i] = out.index_of(o).ok_or_else(|| ProtocolError::BadNode {
                                path: path.clone(),
                                msg: format!("unknown output symbol `{o}`"),
                            })?;
                        }
                        if v.contains(&usize::MAX) {
                            return Err(ProtocolError::BadNode {
                                path: path.clone(),
                                msg: "output map must cover every input symbol".into(),
                            });
                        }
                        Ok(v)
                    };
                    Ok(Node::Leaf {
                        out1: map(out1, x, path)?,
                        out2: map(out2, y, path)?,
                    })
                }
            }
        }
        let root = conv(&f.tree, &x, &y, &out, &mut String::new())?;
        let tree = ProtocolTree { x_alphabet: x, y_alphabet: y, out_alphabet: out, root };
        tree.validate()?;
        Ok(tree)
    }

    pub fn to_json_string(&self) -> String {
        fn conv(n: &Node, tree: &ProtocolTree) -> NodeFile {
            match n {
                Node::Internal { owner, p_one, children } => {
                    let alpha = if *owner == Party::P1 { &tree.x_alphabet } else { &tree.y_alphabet };
                    NodeFile::Internal {
                        owner: if *owner == Party::P1 { 1 } else { 2 },
                        p1: p_one
                            .iter()
                            .enumerate()
                            .map(|(i, &p)| (alpha.symbol(i).to_string(), p))
                            .collect(),
                        children: vec![conv(&children[0], tree), conv(&children[1], tree)],
                    }
                }
                Node::Leaf { out1, out2 } => {
                    let map = |v: &[usize], alpha: &Alphabet| {
                        v.iter()
                            .enumerate()
                            .map(|(i, &o)| {
                                (alpha.symbol(i).to_string(), tree.out_alphabet.symbol(o).to_string())
                            })
                            .collect()
                    };
                    NodeFile::Leaf {
                        out1: map(out1, &tree.x_alphabet),
                        out2: map(out2, &tree.y_alphabet),
                    }
                }
            }
        }
        serde_json::to_string_pretty(&TreeFile {
            x_symbols: self.x_alphabet.symbols().to_vec(),
            y_symbols: self.y_alphabet.symbols().to_vec(),
            out_symbols: self.out_alphabet.symbols().to_vec(),
            tree: conv(&self.root, self),
        })
        .expect("serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::dsbs;

    fn uniform_xy() -> JointDist {
        JointDist::uniform(vec![
            ("X".into(), Alphabet::binary()),
            ("Y".into(), Alphabet::binary()),
        ])
        .unwrap()
    }

    #[test]
    fn depth_zero_tree() {
        let p = ProtocolTree {
            x_alphabet: Alphabet::binary(),
            y_alphabet: Alphabet::binary(),
            out_alphabet: Alphabet::binary(),
            root: const_leaf(2, 2, 0),
        };
        let joint = p.run(&uniform_xy()).unwrap();
        assert_eq!(joint.alphabet("M").unwrap().symbols(), ["e"]);
        assert_eq!(joint.entropy(&["M"], &[]).unwrap(), 0.0);
        assert_eq!(joint.entropy(&["A", "B"], &[]).unwrap(), 0.0);
        let cc = p.comm_costs(&uniform_xy()).unwrap();
        assert_eq!((cc.c12, cc.c21), (0.0, 0.0));
    }

    #[test]
    fn send_x_copies_input() {
        let p = send_x_protocol();
        let d = uniform_xy();
        let joint = p.run(&d).unwrap();
        // M = X exactly
        assert_eq!(joint.entropy(&["M"], &["X"]).unwrap(), 0.0);
        assert_eq!(joint.entropy(&["X"], &["M"]).unwrap(), 0.0);
        let ic = info_costs(&joint, "X", "Y").unwrap();
        assert!((ic.c12 - 1.0).abs() < 1e-12);
        assert_eq!(ic.c21, 0.0);
        let cc = p.comm_costs(&d).unwrap();
        assert_eq!((cc.c12, cc.c21), (1.0, 0.0));
    }

    #[test]
    fn send_x_equal_inputs_strictness() {
        // X = Y: the bit is already known, IC12 = 0 < CC12 = 1 exactly
        let d = dsbs("X", "Y", 0.0);
        let p = send_x_protocol();
        let joint = p.run(&d).unwrap();
        let ic = info_costs(&joint, "X", "Y").unwrap();
        assert_eq!((ic.c12, ic.c21), (0.0, 0.0));
        let cc = p.comm_costs(&d).unwrap();
        assert_eq!((cc.c12, cc.c21), (1.0, 0.0));
        let report = check_ic_cc(&p, &d).unwrap();
        assert!(report.passed());
    }

    #[test]
    fn and_protocol_costs_by_hand() {
        let p = and_protocol();
        let d = uniform_xy();
        let joint = p.run(&d).unwrap();
        // hand enumeration: 4 equally likely input pairs; transcripts
        // (x=0) -> "00"; (x=1,y=0) -> "10"; (x=1,y=1) -> "11"
        let m = joint.alphabet("M").unwrap();
        assert_eq!(m.symbols(), ["00", "01", "10", "11"]);
        let marg = joint.marginalize(&["M"]).unwrap();
        assert_eq!(marg.probs(), &[0.5, 0.0, 0.25, 0.25]);
        let ic = info_costs(&joint, "X", "Y").unwrap();
        assert!((ic.c12 - 1.0).abs() < 1e-12);
        assert!((ic.c21 - 0.5).abs() < 1e-12);
        let cc = p.comm_costs(&d).unwrap();
        assert!((cc.c12 - 1.0).abs() < 1e-12);
        assert!((cc.c21 - 1.0).abs() < 1e-12);
        // outputs equal AND
        let err = output_error(&joint, "X", "Y", &BoolFn::and()).unwrap();
        assert_eq!(err.stat_distance, 0.0);
        assert_eq!(err.pr_wrong, 0.0);
        assert!(err.per_party.is_none());
    }

    #[test]
    fn marginal_consistency_exact_on_dyadic() {
        let d = dsbs("X", "Y", 0.25);
        for seed in 0..12u64 {
            let mut rng = crate::util::stream_rng(seed, "proto-dyadic", 0);
            let mut p = random_protocol(&RandomProtocolCfg::default(), &mut rng);
            // force dyadic next-bit probabilities
            fn dyadic(n: &mut Node) {
                if let Node::Internal { p_one, children, .. } = n {
                    for p in p_one.iter_mut() {
                        *p = (*p * 4.0).round() / 4.0;
                    }
                    dyadic(&mut children[0]);
                    dyadic(&mut children[1]);
                }
            }
            dyadic(&mut p.root);
            let joint = p.run(&d).unwrap();
            let back = joint.marginalize(&["X", "Y"]).unwrap();
            assert_eq!(back.probs(), d.probs());
        }
    }

    #[test]
    fn marginal_consistency_tight_on_random() {
        let d = dsbs("X", "Y", 0.3);
        for seed in 0..20u64 {
            let mut rng = crate::util::stream_rng(seed, "proto-rand", 0);
            let p = random_protocol(&RandomProtocolCfg::default(), &mut rng);
            let joint = p.run(&d).unwrap();
            let back = joint.marginalize(&["X", "Y"]).unwrap();
            assert!(back.stat_distance(&d).unwrap() < 1e-14);
        }
    }

    #[test]
    fn transcript_markov_on_independent_inputs() {
        let d = uniform_xy();
        for seed in 0..15u64 {
            let mut rng = crate::util::stream_rng(seed, "proto-markov", 0);
            let p = random_protocol(&RandomProtocolCfg::default(), &mut rng);
            let joint = p.run(&d).unwrap();
            let i = joint.mutual_info(&["X", "A"], &["Y", "B"], &["M"]).unwrap();
            assert!(i < 1e-10, "I((X,A);(Y,B)|M) = {i}");
        }
    }

    #[test]
    fn ic_cc_on_random_protocols() {
        let independent = uniform_xy();
        let correlated = dsbs("X", "Y", 0.2);
        for seed in 0..40u64 {
            let mut rng = crate::util::stream_rng(seed, "proto-iccc", 0);
            let p = random_protocol(&RandomProtocolCfg::default(), &mut rng);
            for d in [&independent, &correlated] {
                let r = check_ic_cc(&p, d).unwrap();
                assert!(r.passed(), "{}", r.instance);
            }
        }
    }

    #[test]
    fn output_error_flipped_and_mixed() {
        // output = 1 - AND always: statistical distance 1
        let mut p = and_protocol();
        fn flip(n: &mut Node) {
            match n {
                Node::Leaf { out1, out2 } => {
                    for o in out1.iter_mut().chain(out2.iter_mut()) {
                        *o = 1 - *o;
                    }
                }
                Node::Internal { children, .. } => {
                    flip(&mut children[0]);
                    flip(&mut children[1]);
                }
            }
        }
        flip(&mut p.root);
        let joint = p.run(&uniform_xy()).unwrap();
        let err = output_error(&joint, "X", "Y", &BoolFn::and()).unwrap();
        assert_eq!(err.stat_distance, 1.0);
        assert_eq!(err.pr_wrong, 1.0);

        // a protocol outputting a fresh coin: Pr[wrong] = 1/2 and the
        // distance to the exact-output joint is 1/2 (half-mixture)
        let coin = ProtocolTree {
            x_alphabet: Alphabet::binary(),
            y_alphabet: Alphabet::binary(),
            out_alphabet: Alphabet::binary(),
            root: Node::Internal {
                owner: Party::P1,
                p_one: vec![0.5, 0.5],
                children: Box::new([const_leaf(2, 2, 0), const_leaf(2, 2, 1)]),
            },
        };
        let joint = coin.run(&uniform_xy()).unwrap();
        let err = output_error(&joint, "X", "Y", &BoolFn::and()).unwrap();
        assert!((err.pr_wrong - 0.5).abs() < 1e-12);
        assert!((err.stat_distance - 0.5).abs() < 1e-12);
    }

    #[test]
    fn eval_protocol_is_exact() {
        let f = BoolFn::inner_product(2);
        let d = JointDist::uniform(vec![
            ("X".into(), f.row_alphabet().clone()),
            ("Y".into(), f.col_alphabet().clone()),
        ])
        .unwrap();
        let p = eval_protocol(&f);
        let joint = p.run(&d).unwrap();
        let err = output_error(&joint, "X", "Y", &f).unwrap();
        assert_eq!(err.pr_wrong, 0.0);
        let ic = info_costs(&joint, "X", "Y").unwrap();
        assert!((ic.c12 - 2.0).abs() < 1e-12);
        assert!((ic.c21 - 0.75).abs() < 1e-12);
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let p = and_protocol();
        let s = p.to_json_string();
        let back = ProtocolTree::from_json_str(&s).unwrap();
        assert_eq!(back.to_json_string(), s);
        let joint_a = p.run(&uniform_xy()).unwrap();
        let joint_b = back.run(&uniform_xy()).unwrap();
        assert_eq!(joint_a.probs(), joint_b.probs());
        assert!(ProtocolTree::from_json_str("{\"x_symbols\":[\"0\"]}").is_err());
        assert!(!p.pretty().is_empty());
    }

    #[test]
    fn size_limits_enforced() {
        let p = ProtocolTree {
            x_alphabet: Alphabet::of_size(9),
            y_alphabet: Alphabet::binary(),
            out_alphabet: Alphabet::binary(),
            root: const_leaf(9, 2, 0),
        };
        assert!(matches!(p.validate(), Err(ProtocolError::InputsTooLarge(9, 2))));
    }
}
