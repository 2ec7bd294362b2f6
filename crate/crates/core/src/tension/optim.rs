//! Projected-gradient engine for auxiliary-channel problems: alternating
//! row updates on `p(Q|A,B)` with backtracking, an escalating quadratic
//! penalty on the conditional-information constraint, and a stiff-penalty
//! polish phase that drives the final iterate onto the constraint set.

/// Fixed problem data for a two-variable base distribution.
#[derive(Debug, Clone)]
pub struct Instance {
    pub na: usize,
    pub nb: usize,
    pub nq: usize,
    pub p_ab: Vec<f64>, // na*nb, row-major
    s_a: f64,
    s_b: f64,
    s_ab: f64,
}

#[inline]
pub(crate) fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

#[inline]
fn safe_log2(x: f64) -> f64 {
    x.max(1e-300).log2()
}

/// Reusable marginal buffers, sized for one instance.
pub struct Scratch {
    m_aq: Vec<f64>,
    m_bq: Vec<f64>,
    p_q: Vec<f64>,
}

impl Instance {
    pub fn new(p_ab: Vec<f64>, na: usize, nb: usize, nq: usize) -> Self {
        assert_eq!(p_ab.len(), na * nb);
        let mut p_a = vec![0.0; na];
        let mut p_b = vec![0.0; nb];
        for a in 0..na {
            for b in 0..nb {
                p_a[a] += p_ab[a * nb + b];
                p_b[b] += p_ab[a * nb + b];
            }
        }
        let s_a = p_a.iter().copied().map(plogp).sum();
        let s_b = p_b.iter().copied().map(plogp).sum();
        let s_ab = p_ab.iter().copied().map(plogp).sum();
        Instance { na, nb, nq, p_ab, s_a, s_b, s_ab }
    }

    pub fn rows(&self) -> usize {
        self.na * self.nb
    }

    /// `I(A;B)` of the base distribution, in bits.
    pub fn base_mi(&self) -> f64 {
        (self.s_ab - self.s_a - self.s_b).max(0.0)
    }

    pub fn make_scratch(&self) -> Scratch {
        Scratch {
            m_aq: vec![0.0; self.na * self.nq],
            m_bq: vec![0.0; self.nb * self.nq],
            p_q: vec![0.0; self.nq],
        }
    }

    fn marginals_into(&self, ch: &[f64], s: &mut Scratch) {
        let nq = self.nq;
        s.m_aq.iter_mut().for_each(|v| *v = 0.0);
        s.m_bq.iter_mut().for_each(|v| *v = 0.0);
        s.p_q.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..self.na {
            for b in 0..self.nb {
                let r = a * self.nb + b;
                let p = self.p_ab[r];
                if p <= 0.0 {
                    continue;
                }
                for q in 0..nq {
                    let w = p * ch[r * nq + q];
                    s.m_aq[a * nq + q] += w;
                    s.m_bq[b * nq + q] += w;
                    s.p_q[q] += w;
                }
            }
        }
    }

    /// Exact cost triple of a channel (bits):
    /// `r1 = I(B;Q|A)`, `r2 = I(A;Q|B)`, `r3 = I(A;B|Q)`, plus `I(AB;Q)`.
    pub fn evaluate(&self, ch: &[f64]) -> Eval {
        let mut s = self.make_scratch();
        self.evaluate_with(ch, &mut s)
    }

    pub fn evaluate_with(&self, ch: &[f64], s: &mut Scratch) -> Eval {
        let nq = self.nq;
        self.marginals_into(ch, s);
        let mut s_w = 0.0;
        for (r, &p) in self.p_ab.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            for q in 0..nq {
                s_w += plogp(p * ch[r * nq + q]);
            }
        }
        let s_aq: f64 = s.m_aq.iter().copied().map(plogp).sum();
        let s_bq: f64 = s.m_bq.iter().copied().map(plogp).sum();
        let s_q: f64 = s.p_q.iter().copied().map(plogp).sum();
        Eval {
            r1: s_w + self.s_a - self.s_ab - s_aq,
            r2: s_w + self.s_b - self.s_ab - s_bq,
            r3: s_w + s_q - s_aq - s_bq,
            i_abq: s_w - self.s_ab - s_q,
        }
    }

    /// Gradient of the penalized objective with respect to one row of the
    /// channel, reading marginals from the incremental state.
    #[allow(clippy::too_many_arguments)]
    fn row_gradient_state(
        &self,
        st: &MoveState,
        row: usize,
        objective: Objective,
        mu: f64,
        c_cap: f64,
        eval: &Eval,
        grad: &mut [f64],
    ) {
        let nq = self.nq;
        let a = row / self.nb;
        let b = row % self.nb;
        let p = self.p_ab[row];
        let viol = (eval.r3 - c_cap).max(0.0);
        for q in 0..nq {
            let w = p * st.ch[row * nq + q];
            let lw = safe_log2(w);
            let d1 = lw - safe_log2(st.m_aq[a * nq + q]);
            let d2 = lw - safe_log2(st.m_bq[b * nq + q]);
            let d3 = lw + safe_log2(st.p_q[q])
                - safe_log2(st.m_aq[a * nq + q])
                - safe_log2(st.m_bq[b * nq + q]);
            let dobj = match objective {
                Objective::SumConditional => d1 + d2,
                Objective::Weighted(l) => l * d1 + (1.0 - l) * d2,
                Objective::JointInfo => lw - safe_log2(p) - safe_log2(st.p_q[q]),
                Objective::Exceedance(t) => {
                    2.0 * (eval.r1 - t[0]).max(0.0) * d1
                        + 2.0 * (eval.r2 - t[1]).max(0.0) * d2
                        + 2.0 * (eval.r3 - t[2]).max(0.0) * d3
                }
            };
            grad[q] = p * (dobj + 2.0 * mu * viol * d3);
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Eval {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub i_abq: f64,
}

impl Eval {
    pub fn clamped(self) -> Eval {
        Eval {
            r1: self.r1.max(0.0),
            r2: self.r2.max(0.0),
            r3: self.r3.max(0.0),
            i_abq: self.i_abq.max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// `r1 + r2` (Wyner tension).
    SumConditional,
    /// `I(AB;Q)` (Wyner common information).
    JointInfo,
    /// `λ r1 + (1-λ) r2` (slice scalarization).
    Weighted(f64),
    /// Squared exceedance over cost targets `(t1, t2, t3)`.
    Exceedance([f64; 3]),
}

impl Objective {
    pub(crate) fn value(&self, e: &Eval) -> f64 {
        match *self {
            Objective::SumConditional => e.r1 + e.r2,
            Objective::JointInfo => e.i_abq,
            Objective::Weighted(l) => l * e.r1 + (1.0 - l) * e.r2,
            Objective::Exceedance(t) => {
                (e.r1 - t[0]).max(0.0).powi(2)
                    + (e.r2 - t[1]).max(0.0).powi(2)
                    + (e.r3 - t[2]).max(0.0).powi(2)
            }
        }
    }

    /// Whether `r3 <= c` is enforced as a constraint (the exceedance search
    /// folds all three targets into the objective instead).
    fn constrained(&self) -> bool {
        !matches!(self, Objective::Exceedance(_))
    }
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let n = v.len();
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if t < ui {
            theta = t;
        }
    }
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
        total += *x;
    }
    // guard against degenerate all-zero rows
    if total <= 0.0 {
        let n = n as f64;
        for x in v.iter_mut() {
            *x = 1.0 / n;
        }
    } else if (total - 1.0).abs() > 1e-9 {
        for x in v.iter_mut() {
            *x /= total;
        }
    }
}

pub struct SolveOptions {
    pub c_cap: f64,
    pub iters: usize,
    pub tol: f64,
    /// Run the pattern-ladder polish after gradient convergence.
    pub polish: bool,
}

pub struct Solution {
    pub channel: Vec<f64>,
    pub eval: Eval,
    pub objective: f64,
    pub violation: f64,
}

/// One optimization run from a given starting channel.
pub fn solve_from(
    inst: &Instance,
    objective: Objective,
    opts: &SolveOptions,
    init: Vec<f64>,
) -> Solution {
    let nq = inst.nq;
    let rows = inst.rows();
    debug_assert_eq!(init.len(), rows * nq);
    let mut steps = vec![0.25f64; rows];
    let mut grad = vec![0.0; nq];
    let mut trial = vec![0.0; nq];
    let constrained = objective.constrained();
    let mut mu = if constrained { 4.0 } else { 0.0 };
    let mut state = MoveState::new(inst, init);
    let penalized = |e: &Eval, mu: f64| {
        objective.value(e) + mu * (e.r3 - opts.c_cap).max(0.0).powi(2)
    };
    let mut eval = state.eval();
    let mut last_pen = penalized(&eval, mu);
    let mut stall = 0usize;
    let mut polishing = false;
    let mut iters_left = opts.iters;
    while iters_left > 0 {
        iters_left -= 1;
        for row in 0..rows {
            if inst.p_ab[row] <= 1e-300 {
                continue;
            }
            inst.row_gradient_state(&state, row, objective, mu, opts.c_cap, &eval, &mut grad);
            let base = row * nq;
            let mut step = steps[row];
            let mut accepted = false;
            let score = |st: &MoveState| penalized(&st.eval(), mu);
            for _ in 0..64 {
                for q in 0..nq {
                    trial[q] = state.ch[base + q] - step * grad[q];
                }
                project_simplex(&mut trial);
                if state.try_replace_row(row, &trial, 1e-15, &score) {
                    steps[row] = (step * 1.6).min(8.0);
                    accepted = true;
                    break;
                }
                step *= 0.5;
                if step < 1e-17 {
                    break;
                }
            }
            if accepted {
                eval = state.eval();
            } else {
                steps[row] = (steps[row] * 0.5).max(1e-17);
            }
        }
        let pen = penalized(&eval, mu);
        if last_pen - pen < opts.tol {
            stall += 1;
        } else {
            stall = 0;
        }
        last_pen = pen;
        if stall >= 2 {
            let viol = (eval.r3 - opts.c_cap).max(0.0);
            if constrained && viol > 1e-10 && mu < 1e13 {
                // keep the adapted per-row steps: backtracking absorbs the
                // larger penalty gradient within a few halvings
                mu = (mu * 32.0).min(1e13);
                stall = 0;
                last_pen = f64::INFINITY;
            } else if constrained && viol > 1e-10 && !polishing {
                // stiff-penalty polish: project onto the constraint set
                polishing = true;
                mu = 1e14;
                stall = 0;
                last_pen = f64::INFINITY;
                iters_left = iters_left.max(200);
            } else {
                break;
            }
        }
    }
    let mut ch = state.into_channel();
    let mut final_eval = inst.evaluate(&ch);
    if constrained && (final_eval.r3 - opts.c_cap).max(0.0) > 1e-9 {
        ch = ensure_feasible(inst, opts.c_cap, ch);
        final_eval = inst.evaluate(&ch);
    }
    // pattern-ladder polish per restart (a restart's outcome never depends
    // on other restarts, which keeps the min over a seed prefix monotone)
    if opts.polish && objective.value(&final_eval) > 1e-9 {
        let polished = ladder_polish(inst, objective, opts.c_cap, ch.clone());
        let pe = inst.evaluate(&polished);
        let pf = (pe.r3 - opts.c_cap).max(0.0) <= super::MARKOV_TOL;
        let of = (final_eval.r3 - opts.c_cap).max(0.0) <= super::MARKOV_TOL;
        if (pf && !of) || (pf == of && objective.value(&pe) < objective.value(&final_eval)) {
            ch = polished;
            final_eval = pe;
        }
    }
    Solution {
        objective: objective.value(&final_eval),
        violation: (final_eval.r3 - opts.c_cap).max(0.0),
        eval: final_eval,
        channel: ch,
    }
}

/// Channel state with marginals and entropy sums maintained incrementally:
/// one mass move touches two output symbols, so only a handful of
/// `p log p` terms change. Shared by the pattern-move feasibility stage and
/// the grid oracle.
pub(crate) struct MoveState<'a> {
    inst: &'a Instance,
    nq: usize,
    pub(crate) ch: Vec<f64>,
    pub(crate) m_aq: Vec<f64>,
    pub(crate) m_bq: Vec<f64>,
    pub(crate) p_q: Vec<f64>,
    s_w: f64,
    s_aq: f64,
    s_bq: f64,
    s_q: f64,
    moves_since_refresh: usize,
    // rollback buffers for whole-row replacement
    old_row: Vec<f64>,
    old_maq: Vec<f64>,
    old_mbq: Vec<f64>,
    old_pq: Vec<f64>,
}

impl<'a> MoveState<'a> {
    pub(crate) fn new(inst: &'a Instance, ch: Vec<f64>) -> Self {
        let mut st = MoveState {
            inst,
            nq: inst.nq,
            ch,
            m_aq: vec![0.0; inst.na * inst.nq],
            m_bq: vec![0.0; inst.nb * inst.nq],
            p_q: vec![0.0; inst.nq],
            s_w: 0.0,
            s_aq: 0.0,
            s_bq: 0.0,
            s_q: 0.0,
            moves_since_refresh: 0,
            old_row: vec![0.0; inst.nq],
            old_maq: vec![0.0; inst.nq],
            old_mbq: vec![0.0; inst.nq],
            old_pq: vec![0.0; inst.nq],
        };
        st.refresh();
        st
    }

    /// Replaces an entire row of the channel, updating marginals and sums
    /// in `O(nq)`; keeps the move iff `score` improves by more than `eps`,
    /// rolling back otherwise. Returns whether the move was kept.
    pub(crate) fn try_replace_row(
        &mut self,
        row: usize,
        new_row: &[f64],
        eps: f64,
        score: &dyn Fn(&MoveState) -> f64,
    ) -> bool {
        let nq = self.nq;
        let p = self.inst.p_ab[row];
        let a = row / self.inst.nb;
        let b = row % self.inst.nb;
        let before = score(self);
        let old_sums = (self.s_w, self.s_aq, self.s_bq, self.s_q);
        self.old_row.copy_from_slice(&self.ch[row * nq..(row + 1) * nq]);
        self.old_maq.copy_from_slice(&self.m_aq[a * nq..(a + 1) * nq]);
        self.old_mbq.copy_from_slice(&self.m_bq[b * nq..(b + 1) * nq]);
        self.old_pq.copy_from_slice(&self.p_q);
        for q in 0..nq {
            let w_old = p * self.old_row[q];
            let w_new = p * new_row[q];
            let dm = w_new - w_old;
            self.s_w += plogp(w_new) - plogp(w_old);
            self.s_aq -= plogp(self.m_aq[a * nq + q]);
            self.s_bq -= plogp(self.m_bq[b * nq + q]);
            self.s_q -= plogp(self.p_q[q]);
            self.m_aq[a * nq + q] += dm;
            self.m_bq[b * nq + q] += dm;
            self.p_q[q] += dm;
            self.s_aq += plogp(self.m_aq[a * nq + q]);
            self.s_bq += plogp(self.m_bq[b * nq + q]);
            self.s_q += plogp(self.p_q[q]);
            self.ch[row * nq + q] = new_row[q];
        }
        if score(self) < before - eps {
            self.moves_since_refresh += 1;
            if self.moves_since_refresh >= 4096 {
                self.refresh();
            }
            true
        } else {
            self.ch[row * nq..(row + 1) * nq].copy_from_slice(&self.old_row);
            self.m_aq[a * nq..(a + 1) * nq].copy_from_slice(&self.old_maq);
            self.m_bq[b * nq..(b + 1) * nq].copy_from_slice(&self.old_mbq);
            self.p_q.copy_from_slice(&self.old_pq);
            (self.s_w, self.s_aq, self.s_bq, self.s_q) = old_sums;
            false
        }
    }

    pub(crate) fn refresh(&mut self) {
        let nq = self.nq;
        self.m_aq.iter_mut().for_each(|v| *v = 0.0);
        self.m_bq.iter_mut().for_each(|v| *v = 0.0);
        self.p_q.iter_mut().for_each(|v| *v = 0.0);
        self.s_w = 0.0;
        for a in 0..self.inst.na {
            for b in 0..self.inst.nb {
                let r = a * self.inst.nb + b;
                let p = self.inst.p_ab[r];
                if p <= 0.0 {
                    continue;
                }
                for q in 0..nq {
                    let w = p * self.ch[r * nq + q];
                    self.m_aq[a * nq + q] += w;
                    self.m_bq[b * nq + q] += w;
                    self.p_q[q] += w;
                    self.s_w += plogp(w);
                }
            }
        }
        self.s_aq = self.m_aq.iter().copied().map(plogp).sum();
        self.s_bq = self.m_bq.iter().copied().map(plogp).sum();
        self.s_q = self.p_q.iter().copied().map(plogp).sum();
        self.moves_since_refresh = 0;
    }

    pub(crate) fn costs(&self) -> (f64, f64, f64) {
        let i = self.inst;
        let r1 = self.s_w + i.s_a - i.s_ab - self.s_aq;
        let r2 = self.s_w + i.s_b - i.s_ab - self.s_bq;
        let r3 = self.s_w + self.s_q - self.s_aq - self.s_bq;
        (r1, r2, r3)
    }

    pub(crate) fn into_channel(self) -> Vec<f64> {
        self.ch
    }

    pub(crate) fn eval(&self) -> Eval {
        let (r1, r2, r3) = self.costs();
        Eval { r1, r2, r3, i_abq: self.s_w - self.inst.s_ab - self.s_q }
    }

    pub(crate) fn value(&self, lambda: f64) -> f64 {
        let (r1, r2, r3) = self.costs();
        r1 + r2 + lambda * r3.max(0.0)
    }

    /// Applies `row: q_i -> q_j` by `amount`; returns `true` (keeping the
    /// move) iff the linear-penalty value improves by more than `1e-12`.
    pub(crate) fn try_move(&mut self, row: usize, i: usize, j: usize, amount: f64, lambda: f64) -> bool {
        self.try_move_scored(row, i, j, amount, &move |st: &MoveState| st.value(lambda))
    }

    /// Applies `row: q_i -> q_j` by `amount`; returns `true` (keeping the
    /// move) iff `score` improves by more than `1e-12`.
    pub(crate) fn try_move_scored(
        &mut self,
        row: usize,
        i: usize,
        j: usize,
        amount: f64,
        score: &dyn Fn(&MoveState) -> f64,
    ) -> bool {
        let nq = self.nq;
        let p = self.inst.p_ab[row];
        let a = row / self.inst.nb;
        let b = row % self.inst.nb;
        let before = score(self);
        let (ri, rj) = (row * nq + i, row * nq + j);
        let (ai, aj) = (a * nq + i, a * nq + j);
        let (bi, bj) = (b * nq + i, b * nq + j);
        let old = (
            self.ch[ri], self.ch[rj],
            self.m_aq[ai], self.m_aq[aj],
            self.m_bq[bi], self.m_bq[bj],
            self.p_q[i], self.p_q[j],
            self.s_w, self.s_aq, self.s_bq, self.s_q,
        );
        let dm = p * amount;
        self.s_w -= plogp(p * self.ch[ri]) + plogp(p * self.ch[rj]);
        self.s_aq -= plogp(self.m_aq[ai]) + plogp(self.m_aq[aj]);
        self.s_bq -= plogp(self.m_bq[bi]) + plogp(self.m_bq[bj]);
        self.s_q -= plogp(self.p_q[i]) + plogp(self.p_q[j]);
        self.ch[ri] -= amount;
        self.ch[rj] += amount;
        self.m_aq[ai] -= dm;
        self.m_aq[aj] += dm;
        self.m_bq[bi] -= dm;
        self.m_bq[bj] += dm;
        self.p_q[i] -= dm;
        self.p_q[j] += dm;
        self.s_w += plogp(p * self.ch[ri]) + plogp(p * self.ch[rj]);
        self.s_aq += plogp(self.m_aq[ai]) + plogp(self.m_aq[aj]);
        self.s_bq += plogp(self.m_bq[bi]) + plogp(self.m_bq[bj]);
        self.s_q += plogp(self.p_q[i]) + plogp(self.p_q[j]);
        if score(self) < before - 1e-12 {
            self.moves_since_refresh += 1;
            if self.moves_since_refresh >= 4096 {
                self.refresh();
            }
            true
        } else {
            (
                self.ch[ri], self.ch[rj],
                self.m_aq[ai], self.m_aq[aj],
                self.m_bq[bi], self.m_bq[bj],
                self.p_q[i], self.p_q[j],
                self.s_w, self.s_aq, self.s_bq, self.s_q,
            ) = old;
            false
        }
    }
}

/// Pattern-move polish with penalty continuation: finite moves at a soft
/// penalty can relocate across basins, escaping the stationary points that
/// trap row-gradient updates; the stiff end restores feasibility. Applied
/// to the most promising restarts only.
pub(crate) fn ladder_polish(
    inst: &Instance,
    objective: Objective,
    c_cap: f64,
    ch: Vec<f64>,
) -> Vec<f64> {
    let nq = inst.nq;
    let rows = inst.rows();
    let ladder: &[f64] = if objective.constrained() {
        &[4.0, 64.0, 1024.0, 1e6, 1e9]
    } else {
        &[0.0]
    };
    let mut st = MoveState::new(inst, ch);
    for &lambda in ladder {
        let score = move |s: &MoveState| {
            let e = s.eval();
            objective.value(&e) + lambda * (e.r3 - c_cap).max(0.0)
        };
        let mut delta = 0.05f64;
        while delta > 1e-6 {
            let mut sweeps = 0;
            loop {
                let mut improved = false;
                for row in 0..rows {
                    if inst.p_ab[row] <= 0.0 {
                        continue;
                    }
                    for i in 0..nq {
                        for j in 0..nq {
                            if i == j || st.ch[row * nq + i] <= 0.0 {
                                continue;
                            }
                            let amount = delta.min(st.ch[row * nq + i]);
                            if amount > 0.0 && st.try_move_scored(row, i, j, amount, &score) {
                                improved = true;
                            }
                        }
                    }
                }
                sweeps += 1;
                if !improved || sweeps >= 30 {
                    break;
                }
            }
            delta *= 0.5;
        }
        st.refresh();
    }
    let polished = st.ch;
    if objective.constrained() {
        let e = Instance::evaluate(inst, &polished);
        if (e.r3 - c_cap).max(0.0) > 1e-9 {
            return ensure_feasible(inst, c_cap, polished);
        }
    }
    polished
}

/// Violation-reduction pipeline: gradient descent, a discrete pattern-move
/// escape for interior stationary points, and a final gradient polish.
pub(crate) fn ensure_feasible(inst: &Instance, c_cap: f64, ch: Vec<f64>) -> Vec<f64> {
    let ch = feasibility_descent(inst, c_cap, ch, 2000);
    let e = inst.evaluate(&ch);
    if (e.r3 - c_cap).max(0.0) > 1e-9 {
        let ch = pattern_feasibility(inst, c_cap, ch, 1e-10);
        return feasibility_descent(inst, c_cap, ch, 1000);
    }
    ch
}

/// Discrete escape for feasibility: gradient descent stalls at interior
/// stationary points of `I(A;B|Q)` with small positive value, while
/// finite mass-shuttling moves hop past them.
fn pattern_feasibility(inst: &Instance, c_cap: f64, ch: Vec<f64>, target: f64) -> Vec<f64> {
    let nq = inst.nq;
    let mut st = MoveState::new(inst, ch);
    let lambda = 1e9;
    let mut delta = 0.05f64;
    while delta > 1e-6 {
        if st.costs().2 - c_cap <= target {
            break;
        }
        let mut sweeps = 0;
        loop {
            let mut improved = false;
            for row in 0..inst.rows() {
                if inst.p_ab[row] <= 0.0 {
                    continue;
                }
                for i in 0..nq {
                    for j in 0..nq {
                        if i == j || st.ch[row * nq + i] <= 0.0 {
                            continue;
                        }
                        let amount = delta.min(st.ch[row * nq + i]);
                        if amount > 0.0 && st.try_move(row, i, j, amount, lambda) {
                            improved = true;
                        }
                    }
                }
            }
            sweeps += 1;
            if !improved || sweeps >= 40 {
                break;
            }
        }
        delta *= 0.5;
    }
    st.ch
}

/// Gradient descent on `max(0, r3 - c)^2` alone, stepping every row at once.
fn feasibility_descent(inst: &Instance, c_cap: f64, mut ch: Vec<f64>, iters: usize) -> Vec<f64> {
    let rows = inst.rows();
    let nq = inst.nq;
    let mut scratch = inst.make_scratch();
    let mut grad = vec![0.0; rows * nq];
    let mut trial = vec![0.0; rows * nq];
    let mut step = 0.25f64;
    let mut eval = inst.evaluate_with(&ch, &mut scratch);
    for _ in 0..iters {
        let viol = (eval.r3 - c_cap).max(0.0);
        if viol <= 1e-11 {
            break;
        }
        for row in 0..rows {
            let p = inst.p_ab[row];
            let a = row / inst.nb;
            let b = row % inst.nb;
            for q in 0..nq {
                if p <= 0.0 {
                    grad[row * nq + q] = 0.0;
                    continue;
                }
                let w = p * ch[row * nq + q];
                let d3 = safe_log2(w) + safe_log2(scratch.p_q[q])
                    - safe_log2(scratch.m_aq[a * nq + q])
                    - safe_log2(scratch.m_bq[b * nq + q]);
                grad[row * nq + q] = 2.0 * viol * p * d3;
            }
        }
        let v0 = viol * viol;
        let mut accepted = false;
        let mut s = step;
        for _ in 0..70 {
            for i in 0..rows * nq {
                trial[i] = ch[i] - s * grad[i];
            }
            for row in 0..rows {
                project_simplex(&mut trial[row * nq..(row + 1) * nq]);
            }
            let e = inst.evaluate_with(&trial, &mut scratch);
            if (e.r3 - c_cap).max(0.0).powi(2) < v0 {
                ch.copy_from_slice(&trial);
                eval = e;
                step = (s * 1.8).min(8.0);
                accepted = true;
                break;
            }
            s *= 0.5;
            if s < 1e-18 {
                break;
            }
        }
        if !accepted {
            break;
        }
    }
    ch
}

/// Deterministic split/merge variants of a channel, for basin hopping on
/// the symbol-structure lattice: merging near-duplicate output symbols and
/// splitting heavy ones escapes the degenerate optima that trap both
/// gradient and pattern refinement.
pub(crate) fn split_merge_variants(inst: &Instance, ch: &[f64]) -> Vec<Vec<f64>> {
    let nq = inst.nq;
    let rows = inst.rows();
    let mut p_q = vec![0.0; nq];
    for (r, &p) in inst.p_ab.iter().enumerate() {
        for q in 0..nq {
            p_q[q] += p * ch[r * nq + q];
        }
    }
    let active: Vec<usize> = (0..nq).filter(|&q| p_q[q] > 1e-9).collect();
    let mut variants = Vec::new();
    // merges of the most similar active posterior pairs
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, &qi) in active.iter().enumerate() {
        for &qj in active.iter().skip(i + 1) {
            let mut dot = 0.0;
            let mut ni = 0.0;
            let mut nj = 0.0;
            for r in 0..rows {
                let wi = inst.p_ab[r] * ch[r * nq + qi] / p_q[qi];
                let wj = inst.p_ab[r] * ch[r * nq + qj] / p_q[qj];
                dot += wi * wj;
                ni += wi * wi;
                nj += wj * wj;
            }
            let cos = dot / (ni.sqrt() * nj.sqrt()).max(1e-300);
            pairs.push((cos, qi, qj));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    for &(_, qi, qj) in pairs.iter().take(6) {
        let mut v = ch.to_vec();
        for r in 0..rows {
            v[r * nq + qj] += v[r * nq + qi];
            v[r * nq + qi] = 0.0;
        }
        variants.push(v);
    }
    // splits of the heaviest symbols along each input side
    let mut heavy: Vec<usize> = active.clone();
    heavy.sort_by(|&u, &v| p_q[v].total_cmp(&p_q[u]).then(u.cmp(&v)));
    let spare: Vec<usize> = (0..nq).filter(|&q| p_q[q] <= 1e-9).collect();
    for (k, &q) in heavy.iter().take(3).enumerate() {
        let Some(&fresh) = spare.get(k) else { break };
        for by_a in [true, false] {
            let n_side = if by_a { inst.na } else { inst.nb };
            // likelihood-ratio order of the side's symbols under q
            let mut ratio: Vec<(f64, usize)> = (0..n_side)
                .map(|s| {
                    let mut joint = 0.0;
                    let mut marg = 0.0;
                    for r in 0..rows {
                        let side = if by_a { r / inst.nb } else { r % inst.nb };
                        if side == s {
                            joint += inst.p_ab[r] * ch[r * nq + q];
                            marg += inst.p_ab[r];
                        }
                    }
                    (joint / marg.max(1e-300), s)
                })
                .collect();
            ratio.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let upper: Vec<usize> = ratio.iter().take(n_side / 2).map(|&(_, s)| s).collect();
            let mut v = ch.to_vec();
            for r in 0..rows {
                let side = if by_a { r / inst.nb } else { r % inst.nb };
                if upper.contains(&side) {
                    v[r * nq + fresh] += v[r * nq + q];
                    v[r * nq + q] = 0.0;
                }
            }
            variants.push(v);
        }
    }
    variants
}

/// Sparse start: a small global symbol set shared by all rows, each row a
/// grid-snapped distribution over it. Mimics a small-alphabet search inside
/// the full-cardinality parameterization.
pub fn sparse_random_channel(rows: usize, nq: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
    let k = rng.gen_range(2..=4.min(nq));
    let mut symbols: Vec<usize> = Vec::with_capacity(k);
    while symbols.len() < k {
        let q = rng.gen_range(0..nq);
        if !symbols.contains(&q) {
            symbols.push(q);
        }
    }
    let mut ch = vec![0.0; rows * nq];
    for r in 0..rows {
        let mut left = 20i32;
        for (idx, &q) in symbols.iter().enumerate() {
            let ticks = if idx + 1 == k { left } else { rng.gen_range(0..=left) };
            ch[r * nq + q] = ticks as f64 * 0.05;
            left -= ticks;
        }
    }
    ch
}

/// Deterministic random start: rows drawn from a flat Dirichlet.
pub fn random_channel(rows: usize, nq: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
    let mut ch = vec![0.0; rows * nq];
    for r in 0..rows {
        let mut total = 0.0;
        for q in 0..nq {
            let e = -(rng.gen_range(1e-12..1.0f64)).ln();
            ch[r * nq + q] = e;
            total += e;
        }
        for q in 0..nq {
            ch[r * nq + q] /= total;
        }
    }
    ch
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection_properties() {
        let mut v = vec![0.4, 0.4, 0.4];
        project_simplex(&mut v);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for x in &v {
            assert!((*x - 1.0 / 3.0).abs() < 1e-12);
        }
        let mut v = vec![2.0, -1.0];
        project_simplex(&mut v);
        assert_eq!(v, vec![1.0, 0.0]);
    }

    #[test]
    fn evaluate_identity_channel() {
        // X = Y uniform bit, Q = (A,B) identity: r1 = r2 = r3 = 0, I(AB;Q) = 1
        let inst = Instance::new(vec![0.5, 0.0, 0.0, 0.5], 2, 2, 4);
        let mut ch = vec![0.0; 16];
        for r in 0..4 {
            ch[r * 4 + r] = 1.0;
        }
        let e = inst.evaluate(&ch);
        assert!(e.r1.abs() < 1e-12);
        assert!(e.r2.abs() < 1e-12);
        assert!(e.r3.abs() < 1e-12);
        assert!((e.i_abq - 1.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_constant_channel() {
        let inst = Instance::new(vec![0.45, 0.05, 0.05, 0.45], 2, 2, 3);
        let ch: Vec<f64> = (0..4).flat_map(|_| [1.0, 0.0, 0.0]).collect();
        let e = inst.evaluate(&ch);
        assert!(e.r1.abs() < 1e-12 && e.r2.abs() < 1e-12);
        assert!((e.r3 - inst.base_mi()).abs() < 1e-12);
        assert!(e.i_abq.abs() < 1e-12);
    }

    #[test]
    fn solve_reaches_zero_on_equal_bits() {
        // A = B uniform: Q = A is feasible with zero cost
        let inst = Instance::new(vec![0.5, 0.0, 0.0, 0.5], 2, 2, 6);
        let mut init = vec![0.0; 4 * 6];
        for r in 0..4 {
            init[r * 6 + (r / 2)] = 1.0; // Q = A
        }
        let sol = solve_from(
            &inst,
            Objective::SumConditional,
            &SolveOptions { c_cap: 0.0, iters: 200, tol: 1e-8, polish: true },
            init,
        );
        assert!(sol.violation < 1e-9);
        assert!(sol.objective < 1e-9);
    }
}
