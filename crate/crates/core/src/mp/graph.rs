use alloc::vec::Vec;
use core::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::factors::{damped_assign, or_update, pool_update, pool_update_weighted};
use super::FactorKind;
use crate::error::{Error, Result};
use crate::ext::{ExtSum, INF, NEG_INF};
use crate::model::trees::{andor_tree_update, class_tree_update};

pub type VarId = u32;
pub type FactorId = u32;

const NO_WEIGHTS: u32 = u32::MAX;

/// Hard evidence on a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clamp {
    #[default]
    Free,
    Zero,
    One,
}

/// Which outgoing messages of a factor a visit rewrites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Targets {
    All,
    /// Messages to the variables above the factor.
    Tops,
    /// Messages to the variables below the factor.
    Bottoms,
}

impl Targets {
    #[inline]
    fn includes(self, kind: FactorKind, slot: usize) -> bool {
        match self {
            Targets::All => true,
            Targets::Tops => kind.is_top(slot),
            Targets::Bottoms => !kind.is_top(slot),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Visit {
    pub factor: FactorId,
    pub targets: Targets,
    pub alpha: f64,
}

impl Visit {
    pub fn full(factor: FactorId) -> Self {
        Visit { factor, targets: Targets::All, alpha: 1.0 }
    }
}

/// An ordered list of factor visits. With `shuffle` set, the order is redrawn
/// from the graph's generator before every sweep.
#[derive(Debug, Clone, Default)]
pub struct Schedule {
    pub visits: Vec<Visit>,
    pub shuffle: bool,
}

impl Schedule {
    pub fn sequential(visits: Vec<Visit>) -> Self {
        Schedule { visits, shuffle: false }
    }

    pub fn random_order(visits: Vec<Visit>) -> Self {
        Schedule { visits, shuffle: true }
    }
}

/// Max-marginal differences, one per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Beliefs {
    pub values: Vec<f64>,
}

impl Beliefs {
    pub fn get(&self, v: VarId) -> f64 {
        self.values[v as usize]
    }

    /// MAP decoding: on iff the max-marginal difference is positive.
    pub fn decode(&self) -> Vec<bool> {
        self.values.iter().map(|&b| b > 0.0).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Factor {
    kind: FactorKind,
    start: u32,
    len: u32,
    weights: u32,
}

/// A binary factor graph holding one normalized message per factor-to-variable
/// edge.
///
/// Beliefs are cached per variable as the sum of all incoming factor messages
/// and updated whenever a message changes, so one factor visit costs time
/// linear in its arity. The unary prior and the clamp are kept apart from the
/// cached sum.
#[derive(Debug, Clone)]
pub struct FactorGraph {
    prior: Vec<f64>,
    clamp: Vec<Clamp>,
    acc: Vec<ExtSum>,
    factors: Vec<Factor>,
    slot_var: Vec<VarId>,
    msg: Vec<f64>,
    pool_weights: Vec<f64>,
    rng: ChaCha8Rng,
    scratch_in: Vec<f64>,
    scratch_out: Vec<f64>,
}

impl FactorGraph {
    pub fn new(seed: u64) -> Self {
        FactorGraph {
            prior: Vec::new(),
            clamp: Vec::new(),
            acc: Vec::new(),
            factors: Vec::new(),
            slot_var: Vec::new(),
            msg: Vec::new(),
            pool_weights: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            scratch_in: Vec::new(),
            scratch_out: Vec::new(),
        }
    }

    pub fn num_variables(&self) -> usize {
        self.prior.len()
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    /// Number of stored factor-to-variable messages.
    pub fn num_messages(&self) -> usize {
        self.msg.len()
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn add_variable(&mut self, prior: f64) -> VarId {
        self.add_variables(1, prior).start
    }

    pub fn add_variables(&mut self, n: usize, prior: f64) -> Range<VarId> {
        let start = self.prior.len() as VarId;
        self.prior.resize(self.prior.len() + n, prior);
        self.clamp.resize(self.prior.len(), Clamp::Free);
        self.acc.resize(self.prior.len(), ExtSum::default());
        start..self.prior.len() as VarId
    }

    pub fn prior(&self, v: VarId) -> f64 {
        self.prior[v as usize]
    }

    pub fn set_prior(&mut self, v: VarId, prior: f64) {
        debug_assert!(prior.is_finite(), "use clamp() for hard evidence");
        self.prior[v as usize] = prior;
    }

    pub fn clamp(&mut self, v: VarId, c: Clamp) {
        self.clamp[v as usize] = c;
    }

    pub fn clamp_state(&self, v: VarId) -> Clamp {
        self.clamp[v as usize]
    }

    pub fn add_factor(&mut self, kind: FactorKind, vars: &[VarId]) -> Result<FactorId> {
        self.push_factor(kind, vars, NO_WEIGHTS)
    }

    /// A POOL whose bottoms carry individual log potentials instead of the
    /// uniform `-log M`.
    pub fn add_weighted_pool(&mut self, top: VarId, bottoms: &[VarId], log_weights: &[f64]) -> Result<FactorId> {
        if bottoms.len() != log_weights.len() {
            return Err(Error::Shape("one log weight per pool bottom"));
        }
        let w = self.pool_weights.len() as u32;
        self.pool_weights.extend_from_slice(log_weights);
        let mut vars = Vec::with_capacity(bottoms.len() + 1);
        vars.push(top);
        vars.extend_from_slice(bottoms);
        self.push_factor(FactorKind::Pool, &vars, w)
    }

    fn push_factor(&mut self, kind: FactorKind, vars: &[VarId], weights: u32) -> Result<FactorId> {
        if !kind.check_arity(vars.len()) {
            return Err(Error::Shape("arity does not match factor kind"));
        }
        if vars.iter().any(|&v| v as usize >= self.prior.len()) {
            return Err(Error::Shape("factor references unknown variable"));
        }
        let id = self.factors.len() as FactorId;
        self.factors.push(Factor { kind, start: self.msg.len() as u32, len: vars.len() as u32, weights });
        self.slot_var.extend_from_slice(vars);
        // a zero message leaves the cached beliefs unchanged
        self.msg.resize(self.msg.len() + vars.len(), 0.0);
        Ok(id)
    }

    pub fn kind(&self, f: FactorId) -> FactorKind {
        self.factors[f as usize].kind
    }

    pub fn neighbors(&self, f: FactorId) -> &[VarId] {
        let fa = self.factors[f as usize];
        &self.slot_var[fa.start as usize..(fa.start + fa.len) as usize]
    }

    pub fn messages(&self, f: FactorId) -> &[f64] {
        let fa = self.factors[f as usize];
        &self.msg[fa.start as usize..(fa.start + fa.len) as usize]
    }

    pub fn pool_log_weights(&self, f: FactorId) -> Option<&[f64]> {
        let fa = self.factors[f as usize];
        (fa.weights != NO_WEIGHTS)
            .then(|| &self.pool_weights[fa.weights as usize..(fa.weights + fa.len - 1) as usize])
    }

    /// Overwrites one stored message, keeping the cached belief in sync.
    pub fn set_message(&mut self, f: FactorId, slot: usize, value: f64) {
        let i = self.factors[f as usize].start as usize + slot;
        let v = self.slot_var[i] as usize;
        self.acc[v].remove(self.msg[i]);
        self.acc[v].add(value);
        self.msg[i] = value;
    }

    /// Sets every message whose slot satisfies `targets` to `value`.
    pub fn fill_messages(&mut self, f: FactorId, targets: Targets, value: f64) {
        let fa = self.factors[f as usize];
        for slot in 0..fa.len as usize {
            if targets.includes(fa.kind, slot) {
                self.set_message(f, slot, value);
            }
        }
    }

    /// Approximate max-marginal difference of `v`: prior plus all incoming
    /// factor messages, or `±inf` when clamped.
    pub fn belief(&self, v: VarId) -> Result<f64> {
        let v = v as usize;
        match self.clamp[v] {
            Clamp::One => Ok(INF),
            Clamp::Zero => Ok(NEG_INF),
            Clamp::Free => {
                let mut s = self.acc[v];
                s.add(self.prior[v]);
                s.value()
            }
        }
    }

    pub fn beliefs(&self) -> Result<Beliefs> {
        let values = (0..self.prior.len() as VarId).map(|v| self.belief(v)).collect::<Result<_>>()?;
        Ok(Beliefs { values })
    }

    /// Recomputes the cached sums from the stored messages, dropping any
    /// rounding drift accumulated by incremental updates.
    pub fn recompute_beliefs(&mut self) {
        self.acc.iter_mut().for_each(|a| *a = ExtSum::default());
        for (&v, &m) in self.slot_var.iter().zip(&self.msg) {
            self.acc[v as usize].add(m);
        }
    }

    /// Message into factor slot `i` from its variable (the belief without the
    /// factor's own contribution).
    #[inline]
    fn incoming_at(&self, i: usize) -> Result<f64> {
        let v = self.slot_var[i] as usize;
        match self.clamp[v] {
            Clamp::One => Ok(INF),
            Clamp::Zero => Ok(NEG_INF),
            Clamp::Free => self.acc[v].value_without(self.msg[i], self.prior[v]),
        }
    }

    pub fn incoming(&self, f: FactorId, slot: usize) -> Result<f64> {
        self.incoming_at(self.factors[f as usize].start as usize + slot)
    }

    /// Recomputes the outgoing messages of `f` from its current incoming
    /// messages and writes the `targets` ones with damping `alpha`.
    ///
    /// Returns the largest absolute change among the written messages.
    pub fn update_factor(&mut self, f: FactorId, targets: Targets, alpha: f64) -> Result<f64> {
        let fa = self.factors[f as usize];
        let (start, n) = (fa.start as usize, fa.len as usize);
        let mut inc = core::mem::take(&mut self.scratch_in);
        let mut out = core::mem::take(&mut self.scratch_out);
        inc.clear();
        out.clear();
        out.resize(n, 0.0);
        let res = (|| {
            for i in start..start + n {
                inc.push(self.incoming_at(i)?);
            }
            self.compute(fa, &inc, &mut out)
        })();
        let mut delta = 0.0f64;
        if res.is_ok() {
            for (slot, &fresh) in out.iter().enumerate() {
                if !targets.includes(fa.kind, slot) {
                    continue;
                }
                let i = start + slot;
                let old = self.msg[i];
                let new = damped_assign(old, fresh, alpha);
                if new != old {
                    let v = self.slot_var[i] as usize;
                    self.acc[v].remove(old);
                    self.acc[v].add(new);
                    self.msg[i] = new;
                    let d = if old.is_finite() && new.is_finite() { (new - old).abs() } else { INF };
                    delta = delta.max(d);
                }
            }
        }
        self.scratch_in = inc;
        self.scratch_out = out;
        res.map(|_| delta).map_err(|e| e.at_factor(f as usize))
    }

    fn compute(&self, fa: Factor, inc: &[f64], out: &mut [f64]) -> Result<()> {
        match fa.kind {
            FactorKind::And => {
                let m = super::and_update(inc[0], inc[1], inc[2])?;
                out.copy_from_slice(&[m.t1, m.t2, m.b]);
            }
            FactorKind::Or => {
                out[0] = or_update(&inc[1..], inc[0], &mut out[1..])?;
            }
            FactorKind::Pool => {
                out[0] = if fa.weights == NO_WEIGHTS {
                    pool_update(inc[0], &inc[1..], &mut out[1..])?
                } else {
                    let w = &self.pool_weights[fa.weights as usize..fa.weights as usize + inc.len() - 1];
                    pool_update_weighted(inc[0], &inc[1..], w, &mut out[1..])?
                };
            }
            FactorKind::AndOrTree => andor_tree_update(inc, out)?,
            FactorKind::ClassTree { classes, templates } => {
                class_tree_update(classes as usize, templates as usize, inc, out)?
            }
        }
        Ok(())
    }

    /// Shuffles a visit order with the graph's seeded generator.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }

    /// Runs `iters` sweeps of `schedule` and returns the final beliefs.
    pub fn run_schedule(&mut self, schedule: &Schedule, iters: usize) -> Result<Beliefs> {
        let mut visits = schedule.visits.clone();
        if visits.iter().any(|v| v.factor as usize >= self.factors.len()) {
            return Err(Error::Shape("schedule visits an unknown factor"));
        }
        for _ in 0..iters {
            if schedule.shuffle {
                visits.shuffle(&mut self.rng);
            }
            for v in &visits {
                self.update_factor(v.factor, v.targets, v.alpha)?;
            }
        }
        self.beliefs()
    }

    /// Leaf-to-root then root-to-leaf visit order for a tree-structured graph
    /// rooted at `root`. Returns `None` if the factor graph has a cycle or is
    /// not connected.
    pub fn tree_order(&self, root: VarId) -> Option<Vec<FactorId>> {
        let nv = self.prior.len();
        let mut var_factors: Vec<Vec<FactorId>> = alloc::vec![Vec::new(); nv];
        for f in 0..self.factors.len() as FactorId {
            for &v in self.neighbors(f) {
                var_factors[v as usize].push(f);
            }
        }
        let mut seen_var = alloc::vec![false; nv];
        let mut seen_factor = alloc::vec![false; self.factors.len()];
        let mut order = Vec::new();
        let mut frontier = alloc::vec![root];
        seen_var[root as usize] = true;
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for v in frontier {
                for &f in &var_factors[v as usize] {
                    if seen_factor[f as usize] {
                        continue;
                    }
                    seen_factor[f as usize] = true;
                    order.push(f);
                    for &u in self.neighbors(f) {
                        if u == v {
                            continue;
                        }
                        if seen_var[u as usize] {
                            return None;
                        }
                        seen_var[u as usize] = true;
                        next.push(u);
                    }
                }
            }
            frontier = next;
        }
        if seen_var.iter().any(|s| !s) || seen_factor.iter().any(|s| !s) {
            return None;
        }
        let mut full: Vec<FactorId> = order.iter().rev().copied().collect();
        full.extend_from_slice(&order);
        Some(full)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mp::oracle_factor_update;

    #[test]
    fn fresh_variable_belief_is_prior() {
        let mut g = FactorGraph::new(0);
        let v = g.add_variable(0.0);
        assert_eq!(g.belief(v).unwrap(), 0.0);
        g.clamp(v, Clamp::One);
        assert_eq!(g.belief(v).unwrap(), INF);
    }

    #[test]
    fn belief_adds_factor_messages() {
        let mut g = FactorGraph::new(0);
        let vars: Vec<VarId> = g.add_variables(4, 0.0).collect();
        let a = g.add_factor(FactorKind::Or, &[vars[0], vars[1]]).unwrap();
        let b = g.add_factor(FactorKind::Or, &[vars[0], vars[2], vars[3]]).unwrap();
        g.set_message(a, 0, 0.5);
        g.set_message(b, 0, -0.2);
        assert!((g.belief(vars[0]).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn empty_schedule_returns_priors() {
        let mut g = FactorGraph::new(0);
        g.add_variable(1.5);
        g.add_variable(-0.5);
        let b = g.run_schedule(&Schedule::default(), 10).unwrap();
        assert_eq!(b.values, [1.5, -0.5]);
    }

    #[test]
    fn single_and_pass_matches_oracle() {
        let priors = [0.3, -1.1, 2.0];
        let mut g = FactorGraph::new(0);
        let vars: Vec<VarId> = priors.iter().map(|&p| g.add_variable(p)).collect();
        let f = g.add_factor(FactorKind::And, &vars).unwrap();
        let b = g.run_schedule(&Schedule::sequential(alloc::vec![Visit::full(f)]), 1).unwrap();
        let out = oracle_factor_update(FactorKind::And, None, &priors).unwrap();
        for i in 0..3 {
            assert!((b.values[i] - (priors[i] + out[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn clamped_pool_top_off_forces_bottoms_off() {
        let mut g = FactorGraph::new(0);
        let vars: Vec<VarId> = g.add_variables(4, 0.7).collect();
        let f = g.add_factor(FactorKind::Pool, &vars).unwrap();
        g.clamp(vars[0], Clamp::Zero);
        g.update_factor(f, Targets::All, 1.0).unwrap();
        for &v in &vars[1..] {
            assert_eq!(g.belief(v).unwrap(), NEG_INF);
        }
    }

    #[test]
    fn clamped_or_bottom_off_forces_tops_off() {
        let mut g = FactorGraph::new(0);
        let vars: Vec<VarId> = g.add_variables(3, 0.2).collect();
        let f = g.add_factor(FactorKind::Or, &vars).unwrap();
        g.clamp(vars[0], Clamp::Zero);
        g.update_factor(f, Targets::All, 1.0).unwrap();
        assert_eq!(g.belief(vars[1]).unwrap(), NEG_INF);
        assert_eq!(g.belief(vars[2]).unwrap(), NEG_INF);
    }

    #[test]
    fn targets_limit_written_slots() {
        let mut g = FactorGraph::new(0);
        let vars: Vec<VarId> = [1.0, 2.0, 0.5].iter().map(|&p| g.add_variable(p)).collect();
        let f = g.add_factor(FactorKind::And, &vars).unwrap();
        g.update_factor(f, Targets::Bottoms, 1.0).unwrap();
        assert_eq!(g.messages(f)[0], 0.0);
        assert_eq!(g.messages(f)[2], 1.0);
    }

    #[test]
    fn indeterminate_reports_factor() {
        let mut g = FactorGraph::new(0);
        let vars: Vec<VarId> = g.add_variables(3, 0.0).collect();
        let f = g.add_factor(FactorKind::And, &vars).unwrap();
        g.clamp(vars[1], Clamp::Zero);
        g.clamp(vars[2], Clamp::One);
        assert_eq!(g.update_factor(f, Targets::All, 1.0), Err(Error::Indeterminate { factor: Some(0) }));
    }

    #[test]
    fn rejects_unknown_factor_in_schedule() {
        let mut g = FactorGraph::new(0);
        assert!(g.run_schedule(&Schedule::sequential(alloc::vec![Visit::full(3)]), 1).is_err());
    }
}
